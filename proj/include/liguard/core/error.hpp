#pragma once

#include <stdexcept>
#include <string>

namespace liguard {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input bytes or text (PCD, KITTI, PNG, YAML).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid or missing pipeline configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A function parameter violates its contract (e.g. crop min > max).
class ParamError : public Error {
 public:
  using Error::Error;
};

/// A live config patch was refused; the config is left unchanged.
class PatchRejected : public Error {
 public:
  using Error::Error;
};

/// Schedule construction failed (unresolvable enabled entry).
class ScheduleError : public Error {
 public:
  using Error::Error;
};

/// Frame store invariant violation (e.g. misaligned cluster ids).
class SlotError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure while reading or writing pipeline artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace liguard
