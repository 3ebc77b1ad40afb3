#pragma once

// Everything except the network service (liguard/service/*.hpp, which needs Boost).

#include "liguard/core/config.hpp"
#include "liguard/core/error.hpp"
#include "liguard/core/frame.hpp"
#include "liguard/core/json.hpp"
#include "liguard/core/types.hpp"

#include "liguard/io/bytes.hpp"
#include "liguard/io/dataset.hpp"
#include "liguard/io/kitti.hpp"
#include "liguard/io/pcd.hpp"
#include "liguard/io/png.hpp"
#include "liguard/io/replay.hpp"

#include "liguard/algo/background.hpp"
#include "liguard/algo/boxes.hpp"
#include "liguard/algo/dbscan.hpp"
#include "liguard/algo/export.hpp"
#include "liguard/algo/labels.hpp"
#include "liguard/algo/point_ops.hpp"
#include "liguard/algo/projection.hpp"
#include "liguard/algo/tracking.hpp"

#include "liguard/engine/builtins.hpp"
#include "liguard/engine/engine.hpp"
#include "liguard/engine/pipeline_dir.hpp"
#include "liguard/engine/plugin.hpp"
#include "liguard/engine/registry.hpp"
#include "liguard/engine/schedule.hpp"

#include "liguard/sim/scenes.hpp"
