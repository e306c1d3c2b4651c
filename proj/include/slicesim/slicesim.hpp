#pragma once

#include "slicesim/codec.hpp"
#include "slicesim/controller.hpp"
#include "slicesim/experiment.hpp"
#include "slicesim/flowtable.hpp"
#include "slicesim/metrics.hpp"
#include "slicesim/network.hpp"
#include "slicesim/rng.hpp"
#include "slicesim/routing.hpp"
#include "slicesim/scenario.hpp"
#include "slicesim/sim_kernel.hpp"
#include "slicesim/topology.hpp"
#include "slicesim/track.hpp"
#include "slicesim/tsch.hpp"
#include "slicesim/types.hpp"
#include "slicesim/sdn_node.hpp"
