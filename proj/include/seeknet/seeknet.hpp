#pragma once

// Umbrella header for the whole stack.

#include "seeknet/core.hpp"
#include "seeknet/engine.hpp"
#include "seeknet/link_model.hpp"
#include "seeknet/mac.hpp"
#include "seeknet/medium.hpp"
#include "seeknet/metrics.hpp"
#include "seeknet/rng.hpp"
#include "seeknet/routing.hpp"
#include "seeknet/scenario.hpp"
#include "seeknet/scenario_json.hpp"
#include "seeknet/trace.hpp"
