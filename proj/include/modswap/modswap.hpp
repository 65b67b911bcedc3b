#pragma once

// Umbrella header for the live-reconfiguration engine and its deterministic
// container simulator.

#include "modswap/compat.hpp"
#include "modswap/engine.hpp"
#include "modswap/errors.hpp"
#include "modswap/metrics.hpp"
#include "modswap/model.hpp"
#include "modswap/quiescence.hpp"
#include "modswap/runner.hpp"
#include "modswap/runtime.hpp"
#include "modswap/scenario.hpp"
#include "modswap/steps.hpp"
#include "modswap/strategy.hpp"
#include "modswap/trace.hpp"
#include "modswap/value.hpp"
