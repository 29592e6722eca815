#pragma once

// Umbrella header for the berndesign library: variance-optimal correlated
// Bernoulli treatment-assignment designs, assignment sampling, IPW estimation
// and inference, worst-case robustness analysis, and the Monte Carlo engine.
// JSON serialization lives in json_io.hpp and is not pulled in here.

#include "berndesign/core.hpp"
#include "berndesign/designs.hpp"
#include "berndesign/errors.hpp"
#include "berndesign/estimation.hpp"
#include "berndesign/rng.hpp"
#include "berndesign/robustness.hpp"
#include "berndesign/sim.hpp"
#include "berndesign/solvers.hpp"
