#pragma once

// Propensity score weighting for causal subgroup analysis: subgroup-aware
// propensity models (ML, LASSO, post-LASSO), balancing weights (IPW, OW),
// Hajek effect estimation, balance diagnostics with the Connect-S plot,
// variance estimation and a Monte Carlo study harness.

#include "sgw/config.hpp"
#include "sgw/csv.hpp"
#include "sgw/dataset.hpp"
#include "sgw/design.hpp"
#include "sgw/diagnostics.hpp"
#include "sgw/errors.hpp"
#include "sgw/inference.hpp"
#include "sgw/lasso.hpp"
#include "sgw/logistic.hpp"
#include "sgw/manifest.hpp"
#include "sgw/pipeline.hpp"
#include "sgw/rng.hpp"
#include "sgw/sim.hpp"
#include "sgw/svg.hpp"
#include "sgw/weights.hpp"
