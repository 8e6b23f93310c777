#pragma once

// Bayesian longitudinal tensor quantile regression: umbrella header.

#include "chain.hpp"
#include "data.hpp"
#include "distributions.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "simulate.hpp"
#include "tensor.hpp"
