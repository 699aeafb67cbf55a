// Directional Bayesian quantile regression for multiple-output responses:
// per-direction asymmetric-Laplace Gibbs fits with structured additive
// predictors, a Gaussian-process adjustment that removes quantile crossing,
// and quantile regions assembled from intersected halfspaces.
#ifndef DQR_DQR_HPP
#define DQR_DQR_HPP

#include "dqr/common.hpp"
#include "dqr/geometry.hpp"
#include "dqr/splines.hpp"
#include "dqr/design.hpp"
#include "dqr/sampler.hpp"
#include "dqr/orchestrator.hpp"
#include "dqr/gp_adjust.hpp"
#include "dqr/regions.hpp"
#include "dqr/synthetic.hpp"
#include "dqr/io.hpp"
#include "dqr/config.hpp"
#include "dqr/ingest.hpp"
#include "dqr/pipeline.hpp"

#endif  // DQR_DQR_HPP
