// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "qmimo/nn/network.hpp"

namespace qmimo::nn {

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_layer = 0;
    Eigen::Index worst_row = 0;
    Eigen::Index worst_col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
};

/// Gradients below this fraction of max(1, |loss|) are at the level of
/// central-difference roundoff (about 1e-11 |loss| at step 1e-5) and are
/// compared on that absolute scale instead of relative to themselves.
inline constexpr double kGradCheckFloor = 1e-6;

/// Central-difference check of backward() over every trainable value:
/// max |analytic - numeric| / max(|analytic|, |numeric|, floor), with
/// floor = kGradCheckFloor * max(1, |loss|).
GradCheckReport grad_check(const Network& net, const RealMatrix& input, const RealMatrix& symbol_targets,
                           const RealMatrix& recon_targets, const LossWeights& weights, double step = 1e-5);

} // namespace qmimo::nn
