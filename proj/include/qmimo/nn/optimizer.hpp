// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qmimo/nn/network.hpp"

namespace qmimo::nn {

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const OptimizerConfig&) const = default;
};

struct OptimizerState {
    std::vector<RealMatrix> first_moment;
    std::vector<RealMatrix> second_moment;
    long step = 0;

    static OptimizerState for_network(const Network& net);
};

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One Adam update on a single parameter block; `step` is the 1-based count
/// after this update.
void adam_update(RealMatrix& param, const RealMatrix& grad, RealMatrix& m, RealMatrix& v, long step,
                 const OptimizerConfig& cfg);

/// Updates every layer's trainable values in place. Tied layers are
/// rebuilt from their free half, so the block identity holds bitwise after
/// each step. Throws NonFiniteError (naming the layer) before touching any
/// parameter if a gradient entry is NaN or infinite.
void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state, const OptimizerConfig& cfg);

} // namespace qmimo::nn
