// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <string_view>

#include "qmimo/types.hpp"

namespace qmimo::nn {

enum class Activation { Linear, Relu, ScaledTanh };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

/// alpha * tanh(beta * x). std::tanh saturates cleanly, so large |beta x|
/// never overflows.
double scaled_tanh(double alpha, double beta, double x);
double scaled_tanh_dx(double alpha, double beta, double x);
double scaled_tanh_dbeta(double alpha, double beta, double x);

/// Fully connected layer without bias, y = act(W x).
///
/// A tied layer stores only A and B (each out/2 x in/2) and materializes
///
///     W = [ A  -B ]
///         [ B   A ]
///
/// which acts on stacked [Re x; Im x] exactly like the complex matrix A + iB.
/// The lower-right block always equals the upper-left one and the lower-left
/// block is the negated upper-right one.
class DenseLayer {
public:
    DenseLayer() = default;
    DenseLayer(int out, int in, Activation act, bool tied);

    int out() const { return static_cast<int>(weights_.rows()); }
    int in() const { return static_cast<int>(weights_.cols()); }
    bool tied() const { return tied_; }

    Activation activation = Activation::Linear;
    double alpha = 1.0; // scaled-tanh magnitude
    double beta = 1.0;  // scaled-tanh slope

    /// Full out x in matrix used by forward passes.
    const RealMatrix& weights() const { return weights_; }

    /// Trainable values. Untied: W itself. Tied: [A | B], shape (out/2) x in.
    const RealMatrix& params() const { return params_; }
    void set_params(RealMatrix params);

    /// Untied layers take w as is; tied layers require w to already have the
    /// tied block structure and throw otherwise.
    void set_weights(const RealMatrix& w);

    /// Maps dL/dW (out x in) onto the trainable values: for tied layers
    /// dL/dA = G11 + G22 and dL/dB = G21 - G12.
    RealMatrix fold_gradient(const RealMatrix& full_grad) const;

    /// True when the materialized matrix satisfies the tie bitwise.
    bool tie_holds() const;

    /// Fills the trainable values with N(0, stddev^2) draws.
    void init_gaussian(double stddev, std::mt19937_64& rng);

    double apply(double pre) const;
    double derivative(double pre) const;

private:
    void rebuild();

    bool tied_ = false;
    RealMatrix params_;
    RealMatrix weights_;
};

} // namespace qmimo::nn
