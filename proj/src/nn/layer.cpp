// SPDX-License-Identifier: Apache-2.0
#include "qmimo/nn/layer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qmimo::nn {

std::string_view to_string(Activation act)
{
    switch (act) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::ScaledTanh: return "scaled_tanh";
    }
    return "linear";
}

Activation parse_activation(std::string_view name)
{
    if (name == "linear") return Activation::Linear;
    if (name == "relu") return Activation::Relu;
    if (name == "scaled_tanh") return Activation::ScaledTanh;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

double scaled_tanh(double alpha, double beta, double x)
{
    return alpha * std::tanh(beta * x);
}

double scaled_tanh_dx(double alpha, double beta, double x)
{
    const double t = std::tanh(beta * x);
    return alpha * beta * (1.0 - t * t);
}

double scaled_tanh_dbeta(double alpha, double beta, double x)
{
    const double t = std::tanh(beta * x);
    return alpha * x * (1.0 - t * t);
}

DenseLayer::DenseLayer(int out, int in, Activation act, bool tied) : activation(act), tied_(tied)
{
    if (out < 1 || in < 1) throw std::invalid_argument("DenseLayer: dimensions must be positive");
    if (tied && (out % 2 != 0 || in % 2 != 0)) throw std::invalid_argument("DenseLayer: tied layers need even dimensions");
    params_ = tied ? RealMatrix::Zero(out / 2, in) : RealMatrix::Zero(out, in);
    weights_ = RealMatrix::Zero(out, in);
}

void DenseLayer::set_params(RealMatrix params)
{
    if (params.rows() != params_.rows() || params.cols() != params_.cols())
        throw std::invalid_argument("DenseLayer::set_params: shape mismatch");
    params_ = std::move(params);
    rebuild();
}

void DenseLayer::set_weights(const RealMatrix& w)
{
    if (w.rows() != weights_.rows() || w.cols() != weights_.cols())
        throw std::invalid_argument("DenseLayer::set_weights: shape mismatch");
    if (!tied_) {
        set_params(w);
        return;
    }
    const auto h = w.rows() / 2;
    const auto c = w.cols() / 2;
    if (w.bottomRightCorner(h, c) != w.topLeftCorner(h, c) || w.bottomLeftCorner(h, c) != -w.topRightCorner(h, c))
        throw std::invalid_argument("DenseLayer::set_weights: matrix violates the tied block structure");
    RealMatrix p(h, w.cols());
    p.leftCols(c) = w.topLeftCorner(h, c);
    p.rightCols(c) = w.bottomLeftCorner(h, c);
    set_params(std::move(p));
}

void DenseLayer::rebuild()
{
    if (!tied_) {
        weights_ = params_;
        return;
    }
    const auto h = params_.rows();
    const auto c = params_.cols() / 2;
    const auto a = params_.leftCols(c);
    const auto b = params_.rightCols(c);
    weights_.topLeftCorner(h, c) = a;
    weights_.topRightCorner(h, c) = -b;
    weights_.bottomLeftCorner(h, c) = b;
    weights_.bottomRightCorner(h, c) = a;
}

RealMatrix DenseLayer::fold_gradient(const RealMatrix& g) const
{
    if (g.rows() != weights_.rows() || g.cols() != weights_.cols())
        throw std::invalid_argument("DenseLayer::fold_gradient: shape mismatch");
    if (!tied_) return g;
    const auto h = g.rows() / 2;
    const auto c = g.cols() / 2;
    RealMatrix folded(h, g.cols());
    folded.leftCols(c) = g.topLeftCorner(h, c) + g.bottomRightCorner(h, c);
    folded.rightCols(c) = g.bottomLeftCorner(h, c) - g.topRightCorner(h, c);
    return folded;
}

bool DenseLayer::tie_holds() const
{
    if (!tied_) return true;
    const auto h = weights_.rows() / 2;
    const auto c = weights_.cols() / 2;
    return weights_.bottomRightCorner(h, c) == weights_.topLeftCorner(h, c)
        && weights_.bottomLeftCorner(h, c) == -weights_.topRightCorner(h, c);
}

void DenseLayer::init_gaussian(double stddev, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, stddev);
    RealMatrix p(params_.rows(), params_.cols());
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index j = 0; j < p.cols(); ++j)
        for (Eigen::Index i = 0; i < p.rows(); ++i) p(i, j) = normal(rng);
    set_params(std::move(p));
}

double DenseLayer::apply(double pre) const
{
    switch (activation) {
    case Activation::Linear: return pre;
    case Activation::Relu: return pre > 0.0 ? pre : 0.0;
    case Activation::ScaledTanh: return scaled_tanh(alpha, beta, pre);
    }
    return pre;
}

double DenseLayer::derivative(double pre) const
{
    switch (activation) {
    case Activation::Linear: return 1.0;
    case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::ScaledTanh: return scaled_tanh_dx(alpha, beta, pre);
    }
    return 1.0;
}

} // namespace qmimo::nn
