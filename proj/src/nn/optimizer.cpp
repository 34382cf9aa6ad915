// SPDX-License-Identifier: Apache-2.0
#include "qmimo/nn/optimizer.hpp"

#include <cmath>

namespace qmimo::nn {

std::string_view to_string(OptimizerKind kind)
{
    return kind == OptimizerKind::Sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name)
{
    if (name == "sgd" || name == "SGD") return OptimizerKind::Sgd;
    if (name == "adam" || name == "Adam") return OptimizerKind::Adam;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

OptimizerState OptimizerState::for_network(const Network& net)
{
    OptimizerState st;
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        const auto& p = net.layer(i).params();
        st.first_moment.push_back(RealMatrix::Zero(p.rows(), p.cols()));
        st.second_moment.push_back(RealMatrix::Zero(p.rows(), p.cols()));
    }
    return st;
}

void adam_update(RealMatrix& param, const RealMatrix& grad, RealMatrix& m, RealMatrix& v, long step,
                 const OptimizerConfig& cfg)
{
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state, const OptimizerConfig& cfg)
{
    if (grads.params.size() != net.layer_count()) throw std::invalid_argument("optimizer_step: gradient count mismatch");
    if (cfg.kind == OptimizerKind::Adam && state.first_moment.size() != net.layer_count())
        throw std::invalid_argument("optimizer_step: optimizer state does not match the network");
    for (std::size_t i = 0; i < grads.params.size(); ++i) {
        const auto& g = grads.params[i];
        const auto& p = net.layer(i).params();
        if (g.rows() != p.rows() || g.cols() != p.cols())
            throw std::invalid_argument("optimizer_step: gradient shape mismatch at layer " + std::to_string(i));
        if (!g.allFinite()) throw NonFiniteError("non-finite gradient at layer " + std::to_string(i));
    }
    ++state.step;
    for (std::size_t i = 0; i < grads.params.size(); ++i) {
        DenseLayer& layer = net.layer(i);
        RealMatrix p = layer.params();
        if (cfg.kind == OptimizerKind::Sgd) {
            p -= cfg.learning_rate * grads.params[i];
        } else {
            adam_update(p, grads.params[i], state.first_moment[i], state.second_moment[i], state.step, cfg);
        }
        layer.set_params(std::move(p));
    }
}

} // namespace qmimo::nn
