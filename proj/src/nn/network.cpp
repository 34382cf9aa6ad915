// SPDX-License-Identifier: Apache-2.0
#include "qmimo/nn/network.hpp"

#include <stdexcept>
#include <string>

namespace qmimo::nn {

namespace {

RealMatrix activate(const DenseLayer& layer, const RealMatrix& pre)
{
    switch (layer.activation) {
    case Activation::Linear: return pre;
    case Activation::Relu: return pre.cwiseMax(0.0);
    case Activation::ScaledTanh: return layer.alpha * (layer.beta * pre.array()).tanh().matrix();
    }
    return pre;
}

// delta_pre = delta_out .* act'(pre)
RealMatrix through_activation(const DenseLayer& layer, const RealMatrix& pre, const RealMatrix& delta_out)
{
    switch (layer.activation) {
    case Activation::Linear: return delta_out;
    case Activation::Relu: return (pre.array() > 0.0).select(delta_out, 0.0);
    case Activation::ScaledTanh: {
        const Eigen::ArrayXXd t = (layer.beta * pre.array()).tanh();
        return (delta_out.array() * (layer.alpha * layer.beta) * (1.0 - t * t)).matrix();
    }
    }
    return delta_out;
}

void check_input(const Network& net, const RealMatrix& input)
{
    if (input.rows() != net.input_dim())
        throw std::invalid_argument("forward: input has " + std::to_string(input.rows()) + " rows, network expects "
                                    + std::to_string(net.input_dim()));
}

} // namespace

void Network::validate() const
{
    int width = input_dim();
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        if (encoder[i].in() != width) throw std::invalid_argument("encoder layer " + std::to_string(i) + " input mismatch");
        width = encoder[i].out();
    }
    if (symbol_head.in() != width) throw std::invalid_argument("S-layer input does not match the bottleneck");
    for (std::size_t i = 0; i < decoder.size(); ++i) {
        if (decoder[i].in() != width) throw std::invalid_argument("decoder layer " + std::to_string(i) + " input mismatch");
        width = decoder[i].out();
    }
    if (!decoder.empty() && width != input_dim()) throw std::invalid_argument("decoder output does not match the input width");
}

DenseLayer& Network::layer(std::size_t i)
{
    return const_cast<DenseLayer&>(static_cast<const Network&>(*this).layer(i));
}

const DenseLayer& Network::layer(std::size_t i) const
{
    if (i < encoder.size()) return encoder[i];
    if (i == encoder.size()) return symbol_head;
    const std::size_t d = i - encoder.size() - 1;
    if (d < decoder.size()) return decoder[d];
    throw std::out_of_range("Network::layer index");
}

std::size_t Network::parameter_count() const
{
    std::size_t total = 0;
    for (std::size_t i = 0; i < layer_count(); ++i) total += static_cast<std::size_t>(layer(i).params().size());
    return total;
}

ForwardTrace forward(const Network& net, const RealMatrix& input, bool with_decoder)
{
    check_input(net, input);
    ForwardTrace tr;
    tr.input = input;
    const RealMatrix* h = &tr.input;
    for (const auto& layer : net.encoder) {
        tr.encoder_pre.push_back(layer.weights() * *h);
        tr.encoder_out.push_back(activate(layer, tr.encoder_pre.back()));
        h = &tr.encoder_out.back();
    }
    tr.symbol_pre = net.symbol_head.weights() * *h;
    tr.symbols = activate(net.symbol_head, tr.symbol_pre);
    if (with_decoder) {
        for (const auto& layer : net.decoder) {
            tr.decoder_pre.push_back(layer.weights() * *h);
            tr.decoder_out.push_back(activate(layer, tr.decoder_pre.back()));
            h = &tr.decoder_out.back();
        }
    }
    return tr;
}

RealMatrix encode(const Network& net, const RealMatrix& input)
{
    check_input(net, input);
    RealMatrix h = input;
    for (const auto& layer : net.encoder) h = activate(layer, layer.weights() * h);
    return h;
}

RealMatrix infer_symbols(const Network& net, const RealMatrix& input)
{
    return activate(net.symbol_head, net.symbol_head.weights() * encode(net, input));
}

double symbol_loss(const RealMatrix& symbols, const RealMatrix& targets)
{
    if (targets.cols() == 0) return 0.0;
    return (symbols.leftCols(targets.cols()) - targets).squaredNorm() / static_cast<double>(targets.cols());
}

LossValue evaluate_loss(const ForwardTrace& trace, const RealMatrix& symbol_targets,
                        const RealMatrix& recon_targets, const LossWeights& weights)
{
    if (symbol_targets.cols() > trace.symbols.cols() || (symbol_targets.cols() > 0 && symbol_targets.rows() != trace.symbols.rows()))
        throw std::invalid_argument("evaluate_loss: symbol target shape mismatch");
    LossValue v;
    v.supervised = symbol_loss(trace.symbols, symbol_targets);
    if (weights.reconstruction != 0.0 && !trace.decoder_out.empty()) {
        const RealMatrix& r = trace.reconstruction();
        if (recon_targets.rows() != r.rows() || recon_targets.cols() != r.cols())
            throw std::invalid_argument("evaluate_loss: reconstruction target shape mismatch");
        v.reconstruction = (r - recon_targets).squaredNorm() / static_cast<double>(r.cols());
    }
    v.total = weights.supervised * v.supervised + weights.reconstruction * v.reconstruction;
    return v;
}

Gradients backward(const Network& net, const ForwardTrace& tr, const RealMatrix& symbol_targets,
                   const RealMatrix& recon_targets, const LossWeights& weights)
{
    const auto batch = tr.input.cols();
    const auto labeled = symbol_targets.cols();
    if (labeled > batch || (labeled > 0 && symbol_targets.rows() != tr.symbols.rows()))
        throw std::invalid_argument("backward: symbol target shape mismatch");

    Gradients g;
    g.params.resize(net.layer_count());
    for (std::size_t i = 0; i < net.layer_count(); ++i) g.params[i] = RealMatrix::Zero(net.layer(i).params().rows(), net.layer(i).params().cols());

    const RealMatrix& bottleneck = tr.bottleneck();
    RealMatrix d_bottleneck = RealMatrix::Zero(bottleneck.rows(), batch);

    // Symbol head.
    if (labeled > 0 && weights.supervised != 0.0) {
        RealMatrix d_sym = RealMatrix::Zero(tr.symbols.rows(), batch);
        d_sym.leftCols(labeled) = (2.0 * weights.supervised / static_cast<double>(labeled))
                                * (tr.symbols.leftCols(labeled) - symbol_targets);
        const DenseLayer& s = net.symbol_head;
        if (s.activation == Activation::ScaledTanh) {
            const Eigen::ArrayXXd t = (s.beta * tr.symbol_pre.array()).tanh();
            g.symbol_beta = (d_sym.array() * s.alpha * tr.symbol_pre.array() * (1.0 - t * t)).sum();
        }
        const RealMatrix d_pre = through_activation(s, tr.symbol_pre, d_sym);
        g.params[net.encoder.size()] = s.fold_gradient(d_pre * bottleneck.transpose());
        d_bottleneck.noalias() += s.weights().transpose() * d_pre;
    }

    // Reconstruction head.
    if (weights.reconstruction != 0.0 && net.has_decoder()) {
        if (tr.decoder_out.size() != net.decoder.size())
            throw std::invalid_argument("backward: trace was computed without the decoder");
        const RealMatrix& r = tr.reconstruction();
        if (recon_targets.rows() != r.rows() || recon_targets.cols() != r.cols())
            throw std::invalid_argument("backward: reconstruction target shape mismatch");
        RealMatrix delta = (2.0 * weights.reconstruction / static_cast<double>(batch)) * (r - recon_targets);
        for (std::size_t d = net.decoder.size(); d-- > 0;) {
            const DenseLayer& layer = net.decoder[d];
            const RealMatrix d_pre = through_activation(layer, tr.decoder_pre[d], delta);
            const RealMatrix& layer_in = d == 0 ? bottleneck : tr.decoder_out[d - 1];
            g.params[net.encoder.size() + 1 + d] = layer.fold_gradient(d_pre * layer_in.transpose());
            delta = layer.weights().transpose() * d_pre;
        }
        d_bottleneck += delta;
    }

    // Encoder, shared by both heads.
    RealMatrix delta = std::move(d_bottleneck);
    for (std::size_t e = net.encoder.size(); e-- > 0;) {
        const DenseLayer& layer = net.encoder[e];
        const RealMatrix d_pre = through_activation(layer, tr.encoder_pre[e], delta);
        const RealMatrix& layer_in = e == 0 ? tr.input : tr.encoder_out[e - 1];
        g.params[e] = layer.fold_gradient(d_pre * layer_in.transpose());
        if (e > 0) delta = layer.weights().transpose() * d_pre;
    }
    return g;
}

} // namespace qmimo::nn
