// SPDX-License-Identifier: Apache-2.0
//
// Two-headed dense network:
//
//   input --encoder--> bottleneck --S-layer--> symbol head (scaled tanh)
//                              \---decoder--> reconstruction head
//
// Columns of every matrix below are samples.
#pragma once

#include <cstddef>
#include <vector>

#include "qmimo/nn/layer.hpp"
#include "qmimo/types.hpp"

namespace qmimo::nn {

struct Network {
    std::vector<DenseLayer> encoder;
    DenseLayer symbol_head;
    std::vector<DenseLayer> decoder;

    int input_dim() const { return encoder.empty() ? symbol_head.in() : encoder.front().in(); }
    int bottleneck_dim() const { return encoder.empty() ? symbol_head.in() : encoder.back().out(); }
    int symbol_dim() const { return symbol_head.out(); }
    bool has_decoder() const { return !decoder.empty(); }

    /// Throws std::invalid_argument on incompatible consecutive shapes.
    void validate() const;

    /// Parameter order used by gradients and optimizer state: encoder layers,
    /// then the S-layer, then decoder layers.
    std::size_t layer_count() const { return encoder.size() + 1 + decoder.size(); }
    DenseLayer& layer(std::size_t i);
    const DenseLayer& layer(std::size_t i) const;

    std::size_t parameter_count() const;
};

struct ForwardTrace {
    RealMatrix input;
    std::vector<RealMatrix> encoder_pre;
    std::vector<RealMatrix> encoder_out;
    RealMatrix symbol_pre;
    RealMatrix symbols;
    std::vector<RealMatrix> decoder_pre;
    std::vector<RealMatrix> decoder_out;

    const RealMatrix& bottleneck() const { return encoder_out.empty() ? input : encoder_out.back(); }
    const RealMatrix& reconstruction() const { return decoder_out.back(); }
};

/// Runs both heads. Set `with_decoder` to false to skip the reconstruction
/// head when it is not needed.
ForwardTrace forward(const Network& net, const RealMatrix& input, bool with_decoder = true);

/// Symbol head only, without keeping intermediate activations.
RealMatrix infer_symbols(const Network& net, const RealMatrix& input);

/// Encoder output only.
RealMatrix encode(const Network& net, const RealMatrix& input);

/// Combined objective weights: supervised * L_sym + reconstruction * L_rec.
struct LossWeights {
    double supervised = 1.0;
    double reconstruction = 0.0;
};

/// L_sym is the mean over labeled columns of ||s - x||^2; L_rec is the mean
/// over all columns of ||r - z||^2. The first `symbol_targets.cols()` batch
/// columns are labeled, the rest only contribute to L_rec.
struct LossValue {
    double supervised = 0.0;
    double reconstruction = 0.0;
    double total = 0.0;
};

LossValue evaluate_loss(const ForwardTrace& trace, const RealMatrix& symbol_targets,
                        const RealMatrix& recon_targets, const LossWeights& weights);

/// Symbol loss of a symbol-head output against targets (mean squared norm).
double symbol_loss(const RealMatrix& symbols, const RealMatrix& targets);

struct Gradients {
    std::vector<RealMatrix> params; // shaped like DenseLayer::params(), Network order
    double symbol_beta = 0.0;       // dL/dbeta of the S-layer (diagnostic only)
};

/// Exact gradients of the combined loss. With weights.reconstruction == 0 the
/// decoder gradients are exactly zero.
Gradients backward(const Network& net, const ForwardTrace& trace, const RealMatrix& symbol_targets,
                   const RealMatrix& recon_targets, const LossWeights& weights);

} // namespace qmimo::nn
