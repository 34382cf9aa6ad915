// SPDX-License-Identifier: Apache-2.0
//
// B-bit symmetric uniform quantizer applied separately to the real and
// imaginary parts of a complex sample. With L = 2^B levels and step D:
//
//   labels      l_b   = D (b - (L - 1) / 2),   b = 0 .. L-1
//   thresholds  tau_b = D (b - L / 2),         b = 1 .. L-1
//
// and tau_0 = -inf, tau_L = +inf. An input x maps to l_b iff
// tau_b <= x < tau_{b+1}, so values beyond the outer thresholds clip to the
// extreme labels.
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "qmimo/types.hpp"

namespace qmimo::quant {

class QuantizerSpec {
public:
    QuantizerSpec(int bits, double step);

    int bits() const { return bits_; }
    double step() const { return step_; }
    std::size_t levels() const { return labels_.size(); }
    const std::vector<double>& labels() const { return labels_; }
    /// Finite thresholds tau_1 .. tau_{L-1}.
    const std::vector<double>& thresholds() const { return thresholds_; }

    std::size_t index(double x) const;
    double quantize(double x) const { return labels_[index(x)]; }
    Complex quantize(Complex y) const { return {quantize(y.real()), quantize(y.imag())}; }

private:
    int bits_;
    double step_;
    std::vector<double> labels_;
    std::vector<double> thresholds_;
};

/// Throws std::invalid_argument unless 1 <= bits <= 16 and step > 0.
QuantizerSpec build_quantizer(int bits, double step);

/// Step that minimizes E[(Q(x) - x)^2] for x ~ N(0, 1). Tabulated for
/// B = 1..4; throws for other resolutions.
double mse_optimal_step(int bits);

/// Quantizer with the tabulated MSE-optimal step for unit-variance input.
QuantizerSpec build_unit_variance_quantizer(int bits);

/// Element-wise quantization; throws std::domain_error on a non-finite sample.
ComplexMatrix quantize(const QuantizerSpec& spec, const ComplexMatrix& samples);
std::vector<Complex> quantize(const QuantizerSpec& spec, const std::vector<Complex>& samples);

/// Per-antenna amplitude normalizers.
struct AgcState {
    std::vector<double> scales;
};

/// Fits one scale per antenna so the real-dimension RMS of columns
/// [first_col, first_col + cols) becomes 1. Zero-mean signals are assumed, so
/// the RMS is the sample standard deviation about zero. Throws if an antenna
/// window carries no energy.
AgcState agc_fit(const std::vector<ComplexMatrix>& per_antenna, Eigen::Index first_col, Eigen::Index cols);

/// Applies stored scales (no refit).
std::vector<ComplexMatrix> agc_apply(const AgcState& state, const std::vector<ComplexMatrix>& per_antenna);

struct AgcResult {
    std::vector<ComplexMatrix> normalized;
    AgcState state;
};

/// Fit on the measurement window, then scale every column with that state.
AgcResult agc_scale(const std::vector<ComplexMatrix>& per_antenna, Eigen::Index first_col, Eigen::Index cols);

} // namespace qmimo::quant
