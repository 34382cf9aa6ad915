// SPDX-License-Identifier: Apache-2.0
#include "qmimo/quantizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qmimo::quant {

namespace {

// Minimizers of E[(Q(x) - x)^2] over the step for a standard normal input,
// from a bounded scalar search on the closed-form MSE. B = 1 is exactly
// 2 sqrt(2 / pi).
constexpr std::array<double, 4> kMseOptimalStep = {
    1.5957691216057308,
    0.9956866802775063,
    0.5860194409188165,
    0.3352006183169450,
};

} // namespace

QuantizerSpec::QuantizerSpec(int bits, double step) : bits_(bits), step_(step)
{
    if (bits < 1 || bits > 16) throw std::invalid_argument("quantizer: bits must lie in [1, 16], got " + std::to_string(bits));
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("quantizer: step must be positive and finite");
    const std::size_t levels = std::size_t{1} << bits;
    const double centre = (static_cast<double>(levels) - 1.0) / 2.0;
    const double half = static_cast<double>(levels) / 2.0;
    labels_.resize(levels);
    for (std::size_t b = 0; b < levels; ++b) labels_[b] = step * (static_cast<double>(b) - centre);
    thresholds_.resize(levels - 1);
    for (std::size_t b = 1; b < levels; ++b) thresholds_[b - 1] = step * (static_cast<double>(b) - half);
}

std::size_t QuantizerSpec::index(double x) const
{
    if (!std::isfinite(x)) throw std::domain_error("quantize: non-finite input sample");
    const double pos = std::floor(x / step_ + static_cast<double>(labels_.size()) / 2.0);
    const double top = static_cast<double>(labels_.size() - 1);
    return static_cast<std::size_t>(std::clamp(pos, 0.0, top));
}

QuantizerSpec build_quantizer(int bits, double step)
{
    return QuantizerSpec(bits, step);
}

double mse_optimal_step(int bits)
{
    if (bits < 1 || bits > static_cast<int>(kMseOptimalStep.size()))
        throw std::invalid_argument("no tabulated MSE-optimal step for " + std::to_string(bits) + " bits");
    return kMseOptimalStep[static_cast<std::size_t>(bits - 1)];
}

QuantizerSpec build_unit_variance_quantizer(int bits)
{
    return QuantizerSpec(bits, mse_optimal_step(bits));
}

ComplexMatrix quantize(const QuantizerSpec& spec, const ComplexMatrix& samples)
{
    return samples.unaryExpr([&spec](const Complex& y) { return spec.quantize(y); });
}

std::vector<Complex> quantize(const QuantizerSpec& spec, const std::vector<Complex>& samples)
{
    std::vector<Complex> out;
    out.reserve(samples.size());
    for (const Complex& y : samples) out.push_back(spec.quantize(y));
    return out;
}

AgcState agc_fit(const std::vector<ComplexMatrix>& per_antenna, Eigen::Index first_col, Eigen::Index cols)
{
    AgcState state;
    state.scales.reserve(per_antenna.size());
    for (std::size_t r = 0; r < per_antenna.size(); ++r) {
        const ComplexMatrix& block = per_antenna[r];
        if (first_col < 0 || cols < 1 || first_col + cols > block.cols())
            throw std::invalid_argument("agc_fit: measurement window outside the block");
        const auto window = block.middleCols(first_col, cols);
        // Two real dimensions per complex sample.
        const double mean_sq = window.squaredNorm() / (2.0 * static_cast<double>(window.size()));
        if (!(mean_sq > 0.0)) throw std::invalid_argument("agc_fit: antenna " + std::to_string(r) + " has zero energy");
        state.scales.push_back(1.0 / std::sqrt(mean_sq));
    }
    return state;
}

std::vector<ComplexMatrix> agc_apply(const AgcState& state, const std::vector<ComplexMatrix>& per_antenna)
{
    if (state.scales.size() != per_antenna.size()) throw std::invalid_argument("agc_apply: antenna count mismatch");
    std::vector<ComplexMatrix> out;
    out.reserve(per_antenna.size());
    for (std::size_t r = 0; r < per_antenna.size(); ++r) out.push_back(per_antenna[r] * state.scales[r]);
    return out;
}

AgcResult agc_scale(const std::vector<ComplexMatrix>& per_antenna, Eigen::Index first_col, Eigen::Index cols)
{
    AgcResult result;
    result.state = agc_fit(per_antenna, first_col, cols);
    result.normalized = agc_apply(result.state, per_antenna);
    return result;
}

} // namespace qmimo::quant
