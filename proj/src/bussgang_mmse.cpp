// SPDX-License-Identifier: Apache-2.0
#include "qmimo/bussgang_mmse.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qmimo/phy.hpp"

namespace qmimo::mmse {

namespace {

double normal_pdf(double x)
{
    if (std::isinf(x)) return 0.0;
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

} // namespace

BussgangFactor bussgang_rho(const quant::QuantizerSpec& spec)
{
    const auto& labels = spec.labels();
    const auto& thr = spec.thresholds();
    const std::size_t levels = labels.size();
    auto lower = [&](std::size_t b) { return b == 0 ? -INFINITY : thr[b - 1]; };
    auto upper = [&](std::size_t b) { return b + 1 == levels ? INFINITY : thr[b]; };

    double rho = 0.0;
    double second = 0.0;
    for (std::size_t b = 0; b < levels; ++b) {
        const double lo = lower(b);
        const double hi = upper(b);
        rho += labels[b] * (normal_pdf(lo) - normal_pdf(hi));
        second += labels[b] * labels[b] * (normal_cdf(hi) - normal_cdf(lo));
    }
    return {rho, std::max(0.0, second - rho * rho)};
}

ChannelEstimate estimate_channel(const ComplexMatrix& z_pilots, const ComplexMatrix& x_pilots, double rho)
{
    if (x_pilots.cols() < 1) throw std::invalid_argument("estimate_channel: need at least one pilot");
    if (z_pilots.cols() != x_pilots.cols()) throw std::invalid_argument("estimate_channel: pilot count mismatch");
    if (!(rho > 0.0)) throw std::invalid_argument("estimate_channel: rho must be positive");
    const auto users = x_pilots.rows();
    const ComplexMatrix gram = x_pilots * x_pilots.adjoint();
    const double delta = 1e-6 * gram.trace().real() / static_cast<double>(users);

    ChannelEstimate est;
    est.rank_deficient = Eigen::FullPivLU<ComplexMatrix>(gram).rank() < users;
    // Full-rank pilots get plain least squares; the diagonal loading only
    // enters when the Gram matrix is singular (P < K or repeated pilots).
    const double loading = est.rank_deficient ? delta : 0.0;
    const ComplexMatrix loaded = gram + loading * ComplexMatrix::Identity(users, users);
    // h^T = loaded^{-T} (Z X^H)^T; loaded is Hermitian positive (semi)definite.
    const ComplexMatrix cross = z_pilots * x_pilots.adjoint();
    est.h = loaded.ldlt().solve(cross.adjoint()).adjoint() / rho;
    return est;
}

ComplexMatrix mmse_filter(const ComplexMatrix& h, double noise_eff, double rho)
{
    const auto users = h.cols();
    const ComplexMatrix normal = h.adjoint() * h + noise_eff * ComplexMatrix::Identity(users, users);
    return normal.ldlt().solve(h.adjoint()) / rho;
}

double fit_noise_eff(const std::vector<ComplexMatrix>& z_sub, const std::vector<ComplexMatrix>& x_pilots,
                     const std::vector<ComplexMatrix>& h_est, double rho)
{
    double acc = 0.0;
    double count = 0.0;
    for (std::size_t n = 0; n < z_sub.size(); ++n) {
        const auto pilots = x_pilots[n].cols();
        if (pilots == 0) continue;
        const ComplexMatrix residual = z_sub[n].leftCols(pilots) / rho - h_est[n] * x_pilots[n];
        acc += residual.squaredNorm() / static_cast<double>(residual.rows());
        count += static_cast<double>(pilots);
    }
    if (count == 0.0) return kNoiseFloor;
    return std::max(kNoiseFloor, acc / count);
}

namespace {

LinearEqualizerState finish(std::vector<ComplexMatrix> h_est, double noise_eff, double rho)
{
    LinearEqualizerState state;
    state.rho = rho;
    state.noise_eff = noise_eff;
    state.filters.reserve(h_est.size());
    for (const auto& h : h_est) state.filters.push_back(mmse_filter(h, noise_eff, rho));
    state.h_est = std::move(h_est);
    return state;
}

} // namespace

LinearEqualizerState fit_linear_equalizer(const std::vector<ComplexMatrix>& z_sub,
                                          const std::vector<ComplexMatrix>& x_pilots, const BussgangFactor& factor)
{
    if (z_sub.size() != x_pilots.size()) throw std::invalid_argument("fit_linear_equalizer: subcarrier count mismatch");
    std::vector<ComplexMatrix> h_est;
    h_est.reserve(z_sub.size());
    int deficient = 0;
    for (std::size_t n = 0; n < z_sub.size(); ++n) {
        const auto pilots = x_pilots[n].cols();
        auto est = estimate_channel(z_sub[n].leftCols(pilots), x_pilots[n], factor.rho);
        deficient += est.rank_deficient ? 1 : 0;
        h_est.push_back(std::move(est.h));
    }
    const double noise_eff = fit_noise_eff(z_sub, x_pilots, h_est, factor.rho);
    auto state = finish(std::move(h_est), noise_eff, factor.rho);
    state.rank_deficient_subcarriers = deficient;
    return state;
}

LinearEqualizerState fit_known_channel(const std::vector<ComplexMatrix>& h_true,
                                       const std::vector<ComplexMatrix>& z_sub,
                                       const std::vector<ComplexMatrix>& x_pilots, const BussgangFactor& factor,
                                       double nominal_noise_eff)
{
    bool have_pilots = false;
    for (const auto& x : x_pilots) have_pilots = have_pilots || x.cols() > 0;
    const double noise_eff = have_pilots ? fit_noise_eff(z_sub, x_pilots, h_true, factor.rho)
                                         : std::max(kNoiseFloor, nominal_noise_eff);
    return finish(h_true, noise_eff, factor.rho);
}

ComplexMatrix mmse_equalize(const LinearEqualizerState& state, int subcarrier, const ComplexMatrix& z)
{
    if (subcarrier < 0 || static_cast<std::size_t>(subcarrier) >= state.filters.size())
        throw std::out_of_range("mmse_equalize: subcarrier not fitted");
    return state.filters[static_cast<std::size_t>(subcarrier)] * z;
}

ComplexMatrix hard_decision(const ComplexMatrix& soft)
{
    return soft.unaryExpr([](const Complex& s) {
        return Complex(s.real() < 0.0 ? -phy::kQpskAlpha : phy::kQpskAlpha,
                       s.imag() < 0.0 ? -phy::kQpskAlpha : phy::kQpskAlpha);
    });
}

} // namespace qmimo::mmse
