// SPDX-License-Identifier: Apache-2.0
//
// Linearized baseline. After AGC every antenna feeds the quantizer with unit
// variance per real dimension, so the Bussgang gain matrix collapses to a
// scalar rho and the subcarrier model reads z_n = rho H_n x_n + d_n.
#pragma once

#include <vector>

#include "qmimo/quantizer.hpp"
#include "qmimo/types.hpp"

namespace qmimo::mmse {

struct BussgangFactor {
    double rho = 1.0;        // E[Q(x) x] for x ~ N(0, 1)
    double distortion = 0.0; // E[Q(x)^2] - rho^2
};

BussgangFactor bussgang_rho(const quant::QuantizerSpec& spec);

/// Factor for the unquantized (bypass) receiver.
inline BussgangFactor bypass_factor() { return {1.0, 0.0}; }

struct ChannelEstimate {
    ComplexMatrix h;            // R x K
    bool rank_deficient = false; // pilot Gram matrix singular before loading
};

/// Least squares on the linearized model:
///   H = (1/rho) Z X^H (X X^H + delta I)^{-1}
/// with delta = 1e-6 trace(X X^H) / K when X X^H is singular and delta = 0
/// otherwise. z_pilots is R x P, x_pilots K x P.
ChannelEstimate estimate_channel(const ComplexMatrix& z_pilots, const ComplexMatrix& x_pilots, double rho);

struct LinearEqualizerState {
    std::vector<ComplexMatrix> h_est;   // per subcarrier, R x K
    std::vector<ComplexMatrix> filters; // per subcarrier, K x R, includes the 1/rho scaling
    double noise_eff = 1e-8;            // sigma_eff^2
    double rho = 1.0;
    int rank_deficient_subcarriers = 0;
};

inline constexpr double kNoiseFloor = 1e-8;

/// Builds the MMSE filter (H^H H + s I)^{-1} H^H / rho for one subcarrier.
ComplexMatrix mmse_filter(const ComplexMatrix& h, double noise_eff, double rho);

/// Mean squared pilot residual ||z/rho - H x||^2 / R over every subcarrier
/// and pilot slot, clamped below at kNoiseFloor.
double fit_noise_eff(const std::vector<ComplexMatrix>& z_sub, const std::vector<ComplexMatrix>& x_pilots,
                     const std::vector<ComplexMatrix>& h_est, double rho);

/// Estimates every subcarrier channel from the pilot slots and builds the
/// equalizer. z_sub[n] is R x T (first P columns are pilots), x_pilots[n] is
/// K x P.
LinearEqualizerState fit_linear_equalizer(const std::vector<ComplexMatrix>& z_sub,
                                          const std::vector<ComplexMatrix>& x_pilots, const BussgangFactor& factor);

/// Same, with the channel supplied (perfect CSI). When no pilots are given the
/// nominal `noise_eff` is used instead of the residual fit.
LinearEqualizerState fit_known_channel(const std::vector<ComplexMatrix>& h_true,
                                       const std::vector<ComplexMatrix>& z_sub,
                                       const std::vector<ComplexMatrix>& x_pilots, const BussgangFactor& factor,
                                       double nominal_noise_eff);

/// Soft estimates for received columns z (R x cols) on subcarrier n.
ComplexMatrix mmse_equalize(const LinearEqualizerState& state, int subcarrier, const ComplexMatrix& z);

/// Nearest QPSK point per entry (per-dimension sign, zero maps to +alpha).
ComplexMatrix hard_decision(const ComplexMatrix& soft);

} // namespace qmimo::mmse
