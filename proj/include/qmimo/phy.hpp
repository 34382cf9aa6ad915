// SPDX-License-Identifier: Apache-2.0
//
// Uplink MIMO-OFDM model after cyclic-prefix removal:
//
//   Y_r = sum_k H_rk F^H X_k + V_r
//
// with H_rk the N x N circulant convolution matrix of the tap vector h_rk and
// F the unitary DFT, [F]_{mn} = exp(-i 2 pi m n / N) / sqrt(N).
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qmimo/types.hpp"

namespace qmimo::phy {

enum class TapDistribution { Gaussian, Poisson };

std::string_view to_string(TapDistribution dist);
TapDistribution parse_tap_distribution(std::string_view name);

/// Poisson rate used for the Poisson tap model.
inline constexpr double kPoissonRate = 0.5;

/// QPSK per-dimension magnitude.
inline constexpr double kQpskAlpha = 0.70710678118654752440;

ComplexMatrix dft_matrix(int n);

struct ChannelRealization {
    int rx = 0;      // R
    int users = 0;   // K
    int taps = 0;    // mu
    TapDistribution distribution = TapDistribution::Gaussian;
    std::vector<ComplexVector> impulse; // index r * users + k

    const ComplexVector& tap(int r, int k) const { return impulse[static_cast<std::size_t>(r * users + k)]; }
};

/// Unnormalized tap draws as produced by the distribution tag. Gaussian taps
/// are CN(0, 1); Poisson taps have independent real and imaginary parts
/// distributed as Poisson(0.5) - 0.5.
ComplexVector sample_taps(TapDistribution dist, int count, std::uint64_t seed);

/// Draws every link i.i.d. per `dist`, then rescales each link to unit energy.
ChannelRealization gen_channel(TapDistribution dist, int rx, int users, int taps, std::uint64_t seed);

/// Per-subcarrier channel matrices H_n (R x K), n = 0..N-1, where
/// [H_n]_{rk} = sum_m h_rk[m] exp(-i 2 pi n m / N).
std::vector<ComplexMatrix> freq_response(const ChannelRealization& ch, int n_subcarriers);

/// Circular convolution of a column with a tap vector (length <= column length).
ComplexVector circular_convolve(const ComplexVector& taps, const ComplexVector& x);

std::vector<Complex> qpsk_modulate(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> qpsk_demodulate(std::span<const Complex> symbols);
Complex qpsk_symbol(std::uint8_t bit_i, std::uint8_t bit_q);

/// K x N x T grid of QPSK symbols; the first `pilots` time slots are pilots.
struct OfdmFrame {
    int users = 0;
    int subcarriers = 0;
    int slots = 0;
    int pilots = 0;
    std::vector<ComplexMatrix> symbols; // per user, N x T
    std::vector<std::uint8_t> bits;     // (I, Q) pair at 2 * ((k * N + n) * T + t)

    std::size_t bit_index(int k, int n, int t) const
    {
        return 2 * ((static_cast<std::size_t>(k) * subcarriers + n) * slots + t);
    }
    /// Users' symbols on subcarrier n for slots [t0, t0 + count): K x count.
    ComplexMatrix subcarrier_symbols(int n, int t0, int count) const;
};

OfdmFrame make_frame(int users, int subcarriers, int slots, int pilots, std::uint64_t seed);

struct NoiseSpec {
    double variance = 0.0; // per complex sample; zero means noiseless

    static NoiseSpec from_snr_db(double snr_db);
    static NoiseSpec noiseless() { return NoiseSpec{0.0}; }
    double snr_db() const;
};

/// Returns the time-domain received blocks Y_r (N x T), r = 0..R-1.
std::vector<ComplexMatrix> simulate_uplink(const OfdmFrame& frame, const ChannelRealization& ch,
                                           const NoiseSpec& noise, std::uint64_t seed);

/// Applies F to every column of a time-domain block.
ComplexMatrix to_subcarrier(const ComplexMatrix& time_block);

/// Per-antenna frequency-domain blocks regrouped by subcarrier: element n is
/// the R x T matrix whose column t is the received vector z_n at slot t.
std::vector<ComplexMatrix> to_subcarriers(const std::vector<ComplexMatrix>& per_antenna_time);

} // namespace qmimo::phy
