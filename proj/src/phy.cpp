// SPDX-License-Identifier: Apache-2.0
#include "qmimo/phy.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qmimo::phy {

std::string_view to_string(TapDistribution dist)
{
    return dist == TapDistribution::Gaussian ? "gaussian" : "poisson";
}

TapDistribution parse_tap_distribution(std::string_view name)
{
    if (name == "gaussian" || name == "Gaussian") return TapDistribution::Gaussian;
    if (name == "poisson" || name == "Poisson") return TapDistribution::Poisson;
    throw std::invalid_argument("unknown tap distribution '" + std::string(name) + "'");
}

ComplexMatrix dft_matrix(int n)
{
    if (n < 1) throw std::invalid_argument("dft_matrix: size must be >= 1");
    ComplexMatrix f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            // Reduce the exponent modulo n before the trig call so large
            // products do not lose accuracy.
            const auto idx = static_cast<long long>(r) * c % n;
            const double phase = -2.0 * std::numbers::pi * static_cast<double>(idx) / n;
            f(r, c) = std::polar(scale, phase);
        }
    }
    return f;
}

ComplexVector sample_taps(TapDistribution dist, int count, std::uint64_t seed)
{
    if (count < 1) throw std::invalid_argument("sample_taps: count must be >= 1");
    std::mt19937_64 rng(seed);
    ComplexVector taps(count);
    if (dist == TapDistribution::Gaussian) {
        std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
        for (int i = 0; i < count; ++i) {
            const double re = normal(rng);
            taps[i] = Complex(re, normal(rng));
        }
    } else {
        std::poisson_distribution<int> poisson(kPoissonRate);
        for (int i = 0; i < count; ++i) {
            const double re = poisson(rng) - kPoissonRate;
            taps[i] = Complex(re, poisson(rng) - kPoissonRate);
        }
    }
    return taps;
}

ChannelRealization gen_channel(TapDistribution dist, int rx, int users, int taps, std::uint64_t seed)
{
    if (rx < 1 || users < 1 || taps < 1) throw std::invalid_argument("gen_channel: R, K and mu must be >= 1");
    ChannelRealization ch;
    ch.rx = rx;
    ch.users = users;
    ch.taps = taps;
    ch.distribution = dist;
    const ComplexVector all = sample_taps(dist, rx * users * taps, seed);
    ch.impulse.reserve(static_cast<std::size_t>(rx * users));
    for (int link = 0; link < rx * users; ++link) {
        ComplexVector h = all.segment(static_cast<Eigen::Index>(link) * taps, taps);
        const double energy = h.squaredNorm();
        // Poisson taps are half-integers, Gaussian taps are a.s. nonzero.
        h /= std::sqrt(energy);
        ch.impulse.push_back(std::move(h));
    }
    return ch;
}

std::vector<ComplexMatrix> freq_response(const ChannelRealization& ch, int n_subcarriers)
{
    if (ch.taps > n_subcarriers) throw std::invalid_argument("freq_response: tap length exceeds subcarrier count");
    std::vector<ComplexMatrix> out(static_cast<std::size_t>(n_subcarriers), ComplexMatrix::Zero(ch.rx, ch.users));
    for (int r = 0; r < ch.rx; ++r) {
        for (int k = 0; k < ch.users; ++k) {
            const ComplexVector& h = ch.tap(r, k);
            for (int n = 0; n < n_subcarriers; ++n) {
                Complex acc = 0.0;
                for (int m = 0; m < ch.taps; ++m) {
                    const auto idx = static_cast<long long>(n) * m % n_subcarriers;
                    acc += h[m] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(idx) / n_subcarriers);
                }
                out[static_cast<std::size_t>(n)](r, k) = acc;
            }
        }
    }
    return out;
}

ComplexVector circular_convolve(const ComplexVector& taps, const ComplexVector& x)
{
    const auto n = x.size();
    if (taps.size() > n) throw std::invalid_argument("circular_convolve: more taps than samples");
    ComplexVector y = ComplexVector::Zero(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index j = 0; j < taps.size(); ++j) y[m] += taps[j] * x[(m - j + n) % n];
    }
    return y;
}

Complex qpsk_symbol(std::uint8_t bit_i, std::uint8_t bit_q)
{
    return {kQpskAlpha * (1.0 - 2.0 * bit_i), kQpskAlpha * (1.0 - 2.0 * bit_q)};
}

std::vector<Complex> qpsk_modulate(std::span<const std::uint8_t> bits)
{
    if (bits.size() % 2 != 0) throw std::invalid_argument("qpsk_modulate: odd bit count");
    std::vector<Complex> out;
    out.reserve(bits.size() / 2);
    for (std::size_t i = 0; i < bits.size(); i += 2) out.push_back(qpsk_symbol(bits[i], bits[i + 1]));
    return out;
}

std::vector<std::uint8_t> qpsk_demodulate(std::span<const Complex> symbols)
{
    std::vector<std::uint8_t> bits;
    bits.reserve(symbols.size() * 2);
    for (const Complex& s : symbols) {
        // Zero falls on the +alpha side (bit 0).
        bits.push_back(s.real() < 0.0 ? 1 : 0);
        bits.push_back(s.imag() < 0.0 ? 1 : 0);
    }
    return bits;
}

ComplexMatrix OfdmFrame::subcarrier_symbols(int n, int t0, int count) const
{
    ComplexMatrix x(users, count);
    for (int k = 0; k < users; ++k) x.row(k) = symbols[static_cast<std::size_t>(k)].block(n, t0, 1, count);
    return x;
}

OfdmFrame make_frame(int users, int subcarriers, int slots, int pilots, std::uint64_t seed)
{
    if (users < 1 || subcarriers < 1 || slots < 1) throw std::invalid_argument("make_frame: dimensions must be >= 1");
    if (pilots < 0 || pilots > slots) throw std::invalid_argument("make_frame: pilot count must lie in [0, T]");
    OfdmFrame frame;
    frame.users = users;
    frame.subcarriers = subcarriers;
    frame.slots = slots;
    frame.pilots = pilots;
    frame.bits.resize(2 * static_cast<std::size_t>(users) * subcarriers * slots);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    for (auto& b : frame.bits) b = coin(rng) ? 1 : 0;
    frame.symbols.assign(static_cast<std::size_t>(users), ComplexMatrix(subcarriers, slots));
    for (int k = 0; k < users; ++k) {
        for (int n = 0; n < subcarriers; ++n) {
            for (int t = 0; t < slots; ++t) {
                const auto i = frame.bit_index(k, n, t);
                frame.symbols[static_cast<std::size_t>(k)](n, t) = qpsk_symbol(frame.bits[i], frame.bits[i + 1]);
            }
        }
    }
    return frame;
}

NoiseSpec NoiseSpec::from_snr_db(double snr_db)
{
    return NoiseSpec{std::pow(10.0, -snr_db / 10.0)};
}

double NoiseSpec::snr_db() const
{
    return -10.0 * std::log10(variance);
}

std::vector<ComplexMatrix> simulate_uplink(const OfdmFrame& frame, const ChannelRealization& ch,
                                           const NoiseSpec& noise, std::uint64_t seed)
{
    if (frame.users != ch.users) throw std::invalid_argument("simulate_uplink: frame and channel disagree on K");
    if (ch.taps > frame.subcarriers) throw std::invalid_argument("simulate_uplink: tap length exceeds N");
    if (noise.variance < 0.0) throw std::invalid_argument("simulate_uplink: negative noise variance");
    const int n = frame.subcarriers;
    const int t_count = frame.slots;
    const ComplexMatrix f_inv = dft_matrix(n).adjoint();

    std::vector<ComplexMatrix> tx;
    tx.reserve(static_cast<std::size_t>(frame.users));
    for (const auto& x : frame.symbols) tx.push_back(f_inv * x);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(noise.variance / 2.0));
    std::vector<ComplexMatrix> out;
    out.reserve(static_cast<std::size_t>(ch.rx));
    for (int r = 0; r < ch.rx; ++r) {
        ComplexMatrix y = ComplexMatrix::Zero(n, t_count);
        for (int k = 0; k < ch.users; ++k) {
            const ComplexVector& h = ch.tap(r, k);
            const ComplexMatrix& s = tx[static_cast<std::size_t>(k)];
            for (int t = 0; t < t_count; ++t) {
                for (int m = 0; m < n; ++m) {
                    Complex acc = 0.0;
                    for (int j = 0; j < ch.taps; ++j) acc += h[j] * s((m - j + n) % n, t);
                    y(m, t) += acc;
                }
            }
        }
        if (noise.variance > 0.0) {
            for (int t = 0; t < t_count; ++t) {
                for (int m = 0; m < n; ++m) {
                    const double re = normal(rng);
                    y(m, t) += Complex(re, normal(rng));
                }
            }
        }
        out.push_back(std::move(y));
    }
    return out;
}

ComplexMatrix to_subcarrier(const ComplexMatrix& time_block)
{
    return dft_matrix(static_cast<int>(time_block.rows())) * time_block;
}

std::vector<ComplexMatrix> to_subcarriers(const std::vector<ComplexMatrix>& per_antenna_time)
{
    if (per_antenna_time.empty()) return {};
    const auto n = per_antenna_time.front().rows();
    const auto t_count = per_antenna_time.front().cols();
    const auto rx = static_cast<Eigen::Index>(per_antenna_time.size());
    const ComplexMatrix f = dft_matrix(static_cast<int>(n));
    std::vector<ComplexMatrix> out(static_cast<std::size_t>(n), ComplexMatrix(rx, t_count));
    for (Eigen::Index r = 0; r < rx; ++r) {
        const ComplexMatrix& block = per_antenna_time[static_cast<std::size_t>(r)];
        if (block.rows() != n || block.cols() != t_count) throw std::invalid_argument("to_subcarriers: ragged antenna blocks");
        const ComplexMatrix freq = f * block;
        for (Eigen::Index sc = 0; sc < n; ++sc) out[static_cast<std::size_t>(sc)].row(r) = freq.row(sc);
    }
    return out;
}

} // namespace qmimo::phy
