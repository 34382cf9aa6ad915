// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qmimo/phy.hpp"

using namespace qmimo;
using namespace qmimo::phy;

namespace {

ComplexVector random_vector(std::mt19937_64& rng, int n)
{
    std::normal_distribution<double> g(0.0, 1.0);
    ComplexVector v(n);
    for (int i = 0; i < n; ++i) v(i) = {g(rng), g(rng)};
    return v;
}

// Direct O(N^2) DFT with the same sign and scaling, written out independently.
ComplexVector naive_dft(const ComplexVector& x)
{
    const auto n = x.size();
    ComplexVector out = ComplexVector::Zero(n);
    for (Eigen::Index m = 0; m < n; ++m)
        for (Eigen::Index k = 0; k < n; ++k)
            out(m) += x(k) * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(m * k) / static_cast<double>(n));
    return out / std::sqrt(static_cast<double>(n));
}

ComplexVector naive_circular(const ComplexVector& h, const ComplexVector& x)
{
    const auto n = x.size();
    ComplexVector y = ComplexVector::Zero(n);
    for (Eigen::Index t = 0; t < n; ++t)
        for (Eigen::Index m = 0; m < h.size(); ++m) y(t) += h(m) * x(((t - m) % n + n) % n);
    return y;
}

} // namespace

TEST(Dft, UnitaryAndMatchesNaiveSum)
{
    std::mt19937_64 rng(11);
    for (int n : {1, 2, 3, 8, 16, 64}) {
        const auto f = dft_matrix(n);
        EXPECT_LT((f.adjoint() * f - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12) << n;
        const auto x = random_vector(rng, n);
        EXPECT_LT((f * x - naive_dft(x)).cwiseAbs().maxCoeff(), 1e-12) << n;
    }
    EXPECT_THROW(dft_matrix(0), std::invalid_argument);
}

TEST(Dft, ParsevalHoldsForRandomVectors)
{
    std::mt19937_64 rng(3);
    const auto f = dft_matrix(32);
    for (int i = 0; i < 20; ++i) {
        const auto x = random_vector(rng, 32);
        EXPECT_NEAR((f * x).squaredNorm(), x.squaredNorm(), 1e-10);
    }
}

TEST(CircularConvolution, MatchesOracleAndDiagonalizes)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 16;
        const int mu = 1 + trial % n;
        const auto h = random_vector(rng, mu);
        const auto x = random_vector(rng, n);
        const auto y = circular_convolve(h, x);
        EXPECT_LT((y - naive_circular(h, x)).cwiseAbs().maxCoeff(), 1e-10);

        // F y = sqrt(N) (F h_padded) .* (F x)
        ComplexVector hp = ComplexVector::Zero(n);
        hp.head(mu) = h;
        const auto f = dft_matrix(n);
        const ComplexVector lhs = f * y;
        const ComplexVector rhs = std::sqrt(static_cast<double>(n)) * (f * hp).cwiseProduct(f * x);
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(CircularConvolution, UnitDelayShifts)
{
    ComplexVector h = ComplexVector::Zero(2);
    h(1) = 1.0;
    ComplexVector x(4);
    x << 1.0, 2.0, 3.0, 4.0;
    const auto y = circular_convolve(h, x);
    ComplexVector expect(4);
    expect << 4.0, 1.0, 2.0, 3.0;
    EXPECT_LT((y - expect).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(circular_convolve(ComplexVector::Ones(5), x), std::invalid_argument);
}

TEST(Channel, DeterministicAndUnitEnergy)
{
    for (auto dist : {TapDistribution::Gaussian, TapDistribution::Poisson}) {
        const auto a = gen_channel(dist, 6, 3, 4, 99);
        const auto b = gen_channel(dist, 6, 3, 4, 99);
        const auto c = gen_channel(dist, 6, 3, 4, 100);
        bool differs = false;
        for (int r = 0; r < 6; ++r)
            for (int k = 0; k < 3; ++k) {
                EXPECT_EQ(a.tap(r, k), b.tap(r, k));
                EXPECT_EQ(a.tap(r, k).size(), 4);
                EXPECT_NEAR(a.tap(r, k).squaredNorm(), 1.0, 1e-12);
                differs = differs || (a.tap(r, k) - c.tap(r, k)).norm() > 0.0;
            }
        EXPECT_TRUE(differs);
    }
    EXPECT_THROW(gen_channel(TapDistribution::Gaussian, 0, 1, 1, 1), std::invalid_argument);
}

TEST(Channel, TapMoments)
{
    const int count = 400000;
    const auto g = sample_taps(TapDistribution::Gaussian, count, 1);
    const auto p = sample_taps(TapDistribution::Poisson, count, 2);
    EXPECT_NEAR(g.squaredNorm() / count, 1.0, 0.01);
    EXPECT_NEAR(std::abs(g.mean()), 0.0, 0.01);
    // Poisson(0.5) - 0.5 per dimension: zero mean, variance 0.5 per dimension.
    EXPECT_NEAR(p.real().mean(), 0.0, 0.01);
    EXPECT_NEAR(p.imag().mean(), 0.0, 0.01);
    EXPECT_NEAR(p.squaredNorm() / count, 1.0, 0.01);
    for (Eigen::Index i = 0; i < 1000; ++i) {
        const double v = p(i).real() + kPoissonRate;
        EXPECT_EQ(v, std::round(v));
        EXPECT_GE(v, 0.0);
    }
}

TEST(Channel, FrequencyResponseMatchesTapSum)
{
    const auto ch = gen_channel(TapDistribution::Gaussian, 3, 2, 4, 7);
    const int n = 8;
    const auto h = freq_response(ch, n);
    ASSERT_EQ(h.size(), 8u);
    for (int sc = 0; sc < n; ++sc)
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 2; ++k) {
                Complex sum = 0.0;
                for (int m = 0; m < 4; ++m)
                    sum += ch.tap(r, k)(m) * std::polar(1.0, -2.0 * std::numbers::pi * sc * m / n);
                EXPECT_LT(std::abs(h[static_cast<std::size_t>(sc)](r, k) - sum), 1e-12);
            }
    EXPECT_THROW(freq_response(ch, 3), std::invalid_argument);
}

TEST(Qpsk, GrayMappingAndRoundTrip)
{
    const double a = 1.0 / std::sqrt(2.0);
    EXPECT_LT(std::abs(qpsk_symbol(0, 0) - Complex(a, a)), 1e-15);
    EXPECT_LT(std::abs(qpsk_symbol(1, 0) - Complex(-a, a)), 1e-15);
    EXPECT_LT(std::abs(qpsk_symbol(0, 1) - Complex(a, -a)), 1e-15);
    EXPECT_LT(std::abs(qpsk_symbol(1, 1) - Complex(-a, -a)), 1e-15);

    std::vector<std::uint8_t> bits{0, 0, 1, 0, 0, 1, 1, 1, 1, 0};
    const auto symbols = qpsk_modulate(bits);
    ASSERT_EQ(symbols.size(), 5u);
    for (const auto& s : symbols) EXPECT_NEAR(std::norm(s), 1.0, 1e-15);
    EXPECT_EQ(qpsk_demodulate(symbols), bits);
    EXPECT_THROW(qpsk_modulate(std::vector<std::uint8_t>{0, 1, 1}), std::invalid_argument);

    // Zero on a dimension decides to +alpha, i.e. bit 0.
    const std::vector<Complex> zero{Complex(0.0, 0.0)};
    EXPECT_EQ(qpsk_demodulate(zero), (std::vector<std::uint8_t>{0, 0}));
}

TEST(Frame, PilotLayoutAndBits)
{
    const auto f = make_frame(3, 8, 10, 4, 21);
    EXPECT_EQ(f.symbols.size(), 3u);
    EXPECT_EQ(f.bits.size(), static_cast<std::size_t>(2 * 3 * 8 * 10));
    for (int k = 0; k < 3; ++k)
        for (int n = 0; n < 8; ++n)
            for (int t = 0; t < 10; ++t) {
                const auto i = f.bit_index(k, n, t);
                EXPECT_EQ(f.symbols[static_cast<std::size_t>(k)](n, t), qpsk_symbol(f.bits[i], f.bits[i + 1]));
            }
    const auto x = f.subcarrier_symbols(2, 1, 3);
    EXPECT_EQ(x.rows(), 3);
    EXPECT_EQ(x.cols(), 3);
    EXPECT_EQ(x(1, 2), f.symbols[1](2, 3));
    EXPECT_THROW(make_frame(1, 4, 4, 5, 1), std::invalid_argument);
}

TEST(Uplink, NoiselessMatchesPerSubcarrierModel)
{
    const int r = 4, k = 2, n = 8, mu = 3, t = 6;
    const auto ch = gen_channel(TapDistribution::Gaussian, r, k, mu, 3);
    const auto frame = make_frame(k, n, t, 2, 4);
    const auto y = simulate_uplink(frame, ch, NoiseSpec::noiseless(), 5);
    const auto z = to_subcarriers(y);
    const auto h = freq_response(ch, n);
    ASSERT_EQ(z.size(), static_cast<std::size_t>(n));
    for (int sc = 0; sc < n; ++sc) {
        const ComplexMatrix expect = h[static_cast<std::size_t>(sc)] * frame.subcarrier_symbols(sc, 0, t);
        EXPECT_LT((z[static_cast<std::size_t>(sc)] - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Uplink, SuperpositionAcrossUsers)
{
    // Received signal is linear in the transmitted grid: y(x1 + x2) = y(x1) + y(x2).
    const auto ch = gen_channel(TapDistribution::Poisson, 2, 2, 2, 8);
    auto f1 = make_frame(2, 4, 3, 1, 1);
    auto f2 = make_frame(2, 4, 3, 1, 2);
    auto sum = f1;
    for (int k = 0; k < 2; ++k) sum.symbols[static_cast<std::size_t>(k)] += f2.symbols[static_cast<std::size_t>(k)];
    const auto y1 = simulate_uplink(f1, ch, NoiseSpec::noiseless(), 1);
    const auto y2 = simulate_uplink(f2, ch, NoiseSpec::noiseless(), 1);
    const auto ys = simulate_uplink(sum, ch, NoiseSpec::noiseless(), 1);
    for (std::size_t a = 0; a < ys.size(); ++a) EXPECT_LT((ys[a] - y1[a] - y2[a]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Uplink, NoiseVarianceCalibrated)
{
    const auto ch = gen_channel(TapDistribution::Gaussian, 8, 2, 4, 1);
    const auto frame = make_frame(2, 64, 64, 8, 2);
    const double snr = 7.0;
    const auto clean = simulate_uplink(frame, ch, NoiseSpec::noiseless(), 3);
    const auto noisy = simulate_uplink(frame, ch, NoiseSpec::from_snr_db(snr), 3);
    double power = 0.0;
    double re2 = 0.0;
    double count = 0.0;
    for (std::size_t a = 0; a < noisy.size(); ++a) {
        const ComplexMatrix v = noisy[a] - clean[a];
        power += v.squaredNorm();
        re2 += v.real().squaredNorm();
        count += static_cast<double>(v.size());
    }
    const double sigma2 = std::pow(10.0, -snr / 10.0);
    EXPECT_NEAR(power / count, sigma2, 0.03 * sigma2);
    EXPECT_NEAR(re2 / count, sigma2 / 2.0, 0.03 * sigma2);
    EXPECT_NEAR(NoiseSpec::from_snr_db(snr).snr_db(), snr, 1e-12);
}

TEST(Uplink, SameSeedSameBlocks)
{
    const auto ch = gen_channel(TapDistribution::Gaussian, 3, 2, 2, 1);
    const auto frame = make_frame(2, 4, 4, 2, 2);
    const auto a = simulate_uplink(frame, ch, NoiseSpec::from_snr_db(0.0), 9);
    const auto b = simulate_uplink(frame, ch, NoiseSpec::from_snr_db(0.0), 9);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}
