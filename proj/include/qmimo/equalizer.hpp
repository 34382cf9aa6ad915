// SPDX-License-Identifier: Apache-2.0
//
// Learned equalizers for one coherence block. CDNN is the supervised encoder
// plus S-layer; FDNN adds a decoder that reconstructs the received vector
// from the bottleneck (weight lambda), and ties every non-S layer to the
// complex block structure.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qmimo/nn/network.hpp"
#include "qmimo/nn/optimizer.hpp"
#include "qmimo/types.hpp"

namespace qmimo::eq {

enum class EqualizerKind { Mmse, Cdnn, Fdnn };

std::string_view to_string(EqualizerKind kind);
EqualizerKind parse_equalizer_kind(std::string_view name);

enum class BetaSweepMode { PerEpoch, PerBatch };

std::string_view to_string(BetaSweepMode mode);
BetaSweepMode parse_beta_sweep(std::string_view name);

inline constexpr double kInitStddev = 0.1; // variance 0.01

struct EqualizerConfig {
    EqualizerKind kind = EqualizerKind::Fdnn;
    double lambda = 0.1;
    std::vector<double> beta_grid{1, 2, 5, 10, 20, 50, 100};
    nn::OptimizerConfig optimizer{};
    int max_epochs = 2000;
    double plateau_tol = 1e-4;
    int plateau_window = 10;
    BetaSweepMode beta_sweep = BetaSweepMode::PerEpoch;
    bool per_subcarrier = true;
    /// FDNN only. Disabling gives the untied ablation.
    bool tie_weights = true;
    /// FDNN only: also fit the reconstruction head on the unlabeled data slots.
    bool use_unlabeled = false;
    /// Full batch up to this many pilot vectors; beyond it, batches of
    /// `batch_bits` bits (2K bits per vector).
    int full_batch_limit = 64;
    int batch_bits = 1000;
    unsigned threads = 1;

    bool operator==(const EqualizerConfig&) const = default;

    /// Throws std::invalid_argument on a bad field.
    void validate() const;
    /// Effective reconstruction weight (0 for CDNN).
    double reconstruction_weight() const { return kind == EqualizerKind::Fdnn ? lambda : 0.0; }
};

/// Encoder 2R -> 12K -> 6K -> 2K, S-layer 2K x 2K (identity, scaled tanh
/// with alpha = 1/sqrt 2), and for FDNN a decoder 2K -> 6K -> 12K -> 2R.
/// Hidden layers use ReLU; the bottleneck and the reconstruction output are
/// linear. Non-S weights are N(0, 0.01). Encoder weights are drawn before
/// decoder weights so CDNN and untied FDNN share an encoder under one seed.
nn::Network build_network(EqualizerKind kind, int rx, int users, std::uint64_t seed, bool tie_weights = true,
                          double initial_beta = 1.0);

/// [Re; Im] stacking of each column.
RealMatrix stack_real(const ComplexMatrix& z);
ComplexMatrix unstack_complex(const RealMatrix& s);

/// Evaluates the supervised loss for each beta with parameters frozen and
/// keeps the minimizer (ties go to the smallest beta).
double sweep_beta(nn::Network& net, const RealMatrix& inputs, const RealMatrix& targets,
                  const std::vector<double>& grid);

struct EpochRecord {
    int epoch = 0;
    double supervised = 0.0;
    double reconstruction = 0.0;
    double beta = 0.0;
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    bool stopped_on_plateau = false;
};

class TrainingDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pilot and optional unlabeled data for one network, already real-stacked.
struct TrainingSet {
    RealMatrix inputs;    // 2R x P
    RealMatrix targets;   // 2K x P
    RealMatrix unlabeled; // 2R x U, may be empty
};

/// Trains one network in place. Throws TrainingDivergence on a non-finite
/// loss or gradient.
TrainingHistory train_network(const EqualizerConfig& cfg, nn::Network& net, const TrainingSet& data,
                              std::uint64_t seed);

/// Complex per-subcarrier data: z is R x cols, x is K x cols.
struct SubcarrierPilots {
    ComplexMatrix pilot_z;
    ComplexMatrix pilot_x;
    ComplexMatrix unlabeled_z;
};

struct TrainedEqualizer {
    EqualizerKind kind = EqualizerKind::Fdnn;
    bool per_subcarrier = true;
    std::vector<nn::Network> networks;       // one per subcarrier, or one shared
    std::vector<TrainingHistory> histories;  // parallel to networks

    const nn::Network& network_for(int subcarrier) const;
};

TrainedEqualizer train(const EqualizerConfig& cfg, int rx, int users, const std::vector<SubcarrierPilots>& data,
                       std::uint64_t seed);

/// Hard QPSK decisions (K x cols) for received columns z (R x cols).
ComplexMatrix equalize(const TrainedEqualizer& trained, int subcarrier, const ComplexMatrix& z);

/// Per-real-dimension sign times alpha; zero maps to +alpha.
ComplexMatrix symbol_decision(const RealMatrix& symbol_head_output);

} // namespace qmimo::eq
