// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmimo/equalizer.hpp"
#include "qmimo/phy.hpp"

namespace qmimo::harness {

/// A resolution of std::nullopt is the unquantized ("inf") receiver.
using Resolution = std::optional<int>;

std::string resolution_to_string(const Resolution& bits);
Resolution parse_resolution(std::string_view text);

struct ExperimentConfig {
    int rx = 32;       // R
    int users = 4;     // K
    int subcarriers = 16;
    int taps = 4;      // mu
    int slots = 64;    // T
    std::vector<int> pilots{8, 16, 32};
    std::vector<double> snr_db{0, 5, 10, 15, 20, 25, 30, 35};
    std::vector<Resolution> bits{1, 2, std::nullopt};
    phy::TapDistribution channel = phy::TapDistribution::Gaussian;
    std::vector<eq::EqualizerKind> methods{eq::EqualizerKind::Mmse, eq::EqualizerKind::Cdnn, eq::EqualizerKind::Fdnn};
    std::uint64_t seed = 1;
    int frames = 500;      // frame budget per point; frame f uses seed + f
    long min_errors = 100; // stop rule; 0 runs the full budget
    bool perfect_csi = false;
    eq::EqualizerConfig equalizer{};
    unsigned threads = 0;  // 0 = hardware concurrency
    std::string output = "results.csv";

    /// Desk-scale defaults.
    static ExperimentConfig desk();
    /// R = 128, K = 8, N = 64, mu = 8.
    static ExperimentConfig full_scale();

    void validate() const;
    bool operator==(const ExperimentConfig&) const;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` text; `#` starts a comment; lists are comma separated
/// (`snr_db` also accepts `start:step:stop`). Unknown or repeated keys and
/// malformed values raise ConfigError naming the line.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = ExperimentConfig::desk());
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base = ExperimentConfig::desk());

/// Applies one `key=value` override (same syntax as a config line) and revalidates.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Applies overrides in order and validates once at the end, so dependent
/// keys (pilots and T, say) can change together. All or nothing.
void apply_overrides(ExperimentConfig& cfg, std::span<const std::string> assignments);

/// Every key, in documentation order.
std::string write_config(const ExperimentConfig& cfg);

struct BerRecord {
    std::string method;
    double snr_db = 0.0;
    Resolution bits;
    int pilots = 0;
    phy::TapDistribution channel = phy::TapDistribution::Gaussian;
    long errors = 0;
    long total_bits = 0;
    double ber = 0.0;
    std::uint64_t seed_lo = 0;
    std::uint64_t seed_hi = 0;
    bool diverged = false; // some frame's training diverged (flagged in the method column)
};

struct BerCount {
    long errors = 0;
    long total_bits = 0;
    double ber = 0.0;
};

/// Exact Hamming error fraction; throws on length mismatch or empty input.
BerCount compute_ber(std::span<const std::uint8_t> estimated, std::span<const std::uint8_t> truth);

/// One simulated coherence block.
struct Scenario {
    phy::ChannelRealization channel;
    phy::OfdmFrame frame;
    std::vector<ComplexMatrix> received; // time domain, per antenna
};

Scenario make_scenario(const ExperimentConfig& cfg, int pilots, double snr_db, std::uint64_t frame_seed);

struct FrameResult {
    long errors = 0;
    long total_bits = 0;
    bool diverged = false;
    std::string diagnostic;
    std::optional<eq::TrainedEqualizer> trained; // learned methods, when requested
};

/// Quantize (AGC from pilot slots), move to subcarriers, fit or train the
/// method on the pilot slots and count bit errors on the data slots.
FrameResult run_frame(const ExperimentConfig& cfg, const Scenario& sc, eq::EqualizerKind method,
                      const Resolution& bits, std::uint64_t frame_seed, bool keep_trained = false);

/// Full grid: pilots x bits x SNR x method, records sorted.
std::vector<BerRecord> run_experiment(const ExperimentConfig& cfg);

inline constexpr const char* kCsvHeader = "method,snr_db,bits,pilots,channel,errors,total_bits,ber,seed_lo,seed_hi";

void write_csv(const std::vector<BerRecord>& records, std::ostream& out);
void write_csv_file(const std::vector<BerRecord>& records, const std::string& path);

/// Training history as CSV: epoch,subcarrier,supervised_loss,unsupervised_loss,beta.
void write_history_csv(const eq::TrainedEqualizer& trained, std::ostream& out);

/// Real multiply-adds to equalize one subcarrier vector: layer shapes of the
/// encoder and S-layer for CDNN/FDNN, 4 K R for applying a K x R complex
/// MMSE filter.
long flop_estimate(eq::EqualizerKind method, int rx, int users);

struct InferenceTiming {
    double network_ms = 0.0; // one FDNN forward (encoder + S-layer) per vector
    double mmse_ms = 0.0;    // one MMSE filter application per vector
    long network_flops = 0;
    long mmse_flops = 0;
};

InferenceTiming bench_inference(int rx, int users, int repetitions, std::uint64_t seed);

struct GradCheckSummary {
    int trials = 0;
    double worst = 0.0;
    std::vector<double> per_trial;
};

/// Random small networks covering ReLU, linear and scaled-tanh layers, tied
/// and free weights, and both loss heads.
GradCheckSummary gradcheck_suite(int trials, std::uint64_t seed);

} // namespace qmimo::harness
