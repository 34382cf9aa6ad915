// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: simulate one grid point, sweep a grid, run the
// gradient-check suite, or time inference.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qmimo/harness.hpp"
#include "qmimo/nn/serialize.hpp"

namespace {

using qmimo::harness::ExperimentConfig;

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string output;
    bool full_scale = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts)
{
    cmd->add_option("-c,--config", opts.config_path, "config file (key = value lines)");
    cmd->add_option("-s,--set", opts.overrides, "override a config key, e.g. --set snr_db=0:5:20");
    cmd->add_option("--seed", opts.seed, "first frame seed (overrides the config)");
    cmd->add_option("-o,--output", opts.output, "output CSV path (overrides the config)");
    cmd->add_flag("--full-scale", opts.full_scale, "start from the R=128, K=8, N=64 profile");
}

ExperimentConfig load_config(const CommonOptions& opts)
{
    ExperimentConfig cfg = opts.full_scale ? ExperimentConfig::full_scale() : ExperimentConfig::desk();
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw qmimo::harness::ConfigError("cannot open config '" + opts.config_path + "'");
        try {
            cfg = qmimo::harness::parse_config(in, cfg);
        } catch (const qmimo::harness::ConfigError& e) {
            throw qmimo::harness::ConfigError(opts.config_path + ": " + e.what());
        }
    }
    qmimo::harness::apply_overrides(cfg, opts.overrides);
    if (opts.seed) cfg.seed = *opts.seed;
    if (!opts.output.empty()) cfg.output = opts.output;
    cfg.validate();
    return cfg;
}

int run_sweep(const CommonOptions& opts)
{
    const auto cfg = load_config(opts);
    const auto records = qmimo::harness::run_experiment(cfg);
    qmimo::harness::write_csv_file(records, cfg.output);
    std::cerr << "wrote " << records.size() << " records to " << cfg.output << "\n";
    return 0;
}

int run_simulate(const CommonOptions& opts, const std::string& history_path, const std::string& checkpoint_path)
{
    auto cfg = load_config(opts);
    // One point: the first entry of each grid axis.
    cfg.pilots.resize(1);
    cfg.snr_db.resize(1);
    cfg.bits.resize(1);
    const int p = cfg.pilots.front();
    const double snr = cfg.snr_db.front();
    const auto bits = cfg.bits.front();

    std::cout << "R=" << cfg.rx << " K=" << cfg.users << " N=" << cfg.subcarriers << " mu=" << cfg.taps
              << " T=" << cfg.slots << " P=" << p << " snr_db=" << snr
              << " bits=" << qmimo::harness::resolution_to_string(bits)
              << " channel=" << qmimo::phy::to_string(cfg.channel) << " seed=" << cfg.seed << "\n";

    const auto sc = qmimo::harness::make_scenario(cfg, p, snr, cfg.seed);
    std::vector<qmimo::harness::BerRecord> records;
    for (auto method : cfg.methods) {
        const bool keep = method != qmimo::eq::EqualizerKind::Mmse;
        const auto r = qmimo::harness::run_frame(cfg, sc, method, bits, cfg.seed, keep);
        qmimo::harness::BerRecord rec;
        rec.method = std::string(qmimo::eq::to_string(method));
        rec.snr_db = snr;
        rec.bits = bits;
        rec.pilots = p;
        rec.channel = cfg.channel;
        rec.errors = r.errors;
        rec.total_bits = r.total_bits;
        rec.ber = r.total_bits > 0 ? static_cast<double>(r.errors) / static_cast<double>(r.total_bits) : 0.0;
        rec.seed_lo = rec.seed_hi = cfg.seed;
        rec.diverged = r.diverged;
        records.push_back(rec);
        std::cout << qmimo::eq::to_string(method) << ": errors=" << r.errors << " bits=" << r.total_bits;
        if (r.total_bits > 0) std::cout << " ber=" << static_cast<double>(r.errors) / static_cast<double>(r.total_bits);
        if (r.diverged) std::cout << " DIVERGED (" << r.diagnostic << ")";
        std::cout << "\n";
        if (!r.trained) continue;
        const auto& hist = r.trained->histories.front();
        if (!hist.epochs.empty()) {
            const auto& last = hist.epochs.back();
            std::cout << "  subcarrier 0: epochs=" << last.epoch << " supervised=" << last.supervised
                      << " reconstruction=" << last.reconstruction << " beta=" << last.beta
                      << (hist.stopped_on_plateau ? " (plateau)" : "") << "\n";
        }
        const std::string tag = std::string(qmimo::eq::to_string(method));
        if (!history_path.empty()) {
            const std::string path = history_path + "." + tag + ".csv";
            std::ofstream out(path);
            if (!out) throw std::runtime_error("cannot open '" + path + "'");
            qmimo::harness::write_history_csv(*r.trained, out);
        }
        if (!checkpoint_path.empty()) {
            // One network per subcarrier, or a single shared one.
            const auto& nets = r.trained->networks;
            for (std::size_t n = 0; n < nets.size(); ++n) {
                const std::string suffix = nets.size() == 1 ? "" : "." + std::to_string(n);
                qmimo::nn::save_network_file(nets[n], checkpoint_path + "." + tag + suffix + ".net");
            }
        }
    }
    qmimo::harness::write_csv_file(records, cfg.output);
    return 0;
}

int run_gradcheck(int trials, std::uint64_t seed, double tolerance)
{
    const auto summary = qmimo::harness::gradcheck_suite(trials, seed);
    for (std::size_t i = 0; i < summary.per_trial.size(); ++i)
        std::cout << "trial " << i << ": max relative error " << summary.per_trial[i] << "\n";
    std::cout << "worst " << summary.worst << " over " << summary.trials << " networks\n";
    return summary.worst < tolerance ? 0 : 3;
}

int run_bench(const std::vector<int>& rx_list, int users, int reps, std::uint64_t seed)
{
    std::cout << "R,K,fdnn_flops,mmse_flops,fdnn_ms,mmse_ms\n";
    for (int r : rx_list) {
        const auto t = qmimo::harness::bench_inference(r, users, reps, seed);
        std::cout << r << ',' << users << ',' << t.network_flops << ',' << t.mmse_flops << ',' << t.network_ms << ','
                  << t.mmse_ms << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quantized MIMO-OFDM uplink equalization simulator"};
    app.require_subcommand(1);

    CommonOptions sim_opts;
    std::string history_path;
    std::string checkpoint_path;
    auto* simulate = app.add_subcommand("simulate", "run one grid point for one frame and report details");
    add_common(simulate, sim_opts);
    simulate->add_option("--history", history_path, "write per-epoch training history to <prefix>.<METHOD>.csv");
    simulate->add_option("--checkpoint", checkpoint_path,
                         "save the subcarrier-0 network to <prefix>.<METHOD>.net");

    CommonOptions sweep_opts;
    auto* sweep = app.add_subcommand("sweep", "run the full grid and write a BER CSV");
    add_common(sweep, sweep_opts);

    CommonOptions print_opts;
    auto* print = app.add_subcommand("print-config", "print the effective config");
    add_common(print, print_opts);

    int gc_trials = 50;
    std::uint64_t gc_seed = 1;
    double gc_tol = 1e-4;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of randomized small networks");
    gradcheck->add_option("--trials", gc_trials, "number of networks")->check(CLI::PositiveNumber);
    gradcheck->add_option("--seed", gc_seed, "suite seed");
    gradcheck->add_option("--tolerance", gc_tol, "maximum allowed relative error");

    std::vector<int> bench_rx{16, 32, 64, 128};
    int bench_k = 8;
    int bench_reps = 20000;
    std::uint64_t bench_seed = 1;
    auto* bench = app.add_subcommand("bench", "FLOP counts and single-vector inference time, FDNN vs MMSE");
    bench->add_option("--rx", bench_rx, "receive antenna counts");
    bench->add_option("--users", bench_k, "users")->check(CLI::PositiveNumber);
    bench->add_option("--reps", bench_reps, "timed repetitions")->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_seed, "network seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) return run_simulate(sim_opts, history_path, checkpoint_path);
        if (*sweep) return run_sweep(sweep_opts);
        if (*print) {
            std::cout << qmimo::harness::write_config(load_config(print_opts));
            return 0;
        }
        if (*gradcheck) return run_gradcheck(gc_trials, gc_seed, gc_tol);
        if (*bench) return run_bench(bench_rx, bench_k, bench_reps, bench_seed);
    } catch (const qmimo::harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
