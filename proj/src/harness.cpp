// SPDX-License-Identifier: Apache-2.0
#include "qmimo/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "qmimo/bussgang_mmse.hpp"
#include "qmimo/nn/grad_check.hpp"
#include "qmimo/parallel.hpp"
#include "qmimo/quantizer.hpp"

namespace qmimo::harness {

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s)
{
    std::vector<std::string> items;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        items.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    for (const auto& item : items)
        if (item.empty()) throw std::invalid_argument("empty list element");
    return items;
}

// Shortest text that parses back to the same double.
std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s)
{
    const std::string t = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v))
        throw std::invalid_argument("expected a number, got '" + t + "'");
    return v;
}

template <typename Int>
Int parse_integer(std::string_view s)
{
    const std::string t = trim(s);
    Int v{};
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size())
        throw std::invalid_argument("expected an integer, got '" + t + "'");
    return v;
}

bool parse_bool(std::string_view s)
{
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw std::invalid_argument("expected true or false, got '" + t + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::vector<double> parse_snr_grid(std::string_view s)
{
    const std::string t = trim(s);
    if (t.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (true) {
            const auto colon = t.find(':', start);
            parts.push_back(t.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
            if (colon == std::string::npos) break;
            start = colon + 1;
        }
        if (parts.size() != 3) throw std::invalid_argument("range must be start:step:stop");
        const double lo = parse_double(parts[0]);
        const double step = parse_double(parts[1]);
        const double hi = parse_double(parts[2]);
        if (step <= 0.0 || hi < lo) throw std::invalid_argument("range needs step > 0 and stop >= start");
        std::vector<double> grid;
        const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        for (long i = 0; i <= count; ++i) grid.push_back(lo + static_cast<double>(i) * step);
        return grid;
    }
    std::vector<double> grid;
    for (const auto& item : split_list(t))
        grid.push_back(item == "inf" ? std::numeric_limits<double>::infinity() : parse_double(item));
    return grid;
}

template <typename T, typename Fn>
std::string join(const std::vector<T>& items, Fn&& fmt)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += fmt(items[i]);
    }
    return out;
}

struct KeySpec {
    const char* name;
    const char* doc;
    std::function<void(ExperimentConfig&, std::string_view)> parse;
    std::function<std::string(const ExperimentConfig&)> write;
};

template <typename Int>
KeySpec int_key(const char* name, const char* doc, Int ExperimentConfig::*field)
{
    return {name, doc, [field](ExperimentConfig& c, std::string_view v) { c.*field = parse_integer<Int>(v); },
            [field](const ExperimentConfig& c) { return std::to_string(c.*field); }};
}

const std::vector<KeySpec>& key_table()
{
    using C = ExperimentConfig;
    static const std::vector<KeySpec> table = {
        int_key("R", "receive antennas", &C::rx),
        int_key("K", "single-antenna users", &C::users),
        int_key("N", "subcarriers per OFDM symbol", &C::subcarriers),
        int_key("mu", "channel taps", &C::taps),
        int_key("T", "slots per coherence block", &C::slots),
        {"pilots", "pilot slot counts to sweep",
         [](C& c, std::string_view v) {
             c.pilots.clear();
             for (const auto& s : split_list(v)) c.pilots.push_back(parse_integer<int>(s));
         },
         [](const C& c) { return join(c.pilots, [](int p) { return std::to_string(p); }); }},
        {"snr_db", "SNR grid in dB, list or start:step:stop; inf is noiseless",
         [](C& c, std::string_view v) { c.snr_db = parse_snr_grid(v); },
         [](const C& c) { return join(c.snr_db, format_double); }},
        {"bits", "ADC resolutions; inf bypasses the quantizer",
         [](C& c, std::string_view v) {
             c.bits.clear();
             for (const auto& s : split_list(v)) c.bits.push_back(parse_resolution(s));
         },
         [](const C& c) { return join(c.bits, resolution_to_string); }},
        {"channel", "tap distribution: gaussian or poisson",
         [](C& c, std::string_view v) { c.channel = phy::parse_tap_distribution(trim(v)); },
         [](const C& c) { return std::string(phy::to_string(c.channel)); }},
        {"methods", "equalizers: MMSE, CDNN, FDNN",
         [](C& c, std::string_view v) {
             c.methods.clear();
             for (const auto& s : split_list(v)) c.methods.push_back(eq::parse_equalizer_kind(s));
         },
         [](const C& c) { return join(c.methods, [](eq::EqualizerKind k) { return std::string(eq::to_string(k)); }); }},
        int_key("seed", "first frame seed; frame f uses seed + f", &C::seed),
        int_key("frames", "frame budget per grid point", &C::frames),
        int_key("min_errors", "stop a point after this many bit errors (0 = full budget)", &C::min_errors),
        {"perfect_csi", "MMSE uses the true channel",
         [](C& c, std::string_view v) { c.perfect_csi = parse_bool(v); },
         [](const C& c) { return bool_text(c.perfect_csi); }},
        {"lambda", "reconstruction loss weight (FDNN)",
         [](C& c, std::string_view v) { c.equalizer.lambda = parse_double(v); },
         [](const C& c) { return format_double(c.equalizer.lambda); }},
        {"beta_grid", "S-layer slope candidates",
         [](C& c, std::string_view v) {
             c.equalizer.beta_grid.clear();
             for (const auto& s : split_list(v)) c.equalizer.beta_grid.push_back(parse_double(s));
         },
         [](const C& c) { return join(c.equalizer.beta_grid, format_double); }},
        {"beta_sweep", "when to re-sweep beta: epoch or batch",
         [](C& c, std::string_view v) { c.equalizer.beta_sweep = eq::parse_beta_sweep(trim(v)); },
         [](const C& c) { return std::string(eq::to_string(c.equalizer.beta_sweep)); }},
        {"optimizer", "adam or sgd",
         [](C& c, std::string_view v) { c.equalizer.optimizer.kind = nn::parse_optimizer(trim(v)); },
         [](const C& c) { return std::string(nn::to_string(c.equalizer.optimizer.kind)); }},
        {"learning_rate", "optimizer step size",
         [](C& c, std::string_view v) { c.equalizer.optimizer.learning_rate = parse_double(v); },
         [](const C& c) { return format_double(c.equalizer.optimizer.learning_rate); }},
        {"adam_beta1", "first-moment decay",
         [](C& c, std::string_view v) { c.equalizer.optimizer.beta1 = parse_double(v); },
         [](const C& c) { return format_double(c.equalizer.optimizer.beta1); }},
        {"adam_beta2", "second-moment decay",
         [](C& c, std::string_view v) { c.equalizer.optimizer.beta2 = parse_double(v); },
         [](const C& c) { return format_double(c.equalizer.optimizer.beta2); }},
        {"adam_epsilon", "denominator guard",
         [](C& c, std::string_view v) { c.equalizer.optimizer.epsilon = parse_double(v); },
         [](const C& c) { return format_double(c.equalizer.optimizer.epsilon); }},
        {"max_epochs", "training epoch cap",
         [](C& c, std::string_view v) { c.equalizer.max_epochs = parse_integer<int>(v); },
         [](const C& c) { return std::to_string(c.equalizer.max_epochs); }},
        {"plateau_tol", "relative loss improvement counted as progress",
         [](C& c, std::string_view v) { c.equalizer.plateau_tol = parse_double(v); },
         [](const C& c) { return format_double(c.equalizer.plateau_tol); }},
        {"plateau_window", "epochs without progress before stopping",
         [](C& c, std::string_view v) { c.equalizer.plateau_window = parse_integer<int>(v); },
         [](const C& c) { return std::to_string(c.equalizer.plateau_window); }},
        {"per_subcarrier", "one network per subcarrier instead of one shared",
         [](C& c, std::string_view v) { c.equalizer.per_subcarrier = parse_bool(v); },
         [](const C& c) { return bool_text(c.equalizer.per_subcarrier); }},
        {"tie_weights", "complex-structured FDNN layers",
         [](C& c, std::string_view v) { c.equalizer.tie_weights = parse_bool(v); },
         [](const C& c) { return bool_text(c.equalizer.tie_weights); }},
        {"use_unlabeled", "FDNN reconstruction also sees the data slots",
         [](C& c, std::string_view v) { c.equalizer.use_unlabeled = parse_bool(v); },
         [](const C& c) { return bool_text(c.equalizer.use_unlabeled); }},
        {"full_batch_limit", "largest pilot count trained as one batch",
         [](C& c, std::string_view v) { c.equalizer.full_batch_limit = parse_integer<int>(v); },
         [](const C& c) { return std::to_string(c.equalizer.full_batch_limit); }},
        {"batch_bits", "bits per mini-batch beyond the full-batch limit",
         [](C& c, std::string_view v) { c.equalizer.batch_bits = parse_integer<int>(v); },
         [](const C& c) { return std::to_string(c.equalizer.batch_bits); }},
        int_key("threads", "worker threads (0 = all cores)", &C::threads),
        {"output", "CSV path",
         [](C& c, std::string_view v) { c.output = trim(v); },
         [](const C& c) { return c.output; }},
    };
    return table;
}

const KeySpec* find_key(std::string_view name)
{
    for (const auto& k : key_table())
        if (name == k.name) return &k;
    return nullptr;
}

std::pair<std::string, std::string> split_assignment(std::string_view line)
{
    const auto eq_pos = line.find('=');
    if (eq_pos == std::string_view::npos) throw std::invalid_argument("expected key = value");
    std::string key = trim(line.substr(0, eq_pos));
    if (key.empty()) throw std::invalid_argument("missing key");
    return {key, trim(line.substr(eq_pos + 1))};
}

void assign(ExperimentConfig& cfg, const std::string& key, const std::string& value)
{
    const KeySpec* spec = find_key(key);
    if (!spec) throw std::invalid_argument("unknown key '" + key + "'");
    try {
        spec->parse(cfg, value);
    } catch (const std::exception& e) {
        throw std::invalid_argument("key '" + key + "': " + e.what());
    }
}

int resolution_rank(const Resolution& b) { return b ? *b : 1 << 20; }

} // namespace

std::string resolution_to_string(const Resolution& bits) { return bits ? std::to_string(*bits) : "inf"; }

Resolution parse_resolution(std::string_view text)
{
    const std::string t = trim(text);
    if (t == "inf") return std::nullopt;
    return parse_integer<int>(t);
}

ExperimentConfig ExperimentConfig::desk() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::full_scale()
{
    ExperimentConfig cfg;
    cfg.rx = 128;
    cfg.users = 8;
    cfg.subcarriers = 64;
    cfg.taps = 8;
    return cfg;
}

void ExperimentConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (rx < 1) fail("R must be at least 1");
    if (users < 1) fail("K must be at least 1");
    if (subcarriers < 1) fail("N must be at least 1");
    if (taps < 1) fail("mu must be at least 1");
    if (taps > subcarriers)
        fail("mu (" + std::to_string(taps) + ") must not exceed N (" + std::to_string(subcarriers) + ")");
    if (slots < 2) fail("T must be at least 2");
    if (pilots.empty()) fail("pilots must list at least one count");
    for (int p : pilots) {
        if (p < 1) fail("pilots entries must be at least 1");
        if (p > slots)
            fail("pilots (" + std::to_string(p) + ") must not exceed T (" + std::to_string(slots) + ")");
        if (p == slots)
            fail("pilots (" + std::to_string(p) + ") equals T (" + std::to_string(slots) + "), leaving no data slots");
    }
    if (snr_db.empty()) fail("snr_db must not be empty");
    if (bits.empty()) fail("bits must not be empty");
    for (const auto& b : bits)
        if (b && (*b < 1 || *b > 4)) fail("bits entries must be 1..4 or inf");
    if (methods.empty()) fail("methods must not be empty");
    if (frames < 1) fail("frames must be at least 1");
    if (min_errors < 0) fail("min_errors must be non-negative");
    if (output.empty()) fail("output must not be empty");
    try {
        equalizer.validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const
{
    return rx == o.rx && users == o.users && subcarriers == o.subcarriers && taps == o.taps && slots == o.slots &&
           pilots == o.pilots && snr_db == o.snr_db && bits == o.bits && channel == o.channel &&
           methods == o.methods && seed == o.seed && frames == o.frames && min_errors == o.min_errors &&
           perfect_csi == o.perfect_csi && equalizer == o.equalizer && threads == o.threads && output == o.output;
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base)
{
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        try {
            auto [key, value] = split_assignment(body);
            if (!seen.insert(key).second) throw std::invalid_argument("duplicate key '" + key + "'");
            assign(base, key, value);
        } catch (const std::exception& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (in.bad()) throw ConfigError("read error");
    base.validate();
    return base;
}

ExperimentConfig parse_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    try {
        return parse_config(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base)
{
    std::istringstream in(text);
    return parse_config(in, std::move(base));
}

void apply_overrides(ExperimentConfig& cfg, std::span<const std::string> assignments)
{
    ExperimentConfig next = cfg;
    for (const auto& assignment : assignments) {
        try {
            auto [key, value] = split_assignment(assignment);
            assign(next, key, value);
        } catch (const std::exception& e) {
            throw ConfigError("override '" + assignment + "': " + e.what());
        }
    }
    next.validate();
    cfg = std::move(next);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment)
{
    apply_overrides(cfg, std::span<const std::string>(&assignment, 1));
}

std::string write_config(const ExperimentConfig& cfg)
{
    std::string out;
    for (const auto& k : key_table()) {
        out += "# ";
        out += k.doc;
        out += "\n";
        out += k.name;
        out += " = ";
        out += k.write(cfg);
        out += "\n";
    }
    return out;
}

BerCount compute_ber(std::span<const std::uint8_t> estimated, std::span<const std::uint8_t> truth)
{
    if (estimated.size() != truth.size())
        throw std::invalid_argument("compute_ber: length mismatch (" + std::to_string(estimated.size()) + " vs " +
                                    std::to_string(truth.size()) + ")");
    if (truth.empty()) throw std::invalid_argument("compute_ber: empty bit streams");
    BerCount out;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if ((estimated[i] != 0) != (truth[i] != 0)) ++out.errors;
    out.total_bits = static_cast<long>(truth.size());
    out.ber = static_cast<double>(out.errors) / static_cast<double>(out.total_bits);
    return out;
}

Scenario make_scenario(const ExperimentConfig& cfg, int pilots, double snr_db, std::uint64_t frame_seed)
{
    Scenario sc{phy::gen_channel(cfg.channel, cfg.rx, cfg.users, cfg.taps, mix_seed(frame_seed, 0)),
                phy::make_frame(cfg.users, cfg.subcarriers, cfg.slots, pilots, mix_seed(frame_seed, 1)),
                {}};
    sc.received = phy::simulate_uplink(sc.frame, sc.channel, phy::NoiseSpec::from_snr_db(snr_db),
                                       mix_seed(frame_seed, 2));
    return sc;
}

FrameResult run_frame(const ExperimentConfig& cfg, const Scenario& sc, eq::EqualizerKind method,
                      const Resolution& bits, std::uint64_t frame_seed, bool keep_trained)
{
    const int n_sub = sc.frame.subcarriers;
    const int p = sc.frame.pilots;
    const int t_total = sc.frame.slots;
    const int data = t_total - p;

    const auto agc = quant::agc_scale(sc.received, 0, p);
    std::vector<ComplexMatrix> digital;
    mmse::BussgangFactor factor = mmse::bypass_factor();
    if (bits) {
        const auto spec = quant::build_unit_variance_quantizer(*bits);
        factor = mmse::bussgang_rho(spec);
        digital.reserve(agc.normalized.size());
        for (const auto& block : agc.normalized) digital.push_back(quant::quantize(spec, block));
    } else {
        digital = agc.normalized;
    }
    const auto z_sub = phy::to_subcarriers(digital);

    std::vector<ComplexMatrix> x_pilots(static_cast<std::size_t>(n_sub));
    for (int n = 0; n < n_sub; ++n) x_pilots[static_cast<std::size_t>(n)] = sc.frame.subcarrier_symbols(n, 0, p);

    FrameResult result;
    std::vector<ComplexMatrix> decisions(static_cast<std::size_t>(n_sub));
    if (method == eq::EqualizerKind::Mmse) {
        mmse::LinearEqualizerState state;
        if (cfg.perfect_csi) {
            // AGC scales antenna r by g_r, so the channel seen after it is diag(g) H.
            auto h = phy::freq_response(sc.channel, n_sub);
            for (auto& hn : h)
                for (int r = 0; r < hn.rows(); ++r) hn.row(r) *= agc.state.scales[static_cast<std::size_t>(r)];
            // P >= 1 always, so the pilot residual sets the noise level.
            state = mmse::fit_known_channel(h, z_sub, x_pilots, factor, mmse::kNoiseFloor);
        } else {
            state = mmse::fit_linear_equalizer(z_sub, x_pilots, factor);
        }
        for (int n = 0; n < n_sub; ++n)
            decisions[static_cast<std::size_t>(n)] =
                mmse::hard_decision(mmse::mmse_equalize(state, n, z_sub[static_cast<std::size_t>(n)].rightCols(data)));
    } else {
        eq::EqualizerConfig ecfg = cfg.equalizer;
        ecfg.kind = method;
        ecfg.threads = 1;
        std::vector<eq::SubcarrierPilots> train_data(static_cast<std::size_t>(n_sub));
        for (int n = 0; n < n_sub; ++n) {
            auto& d = train_data[static_cast<std::size_t>(n)];
            d.pilot_z = z_sub[static_cast<std::size_t>(n)].leftCols(p);
            d.pilot_x = x_pilots[static_cast<std::size_t>(n)];
            if (ecfg.use_unlabeled) d.unlabeled_z = z_sub[static_cast<std::size_t>(n)].rightCols(data);
        }
        try {
            auto trained = eq::train(ecfg, cfg.rx, cfg.users, train_data, mix_seed(frame_seed, 3));
            for (int n = 0; n < n_sub; ++n)
                decisions[static_cast<std::size_t>(n)] =
                    eq::equalize(trained, n, z_sub[static_cast<std::size_t>(n)].rightCols(data));
            if (keep_trained) result.trained = std::move(trained);
        } catch (const eq::TrainingDivergence& e) {
            result.diverged = true;
            result.diagnostic = e.what();
            return result;
        }
    }

    std::vector<std::uint8_t> est;
    std::vector<std::uint8_t> truth;
    est.reserve(static_cast<std::size_t>(2 * sc.frame.users * n_sub * data));
    truth.reserve(est.capacity());
    for (int k = 0; k < sc.frame.users; ++k)
        for (int n = 0; n < n_sub; ++n)
            for (int t = p; t < t_total; ++t) {
                const Complex s = decisions[static_cast<std::size_t>(n)](k, t - p);
                est.push_back(s.real() < 0.0 ? 1 : 0);
                est.push_back(s.imag() < 0.0 ? 1 : 0);
                const auto idx = sc.frame.bit_index(k, n, t);
                truth.push_back(sc.frame.bits[idx]);
                truth.push_back(sc.frame.bits[idx + 1]);
            }
    const auto count = compute_ber(est, truth);
    result.errors = count.errors;
    result.total_bits = count.total_bits;
    return result;
}

std::vector<BerRecord> run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    const unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    const std::size_t n_methods = cfg.methods.size();
    std::vector<BerRecord> records;

    for (int p : cfg.pilots)
        for (const auto& b : cfg.bits)
            for (double snr : cfg.snr_db) {
                struct Tally {
                    long errors = 0;
                    long total = 0;
                    int frames = 0;
                    bool diverged = false;
                    bool done = false;
                };
                std::vector<Tally> tally(n_methods);
                int next = 0;
                while (next < cfg.frames &&
                       std::any_of(tally.begin(), tally.end(), [](const Tally& t) { return !t.done; })) {
                    const int chunk = std::min<int>(static_cast<int>(threads), cfg.frames - next);
                    std::vector<char> active(n_methods);
                    for (std::size_t m = 0; m < n_methods; ++m) active[m] = !tally[m].done;
                    std::vector<std::vector<FrameResult>> results(static_cast<std::size_t>(chunk));
                    parallel_for(static_cast<std::size_t>(chunk), threads, [&](std::size_t i) {
                        const std::uint64_t frame_seed = cfg.seed + static_cast<std::uint64_t>(next) + i;
                        const Scenario sc = make_scenario(cfg, p, snr, frame_seed);
                        auto& out = results[i];
                        out.resize(n_methods);
                        for (std::size_t m = 0; m < n_methods; ++m)
                            if (active[m]) out[m] = run_frame(cfg, sc, cfg.methods[m], b, frame_seed);
                    });
                    // Fold in frame order so the stop point does not depend on scheduling.
                    for (int i = 0; i < chunk; ++i)
                        for (std::size_t m = 0; m < n_methods; ++m) {
                            auto& t = tally[m];
                            if (!active[m] || t.done) continue;
                            const auto& r = results[static_cast<std::size_t>(i)][m];
                            t.frames = next + i + 1;
                            t.diverged = t.diverged || r.diverged;
                            t.errors += r.errors;
                            t.total += r.total_bits;
                            if (cfg.min_errors > 0 && t.errors >= cfg.min_errors) t.done = true;
                        }
                    next += chunk;
                }
                for (std::size_t m = 0; m < n_methods; ++m) {
                    const auto& t = tally[m];
                    BerRecord rec;
                    rec.method = std::string(eq::to_string(cfg.methods[m]));
                    rec.snr_db = snr;
                    rec.bits = b;
                    rec.pilots = p;
                    rec.channel = cfg.channel;
                    rec.errors = t.errors;
                    rec.total_bits = t.total;
                    rec.ber = t.total > 0 ? static_cast<double>(t.errors) / static_cast<double>(t.total) : 0.0;
                    rec.seed_lo = cfg.seed;
                    rec.seed_hi = cfg.seed + static_cast<std::uint64_t>(t.frames) - 1;
                    rec.diverged = t.diverged;
                    records.push_back(std::move(rec));
                }
            }

    std::sort(records.begin(), records.end(), [](const BerRecord& a, const BerRecord& b) {
        auto key = [](const BerRecord& r) {
            return std::make_tuple(static_cast<int>(eq::parse_equalizer_kind(r.method)), resolution_rank(r.bits),
                                   r.pilots, r.snr_db);
        };
        return key(a) < key(b);
    });
    return records;
}

void write_csv(const std::vector<BerRecord>& records, std::ostream& out)
{
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
        out << r.method << (r.diverged ? ":diverged" : "") << ',' << format_double(r.snr_db) << ','
            << resolution_to_string(r.bits) << ',' << r.pilots << ',' << phy::to_string(r.channel) << ',' << r.errors
            << ',' << r.total_bits << ',' << format_double(r.ber) << ',' << r.seed_lo << ',' << r.seed_hi << '\n';
    }
}

void write_csv_file(const std::vector<BerRecord>& records, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(records, out);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void write_history_csv(const eq::TrainedEqualizer& trained, std::ostream& out)
{
    out << "epoch,subcarrier,supervised_loss,unsupervised_loss,beta\n";
    for (std::size_t n = 0; n < trained.histories.size(); ++n)
        for (const auto& e : trained.histories[n].epochs)
            out << e.epoch << ',' << n << ',' << format_double(e.supervised) << ','
                << format_double(e.reconstruction) << ',' << format_double(e.beta) << '\n';
}

long flop_estimate(eq::EqualizerKind method, int rx, int users)
{
    if (rx < 1 || users < 1) throw std::invalid_argument("flop_estimate: R and K must be positive");
    if (method == eq::EqualizerKind::Mmse) return 4L * users * rx;
    // Encoder and S-layer shapes; CDNN and FDNN share them at inference.
    const long dims[] = {2L * rx, 12L * users, 6L * users, 2L * users, 2L * users};
    long total = 0;
    for (std::size_t i = 0; i + 1 < std::size(dims); ++i) total += dims[i] * dims[i + 1];
    return total;
}

InferenceTiming bench_inference(int rx, int users, int repetitions, std::uint64_t seed)
{
    if (repetitions < 1) throw std::invalid_argument("bench_inference: repetitions must be positive");
    using clock = std::chrono::steady_clock;
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::normal_distribution<double> gauss(0.0, 1.0);

    const auto net = eq::build_network(eq::EqualizerKind::Fdnn, rx, users, seed);
    RealMatrix input(2 * rx, 1);
    for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = gauss(rng);
    ComplexMatrix filter(users, rx);
    ComplexMatrix z(rx, 1);
    for (Eigen::Index i = 0; i < filter.size(); ++i) filter(i) = {gauss(rng), gauss(rng)};
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = {gauss(rng), gauss(rng)};

    double sink = 0.0;
    const auto t0 = clock::now();
    for (int i = 0; i < repetitions; ++i) {
        input(0) += 1e-12;
        sink += nn::infer_symbols(net, input)(0);
    }
    const auto t1 = clock::now();
    for (int i = 0; i < repetitions; ++i) {
        z(0) += 1e-12;
        const ComplexMatrix out = filter * z;
        sink += out(0).real();
    }
    const auto t2 = clock::now();
    volatile double keep = sink;
    (void)keep;

    InferenceTiming t;
    t.network_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / repetitions;
    t.mmse_ms = std::chrono::duration<double, std::milli>(t2 - t1).count() / repetitions;
    t.network_flops = flop_estimate(eq::EqualizerKind::Fdnn, rx, users);
    t.mmse_flops = flop_estimate(eq::EqualizerKind::Mmse, rx, users);
    return t;
}

namespace {

// Random small two-headed network. Dimensions are even so every non-S layer
// can be tied.
nn::Network random_network(std::mt19937_64& rng, bool tied, bool with_decoder)
{
    auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto pick_act = [&] { return uniform_int(0, 1) ? nn::Activation::Relu : nn::Activation::Linear; };

    const int in_dim = 2 * uniform_int(2, 4);
    const int sym_dim = 2 * uniform_int(1, 2);
    const int depth = uniform_int(1, 3);

    nn::Network net;
    int prev = in_dim;
    for (int d = 0; d < depth; ++d) {
        const int out = d + 1 == depth ? sym_dim : 2 * uniform_int(2, 5);
        net.encoder.emplace_back(out, prev, pick_act(), tied);
        prev = out;
    }
    net.symbol_head = nn::DenseLayer(sym_dim, sym_dim, nn::Activation::ScaledTanh, false);
    net.symbol_head.alpha = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
    net.symbol_head.beta = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
    if (with_decoder) {
        const int hidden = 2 * uniform_int(2, 5);
        net.decoder.emplace_back(hidden, sym_dim, pick_act(), tied);
        net.decoder.emplace_back(in_dim, hidden, uniform_int(0, 1) ? nn::Activation::Linear : nn::Activation::ScaledTanh,
                                 tied);
        net.decoder.back().alpha = 1.5;
        net.decoder.back().beta = 0.7;
    }
    for (std::size_t i = 0; i < net.layer_count(); ++i) net.layer(i).init_gaussian(0.5, rng);
    net.validate();
    return net;
}

// ReLU is not differentiable at zero, so central differences straddling a
// kink disagree with the one-sided analytic derivative. Such draws are
// rejected rather than checked.
bool clear_of_kinks(const nn::Network& net, const RealMatrix& input, double margin)
{
    const auto trace = nn::forward(net, input, true);
    auto ok = [&](const std::vector<nn::DenseLayer>& layers, const std::vector<RealMatrix>& pre) {
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].activation == nn::Activation::Relu && (pre[i].array().abs() < margin).any()) return false;
        return true;
    };
    return ok(net.encoder, trace.encoder_pre) && ok(net.decoder, trace.decoder_pre);
}

} // namespace

GradCheckSummary gradcheck_suite(int trials, std::uint64_t seed)
{
    GradCheckSummary summary;
    summary.trials = trials;
    for (int trial = 0; trial < trials; ++trial) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(trial)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        // Cycle through tied/untied and with/without decoder so every
        // combination appears in any run of four or more trials.
        const bool tied = trial % 2 == 1;
        const bool with_decoder = (trial / 2) % 2 == 0;
        nn::Network net;
        RealMatrix input;
        for (int attempt = 0;; ++attempt) {
            net = random_network(rng, tied, with_decoder);
            const int batch = std::uniform_int_distribution<int>(3, 6)(rng);
            input.resize(net.input_dim(), batch);
            for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = gauss(rng);
            if (clear_of_kinks(net, input, 1e-3)) break;
            if (attempt > 1000) throw std::runtime_error("gradcheck_suite: could not draw a kink-free network");
        }
        const int labeled = std::uniform_int_distribution<int>(1, static_cast<int>(input.cols()))(rng);
        RealMatrix sym_targets(net.symbol_dim(), labeled);
        for (Eigen::Index i = 0; i < sym_targets.size(); ++i)
            sym_targets(i) = gauss(rng) < 0.0 ? -phy::kQpskAlpha : phy::kQpskAlpha;
        nn::LossWeights weights;
        RealMatrix recon_targets;
        if (with_decoder) {
            weights.reconstruction = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
            recon_targets = input;
        }
        const auto report = nn::grad_check(net, input, sym_targets, recon_targets, weights);
        summary.per_trial.push_back(report.max_relative_error);
        summary.worst = std::max(summary.worst, report.max_relative_error);
    }
    return summary;
}

} // namespace qmimo::harness
