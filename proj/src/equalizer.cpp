// SPDX-License-Identifier: Apache-2.0
#include "qmimo/equalizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "qmimo/parallel.hpp"
#include "qmimo/phy.hpp"

namespace qmimo::eq {

std::string_view to_string(EqualizerKind kind)
{
    switch (kind) {
    case EqualizerKind::Mmse: return "MMSE";
    case EqualizerKind::Cdnn: return "CDNN";
    case EqualizerKind::Fdnn: return "FDNN";
    }
    return "MMSE";
}

EqualizerKind parse_equalizer_kind(std::string_view name)
{
    if (name == "MMSE" || name == "mmse") return EqualizerKind::Mmse;
    if (name == "CDNN" || name == "cdnn") return EqualizerKind::Cdnn;
    if (name == "FDNN" || name == "fdnn") return EqualizerKind::Fdnn;
    throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(BetaSweepMode mode)
{
    return mode == BetaSweepMode::PerEpoch ? "epoch" : "batch";
}

BetaSweepMode parse_beta_sweep(std::string_view name)
{
    if (name == "epoch") return BetaSweepMode::PerEpoch;
    if (name == "batch") return BetaSweepMode::PerBatch;
    throw std::invalid_argument("unknown beta sweep mode '" + std::string(name) + "'");
}

void EqualizerConfig::validate() const
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
    if (beta_grid.empty()) throw std::invalid_argument("beta_grid must not be empty");
    for (double b : beta_grid)
        if (!(b >= 1.0 && b <= 100.0)) throw std::invalid_argument("beta_grid values must lie in [1, 100]");
    if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (!(plateau_tol >= 0.0)) throw std::invalid_argument("plateau_tol must be >= 0");
    if (plateau_window < 1) throw std::invalid_argument("plateau_window must be >= 1");
    if (full_batch_limit < 1 || batch_bits < 2) throw std::invalid_argument("invalid batch rule");
}

namespace {

nn::DenseLayer gaussian_layer(int out, int in, nn::Activation act, bool tied, std::mt19937_64& rng)
{
    nn::DenseLayer layer(out, in, act, tied);
    layer.init_gaussian(kInitStddev, rng);
    return layer;
}

RealMatrix gather_columns(const RealMatrix& m, const std::vector<Eigen::Index>& cols)
{
    RealMatrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
    return out;
}

RealMatrix hconcat(const RealMatrix& a, const RealMatrix& b)
{
    if (b.cols() == 0) return a;
    RealMatrix out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

std::string divergence_message(const EqualizerConfig& cfg, int epoch, const std::string& detail)
{
    std::ostringstream msg;
    msg << "training diverged: method=" << to_string(cfg.kind) << " lambda=" << cfg.lambda
        << " lr=" << cfg.optimizer.learning_rate << " optimizer=" << nn::to_string(cfg.optimizer.kind)
        << " epoch=" << epoch << ": " << detail;
    return msg.str();
}

} // namespace

nn::Network build_network(EqualizerKind kind, int rx, int users, std::uint64_t seed, bool tie_weights,
                          double initial_beta)
{
    if (kind == EqualizerKind::Mmse) throw std::invalid_argument("build_network: MMSE has no network");
    if (users < 1 || rx < users) throw std::invalid_argument("build_network: need R >= K >= 1");
    const bool tied = kind == EqualizerKind::Fdnn && tie_weights;
    const int in = 2 * rx;
    const int w1 = 12 * users;
    const int w2 = 6 * users;
    const int bottleneck = 2 * users;

    std::mt19937_64 rng(seed);
    nn::Network net;
    net.encoder.push_back(gaussian_layer(w1, in, nn::Activation::Relu, tied, rng));
    net.encoder.push_back(gaussian_layer(w2, w1, nn::Activation::Relu, tied, rng));
    net.encoder.push_back(gaussian_layer(bottleneck, w2, nn::Activation::Linear, tied, rng));

    net.symbol_head = nn::DenseLayer(bottleneck, bottleneck, nn::Activation::ScaledTanh, false);
    net.symbol_head.set_params(RealMatrix::Identity(bottleneck, bottleneck));
    net.symbol_head.alpha = phy::kQpskAlpha;
    net.symbol_head.beta = initial_beta;

    if (kind == EqualizerKind::Fdnn) {
        net.decoder.push_back(gaussian_layer(w2, bottleneck, nn::Activation::Relu, tied, rng));
        net.decoder.push_back(gaussian_layer(w1, w2, nn::Activation::Relu, tied, rng));
        net.decoder.push_back(gaussian_layer(in, w1, nn::Activation::Linear, tied, rng));
    }
    net.validate();
    return net;
}

RealMatrix stack_real(const ComplexMatrix& z)
{
    RealMatrix s(2 * z.rows(), z.cols());
    s.topRows(z.rows()) = z.real();
    s.bottomRows(z.rows()) = z.imag();
    return s;
}

ComplexMatrix unstack_complex(const RealMatrix& s)
{
    if (s.rows() % 2 != 0) throw std::invalid_argument("unstack_complex: odd row count");
    const auto h = s.rows() / 2;
    ComplexMatrix z(h, s.cols());
    z.real() = s.topRows(h);
    z.imag() = s.bottomRows(h);
    return z;
}

double sweep_beta(nn::Network& net, const RealMatrix& inputs, const RealMatrix& targets,
                  const std::vector<double>& grid)
{
    if (grid.empty()) throw std::invalid_argument("sweep_beta: empty grid");
    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    const RealMatrix pre = net.symbol_head.weights() * nn::encode(net, inputs);
    const double alpha = net.symbol_head.alpha;
    double best_beta = sorted.front();
    double best_loss = std::numeric_limits<double>::infinity();
    for (double beta : sorted) {
        const RealMatrix out = alpha * (beta * pre.array()).tanh().matrix();
        const double loss = nn::symbol_loss(out, targets);
        if (loss < best_loss) {
            best_loss = loss;
            best_beta = beta;
        }
    }
    net.symbol_head.beta = best_beta;
    return best_beta;
}

TrainingHistory train_network(const EqualizerConfig& cfg, nn::Network& net, const TrainingSet& data,
                              std::uint64_t seed)
{
    cfg.validate();
    const auto pilots = data.inputs.cols();
    if (pilots < 1) throw std::invalid_argument("train_network: need at least one pilot vector");
    if (data.targets.cols() != pilots) throw std::invalid_argument("train_network: pilot/target count mismatch");

    const double recon_weight = net.has_decoder() ? cfg.reconstruction_weight() : 0.0;
    const nn::LossWeights weights{1.0, recon_weight};
    const bool with_decoder = recon_weight != 0.0;
    const bool add_unlabeled = with_decoder && cfg.use_unlabeled && data.unlabeled.cols() > 0;

    const Eigen::Index vector_bits = data.targets.rows(); // 2K bits per symbol vector
    const Eigen::Index batch_size = pilots <= cfg.full_batch_limit
                                      ? pilots
                                      : std::max<Eigen::Index>(1, cfg.batch_bits / vector_bits);
    const Eigen::Index batches = (pilots + batch_size - 1) / batch_size;

    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(pilots));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::vector<Eigen::Index> extra_order(static_cast<std::size_t>(add_unlabeled ? data.unlabeled.cols() : 0));
    std::iota(extra_order.begin(), extra_order.end(), Eigen::Index{0});

    auto opt_state = nn::OptimizerState::for_network(net);
    TrainingHistory history;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.beta_sweep == BetaSweepMode::PerEpoch) sweep_beta(net, data.inputs, data.targets, cfg.beta_grid);
        if (batches > 1) {
            std::shuffle(order.begin(), order.end(), rng);
            std::shuffle(extra_order.begin(), extra_order.end(), rng);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        for (Eigen::Index b = 0; b < batches; ++b) {
            RealMatrix inputs;
            RealMatrix targets;
            if (batches == 1) {
                inputs = data.inputs;
                targets = data.targets;
            } else {
                const auto lo = b * batch_size;
                const auto hi = std::min(pilots, lo + batch_size);
                const std::vector<Eigen::Index> cols(order.begin() + lo, order.begin() + hi);
                inputs = gather_columns(data.inputs, cols);
                targets = gather_columns(data.targets, cols);
            }
            if (add_unlabeled) {
                const auto total = static_cast<Eigen::Index>(extra_order.size());
                const auto lo = total * b / batches;
                const auto hi = total * (b + 1) / batches;
                const std::vector<Eigen::Index> cols(extra_order.begin() + lo, extra_order.begin() + hi);
                inputs = hconcat(inputs, gather_columns(data.unlabeled, cols));
            }
            if (cfg.beta_sweep == BetaSweepMode::PerBatch)
                sweep_beta(net, inputs.leftCols(targets.cols()), targets, cfg.beta_grid);

            const auto trace = nn::forward(net, inputs, with_decoder);
            const RealMatrix& recon_target = with_decoder ? inputs : RealMatrix{};
            const auto loss = nn::evaluate_loss(trace, targets, recon_target, weights);
            if (!std::isfinite(loss.total))
                throw TrainingDivergence(divergence_message(cfg, epoch, "non-finite loss"));
            const double share = static_cast<double>(targets.cols()) / static_cast<double>(pilots);
            rec.supervised += share * loss.supervised;
            rec.reconstruction += share * loss.reconstruction;

            const auto grads = nn::backward(net, trace, targets, recon_target, weights);
            try {
                nn::optimizer_step(net, grads, opt_state, cfg.optimizer);
            } catch (const nn::NonFiniteError& e) {
                throw TrainingDivergence(divergence_message(cfg, epoch, e.what()));
            }
        }
        rec.beta = net.symbol_head.beta;
        history.epochs.push_back(rec);

        const double total = rec.supervised + recon_weight * rec.reconstruction;
        if (total < best * (1.0 - cfg.plateau_tol)) {
            best = total;
            stale = 0;
        } else {
            best = std::min(best, total);
            if (++stale >= cfg.plateau_window) {
                history.stopped_on_plateau = true;
                break;
            }
        }
    }
    return history;
}

const nn::Network& TrainedEqualizer::network_for(int subcarrier) const
{
    if (!per_subcarrier) {
        if (networks.empty()) throw std::out_of_range("equalize: no trained network");
        return networks.front();
    }
    if (subcarrier < 0 || static_cast<std::size_t>(subcarrier) >= networks.size())
        throw std::out_of_range("equalize: no trained network for subcarrier " + std::to_string(subcarrier));
    return networks[static_cast<std::size_t>(subcarrier)];
}

TrainedEqualizer train(const EqualizerConfig& cfg, int rx, int users, const std::vector<SubcarrierPilots>& data,
                       std::uint64_t seed)
{
    cfg.validate();
    if (cfg.kind == EqualizerKind::Mmse) throw std::invalid_argument("train: MMSE is not a learned equalizer");
    if (data.empty()) throw std::invalid_argument("train: no subcarriers");

    std::vector<TrainingSet> sets;
    if (cfg.per_subcarrier) {
        for (const auto& sc : data) {
            sets.push_back({stack_real(sc.pilot_z), stack_real(sc.pilot_x),
                            sc.unlabeled_z.cols() ? stack_real(sc.unlabeled_z) : RealMatrix(2 * rx, 0)});
        }
    } else {
        TrainingSet pooled{RealMatrix(2 * rx, 0), RealMatrix(2 * users, 0), RealMatrix(2 * rx, 0)};
        for (const auto& sc : data) {
            pooled.inputs = hconcat(pooled.inputs, stack_real(sc.pilot_z));
            pooled.targets = hconcat(pooled.targets, stack_real(sc.pilot_x));
            if (sc.unlabeled_z.cols()) pooled.unlabeled = hconcat(pooled.unlabeled, stack_real(sc.unlabeled_z));
        }
        sets.push_back(std::move(pooled));
    }

    TrainedEqualizer trained;
    trained.kind = cfg.kind;
    trained.per_subcarrier = cfg.per_subcarrier;
    trained.networks.resize(sets.size());
    trained.histories.resize(sets.size());
    const double initial_beta = *std::min_element(cfg.beta_grid.begin(), cfg.beta_grid.end());
    parallel_for(sets.size(), cfg.threads, [&](std::size_t i) {
        nn::Network net = build_network(cfg.kind, rx, users, mix_seed(seed, 2 * i), cfg.tie_weights, initial_beta);
        trained.histories[i] = train_network(cfg, net, sets[i], mix_seed(seed, 2 * i + 1));
        trained.networks[i] = std::move(net);
    });
    return trained;
}

ComplexMatrix symbol_decision(const RealMatrix& out)
{
    const RealMatrix signs = out.unaryExpr([](double v) { return v < 0.0 ? -phy::kQpskAlpha : phy::kQpskAlpha; });
    return unstack_complex(signs);
}

ComplexMatrix equalize(const TrainedEqualizer& trained, int subcarrier, const ComplexMatrix& z)
{
    return symbol_decision(nn::infer_symbols(trained.network_for(subcarrier), stack_real(z)));
}

} // namespace qmimo::eq
