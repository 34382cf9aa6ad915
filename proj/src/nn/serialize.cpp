// SPDX-License-Identifier: Apache-2.0
#include "qmimo/nn/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace qmimo::nn {

namespace {

constexpr const char* kMagic = "qmimo-network";
constexpr int kVersion = 1;

void write_layer(std::ostream& out, const char* role, const DenseLayer& layer)
{
    out << "layer " << role << ' ' << layer.out() << ' ' << layer.in() << ' ' << to_string(layer.activation) << ' '
        << (layer.tied() ? 1 : 0) << ' ' << layer.alpha << ' ' << layer.beta << '\n';
    const RealMatrix& w = layer.weights();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) out << (j ? " " : "") << w(i, j);
        out << '\n';
    }
}

template <typename T>
T read(std::istream& in, const char* what)
{
    T value{};
    if (!(in >> value)) throw std::runtime_error(std::string("load_network: failed to read ") + what);
    return value;
}

} // namespace

void save_network(const Network& net, std::ostream& out)
{
    const auto old_precision = out.precision(17);
    out << kMagic << ' ' << kVersion << '\n' << "layers " << net.layer_count() << '\n';
    for (const auto& l : net.encoder) write_layer(out, "encoder", l);
    write_layer(out, "symbol", net.symbol_head);
    for (const auto& l : net.decoder) write_layer(out, "decoder", l);
    out << "end\n";
    out.precision(old_precision);
    if (!out) throw std::runtime_error("save_network: write failed");
}

Network load_network(std::istream& in)
{
    if (read<std::string>(in, "magic") != kMagic) throw std::runtime_error("load_network: not a network checkpoint");
    if (read<int>(in, "version") != kVersion) throw std::runtime_error("load_network: unsupported version");
    if (read<std::string>(in, "'layers'") != "layers") throw std::runtime_error("load_network: expected 'layers'");
    const auto count = read<std::size_t>(in, "layer count");

    Network net;
    bool have_symbol = false;
    for (std::size_t li = 0; li < count; ++li) {
        if (read<std::string>(in, "'layer'") != "layer") throw std::runtime_error("load_network: expected 'layer'");
        const auto role = read<std::string>(in, "role");
        const auto out = read<int>(in, "rows");
        const auto cols = read<int>(in, "cols");
        const auto act = parse_activation(read<std::string>(in, "activation"));
        const auto tied = read<int>(in, "tie flag") != 0;
        DenseLayer layer(out, cols, act, tied);
        layer.alpha = read<double>(in, "alpha");
        layer.beta = read<double>(in, "beta");
        RealMatrix w(out, cols);
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < cols; ++j) w(i, j) = read<double>(in, "weight");
        layer.set_weights(w);
        if (role == "encoder") {
            if (have_symbol) throw std::runtime_error("load_network: encoder layer after the S-layer");
            net.encoder.push_back(std::move(layer));
        } else if (role == "symbol") {
            if (have_symbol) throw std::runtime_error("load_network: duplicate S-layer");
            net.symbol_head = std::move(layer);
            have_symbol = true;
        } else if (role == "decoder") {
            if (!have_symbol) throw std::runtime_error("load_network: decoder layer before the S-layer");
            net.decoder.push_back(std::move(layer));
        } else {
            throw std::runtime_error("load_network: unknown layer role '" + role + "'");
        }
    }
    if (!have_symbol) throw std::runtime_error("load_network: missing S-layer");
    if (read<std::string>(in, "'end'") != "end") throw std::runtime_error("load_network: expected 'end'");
    net.validate();
    return net;
}

void save_network_file(const Network& net, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    save_network(net, out);
}

Network load_network_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_network(in);
}

} // namespace qmimo::nn
