// SPDX-License-Identifier: Apache-2.0
//
// Plain-text checkpoint, one token stream:
//
//   qmimo-network 1
//   layers <count>
//   layer <encoder|symbol|decoder> <out> <in> <activation> <tied 0|1> <alpha> <beta>
//   <out rows of <in> weights, row-major, 17 significant digits>
//   ... (one block per layer, encoder first, then symbol, then decoder)
//   end
//
// Tied layers store the full materialized matrix; loading rejects a matrix
// that violates the tie.
#pragma once

#include <iosfwd>
#include <string>

#include "qmimo/nn/network.hpp"

namespace qmimo::nn {

void save_network(const Network& net, std::ostream& out);
Network load_network(std::istream& in);

void save_network_file(const Network& net, const std::string& path);
Network load_network_file(const std::string& path);

} // namespace qmimo::nn
