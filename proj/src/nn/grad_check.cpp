// SPDX-License-Identifier: Apache-2.0
#include "qmimo/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace qmimo::nn {

GradCheckReport grad_check(const Network& net, const RealMatrix& input, const RealMatrix& symbol_targets,
                           const RealMatrix& recon_targets, const LossWeights& weights, double step)
{
    const bool with_decoder = weights.reconstruction != 0.0;
    const Gradients analytic = backward(net, forward(net, input, with_decoder), symbol_targets, recon_targets, weights);

    Network probe = net;
    const double loss0 =
        evaluate_loss(forward(net, input, with_decoder), symbol_targets, recon_targets, weights).total;
    const double floor = kGradCheckFloor * std::max(1.0, std::abs(loss0));
    auto loss_at = [&]() {
        return evaluate_loss(forward(probe, input, with_decoder), symbol_targets, recon_targets, weights).total;
    };

    GradCheckReport report;
    for (std::size_t li = 0; li < probe.layer_count(); ++li) {
        const RealMatrix base = probe.layer(li).params();
        for (Eigen::Index j = 0; j < base.cols(); ++j) {
            for (Eigen::Index i = 0; i < base.rows(); ++i) {
                RealMatrix p = base;
                p(i, j) = base(i, j) + step;
                probe.layer(li).set_params(p);
                const double up = loss_at();
                p(i, j) = base(i, j) - step;
                probe.layer(li).set_params(p);
                const double down = loss_at();
                const double numeric = (up - down) / (2.0 * step);
                const double exact = analytic.params[li](i, j);
                const double denom = std::max({std::abs(exact), std::abs(numeric), floor});
                const double rel = std::abs(exact - numeric) / denom;
                ++report.checked;
                if (rel > report.max_relative_error) {
                    report.max_relative_error = rel;
                    report.worst_layer = li;
                    report.worst_row = i;
                    report.worst_col = j;
                    report.analytic = exact;
                    report.numeric = numeric;
                }
            }
        }
        probe.layer(li).set_params(base);
    }
    return report;
}

} // namespace qmimo::nn
