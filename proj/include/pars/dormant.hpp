#pragma once

#include <cstddef>
#include <vector>

#include "pars/error.hpp"
#include "pars/nn_core.hpp"

namespace pars {

struct DormantReport {
    std::vector<std::size_t> dormant_per_layer;
    std::vector<std::size_t> units_per_layer;
    double dormant_ratio = 0.0;
    double threshold = 0.0;
    std::size_t batch_size = 0;
};

/// A unit's score is its mean |post-activation| over the batch divided by the
/// mean score of its layer; the unit is dormant when the score is <= threshold.
/// A layer whose mean score is zero counts as fully dormant.
inline DormantReport dormant_ratio(const MlpParams& p, const Matrix& eval_batch, double threshold = 0.0) {
    if (eval_batch.cols() == 0) throw InvalidArgument("dormant_ratio: empty evaluation batch");
    const ForwardTrace t = forward_batch_traced(p, eval_batch);
    DormantReport rep;
    rep.threshold = threshold;
    rep.batch_size = static_cast<std::size_t>(eval_batch.cols());
    std::size_t dormant = 0, total = 0;
    for (const auto& lt : t.hidden) {
        const Vector score = lt.post_act.cwiseAbs().rowwise().mean();
        const double layer_mean = score.mean();
        std::size_t count = 0;
        for (Eigen::Index k = 0; k < score.size(); ++k) {
            const bool is_dormant = layer_mean <= 0.0 || score[k] / layer_mean <= threshold;
            count += is_dormant ? 1 : 0;
        }
        rep.dormant_per_layer.push_back(count);
        rep.units_per_layer.push_back(static_cast<std::size_t>(score.size()));
        dormant += count;
        total += static_cast<std::size_t>(score.size());
    }
    rep.dormant_ratio = total ? static_cast<double>(dormant) / static_cast<double>(total) : 0.0;
    return rep;
}

}  // namespace pars
