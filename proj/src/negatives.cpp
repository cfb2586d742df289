#include "tailtta/negatives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tailtta/error.hpp"

namespace tailtta {

NegativeMap mine_hard_negatives(const std::vector<std::optional<Embedding>>& visual, const PrototypeMatrix& textual,
                                Step refreshed_at) {
    if (visual.size() != textual.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "visual prototypes cover " + std::to_string(visual.size()) +
                                                  " classes, textual cover " + std::to_string(textual.rows()));
    }
    std::vector<ClassId> eligible;
    for (ClassId c = 0; c < visual.size(); ++c) {
        if (visual[c]) eligible.push_back(c);
    }
    if (eligible.size() < 2) {
        throw Error(ErrorKind::InsufficientClasses,
                    "hard-negative mining needs 2 classes with visual prototypes, have " +
                        std::to_string(eligible.size()));
    }

    NegativeMap pairs(visual.size());
    for (ClassId c : eligible) {
        HardNegativePair pair{c, c, c, refreshed_at};
        double best_visual = -INFINITY;
        double best_textual = -INFINITY;
        for (ClassId j : eligible) {
            if (j == c) continue;
            const double sv = cosine(*visual[c], *visual[j]);
            if (sv > best_visual) {
                best_visual = sv;
                pair.visual_neg = j;
            }
            const double st = dot(textual.row(c), textual.row(j));
            if (st > best_textual) {
                best_textual = st;
                pair.textual_neg = j;
            }
        }
        pairs[c] = pair;
    }
    return pairs;
}

double ncl_loss_class(std::span<const double> v_c, std::span<const double> t_c, std::span<const double> v_neg,
                      std::span<const double> t_neg, double tau) {
    const double pos = dot(v_c, t_c) / tau;
    const double text_side = dot(v_c, t_neg) / tau;
    const double vis_side = dot(v_neg, t_c) / tau;
    const double m = std::max({pos, text_side, vis_side});
    const double log_sum = m + std::log(std::exp(pos - m) + std::exp(text_side - m) + std::exp(vis_side - m));
    return std::max(0.0, log_sum - pos);
}

std::vector<ClassId> ncl_active_classes(const std::vector<std::optional<Embedding>>& visual,
                                        const NegativeMap& pairs) {
    std::vector<ClassId> active;
    for (ClassId c = 0; c < visual.size() && c < pairs.size(); ++c) {
        if (visual[c] && pairs[c] && visual[pairs[c]->visual_neg]) active.push_back(c);
    }
    return active;
}

double ncl_loss_total(const std::vector<std::optional<Embedding>>& visual, const PrototypeMatrix& textual,
                      const NegativeMap& pairs, double tau) {
    const auto active = ncl_active_classes(visual, pairs);
    if (active.empty()) throw Error(ErrorKind::EmptyActiveSet, "no class has both a visual prototype and negatives");
    double sum = 0.0;
    for (ClassId c : active) {
        const auto& pair = *pairs[c];
        sum += ncl_loss_class(visual[c]->values(), textual.row(c), visual[pair.visual_neg]->values(),
                              textual.row(pair.textual_neg), tau);
    }
    return sum / static_cast<double>(active.size());
}

}  // namespace tailtta
