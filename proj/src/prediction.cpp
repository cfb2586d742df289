#include "tailtta/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tailtta/class_cache.hpp"
#include "tailtta/error.hpp"

namespace tailtta {

Vector cache_terms(const Embedding& f_v, const std::vector<std::optional<Embedding>>& visual, double alpha,
                   double beta) {
    Vector out(visual.size(), 0.0);
    if (alpha == 0.0) return out;
    for (std::size_t c = 0; c < visual.size(); ++c) {
        if (visual[c]) out[c] = affinity(cosine(f_v, *visual[c]), alpha, beta);
    }
    return out;
}

Vector fused_logits(const Embedding& f_v, const PrototypeMatrix& textual, std::span<const double> cache) {
    if (textual.dim() != f_v.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "embedding dimension " + std::to_string(f_v.dim()) +
                                                      " vs prototype dimension " + std::to_string(textual.dim()));
    }
    Vector logits(textual.rows());
    for (std::size_t c = 0; c < textual.rows(); ++c) logits[c] = dot(f_v.values(), textual.row(c)) + cache[c];
    return logits;
}

Vector fused_probability(const Embedding& f_v, const PrototypeMatrix& textual,
                         const std::vector<std::optional<Embedding>>& visual, double alpha, double beta, double tau) {
    const Vector cache = cache_terms(f_v, visual, alpha, beta);
    return softmax(fused_logits(f_v, textual, cache), tau);
}

ViewSelection select_confident_views(std::span<const Vector> view_probs, double rho, double entropy_threshold) {
    if (view_probs.empty()) throw Error(ErrorKind::NoViews, "sample has no views");
    std::vector<double> h(view_probs.size());
    for (std::size_t n = 0; n < view_probs.size(); ++n) h[n] = entropy(view_probs[n]);

    std::vector<std::size_t> order(view_probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h[a] < h[b]; });

    ViewSelection sel;
    for (std::size_t n : order) {
        if (h[n] <= entropy_threshold) sel.selected.push_back(n);
    }
    if (sel.selected.empty()) {
        sel.selected.push_back(order.front());
        sel.fallback = true;
        return sel;
    }
    const double want = rho * static_cast<double>(sel.selected.size());
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(want - 1e-9)));
    if (keep < sel.selected.size()) sel.selected.resize(keep);
    return sel;
}

Vector average_selected(std::span<const Vector> view_probs, const ViewSelection& selection) {
    Vector mean(view_probs.front().size(), 0.0);
    for (std::size_t n : selection.selected) {
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += view_probs[n][c];
    }
    for (double& x : mean) x /= static_cast<double>(selection.selected.size());
    return mean;
}

}  // namespace tailtta
