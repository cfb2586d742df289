#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tailtta/numerics.hpp"

namespace tailtta {

/// Per-class cache affinity alpha * exp(-beta (1 - f.v_c)); 0 where v_c is empty.
Vector cache_terms(const Embedding& f_v, const std::vector<std::optional<Embedding>>& visual, double alpha,
                   double beta);

/// logit_c = f.t_c + cache_c.
Vector fused_logits(const Embedding& f_v, const PrototypeMatrix& textual, std::span<const double> cache);

/// softmax(fused_logits / tau).
Vector fused_probability(const Embedding& f_v, const PrototypeMatrix& textual,
                         const std::vector<std::optional<Embedding>>& visual, double alpha, double beta, double tau);

struct ViewSelection {
    std::vector<std::size_t> selected;   // view indices, most confident first
    bool fallback = false;               // no view passed the threshold
};

/// Views with entropy <= threshold, then the top-rho fraction of those by
/// confidence (lowest entropy, ties to the lower index). At least one view is
/// kept; with no passing view the single lowest-entropy view is used.
ViewSelection select_confident_views(std::span<const Vector> view_probs, double rho, double entropy_threshold);

/// Arithmetic mean of the selected views' distributions.
Vector average_selected(std::span<const Vector> view_probs, const ViewSelection& selection);

}  // namespace tailtta
