#pragma once

#include <optional>
#include <vector>

#include "tailtta/class_cache.hpp"
#include "tailtta/numerics.hpp"

namespace tailtta {

struct HardNegativePair {
    ClassId class_id = 0;
    ClassId visual_neg = 0;
    ClassId textual_neg = 0;
    Step refreshed_at = 0;

    friend bool operator==(const HardNegativePair&, const HardNegativePair&) = default;
};

/// Indexed by class; empty for classes that were not eligible at refresh.
using NegativeMap = std::vector<std::optional<HardNegativePair>>;

/// For every class with a visual prototype, the most similar other eligible
/// class on the visual side and on the textual side. Ties go to the lowest
/// index. Throws InsufficientClasses with fewer than two eligible classes.
NegativeMap mine_hard_negatives(const std::vector<std::optional<Embedding>>& visual, const PrototypeMatrix& textual,
                                Step refreshed_at = 0);

/// Three-way InfoNCE: positive (v_c, t_c) against (v_c, t_neg) and (v_neg, t_c).
/// Textual rows are taken as-is, so "cos" is the dot product.
double ncl_loss_class(std::span<const double> v_c, std::span<const double> t_c, std::span<const double> v_neg,
                      std::span<const double> t_neg, double tau);

/// Mean of ncl_loss_class over classes holding both a visual prototype and a
/// mined pair. Throws EmptyActiveSet when there are none.
double ncl_loss_total(const std::vector<std::optional<Embedding>>& visual, const PrototypeMatrix& textual,
                      const NegativeMap& pairs, double tau);

/// Classes contributing to ncl_loss_total.
std::vector<ClassId> ncl_active_classes(const std::vector<std::optional<Embedding>>& visual,
                                        const NegativeMap& pairs);

}  // namespace tailtta
