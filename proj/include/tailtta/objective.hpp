#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tailtta/negatives.hpp"
#include "tailtta/numerics.hpp"
#include "tailtta/prediction.hpp"

namespace tailtta {

enum class AugPrediction { Fused, Textual };

const char* to_string(AugPrediction mode) noexcept;

struct ObjectiveParams {
    double tau = 0.01;
    double lambda1 = 1.0;   // alignment weight
    double lambda2 = 0.5;   // hard-negative weight
    double alpha_fuse = 1.0;
    double beta_fuse = 5.0;
    double rho = 0.1;
    double entropy_threshold = INFINITY;
    AugPrediction aug_prediction = AugPrediction::Fused;
};

struct LossBreakdown {
    double l_aug = 0.0;
    double l_align = 0.0;
    double l_ncl = 0.0;
    double total = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

/// Entropy of the confident-view average of `predict` over `views`.
double aug_entropy_loss(std::span<const Embedding> views, const std::function<Vector(const Embedding&)>& predict,
                        double rho, double entropy_threshold);

/// Class-mean InfoNCE with t_c as anchor, v_c as positive and every other
/// class holding a visual prototype as a negative. Throws EmptyActiveSet
/// when no class has a visual prototype.
double align_loss(const PrototypeMatrix& textual, const std::vector<std::optional<Embedding>>& visual, double tau);

/// The composite objective for one sample, as a function of the textual
/// prototypes only. Views, visual prototypes and mined negatives are frozen
/// at construction; the view-selection mask is frozen per evaluation.
class Objective {
public:
    Objective(std::span<const Embedding> views, std::vector<std::optional<Embedding>> visual, NegativeMap pairs,
              ObjectiveParams params);

    /// Confident-view selection at the given prototypes.
    ViewSelection select(const PrototypeMatrix& textual) const;

    LossBreakdown total_loss(const PrototypeMatrix& textual, const ViewSelection& selection) const;
    LossBreakdown total_loss(const PrototypeMatrix& textual) const { return total_loss(textual, select(textual)); }

    /// Analytic gradient w.r.t. every textual row. `grad` is resized to match.
    LossBreakdown grad_textual(const PrototypeMatrix& textual, const ViewSelection& selection,
                               PrototypeMatrix& grad) const;

    const ObjectiveParams& params() const noexcept { return params_; }

private:
    std::vector<Vector> view_probs(const PrototypeMatrix& textual) const;
    double aug_term(const PrototypeMatrix& textual, const ViewSelection& selection, PrototypeMatrix* grad) const;
    double align_term(const PrototypeMatrix& textual, PrototypeMatrix* grad) const;
    double ncl_term(const PrototypeMatrix& textual, PrototypeMatrix* grad) const;

    std::vector<Embedding> views_;
    std::vector<std::optional<Embedding>> visual_;
    NegativeMap pairs_;
    ObjectiveParams params_;
    std::vector<Vector> view_cache_;   // per-view cache affinities (zero for textual-only predictions)
};

struct AdamWParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct TextualPrototypeSet {
    PrototypeMatrix protos;
    PrototypeMatrix moments_m;
    PrototypeMatrix moments_v;
    std::int64_t step_count = 0;

    static TextualPrototypeSet from_initial(PrototypeMatrix initial);
};

/// One AdamW update on raw parameters; `step` is the 1-based step index.
void adamw_update(std::span<double> params, std::span<double> m, std::span<double> v, std::span<const double> grad,
                  std::int64_t step, const AdamWParams& hp);

/// AdamW step followed by per-row renormalization; increments step_count.
void optimizer_step(TextualPrototypeSet& state, const PrototypeMatrix& grad, const AdamWParams& hp);

}  // namespace tailtta
