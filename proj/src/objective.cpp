#include "tailtta/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tailtta/error.hpp"

namespace tailtta {

const char* to_string(AugPrediction mode) noexcept { return mode == AugPrediction::Fused ? "fused" : "textual"; }

double aug_entropy_loss(std::span<const Embedding> views, const std::function<Vector(const Embedding&)>& predict,
                        double rho, double entropy_threshold) {
    if (views.empty()) throw Error(ErrorKind::NoViews, "sample has no views");
    std::vector<Vector> probs;
    probs.reserve(views.size());
    for (const auto& v : views) probs.push_back(predict(v));
    const auto sel = select_confident_views(probs, rho, entropy_threshold);
    return entropy(average_selected(probs, sel));
}

namespace {

std::vector<ClassId> eligible_classes(const std::vector<std::optional<Embedding>>& visual) {
    std::vector<ClassId> out;
    for (ClassId c = 0; c < visual.size(); ++c) {
        if (visual[c]) out.push_back(c);
    }
    return out;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// -log softmax(logits)[target] and the softmax itself.
double cross_entropy(std::span<const double> logits, std::size_t target, Vector* probs) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - m);
    if (probs) {
        probs->resize(logits.size());
        for (std::size_t j = 0; j < logits.size(); ++j) (*probs)[j] = std::exp(logits[j] - m) / sum;
    }
    return m + std::log(sum) - logits[target];
}

}  // namespace

double align_loss(const PrototypeMatrix& textual, const std::vector<std::optional<Embedding>>& visual, double tau) {
    const auto eligible = eligible_classes(visual);
    if (eligible.empty()) throw Error(ErrorKind::EmptyActiveSet, "no class has a visual prototype");
    double sum = 0.0;
    Vector logits(eligible.size());
    for (std::size_t a = 0; a < eligible.size(); ++a) {
        const auto anchor = textual.row(eligible[a]);
        for (std::size_t j = 0; j < eligible.size(); ++j) logits[j] = dot(anchor, visual[eligible[j]]->values()) / tau;
        sum += cross_entropy(logits, a, nullptr);
    }
    return sum / static_cast<double>(eligible.size());
}

Objective::Objective(std::span<const Embedding> views, std::vector<std::optional<Embedding>> visual, NegativeMap pairs,
                     ObjectiveParams params)
    : views_(views.begin(), views.end()), visual_(std::move(visual)), pairs_(std::move(pairs)), params_(params) {
    if (views_.empty()) throw Error(ErrorKind::NoViews, "sample has no views");
    view_cache_.reserve(views_.size());
    for (const auto& v : views_) {
        if (params_.aug_prediction == AugPrediction::Fused) {
            view_cache_.push_back(cache_terms(v, visual_, params_.alpha_fuse, params_.beta_fuse));
        } else {
            view_cache_.emplace_back(visual_.size(), 0.0);
        }
    }
}

std::vector<Vector> Objective::view_probs(const PrototypeMatrix& textual) const {
    if (textual.rows() != visual_.size()) {
        throw Error(ErrorKind::ShapeMismatch, "textual prototypes have " + std::to_string(textual.rows()) +
                                                  " rows, objective expects " + std::to_string(visual_.size()));
    }
    std::vector<Vector> probs;
    probs.reserve(views_.size());
    for (std::size_t n = 0; n < views_.size(); ++n) {
        probs.push_back(softmax(fused_logits(views_[n], textual, view_cache_[n]), params_.tau));
    }
    return probs;
}

ViewSelection Objective::select(const PrototypeMatrix& textual) const {
    return select_confident_views(view_probs(textual), params_.rho, params_.entropy_threshold);
}

double Objective::aug_term(const PrototypeMatrix& textual, const ViewSelection& selection,
                           PrototypeMatrix* grad) const {
    const auto probs = view_probs(textual);
    const Vector mean = average_selected(probs, selection);
    const double loss = entropy(mean);
    if (!grad) return loss;

    // dH/dmean_c = -(ln mean_c + 1); the constant cancels in the softmax Jacobian.
    Vector g(mean.size(), 0.0);
    for (std::size_t c = 0; c < mean.size(); ++c) {
        if (mean[c] > 0.0) g[c] = -std::log(mean[c]);
    }
    const double scale = 1.0 / (static_cast<double>(selection.selected.size()) * params_.tau);
    for (std::size_t n : selection.selected) {
        const Vector& p = probs[n];
        double g_bar = 0.0;
        for (std::size_t c = 0; c < p.size(); ++c) g_bar += p[c] * g[c];
        for (std::size_t c = 0; c < p.size(); ++c) {
            const double dz = scale * p[c] * (g[c] - g_bar);
            if (dz != 0.0) axpy(dz, views_[n].values(), grad->row(c));
        }
    }
    return loss;
}

double Objective::align_term(const PrototypeMatrix& textual, PrototypeMatrix* grad) const {
    const auto eligible = eligible_classes(visual_);
    if (eligible.empty()) return 0.0;
    const double inv_k = 1.0 / static_cast<double>(eligible.size());
    double sum = 0.0;
    Vector logits(eligible.size());
    Vector q;
    for (std::size_t a = 0; a < eligible.size(); ++a) {
        const ClassId c = eligible[a];
        for (std::size_t j = 0; j < eligible.size(); ++j) {
            logits[j] = dot(textual.row(c), visual_[eligible[j]]->values()) / params_.tau;
        }
        sum += cross_entropy(logits, a, grad ? &q : nullptr);
        if (!grad) continue;
        for (std::size_t j = 0; j < eligible.size(); ++j) {
            const double coeff = inv_k / params_.tau * (q[j] - (j == a ? 1.0 : 0.0));
            axpy(coeff, visual_[eligible[j]]->values(), grad->row(c));
        }
    }
    return sum * inv_k;
}

double Objective::ncl_term(const PrototypeMatrix& textual, PrototypeMatrix* grad) const {
    const auto active = ncl_active_classes(visual_, pairs_);
    if (active.empty()) return 0.0;
    const double inv_k = 1.0 / static_cast<double>(active.size());
    double sum = 0.0;
    Vector q;
    for (ClassId c : active) {
        const auto& pair = *pairs_[c];
        const auto v_c = visual_[c]->values();
        const auto v_neg = visual_[pair.visual_neg]->values();
        const double logits[3] = {dot(v_c, textual.row(c)) / params_.tau,
                                  dot(v_c, textual.row(pair.textual_neg)) / params_.tau,
                                  dot(v_neg, textual.row(c)) / params_.tau};
        sum += cross_entropy(logits, 0, grad ? &q : nullptr);
        if (!grad) continue;
        const double s = inv_k / params_.tau;
        axpy(s * (q[0] - 1.0), v_c, grad->row(c));
        axpy(s * q[2], v_neg, grad->row(c));
        axpy(s * q[1], v_c, grad->row(pair.textual_neg));
    }
    return sum * inv_k;
}

LossBreakdown Objective::total_loss(const PrototypeMatrix& textual, const ViewSelection& selection) const {
    LossBreakdown out;
    out.lambda1 = params_.lambda1;
    out.lambda2 = params_.lambda2;
    out.l_aug = aug_term(textual, selection, nullptr);
    out.l_align = align_term(textual, nullptr);
    out.l_ncl = params_.lambda2 != 0.0 ? ncl_term(textual, nullptr) : 0.0;
    out.total = out.l_aug + out.lambda1 * out.l_align + out.lambda2 * out.l_ncl;
    return out;
}

LossBreakdown Objective::grad_textual(const PrototypeMatrix& textual, const ViewSelection& selection,
                                      PrototypeMatrix& grad) const {
    grad = PrototypeMatrix(textual.rows(), textual.dim());
    PrototypeMatrix part(textual.rows(), textual.dim());

    LossBreakdown out;
    out.lambda1 = params_.lambda1;
    out.lambda2 = params_.lambda2;
    out.l_aug = aug_term(textual, selection, &grad);

    out.l_align = align_term(textual, params_.lambda1 != 0.0 ? &part : nullptr);
    if (params_.lambda1 != 0.0) axpy(params_.lambda1, part.flat(), grad.flat());

    if (params_.lambda2 != 0.0) {
        part = PrototypeMatrix(textual.rows(), textual.dim());
        out.l_ncl = ncl_term(textual, &part);
        axpy(params_.lambda2, part.flat(), grad.flat());
    }
    out.total = out.l_aug + out.lambda1 * out.l_align + out.lambda2 * out.l_ncl;
    return out;
}

TextualPrototypeSet TextualPrototypeSet::from_initial(PrototypeMatrix initial) {
    TextualPrototypeSet s;
    s.moments_m = PrototypeMatrix(initial.rows(), initial.dim());
    s.moments_v = PrototypeMatrix(initial.rows(), initial.dim());
    s.protos = std::move(initial);
    return s;
}

void adamw_update(std::span<double> params, std::span<double> m, std::span<double> v, std::span<const double> grad,
                  std::int64_t step, const AdamWParams& hp) {
    if (params.size() != grad.size() || m.size() != grad.size() || v.size() != grad.size()) {
        throw Error(ErrorKind::ShapeMismatch, "parameter/gradient/moment sizes differ (" +
                                                  std::to_string(params.size()) + " vs " +
                                                  std::to_string(grad.size()) + ")");
    }
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
    const double decay = 1.0 - hp.lr * hp.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * grad[i];
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] = params[i] * decay - hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    }
}

void optimizer_step(TextualPrototypeSet& state, const PrototypeMatrix& grad, const AdamWParams& hp) {
    if (grad.rows() != state.protos.rows() || grad.dim() != state.protos.dim()) {
        throw Error(ErrorKind::ShapeMismatch, "gradient is " + std::to_string(grad.rows()) + "x" +
                                                  std::to_string(grad.dim()) + ", prototypes are " +
                                                  std::to_string(state.protos.rows()) + "x" +
                                                  std::to_string(state.protos.dim()));
    }
    ++state.step_count;
    adamw_update(state.protos.flat(), state.moments_m.flat(), state.moments_v.flat(), grad.flat(), state.step_count,
                 hp);
    for (std::size_t c = 0; c < state.protos.rows(); ++c) normalize_in_place(state.protos.row(c));
}

}  // namespace tailtta
