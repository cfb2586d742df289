#include "tailtta/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tailtta/error.hpp"

namespace tailtta {

namespace {

void require(bool ok, const char* key, const std::string& rule) {
    if (!ok) throw Error(ErrorKind::RangeViolation, std::string(key) + " must be " + rule);
}

}  // namespace

void HyperParams::validate() const {
    require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon", "> 0");
    require(smoothness > 0.0 && std::isfinite(smoothness), "s", "> 0");
    require(gamma >= 0.0 && std::isfinite(gamma), "gamma", ">= 0");
    require(base_capacity >= 1, "M", ">= 1");
    require(max_capacity >= 1, "M_max", ">= 1");
    require(inactivity_threshold >= 1, "eta", ">= 1");
    require(boost_scale >= 0.0 && std::isfinite(boost_scale), "delta", ">= 0");
    require(boost_decay >= 0.0 && std::isfinite(boost_decay), "alpha_decay", ">= 0");
    require(tau > 0.0 && std::isfinite(tau), "tau", "> 0");
    require(lambda1 >= 0.0 && std::isfinite(lambda1), "lambda1", ">= 0");
    require(lambda2 >= 0.0 && std::isfinite(lambda2), "lambda2", ">= 0");
    require(alpha_fuse >= 0.0 && std::isfinite(alpha_fuse), "alpha_fuse", ">= 0");
    require(beta_fuse >= 0.0 && std::isfinite(beta_fuse), "beta_fuse", ">= 0");
    require(!entropy_gate || !std::isnan(*entropy_gate), "entropy_gate", "a number, inf, -inf or auto");
    require(rho > 0.0 && rho <= 1.0, "rho", "in (0, 1]");
    require(!std::isnan(entropy_threshold), "entropy_threshold", "a number");
    require(n_views >= 1, "n_views", ">= 1");
    require(ncl_refresh_stride >= 1, "ncl_refresh_stride", ">= 1");
    require(steps_per_sample >= 1, "steps_per_sample", ">= 1");
    require(lr >= 0.0 && std::isfinite(lr), "lr", ">= 0");
    require(beta1 >= 0.0 && beta1 < 1.0, "beta1", "in [0, 1)");
    require(beta2 >= 0.0 && beta2 < 1.0, "beta2", "in [0, 1)");
    require(eps_opt > 0.0 && std::isfinite(eps_opt), "eps_opt", "> 0");
    require(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay", ">= 0");
}

double HyperParams::resolved_entropy_gate(std::size_t num_classes) const {
    return entropy_gate.value_or(0.4 * std::log(static_cast<double>(num_classes)));
}

CacheParams HyperParams::cache_params(std::size_t num_classes) const {
    CacheParams p;
    p.epsilon = epsilon;
    p.smoothness = smoothness;
    p.gamma = gamma;
    p.base_capacity = base_capacity;
    p.max_capacity = max_capacity;
    p.inactivity_threshold = inactivity_threshold;
    p.boost_scale = boost_scale;
    p.boost_decay = boost_decay;
    p.entropy_gate = resolved_entropy_gate(num_classes);
    p.frequency_mode = frequency_mode;
    return p;
}

ObjectiveParams HyperParams::objective_params() const {
    ObjectiveParams p;
    p.tau = tau;
    p.lambda1 = lambda1;
    p.lambda2 = lambda2;
    p.alpha_fuse = alpha_fuse;
    p.beta_fuse = beta_fuse;
    p.rho = rho;
    p.entropy_threshold = entropy_threshold;
    p.aug_prediction = aug_prediction;
    return p;
}

AdamWParams HyperParams::optimizer_params() const { return {lr, beta1, beta2, eps_opt, weight_decay}; }

Session::Session(HyperParams hp, PrototypeMatrix initial_textual)
    : hp_(std::move(hp)),
      textual_(TextualPrototypeSet::from_initial(std::move(initial_textual))),
      cache_(textual_.protos.rows(), textual_.protos.dim(), hp_.cache_params(textual_.protos.rows())),
      negatives_(textual_.protos.rows()) {
    hp_.validate();
    if (num_classes() < 1 || dim() < 1) {
        throw Error(ErrorKind::ShapeMismatch, "initial prototypes must have at least one class and dimension");
    }
}

std::span<const Embedding> Session::consumed_views(const StreamRecord& record) const {
    if (record.views.empty()) {
        throw Error(ErrorKind::NoViews, "sample " + std::to_string(record.sample_id) + " has no views");
    }
    const auto want = static_cast<std::size_t>(hp_.n_views);
    if (record.views.size() < want) {
        throw Error(ErrorKind::ViewCountMismatch, "sample " + std::to_string(record.sample_id) + " has " +
                                                      std::to_string(record.views.size()) + " views, n_views is " +
                                                      std::to_string(want));
    }
    for (const auto& v : record.views) {
        if (v.dim() != dim()) {
            throw Error(ErrorKind::DimensionMismatch, "sample " + std::to_string(record.sample_id) +
                                                          " has dimension " + std::to_string(v.dim()) +
                                                          ", prototypes have " + std::to_string(dim()));
        }
    }
    return std::span<const Embedding>(record.views).first(want);
}

AggregatedPrediction Session::aggregate_views(std::span<const Embedding> views) const {
    if (views.empty()) throw Error(ErrorKind::NoViews, "sample has no views");
    const auto visual = cache_.visual_prototypes();
    std::vector<Vector> probs;
    probs.reserve(views.size());
    for (const auto& v : views) {
        probs.push_back(fused_probability(v, textual_.protos, visual, hp_.alpha_fuse, hp_.beta_fuse, hp_.tau));
    }
    AggregatedPrediction out;
    out.selection = select_confident_views(probs, hp_.rho, hp_.entropy_threshold);
    out.probabilities = average_selected(probs, out.selection);
    out.entropy = entropy(out.probabilities);
    return out;
}

std::optional<Embedding> Session::synthesize_rejuvenation_feature(ClassId c) const {
    const auto visual = cache_.visual_prototypes();
    const auto t_c = textual_.protos.row(c);
    std::optional<ClassId> nearest;
    double best = -INFINITY;
    for (ClassId j = 0; j < visual.size(); ++j) {
        if (j == c || !visual[j]) continue;
        const double s = dot(t_c, visual[j]->values());
        if (s > best) {
            best = s;
            nearest = j;
        }
    }
    if (!nearest) return std::nullopt;
    Vector blend(t_c.begin(), t_c.end());
    const auto v = visual[*nearest]->values();
    for (std::size_t i = 0; i < blend.size(); ++i) blend[i] += v[i];
    return normalize(blend);
}

PredictionReport Session::process_sample(const StreamRecord& record) {
    const auto views = consumed_views(record);
    if (record.true_label && *record.true_label >= num_classes()) {
        throw Error(ErrorKind::UnknownClass, "sample " + std::to_string(record.sample_id) + " has label " +
                                                 std::to_string(*record.true_label));
    }

    PredictionReport report;
    report.sample_id = record.sample_id;
    report.true_label = record.true_label;

    const auto prediction = aggregate_views(views);
    report.probabilities = prediction.probabilities;
    report.sample_entropy = prediction.entropy;
    report.pseudo_label = argmax(prediction.probabilities);

    const auto visual = cache_.visual_prototypes();
    if (step_ % hp_.ncl_refresh_stride == 0) {
        try {
            negatives_ = mine_hard_negatives(visual, textual_.protos, step_);
            report.negatives_refreshed = true;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::InsufficientClasses) throw;
        }
    }

    const Objective objective(views, visual, negatives_, hp_.objective_params());
    const auto opt = hp_.optimizer_params();
    PrototypeMatrix grad;
    for (int s = 0; s < hp_.steps_per_sample; ++s) {
        const auto selection = objective.select(textual_.protos);
        const auto loss = objective.grad_textual(textual_.protos, selection, grad);
        if (s == 0) report.loss = loss;
        optimizer_step(textual_, grad, opt);
    }

    report.admit_outcome = cache_.admit(views.front(), report.pseudo_label, report.sample_entropy, step_);

    if (hp_.rejuvenation_synthesis) {
        const double sentinel = cache_.params().entropy_gate;
        for (ClassId c = 0; c < num_classes(); ++c) {
            const auto& cls = cache_.at(c);
            if (!is_inactive(step_, cls.last_update_step, hp_.inactivity_threshold, cls.activation_count)) continue;
            if (auto feature = synthesize_rejuvenation_feature(c)) {
                cache_.insert_synthetic(*feature, c, std::isfinite(sentinel) ? sentinel : 0.0, step_);
            }
        }
    }

    ++step_;
    return report;
}

std::vector<ClassSnapshot> snapshot_cache(const ClassAwareCache& cache, Step t) {
    std::vector<ClassSnapshot> out;
    out.reserve(cache.num_classes());
    for (ClassId c = 0; c < cache.num_classes(); ++c) {
        const auto& cls = cache.at(c);
        ClassSnapshot snap;
        snap.class_id = c;
        snap.activation_count = cls.activation_count;
        snap.last_update_step = cls.last_update_step;
        snap.capacity = cache.total_capacity(c, t);
        for (const auto& e : cls.entries) snap.admission_entropies.push_back(e.admission_entropy);
        snap.inactive =
            is_inactive(t, cls.last_update_step, cache.params().inactivity_threshold, cls.activation_count);
        out.push_back(std::move(snap));
    }
    return out;
}

std::vector<NegativeDiagnostic> diagnose_negatives(const Session& session) {
    const auto visual = session.cache().visual_prototypes();
    const auto& textual = session.textual().protos;
    std::vector<NegativeDiagnostic> out;
    for (ClassId c : ncl_active_classes(visual, session.negatives())) {
        NegativeDiagnostic d;
        d.pair = *session.negatives()[c];
        const auto v_c = visual[c]->values();
        const auto v_neg = visual[d.pair.visual_neg]->values();
        d.cos_positive = dot(v_c, textual.row(c));
        d.cos_textual_neg = dot(v_c, textual.row(d.pair.textual_neg));
        d.cos_visual_neg = dot(v_neg, textual.row(c));
        d.loss = ncl_loss_class(v_c, textual.row(c), v_neg, textual.row(d.pair.textual_neg), session.hyper().tau);
        out.push_back(d);
    }
    return out;
}

std::vector<ClassId> bottom_quintile(const std::vector<std::int64_t>& support) {
    std::vector<ClassId> order(support.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](ClassId a, ClassId b) { return support[a] < support[b]; });
    const std::size_t n = std::max<std::size_t>(1, support.size() / 5);
    order.resize(std::min(n, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

SessionReport run_session(const std::vector<StreamRecord>& stream, const HyperParams& hp,
                          const PrototypeMatrix& initial_textual, const RunOptions& options) {
    Session session(hp, initial_textual);
    const std::size_t C = session.num_classes();

    SessionReport report;
    report.samples.reserve(stream.size());
    auto& summary = report.summary;
    summary.support.assign(C, 0);
    std::vector<std::int64_t> correct(C, 0);

    auto capture = [&](Step t) {
        CapacitySnapshot snap;
        snap.step = t;
        for (ClassId c = 0; c < C; ++c) {
            snap.totals.push_back(session.cache().total_capacity(c, t).total);
            snap.sizes.push_back(static_cast<int>(session.cache().at(c).entries.size()));
        }
        report.trajectory.push_back(std::move(snap));
    };

    for (const auto& record : stream) {
        if (options.trajectory_stride > 0 && session.step() % options.trajectory_stride == 0) capture(session.step());
        auto r = session.process_sample(record);
        if (r.true_label) {
            ++summary.n_labeled;
            ++summary.support[*r.true_label];
            if (r.pseudo_label == *r.true_label) ++correct[*r.true_label];
        }
        report.samples.push_back(std::move(r));
    }
    const Step end = session.step();
    if (options.trajectory_stride > 0) capture(end);

    summary.n_samples = static_cast<std::int64_t>(stream.size());
    const auto total_correct = std::accumulate(correct.begin(), correct.end(), std::int64_t{0});
    summary.accuracy =
        summary.n_labeled > 0 ? static_cast<double>(total_correct) / static_cast<double>(summary.n_labeled) : 0.0;
    summary.per_class_accuracy.resize(C);
    for (ClassId c = 0; c < C; ++c) {
        if (summary.support[c] > 0) {
            summary.per_class_accuracy[c] =
                static_cast<double>(correct[c]) / static_cast<double>(summary.support[c]);
        }
    }

    report.final_cache = snapshot_cache(session.cache(), end);
    report.final_negatives = diagnose_negatives(session);
    for (const auto& snap : report.final_cache) {
        if (snap.inactive) ++summary.dead_classes;
        if (snap.activation_count == 0) ++summary.never_activated;
    }

    if (summary.n_labeled > 0) {
        summary.tail_classes = bottom_quintile(summary.support);
        double acc_sum = 0.0;
        int acc_n = 0;
        int retained = 0;
        for (ClassId c : summary.tail_classes) {
            if (summary.per_class_accuracy[c]) {
                acc_sum += *summary.per_class_accuracy[c];
                ++acc_n;
            }
            if (!report.final_cache[c].admission_entropies.empty()) ++retained;
        }
        summary.tail_accuracy = acc_n > 0 ? acc_sum / acc_n : 0.0;
        summary.tail_retention =
            static_cast<double>(retained) / static_cast<double>(summary.tail_classes.size());
    }
    return report;
}

}  // namespace tailtta
