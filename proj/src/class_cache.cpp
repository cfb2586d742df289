#include "tailtta/class_cache.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tailtta/error.hpp"

namespace tailtta {

const char* to_string(AdmitOutcome outcome) noexcept {
    switch (outcome) {
        case AdmitOutcome::Inserted: return "Inserted";
        case AdmitOutcome::ReplacedWorst: return "ReplacedWorst";
        case AdmitOutcome::RejectedGate: return "RejectedGate";
        case AdmitOutcome::RejectedFull: return "RejectedFull";
    }
    return "Unknown";
}

const char* to_string(FrequencyMode mode) noexcept {
    return mode == FrequencyMode::Cumulative ? "cumulative" : "occupancy";
}

Vector activation_frequency(std::span<const std::int64_t> counts) {
    Vector p(counts.size(), 0.0);
    if (counts.empty()) return p;
    std::int64_t total = 0;
    for (auto n : counts) total += n;
    if (total == 0) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(counts.size()));
        return p;
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    }
    return p;
}

double suppression(double p_c, double epsilon, double smoothness) {
    return std::tanh(-std::log(p_c + epsilon) / smoothness);
}

int base_capacity(double p_c, int base, double gamma, int max_capacity, double epsilon, double smoothness) {
    const double phi = suppression(p_c, epsilon, smoothness);
    const double scaled = std::ceil(static_cast<double>(base) * (1.0 + gamma * phi));
    const int lifted = std::max(1, static_cast<int>(scaled));
    return std::min(max_capacity, lifted);
}

bool is_inactive(Step t, std::optional<Step> last_update, Step eta, std::int64_t activation_count) {
    if (!last_update) return activation_count > 0 && t > eta;
    return t - *last_update > eta;
}

int rejuvenation_boost(double p_c, Step t, std::optional<Step> last_update, double delta, double decay, Step eta) {
    const Step elapsed = t - last_update.value_or(0);
    if (elapsed <= eta) {
        throw Error(ErrorKind::NotInactive,
                    "boost requested with t - t_c = " + std::to_string(elapsed) + " <= eta = " + std::to_string(eta));
    }
    const double raw = delta * std::exp(-decay * p_c) * static_cast<double>(elapsed) / static_cast<double>(eta);
    return static_cast<int>(std::ceil(raw));
}

double affinity(double similarity, double alpha, double beta) {
    return alpha * std::exp(-beta * (1.0 - similarity));
}

ClassAwareCache::ClassAwareCache(std::size_t num_classes, std::size_t dim, CacheParams params)
    : dim_(dim), params_(params), classes_(num_classes) {
    for (std::size_t c = 0; c < num_classes; ++c) classes_[c].class_id = c;
}

const ClassCache& ClassAwareCache::at(ClassId c) const {
    if (c >= classes_.size()) {
        throw Error(ErrorKind::UnknownClass, "class " + std::to_string(c) + " not in [0, " +
                                                 std::to_string(classes_.size()) + ")");
    }
    return classes_[c];
}

ClassCache& ClassAwareCache::mutable_at(ClassId c) {
    return const_cast<ClassCache&>(std::as_const(*this).at(c));
}

void ClassAwareCache::check_dim(const Embedding& e) const {
    if (e.dim() != dim_) {
        throw Error(ErrorKind::DimensionMismatch,
                    "embedding has dimension " + std::to_string(e.dim()) + ", cache expects " + std::to_string(dim_));
    }
}

Vector ClassAwareCache::frequencies() const {
    std::vector<std::int64_t> counts(classes_.size());
    for (std::size_t c = 0; c < classes_.size(); ++c) {
        counts[c] = params_.frequency_mode == FrequencyMode::Cumulative
                        ? classes_[c].activation_count
                        : static_cast<std::int64_t>(classes_[c].entries.size());
    }
    return activation_frequency(counts);
}

CapacityDecision ClassAwareCache::total_capacity(ClassId c, Step t) const {
    const ClassCache& cls = at(c);
    CapacityDecision d;
    d.p_c = frequencies()[c];
    d.phi = suppression(d.p_c, params_.epsilon, params_.smoothness);
    d.base = base_capacity(d.p_c, params_.base_capacity, params_.gamma, params_.max_capacity, params_.epsilon,
                           params_.smoothness);
    if (is_inactive(t, cls.last_update_step, params_.inactivity_threshold, cls.activation_count)) {
        d.boost = rejuvenation_boost(d.p_c, t, cls.last_update_step, params_.boost_scale, params_.boost_decay,
                                     params_.inactivity_threshold);
    }
    d.total = d.base + d.boost;
    return d;
}

namespace {

// Highest admission entropy; ties go to the oldest entry.
std::size_t worst_entry(const std::vector<CacheEntry>& entries) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].admission_entropy > entries[worst].admission_entropy) worst = i;
    }
    return worst;
}

}  // namespace

std::size_t ClassAwareCache::shrink_to_capacity(ClassId c, Step t) {
    const auto capacity = static_cast<std::size_t>(total_capacity(c, t).total);
    auto& entries = mutable_at(c).entries;
    std::size_t evicted = 0;
    while (entries.size() > capacity) {
        entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(worst_entry(entries)));
        ++evicted;
    }
    return evicted;
}

AdmitOutcome ClassAwareCache::admit(const Embedding& f_v, ClassId pseudo_label, double sample_entropy, Step step) {
    check_dim(f_v);
    ClassCache& cls = mutable_at(pseudo_label);
    ++cls.activation_count;
    shrink_to_capacity(pseudo_label, step);
    if (params_.frequency_mode == FrequencyMode::Occupancy) {
        // Occupancy frequencies move every class's base capacity.
        for (ClassId c = 0; c < classes_.size(); ++c) shrink_to_capacity(c, step);
    }

    if (!(sample_entropy <= params_.entropy_gate)) return AdmitOutcome::RejectedGate;

    const auto capacity = static_cast<std::size_t>(total_capacity(pseudo_label, step).total);
    if (cls.entries.size() < capacity) {
        cls.entries.push_back({f_v, sample_entropy, step});
        cls.last_update_step = step;
        return AdmitOutcome::Inserted;
    }
    const std::size_t worst = worst_entry(cls.entries);
    if (sample_entropy < cls.entries[worst].admission_entropy) {
        cls.entries.erase(cls.entries.begin() + static_cast<std::ptrdiff_t>(worst));
        cls.entries.push_back({f_v, sample_entropy, step});
        cls.last_update_step = step;
        return AdmitOutcome::ReplacedWorst;
    }
    return AdmitOutcome::RejectedFull;
}

bool ClassAwareCache::insert_synthetic(const Embedding& feature, ClassId c, double sentinel_entropy, Step step) {
    check_dim(feature);
    ClassCache& cls = mutable_at(c);
    if (cls.entries.size() >= static_cast<std::size_t>(total_capacity(c, step).total)) return false;
    cls.entries.push_back({feature, sentinel_entropy, step});
    return true;
}

std::optional<Embedding> ClassAwareCache::visual_prototype(ClassId c) const {
    const auto& entries = at(c).entries;
    if (entries.empty()) return std::nullopt;
    Vector mean(dim_, 0.0);
    for (const auto& e : entries) {
        for (std::size_t i = 0; i < dim_; ++i) mean[i] += e.embedding[i];
    }
    for (double& x : mean) x /= static_cast<double>(entries.size());
    return normalize(mean);
}

std::vector<std::optional<Embedding>> ClassAwareCache::visual_prototypes() const {
    std::vector<std::optional<Embedding>> out;
    out.reserve(classes_.size());
    for (ClassId c = 0; c < classes_.size(); ++c) out.push_back(visual_prototype(c));
    return out;
}

double ClassAwareCache::cache_score(const Embedding& f_v, ClassId c, double alpha, double beta) const {
    const auto proto = visual_prototype(c);
    if (!proto) return 0.0;
    return affinity(cosine(f_v, *proto), alpha, beta);
}

}  // namespace tailtta
