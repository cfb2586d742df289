#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tailtta/numerics.hpp"

namespace tailtta {

using Step = std::int64_t;

enum class FrequencyMode { Cumulative, Occupancy };

enum class AdmitOutcome { Inserted, ReplacedWorst, RejectedGate, RejectedFull };

const char* to_string(AdmitOutcome outcome) noexcept;
const char* to_string(FrequencyMode mode) noexcept;

struct CacheEntry {
    Embedding embedding;
    double admission_entropy = 0.0;
    Step admission_step = 0;
};

struct ClassCache {
    ClassId class_id = 0;
    std::vector<CacheEntry> entries;
    std::int64_t activation_count = 0;        // N_c: cumulative pseudo-label assignments
    std::optional<Step> last_update_step;     // t_c; empty means never admitted
};

struct CapacityDecision {
    int base = 1;
    int boost = 0;
    int total = 1;
    double p_c = 0.0;
    double phi = 0.0;
};

/// Knobs of the capacity law and the admission gate.
struct CacheParams {
    double epsilon = 1e-8;          // guards log(p_c)
    double smoothness = 1.0;        // s
    double gamma = 1.0;             // frequency sensitivity
    int base_capacity = 3;          // M
    int max_capacity = 10;          // M_max
    Step inactivity_threshold = 50; // eta
    double boost_scale = 3.0;       // delta
    double boost_decay = 2.0;       // frequency decay of the boost
    double entropy_gate = 1.0;      // nats; samples above are never stored
    FrequencyMode frequency_mode = FrequencyMode::Cumulative;
};

/// p_c = N_c / sum(N); uniform 1/C when every count is zero.
Vector activation_frequency(std::span<const std::int64_t> counts);

/// tanh(-ln(p_c + eps) / s).
double suppression(double p_c, double epsilon, double smoothness);

/// min(M_max, max(1, ceil(M (1 + gamma phi(p_c))))).
int base_capacity(double p_c, int base, double gamma, int max_capacity, double epsilon, double smoothness);

/// t - t_c > eta. A class without an admission counts from step 0, but only
/// once it has been pseudo-labeled at least once.
bool is_inactive(Step t, std::optional<Step> last_update, Step eta, std::int64_t activation_count);

/// ceil(delta e^{-alpha p_c} (t - t_c) / eta). Throws NotInactive unless t - t_c > eta.
int rejuvenation_boost(double p_c, Step t, std::optional<Step> last_update, double delta, double decay, Step eta);

/// Tip-Adapter affinity alpha * exp(-beta (1 - z)).
double affinity(double similarity, double alpha, double beta);

/// Per-class bounded stores of low-entropy test embeddings.
///
/// Capacity is recomputed from scratch whenever it is asked for: the base
/// term follows activation frequency and the boost follows time since the
/// class's last admission. Shrinking is lazy: `admit` first trims the target
/// class to its capacity at that step, then decides. Entries admitted under
/// a boost therefore stay until the class's next admission.
class ClassAwareCache {
public:
    ClassAwareCache(std::size_t num_classes, std::size_t dim, CacheParams params);

    std::size_t num_classes() const noexcept { return classes_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const CacheParams& params() const noexcept { return params_; }
    const ClassCache& at(ClassId c) const;

    /// Frequencies under the configured counting mode.
    Vector frequencies() const;

    CapacityDecision total_capacity(ClassId c, Step t) const;

    AdmitOutcome admit(const Embedding& f_v, ClassId pseudo_label, double sample_entropy, Step step);

    /// Evicts highest-entropy entries until the class fits its capacity at `t`.
    std::size_t shrink_to_capacity(ClassId c, Step t);

    /// Normalized mean of the cached embeddings; empty when nothing is cached.
    std::optional<Embedding> visual_prototype(ClassId c) const;
    std::vector<std::optional<Embedding>> visual_prototypes() const;

    /// affinity(cos(f_v, v_c)); 0 for an empty class.
    double cache_score(const Embedding& f_v, ClassId c, double alpha, double beta) const;

    /// Stores an entry without touching activation_count or t_c. Used for
    /// synthesized rejuvenation features; respects the current capacity.
    bool insert_synthetic(const Embedding& feature, ClassId c, double sentinel_entropy, Step step);

private:
    ClassCache& mutable_at(ClassId c);
    void check_dim(const Embedding& e) const;

    std::size_t dim_;
    CacheParams params_;
    std::vector<ClassCache> classes_;
};

}  // namespace tailtta
