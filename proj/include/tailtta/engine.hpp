#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailtta/class_cache.hpp"
#include "tailtta/negatives.hpp"
#include "tailtta/numerics.hpp"
#include "tailtta/objective.hpp"

namespace tailtta {

/// Every scalar knob of the adaptation loop. Defaults are the documented
/// configuration; `validate` enforces the ranges before any streaming.
struct HyperParams {
    // class-aware capacity
    double epsilon = 1e-8;
    double smoothness = 1.0;
    double gamma = 1.0;
    int base_capacity = 3;
    int max_capacity = 10;
    std::int64_t inactivity_threshold = 100;
    double boost_scale = 3.0;
    double boost_decay = 2.0;
    FrequencyMode frequency_mode = FrequencyMode::Cumulative;

    // prediction and losses
    double tau = 0.01;
    double lambda1 = 1.0;
    double lambda2 = 0.5;
    double alpha_fuse = 1.0;
    double beta_fuse = 5.0;
    std::optional<double> entropy_gate;  // empty: 0.4 ln C
    double rho = 0.1;
    double entropy_threshold = INFINITY;
    int n_views = 4;
    AugPrediction aug_prediction = AugPrediction::Fused;

    // adaptation schedule and optimizer
    int ncl_refresh_stride = 5;
    int steps_per_sample = 1;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_opt = 1e-8;
    double weight_decay = 0.0;

    bool rejuvenation_synthesis = false;
    std::uint64_t seed = 0;

    /// Throws RangeViolation naming the first offending key.
    void validate() const;

    double resolved_entropy_gate(std::size_t num_classes) const;
    CacheParams cache_params(std::size_t num_classes) const;
    ObjectiveParams objective_params() const;
    AdamWParams optimizer_params() const;
};

struct StreamRecord {
    std::int64_t sample_id = 0;
    std::vector<Embedding> views;         // views[0] is the canonical embedding
    std::optional<ClassId> true_label;
};

struct AggregatedPrediction {
    Vector probabilities;
    double entropy = 0.0;
    ViewSelection selection;
};

struct PredictionReport {
    std::int64_t sample_id = 0;
    Vector probabilities;
    ClassId pseudo_label = 0;
    double sample_entropy = 0.0;
    AdmitOutcome admit_outcome = AdmitOutcome::RejectedGate;
    std::optional<ClassId> true_label;
    LossBreakdown loss;
    bool negatives_refreshed = false;
};

/// One adaptation session: textual prototypes under AdamW, the class-aware
/// cache, and the current hard-negative pairs. Strictly sequential.
class Session {
public:
    Session(HyperParams hp, PrototypeMatrix initial_textual);

    /// Predict, refresh negatives on schedule, take the optimizer step(s),
    /// then admit the canonical view. The report holds the prediction made
    /// before any of this sample's updates.
    PredictionReport process_sample(const StreamRecord& record);

    /// Confident-view fused prediction at the current state.
    AggregatedPrediction aggregate_views(std::span<const Embedding> views) const;

    /// normalize(t_c + v_j) for the class j != c whose visual prototype is
    /// closest to t_c. Empty when no other class has a visual prototype.
    std::optional<Embedding> synthesize_rejuvenation_feature(ClassId c) const;

    const HyperParams& hyper() const noexcept { return hp_; }
    const TextualPrototypeSet& textual() const noexcept { return textual_; }
    const ClassAwareCache& cache() const noexcept { return cache_; }
    const NegativeMap& negatives() const noexcept { return negatives_; }
    Step step() const noexcept { return step_; }
    std::size_t num_classes() const noexcept { return textual_.protos.rows(); }
    std::size_t dim() const noexcept { return textual_.protos.dim(); }

private:
    std::span<const Embedding> consumed_views(const StreamRecord& record) const;

    HyperParams hp_;
    TextualPrototypeSet textual_;
    ClassAwareCache cache_;
    NegativeMap negatives_;
    Step step_ = 0;
};

struct ClassSnapshot {
    ClassId class_id = 0;
    std::int64_t activation_count = 0;
    std::optional<Step> last_update_step;
    CapacityDecision capacity;
    std::vector<double> admission_entropies;
    bool inactive = false;
};

struct CapacitySnapshot {
    Step step = 0;
    std::vector<int> totals;
    std::vector<int> sizes;
};

struct SessionSummary {
    std::int64_t n_samples = 0;
    std::int64_t n_labeled = 0;
    double accuracy = 0.0;
    std::vector<std::int64_t> support;          // true-label counts per class
    std::vector<std::optional<double>> per_class_accuracy;
    std::vector<ClassId> tail_classes;          // bottom frequency quintile
    double tail_accuracy = 0.0;
    double tail_retention = 0.0;
    int dead_classes = 0;                       // inactive at stream end
    int never_activated = 0;
};

struct NegativeDiagnostic {
    HardNegativePair pair;
    double cos_positive = 0.0;       // cos(v_c, t_c)
    double cos_textual_neg = 0.0;    // cos(v_c, t_neg)
    double cos_visual_neg = 0.0;     // cos(v_neg, t_c)
    double loss = 0.0;
};

struct SessionReport {
    std::vector<PredictionReport> samples;
    SessionSummary summary;
    std::vector<CapacitySnapshot> trajectory;
    std::vector<ClassSnapshot> final_cache;
    std::vector<NegativeDiagnostic> final_negatives;
};

struct RunOptions {
    int trajectory_stride = 100;
};

std::vector<ClassSnapshot> snapshot_cache(const ClassAwareCache& cache, Step t);
std::vector<NegativeDiagnostic> diagnose_negatives(const Session& session);

/// Bottom quintile of classes by support (at least one class); ties go to
/// the lower class index.
std::vector<ClassId> bottom_quintile(const std::vector<std::int64_t>& support);

/// Sequential fold of process_sample plus summary metrics.
SessionReport run_session(const std::vector<StreamRecord>& stream, const HyperParams& hp,
                          const PrototypeMatrix& initial_textual, const RunOptions& options = {});

}  // namespace tailtta
