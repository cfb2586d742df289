#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tailtta/engine.hpp"

namespace tailtta {

/// Long-tailed synthetic embedding stream. Noise terms are per-coordinate
/// standard deviations of isotropic Gaussians added before normalization.
struct SyntheticSpec {
    std::size_t num_classes = 20;
    std::size_t dim = 32;
    double zipf_exponent = 1.5;
    double intra_class_noise = 0.35;
    double view_jitter = 0.05;
    std::size_t n_samples = 2000;
    double textual_offset_noise = 0.25;
    int n_views = 4;
    double min_angle_deg = 25.0;
    std::uint64_t seed = 0;
};

struct SyntheticStream {
    std::vector<StreamRecord> records;
    PrototypeMatrix textual;            // imperfect zero-shot prototypes
    std::vector<Embedding> class_means;
    Vector class_probabilities;         // Zipf target per class
};

/// Normalized Zipf mass over ranks 1..C.
Vector zipf_masses(std::size_t num_classes, double exponent);

/// Pure function of `spec`. Throws RejectionFailure when the minimum angle
/// between class means cannot be met.
SyntheticStream generate_stream(const SyntheticSpec& spec);

/// SHA-256 over the exact binary values of records and prototypes.
std::string stream_digest(const SyntheticStream& stream);

struct AblationConfig {
    std::string name;
    HyperParams hp;
};

/// Starting hyperparameters for ablations on the synthetic stream. The
/// library default tau of 0.01 saturates the softmax at this noise level, so
/// the harness uses tau = 0.1 and a stronger cache term.
HyperParams synthetic_base_params();

/// full, capc_only (no hard negatives), ncl_only (fixed capacity, no
/// boost), baseline (neither).
std::vector<AblationConfig> default_grid(const HyperParams& base);

struct ConfigResult {
    std::string name;
    std::vector<double> accuracy;
    std::vector<double> tail_accuracy;
    std::vector<double> tail_retention;
    std::vector<int> dead_classes;
};

struct AblationReport {
    SyntheticSpec spec;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> stream_digests;
    std::vector<ConfigResult> configs;

    const ConfigResult& config(const std::string& name) const;
};

double mean(const std::vector<double>& xs);
/// Sample standard deviation; 0 for fewer than two values.
double stdev(const std::vector<double>& xs);

/// Seeds spec.seed, spec.seed + 1, ...; every config sees the same stream
/// for a given seed. Sessions run on up to `threads` workers.
AblationReport run_ablation(const SyntheticSpec& spec, const std::vector<AblationConfig>& grid, int n_seeds,
                            int threads = 1);

/// Fraction of tail classes holding at least one cache entry at stream end.
double tail_retention(const SessionReport& report);

}  // namespace tailtta
