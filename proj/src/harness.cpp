#include "tailtta/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "tailtta/digest.hpp"
#include "tailtta/error.hpp"

namespace tailtta {

Vector zipf_masses(std::size_t num_classes, double exponent) {
    Vector w(num_classes);
    for (std::size_t r = 0; r < num_classes; ++r) w[r] = std::pow(static_cast<double>(r + 1), -exponent);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= total;
    return w;
}

namespace {

Vector gaussian(std::mt19937_64& rng, std::size_t dim, double sigma) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vector v(dim);
    for (double& x : v) x = sigma * n(rng);
    return v;
}

Embedding perturb(std::mt19937_64& rng, std::span<const double> base, double sigma) {
    Vector v = gaussian(rng, base.size(), sigma);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += base[i];
    return normalize(v);
}

}  // namespace

SyntheticStream generate_stream(const SyntheticSpec& spec) {
    if (spec.num_classes < 2 || spec.dim < 2) {
        throw Error(ErrorKind::RangeViolation, "synthetic spec needs C >= 2 and d >= 2");
    }
    if (spec.n_views < 1) throw Error(ErrorKind::RangeViolation, "n_views must be >= 1");
    std::mt19937_64 rng(spec.seed);
    SyntheticStream out;

    const double max_cos = std::cos(spec.min_angle_deg * std::numbers::pi / 180.0);
    constexpr int kMaxAttempts = 10000;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            Embedding candidate = normalize(gaussian(rng, spec.dim, 1.0));
            placed = std::all_of(out.class_means.begin(), out.class_means.end(),
                                 [&](const Embedding& m) { return cosine(candidate, m) <= max_cos; });
            if (placed) out.class_means.push_back(std::move(candidate));
        }
        if (!placed) {
            throw Error(ErrorKind::RejectionFailure, "could not place class " + std::to_string(c) + " at >= " +
                                                         std::to_string(spec.min_angle_deg) + " degrees in d=" +
                                                         std::to_string(spec.dim));
        }
    }

    // Zipf ranks are assigned to classes by a seeded permutation.
    std::vector<std::size_t> rank_of(spec.num_classes);
    std::iota(rank_of.begin(), rank_of.end(), 0);
    std::shuffle(rank_of.begin(), rank_of.end(), rng);
    const Vector masses = zipf_masses(spec.num_classes, spec.zipf_exponent);
    out.class_probabilities.resize(spec.num_classes);
    for (std::size_t c = 0; c < spec.num_classes; ++c) out.class_probabilities[c] = masses[rank_of[c]];
    Vector cdf(spec.num_classes);
    std::partial_sum(out.class_probabilities.begin(), out.class_probabilities.end(), cdf.begin());

    out.textual = PrototypeMatrix(spec.num_classes, spec.dim);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        const Embedding t = perturb(rng, out.class_means[c].values(), spec.textual_offset_noise);
        std::copy(t.values().begin(), t.values().end(), out.textual.row(c).begin());
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    out.records.reserve(spec.n_samples);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        const double u = unit(rng) * cdf.back();
        const auto label = static_cast<ClassId>(
            std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                     static_cast<std::ptrdiff_t>(spec.num_classes) - 1));
        StreamRecord rec;
        rec.sample_id = static_cast<std::int64_t>(i);
        rec.true_label = label;
        Embedding sample = perturb(rng, out.class_means[label].values(), spec.intra_class_noise);
        rec.views.push_back(sample);
        for (int n = 1; n < spec.n_views; ++n) rec.views.push_back(perturb(rng, sample.values(), spec.view_jitter));
        out.records.push_back(std::move(rec));
    }
    return out;
}

std::string stream_digest(const SyntheticStream& stream) {
    std::string bytes;
    auto put = [&](const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); };
    for (const auto& r : stream.records) {
        put(&r.sample_id, sizeof r.sample_id);
        const std::int64_t label = r.true_label ? static_cast<std::int64_t>(*r.true_label) : -1;
        put(&label, sizeof label);
        for (const auto& v : r.views) put(v.values().data(), v.dim() * sizeof(double));
    }
    put(stream.textual.flat().data(), stream.textual.flat().size() * sizeof(double));
    return sha256_hex(bytes);
}

HyperParams synthetic_base_params() {
    HyperParams hp;
    hp.tau = 0.1;
    hp.alpha_fuse = 3.0;
    return hp;
}

std::vector<AblationConfig> default_grid(const HyperParams& base) {
    auto capc_off = [](HyperParams hp) {
        hp.gamma = 0.0;
        hp.boost_scale = 0.0;
        return hp;
    };
    auto ncl_off = [](HyperParams hp) {
        hp.lambda2 = 0.0;
        return hp;
    };
    return {
        {"full", base},
        {"capc_only", ncl_off(base)},
        {"ncl_only", capc_off(base)},
        {"baseline", capc_off(ncl_off(base))},
    };
}

const ConfigResult& AblationReport::config(const std::string& name) const {
    for (const auto& c : configs) {
        if (c.name == name) return c;
    }
    throw Error(ErrorKind::UnknownKey, "ablation report has no config '" + name + "'");
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stdev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

AblationReport run_ablation(const SyntheticSpec& spec, const std::vector<AblationConfig>& grid, int n_seeds,
                            int threads) {
    if (n_seeds < 1) throw Error(ErrorKind::RangeViolation, "n_seeds must be >= 1");
    AblationReport report;
    report.spec = spec;

    std::vector<SyntheticStream> streams;
    for (int i = 0; i < n_seeds; ++i) {
        SyntheticSpec s = spec;
        s.seed = spec.seed + static_cast<std::uint64_t>(i);
        report.seeds.push_back(s.seed);
        streams.push_back(generate_stream(s));
        report.stream_digests.push_back(stream_digest(streams.back()));
    }

    const std::size_t jobs = grid.size() * streams.size();
    std::vector<SessionSummary> results(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs; j = next++) {
            const std::size_t cfg = j / streams.size();
            const std::size_t seed = j % streams.size();
            HyperParams hp = grid[cfg].hp;
            hp.seed = report.seeds[seed];
            RunOptions options;
            options.trajectory_stride = 0;
            results[j] = run_session(streams[seed].records, hp, streams[seed].textual, options).summary;
        }
    };
    const auto n_threads = static_cast<std::size_t>(std::max(1, threads));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(n_threads, jobs); ++t) pool.emplace_back(worker);
    }

    for (std::size_t cfg = 0; cfg < grid.size(); ++cfg) {
        ConfigResult r;
        r.name = grid[cfg].name;
        for (std::size_t seed = 0; seed < streams.size(); ++seed) {
            const auto& s = results[cfg * streams.size() + seed];
            r.accuracy.push_back(s.accuracy);
            r.tail_accuracy.push_back(s.tail_accuracy);
            r.tail_retention.push_back(s.tail_retention);
            r.dead_classes.push_back(s.dead_classes);
        }
        report.configs.push_back(std::move(r));
    }
    return report;
}

double tail_retention(const SessionReport& report) {
    const auto& tail = report.summary.tail_classes;
    if (tail.empty()) return 0.0;
    std::size_t retained = 0;
    for (ClassId c : tail) {
        if (!report.final_cache.at(c).admission_entropies.empty()) ++retained;
    }
    return static_cast<double>(retained) / static_cast<double>(tail.size());
}

}  // namespace tailtta
