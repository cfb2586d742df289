#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tailtta/error.hpp"
#include "tailtta/harness.hpp"

using namespace tailtta;
using doctest::Approx;

namespace {

Vector empirical(const SyntheticStream& s, std::size_t c) {
    Vector f(c, 0.0);
    for (const auto& r : s.records) f[*r.true_label] += 1.0;
    for (double& x : f) x /= static_cast<double>(s.records.size());
    return f;
}

double total_variation(const Vector& a, const Vector& b) {
    double tv = 0;
    for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
    return tv / 2;
}

}  // namespace

TEST_CASE("label frequencies follow the Zipf target") {
    for (double z : {0.0, 1.5}) {
        SyntheticSpec spec;
        spec.zipf_exponent = z;
        spec.n_samples = 10'000;
        spec.n_views = 1;
        const auto s = generate_stream(spec);
        CHECK(total_variation(empirical(s, 20), s.class_probabilities) < 0.05);
        if (z == 0.0) {
            // 4 binomial standard deviations at p = 1/20, n = 10k
            const double tol = 4 * std::sqrt(0.05 * 0.95 / 10'000);
            for (double f : empirical(s, 20)) CHECK(std::abs(f - 0.05) < tol);
        }
    }
}

TEST_CASE("bottom quintile mass under Zipf 1.5") {
    double head = 0, tail = 0;
    for (int r = 1; r <= 20; ++r) (r > 16 ? tail : head) += std::pow(r, -1.5);
    const double expected = tail / (head + tail);
    CHECK(expected < 0.05);
    const Vector m = zipf_masses(20, 1.5);
    CHECK(m[16] + m[17] + m[18] + m[19] == Approx(expected).epsilon(1e-12));
    double sum = 0;
    for (double x : m) sum += x;
    CHECK(sum == Approx(1.0));
}

TEST_CASE("generation is a pure function of its settings") {
    SyntheticSpec spec;
    spec.n_samples = 300;
    const auto a = generate_stream(spec), b = generate_stream(spec);
    CHECK(stream_digest(a) == stream_digest(b));
    CHECK(a.textual == b.textual);
    spec.seed = 1;
    CHECK(stream_digest(generate_stream(spec)) != stream_digest(a));
}

TEST_CASE("class means keep the minimum angle") {
    SyntheticSpec spec;
    spec.n_samples = 10;
    const auto s = generate_stream(spec);
    const double max_cos = std::cos(25.0 * std::numbers::pi / 180.0);
    for (std::size_t i = 0; i < 20; ++i) {
        for (std::size_t j = i + 1; j < 20; ++j) CHECK(cosine(s.class_means[i], s.class_means[j]) <= max_cos);
    }
    for (const auto& r : s.records) CHECK(r.views.size() == 4);
}

TEST_CASE("unsatisfiable angles are reported") {
    SyntheticSpec spec;
    spec.num_classes = 40;
    spec.dim = 2;
    try {
        generate_stream(spec);
        FAIL("expected RejectionFailure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RejectionFailure);
    }
}

TEST_CASE("ablation grid") {
    const auto grid = default_grid(HyperParams{});
    REQUIRE(grid.size() == 4);
    CHECK(grid[0].name == "full");
    CHECK(grid[1].name == "capc_only");
    CHECK(grid[1].hp.lambda2 == 0.0);
    CHECK(grid[1].hp.gamma == 1.0);
    CHECK(grid[2].name == "ncl_only");
    CHECK(grid[2].hp.gamma == 0.0);
    CHECK(grid[2].hp.boost_scale == 0.0);
    CHECK(grid[2].hp.lambda2 == 0.5);
    CHECK(grid[3].name == "baseline");
    CHECK(grid[3].hp.lambda2 == 0.0);
    CHECK(grid[3].hp.gamma == 0.0);
    CHECK(grid[3].hp.boost_scale == 0.0);
}

TEST_CASE("noiseless streams are classified perfectly by every config") {
    SyntheticSpec spec;
    spec.intra_class_noise = 0.0;
    spec.view_jitter = 0.0;
    spec.textual_offset_noise = 0.0;
    spec.n_samples = 400;
    const auto report = run_ablation(spec, default_grid(synthetic_base_params()), 2, 2);
    for (const auto& c : report.configs) {
        for (double a : c.accuracy) CHECK(a == 1.0);
    }
    // default library parameters too
    const auto defaults = run_ablation(spec, default_grid(HyperParams{}), 1, 1);
    for (const auto& c : defaults.configs) CHECK(c.accuracy[0] == 1.0);
}

TEST_CASE("ablation seeds are paired across configs") {
    SyntheticSpec spec;
    spec.n_samples = 200;
    spec.seed = 10;
    const auto one = run_ablation(spec, default_grid(synthetic_base_params()), 3, 1);
    const auto many = run_ablation(spec, default_grid(synthetic_base_params()), 3, 3);
    CHECK(one.seeds == std::vector<std::uint64_t>{10, 11, 12});
    for (int i = 0; i < 3; ++i) {
        SyntheticSpec s = spec;
        s.seed = 10 + i;
        CHECK(one.stream_digests[i] == stream_digest(generate_stream(s)));
    }
    for (std::size_t c = 0; c < 4; ++c) CHECK(one.configs[c].accuracy == many.configs[c].accuracy);
}

TEST_CASE("summary statistics") {
    CHECK(mean({1.0, 2.0, 6.0}) == 3.0);
    CHECK(stdev({1.0, 2.0, 6.0}) == Approx(std::sqrt(7.0)));
    CHECK(stdev({4.0}) == 0.0);
}
