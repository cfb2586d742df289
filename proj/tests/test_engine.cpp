#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tailtta/engine.hpp"
#include "tailtta/error.hpp"
#include "tailtta/harness.hpp"

using namespace tailtta;
using doctest::Approx;

namespace {

SyntheticStream small_stream(std::uint64_t seed, std::size_t n = 300) {
    SyntheticSpec spec;
    spec.num_classes = 6;
    spec.dim = 8;
    spec.n_samples = n;
    spec.seed = seed;
    return generate_stream(spec);
}

HyperParams small_hp() {
    HyperParams hp = synthetic_base_params();
    hp.inactivity_threshold = 30;
    return hp;
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("validate names the offending key") {
    HyperParams hp;
    hp.validate();
    hp.tau = -1.0;
    try {
        hp.validate();
        FAIL("expected RangeViolation");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RangeViolation);
        CHECK(std::string(e.what()).find("tau") != std::string::npos);
    }
    HyperParams rho;
    rho.rho = 0.0;
    CHECK(kind_of([&] { rho.validate(); }) == ErrorKind::RangeViolation);
    HyperParams stride;
    stride.ncl_refresh_stride = 0;
    CHECK(kind_of([&] { stride.validate(); }) == ErrorKind::RangeViolation);
}

TEST_CASE("entropy gate defaults to a fraction of ln C") {
    HyperParams hp;
    CHECK(hp.resolved_entropy_gate(20) == Approx(0.4 * std::log(20.0)));
    hp.entropy_gate = -INFINITY;
    CHECK(hp.resolved_entropy_gate(20) == -INFINITY);
}

TEST_CASE("reports carry the prediction made before the update") {
    const auto s = small_stream(1, 80);
    Session session(small_hp(), s.textual);
    for (const auto& rec : s.records) {
        const AggregatedPrediction before = session.aggregate_views(rec.views);
        const PredictionReport r = session.process_sample(rec);
        CHECK(r.probabilities == before.probabilities);
        CHECK(r.sample_entropy == before.entropy);
        CHECK(r.pseudo_label == argmax(before.probabilities));
    }
    CHECK(session.step() == 80);
    CHECK(session.textual().step_count == 80);
}

TEST_CASE("negatives refresh on the sample stride") {
    const auto s = small_stream(2, 120);
    HyperParams hp = small_hp();
    hp.ncl_refresh_stride = 7;
    Session session(hp, s.textual);
    bool mined_once = false;
    for (const auto& rec : s.records) {
        const Step t = session.step();
        const auto r = session.process_sample(rec);
        if (r.negatives_refreshed) {
            CHECK(t % 7 == 0);
            mined_once = true;
            for (const auto& p : session.negatives()) {
                if (p) CHECK(p->refreshed_at == t);
            }
        }
    }
    CHECK(mined_once);
}

TEST_CASE("input validation in process_sample") {
    const auto s = small_stream(3, 5);
    Session session(small_hp(), s.textual);
    StreamRecord few = s.records[0];
    few.views.resize(2);
    CHECK(kind_of([&] { session.process_sample(few); }) == ErrorKind::ViewCountMismatch);
    StreamRecord wide = s.records[0];
    wide.views[1] = normalize(Vector(9, 1.0));
    CHECK(kind_of([&] { session.process_sample(wide); }) == ErrorKind::DimensionMismatch);
    StreamRecord label = s.records[0];
    label.true_label = 6;
    CHECK(kind_of([&] { session.process_sample(label); }) == ErrorKind::UnknownClass);
}

TEST_CASE("extra views beyond n_views are ignored") {
    const auto s = small_stream(4, 60);
    HyperParams hp = small_hp();
    hp.n_views = 2;
    std::vector<StreamRecord> trimmed = s.records;
    for (auto& r : trimmed) r.views.resize(2);
    const auto a = run_session(s.records, hp, s.textual);
    const auto b = run_session(trimmed, hp, s.textual);
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].probabilities == b.samples[i].probabilities);
}

TEST_CASE("gate extremes") {
    const auto s = small_stream(5, 200);
    SUBCASE("closed gate never mutates the cache") {
        HyperParams hp = small_hp();
        hp.entropy_gate = -INFINITY;
        Session session(hp, s.textual);
        for (const auto& rec : s.records) CHECK(session.process_sample(rec).admit_outcome == AdmitOutcome::RejectedGate);
        for (ClassId c = 0; c < 6; ++c) CHECK(session.cache().at(c).entries.empty());
        CHECK_FALSE(session.textual().protos == s.textual);
    }
    SUBCASE("open gate never rejects at the gate") {
        HyperParams hp = small_hp();
        hp.entropy_gate = INFINITY;
        Session session(hp, s.textual);
        for (const auto& rec : s.records) CHECK(session.process_sample(rec).admit_outcome != AdmitOutcome::RejectedGate);
    }
}

TEST_CASE("sessions are deterministic and probabilities normalized") {
    const auto s = small_stream(6, 250);
    const auto a = run_session(s.records, small_hp(), s.textual);
    const auto b = run_session(s.records, small_hp(), s.textual);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].probabilities == b.samples[i].probabilities);
        double sum = 0;
        for (double p : a.samples[i].probabilities) sum += p;
        CHECK(sum == Approx(1.0).epsilon(1e-6));
    }
    CHECK(a.summary.accuracy == b.summary.accuracy);
}

TEST_CASE("bottom quintile by support") {
    const std::vector<std::int64_t> support{50, 3, 7, 3, 90, 1, 20, 20, 5, 8};
    CHECK(bottom_quintile(support) == std::vector<ClassId>{1, 5});
    CHECK(bottom_quintile({4, 4, 4}) == std::vector<ClassId>{0});
    std::vector<std::int64_t> twenty(20);
    for (std::size_t i = 0; i < 20; ++i) twenty[i] = static_cast<std::int64_t>(100 - i);
    CHECK(bottom_quintile(twenty) == std::vector<ClassId>{16, 17, 18, 19});
}

TEST_CASE("summary metrics") {
    const auto s = small_stream(7, 400);
    const auto report = run_session(s.records, small_hp(), s.textual, RunOptions{50});
    CHECK(report.summary.n_samples == 400);
    CHECK(report.summary.n_labeled == 400);
    std::int64_t correct = 0;
    for (const auto& r : report.samples) correct += (r.pseudo_label == *r.true_label);
    CHECK(report.summary.accuracy == Approx(correct / 400.0));
    CHECK(report.trajectory.size() == 9);
    CHECK(report.final_cache.size() == 6);
    int cached = 0;
    for (ClassId c : report.summary.tail_classes) cached += !report.final_cache[c].admission_entropies.empty();
    CHECK(report.summary.tail_retention == Approx(static_cast<double>(cached) / report.summary.tail_classes.size()));
    CHECK(tail_retention(report) == report.summary.tail_retention);
}

TEST_CASE("rejuvenation synthesis blends toward the nearest cached class") {
    const auto s = small_stream(8, 200);
    HyperParams hp = small_hp();
    hp.rejuvenation_synthesis = true;
    Session session(hp, s.textual);
    for (const auto& rec : s.records) session.process_sample(rec);
    const auto visual = session.cache().visual_prototypes();
    for (ClassId c = 0; c < 6; ++c) {
        const auto feature = session.synthesize_rejuvenation_feature(c);
        if (!feature) continue;
        std::optional<ClassId> best;
        double best_cos = -2;
        const auto t = session.textual().protos.row(c);
        for (ClassId j = 0; j < 6; ++j) {
            if (j == c || !visual[j]) continue;
            const double cs = dot(t, visual[j]->values());
            if (cs > best_cos) best_cos = cs, best = j;
        }
        REQUIRE(best);
        Vector sum(8);
        for (std::size_t i = 0; i < 8; ++i) sum[i] = t[i] + (*visual[*best])[i];
        const Embedding expect = normalize(sum);
        for (std::size_t i = 0; i < 8; ++i) CHECK((*feature)[i] == Approx(expect[i]).epsilon(1e-14));
    }
}
