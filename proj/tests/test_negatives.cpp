#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"
#include "tailtta/error.hpp"
#include "tailtta/negatives.hpp"

using namespace tailtta;
using doctest::Approx;

namespace {

PrototypeMatrix rows_of(const std::vector<Embedding>& es) {
    PrototypeMatrix m(es.size(), es.front().dim());
    for (std::size_t r = 0; r < es.size(); ++r) std::copy(es[r].values().begin(), es[r].values().end(), m.row(r).begin());
    return m;
}

// Exhaustive pairwise scan with a strict-greater update, so the first
// (lowest) index wins ties.
NegativeMap brute_force(const std::vector<std::optional<Embedding>>& v, const PrototypeMatrix& t) {
    NegativeMap out(v.size());
    for (std::size_t c = 0; c < v.size(); ++c) {
        if (!v[c]) continue;
        long best_v = -1, best_t = -1;
        double sv = -2, st = -2;
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (j == c || !v[j]) continue;
            double a = 0, b = 0;
            for (std::size_t i = 0; i < t.dim(); ++i) {
                a += (*v[c])[i] * (*v[j])[i];
                b += t.row(c)[i] * t.row(j)[i];
            }
            if (a > sv) sv = a, best_v = static_cast<long>(j);
            if (b > st) st = b, best_t = static_cast<long>(j);
        }
        out[c] = HardNegativePair{c, static_cast<ClassId>(best_v), static_cast<ClassId>(best_t), 0};
    }
    return out;
}

}  // namespace

TEST_CASE("mining examples") {
    const std::vector<Embedding> v{testing::unit2(1, 0), testing::unit2(0.6, 0.8), testing::unit2(0, 1)};
    const std::vector<std::optional<Embedding>> visual(v.begin(), v.end());
    const NegativeMap pairs = mine_hard_negatives(visual, rows_of(v), 4);
    CHECK(pairs[0]->visual_neg == 1);
    CHECK(pairs[1]->visual_neg == 2);
    CHECK(pairs[2]->visual_neg == 1);
    CHECK(pairs[0]->textual_neg == 1);
    CHECK(pairs[1]->refreshed_at == 4);

    const std::vector<Embedding> two{testing::unit2(1, 0), testing::unit2(0, 1)};
    const NegativeMap forced = mine_hard_negatives({two[0], two[1]}, rows_of(two));
    CHECK(forced[0]->visual_neg == 1);
    CHECK(forced[1]->visual_neg == 0);

    // anchor (1,0) is equidistant from the duplicates (0,1) at 1 and 2
    const std::vector<Embedding> dup{testing::unit2(1, 0), testing::unit2(0, 1), testing::unit2(0, 1)};
    const NegativeMap tied = mine_hard_negatives({dup[0], dup[1], dup[2]}, rows_of(dup));
    CHECK(tied[0]->visual_neg == 1);
    CHECK(tied[0]->textual_neg == 1);
}

TEST_CASE("mining errors") {
    const std::vector<Embedding> v{testing::unit2(1, 0), testing::unit2(0, 1)};
    try {
        mine_hard_negatives({v[0], std::nullopt}, rows_of(v));
        FAIL("expected InsufficientClasses");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientClasses);
    }
    try {
        mine_hard_negatives({v[0], v[1], v[0]}, rows_of(v));
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
}

TEST_CASE("mining matches the exhaustive scan, ties included") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t c = 2 + rng() % 19, d = 2 + rng() % 15;
        auto visual = testing::random_visual(rng, c, d);
        PrototypeMatrix textual = testing::random_prototypes(rng, c, d);
        if (trial % 3 == 0) {
            // duplicate a row on each side to force ties
            const std::size_t a = rng() % c, b = rng() % c;
            visual[b] = visual[a];
            std::copy(textual.row(a).begin(), textual.row(a).end(), textual.row(b).begin());
        }
        for (std::size_t j = 0; j < c; ++j) {
            if (rng() % 5 == 0) visual[j].reset();
        }
        if (std::count_if(visual.begin(), visual.end(), [](const auto& x) { return x.has_value(); }) < 2) {
            visual[0] = testing::random_unit(rng, d);
            visual[1] = testing::random_unit(rng, d);
        }
        CHECK(mine_hard_negatives(visual, textual) == brute_force(visual, textual));
    }
}

TEST_CASE("mining is permutation-equivariant") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t c = 3 + rng() % 10, d = 6;
        const auto visual = testing::random_visual(rng, c, d);
        const PrototypeMatrix textual = testing::random_prototypes(rng, c, d);
        std::vector<std::size_t> perm(c);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::optional<Embedding>> pv(c);
        PrototypeMatrix pt(c, d);
        for (std::size_t i = 0; i < c; ++i) {
            pv[perm[i]] = visual[i];
            std::copy(textual.row(i).begin(), textual.row(i).end(), pt.row(perm[i]).begin());
        }
        const NegativeMap a = mine_hard_negatives(visual, textual);
        const NegativeMap b = mine_hard_negatives(pv, pt);
        for (std::size_t i = 0; i < c; ++i) {
            CHECK(b[perm[i]]->visual_neg == perm[a[i]->visual_neg]);
            CHECK(b[perm[i]]->textual_neg == perm[a[i]->textual_neg]);
        }
    }
}

TEST_CASE("ncl_loss_class examples") {
    const Embedding x = testing::unit2(1, 0);
    CHECK(ncl_loss_class(x.values(), x.values(), x.values(), x.values(), 0.7) == Approx(std::log(3.0)));
    const Embedding y = testing::unit2(-1, 0);
    // -ln(e / (e + 2/e)) = ln(1 + 2 e^-2)
    CHECK(ncl_loss_class(x.values(), x.values(), y.values(), y.values(), 1.0) ==
          Approx(std::log1p(2.0 * std::exp(-2.0))).epsilon(1e-14));
    const Embedding z = testing::unit2(0.6, 0.8);
    const double cold = ncl_loss_class(x.values(), x.values(), z.values(), z.values(), 1e-3);
    CHECK(cold >= 0.0);
    CHECK(cold < 1e-100);
}

TEST_CASE("ncl_loss_class is symmetric in its two negative terms") {
    const Embedding anchor = testing::unit2(1, 0);
    const Embedding a = testing::unit2(0.3, 0.9), b = testing::unit2(-0.5, 0.2);
    const double one = ncl_loss_class(anchor.values(), anchor.values(), a.values(), b.values(), 0.3);
    const double two = ncl_loss_class(anchor.values(), anchor.values(), b.values(), a.values(), 0.3);
    CHECK(one == Approx(two).epsilon(1e-15));
}

TEST_CASE("ncl_loss_total averages active classes") {
    const std::vector<Embedding> v{testing::unit2(1, 0), testing::unit2(0.6, 0.8), testing::unit2(0, 1)};
    const std::vector<std::optional<Embedding>> visual(v.begin(), v.end());
    const PrototypeMatrix t = rows_of(v);
    const NegativeMap pairs = mine_hard_negatives(visual, t);
    // per class, with t = v and tau = 1: positive cosine 1, both negatives at
    // cos(c, neg) = 0.6, 0.8, 0.8
    const auto direct = [](double n) { return -std::log(std::exp(1.0) / (std::exp(1.0) + 2 * std::exp(n))); };
    const double expected = (direct(0.6) + direct(0.8) + direct(0.8)) / 3.0;
    CHECK(ncl_loss_total(visual, t, pairs, 1.0) == Approx(expected).epsilon(1e-14));

    NegativeMap single(3);
    single[0] = HardNegativePair{0, 1, 2, 0};
    const std::vector<std::optional<Embedding>> partial{v[0], v[1], std::nullopt};
    CHECK(ncl_active_classes(partial, single) == std::vector<ClassId>{0});
    CHECK(ncl_loss_total(partial, t, single, 0.5) ==
          ncl_loss_class(v[0].values(), t.row(0), v[1].values(), t.row(2), 0.5));

    try {
        ncl_loss_total({std::nullopt, std::nullopt, std::nullopt}, t, pairs, 1.0);
        FAIL("expected EmptyActiveSet");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyActiveSet);
    }
}
