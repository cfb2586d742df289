#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tailtta/negatives.hpp"
#include "tailtta/numerics.hpp"
#include "tailtta/objective.hpp"

namespace tailtta::testing {

inline Vector gaussian_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vector v(dim);
    for (double& x : v) x = n(rng);
    return v;
}

inline Embedding random_unit(std::mt19937_64& rng, std::size_t dim) { return normalize(gaussian_vector(rng, dim)); }

inline PrototypeMatrix random_prototypes(std::mt19937_64& rng, std::size_t rows, std::size_t dim) {
    PrototypeMatrix m(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const Embedding e = random_unit(rng, dim);
        for (std::size_t i = 0; i < dim; ++i) m.row(r)[i] = e[i];
    }
    return m;
}

inline std::vector<std::optional<Embedding>> random_visual(std::mt19937_64& rng, std::size_t rows, std::size_t dim) {
    std::vector<std::optional<Embedding>> out;
    for (std::size_t r = 0; r < rows; ++r) out.emplace_back(random_unit(rng, dim));
    return out;
}

inline Embedding unit2(double x, double y) { return normalize(Vector{x, y}); }

}  // namespace tailtta::testing

namespace tailtta::testing {

// A random objective with every loss term active: all classes hold visual
// prototypes, negatives are mined, and views are jittered copies of one
// embedding.
struct GradientInstance {
    std::vector<Embedding> views;
    std::vector<std::optional<Embedding>> visual;
    NegativeMap pairs;
    PrototypeMatrix textual;
    ObjectiveParams params;
};

inline GradientInstance gradient_instance(std::uint64_t seed, std::size_t num_classes = 6, std::size_t dim = 8) {
    std::mt19937_64 rng(seed);
    GradientInstance g;
    g.textual = random_prototypes(rng, num_classes, dim);
    g.visual = random_visual(rng, num_classes, dim);
    g.pairs = mine_hard_negatives(g.visual, g.textual);
    const Vector base = gaussian_vector(rng, dim);
    for (int v = 0; v < 4; ++v) {
        Vector x = gaussian_vector(rng, dim);
        for (std::size_t i = 0; i < dim; ++i) x[i] = base[i] + 0.3 * x[i];
        g.views.push_back(normalize(x));
    }
    g.params.tau = 0.5;
    g.params.rho = 0.5;
    return g;
}

// Largest per-coordinate |analytic - central difference| / (|central difference| + 1e-8).
inline double gradient_check(const GradientInstance& g, double h = 1e-5) {
    const Objective obj(g.views, g.visual, g.pairs, g.params);
    const ViewSelection sel = obj.select(g.textual);
    PrototypeMatrix grad;
    obj.grad_textual(g.textual, sel, grad);
    double worst = 0.0;
    PrototypeMatrix probe = g.textual;
    for (std::size_t k = 0; k < probe.flat().size(); ++k) {
        const double keep = probe.flat()[k];
        probe.flat()[k] = keep + h;
        const double up = obj.total_loss(probe, sel).total;
        probe.flat()[k] = keep - h;
        const double down = obj.total_loss(probe, sel).total;
        probe.flat()[k] = keep;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(grad.flat()[k] - fd) / (std::abs(fd) + 1e-8));
    }
    return worst;
}

}  // namespace tailtta::testing
