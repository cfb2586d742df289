#include "tailtta/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tailtta/error.hpp"

namespace tailtta {

namespace {

void require_same_dim(std::size_t a, std::size_t b) {
    if (a != b) {
        throw Error(ErrorKind::DimensionMismatch,
                    "vector dimensions differ (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a.size(), b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Embedding normalize(std::span<const double> v) {
    Vector out(v.begin(), v.end());
    normalize_in_place(out);
    return Embedding::assume_unit(std::move(out));
}

void normalize_in_place(std::span<double> v) {
    const double n = l2_norm(v);
    if (!std::isfinite(n)) throw Error(ErrorKind::NonFiniteInput, "vector norm is not finite");
    if (n < 1e-12) throw Error(ErrorKind::ZeroVector, "cannot normalize vector with norm < 1e-12");
    // Rows already unit up to rounding are left alone so normalize is idempotent.
    if (std::abs(n - 1.0) <= 1e-12) return;
    for (double& x : v) x /= n;
}

double cosine(const Embedding& u, const Embedding& v) { return dot(u.values(), v.values()); }

Vector softmax(std::span<const double> logits, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw Error(ErrorKind::NonFiniteInput, "softmax temperature must be positive and finite");
    }
    Vector out(logits.size());
    if (logits.empty()) return out;
    double max_logit = logits[0];
    for (double x : logits) {
        if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteInput, "softmax logit is not finite");
        max_logit = std::max(max_logit, x);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - max_logit) / tau);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p) {
        if (x > 0.0) h -= x * std::log(x);
    }
    return std::max(h, 0.0);
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace tailtta
