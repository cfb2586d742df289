#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tailtta {

using Vector = std::vector<double>;
using ClassId = std::size_t;

/// A unit-norm embedding. Only constructible through `normalize` or
/// `Embedding::assume_unit`, so holders can rely on cosine == dot.
class Embedding {
public:
    Embedding() = default;

    /// Wraps values that are already unit-norm (e.g. a renormalized row).
    static Embedding assume_unit(Vector values) { return Embedding(std::move(values)); }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dim() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const Embedding&, const Embedding&) = default;

private:
    explicit Embedding(Vector values) : values_(std::move(values)) {}
    Vector values_;
};

/// Row-major C x d matrix of prototype rows.
class PrototypeMatrix {
public:
    PrototypeMatrix() = default;
    PrototypeMatrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dim() const noexcept { return dim_; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * dim_, dim_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    friend bool operator==(const PrototypeMatrix&, const PrototypeMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    Vector data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Throws ZeroVector when ||v|| < 1e-12.
Embedding normalize(std::span<const double> v);

/// In-place unit scaling of a raw row; same ZeroVector rule.
void normalize_in_place(std::span<double> v);

/// Inputs are unit-norm, so this is the dot product.
double cosine(const Embedding& u, const Embedding& v);

/// Max-stabilized softmax of logits / tau.
Vector softmax(std::span<const double> logits, double tau);

/// Shannon entropy in nats, 0 ln 0 = 0.
double entropy(std::span<const double> p);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

}  // namespace tailtta
