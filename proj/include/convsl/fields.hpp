#pragma once

#include "convsl/numgrid.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace convsl {

/// Complex samples of a kernel K(x_i, t_j) on the triangle 0 <= j <= i <= n,
/// stored row-major.
class TriangleField {
public:
    explicit TriangleField(Grid grid)
        : grid_(grid), values_((grid.size()) * (grid.size() + 1) / 2, cplx{}) {}

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t panels() const noexcept { return grid_.panels(); }

    [[nodiscard]] static constexpr std::size_t index(std::size_t i, std::size_t j) noexcept {
        return i * (i + 1) / 2 + j;
    }

    cplx& operator()(std::size_t i, std::size_t j) noexcept { return values_[index(i, j)]; }
    const cplx& operator()(std::size_t i, std::size_t j) const noexcept {
        return values_[index(i, j)];
    }

    [[nodiscard]] cplx at(std::size_t i, std::size_t j) const {
        if (j > i || i > grid_.panels())
            throw ArgumentError("triangle index (" + std::to_string(i) + ", " + std::to_string(j) +
                                ") out of range");
        return (*this)(i, j);
    }

    /// Row x = x_i as a function of t on nodes 0..i (zero beyond).
    [[nodiscard]] SampledFunction row(std::size_t i) const {
        SampledFunction r(grid_);
        for (std::size_t j = 0; j <= i; ++j) r[j] = (*this)(i, j);
        return r;
    }

    [[nodiscard]] const std::vector<cplx>& values() const noexcept { return values_; }
    [[nodiscard]] std::vector<cplx>& values() noexcept { return values_; }

    [[nodiscard]] double sup_abs() const noexcept {
        double m = 0.0;
        for (const auto& v : values_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    Grid grid_;
    std::vector<cplx> values_;
};

/// Complex samples of K(x_i, t_j, tau_k) on the pyramid 0 <= k <= j <= i <= n.
/// Each tau-slice k is a triangle over (i - k, j - k), stored contiguously.
class PyramidField {
public:
    explicit PyramidField(Grid grid) : grid_(grid), offsets_(grid.size() + 1, 0) {
        const std::size_t n = grid.panels();
        for (std::size_t k = 0; k <= n; ++k) offsets_[k + 1] = offsets_[k] + tri(n - k);
        values_.assign(offsets_.back(), cplx{});
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }

    cplx& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return values_[offsets_[k] + TriangleField::index(i - k, j - k)];
    }
    const cplx& operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return values_[offsets_[k] + TriangleField::index(i - k, j - k)];
    }

    [[nodiscard]] cplx at(std::size_t i, std::size_t j, std::size_t k) const {
        if (k > j || j > i || i > grid_.panels())
            throw ArgumentError("pyramid index out of range");
        return (*this)(i, j, k);
    }

    /// Pointer to slice k, a row-major triangle with n - k panels.
    [[nodiscard]] cplx* slice(std::size_t k) noexcept { return values_.data() + offsets_[k]; }
    [[nodiscard]] const cplx* slice(std::size_t k) const noexcept {
        return values_.data() + offsets_[k];
    }

    [[nodiscard]] const std::vector<cplx>& values() const noexcept { return values_; }

private:
    static constexpr std::size_t tri(std::size_t m) noexcept { return (m + 1) * (m + 2) / 2; }

    Grid grid_;
    std::vector<std::size_t> offsets_;
    std::vector<cplx> values_;
};

}  // namespace convsl
