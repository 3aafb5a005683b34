#pragma once

#include "convsl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace convsl {

using cplx = std::complex<double>;

/// Uniform partition of [0, pi] into an even number of panels.
class Grid {
public:
    explicit Grid(std::size_t panels) : n_(panels) {
        if (panels < 2 || panels % 2 != 0)
            throw ArgumentError("grid needs an even number of panels >= 2, got " +
                                std::to_string(panels));
        h_ = std::numbers::pi / static_cast<double>(panels);
    }

    [[nodiscard]] std::size_t panels() const noexcept { return n_; }
    [[nodiscard]] std::size_t size() const noexcept { return n_ + 1; }
    [[nodiscard]] double step() const noexcept { return h_; }

    /// x_i = i*h; the last node is pinned to pi exactly.
    [[nodiscard]] double node(std::size_t i) const noexcept {
        return i == n_ ? std::numbers::pi : static_cast<double>(i) * h_;
    }

    /// Nearest node index to x (clamped to [0, n]).
    [[nodiscard]] std::size_t index_of(double x) const noexcept {
        if (x <= 0.0) return 0;
        auto i = static_cast<std::size_t>(std::lround(x / h_));
        return i > n_ ? n_ : i;
    }

    friend bool operator==(const Grid& a, const Grid& b) noexcept { return a.n_ == b.n_; }

private:
    std::size_t n_;
    double h_;
};

/// Complex samples of a function of one variable on a Grid.
///
/// The node x = pi may carry a singular function; by convention such values are
/// stored as 0 (the limit of the weighted value (pi - x) f(x)).
class SampledFunction {
public:
    explicit SampledFunction(Grid grid) : grid_(grid), values_(grid.size(), cplx{}) {}

    SampledFunction(Grid grid, std::vector<cplx> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw ArgumentError("sample count " + std::to_string(values_.size()) +
                                " does not match grid size " + std::to_string(grid_.size()));
    }

    /// Sample f at every node. A non-finite value at x = pi is replaced by 0.
    template <typename F>
    static SampledFunction sample(Grid grid, F&& f) {
        std::vector<cplx> v(grid.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            cplx y = cplx(f(grid.node(i)));
            if (i == grid.panels() && !(std::isfinite(y.real()) && std::isfinite(y.imag())))
                y = cplx{};
            v[i] = y;
        }
        return SampledFunction(grid, std::move(v));
    }

    static SampledFunction constant(Grid grid, cplx c) {
        return SampledFunction(grid, std::vector<cplx>(grid.size(), c));
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] const std::vector<cplx>& values() const noexcept { return values_; }
    [[nodiscard]] std::vector<cplx>& values() noexcept { return values_; }
    [[nodiscard]] const cplx* data() const noexcept { return values_.data(); }

    cplx& operator[](std::size_t i) noexcept { return values_[i]; }
    const cplx& operator[](std::size_t i) const noexcept { return values_[i]; }

    /// Value at x = p*h/2, linear interpolation between neighbours when p is odd.
    [[nodiscard]] cplx at_half(std::size_t p) const {
        if (p % 2 == 0) return values_.at(p / 2);
        std::size_t i = p / 2;
        return 0.5 * (values_.at(i) + values_.at(i + 1));
    }

    SampledFunction& operator+=(const SampledFunction& o) {
        require_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    SampledFunction& operator-=(const SampledFunction& o) {
        require_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    SampledFunction& operator*=(cplx c) {
        for (auto& v : values_) v *= c;
        return *this;
    }

    friend SampledFunction operator+(SampledFunction a, const SampledFunction& b) { return a += b; }
    friend SampledFunction operator-(SampledFunction a, const SampledFunction& b) { return a -= b; }
    friend SampledFunction operator*(cplx c, SampledFunction a) { return a *= c; }

    void require_same(const SampledFunction& o) const {
        if (!(grid_ == o.grid_)) throw ArgumentError("functions live on different grids");
    }

private:
    Grid grid_;
    std::vector<cplx> values_;
};

struct WeightedNormReport {
    double l2 = 0.0;           ///< ||f|| on (0, pi)
    double l2_weighted = 0.0;  ///< ||(pi - x) f||
};

/// Composite trapezoid rule over [x_a, x_b], summed left to right.
[[nodiscard]] inline cplx quad_integrate(const SampledFunction& f, std::size_t a, std::size_t b) {
    if (a > b || b > f.grid().panels())
        throw ArgumentError("quadrature range [" + std::to_string(a) + ", " + std::to_string(b) +
                            "] invalid for " + std::to_string(f.grid().panels()) + " panels");
    if (a == b) return {};
    cplx s = 0.5 * f[a];
    for (std::size_t i = a + 1; i < b; ++i) s += f[i];
    s += 0.5 * f[b];
    return s * f.grid().step();
}

[[nodiscard]] inline cplx integral(const SampledFunction& f) {
    return quad_integrate(f, 0, f.grid().panels());
}

/// Running trapezoid integral c_i = int_0^{x_i} f.
[[nodiscard]] inline std::vector<cplx> cumulative(const std::vector<cplx>& f, double h) {
    std::vector<cplx> c(f.size());
    if (f.empty()) return c;
    for (std::size_t i = 1; i < f.size(); ++i) c[i] = c[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    return c;
}

[[nodiscard]] inline SampledFunction cumulative(const SampledFunction& f) {
    return SampledFunction(f.grid(), cumulative(f.values(), f.grid().step()));
}

/// int_0^{p h/2} f given its node cumulative c; for odd p the last half panel
/// integrates the linear interpolant exactly.
[[nodiscard]] inline cplx half_cumulative(const std::vector<cplx>& c, const std::vector<cplx>& f,
                                          std::size_t p, double h) {
    std::size_t i = p / 2;
    if (p % 2 == 0) return c[i];
    return c[i] + h / 8.0 * (3.0 * f[i] + f[i + 1]);
}

/// sqrt(int |f|^2 w^2) by trapezoid over [x_a, x_b] with w(x) = pi - x when weighted.
[[nodiscard]] inline double l2_on(const SampledFunction& f, std::size_t a, std::size_t b,
                                  bool weighted = false) {
    const Grid& g = f.grid();
    if (a > b || b > g.panels()) throw ArgumentError("norm range out of grid");
    if (a == b) return 0.0;
    auto term = [&](std::size_t i) {
        double w = weighted ? (std::numbers::pi - g.node(i)) : 1.0;
        return std::norm(f[i]) * w * w;
    };
    double s = 0.5 * term(a);
    for (std::size_t i = a + 1; i < b; ++i) s += term(i);
    s += 0.5 * term(b);
    return std::sqrt(s * g.step());
}

[[nodiscard]] inline double l2(const SampledFunction& f) { return l2_on(f, 0, f.grid().panels()); }

[[nodiscard]] inline double l2_weighted(const SampledFunction& f) {
    return l2_on(f, 0, f.grid().panels(), true);
}

[[nodiscard]] inline double l1(const SampledFunction& f) {
    const std::size_t n = f.grid().panels();
    double s = 0.5 * (std::abs(f[0]) + std::abs(f[n]));
    for (std::size_t i = 1; i < n; ++i) s += std::abs(f[i]);
    return s * f.grid().step();
}

[[nodiscard]] inline double sup_norm(const SampledFunction& f) {
    double m = 0.0;
    for (const auto& v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

[[nodiscard]] inline WeightedNormReport norms(const SampledFunction& f) {
    return {l2(f), l2_weighted(f)};
}

struct NormTransforms {
    SampledFunction M0;  ///< (pi - x) M(x)
    SampledFunction M1;  ///< int_0^x M
    SampledFunction Q;   ///< M0 - M1
};

[[nodiscard]] inline NormTransforms remark1_transforms(const SampledFunction& M) {
    const Grid& g = M.grid();
    SampledFunction M0(g);
    for (std::size_t i = 0; i < g.size(); ++i) M0[i] = (std::numbers::pi - g.node(i)) * M[i];
    SampledFunction M1 = cumulative(M);
    SampledFunction Q = M0 - M1;
    return {std::move(M0), std::move(M1), std::move(Q)};
}

/// Restrict f to nodes [0, last]; the rest is zeroed.
[[nodiscard]] inline SampledFunction truncated(const SampledFunction& f, std::size_t last) {
    SampledFunction r = f;
    for (std::size_t i = last + 1; i < r.size(); ++i) r[i] = cplx{};
    return r;
}

}  // namespace convsl
