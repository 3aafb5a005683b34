#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

/// Dense collocation of -y'' + q y + int_0^x M(x - t) y(t) dt with y(0) = y(pi) = 0:
/// second differences plus trapezoid convolution on n panels. Returns the
/// `count` eigenvalues of smallest real part.
inline std::vector<std::complex<double>> collocation_eigenvalues(
    const std::function<double(double)>& q, const std::function<double(double)>& M, int n,
    int count) {
    const double h = std::numbers::pi / n;
    const int N = n - 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    for (int r = 0; r < N; ++r) {
        const int i = r + 1;
        const double x = i * h;
        A(r, r) += 2.0 / (h * h) + q(x);
        if (r > 0) A(r, r - 1) -= 1.0 / (h * h);
        if (r + 1 < N) A(r, r + 1) -= 1.0 / (h * h);
        // y_0 = 0, so the j = 0 endpoint drops out; weight 1/2 at j = i.
        for (int j = 1; j <= i; ++j) {
            const double w = (j == i) ? 0.5 * h : h;
            A(r, j - 1) += w * M(x - j * h);
        }
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + N);
    std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return a.real() < b.real(); });
    ev.resize(static_cast<std::size_t>(count));
    return ev;
}

/// Richardson extrapolation (4 L_{2n} - L_n)/3 of the O(h^2) collocation values.
inline std::vector<std::complex<double>> richardson_eigenvalues(
    const std::function<double(double)>& q, const std::function<double(double)>& M, int n,
    int count) {
    const auto coarse = collocation_eigenvalues(q, M, n, count);
    const auto fine = collocation_eigenvalues(q, M, 2 * n, count);
    std::vector<std::complex<double>> out(static_cast<std::size_t>(count));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (4.0 * fine[k] - coarse[k]) / 3.0;
    return out;
}

}  // namespace oracle
