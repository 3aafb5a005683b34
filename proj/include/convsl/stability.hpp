#pragma once

#include "convsl/errors.hpp"
#include "convsl/forward.hpp"
#include "convsl/inverse.hpp"
#include "convsl/numgrid.hpp"
#include "convsl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace convsl {

enum class PerturbationShape { single_mode, random_decaying };

[[nodiscard]] inline std::string to_string(PerturbationShape s) {
    return s == PerturbationShape::single_mode ? "single-mode" : "random-decaying";
}

[[nodiscard]] inline PerturbationShape parse_shape(const std::string& s) {
    if (s == "single-mode") return PerturbationShape::single_mode;
    if (s == "random-decaying") return PerturbationShape::random_decaying;
    throw ArgumentError("unknown perturbation shape '" + s + "'");
}

struct PerturbationSpec {
    std::uint64_t seed = 1;
    double eps_kappa = 0.0;  ///< l2 norm of the remainder perturbation
    double eps_q = 0.0;      ///< L2 norm of the potential perturbation
    PerturbationShape shape = PerturbationShape::random_decaying;
    std::size_t mode = 3;    ///< perturbed index for single-mode
    bool complex_values = false;
};

struct PerturbedData {
    Spectrum spectrum;
    SampledFunction q;
};

namespace detail {

/// Uniform on [-1, 1) from the raw 64-bit engine output, so the sequence is
/// fixed by the seed alone (no library-specific distribution code involved).
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

/// Unit-norm smooth bump used for potential perturbations.
inline SampledFunction unit_bump(const Grid& g) {
    auto b = SampledFunction::sample(g, [](double x) {
        const double s = std::sin(x);
        return cplx(s * s * (1.0 + 0.5 * std::cos(x)));
    });
    b *= 1.0 / l2(b);
    return b;
}

}  // namespace detail

/// Unit l2 direction for the remainder perturbation of a spectrum with K terms.
[[nodiscard]] inline std::vector<cplx> kappa_direction(std::size_t K, const PerturbationSpec& spec) {
    std::vector<cplx> d(K, cplx{});
    if (spec.shape == PerturbationShape::single_mode) {
        if (spec.mode == 0 || spec.mode > K)
            throw ArgumentError("single-mode index " + std::to_string(spec.mode) + " out of range");
        d[spec.mode - 1] = 1.0;
        return d;
    }
    std::mt19937_64 rng(spec.seed);
    double s = 0.0;
    for (std::size_t n = 1; n <= K; ++n) {
        const double re = detail::unit_uniform(rng);
        const double im = spec.complex_values ? detail::unit_uniform(rng) : 0.0;
        d[n - 1] = cplx(re, im) / static_cast<double>(n);
        s += std::norm(d[n - 1]);
    }
    const double norm = std::sqrt(s);
    for (auto& x : d) x /= norm;
    return d;
}

/// kappa~ = kappa + eps_kappa d, q~ = q + eps_q b, lambda~_n = n^2 + omega~ + kappa~_n.
[[nodiscard]] inline PerturbedData perturb(const Spectrum& s, const SampledFunction& q,
                                           const PerturbationSpec& spec) {
    if (spec.eps_kappa < 0.0 || spec.eps_q < 0.0)
        throw ArgumentError("perturbation sizes must be nonnegative");
    PerturbedData out{s, q};
    if (spec.eps_q > 0.0) {
        auto b = detail::unit_bump(q.grid());
        b *= spec.eps_q;
        out.q += b;
    }
    if (spec.eps_kappa == 0.0 && spec.eps_q == 0.0) return out;
    const cplx omega_t = mean_value(out.q);
    std::vector<cplx> dk(s.count(), cplx{});
    if (spec.eps_kappa > 0.0) dk = kappa_direction(s.count(), spec);
    std::vector<cplx> lam(s.count());
    for (std::size_t k = 0; k < s.count(); ++k) {
        const double n = static_cast<double>(k + 1);
        lam[k] = n * n + omega_t + s.remainders[k] + spec.eps_kappa * dk[k];
    }
    out.spectrum = Spectrum(std::move(lam), omega_t);
    return out;
}

enum class SweepFamily { kappa_only, mixed };

struct SweepConfig {
    std::size_t K = 40;
    std::size_t Kv = 0;  ///< 0: same as K (capped at n/2)
    std::vector<double> eps{0.0, 1e-3, 3e-3, 1e-2, 3e-2};
    std::vector<SweepFamily> families{SweepFamily::kappa_only, SweepFamily::mixed};
    PerturbationShape shape = PerturbationShape::random_decaying;
    std::uint64_t seed = 1;
    std::size_t mode = 3;
    bool complex_values = false;
    unsigned threads = 1;
    InverseOptions inverse{};
};

struct StabilityRecord {
    double eps_kappa = 0.0;
    double eps_q = 0.0;
    double eps_total = 0.0;    ///< ||kappa^||_l2 + ||q^||
    double dv = 0.0;           ///< ||v - v~||
    double dm_weighted = 0.0;  ///< ||M - M~||_{2,pi}
    double ratio = 0.0;        ///< dm_weighted / eps_total (0 when eps_total = 0)
    double ratio_v = 0.0;      ///< dv / eps_kappa (0 when eps_kappa = 0)
    std::string status = "ok";
    // L1/L2 norms of the weighted transforms of M - M~
    double m0_l2 = 0.0;
    double m0_l1 = 0.0;
    double m1_l1 = 0.0;
    double q_l2 = 0.0;

    [[nodiscard]] bool ok() const noexcept { return status == "ok"; }
};

struct SweepResult {
    std::vector<StabilityRecord> records;  ///< ascending eps_total
    double baseline_residual = 0.0;        ///< main-equation residual of the unperturbed inversion
};

/// Norms of (pi - x) D, int_0^x D and their difference for a deviation D.
inline void fill_norms(StabilityRecord& r, const SampledFunction& D) {
    const auto t = remark1_transforms(D);
    r.m0_l2 = l2(t.M0);
    r.m0_l1 = l1(t.M0);
    r.m1_l1 = l1(t.M1);
    r.q_l2 = l2(t.Q);
}

/// Forward spectrum of (q, M), inversion of it and of each perturbed data set.
/// Rows are independent and may run concurrently; output order is fixed.
[[nodiscard]] inline SweepResult stability_sweep(const SampledFunction& q, const SampledFunction& M,
                                                 const SweepConfig& cfg) {
    q.require_same(M);
    const Grid& g = q.grid();
    for (double e : cfg.eps)
        if (!(e >= 0.0) || !std::isfinite(e)) throw ArgumentError("sweep eps must be finite and >= 0");

    EigenOptions eo;
    eo.threads = cfg.threads;
    const Spectrum base = eigenvalues(q, M, cfg.K, eo);
    InverseOptions io = cfg.inverse;
    io.threads = 1;
    const auto ref = invert(base, q, cfg.Kv, io);

    struct Job {
        SweepFamily family;
        double eps;
    };
    std::vector<Job> jobs;
    for (auto f : cfg.families)
        for (double e : cfg.eps) jobs.push_back({f, e});

    std::vector<StabilityRecord> rows(jobs.size());
    parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
        const Job job = jobs[i];
        StabilityRecord& r = rows[i];
        PerturbationSpec spec;
        spec.seed = cfg.seed;
        spec.shape = cfg.shape;
        spec.mode = cfg.mode;
        spec.complex_values = cfg.complex_values;
        spec.eps_kappa = job.eps;
        spec.eps_q = job.family == SweepFamily::mixed ? job.eps : 0.0;
        r.eps_kappa = spec.eps_kappa;
        r.eps_q = spec.eps_q;
        r.eps_total = r.eps_kappa + r.eps_q;
        try {
            const auto pd = perturb(base, q, spec);
            const auto res = invert(pd.spectrum, pd.q, cfg.Kv, io);
            const auto D = ref.M - res.M;
            r.dm_weighted = l2_weighted(D);
            r.dv = l2(ref.v - res.v);
            r.ratio = r.eps_total > 0.0 ? r.dm_weighted / r.eps_total : 0.0;
            r.ratio_v = r.eps_kappa > 0.0 ? r.dv / r.eps_kappa : 0.0;
            fill_norms(r, D);
        } catch (const SolverError& e) {
            r.status = "failed:" + e.stage();
        } catch (const InconsistentDataError&) {
            r.status = "failed:inconsistent";
        } catch (const Error&) {
            r.status = "failed:error";
        }
        if (!r.ok()) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            r.dv = r.dm_weighted = r.ratio = r.ratio_v = nan;
        }
    });
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.eps_total < b.eps_total;
    });
    return {std::move(rows), ref.trace.final_residual};
}

/// Fraction of rows whose inversion succeeded.
[[nodiscard]] inline double success_fraction(const std::vector<StabilityRecord>& rows) {
    if (rows.empty()) return 1.0;
    const auto good = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.ok(); });
    return static_cast<double>(good) / static_cast<double>(rows.size());
}

/// max/min of a ratio column over the successful rows with eps_total > 0.
[[nodiscard]] inline double ratio_spread(const std::vector<StabilityRecord>& rows, bool of_v = false) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : rows) {
        if (!r.ok()) continue;
        if (of_v ? r.eps_kappa <= 0.0 : r.eps_total <= 0.0) continue;
        const double x = of_v ? r.ratio_v : r.ratio;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi == 0.0) return 1.0;
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

inline constexpr double norm_c1 = 1.0 / 3.0;
inline const double norm_c2 = 2.0 * std::sqrt(std::numbers::pi) + 3.0;

/// C1 ||M0^|| <= ||M0^||_L1 + ||M1^||_L1 + ||Q^|| <= C2 ||M0^|| together with
/// ||M1^||_L1 <= ||M0^||_L1, each up to a relative quadrature slack.
struct NormComparisonRow {
    double m0_l2 = 0.0;
    double middle = 0.0;
    double lower = 0.0;  ///< C1 ||M0^||
    double upper = 0.0;  ///< C2 ||M0^||
    bool two_sided = true;
    bool m1_below_m0 = true;

    [[nodiscard]] bool ok() const noexcept { return two_sided && m1_below_m0; }
};

[[nodiscard]] inline NormComparisonRow norm_comparison_row(double m0_l2, double m0_l1, double m1_l1, double q_l2,
                                            double slack = 0.02) {
    NormComparisonRow r;
    r.m0_l2 = m0_l2;
    r.middle = m0_l1 + m1_l1 + q_l2;
    r.lower = norm_c1 * m0_l2;
    r.upper = norm_c2 * m0_l2;
    r.two_sided = r.middle >= r.lower * (1.0 - slack) && r.middle <= r.upper * (1.0 + slack);
    r.m1_below_m0 = m1_l1 <= m0_l1 * (1.0 + slack);
    return r;
}

[[nodiscard]] inline NormComparisonRow norm_comparison_row(const SampledFunction& D, double slack = 0.02) {
    StabilityRecord r;
    fill_norms(r, D);
    return norm_comparison_row(r.m0_l2, r.m0_l1, r.m1_l1, r.q_l2, slack);
}

struct NormComparisonReport {
    std::vector<NormComparisonRow> rows;
    bool all_ok = true;
};

/// The two-sided norm comparison for every successful sweep row.
[[nodiscard]] inline NormComparisonReport theorem1_comparison(const std::vector<StabilityRecord>& records,
                                                       double slack = 0.02) {
    NormComparisonReport rep;
    for (const auto& r : records) {
        if (!r.ok()) continue;
        rep.rows.push_back(norm_comparison_row(r.m0_l2, r.m0_l1, r.m1_l1, r.q_l2, slack));
        rep.all_ok = rep.all_ok && rep.rows.back().ok();
    }
    return rep;
}

namespace detail {
inline std::string csv_num(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10e", x);
    return buf;
}
}  // namespace detail

inline void write_stability_csv(std::ostream& os, const std::vector<StabilityRecord>& rows) {
    os << "eps_kappa,eps_q,eps_total,dv,dm_weighted,ratio,ratio_v,status\n";
    for (const auto& r : rows) {
        os << detail::csv_num(r.eps_kappa) << ',' << detail::csv_num(r.eps_q) << ','
           << detail::csv_num(r.eps_total) << ',' << detail::csv_num(r.dv) << ','
           << detail::csv_num(r.dm_weighted) << ',' << detail::csv_num(r.ratio) << ','
           << detail::csv_num(r.ratio_v) << ',' << r.status << '\n';
    }
}

}  // namespace convsl
