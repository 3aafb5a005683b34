#include "convsl/convsl.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace convsl;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input = 2;
constexpr int exit_solver = 3;
constexpr int exit_inconsistent = 4;

struct Flags {
    std::string problem;
    std::string out = ".";
    std::optional<std::size_t> grid, K, Kv, seed;
    std::optional<unsigned> threads;
};

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Output directory plus the manifest being assembled for this run.
class Bundle {
public:
    Bundle(std::string command, const ProblemFile& pf, const fs::path& dir)
        : command_(std::move(command)), pf_(pf), dir_(dir) {
        fs::create_directories(dir_);
    }

    std::ofstream open(const std::string& name) {
        std::ofstream f(dir_ / name, std::ios::binary);
        if (!f) throw ArgumentError("cannot write " + (dir_ / name).string());
        files_.push_back(name);
        return f;
    }

    void result(const std::string& key, const std::string& value) { results_.emplace_back(key, value); }
    void result(const std::string& key, double value) { result(key, num(value)); }

    void write_manifest() {
        std::ofstream f(dir_ / "manifest.txt", std::ios::binary);
        f << "# command: " << command_ << '\n';
        f << "# files:";
        for (const auto& n : files_) f << ' ' << n;
        f << " manifest.txt\n";
        for (const auto& [k, v] : results_) f << "# result " << k << " = " << v << '\n';
        f << to_text(pf_);
    }

private:
    std::string command_;
    const ProblemFile& pf_;
    fs::path dir_;
    std::vector<std::string> files_;
    std::vector<std::pair<std::string, std::string>> results_;
};

ProblemFile load(const Flags& fl) {
    ProblemFile pf = load_problem(fl.problem);
    if (fl.grid) pf.grid = *fl.grid;
    if (fl.K) pf.K = *fl.K;
    if (fl.Kv) pf.Kv = *fl.Kv;
    if (fl.seed) pf.seed = *fl.seed;
    if (fl.threads) pf.threads = *fl.threads;
    validate(pf);
    return pf;
}

void write_eigenvalues(std::ostream& os, const Spectrum& s) {
    os << "n,re_lambda,im_lambda,re_kappa,im_kappa\n";
    for (std::size_t k = 0; k < s.count(); ++k)
        os << k + 1 << ',' << num(s.lambdas[k].real()) << ',' << num(s.lambdas[k].imag()) << ','
           << num(s.remainders[k].real()) << ',' << num(s.remainders[k].imag()) << '\n';
}

void write_v(std::ostream& os, const SampledFunction& v) {
    os << "x,re_v,im_v\n";
    for (std::size_t i = 0; i < v.size(); ++i)
        os << num(v.grid().node(i)) << ',' << num(v[i].real()) << ',' << num(v[i].imag()) << '\n';
}

void write_m(std::ostream& os, const SampledFunction& M) {
    os << "x,re_m,im_m,re_m_weighted,im_m_weighted\n";
    for (std::size_t i = 0; i < M.size(); ++i) {
        const double x = M.grid().node(i);
        const cplx w = (std::numbers::pi - x) * M[i];
        os << num(x) << ',' << num(M[i].real()) << ',' << num(M[i].imag()) << ',' << num(w.real())
           << ',' << num(w.imag()) << '\n';
    }
}

void write_trace(std::ostream& os, const SolveTrace& t) {
    os << "delta0 = " << num(t.delta0) << '\n' << "halvings = " << t.halvings << '\n';
    os << "mean_residual = " << num(t.mean_residual) << '\n' << "z_mean = " << num(t.z_mean) << '\n';
    for (std::size_t b = 0; b < t.blocks.size(); ++b) {
        const auto& r = t.blocks[b];
        const std::string p = "block." + std::to_string(b) + ".";
        os << p << "stage = " << r.stage << '\n'
           << p << "interval = " << num(r.left) << ' ' << num(r.right) << '\n'
           << p << "iterations = " << r.iterations << '\n'
           << p << "increments =";
        for (double x : r.increments) os << ' ' << num(x);
        os << '\n' << p << "residual = " << num(r.residual) << '\n';
    }
    os << "final_residual = " << num(t.final_residual) << '\n' << "tol_main = " << num(t.tol_main) << '\n';
}

InverseOptions inverse_options(const ProblemFile& pf) {
    InverseOptions o;
    o.threads = pf.threads;
    return o;
}

EigenOptions eigen_options(const ProblemFile& pf) {
    EigenOptions o;
    o.threads = pf.threads;
    return o;
}

std::vector<cplx> require_spectrum(const ProblemFile& pf) {
    auto s = resolve_spectrum(pf);
    if (!s) throw ArgumentError("problem file has no spectrum (give spectrum or spectrum_file)");
    return *s;
}

std::size_t series_terms(const ProblemFile& pf, std::size_t count) {
    return pf.Kv == 0 ? std::min(count, pf.grid / 2) : pf.Kv;
}

/// Run a pipeline stage, labelling any failure with the stage name.
template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        std::cerr << "stage " << name << " failed\n";
        throw;
    }
}

int cmd_forward(const Flags& fl) {
    ProblemFile pf = load(fl);
    const auto q = resolve_q(pf), M = resolve_M(pf);
    Bundle out("forward", pf, fl.out);
    const auto s = stage("forward", [&] { return eigenvalues(q, M, pf.K, eigen_options(pf)); });
    auto f = out.open("eigenvalues.csv");
    write_eigenvalues(f, s);
    out.result("omega", num(s.omega.real()) + " " + num(s.omega.imag()));
    out.write_manifest();
    return exit_ok;
}

int cmd_recover_v(const Flags& fl) {
    ProblemFile pf = load(fl);
    const auto lam = require_spectrum(pf);
    const auto q = resolve_q(pf);
    const cplx omega = mean_value(q);
    Bundle out("recover-v", pf, fl.out);
    const ProductDelta pd(lam, omega);
    const auto v = recover_v(pd, series_terms(pf, lam.size()), q.grid());
    auto f = out.open("v.csv");
    write_v(f, v);
    out.result("mean_check", mean_check(v, omega));
    out.result("data_mean_residual", data_mean_residual(lam, omega));
    out.write_manifest();
    return exit_ok;
}

int cmd_invert(const Flags& fl) {
    ProblemFile pf = load(fl);
    const auto lam = require_spectrum(pf);
    const auto q = resolve_q(pf);
    Bundle out("invert", pf, fl.out);
    const auto res = stage("invert", [&] {
        return invert(lam, q, series_terms(pf, lam.size()), inverse_options(pf));
    });
    {
        auto f = out.open("m.csv");
        write_m(f, res.M);
    }
    {
        auto f = out.open("v.csv");
        write_v(f, res.v);
    }
    {
        auto f = out.open("trace.txt");
        write_trace(f, res.trace);
    }
    out.result("mean_check", res.mean_check);
    out.result("data_mean_residual", res.data_residual);
    out.result("final_residual", res.trace.final_residual);
    if (pf.M_given) {
        const auto Mref = resolve_M(pf);
        const double ref = l2_weighted(Mref);
        const double err = l2_weighted(res.M - Mref);
        out.result(ref > 0.0 ? "weighted_relative_error" : "weighted_error", ref > 0.0 ? err / ref : err);
    }
    out.write_manifest();
    return exit_ok;
}

int cmd_roundtrip(const Flags& fl) {
    ProblemFile pf = load(fl);
    const auto q = resolve_q(pf), M = resolve_M(pf);
    Bundle out("roundtrip", pf, fl.out);
    const auto s = stage("forward", [&] { return eigenvalues(q, M, pf.K, eigen_options(pf)); });
    const auto res = stage("invert", [&] {
        return invert(s, q, series_terms(pf, s.count()), inverse_options(pf));
    });
    const auto s2 = stage("reforward", [&] { return eigenvalues(q, res.M, pf.K, eigen_options(pf)); });
    {
        auto f = out.open("eigenvalues.csv");
        write_eigenvalues(f, s);
    }
    {
        auto f = out.open("eigenvalues_roundtrip.csv");
        write_eigenvalues(f, s2);
    }
    {
        auto f = out.open("m_true.csv");
        write_m(f, M);
    }
    {
        auto f = out.open("m.csv");
        write_m(f, res.M);
    }
    {
        auto f = out.open("v.csv");
        write_v(f, res.v);
    }
    {
        auto f = out.open("trace.txt");
        write_trace(f, res.trace);
    }
    const double ref = l2_weighted(M), err = l2_weighted(res.M - M);
    out.result(ref > 0.0 ? "weighted_relative_error" : "weighted_error", ref > 0.0 ? err / ref : err);
    double dl = 0.0;
    for (std::size_t k = 0; k < std::max<std::size_t>(1, s.count() / 2); ++k)
        dl = std::max(dl, std::abs(s.lambdas[k] - s2.lambdas[k]));
    out.result("max_eigenvalue_change_first_half", dl);
    out.result("final_residual", res.trace.final_residual);
    out.write_manifest();
    return exit_ok;
}

int cmd_stability(const Flags& fl) {
    ProblemFile pf = load(fl);
    const auto q = resolve_q(pf), M = resolve_M(pf);
    SweepConfig cfg;
    cfg.K = pf.K;
    cfg.Kv = pf.Kv;
    cfg.eps = pf.eps;
    cfg.shape = parse_shape(pf.shape);
    cfg.seed = pf.seed;
    cfg.mode = pf.mode;
    cfg.threads = pf.threads;
    cfg.families.clear();
    {
        std::stringstream ss(pf.families);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = detail::trim(tok);
            if (tok == "kappa-only") cfg.families.push_back(SweepFamily::kappa_only);
            else if (tok == "mixed") cfg.families.push_back(SweepFamily::mixed);
            else throw ArgumentError("unknown sweep family '" + tok + "'");
        }
    }
    Bundle out("stability", pf, fl.out);
    const auto sw = stage("stability", [&] { return stability_sweep(q, M, cfg); });
    {
        auto f = out.open("stability.csv");
        write_stability_csv(f, sw.records);
    }
    const double frac = success_fraction(sw.records);
    out.result("success_fraction", frac);
    out.result("ratio_spread", ratio_spread(sw.records));
    out.result("ratio_v_spread", ratio_spread(sw.records, true));
    out.result("baseline_residual", sw.baseline_residual);
    out.result("norm_comparison_holds", theorem1_comparison(sw.records).all_ok ? "yes" : "no");
    out.write_manifest();
    return frac >= 0.8 ? exit_ok : exit_solver;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inverse spectral problem for Sturm-Liouville operators with a convolution term"};
    app.require_subcommand(1);

    Flags fl;
    struct Cmd {
        const char* name;
        const char* help;
        int (*run)(const Flags&);
    };
    const Cmd cmds[] = {
        {"forward", "eigenvalues of (q, M)", cmd_forward},
        {"recover-v", "kernel v from a spectrum", cmd_recover_v},
        {"invert", "recover M from a spectrum and q", cmd_invert},
        {"roundtrip", "forward, invert and forward again", cmd_roundtrip},
        {"stability", "perturbation sweep", cmd_stability},
    };
    std::vector<std::pair<CLI::App*, const Cmd*>> subs;
    for (const auto& c : cmds) {
        auto* s = app.add_subcommand(c.name, c.help);
        s->add_option("--problem", fl.problem, "problem file")->required()->check(CLI::ExistingFile);
        s->add_option("--out", fl.out, "output directory");
        s->add_option("--grid", fl.grid, "grid panels (even, >= 64)");
        s->add_option("--K", fl.K, "eigenvalue count");
        s->add_option("--Kv", fl.Kv, "series terms for v");
        s->add_option("--threads", fl.threads, "worker threads")->check(CLI::PositiveNumber);
        s->add_option("--seed", fl.seed, "perturbation seed");
        subs.emplace_back(s, &c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_input;
    }

    try {
        for (const auto& [s, c] : subs)
            if (s->parsed()) return c->run(fl);
    } catch (const InconsistentDataError& e) {
        std::cerr << "inconsistent data: " << e.what() << '\n';
        return exit_inconsistent;
    } catch (const ArgumentError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return exit_input;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return exit_input;
    } catch (const Error& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return exit_solver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_solver;
    }
    return exit_input;
}
