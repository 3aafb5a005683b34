#pragma once

#include "convsl/errors.hpp"
#include "convsl/numgrid.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace convsl {

/// Line-oriented problem description:
///
///     # comment
///     grid = 400
///     q = cos
///     M = cos:0.2
///     K = 40
///     spectrum = [ 1.1 0.0
///                  4.2 0.0 ]
///
/// Arrays are enclosed in brackets and may span lines; elements are separated
/// by whitespace or commas. Function values are either a built-in name or a
/// real sample array of length grid + 1 (with an optional `<name>_im` array).
struct ProblemFile {
    std::size_t grid = 400;
    std::string q = "zero";
    std::string M = "zero";
    bool M_given = false;  ///< M appeared in the file (used as reference by `invert`)
    std::vector<double> q_re, q_im, M_re, M_im;  ///< inline samples, if given
    std::optional<std::vector<std::complex<double>>> spectrum;
    std::string spectrum_file;  ///< eigenvalues.csv written by `forward`
    std::size_t K = 40;
    std::size_t Kv = 0;         ///< 0: min(K, grid/2)
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::vector<double> eps{0.0, 1e-3, 3e-3, 1e-2, 3e-2};
    std::string shape = "random-decaying";
    std::string families = "kappa-only,mixed";
    std::size_t mode = 3;
    std::filesystem::path base_dir;  ///< directory of the file, for relative paths

    [[nodiscard]] std::size_t series_terms() const { return Kv == 0 ? std::min(K, grid / 2) : Kv; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_double(const std::string& tok, const std::string& ctx) {
    double x = 0.0;
    const char* first = tok.data();
    if (!tok.empty() && tok[0] == '+') ++first;
    auto [p, ec] = std::from_chars(first, tok.data() + tok.size(), x);
    if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(x))
        throw ArgumentError("invalid number '" + tok + "' in " + ctx);
    return x;
}

template <typename Int>
Int parse_int(const std::string& tok, const std::string& ctx) {
    Int x{};
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw ArgumentError("invalid integer '" + tok + "' for " + ctx);
    return x;
}

inline std::vector<double> parse_array(const std::string& body, const std::string& key) {
    std::vector<double> out;
    std::string tok;
    auto flush = [&] {
        if (!tok.empty()) out.push_back(parse_double(tok, key));
        tok.clear();
    };
    for (char c : body) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == ';')
            flush();
        else
            tok += c;
    }
    flush();
    return out;
}

}  // namespace detail

/// Parse problem text; throws ArgumentError with the offending line.
[[nodiscard]] inline ProblemFile parse_problem(const std::string& text,
                                               const std::filesystem::path& base_dir = {}) {
    ProblemFile pf;
    pf.base_dir = base_dir;
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (!value.empty() && value[0] == '[') {
            while (value.find(']') == std::string::npos) {
                std::string more;
                if (!std::getline(in, more))
                    throw ArgumentError("line " + std::to_string(lineno) + ": unterminated array");
                ++lineno;
                if (auto h = more.find('#'); h != std::string::npos) more.erase(h);
                value += ' ' + more;
            }
            const auto close = value.find(']');
            if (!detail::trim(value.substr(close + 1)).empty())
                throw ArgumentError("line " + std::to_string(lineno) + ": text after ']'");
            value = value.substr(0, close + 1);
        }
        if (key.empty()) throw ArgumentError("line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ArgumentError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }

    auto is_array = [](const std::string& v) { return !v.empty() && v.front() == '['; };
    auto array_of = [&](const std::string& key, const std::string& v) {
        if (!is_array(v)) throw ArgumentError("'" + key + "' expects an array");
        return detail::parse_array(v.substr(1, v.size() - 2), key);
    };

    for (const auto& [key, v] : kv) {
        if (key == "grid" || key == "grid_panels") pf.grid = detail::parse_int<std::size_t>(v, key);
        else if (key == "K") pf.K = detail::parse_int<std::size_t>(v, key);
        else if (key == "Kv" || key == "K_v") pf.Kv = detail::parse_int<std::size_t>(v, key);
        else if (key == "seed") pf.seed = detail::parse_int<std::uint64_t>(v, key);
        else if (key == "threads") pf.threads = detail::parse_int<unsigned>(v, key);
        else if (key == "mode") pf.mode = detail::parse_int<std::size_t>(v, key);
        else if (key == "shape") pf.shape = v;
        else if (key == "families") pf.families = v;
        else if (key == "eps") pf.eps = array_of(key, v);
        else if (key == "spectrum_file") pf.spectrum_file = v;
        else if (key == "q" || key == "M") {
            auto& name = key == "q" ? pf.q : pf.M;
            if (key == "M") pf.M_given = true;
            if (is_array(v)) {
                (key == "q" ? pf.q_re : pf.M_re) = array_of(key, v);
                name = "array";
            } else {
                name = v;
            }
        } else if (key == "q_im") pf.q_im = array_of(key, v);
        else if (key == "M_im") pf.M_im = array_of(key, v);
        else if (key == "spectrum") {
            const auto flat = array_of(key, v);
            if (flat.size() % 2 != 0)
                throw ArgumentError("'spectrum' needs (re, im) pairs");
            std::vector<std::complex<double>> s;
            for (std::size_t i = 0; i < flat.size(); i += 2) s.emplace_back(flat[i], flat[i + 1]);
            pf.spectrum = std::move(s);
        } else {
            throw ArgumentError("unknown key '" + key + "'");
        }
    }
    return pf;
}

[[nodiscard]] inline ProblemFile load_problem(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ArgumentError("cannot open problem file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_problem(ss.str(), path.parent_path());
}

/// Built-in coefficients: zero, const:c, cos[:a] (a cos x), sin[:a] (a sin x),
/// endpow:a:p (a (pi - x)^p, zero at x = pi).
[[nodiscard]] inline SampledFunction builtin_function(const std::string& spec, const Grid& g) {
    std::vector<std::string> parts;
    {
        std::string cur;
        for (char c : spec) {
            if (c == ':') {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        parts.push_back(cur);
    }
    const std::string& name = parts[0];
    auto num = [&](std::size_t i, double dflt) {
        return i < parts.size() ? detail::parse_double(parts[i], "'" + spec + "'") : dflt;
    };
    auto arity = [&](std::size_t lo, std::size_t hi) {
        if (parts.size() < lo || parts.size() > hi)
            throw ArgumentError("wrong number of parameters in '" + spec + "'");
    };
    if (name == "zero") {
        arity(1, 1);
        return SampledFunction(g);
    }
    if (name == "const") {
        arity(2, 2);
        return SampledFunction::constant(g, num(1, 0.0));
    }
    if (name == "cos" || name == "sin") {
        arity(1, 2);
        const double a = num(1, 1.0);
        const bool c = name == "cos";
        return SampledFunction::sample(g, [a, c](double x) { return cplx(a * (c ? std::cos(x) : std::sin(x))); });
    }
    if (name == "endpow") {
        arity(3, 3);
        const double a = num(1, 1.0), p = num(2, 0.0);
        return SampledFunction::sample(g, [a, p](double x) {
            return cplx(a * std::pow(std::numbers::pi - x, p));
        });
    }
    throw ArgumentError("unknown function '" + spec + "'");
}

namespace detail {
inline SampledFunction resolve(const std::string& name, const std::vector<double>& re,
                               const std::vector<double>& im, const Grid& g, const char* what) {
    if (name != "array") {
        if (!im.empty()) throw ArgumentError(std::string(what) + "_im given without a sample array");
        return builtin_function(name, g);
    }
    if (re.size() != g.size() || (!im.empty() && im.size() != g.size()))
        throw ArgumentError(std::string(what) + " array must have grid + 1 = " +
                            std::to_string(g.size()) + " entries");
    std::vector<cplx> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = cplx(re[i], im.empty() ? 0.0 : im[i]);
    return SampledFunction(g, std::move(v));
}
}  // namespace detail

/// Check the structural constraints on a parsed problem.
inline void validate(const ProblemFile& pf) {
    if (pf.grid < 64 || pf.grid % 2 != 0)
        throw ArgumentError("grid must be even and at least 64 (got " + std::to_string(pf.grid) + ")");
    if (pf.K == 0 || 4 * pf.K > pf.grid)
        throw ArgumentError("K must lie in [1, grid/4] (got " + std::to_string(pf.K) + ")");
    if (pf.Kv > 0 && 2 * pf.Kv > pf.grid)
        throw ArgumentError("Kv must not exceed grid/2");
    if (pf.threads == 0) throw ArgumentError("threads must be positive");
}

[[nodiscard]] inline SampledFunction resolve_q(const ProblemFile& pf) {
    return detail::resolve(pf.q, pf.q_re, pf.q_im, Grid(pf.grid), "q");
}

[[nodiscard]] inline SampledFunction resolve_M(const ProblemFile& pf) {
    return detail::resolve(pf.M, pf.M_re, pf.M_im, Grid(pf.grid), "M");
}

/// Eigenvalues from the `spectrum` array or from `spectrum_file` (columns
/// n, re_lambda, im_lambda, ... with a header row).
[[nodiscard]] inline std::optional<std::vector<cplx>> resolve_spectrum(const ProblemFile& pf) {
    if (pf.spectrum && !pf.spectrum_file.empty())
        throw ArgumentError("give either spectrum or spectrum_file, not both");
    if (pf.spectrum) return pf.spectrum;
    if (pf.spectrum_file.empty()) return std::nullopt;
    std::filesystem::path p(pf.spectrum_file);
    if (p.is_relative()) p = pf.base_dir / p;
    std::ifstream f(p);
    if (!f) throw ArgumentError("cannot open spectrum file " + p.string());
    std::vector<cplx> out;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (detail::trim(line).empty()) continue;
        const auto cols = detail::parse_array(line, p.string());
        if (cols.size() < 3) throw ArgumentError("spectrum file row with fewer than 3 columns");
        out.emplace_back(cols[1], cols[2]);
    }
    if (out.empty()) throw ArgumentError("spectrum file " + p.string() + " has no rows");
    return out;
}

namespace detail {
inline std::string fmt_num(double x) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return ec == std::errc{} ? std::string(buf, p) : std::string("nan");
}

inline void write_array(std::ostream& os, const std::string& key, const std::vector<double>& a) {
    os << key << " = [";
    for (std::size_t i = 0; i < a.size(); ++i) os << (i % 8 == 0 ? "\n    " : " ") << fmt_num(a[i]);
    os << " ]\n";
}
}  // namespace detail

/// Resolved configuration in the same syntax parse_problem reads.
[[nodiscard]] inline std::string to_text(const ProblemFile& pf) {
    std::ostringstream os;
    os << "grid = " << pf.grid << '\n';
    for (const auto* f : {&pf.q, &pf.M}) {
        const bool isq = f == &pf.q;
        if (!isq && !pf.M_given) continue;
        const std::string key = isq ? "q" : "M";
        if (*f == "array") {
            detail::write_array(os, key, isq ? pf.q_re : pf.M_re);
            const auto& im = isq ? pf.q_im : pf.M_im;
            if (!im.empty()) detail::write_array(os, key + "_im", im);
        } else {
            os << key << " = " << *f << '\n';
        }
    }
    os << "K = " << pf.K << '\n' << "Kv = " << pf.series_terms() << '\n';
    os << "seed = " << pf.seed << '\n' << "threads = " << pf.threads << '\n';
    detail::write_array(os, "eps", pf.eps);
    os << "shape = " << pf.shape << '\n' << "families = " << pf.families << '\n';
    os << "mode = " << pf.mode << '\n';
    if (pf.spectrum) {
        os << "spectrum = [";
        for (const auto& l : *pf.spectrum)
            os << "\n    " << detail::fmt_num(l.real()) << ' ' << detail::fmt_num(l.imag());
        os << " ]\n";
    }
    if (!pf.spectrum_file.empty()) {
        std::filesystem::path p(pf.spectrum_file);
        if (p.is_relative()) p = std::filesystem::absolute(pf.base_dir / p);
        os << "spectrum_file = " << p.string() << '\n';
    }
    return os.str();
}

}  // namespace convsl
