/// @brief experiment runner behind the qtdg CLI: convergence sweeps, space
/// comparisons, snapshots of the dominated regimes, CSV output.
#pragma once

#include <qtdg/assembly.hpp>
#include <qtdg/basis.hpp>
#include <qtdg/errors.hpp>
#include <qtdg/mesh.hpp>
#include <qtdg/problem.hpp>
#include <qtdg/solve.hpp>

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qtdg {

enum class GammaRule { fixed, eight_p_squared, table };

struct ExperimentConfig {
    std::string problem = "exp_diffusion";
    double nu = 0.1;
    SpaceKind space = SpaceKind::quasi_trefftz;
    std::vector<int> degrees{2};
    std::vector<int> levels{4, 8, 16, 32};
    int epsilon = -1;
    GammaRule gamma_rule = GammaRule::eight_p_squared;
    double gamma = 0.0;
    std::map<int, double> gamma_table;
    std::optional<int> quad_points;
    std::string output;
    bool timing = true;
    bool dar_norm = false;

    void validate() const {
        if (degrees.empty()) throw ContractError("no degrees given");
        for (int p : degrees)
            if (p < 0 || p > 10) throw ContractError("degrees must lie in 0..10");
        if (levels.empty()) throw ContractError("no mesh levels given");
        for (std::size_t k = 0; k < levels.size(); ++k) {
            if (levels[k] < 1) throw ContractError("mesh levels must be positive");
            if (k > 0 && levels[k] <= levels[k - 1]) throw ContractError("mesh levels must increase strictly");
        }
        if (epsilon < -1 || epsilon > 1) throw ContractError("epsilon must be -1, 0 or 1");
        if (gamma_rule == GammaRule::fixed && !(gamma > 0.0)) throw ContractError("fixed gamma must be positive");
        if (gamma_rule == GammaRule::table)
            for (int p : degrees)
                if (!gamma_table.count(p)) throw ContractError("gamma table has no entry for p=" + std::to_string(p));
        if (!(nu > 0.0)) throw ContractError("nu must be positive");
        builtin(problem, nu);
    }

    [[nodiscard]] double gamma_for(int p) const {
        switch (gamma_rule) {
            case GammaRule::fixed: return gamma;
            case GammaRule::eight_p_squared: return 8.0 * std::max(p, 1) * std::max(p, 1);
            case GammaRule::table: return gamma_table.at(p);
        }
        return gamma;
    }
};

inline std::string to_string(SpaceKind s) { return s == SpaceKind::quasi_trefftz ? "qt" : "full"; }

inline SpaceKind parse_space(const std::string& s) {
    if (s == "qt") return SpaceKind::quasi_trefftz;
    if (s == "full") return SpaceKind::full_polynomial;
    throw ParseError("space must be qt or full, got '" + s + "'");
}

/// Reads a JSON object with the ExperimentConfig keys. `gamma` is a number,
/// the string "8p2", or an object mapping degree to value.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    ExperimentConfig c;
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "problem") c.problem = val.get<std::string>();
            else if (key == "nu") c.nu = val.get<double>();
            else if (key == "space") c.space = parse_space(val.get<std::string>());
            else if (key == "degrees") c.degrees = val.get<std::vector<int>>();
            else if (key == "levels") c.levels = val.get<std::vector<int>>();
            else if (key == "epsilon") c.epsilon = val.get<int>();
            else if (key == "quad_order") c.quad_points = val.get<int>();
            else if (key == "output") c.output = val.get<std::string>();
            else if (key == "timing") c.timing = val.get<bool>();
            else if (key == "dar_norm") c.dar_norm = val.get<bool>();
            else if (key == "gamma") {
                if (val.is_number()) {
                    c.gamma_rule = GammaRule::fixed;
                    c.gamma = val.get<double>();
                } else if (val.is_string()) {
                    if (val.get<std::string>() != "8p2") throw ParseError("gamma string must be \"8p2\"");
                    c.gamma_rule = GammaRule::eight_p_squared;
                } else if (val.is_object()) {
                    c.gamma_rule = GammaRule::table;
                    for (const auto& [p, g] : val.items()) c.gamma_table[std::stoi(p)] = g.get<double>();
                } else {
                    throw ParseError("gamma must be a number, \"8p2\" or a table");
                }
            } else {
                throw ParseError("unknown config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("bad gamma table key: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
    try {
        return parse_config(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what());
    }
}

inline ExperimentConfig parse_config(const char* text) { return parse_config(std::string(text)); }

struct RunCell {
    SpaceKind space;
    int p;
    int n;
    double gamma;
    ErrorReport report;
    std::optional<Rates> rates;  // against the previous level of the same (space, p)
    double walltime = 0.0;
    std::vector<std::string> warnings;
};

struct RunRecord {
    ExperimentConfig config;
    std::vector<RunCell> cells;
};

namespace detail {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    }
}

}  // namespace detail

/// Everything one (space, p, n) solve produces; the mesh and bases are kept
/// so the solution can be evaluated afterwards.
struct SolveResult {
    Mesh mesh;
    BasisSet bases;
    DGSystem system;
    DiscreteSolution solution;
    std::vector<std::string> warnings;
};

[[nodiscard]] inline std::unique_ptr<SolveResult> solve_problem(const ProblemSpec& problem, SpaceKind space, int p,
                                                                int n, const DGParameters& params) {
    auto r = std::make_unique<SolveResult>();
    const int npts = params.quad_points.value_or(p + 1);
    r->mesh = detail::stage("mesh", [&] { return classify_boundary(generate_structured(problem.coeffs.dim, n), problem, npts); });
    r->warnings = detail::stage("validate", [&] { return validate_problem(problem, r->mesh, p).warnings; });
    r->bases = detail::stage("basis", [&] { return build_bases(r->mesh, problem, space, p); });
    r->system = detail::stage("assemble", [&] { return assemble(r->mesh, problem, r->bases, params); });
    r->solution = detail::stage("solve", [&] { return solve(r->system, r->mesh, r->bases); });
    return r;
}

[[nodiscard]] inline RunCell run_cell(const ProblemSpec& problem, const ExperimentConfig& cfg, SpaceKind space, int p,
                                      int n) {
    const auto t0 = std::chrono::steady_clock::now();
    DGParameters params{cfg.epsilon, cfg.gamma_for(p), cfg.quad_points};
    auto res = solve_problem(problem, space, p, n, params);
    RunCell cell{space, p, n, params.gamma, {}, std::nullopt, 0.0, res->warnings};
    cell.report = detail::stage("errors", [&] {
        std::optional<int> err_pts;
        if (cfg.quad_points) err_pts = std::max(*cfg.quad_points, p + 2);
        std::optional<DarNormData> dar;
        if (cfg.dar_norm) dar = DarNormData{&problem, params.gamma};
        return compute_errors(res->solution, problem.exact, err_pts, dar);
    });
    if (cfg.timing)
        cell.walltime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return cell;
}

namespace detail {

inline void attach_rates(std::vector<RunCell>& cells) {
    for (std::size_t k = 1; k < cells.size(); ++k) {
        const auto& prev = cells[k - 1];
        auto& cur = cells[k];
        if (prev.space != cur.space || prev.p != cur.p) continue;
        cur.rates = stage("rates", [&] { return convergence_rates({prev.report, cur.report}).front(); });
    }
}

}  // namespace detail

/// h-convergence sweep: every degree on every level, in config order.
[[nodiscard]] inline RunRecord run(const ExperimentConfig& cfg) {
    detail::stage("config", [&] { cfg.validate(); return 0; });
    const ProblemSpec problem = detail::stage("problem", [&] { return builtin(cfg.problem, cfg.nu); });
    RunRecord rec{cfg, {}};
    for (int p : cfg.degrees)
        for (int n : cfg.levels) rec.cells.push_back(run_cell(problem, cfg, cfg.space, p, n));
    detail::attach_rates(rec.cells);
    return rec;
}

/// Same sweep in the quasi-Trefftz and the full polynomial space.
[[nodiscard]] inline RunRecord compare_spaces(const ExperimentConfig& cfg) {
    detail::stage("config", [&] { cfg.validate(); return 0; });
    const ProblemSpec problem = detail::stage("problem", [&] { return builtin(cfg.problem, cfg.nu); });
    RunRecord rec{cfg, {}};
    for (SpaceKind s : {SpaceKind::quasi_trefftz, SpaceKind::full_polynomial})
        for (int p : cfg.degrees)
            for (int n : cfg.levels) rec.cells.push_back(run_cell(problem, cfg, s, p, n));
    detail::attach_rates(rec.cells);
    return rec;
}

inline const char* kCsvHeader =
    "space,p,n,h_nominal,h_actual,dofs,err_L2,err_H1,err_Linf,rate_L2,rate_H1,rate_Linf,walltime_s";

namespace detail {

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10e", v);
    return buf;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const RunRecord& rec) {
    os << kCsvHeader << '\n';
    for (const auto& c : rec.cells) {
        const auto& r = c.report;
        os << to_string(c.space) << ',' << c.p << ',' << c.n << ',' << (r.h_nominal ? detail::fmt(*r.h_nominal) : "")
           << ',' << detail::fmt(r.h_actual) << ',' << r.dofs << ',' << detail::fmt(r.err_L2) << ','
           << detail::fmt(r.err_H1) << ',' << detail::fmt(r.err_Linf) << ',';
        if (c.rates)
            os << detail::fmt(c.rates->L2) << ',' << detail::fmt(c.rates->H1) << ',' << detail::fmt(c.rates->Linf);
        else
            os << ",,";
        os << ',' << detail::fmt(c.walltime) << '\n';
    }
}

// --- snapshots ----------------------------------------------------------------------

struct SnapshotConfig {
    std::string problem = "advdom_neumann";
    double nu = 0.1;
    std::optional<double> gamma;  // default per problem and nu
    int p = 3;
    int n = 16;
    int epsilon = -1;
};

/// Penalty used for the dominated-regime pictures, keyed by problem and nu.
[[nodiscard]] inline std::optional<double> snapshot_gamma(const std::string& problem, double nu) {
    static const std::map<std::string, std::map<int, double>> table{
        {"advdom_neumann", {{1, 10.0}, {2, 1.0}, {3, 1e-1}, {4, 1e-2}}},
        {"advdom_dirichlet", {{1, 10.0}, {2, 1e-1}, {3, 1e-2}, {4, 1e-3}}},
        {"reactdom", {{1, 10.0}, {2, 1.0}, {3, 1e-1}, {4, 1e-2}}},
    };
    const auto it = table.find(problem);
    if (it == table.end()) return std::nullopt;
    const double e = -std::log10(nu);
    const int k = static_cast<int>(std::lround(e));
    if (std::abs(e - k) > 1e-9) return std::nullopt;
    const auto jt = it->second.find(k);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

/// Element containing x (first match in element order), or -1.
[[nodiscard]] inline int locate(const Mesh& mesh, const Vec& x) {
    constexpr double tol = 1e-12;
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const auto pts = mesh.element_points(static_cast<int>(t));
        if (mesh.dim() == 1) {
            if (x[0] >= std::min(pts[0][0], pts[1][0]) - tol && x[0] <= std::max(pts[0][0], pts[1][0]) + tol)
                return static_cast<int>(t);
            continue;
        }
        Mat J(2, 2);
        J.col(0) = pts[1] - pts[0];
        J.col(1) = pts[2] - pts[0];
        const Vec l = J.inverse() * (x - pts[0]);
        if (l[0] >= -tol && l[1] >= -tol && l[0] + l[1] <= 1.0 + tol) return static_cast<int>(t);
    }
    return -1;
}

inline constexpr int kSnapshotGrid = 101;

/// u_h on the 101 x 101 grid of the unit square, row-major: entry
/// (j * 101 + i) is at x = (i/100, j/100).
[[nodiscard]] inline std::vector<double> snapshot(const SnapshotConfig& cfg) {
    const ProblemSpec problem = detail::stage("problem", [&] { return builtin(cfg.problem, cfg.nu); });
    std::optional<double> g = cfg.gamma ? cfg.gamma : snapshot_gamma(cfg.problem, cfg.nu);
    if (!g) throw StageError("config", ContractError("no default gamma for this problem and nu; pass one"));
    DGParameters params{cfg.epsilon, *g, std::nullopt};
    detail::stage("config", [&] { params.validate(); return 0; });
    auto res = solve_problem(problem, SpaceKind::quasi_trefftz, cfg.p, cfg.n, params);
    std::vector<LocalPolynomial> local;
    for (std::size_t t = 0; t < res->mesh.num_elements(); ++t) local.push_back(res->solution.local(t));
    std::vector<double> out;
    out.reserve(kSnapshotGrid * kSnapshotGrid);
    const double step = 1.0 / (kSnapshotGrid - 1);
    for (int j = 0; j < kSnapshotGrid; ++j) {
        for (int i = 0; i < kSnapshotGrid; ++i) {
            const Vec x = make_vec({i * step, j * step});
            const int t = locate(res->mesh, x);
            out.push_back(t < 0 ? std::nan("") : local[static_cast<std::size_t>(t)].value(x));
        }
    }
    return out;
}

}  // namespace qtdg
