/// @brief sparse direct solve, error norms and convergence rates
#pragma once

#include <qtdg/assembly.hpp>
#include <qtdg/basis.hpp>
#include <qtdg/errors.hpp>
#include <qtdg/mesh.hpp>
#include <qtdg/problem.hpp>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <vector>

namespace qtdg {

/// Coefficient vector over global dofs. Holds non-owning references to the
/// mesh and bases it was computed on.
struct DiscreteSolution {
    Eigen::VectorXd coeffs;
    const Mesh* mesh = nullptr;
    const BasisSet* bases = nullptr;
    std::vector<Eigen::Index> offsets;
    double residual = 0.0;  // ||Ax - b||_inf / ||b||_inf

    [[nodiscard]] LocalPolynomial local(std::size_t t) const {
        const auto& b = (*bases)[t];
        return b.combine(coeffs.segment(offsets[t], static_cast<Eigen::Index>(b.size())));
    }
};

/// Direct solve by sparse LU with COLAMD ordering.
[[nodiscard]] inline Eigen::VectorXd solve_linear(const SparseMatrix& A, const Eigen::VectorXd& b,
                                                  double* residual = nullptr) {
    if (A.rows() != A.cols() || A.rows() != b.size()) throw ContractError("square system required");
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) throw SingularMatrix("LU factorization failed: " + lu.lastErrorMessage());
    Eigen::VectorXd x = lu.solve(b);
    if (lu.info() != Eigen::Success || !x.allFinite()) throw SingularMatrix("LU solve produced non-finite values");
    const double bnorm = b.lpNorm<Eigen::Infinity>();
    const double r = (A * x - b).lpNorm<Eigen::Infinity>() / (bnorm > 0.0 ? bnorm : 1.0);
    // a near-zero pivot shows up as a residual far above round-off
    if (!(r <= 1e-6)) throw SingularMatrix("relative residual " + std::to_string(r) + " after direct solve");
    if (residual) *residual = r;
    return x;
}

[[nodiscard]] inline DiscreteSolution solve(const DGSystem& sys, const Mesh& mesh, const BasisSet& bases) {
    DiscreteSolution s;
    s.coeffs = solve_linear(sys.A, sys.b, &s.residual);
    s.mesh = &mesh;
    s.bases = &bases;
    s.offsets = sys.offsets;
    return s;
}

struct ErrorReport {
    double err_L2 = 0.0;
    double err_H1 = 0.0;  // full norm
    double err_H1_semi = 0.0;
    double err_Linf = 0.0;  // max over quadrature nodes and vertices
    std::optional<double> err_dar;
    Eigen::Index dofs = 0;
    std::optional<double> h_nominal;
    double h_actual = 0.0;
};

/// Data for the dar-norm: problem coefficients and penalty.
struct DarNormData {
    const ProblemSpec* problem;
    double gamma;
};

/// Errors against the exact solution by element quadrature with `npts` Gauss
/// points per direction (default p+2).
[[nodiscard]] inline ErrorReport compute_errors(const DiscreteSolution& sol, const std::optional<ScalarField>& exact,
                                                std::optional<int> npts = std::nullopt,
                                                std::optional<DarNormData> dar = std::nullopt) {
    if (!exact) throw MissingExactSolution("error norms need an exact solution");
    const Mesh& mesh = *sol.mesh;
    const int n = npts.value_or(max_degree(*sol.bases) + 2);
    const auto& ref = reference_simplex_rule(mesh.dim(), n);
    const std::size_t ne = mesh.num_elements();

    struct Local {
        double l2 = 0, semi = 0, linf = 0, kgrad = 0;
    };
    std::vector<Local> loc(ne);
    std::vector<LocalPolynomial> uh(ne);
    for (std::size_t t = 0; t < ne; ++t) uh[t] = sol.local(t);
    parallel_for(ne, [&](std::size_t t) {
        const auto pts = mesh.element_points(static_cast<int>(t));
        const auto rule = map_to_simplex(ref, pts);
        Local& L = loc[t];
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Vec& x = rule.nodes[q];
            const double e = exact->operator()(x) - uh[t].value(x);
            const Vec ge = exact->gradient(x) - uh[t].gradient(x);
            L.l2 += rule.weights[q] * e * e;
            L.semi += rule.weights[q] * ge.squaredNorm();
            L.linf = std::max(L.linf, std::abs(e));
            if (dar) L.kgrad += rule.weights[q] * ge.dot(dar->problem->coeffs.K_at(x) * ge);
        }
        for (const auto& x : pts) L.linf = std::max(L.linf, std::abs(exact->operator()(x) - uh[t].value(x)));
    });

    ErrorReport r;
    double l2 = 0, semi = 0, kgrad = 0;
    for (const auto& L : loc) {  // fixed-order reduction
        l2 += L.l2;
        semi += L.semi;
        kgrad += L.kgrad;
        r.err_Linf = std::max(r.err_Linf, L.linf);
    }
    r.err_L2 = std::sqrt(l2);
    r.err_H1_semi = std::sqrt(semi);
    r.err_H1 = std::sqrt(l2 + semi);
    r.dofs = sol.offsets.empty() ? 0 : sol.offsets.back();
    r.h_nominal = mesh.h_nominal();
    r.h_actual = mesh.meshsize();

    if (dar) {
        // K-weighted gradients + L2 + penalty-weighted jumps + 1/2 |beta.n| jumps
        const auto& c = dar->problem->coeffs;
        const auto& gl = gauss_legendre(n);
        double facet_sum = 0.0;
        for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
            const auto& fc = mesh.facets()[f];
            const auto rule = map_to_facet(gl, mesh.facet_points(static_cast<int>(f)));
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const Vec& x = rule.nodes[q];
                const double u = exact->operator()(x);
                const double e1 = u - uh[static_cast<std::size_t>(fc.elements[0])].value(x);
                const double jump = fc.is_boundary() ? e1 : e1 - (u - uh[static_cast<std::size_t>(fc.elements[1])].value(x));
                double weight = 0.5 * std::abs(c.beta_at(x).dot(fc.normal));
                if (!fc.is_boundary() || fc.kind == FacetKind::dirichlet) weight += dar->gamma / fc.diameter;
                facet_sum += rule.weights[q] * weight * jump * jump;
            }
        }
        r.err_dar = std::sqrt(kgrad + l2 + facet_sum);
    }
    return r;
}

struct Rates {
    double L2, H1, Linf;
};

/// Rates between consecutive levels: log(e_coarse/e_fine) / log(h_coarse/h_fine).
[[nodiscard]] inline std::vector<Rates> convergence_rates(const std::vector<ErrorReport>& reports) {
    if (reports.size() < 2) throw ContractError("rates need at least two levels");
    std::vector<Rates> out;
    for (std::size_t k = 1; k < reports.size(); ++k) {
        const auto& c = reports[k - 1];
        const auto& f = reports[k];
        if (!(f.h_actual < c.h_actual)) throw NonMonotoneH("h_actual must decrease strictly between levels");
        const double lh = std::log(c.h_actual / f.h_actual);
        out.push_back({std::log(c.err_L2 / f.err_L2) / lh, std::log(c.err_H1 / f.err_H1) / lh,
                       std::log(c.err_Linf / f.err_Linf) / lh});
    }
    return out;
}

}  // namespace qtdg
