/// @brief interior-penalty DG assembly with upwind advection.
///
/// A(i, j) = a_h(phi_j, phi_i): columns are trial functions, rows test functions.
/// Facet integrals are evaluated once per facet and scattered to both sides.
#pragma once

#include <qtdg/basis.hpp>
#include <qtdg/errors.hpp>
#include <qtdg/mesh.hpp>
#include <qtdg/parallel.hpp>
#include <qtdg/problem.hpp>
#include <qtdg/quadrature.hpp>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

namespace qtdg {

struct DGParameters {
    int epsilon = -1;  // -1 SIPG, 0 IIPG, +1 NIPG
    double gamma = 1.0;
    /// Gauss points per direction; default p+1
    std::optional<int> quad_points;

    void validate() const {
        if (epsilon < -1 || epsilon > 1) throw ContractError("epsilon must be -1, 0 or +1");
        if (!(gamma > 0.0)) throw ContractError("gamma must be positive");
        if (quad_points && (*quad_points < 1 || *quad_points > kMaxGaussPoints))
            throw QuadratureUnavailable("quad_points outside 1..30");
    }
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct DGSystem {
    SparseMatrix A;
    Eigen::VectorXd b;
    /// offsets[t] .. offsets[t+1] are the dofs of element t
    std::vector<Eigen::Index> offsets;

    [[nodiscard]] Eigen::Index dofs() const { return offsets.empty() ? 0 : offsets.back(); }
};

/// Per-element bases for a whole mesh, in element order.
using BasisSet = std::vector<LocalBasis>;

[[nodiscard]] inline BasisSet build_bases(const Mesh& mesh, const ProblemSpec& problem, SpaceKind kind, int p) {
    BasisSet bases(mesh.num_elements());
    parallel_for(mesh.num_elements(), [&](std::size_t t) {
        const auto& el = mesh.elements()[t];
        bases[t] = kind == SpaceKind::quasi_trefftz ? build_qt_basis(el, problem.coeffs, p)
                                                    : build_full_poly_basis(el, mesh.dim(), p);
    });
    return bases;
}

[[nodiscard]] inline int max_degree(const BasisSet& bases) {
    int p = 0;
    for (const auto& b : bases) p = std::max(p, b.degree());
    return p;
}

[[nodiscard]] inline int quadrature_points(const BasisSet& bases, const DGParameters& params) {
    return params.quad_points.value_or(max_degree(bases) + 1);
}

namespace detail {

struct LocalBlock {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

inline LocalBlock volume_block(const Mesh& mesh, const ProblemSpec& problem, const LocalBasis& basis, int t,
                               int npts) {
    const auto& c = problem.coeffs;
    const auto n = static_cast<Eigen::Index>(basis.size());
    LocalBlock out{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
    const auto pts = mesh.element_points(t);
    const auto rule = map_to_simplex(reference_simplex_rule(mesh.dim(), npts), pts);
    const bool adv = c.has_advection();
    const bool react = c.has_reaction();
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const Vec& x = rule.nodes[q];
        const double w = rule.weights[q];
        const auto bv = basis.evaluate(x);
        const Eigen::MatrixXd KG = bv.gradients * c.K_at(x).transpose();  // row j: (K grad phi_j)^T
        out.A.noalias() += w * (bv.gradients * KG.transpose());
        if (adv) out.A.noalias() -= w * ((bv.gradients * c.beta_at(x)) * bv.values.transpose());
        if (react) out.A.noalias() += (w * c.sigma_at(x)) * (bv.values * bv.values.transpose());
        if (problem.source) out.b += (w * problem.source(x)) * bv.values;
    }
    return out;
}

/// Interior facet: block over [side-1 dofs, side-2 dofs].
inline Eigen::MatrixXd interior_block(const Mesh& mesh, const ProblemSpec& problem, const BasisSet& bases, int f,
                                      const DGParameters& prm, int npts) {
    const auto& c = problem.coeffs;
    const auto& fc = mesh.facets()[static_cast<std::size_t>(f)];
    const auto& b1 = bases[static_cast<std::size_t>(fc.elements[0])];
    const auto& b2 = bases[static_cast<std::size_t>(fc.elements[1])];
    const auto n1 = static_cast<Eigen::Index>(b1.size());
    const auto n2 = static_cast<Eigen::Index>(b2.size());
    const Eigen::Index n = n1 + n2;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    const auto rule = map_to_facet(gauss_legendre(npts), mesh.facet_points(f));
    const Vec& nrm = fc.normal;
    const double pen = prm.gamma / fc.diameter;
    const double eps = prm.epsilon;
    const bool adv = c.has_advection();
    Eigen::VectorXd val(n), jump(n), flux(n);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const Vec& x = rule.nodes[q];
        const double w = rule.weights[q];
        const auto v1 = b1.evaluate(x);
        const auto v2 = b2.evaluate(x);
        // each side with its own coefficient trace
        const Mat K1 = c.K_at(x);
        const Mat K2 = K1;
        val << v1.values, v2.values;
        jump << v1.values, -v2.values;  // [phi] = jump * n
        flux << v1.gradients * (K1.transpose() * nrm), v2.gradients * (K2.transpose() * nrm);  // K grad phi . n
        // -{K grad w}.[v] + eps [w].{K grad v} + pen [w].[v]
        A.noalias() += w * (-0.5 * jump * flux.transpose() + 0.5 * eps * flux * jump.transpose() +
                            pen * jump * jump.transpose());
        if (adv) {
            const double bn = c.beta_at(x).dot(nrm);
            // {beta w}.[v] + 1/2 |beta.n| [w].[v]
            A.noalias() += w * (0.5 * bn * jump * val.transpose() + 0.5 * std::abs(bn) * jump * jump.transpose());
        }
    }
    return A;
}

inline LocalBlock boundary_block(const Mesh& mesh, const ProblemSpec& problem, const BasisSet& bases, int f,
                                 const DGParameters& prm, int npts) {
    const auto& c = problem.coeffs;
    const auto& fc = mesh.facets()[static_cast<std::size_t>(f)];
    const auto& b = bases[static_cast<std::size_t>(fc.elements[0])];
    const auto n = static_cast<Eigen::Index>(b.size());
    LocalBlock out{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
    const auto rule = map_to_facet(gauss_legendre(npts), mesh.facet_points(f));
    const Vec& nrm = fc.normal;
    const bool adv = c.has_advection();
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const Vec& x = rule.nodes[q];
        const double w = rule.weights[q];
        const auto bv = b.evaluate(x);
        const double bn = adv ? c.beta_at(x).dot(nrm) : 0.0;
        if (fc.kind == FacetKind::dirichlet) {
            const Eigen::VectorXd flux = bv.gradients * (c.K_at(x).transpose() * nrm);
            const double pen = prm.gamma / fc.diameter;
            out.A.noalias() += w * (-bv.values * flux.transpose() + prm.epsilon * flux * bv.values.transpose() +
                                    pen * bv.values * bv.values.transpose());
            const double gd = problem.boundary.g_D(x);
            out.b += (w * gd) * (prm.epsilon * flux + (pen - bn) * bv.values);
        } else {
            if (adv) out.A.noalias() += (w * bn) * (bv.values * bv.values.transpose());
            out.b -= (w * problem.boundary.g_N(x, nrm)) * bv.values;
        }
    }
    return out;
}

}  // namespace detail

/// Assembles A and b. Boundary facets must be classified.
[[nodiscard]] inline DGSystem assemble(const Mesh& mesh, const ProblemSpec& problem, const BasisSet& bases,
                                       const DGParameters& params) {
    params.validate();
    if (bases.size() != mesh.num_elements()) throw ContractError("one basis per element required");
    for (std::size_t f = 0; f < mesh.num_facets(); ++f)
        if (mesh.facets()[f].kind == FacetKind::unclassified)
            throw UnclassifiedFacet("boundary facet " + std::to_string(f) + " has no Dirichlet/Neumann kind");
    const int npts = quadrature_points(bases, params);
    gauss_legendre(npts);  // surfaces QuadratureUnavailable before threading

    DGSystem sys;
    sys.offsets.resize(mesh.num_elements() + 1, 0);
    for (std::size_t t = 0; t < mesh.num_elements(); ++t)
        sys.offsets[t + 1] = sys.offsets[t] + static_cast<Eigen::Index>(bases[t].size());

    std::vector<detail::LocalBlock> vol(mesh.num_elements());
    parallel_for(mesh.num_elements(), [&](std::size_t t) {
        vol[t] = detail::volume_block(mesh, problem, bases[t], static_cast<int>(t), npts);
    });
    std::vector<detail::LocalBlock> fac(mesh.num_facets());
    parallel_for(mesh.num_facets(), [&](std::size_t f) {
        const int fi = static_cast<int>(f);
        if (mesh.facets()[f].is_boundary())
            fac[f] = detail::boundary_block(mesh, problem, bases, fi, params, npts);
        else
            fac[f].A = detail::interior_block(mesh, problem, bases, fi, params, npts);
    });

    // serial scatter in fixed order: elements, then facets
    std::vector<Eigen::Triplet<double, int>> trip;
    sys.b = Eigen::VectorXd::Zero(sys.dofs());
    auto put = [&](const Eigen::MatrixXd& blk, const std::vector<Eigen::Index>& dofs) {
        for (Eigen::Index j = 0; j < blk.cols(); ++j)
            for (Eigen::Index i = 0; i < blk.rows(); ++i)
                trip.emplace_back(static_cast<int>(dofs[static_cast<std::size_t>(i)]),
                                  static_cast<int>(dofs[static_cast<std::size_t>(j)]), blk(i, j));
    };
    auto dofs_of = [&](std::initializer_list<int> elems) {
        std::vector<Eigen::Index> d;
        for (int t : elems)
            for (Eigen::Index k = sys.offsets[static_cast<std::size_t>(t)]; k < sys.offsets[static_cast<std::size_t>(t) + 1];
                 ++k)
                d.push_back(k);
        return d;
    };
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const auto d = dofs_of({static_cast<int>(t)});
        put(vol[t].A, d);
        sys.b.segment(sys.offsets[t], vol[t].b.size()) += vol[t].b;
    }
    for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
        const auto& fc = mesh.facets()[f];
        if (fc.is_boundary()) {
            const auto d = dofs_of({fc.elements[0]});
            put(fac[f].A, d);
            sys.b.segment(d.front(), fac[f].b.size()) += fac[f].b;
        } else {
            put(fac[f].A, dofs_of({fc.elements[0], fc.elements[1]}));
        }
    }
    sys.A.resize(sys.dofs(), sys.dofs());
    sys.A.setFromTriplets(trip.begin(), trip.end());
    sys.A.makeCompressed();
    return sys;
}

/// max over interior facet nodes of the discrepancies in
///   {beta phi}_upw . n = {beta phi} . n + 1/2 |beta . n| [phi] . n
///   1/2 {beta} . [phi^2] = {beta phi} . [phi]
/// for random elementwise polynomials phi from the given bases.
[[nodiscard]] inline double upwind_identity_check(const Mesh& mesh, const ProblemSpec& problem, const BasisSet& bases,
                                                  unsigned seed = 7, int npts = 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<LocalPolynomial> phi;
    for (const auto& b : bases) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(b.size()));
        for (auto& v : c) v = U(rng);
        phi.push_back(b.combine(c));
    }
    if (npts <= 0) npts = max_degree(bases) + 1;
    double worst = 0.0;
    for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
        const auto& fc = mesh.facets()[f];
        if (fc.is_boundary()) continue;
        const auto rule = map_to_facet(gauss_legendre(npts), mesh.facet_points(static_cast<int>(f)));
        for (const auto& x : rule.nodes) {
            const Vec beta = problem.coeffs.beta_at(x);
            const double bn = beta.dot(fc.normal);
            const double p1 = phi[static_cast<std::size_t>(fc.elements[0])].value(x);
            const double p2 = phi[static_cast<std::size_t>(fc.elements[1])].value(x);
            const double upw = bn > 0.0 ? bn * p1 : bn * p2;
            const double avg = 0.5 * bn * (p1 + p2) + 0.5 * std::abs(bn) * (p1 - p2);
            worst = std::max(worst, std::abs(upw - avg));
            const double lhs = 0.5 * bn * (p1 * p1 - p2 * p2);
            const double rhs = 0.5 * bn * (p1 + p2) * (p1 - p2);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

namespace detail {

inline double k_magnitude(const ProblemSpec& problem) {
    const int d = problem.coeffs.dim;
    constexpr int m = 16;
    double kmax = 0.0;
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < (d == 1 ? 1 : m); ++b) {
            Vec x(d);
            x[0] = (a + 0.5) / m;
            if (d > 1) x[1] = (b + 0.5) / m;
            for (int k = 2; k < d; ++k) x[k] = 0.5;
            kmax = std::max(kmax, problem.coeffs.K_at(x).cwiseAbs().maxCoeff());
        }
    }
    return kmax;
}

}  // namespace detail

/// 8p^2 scaled by max|K| of the problem relative to that of exp_diffusion,
/// both sampled on a 16x16 grid of cell midpoints. Returned for every epsilon.
[[nodiscard]] inline double recommend_gamma(int p, const ProblemSpec& problem, int /*epsilon*/ = -1) {
    static const double reference = detail::k_magnitude(builtin("exp_diffusion"));
    const double pp = std::max(p, 1);
    return 8.0 * pp * pp * detail::k_magnitude(problem) / reference;
}

/// "row col value" per nonzero, 0-based, column-major order
inline void write_coo(std::ostream& os, const SparseMatrix& A) {
    const auto old = os.precision(17);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    os.precision(old);
}

inline void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
    const auto old = os.precision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i) os << v[i] << '\n';
    os.precision(old);
}

}  // namespace qtdg
