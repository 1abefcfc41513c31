/// @brief boundary-value problems for div(-K grad u + beta u) + sigma u = f:
/// coefficient fields with exact derivative oracles, boundary data, the
/// builtin problem registry, problem validation and boundary classification.
#pragma once

#include <qtdg/errors.hpp>
#include <qtdg/mesh.hpp>
#include <qtdg/multiindex.hpp>
#include <qtdg/quadrature.hpp>
#include <qtdg/types.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qtdg {

/// declared smoothness of closed-form analytic fields
inline constexpr int kAnalyticOrder = 20;

/// Scalar function of position together with an exact oracle for D^l f(x).
class ScalarField {
  public:
    using Oracle = std::function<double(const MultiIndex&, const Vec&)>;

    ScalarField() = default;
    ScalarField(int dim, Oracle oracle, int max_order = kAnalyticOrder, bool identically_zero = false)
        : dim_(dim), max_order_(max_order), zero_(identically_zero), oracle_(std::move(oracle)) {}

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int max_order() const noexcept { return max_order_; }
    /// true when declared identically zero (not detected numerically)
    [[nodiscard]] bool is_zero() const noexcept { return zero_; }

    [[nodiscard]] double operator()(const Vec& x) const { return derivative(MultiIndex(dim_), x); }

    [[nodiscard]] double derivative(const MultiIndex& l, const Vec& x) const {
        if (l.order() > max_order_)
            throw OrderTooHigh("derivative of order " + std::to_string(l.order()) + " requested, field supports " +
                               std::to_string(max_order_));
        if (zero_) return 0.0;
        return oracle_(l, x);
    }

    [[nodiscard]] Vec gradient(const Vec& x) const {
        Vec g(dim_);
        for (int j = 0; j < dim_; ++j) g[j] = derivative(MultiIndex::unit(dim_, j), x);
        return g;
    }

    /// same field with a lowered declared order
    [[nodiscard]] ScalarField truncated(int order) const {
        ScalarField f = *this;
        f.max_order_ = std::min(max_order_, order);
        return f;
    }

    // --- closed-form builders ------------------------------------------------

    static ScalarField zero(int dim) {
        return {dim, [](const MultiIndex&, const Vec&) { return 0.0; }, kAnalyticOrder, true};
    }

    static ScalarField constant(int dim, double c) {
        if (c == 0.0) return zero(dim);
        return {dim, [c](const MultiIndex& l, const Vec&) { return l.order() == 0 ? c : 0.0; }};
    }

    /// c0 + g . x
    static ScalarField affine(double c0, const Vec& g) {
        const int dim = static_cast<int>(g.size());
        return {dim, [c0, g](const MultiIndex& l, const Vec& x) {
                    const int r = l.order();
                    if (r == 0) return c0 + g.dot(x);
                    if (r == 1)
                        for (int j = 0; j < g.size(); ++j)
                            if (l[j] == 1) return g[j];
                    return 0.0;
                }};
    }

    /// s * exp(c0 + a . x); D^l = a^l f
    static ScalarField exp_affine(double s, double c0, const Vec& a) {
        const int dim = static_cast<int>(a.size());
        return {dim, [s, c0, a](const MultiIndex& l, const Vec& x) {
                    double pw = 1.0;
                    for (int j = 0; j < a.size(); ++j) pw *= std::pow(a[j], l[j]);
                    return s * pw * std::exp(c0 + a.dot(x));
                }};
    }

    /// s / (c0 + a . x); D^l = s (-1)^|l| |l|! a^l / (c0 + a . x)^(|l|+1)
    static ScalarField reciprocal_affine(double s, double c0, const Vec& a) {
        const int dim = static_cast<int>(a.size());
        return {dim, [s, c0, a](const MultiIndex& l, const Vec& x) {
                    const int r = l.order();
                    double pw = 1.0;
                    for (int j = 0; j < a.size(); ++j) pw *= std::pow(a[j], l[j]);
                    const double base = c0 + a.dot(x);
                    const double sign = (r % 2) ? -1.0 : 1.0;
                    return s * sign * static_cast<double>(factorial(r)) * pw / std::pow(base, r + 1);
                }};
    }

    /// s / (1 + |x|^2). Derivatives from the Leibniz rule applied to q f = s,
    /// where q = 1 + |x|^2 has only D^0, D^{e_j}, D^{2e_j} nonzero.
    static ScalarField inverse_quadratic(int dim, double s) {
        return {dim, [s, dim](const MultiIndex& l, const Vec& x) {
                    const double q = 1.0 + x.squaredNorm();
                    // dense table over the box {m <= l}
                    std::array<int, kMaxDim> stride{};
                    std::size_t size = 1;
                    for (int j = 0; j < dim; ++j) {
                        stride[static_cast<std::size_t>(j)] = static_cast<int>(size);
                        size *= static_cast<std::size_t>(l[j] + 1);
                    }
                    std::vector<double> table(size, 0.0);
                    for (std::size_t flat = 0; flat < size; ++flat) {
                        MultiIndex m(dim);
                        std::size_t rem = flat;
                        for (int j = 0; j < dim; ++j) {
                            m.set(j, static_cast<int>(rem % static_cast<std::size_t>(l[j] + 1)));
                            rem /= static_cast<std::size_t>(l[j] + 1);
                        }
                        if (m.order() == 0) {
                            table[flat] = s / q;
                            continue;
                        }
                        double acc = 0.0;
                        for (int j = 0; j < dim; ++j) {
                            const int mj = m[j];
                            const auto st = static_cast<std::size_t>(stride[static_cast<std::size_t>(j)]);
                            if (mj >= 1) acc += mj * 2.0 * x[j] * table[flat - st];
                            if (mj >= 2) acc += mj * (mj - 1.0) * table[flat - 2 * st];
                        }
                        table[flat] = -acc / q;
                    }
                    return table.back();
                }};
    }

    /// polynomial sum_k c_k x^k (monomials about the origin)
    static ScalarField polynomial(int dim, std::vector<std::pair<MultiIndex, double>> terms) {
        return {dim, [terms = std::move(terms)](const MultiIndex& l, const Vec& x) {
                    double v = 0.0;
                    for (const auto& [k, c] : terms) {
                        if (!l.leq(k)) continue;
                        double t = c;
                        for (int j = 0; j < k.dim(); ++j) {
                            // falling factorial k_j (k_j-1) ... (k_j-l_j+1)
                            for (int r = 0; r < l[j]; ++r) t *= (k[j] - r);
                            t *= std::pow(x[j], k[j] - l[j]);
                        }
                        v += t;
                    }
                    return v;
                }};
    }

    friend ScalarField operator+(const ScalarField& f, const ScalarField& g) {
        if (f.is_zero()) return g;
        if (g.is_zero()) return f;
        return {f.dim(), [f, g](const MultiIndex& l, const Vec& x) { return f.derivative(l, x) + g.derivative(l, x); },
                std::min(f.max_order(), g.max_order())};
    }

    friend ScalarField operator*(double c, const ScalarField& f) {
        if (c == 0.0 || f.is_zero()) return zero(f.dim());
        return {f.dim(), [c, f](const MultiIndex& l, const Vec& x) { return c * f.derivative(l, x); }, f.max_order()};
    }

    /// f g with D^i(fg) = sum_{l <= i} binom(i, l) D^l f D^{i-l} g
    friend ScalarField operator*(const ScalarField& f, const ScalarField& g) {
        if (f.is_zero() || g.is_zero()) return zero(f.dim());
        return {f.dim(),
                [f, g](const MultiIndex& i, const Vec& x) {
                    double v = 0.0;
                    for (const auto& l : enumerate_up_to(i.dim(), i.order())) {
                        if (!l.leq(i)) continue;
                        v += static_cast<double>(binomial(i, l)) * f.derivative(l, x) * g.derivative(i - l, x);
                    }
                    return v;
                },
                std::min(f.max_order(), g.max_order())};
    }

  private:
    int dim_ = 0;
    int max_order_ = kAnalyticOrder;
    bool zero_ = false;
    Oracle oracle_;
};

/// K (d x d), beta (d), sigma with exact derivative oracles.
struct CoefficientField {
    int dim = 0;
    std::vector<ScalarField> K;     // row-major d*d
    std::vector<ScalarField> beta;  // d
    ScalarField sigma;

    [[nodiscard]] const ScalarField& K_entry(int j, int m) const { return K[static_cast<std::size_t>(j * dim + m)]; }

    [[nodiscard]] Mat K_at(const Vec& x) const {
        Mat k(dim, dim);
        for (int j = 0; j < dim; ++j)
            for (int m = 0; m < dim; ++m) k(j, m) = K_entry(j, m)(x);
        return k;
    }

    [[nodiscard]] Vec beta_at(const Vec& x) const {
        Vec b(dim);
        for (int j = 0; j < dim; ++j) b[j] = beta[static_cast<std::size_t>(j)](x);
        return b;
    }

    [[nodiscard]] double sigma_at(const Vec& x) const { return sigma(x); }

    [[nodiscard]] double div_beta(const Vec& x) const {
        double s = 0.0;
        for (int j = 0; j < dim; ++j) s += beta[static_cast<std::size_t>(j)].derivative(MultiIndex::unit(dim, j), x);
        return s;
    }

    [[nodiscard]] bool has_advection() const {
        for (const auto& b : beta)
            if (!b.is_zero()) return true;
        return false;
    }

    [[nodiscard]] bool has_reaction() const { return !sigma.is_zero(); }

    /// scalar multiple of the identity: K = k(x) Id
    static std::vector<ScalarField> isotropic(int dim, const ScalarField& k) {
        std::vector<ScalarField> out;
        for (int j = 0; j < dim; ++j)
            for (int m = 0; m < dim; ++m) out.push_back(j == m ? k : ScalarField::zero(dim));
        return out;
    }
};

enum class BoundaryMode {
    all_dirichlet,   // Dirichlet on every boundary facet
    by_inflow_sign,  // Dirichlet on inflow, Neumann elsewhere
    declared         // region predicate decides (inflow facets still Dirichlet)
};

struct BoundaryData {
    std::function<double(const Vec&)> g_D;
    /// flux datum -K grad u . n = g_N
    std::function<double(const Vec&, const Vec&)> g_N;
    BoundaryMode mode = BoundaryMode::all_dirichlet;
    /// used in declared mode: label for a facet given its midpoint and normal
    std::function<BoundaryLabel(const Vec&, const Vec&)> region;
};

struct ProblemSpec {
    std::string name;
    int dim = 2;
    CoefficientField coeffs;
    BoundaryData boundary;
    /// source term; empty means f = 0
    std::function<double(const Vec&)> source;
    std::optional<ScalarField> exact;

    [[nodiscard]] bool homogeneous() const noexcept { return !source; }
};

// --- builtins -----------------------------------------------------------------

namespace detail {

inline ProblemSpec poly_reaction() {
    ProblemSpec p;
    p.name = "poly_reaction";
    p.coeffs.dim = 2;
    p.coeffs.K = CoefficientField::isotropic(2, ScalarField::constant(2, 1.0));
    p.coeffs.beta = {ScalarField::zero(2), ScalarField::zero(2)};
    p.coeffs.sigma = ScalarField::inverse_quadratic(2, 4.0);
    p.exact = ScalarField::polynomial(2, {{MultiIndex{2, 0}, 1.0}, {MultiIndex{0, 2}, 1.0}, {MultiIndex{0, 0}, 1.0}});
    const ScalarField u = *p.exact;
    p.boundary.mode = BoundaryMode::all_dirichlet;
    p.boundary.g_D = [u](const Vec& x) { return u(x); };
    return p;
}

inline ProblemSpec exp_diffusion() {
    ProblemSpec p;
    p.name = "exp_diffusion";
    p.coeffs.dim = 2;
    p.coeffs.K = CoefficientField::isotropic(2, ScalarField::exp_affine(1.0, 0.0, make_vec({1.0, -1.0})));
    p.coeffs.beta = {ScalarField::zero(2), ScalarField::zero(2)};
    p.coeffs.sigma = ScalarField::zero(2);
    p.exact = ScalarField::exp_affine(1.0, 0.0, make_vec({-1.0, 1.0}));
    const ScalarField u = *p.exact;
    p.boundary.mode = BoundaryMode::all_dirichlet;
    p.boundary.g_D = [u](const Vec& x) { return u(x); };
    return p;
}

inline ProblemSpec smooth_dar() {
    ProblemSpec p;
    p.name = "smooth_dar";
    p.coeffs.dim = 2;
    const Vec ones = make_vec({1.0, 1.0});
    p.coeffs.K = CoefficientField::isotropic(2, ScalarField::affine(1.0, ones));
    p.coeffs.beta = {ScalarField::constant(2, 1.0), ScalarField::zero(2)};
    p.coeffs.sigma = ScalarField::reciprocal_affine(3.0, 1.0, ones);
    p.exact = ScalarField::reciprocal_affine(1.0, 1.0, ones);
    const ScalarField u = *p.exact;
    p.boundary.mode = BoundaryMode::by_inflow_sign;
    p.boundary.g_D = [u](const Vec& x) { return u(x); };
    // -K grad u . n = (n1 + n2) / (x1 + x2 + 1)
    p.boundary.g_N = [](const Vec& x, const Vec& n) { return (n[0] + n[1]) / (x[0] + x[1] + 1.0); };
    return p;
}

inline double advdom_inflow_data(const Vec& x) {
    constexpr double tol = 1e-12;
    if (std::abs(x[0]) <= tol && x[1] < 1.0) return 1.0;
    if (std::abs(x[1]) <= tol) return x[0] <= 1.0 / 3.0 ? 1.0 : 0.0;
    return 0.0;
}

inline ProblemSpec advdom(double nu, bool neumann_outflow) {
    ProblemSpec p;
    p.name = neumann_outflow ? "advdom_neumann" : "advdom_dirichlet";
    p.coeffs.dim = 2;
    p.coeffs.K = CoefficientField::isotropic(2, ScalarField::constant(2, nu));
    p.coeffs.beta = {ScalarField::affine(1.0, make_vec({0.0, 1.0})), ScalarField::affine(2.0, make_vec({-1.0, 0.0}))};
    p.coeffs.sigma = ScalarField::zero(2);
    p.boundary.g_D = advdom_inflow_data;
    if (neumann_outflow) {
        p.boundary.mode = BoundaryMode::by_inflow_sign;
        p.boundary.g_N = [](const Vec&, const Vec&) { return 0.0; };
    } else {
        p.boundary.mode = BoundaryMode::all_dirichlet;
    }
    return p;
}

inline ProblemSpec reactdom(double nu) {
    ProblemSpec p;
    p.name = "reactdom";
    p.coeffs.dim = 2;
    p.coeffs.K = CoefficientField::isotropic(2, ScalarField::constant(2, nu));
    p.coeffs.beta = {ScalarField::zero(2), ScalarField::zero(2)};
    p.coeffs.sigma = ScalarField::affine(1.0, make_vec({1.0, 1.0}));
    p.boundary.mode = BoundaryMode::all_dirichlet;
    p.boundary.g_D = [](const Vec&) { return 1.0; };
    return p;
}

}  // namespace detail

inline const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"poly_reaction",  "exp_diffusion",    "smooth_dar",
                                                "advdom_neumann", "advdom_dirichlet", "reactdom"};
    return names;
}

/// Builtin problem by name; nu is the diffusion scale of the dominated regimes.
inline ProblemSpec builtin(const std::string& name, double nu = 0.1) {
    if (name == "poly_reaction") return detail::poly_reaction();
    if (name == "exp_diffusion") return detail::exp_diffusion();
    if (name == "smooth_dar") return detail::smooth_dar();
    if (name == "advdom_neumann") return detail::advdom(nu, true);
    if (name == "advdom_dirichlet") return detail::advdom(nu, false);
    if (name == "reactdom") return detail::reactdom(nu);
    throw UnknownProblem("'" + name + "'");
}

/// Names one scalar component of the coefficient field.
struct Component {
    enum class Kind { K, beta, sigma } kind;
    int j = 0;
    int m = 0;
};

inline double derivative(const ProblemSpec& problem, Component c, const MultiIndex& l, const Vec& x) {
    switch (c.kind) {
        case Component::Kind::K: return problem.coeffs.K_entry(c.j, c.m).derivative(l, x);
        case Component::Kind::beta: return problem.coeffs.beta[static_cast<std::size_t>(c.j)].derivative(l, x);
        case Component::Kind::sigma: return problem.coeffs.sigma.derivative(l, x);
    }
    throw ContractError("unknown component");
}

// --- validation ---------------------------------------------------------------

struct ProblemReport {
    double k_min = std::numeric_limits<double>::infinity();       // min eigenvalue of sym(K)
    double sigma0 = std::numeric_limits<double>::infinity();      // min sigma + div(beta)/2
    double k11_min_centre = std::numeric_limits<double>::infinity();  // min K_11(x_T)
    std::vector<std::string> warnings;
};

/// Samples ellipticity, sigma + div(beta)/2 and K_11 at barycentres, volume
/// quadrature nodes and vertices. Only K_11(x_T) <= 0 is fatal.
inline ProblemReport validate_problem(const ProblemSpec& problem, const Mesh& mesh, int p) {
    ProblemReport r;
    const auto& c = problem.coeffs;
    auto sample = [&](const Vec& x) {
        const Mat k = c.K_at(x);
        const Mat sym = 0.5 * (k + k.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
        r.k_min = std::min(r.k_min, es.eigenvalues().minCoeff());
        r.sigma0 = std::min(r.sigma0, c.sigma_at(x) + 0.5 * c.div_beta(x));
    };
    const auto& ref = reference_simplex_rule(mesh.dim(), std::max(p + 1, 1));
    for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
        const auto& el = mesh.elements()[t];
        sample(el.barycentre);
        r.k11_min_centre = std::min(r.k11_min_centre, c.K_entry(0, 0)(el.barycentre));
        const auto pts = mesh.element_points(static_cast<int>(t));
        for (const auto& x : map_to_simplex(ref, pts).nodes) sample(x);
    }
    for (const auto& v : mesh.vertices()) sample(v);

    if (!(r.k11_min_centre > 0.0))
        throw HardFailure("K_11(x_T) <= 0 at some barycentre; the basis recurrence divides by it");
    if (!(r.k_min > 0.0)) r.warnings.push_back("ellipticity: min eigenvalue of K is not positive");
    if (!(r.sigma0 > 0.0)) r.warnings.push_back("sigma + div(beta)/2 is not bounded below by a positive constant");
    const int need_kb = std::max(p - 1, 1);
    const int need_s = std::max(p - 2, 0);
    for (const auto& k : c.K)
        if (k.max_order() < need_kb) r.warnings.push_back("K oracle order below max(p-1,1)");
    for (const auto& b : c.beta)
        if (b.max_order() < need_kb) r.warnings.push_back("beta oracle order below max(p-1,1)");
    if (c.sigma.max_order() < need_s) r.warnings.push_back("sigma oracle order below max(p-2,0)");
    if (problem.boundary.mode == BoundaryMode::declared && !problem.boundary.region)
        r.warnings.push_back("declared boundary mode without a region predicate");
    return r;
}

// --- boundary classification -----------------------------------------------------

/// Assigns Dirichlet/Neumann kinds to boundary facets. Inflow facets
/// (beta.n < 0 at every sample) are always Dirichlet; otherwise a mesh-file
/// label wins over the problem's declaration. Signs are sampled at the
/// `points`-point facet Gauss rule.
inline Mesh classify_boundary(Mesh mesh, const ProblemSpec& problem, int points = 2) {
    const auto& gl = gauss_legendre(std::max(points, 1));
    const bool adv = problem.coeffs.has_advection();
    bool any_dirichlet = false;
    for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
        auto& fc = mesh.facets()[f];
        if (!fc.is_boundary()) continue;
        const auto pts = mesh.facet_points(static_cast<int>(f));
        bool inflow = false;
        if (adv) {
            bool pos = false, neg = false;
            for (const auto& x : map_to_facet(gl, pts).nodes) {
                const Vec b = problem.coeffs.beta_at(x);
                const double bn = b.dot(fc.normal);
                const double tol = 1e-14 * std::max(1.0, b.norm());
                pos = pos || bn > tol;
                neg = neg || bn < -tol;
            }
            if (pos && neg) throw MixedSignFacet("beta.n changes sign on boundary facet " + std::to_string(f));
            inflow = neg;
        }
        BoundaryLabel label = BoundaryLabel::none;
        if (inflow) {
            label = BoundaryLabel::dirichlet;
        } else if (fc.label != BoundaryLabel::none) {
            label = fc.label;
        } else {
            switch (problem.boundary.mode) {
                case BoundaryMode::all_dirichlet: label = BoundaryLabel::dirichlet; break;
                case BoundaryMode::by_inflow_sign: label = BoundaryLabel::neumann; break;
                case BoundaryMode::declared: {
                    Vec mid = Vec::Zero(mesh.dim());
                    for (const auto& x : pts) mid += x;
                    mid /= static_cast<double>(pts.size());
                    if (problem.boundary.region) label = problem.boundary.region(mid, fc.normal);
                    break;
                }
            }
        }
        if (label == BoundaryLabel::none)
            throw UnassignedBoundary("boundary facet " + std::to_string(f) + " matches no declaration");
        fc.kind = label == BoundaryLabel::dirichlet ? FacetKind::dirichlet : FacetKind::neumann;
        any_dirichlet = any_dirichlet || fc.kind == FacetKind::dirichlet;
        if (fc.kind == FacetKind::dirichlet && !problem.boundary.g_D)
            throw UnassignedBoundary("Dirichlet facet without g_D");
        if (fc.kind == FacetKind::neumann && !problem.boundary.g_N)
            throw UnassignedBoundary("Neumann facet without g_N");
    }
    (void)any_dirichlet;  // an empty Dirichlet part is reported by validate_problem users, not here
    return mesh;
}

}  // namespace qtdg
