/// @brief local discrete spaces in scaled-monomial form: the full polynomial
/// space and the quasi-Trefftz space built by the coefficient recurrence.
///
/// A local polynomial is v(x) = sum_k a_k ((x - x_T)/h_T)^k over |k| <= p, so
/// a_k = h_T^|k| / k! D^k v(x_T).
#pragma once

#include <qtdg/errors.hpp>
#include <qtdg/mesh.hpp>
#include <qtdg/multiindex.hpp>
#include <qtdg/problem.hpp>
#include <qtdg/types.hpp>

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

namespace qtdg {

enum class SpaceKind { quasi_trefftz, full_polynomial };

/// N_{d,p}: S_{d,p} - S_{d,p-2}, which equals S_{d,p} for p < 2.
[[nodiscard]] inline std::size_t qt_dimension(int d, int p) {
    if (d < 1) throw ContractError("qt_dimension requires d >= 1");
    if (p < 2) return poly_dimension(d, p);
    return poly_dimension(d, p) - poly_dimension(d, p - 2);
}

// --- evaluation of scaled monomials -----------------------------------------------

namespace detail {

/// y^k and d/dy_j y^k for all k in `set`, where y = (x - c)/h.
/// grads is S x d; derivatives are with respect to y (not x).
inline void scaled_monomials(const MultiIndexSet& set, const Vec& centre, double h, const Vec& x,
                             Eigen::VectorXd& mono, Eigen::MatrixXd* grads) {
    const int d = set.dim();
    const int p = set.degree();
    // power table pw(j, e) = y_j^e
    Eigen::MatrixXd pw(d, p + 1);
    for (int j = 0; j < d; ++j) {
        const double y = (x[j] - centre[j]) / h;
        pw(j, 0) = 1.0;
        for (int e = 1; e <= p; ++e) pw(j, e) = pw(j, e - 1) * y;
    }
    const auto s = static_cast<Eigen::Index>(set.size());
    mono.resize(s);
    if (grads) grads->setZero(s, d);
    for (Eigen::Index n = 0; n < s; ++n) {
        const auto& k = set[static_cast<std::size_t>(n)];
        double v = 1.0;
        for (int j = 0; j < d; ++j) v *= pw(j, k[j]);
        mono[n] = v;
        if (!grads) continue;
        for (int j = 0; j < d; ++j) {
            if (k[j] == 0) continue;
            double g = k[j] * pw(j, k[j] - 1);
            for (int m = 0; m < d; ++m)
                if (m != j) g *= pw(m, k[m]);
            (*grads)(n, j) = g;
        }
    }
}

}  // namespace detail

/// A single polynomial in scaled-monomial form.
struct LocalPolynomial {
    std::shared_ptr<const MultiIndexSet> set;
    Eigen::VectorXd a;  // graded-lex order of `set`
    Vec centre;
    double h = 1.0;

    [[nodiscard]] int degree() const { return set->degree(); }
    [[nodiscard]] int dim() const { return set->dim(); }

    [[nodiscard]] double coefficient(const MultiIndex& k) const {
        const int pos = set->position(k);
        return pos < 0 ? 0.0 : a[pos];
    }

    [[nodiscard]] double value(const Vec& x) const {
        Eigen::VectorXd mono;
        detail::scaled_monomials(*set, centre, h, x, mono, nullptr);
        return a.dot(mono);
    }

    [[nodiscard]] Vec gradient(const Vec& x) const {
        Eigen::VectorXd mono;
        Eigen::MatrixXd grads;
        detail::scaled_monomials(*set, centre, h, x, mono, &grads);
        Vec g = (grads.transpose() * a) / h;
        return g;
    }

    /// D^k v(x_T) = a_k k! / h^|k|
    [[nodiscard]] double derivative_at_centre(const MultiIndex& k) const {
        return coefficient(k) * static_cast<double>(factorial(k)) / std::pow(h, k.order());
    }
};

/// Values (N) and physical gradients (N x d) of every basis member at one point.
struct BasisValues {
    Eigen::VectorXd values;
    Eigen::MatrixXd gradients;
};

/// Set of local polynomials sharing centre, scale and degree. Row J of
/// `coeffs` holds the scaled-monomial coefficients of member b_J.
class LocalBasis {
  public:
    LocalBasis() = default;
    LocalBasis(SpaceKind kind, std::shared_ptr<const MultiIndexSet> set, Vec centre, double h, Eigen::MatrixXd coeffs)
        : kind_(kind), set_(std::move(set)), centre_(std::move(centre)), h_(h), coeffs_(std::move(coeffs)) {}

    [[nodiscard]] SpaceKind kind() const noexcept { return kind_; }
    [[nodiscard]] int degree() const { return set_->degree(); }
    [[nodiscard]] int dim() const { return set_->dim(); }
    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(coeffs_.rows()); }
    [[nodiscard]] const Vec& centre() const noexcept { return centre_; }
    [[nodiscard]] double scale() const noexcept { return h_; }
    [[nodiscard]] const MultiIndexSet& index_set() const { return *set_; }
    [[nodiscard]] const Eigen::MatrixXd& coefficients() const noexcept { return coeffs_; }

    [[nodiscard]] LocalPolynomial member(std::size_t J) const {
        return {set_, coeffs_.row(static_cast<Eigen::Index>(J)).transpose(), centre_, h_};
    }

    [[nodiscard]] BasisValues evaluate(const Vec& x) const {
        Eigen::VectorXd mono;
        Eigen::MatrixXd grads;
        detail::scaled_monomials(*set_, centre_, h_, x, mono, &grads);
        BasisValues out;
        out.values = coeffs_ * mono;
        out.gradients = (coeffs_ * grads) / h_;
        return out;
    }

    /// elementwise polynomial with coefficient vector c over the members
    [[nodiscard]] LocalPolynomial combine(const Eigen::Ref<const Eigen::VectorXd>& c) const {
        return {set_, coeffs_.transpose() * c, centre_, h_};
    }

    /// one line per (J, k, a_k), k written as (k1,...,kd)
    void dump(std::ostream& os) const {
        const auto old = os.precision(17);
        for (Eigen::Index J = 0; J < coeffs_.rows(); ++J)
            for (std::size_t n = 0; n < set_->size(); ++n)
                os << J << ' ' << (*set_)[n] << ' ' << coeffs_(J, static_cast<Eigen::Index>(n)) << '\n';
        os.precision(old);
    }

  private:
    SpaceKind kind_ = SpaceKind::full_polynomial;
    std::shared_ptr<const MultiIndexSet> set_;
    Vec centre_;
    double h_ = 1.0;
    Eigen::MatrixXd coeffs_;
};

[[nodiscard]] inline LocalBasis build_full_poly_basis(const Vec& centre, double h, int dim, int p) {
    auto set = MultiIndexSet::shared(dim, p);
    const auto s = static_cast<Eigen::Index>(set->size());
    return {SpaceKind::full_polynomial, set, centre, h, Eigen::MatrixXd::Identity(s, s)};
}

[[nodiscard]] inline LocalBasis build_full_poly_basis(const Element& el, int dim, int p) {
    return build_full_poly_basis(el.barycentre, el.diameter, dim, p);
}

// --- recurrence ----------------------------------------------------------------

/// One addend of the recurrence: sign * num/den * W[comp][ell] * a[k].
struct RecurrenceTerm {
    int comp;
    int ell;  // position of l in the degree-p set
    int k;    // position of the source coefficient
    std::int64_t num;
    std::int64_t den;
    double factor;  // num/den as double
};

/// All terms producing a_{i+2e1}.
struct RecurrenceStep {
    int target;
    std::vector<RecurrenceTerm> terms;
};

/// Coefficient components are numbered K_jm -> j*d+m, beta_j -> d*d+j,
/// sigma -> d*d+d. Derivative tables are indexed comp * S + pos(l).
struct RecurrencePlan {
    int d = 0;
    int p = 0;
    std::shared_ptr<const MultiIndexSet> set;
    std::vector<RecurrenceStep> steps;  // diagonal order of the targets
    std::vector<int> cauchy;            // position of the unit Cauchy coefficient per member

    [[nodiscard]] int num_components() const { return d * d + d + 1; }
    [[nodiscard]] int beta_comp(int j) const { return d * d + j; }
    [[nodiscard]] int sigma_comp() const { return d * d + d; }
};

namespace detail {

inline std::int64_t to_i64(std::uint64_t v) { return static_cast<std::int64_t>(v); }

inline RecurrenceTerm make_term(int comp, int ell, int k, std::int64_t num, std::int64_t den) {
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return {comp, ell, k, num, den, static_cast<double>(num) / static_cast<double>(den)};
}

inline RecurrencePlan compute_plan(int d, int p) {
    RecurrencePlan plan;
    plan.d = d;
    plan.p = p;
    plan.set = MultiIndexSet::shared(d, p);
    const auto& set = *plan.set;
    const MultiIndex e1 = MultiIndex::unit(d, 0);

    for (const auto& t : enumerate_up_to(d, p, EnumerationOrder::algorithm_diagonal)) {
        if (t[0] < 2) continue;
        const MultiIndex i = t - e1 - e1;
        RecurrenceStep step;
        step.target = set.position(t);
        const std::int64_t div = to_i64(factorial(t));

        // diffusion: -(i+e_j)!/l! * k_m * D^l K_jm h^|l| * a_k, k = i+e_j-l+e_m
        for (int j = 0; j < d; ++j) {
            const MultiIndex ij = i + MultiIndex::unit(d, j);
            const std::int64_t fij = to_i64(factorial(ij));
            for (const auto& l : enumerate_up_to(d, ij.order())) {
                if (!l.leq(ij)) continue;
                for (int m = 0; m < d; ++m) {
                    if (j == 0 && m == 0 && l.order() == 0) continue;  // the target itself
                    const MultiIndex k = ij - l + MultiIndex::unit(d, m);
                    step.terms.push_back(make_term(j * d + m, set.position(l), set.position(k), -fij * k[m],
                                                   to_i64(factorial(l)) * div));
                }
            }
        }
        // advection: (i+e_j)!/l! * D^l beta_j h^(|l|+1) * a_{i+e_j-l}
        for (int j = 0; j < d; ++j) {
            const MultiIndex ij = i + MultiIndex::unit(d, j);
            const std::int64_t fij = to_i64(factorial(ij));
            for (const auto& l : enumerate_up_to(d, ij.order())) {
                if (!l.leq(ij)) continue;
                step.terms.push_back(make_term(plan.beta_comp(j), set.position(l), set.position(ij - l), fij,
                                               to_i64(factorial(l)) * div));
            }
        }
        // reaction: i!/l! * D^l sigma h^(|l|+2) * a_{i-l}
        const std::int64_t fi = to_i64(factorial(i));
        for (const auto& l : enumerate_up_to(d, i.order())) {
            if (!l.leq(i)) continue;
            step.terms.push_back(
                make_term(plan.sigma_comp(), set.position(l), set.position(i - l), fi, to_i64(factorial(l)) * div));
        }
        plan.steps.push_back(std::move(step));
    }

    // Cauchy data: unit coefficient in the k1=0 slice, then in the k1=1 slice
    if (d == 1) {
        plan.cauchy = {0, 1};
    } else {
        for (int head = 0; head <= 1; ++head)
            for (const auto& tl : enumerate_up_to(d - 1, p - head))
                plan.cauchy.push_back(set.position(MultiIndex::with_head(head, tl)));
    }
    return plan;
}

}  // namespace detail

/// Shared recurrence plan per (d, p), p >= 2.
[[nodiscard]] inline std::shared_ptr<const RecurrencePlan> recurrence_plan(int d, int p) {
    static std::mutex mtx;
    static std::map<std::pair<int, int>, std::shared_ptr<const RecurrencePlan>> cache;
    std::lock_guard lock(mtx);
    auto& slot = cache[{d, p}];
    if (!slot) slot = std::make_shared<const RecurrencePlan>(detail::compute_plan(d, p));
    return slot;
}

/// Scaled coefficient derivatives at the centre: h^|l| D^l K_jm, h^(|l|+1) D^l beta_j,
/// h^(|l|+2) D^l sigma, for the orders the recurrence consumes. `active[c]` is
/// false for components declared identically zero.
template <class Scalar>
struct CoefficientTable {
    std::vector<Scalar> values;
    std::vector<char> active;
};

template <class Scalar = double>
[[nodiscard]] CoefficientTable<Scalar> coefficient_table(const RecurrencePlan& plan, const CoefficientField& c,
                                                         const Vec& centre, double h) {
    const int d = plan.d;
    const auto S = plan.set->size();
    CoefficientTable<Scalar> tab;
    tab.values.assign(static_cast<std::size_t>(plan.num_components()) * S, Scalar(0));
    tab.active.assign(static_cast<std::size_t>(plan.num_components()), 0);
    auto fill = [&](int comp, const ScalarField& f, int max_order, int extra) {
        if (f.is_zero()) return;
        tab.active[static_cast<std::size_t>(comp)] = 1;
        for (std::size_t n = 0; n < S; ++n) {
            const auto& l = (*plan.set)[n];
            if (l.order() > max_order) break;  // graded order
            tab.values[static_cast<std::size_t>(comp) * S + n] =
                Scalar(f.derivative(l, centre) * std::pow(h, l.order() + extra));
        }
    };
    for (int j = 0; j < d; ++j)
        for (int m = 0; m < d; ++m) fill(j * d + m, c.K_entry(j, m), plan.p - 1, 0);
    // K_11(x_T) is always needed as the divisor
    tab.values[0] = Scalar(c.K_entry(0, 0)(centre));
    for (int j = 0; j < d; ++j) fill(plan.beta_comp(j), c.beta[static_cast<std::size_t>(j)], plan.p - 1, 1);
    fill(plan.sigma_comp(), c.sigma, plan.p - 2, 2);
    return tab;
}

/// Fills every a_k with k1 >= 2 of one coefficient vector from its Cauchy slices.
template <class Scalar>
void apply_recurrence(const RecurrencePlan& plan, const CoefficientTable<Scalar>& tab, std::span<Scalar> a) {
    const auto S = plan.set->size();
    const Scalar k11 = tab.values[0];
    if (!(k11 > Scalar(0))) throw SingularLeadingCoefficient("K_11(x_T) must be positive");
    for (const auto& step : plan.steps) {
        Scalar r(0);
        for (const auto& t : step.terms) {
            if (!tab.active[static_cast<std::size_t>(t.comp)]) continue;
            const Scalar& w = tab.values[static_cast<std::size_t>(t.comp) * S + static_cast<std::size_t>(t.ell)];
            const Scalar& src = a[static_cast<std::size_t>(t.k)];
            if (w == Scalar(0) || src == Scalar(0)) continue;
            r += Scalar(t.num) / Scalar(t.den) * w * src;
        }
        a[static_cast<std::size_t>(step.target)] = r / k11;
    }
}

namespace detail {

// double specialisation with the precomputed factor
inline void apply_recurrence_fast(const RecurrencePlan& plan, const CoefficientTable<double>& tab,
                                  Eigen::MatrixXd& coeffs) {
    const auto S = plan.set->size();
    const double k11 = tab.values[0];
    if (!(k11 > 0.0)) throw SingularLeadingCoefficient("K_11(x_T) must be positive");
    for (const auto& step : plan.steps) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(coeffs.rows());
        for (const auto& t : step.terms) {
            if (!tab.active[static_cast<std::size_t>(t.comp)]) continue;
            const double w = tab.values[static_cast<std::size_t>(t.comp) * S + static_cast<std::size_t>(t.ell)];
            if (w == 0.0) continue;
            r += (t.factor * w) * coeffs.col(t.k);
        }
        coeffs.col(step.target) = r / k11;
    }
}

}  // namespace detail

/// Quasi-Trefftz basis on one element (centre x_T, scale h_T). For p < 2 this
/// is the full polynomial space.
[[nodiscard]] inline LocalBasis build_qt_basis(const Vec& centre, double h, const CoefficientField& c, int p) {
    const int d = c.dim;
    if (p < 2) {
        auto full = build_full_poly_basis(centre, h, d, p);
        return {SpaceKind::quasi_trefftz, MultiIndexSet::shared(d, p), centre, h, full.coefficients()};
    }
    if (!(c.K_entry(0, 0)(centre) > 0.0)) throw SingularLeadingCoefficient("K_11(x_T) <= 0");
    const auto plan = recurrence_plan(d, p);
    const auto tab = coefficient_table<double>(*plan, c, centre, h);
    const auto N = static_cast<Eigen::Index>(plan->cauchy.size());
    Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(plan->set->size()));
    for (Eigen::Index J = 0; J < N; ++J) coeffs(J, plan->cauchy[static_cast<std::size_t>(J)]) = 1.0;
    detail::apply_recurrence_fast(*plan, tab, coeffs);
    return {SpaceKind::quasi_trefftz, plan->set, centre, h, std::move(coeffs)};
}

[[nodiscard]] inline LocalBasis build_qt_basis(const Element& el, const CoefficientField& c, int p) {
    return build_qt_basis(el.barycentre, el.diameter, c, p);
}

/// Recurrence in an arbitrary scalar type (exact rationals in tests). Returns
/// one coefficient vector per member in graded-lex order.
template <class Scalar>
[[nodiscard]] std::vector<std::vector<Scalar>> qt_coefficients(const Vec& centre, double h, const CoefficientField& c,
                                                               int p) {
    if (p < 2) throw ContractError("qt_coefficients needs p >= 2");
    const auto plan = recurrence_plan(c.dim, p);
    const auto tab = coefficient_table<Scalar>(*plan, c, centre, h);
    std::vector<std::vector<Scalar>> out;
    for (int pos : plan->cauchy) {
        std::vector<Scalar> a(plan->set->size(), Scalar(0));
        a[static_cast<std::size_t>(pos)] = Scalar(1);
        apply_recurrence<Scalar>(*plan, tab, a);
        out.push_back(std::move(a));
    }
    return out;
}

// --- residual and Taylor polynomials ----------------------------------------------------

/// D^i (L v)(x_T) for L v = div(-K grad v + beta v) + sigma v, by the Leibniz
/// expansion with exact polynomial derivatives of v and oracle derivatives of
/// the coefficients.
[[nodiscard]] inline double operator_derivative_at_centre(const LocalPolynomial& v, const CoefficientField& c,
                                                          const MultiIndex& i) {
    const int d = c.dim;
    const Vec& x = v.centre;
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
        const MultiIndex ij = i + MultiIndex::unit(d, j);
        for (const auto& l : enumerate_up_to(d, ij.order())) {
            if (!l.leq(ij)) continue;
            const auto b = static_cast<double>(binomial(ij, l));
            const MultiIndex rest = ij - l;
            for (int m = 0; m < d; ++m) {
                const auto& K = c.K_entry(j, m);
                if (K.is_zero()) continue;
                s -= b * K.derivative(l, x) * v.derivative_at_centre(rest + MultiIndex::unit(d, m));
            }
            const auto& beta = c.beta[static_cast<std::size_t>(j)];
            if (!beta.is_zero()) s += b * beta.derivative(l, x) * v.derivative_at_centre(rest);
        }
    }
    if (!c.sigma.is_zero()) {
        for (const auto& l : enumerate_up_to(d, i.order())) {
            if (!l.leq(i)) continue;
            s += static_cast<double>(binomial(i, l)) * c.sigma.derivative(l, x) * v.derivative_at_centre(i - l);
        }
    }
    return s;
}

/// max over |i| <= p-2 of h^(|i|+2)/(i+2e1)! |D^i (L v)(x_T)|; zero for p < 2.
[[nodiscard]] inline double qt_residual(const LocalPolynomial& v, const CoefficientField& c) {
    const int d = c.dim;
    const int p = v.degree();
    double worst = 0.0;
    for (const auto& i : enumerate_up_to(d, p - 2)) {
        const MultiIndex t = i + MultiIndex::unit(d, 0) + MultiIndex::unit(d, 0);
        const double scale = std::pow(v.h, i.order() + 2) / static_cast<double>(factorial(t));
        worst = std::max(worst, scale * std::abs(operator_derivative_at_centre(v, c, i)));
    }
    return worst;
}

[[nodiscard]] inline double qt_residual(const LocalBasis& basis, const CoefficientField& c) {
    double worst = 0.0;
    for (std::size_t J = 0; J < basis.size(); ++J) worst = std::max(worst, qt_residual(basis.member(J), c));
    return worst;
}

/// Degree-p Taylor polynomial of u about `centre`: a_j = h^|j| D^j u(x_T) / j!.
[[nodiscard]] inline LocalPolynomial taylor_of(const ScalarField& u, const Vec& centre, double h, int p) {
    auto set = MultiIndexSet::shared(u.dim(), p);
    Eigen::VectorXd a(static_cast<Eigen::Index>(set->size()));
    for (std::size_t n = 0; n < set->size(); ++n) {
        const auto& j = (*set)[n];
        a[static_cast<Eigen::Index>(n)] =
            std::pow(h, j.order()) * u.derivative(j, centre) / static_cast<double>(factorial(j));
    }
    return {set, a, centre, h};
}

[[nodiscard]] inline LocalPolynomial taylor_of(const ScalarField& u, const Element& el, int p) {
    return taylor_of(u, el.barycentre, el.diameter, p);
}

/// Coordinates of a polynomial in a basis of the same centre and degree, by
/// least squares on the coefficient rows.
[[nodiscard]] inline Eigen::VectorXd coordinates_in(const LocalBasis& basis, const LocalPolynomial& v) {
    const Eigen::MatrixXd At = basis.coefficients().transpose();
    return At.colPivHouseholderQr().solve(v.a);
}

}  // namespace qtdg
