#include <qtdg/basis.hpp>

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <random>
#include <sstream>

#include "oracles.hpp"

using namespace qtdg;
using Rational = boost::multiprecision::cpp_rational;

namespace {

CoefficientField constant_1d(double k, double s) {
    CoefficientField c;
    c.dim = 1;
    c.K = {ScalarField::constant(1, k)};
    c.beta = {ScalarField::zero(1)};
    c.sigma = ScalarField::constant(1, s);
    return c;
}

CoefficientField laplace(int d) {
    CoefficientField c;
    c.dim = d;
    c.K = CoefficientField::isotropic(d, ScalarField::constant(d, 1.0));
    for (int j = 0; j < d; ++j) c.beta.push_back(ScalarField::zero(d));
    c.sigma = ScalarField::zero(d);
    return c;
}

}  // namespace

TEST(Dimension, ClosedForms) {
    EXPECT_EQ(qt_dimension(2, 3), 7u);
    EXPECT_EQ(qt_dimension(3, 4), 25u);
    EXPECT_EQ(qt_dimension(1, 5), 2u);
    for (int p = 0; p <= 6; ++p) {
        EXPECT_EQ(qt_dimension(1, p), p < 2 ? poly_dimension(1, p) : 2u);
        EXPECT_EQ(qt_dimension(2, p), p < 2 ? poly_dimension(2, p) : static_cast<std::size_t>(2 * p + 1));
        EXPECT_EQ(qt_dimension(3, p), p < 2 ? poly_dimension(3, p) : static_cast<std::size_t>((p + 1) * (p + 1)));
    }
    for (int d = 1; d <= 3; ++d)
        for (int p = 2; p <= 8; ++p) EXPECT_EQ(qt_dimension(d, p), poly_dimension(d, p) - poly_dimension(d, p - 2));
}

TEST(FullBasis, Members) {
    const Vec c = make_vec({0.3, 0.4});
    const auto b = build_full_poly_basis(c, 0.5, 2, 1);
    ASSERT_EQ(b.size(), 3u);
    const auto v = b.evaluate(c + make_vec({0.5, 0.25}));
    EXPECT_DOUBLE_EQ(v.values[0], 1.0);
    EXPECT_DOUBLE_EQ(v.values[1], 1.0);
    EXPECT_DOUBLE_EQ(v.values[2], 0.5);
    EXPECT_EQ(build_full_poly_basis(c, 0.5, 2, 4).size(), 15u);
    EXPECT_DOUBLE_EQ(b.evaluate(c).values[2], 0.0);
}

TEST(Evaluate, ValuesAndGradients) {
    const Vec c = make_vec({0.2, 0.6});
    const double h = 0.3;
    const auto b = build_full_poly_basis(c, h, 2, 2);
    const auto at = b.evaluate(c + make_vec({h, 0}));
    // member 0 is the constant, member 3 is ((x1-c1)/h)^2
    EXPECT_DOUBLE_EQ(at.values[0], 1.0);
    EXPECT_DOUBLE_EQ(at.gradients.row(0).norm(), 0.0);
    EXPECT_NEAR(at.values[3], 1.0, 1e-15);
    EXPECT_NEAR(at.gradients(3, 0), 2.0 / h, 1e-13);
    EXPECT_NEAR(at.gradients(3, 1), 0.0, 1e-15);
    // gradient against central differences for a random combination
    std::mt19937_64 rng(1);
    Eigen::VectorXd w = Eigen::VectorXd::Random(6);
    const auto poly = b.combine(w);
    const Vec x = make_vec({0.35, 0.5});
    const Vec fd = oracle::fd_gradient([&](const Vec& y) { return poly.value(y); }, x, 1e-6);
    EXPECT_NEAR((fd - poly.gradient(x)).norm(), 0.0, 1e-7);
}

TEST(Recurrence, CoshSeries1D) {
    const auto b = build_qt_basis(make_vec({0.0}), 1.0, constant_1d(1.0, 1.0), 4);
    ASSERT_EQ(b.size(), 2u);
    const std::vector<double> cosh{1, 0, 0.5, 0, 1.0 / 24};
    const std::vector<double> sinh{0, 1, 0, 1.0 / 6, 0};
    for (int k = 0; k <= 4; ++k) {
        EXPECT_NEAR(b.coefficients()(0, k), cosh[static_cast<std::size_t>(k)], 1e-16);
        EXPECT_NEAR(b.coefficients()(1, k), sinh[static_cast<std::size_t>(k)], 1e-16);
    }
    EXPECT_NEAR(b.evaluate(make_vec({1.0})).values[0], 1 + 0.5 + 1.0 / 24, 1e-15);
}

TEST(Recurrence, CoshSeriesExactRational) {
    const auto a = qt_coefficients<Rational>(make_vec({0.0}), 1.0, constant_1d(1.0, 1.0), 8);
    ASSERT_EQ(a.size(), 2u);
    for (int k = 0; k <= 8; ++k) {
        const Rational inv = Rational(1) / Rational(factorial(k));
        EXPECT_EQ(a[0][static_cast<std::size_t>(k)], k % 2 == 0 ? inv : Rational(0));
        EXPECT_EQ(a[1][static_cast<std::size_t>(k)], k % 2 == 1 ? inv : Rational(0));
    }
}

TEST(Recurrence, Laplace2D) {
    const auto b = build_qt_basis(make_vec({0.5, 0.5}), 1.0, laplace(2), 2);
    ASSERT_EQ(b.size(), 5u);
    const auto& set = b.index_set();
    // the member with Cauchy datum a_(0,2) = 1
    bool found = false;
    for (std::size_t J = 0; J < b.size(); ++J) {
        const auto m = b.member(J);
        if (m.coefficient(MultiIndex{0, 2}) != 1.0) continue;
        found = true;
        EXPECT_EQ(m.coefficient(MultiIndex{2, 0}), -1.0);
        for (std::size_t n = 0; n < set.size(); ++n) {
            if (set[n][0] >= 2 && !(set[n] == MultiIndex{2, 0})) {
                EXPECT_EQ(m.a[static_cast<Eigen::Index>(n)], 0.0);
            }
        }
    }
    EXPECT_TRUE(found);
}

TEST(Recurrence, LowDegreeIsFullSpace) {
    const auto c = builtin("smooth_dar").coeffs;
    for (int p : {0, 1}) {
        const auto b = build_qt_basis(make_vec({0.4, 0.4}), 0.2, c, p);
        EXPECT_EQ(b.kind(), SpaceKind::quasi_trefftz);
        EXPECT_EQ(b.coefficients(), build_full_poly_basis(make_vec({0.4, 0.4}), 0.2, 2, p).coefficients());
    }
}

TEST(Recurrence, SingularLeadingCoefficient) {
    auto c = laplace(2);
    c.K[0] = ScalarField::affine(0.0, make_vec({1.0, 0.0}));
    EXPECT_THROW(build_qt_basis(make_vec({0.0, 0.5}), 1.0, c, 3), SingularLeadingCoefficient);
    c.K[0] = ScalarField::constant(2, 1.0).truncated(0) + ScalarField::exp_affine(1, 0, make_vec({1, 1})).truncated(1);
    EXPECT_THROW(build_qt_basis(make_vec({0.5, 0.5}), 1.0, c, 3), OracleOrderTooLow);
}

TEST(Residual, FreshBasesAndIndependentCheck) {
    std::mt19937_64 rng(21);
    for (int d = 1; d <= 3; ++d) {
        for (int p = 2; p <= 4; ++p) {
            for (int trial = 0; trial < 4; ++trial) {
                const auto c = oracle::random_coefficients(d, rng);
                const Vec centre = oracle::random_point(d, rng);
                const double h = 0.2 + 0.8 * std::uniform_real_distribution<double>()(rng);
                const auto b = build_qt_basis(centre, h, c, p);
                EXPECT_EQ(b.size(), qt_dimension(d, p));
                EXPECT_LE(qt_residual(b, c), 1e-10) << d << ' ' << p;
                for (std::size_t J = 0; J < b.size(); ++J)
                    EXPECT_LE(oracle::fd_scaled_residual(b.member(J), c), 1e-4) << d << ' ' << p << ' ' << J;
            }
        }
    }
}

TEST(Residual, FullSpaceIsNotQuasiTrefftz) {
    const auto c = builtin("poly_reaction").coeffs;
    const auto b = build_full_poly_basis(make_vec({0.3, 0.3}), 0.25, 2, 2);
    EXPECT_GT(qt_residual(b, c), 1e-3);
}

// K = Id, beta = (1,1), sigma = 2/(x1^2+1), v = x1^2 + 1, x_T = 0
TEST(Residual, SigmaExampleFromTheMultiIndexSection) {
    CoefficientField c = laplace(2);
    c.beta = {ScalarField::constant(2, 1.0), ScalarField::constant(2, 1.0)};
    c.sigma = ScalarField(2, [](const MultiIndex& l, const Vec& x) {
        if (l[1] > 0) return 0.0;
        const double q = 1 + x[0] * x[0];
        switch (l[0]) {
            case 0: return 2 / q;
            case 1: return -4 * x[0] / (q * q);
            case 2: return (12 * x[0] * x[0] - 4) / (q * q * q);
            default: throw OrderTooHigh("test oracle");
        }
    }, 2);
    const auto v = taylor_of(ScalarField::polynomial(2, {{MultiIndex{2, 0}, 1.0}, {MultiIndex{0, 0}, 1.0}}),
                             make_vec({0.0, 0.0}), 1.0, 3);
    EXPECT_NEAR(operator_derivative_at_centre(v, c, MultiIndex{0, 0}), 0.0, 1e-15);
    EXPECT_NEAR(operator_derivative_at_centre(v, c, MultiIndex{1, 0}), 2.0, 1e-15);
    EXPECT_NEAR(operator_derivative_at_centre(v, c, MultiIndex{0, 1}), 0.0, 1e-15);
}

TEST(Taylor, Coefficients) {
    const auto u = ScalarField::polynomial(2, {{MultiIndex{2, 0}, 1.0}, {MultiIndex{0, 2}, 1.0}, {MultiIndex{0, 0}, 1.0}});
    const auto t = taylor_of(u, make_vec({0.3, 0.7}), 0.4, 2);
    for (int k = 0; k < 10; ++k) {
        const Vec x = make_vec({0.1 * k, 1 - 0.07 * k});
        EXPECT_NEAR(t.value(x), u(x), 1e-14);
    }
    const auto e = taylor_of(ScalarField::exp_affine(1, 0, make_vec({-1, 1})), make_vec({0, 0}), 1.0, 1);
    EXPECT_DOUBLE_EQ(e.a[0], 1.0);
    EXPECT_DOUBLE_EQ(e.a[1], -1.0);
    EXPECT_DOUBLE_EQ(e.a[2], 1.0);
    // D^i T(x_T) = D^i u(x_T) for |i| <= p
    const auto w = ScalarField::reciprocal_affine(1, 1, make_vec({1, 1}));
    const Vec c = make_vec({0.2, 0.1});
    const auto tw = taylor_of(w, c, 0.3, 4);
    for (const auto& i : enumerate_up_to(2, 4))
        EXPECT_NEAR(tw.derivative_at_centre(i), w.derivative(i, c), 1e-10 * std::max(1.0, std::abs(w.derivative(i, c))));
    EXPECT_THROW(taylor_of(w.truncated(2), c, 0.3, 3), OracleOrderTooLow);
}

TEST(Taylor, MembershipForBuiltins) {
    for (const char* name : {"exp_diffusion", "smooth_dar", "poly_reaction"}) {
        const auto p = builtin(name);
        const Mesh m = generate_structured(2, 4);
        for (int deg = 2; deg <= 4; ++deg)
            for (const auto& el : m.elements()) EXPECT_LE(qt_residual(taylor_of(*p.exact, el, deg), p.coeffs), 1e-8) << name;
    }
}

TEST(Independence, FullRankOnRandomFields) {
    std::mt19937_64 rng(33);
    for (int d = 1; d <= 3; ++d) {
        for (int p = 2; p <= 4; ++p) {
            for (int trial = 0; trial < 5; ++trial) {
                const auto c = oracle::random_coefficients(d, rng);
                const auto b = build_qt_basis(oracle::random_point(d, rng), 0.3, c, p);
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.coefficients());
                const auto& s = svd.singularValues();
                EXPECT_EQ(s.size(), static_cast<Eigen::Index>(qt_dimension(d, p)));
                EXPECT_GT(s.minCoeff(), 1e-8 * s.maxCoeff());
            }
        }
    }
}

// a_{i+2e1} draws only on a_j with j1 <= i1+1, or j1 = i1+2 and |j| < |i|+2
TEST(Recurrence, StencilLocality) {
    for (int d = 1; d <= 3; ++d) {
        for (int p = 2; p <= 6; ++p) {
            const auto plan = recurrence_plan(d, p);
            const auto& set = *plan->set;
            for (const auto& step : plan->steps) {
                const auto& t = set[static_cast<std::size_t>(step.target)];
                for (const auto& term : step.terms) {
                    const auto& j = set[static_cast<std::size_t>(term.k)];
                    EXPECT_TRUE(j[0] <= t[0] - 1 || (j[0] == t[0] && j.order() < t.order())) << t << " <- " << j;
                }
            }
        }
    }
}

TEST(Recurrence, MatchesExactArithmeticIn2D) {
    const auto c = builtin("smooth_dar").coeffs;
    const Vec centre = make_vec({0.25, 0.5});
    const auto b = build_qt_basis(centre, 0.5, c, 4);
    const auto r = qt_coefficients<Rational>(centre, 0.5, c, 4);
    for (std::size_t J = 0; J < r.size(); ++J)
        for (std::size_t n = 0; n < r[J].size(); ++n)
            EXPECT_NEAR(b.coefficients()(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(n)),
                        static_cast<double>(r[J][n]), 1e-13);
}

TEST(Dump, OneLinePerCoefficient) {
    const auto b = build_qt_basis(make_vec({0.0}), 1.0, constant_1d(1.0, 1.0), 2);
    std::ostringstream os;
    b.dump(os);
    EXPECT_EQ(os.str(), "0 (0) 1\n0 (1) 0\n0 (2) 0.5\n1 (0) 0\n1 (1) 1\n1 (2) 0\n");
}
