#include <qtdg/quadrature.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "oracles.hpp"

using namespace qtdg;

TEST(GaussLegendre, SmallRules) {
    const auto& r1 = gauss_legendre(1);
    ASSERT_EQ(r1.size(), 1u);
    EXPECT_DOUBLE_EQ(r1.nodes[0][0], 0.5);
    EXPECT_DOUBLE_EQ(r1.weights[0], 1.0);
    const auto& r2 = gauss_legendre(2);
    EXPECT_NEAR(r2.nodes[0][0], (3 - std::sqrt(3.0)) / 6, 1e-15);
    EXPECT_NEAR(r2.nodes[1][0], (3 + std::sqrt(3.0)) / 6, 1e-15);
    EXPECT_NEAR(r2.weights[0], 0.5, 1e-15);
    EXPECT_NEAR(r2.weights[1], 0.5, 1e-15);
}

TEST(GaussLegendre, ExactnessAndWeights) {
    for (int n = 1; n <= kMaxGaussPoints; ++n) {
        const auto& r = gauss_legendre(n);
        EXPECT_NEAR(r.weight_sum(), 1.0, 1e-13);
        for (std::size_t q = 0; q < r.size(); ++q) {
            EXPECT_GT(r.weights[q], 0.0);
            EXPECT_GE(r.nodes[q][0], 0.0);
            EXPECT_LE(r.nodes[q][0], 1.0);
        }
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double s = 0.0;
            for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] * std::pow(r.nodes[q][0], k);
            EXPECT_NEAR(s, 1.0 / (k + 1), 1e-13) << "n=" << n << " k=" << k;
        }
    }
    double s = 0.0;
    const auto& r3 = gauss_legendre(3);
    for (std::size_t q = 0; q < 3; ++q) s += r3.weights[q] * std::pow(r3.nodes[q][0], 5);
    EXPECT_NEAR(s, 1.0 / 6, 1e-15);
    EXPECT_THROW(gauss_legendre(0), QuadratureUnavailable);
    EXPECT_THROW(gauss_legendre(31), QuadratureUnavailable);
}

TEST(Duffy, AreaAndMonomials) {
    for (int n = 1; n <= 12; ++n) {
        const auto& r = duffy_triangle(n);
        EXPECT_EQ(r.size(), static_cast<std::size_t>(n * n));
        EXPECT_NEAR(r.weight_sum(), 0.5, 1e-14);
        for (const auto& x : r.nodes) {
            EXPECT_GE(x[0], 0.0);
            EXPECT_GE(x[1], 0.0);
            EXPECT_LE(x[0] + x[1], 1.0 + 1e-15);
        }
    }
    auto integrate = [](int n, int a, int b) {
        const auto& r = duffy_triangle(n);
        double s = 0.0;
        for (std::size_t q = 0; q < r.size(); ++q) s += r.weights[q] * std::pow(r.nodes[q][0], a) * std::pow(r.nodes[q][1], b);
        return s;
    };
    EXPECT_NEAR(integrate(2, 1, 0), 1.0 / 6, 1e-15);
    EXPECT_NEAR(integrate(4, 2, 2), 1.0 / 180, 1e-15);
}

// With n points per direction the collapsed rule is exact for total degree
// <= 2n-2: the Duffy Jacobian adds one power of (1-u).
TEST(Duffy, ExactToDegreeTwoNMinusTwo) {
    for (int n = 1; n <= 8; ++n) {
        for (int a = 0; a <= 2 * n - 2; ++a) {
            for (int b = 0; a + b <= 2 * n - 2; ++b) {
                const auto& r = duffy_triangle(n);
                double s = 0.0;
                for (std::size_t q = 0; q < r.size(); ++q)
                    s += r.weights[q] * std::pow(r.nodes[q][0], a) * std::pow(r.nodes[q][1], b);
                const double want = oracle::triangle_monomial(a, b);
                EXPECT_NEAR(s, want, 1e-12 * want) << n << ' ' << a << ' ' << b;
            }
        }
    }
    // degree 2n-1 is not integrated exactly: n=1 gives 1/4 for x instead of 1/6
    const auto& r1 = duffy_triangle(1);
    EXPECT_NEAR(r1.weights[0] * r1.nodes[0][0], 0.25, 1e-15);
}

TEST(MapToElement, WeightsAndNodes) {
    const std::vector<Vec> ref{make_vec({0, 0}), make_vec({1, 0}), make_vec({0, 1})};
    const auto same = map_to_simplex(duffy_triangle(3), ref);
    for (std::size_t q = 0; q < same.size(); ++q) {
        EXPECT_NEAR((same.nodes[q] - duffy_triangle(3).nodes[q]).norm(), 0.0, 1e-15);
        EXPECT_NEAR(same.weights[q], duffy_triangle(3).weights[q], 1e-15);
    }
    const std::vector<Vec> half{make_vec({0, 0}), make_vec({0.5, 0}), make_vec({0.5, 0.5})};
    EXPECT_NEAR(map_to_simplex(duffy_triangle(3), half).weight_sum(), 0.125, 1e-15);
    const std::vector<Vec> edge{make_vec({0, 0}), make_vec({0, 0.5})};
    EXPECT_NEAR(map_to_facet(gauss_legendre(2), edge).weight_sum(), 0.5, 1e-15);
    const std::vector<Vec> flat{make_vec({0, 0}), make_vec({1, 1}), make_vec({2, 2})};
    EXPECT_THROW(map_to_simplex(duffy_triangle(2), flat), DegenerateElement);
}

TEST(MapToElement, FacetExactness) {
    const std::vector<Vec> edge{make_vec({0.2, 0.1}), make_vec({0.7, 0.9})};
    const double len = (edge[1] - edge[0]).norm();
    for (int n = 1; n <= 6; ++n) {
        const auto r = map_to_facet(gauss_legendre(n), edge);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double s = 0.0;
            for (std::size_t q = 0; q < r.size(); ++q) {
                const double t = (r.nodes[q] - edge[0]).norm() / len;
                s += r.weights[q] * std::pow(t, k);
            }
            EXPECT_NEAR(s, len / (k + 1), 1e-13);
        }
    }
}

TEST(GaussLegendre, ConcurrentFirstUse) {
    std::vector<std::thread> ts;
    std::vector<double> sums(8);
    for (int k = 0; k < 8; ++k) ts.emplace_back([&, k] { sums[static_cast<std::size_t>(k)] = duffy_triangle(17).weight_sum(); });
    for (auto& t : ts) t.join();
    for (double s : sums) EXPECT_EQ(s, sums[0]);
}
