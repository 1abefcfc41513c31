/// @brief Gauss-Legendre rules on [0,1], Duffy-collapsed tensor rules on the
/// reference triangle, and affine maps onto physical simplices and facets.
#pragma once

#include <qtdg/errors.hpp>
#include <qtdg/types.hpp>

#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

namespace qtdg {

struct QuadratureRule {
    std::vector<Vec> nodes;
    std::vector<double> weights;
    int exactness = 0;  // advisory

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }

    [[nodiscard]] double weight_sum() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

inline constexpr int kMaxGaussPoints = 30;

namespace detail {

// Legendre P_n and P_n' on [-1,1] by the three-term recurrence
inline std::pair<double, double> legendre_with_derivative(int n, double x) {
    double p0 = 1.0, p1 = x;
    if (n == 0) return {1.0, 0.0};
    for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
    }
    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

inline QuadratureRule compute_gauss_legendre(int n) {
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    rule.exactness = 2 * n - 1;
    // roots come in symmetric pairs; solve for the positive half only
    for (int k = 0; k < (n + 1) / 2; ++k) {
        // Chebyshev-type asymptotic initial guess
        double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            auto [p, d] = legendre_with_derivative(n, x);
            dp = d;
            const double dx = p / d;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        dp = legendre_with_derivative(n, x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]
        const auto lo = static_cast<std::size_t>(k);
        const auto hi = static_cast<std::size_t>(n - 1 - k);
        rule.nodes[lo] = make_vec({0.5 * (1.0 - x)});
        rule.nodes[hi] = make_vec({0.5 * (1.0 + x)});
        rule.weights[lo] = 0.5 * w;
        rule.weights[hi] = 0.5 * w;
    }
    if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = make_vec({0.5});
    return rule;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [0,1], exact to degree 2n-1. Memoised per n.
inline const QuadratureRule& gauss_legendre(int n) {
    if (n < 1 || n > kMaxGaussPoints) throw QuadratureUnavailable("Gauss-Legendre rule needs 1 <= n <= 30");
    static std::array<QuadratureRule, kMaxGaussPoints + 1> table;
    static std::array<std::once_flag, kMaxGaussPoints + 1> built;
    const auto slot = static_cast<std::size_t>(n);
    std::call_once(built[slot], [&] { table[slot] = detail::compute_gauss_legendre(n); });
    return table[slot];
}

/// n^2-point rule on the reference triangle {(0,0),(1,0),(0,1)} from the tensor
/// Gauss-Legendre rule collapsed by (u,v) -> (u, v(1-u)). Memoised per n.
inline const QuadratureRule& duffy_triangle(int n) {
    if (n < 1 || n > kMaxGaussPoints) throw QuadratureUnavailable("Duffy rule needs 1 <= n <= 30");
    static std::array<QuadratureRule, kMaxGaussPoints + 1> table;
    static std::array<std::once_flag, kMaxGaussPoints + 1> built;
    const auto slot = static_cast<std::size_t>(n);
    std::call_once(built[slot], [&] {
        const auto& gl = gauss_legendre(n);
        QuadratureRule r;
        r.exactness = 2 * n - 2;
        for (std::size_t a = 0; a < gl.size(); ++a) {
            for (std::size_t b = 0; b < gl.size(); ++b) {
                const double u = gl.nodes[a][0];
                const double v = gl.nodes[b][0];
                r.nodes.push_back(make_vec({u, v * (1.0 - u)}));
                r.weights.push_back(gl.weights[a] * gl.weights[b] * (1.0 - u));
            }
        }
        table[slot] = std::move(r);
    });
    return table[slot];
}

/// Reference rule for a d-simplex: [0,1] for d=1, Duffy triangle for d=2.
inline const QuadratureRule& reference_simplex_rule(int d, int n) {
    if (d == 1) return gauss_legendre(n);
    if (d == 2) return duffy_triangle(n);
    throw QuadratureUnavailable("no simplex rule for this dimension");
}

/// Rule mapped onto a physical simplex; `vertices` has d+1 points.
/// Weights are scaled by |det J| so they sum to the simplex measure.
inline QuadratureRule map_to_simplex(const QuadratureRule& ref, std::span<const Vec> vertices) {
    const auto d = vertices[0].size();
    if (static_cast<Eigen::Index>(vertices.size()) != d + 1) throw ContractError("simplex needs d+1 vertices");
    Mat jac(d, d);
    for (Eigen::Index c = 0; c < d; ++c) jac.col(c) = vertices[static_cast<std::size_t>(c + 1)] - vertices[0];
    const double det = std::abs(jac.determinant());
    if (!(det > 0.0)) throw DegenerateElement("zero Jacobian in affine map");
    QuadratureRule out;
    out.exactness = ref.exactness;
    out.nodes.reserve(ref.size());
    out.weights.reserve(ref.size());
    for (std::size_t q = 0; q < ref.size(); ++q) {
        out.nodes.push_back(vertices[0] + jac * ref.nodes[q]);
        out.weights.push_back(ref.weights[q] * det);
    }
    return out;
}

/// Gauss-Legendre rule on a straight facet. A facet with one vertex (d=1) is a
/// point carrying unit measure.
inline QuadratureRule map_to_facet(const QuadratureRule& gl, std::span<const Vec> vertices) {
    QuadratureRule out;
    out.exactness = gl.exactness;
    if (vertices.size() == 1) {
        out.nodes.push_back(vertices[0]);
        out.weights.push_back(1.0);
        return out;
    }
    if (vertices.size() != 2) throw ContractError("only point and segment facets are supported");
    const Vec edge = vertices[1] - vertices[0];
    const double len = edge.norm();
    if (!(len > 0.0)) throw DegenerateElement("zero-length facet");
    for (std::size_t q = 0; q < gl.size(); ++q) {
        out.nodes.push_back(vertices[0] + gl.nodes[q][0] * edge);
        out.weights.push_back(gl.weights[q] * len);
    }
    return out;
}

}  // namespace qtdg
