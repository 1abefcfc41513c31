#pragma once

#include <Eigen/Core>

namespace qtdg {

/// point / vector in R^d, d <= 3, stored inline
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
/// d x d matrix, d <= 3, stored inline
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;

inline Vec make_vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index j = 0;
    for (double x : xs) v[j++] = x;
    return v;
}

}  // namespace qtdg
