#pragma once

#include "afbm/types.hpp"

#include <cmath>
#include <random>

namespace testing {

inline double max_abs(const afbm::ComplexMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double identity_deviation(const afbm::ComplexMatrix& m) {
    return max_abs(m - afbm::ComplexMatrix::Identity(m.rows(), m.cols()));
}

inline afbm::ComplexMatrix random_matrix(std::mt19937_64& rng, afbm::Index rows, afbm::Index cols,
                                         double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale / std::sqrt(2.0));
    afbm::ComplexMatrix m(rows, cols);
    for (afbm::Index j = 0; j < cols; ++j) {
        for (afbm::Index i = 0; i < rows; ++i) m(i, j) = {n(rng), n(rng)};
    }
    return m;
}

inline afbm::ComplexVector random_vector(std::mt19937_64& rng, afbm::Index n, double scale = 1.0) {
    return random_matrix(rng, n, 1, scale).col(0);
}

}  // namespace testing
