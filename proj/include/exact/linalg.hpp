#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace exact {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class NotPositiveDefinite : public std::runtime_error {
public:
    NotPositiveDefinite(Index pivot, double value)
        : std::runtime_error("matrix is not positive definite: pivot " + std::to_string(pivot) +
                             " has value " + std::to_string(value)),
          pivot_(pivot) {}

    Index pivot() const noexcept { return pivot_; }

private:
    Index pivot_;
};

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

/// Cholesky-Banachiewicz factorization of a symmetric positive definite matrix.
inline Matrix cholesky(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols()) throw std::invalid_argument("cholesky: matrix is not square");
    const Index n = sigma.rows();
    const double scale = n > 0 ? sigma.cwiseAbs().maxCoeff() : 0.0;
    if (n > 0 && max_abs_diff(sigma, sigma.transpose()) > 1e-12 * std::max(1.0, scale))
        throw std::invalid_argument("cholesky: matrix is not symmetric");

    Matrix lower = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j <= i; ++j) {
            double acc = sigma(i, j);
            for (Index k = 0; k < j; ++k) acc -= lower(i, k) * lower(j, k);
            if (i == j) {
                if (!(acc > 0.0)) throw NotPositiveDefinite(i, acc);
                lower(i, i) = std::sqrt(acc);
            } else {
                lower(i, j) = acc / lower(j, j);
            }
        }
    }
    return lower;
}

/// The covariance of the score-difference vector: 2 on the diagonal, 1 elsewhere.
inline Matrix exact_sigma(Index dim) {
    return Matrix::Identity(dim, dim) + Matrix::Ones(dim, dim);
}

/**
 * Closed-form Cholesky factor of I + J.
 *
 * Column k carries a single diagonal value alpha_k = sqrt((k + 2) / (k + 1))
 * and a single sub-diagonal value beta_k = 1 / sqrt((k + 1)(k + 2)).
 */
inline Matrix exact_sigma_cholesky(Index dim) {
    if (dim < 1) throw std::invalid_argument("exact_sigma_cholesky: dim must be positive");
    Matrix lower = Matrix::Zero(dim, dim);
    for (Index k = 0; k < dim; ++k) {
        const double kp1 = static_cast<double>(k + 1);
        const double kp2 = static_cast<double>(k + 2);
        lower(k, k) = std::sqrt(kp2 / kp1);
        const double beta = 1.0 / std::sqrt(kp1 * kp2);
        for (Index i = k + 1; i < dim; ++i) lower(i, k) = beta;
    }
    return lower;
}

}  // namespace exact
