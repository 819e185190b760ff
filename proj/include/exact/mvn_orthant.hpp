#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "exact/linalg.hpp"
#include "exact/normal.hpp"
#include "exact/random.hpp"

namespace exact {

/// Probabilities are clamped to this band before quantile inversion.
inline constexpr double kGenzProbabilityFloor = 1e-12;

enum class SamplingScheme {
    pseudo_random,  ///< independent counter-based uniforms
    lattice,        ///< randomly shifted Richtmyer lattice with the tent transform
};

struct GenzConfig {
    std::size_t sample_size = 16;
    std::uint64_t seed = 0;
    SamplingScheme scheme = SamplingScheme::pseudo_random;
    /// Independent random shifts for the lattice scheme; the standard error comes from their spread.
    std::size_t lattice_shifts = 8;

    void validate() const {
        if (sample_size < 1) throw std::invalid_argument("GenzConfig: sample_size must be >= 1");
        if (scheme == SamplingScheme::lattice && lattice_shifts < 1)
            throw std::invalid_argument("GenzConfig: lattice_shifts must be >= 1");
    }
};

/// A Monte-Carlo estimate together with its sample standard error.
struct OrthantEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/**
 * Validated lower-triangular Cholesky factor L of a covariance Sigma = L L^T.
 *
 * Construction checks the factor and records two structural facts the
 * integrators exploit:
 *   - column_constant: every column holds a single value below the diagonal,
 *     so the conditioning shift for row i is a running prefix sum;
 *   - exchangeable: Sigma = a I + b J, so conditioning on any coordinate
 *     yields the same covariance for the remaining ones.
 */
class CholeskyFactor {
public:
    explicit CholeskyFactor(Matrix lower) : lower_(std::move(lower)) {
        const Index d = lower_.rows();
        if (d < 1 || lower_.cols() != d) throw std::invalid_argument("CholeskyFactor: expected a non-empty square matrix");
        for (Index i = 0; i < d; ++i) {
            if (!(lower_(i, i) > 0.0) || !std::isfinite(lower_(i, i)))
                throw std::invalid_argument("CholeskyFactor: diagonal must be strictly positive");
            for (Index j = i + 1; j < d; ++j)
                if (lower_(i, j) != 0.0) throw std::invalid_argument("CholeskyFactor: matrix is not lower triangular");
        }
        covariance_ = lower_ * lower_.transpose();
        const Matrix refactored = cholesky(covariance_);
        const double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
        if (max_abs_diff(refactored * refactored.transpose(), covariance_) > 1e-10 * scale)
            throw std::invalid_argument("CholeskyFactor: L L^T failed the reconstruction check");

        subdiagonal_ = Vector::Zero(d);
        column_constant_ = true;
        for (Index j = 0; j + 1 < d; ++j) {
            subdiagonal_(j) = lower_(j + 1, j);
            for (Index i = j + 2; i < d; ++i)
                if (lower_(i, j) != subdiagonal_(j)) column_constant_ = false;
        }

        exchangeable_ = true;
        for (Index i = 0; i < d && exchangeable_; ++i)
            for (Index j = 0; j < d; ++j) {
                const double expected = i == j ? covariance_(0, 0) : covariance_(std::min<Index>(1, d - 1), 0);
                if (std::fabs(covariance_(i, j) - expected) > 1e-12 * scale) {
                    exchangeable_ = false;
                    break;
                }
            }
    }

    /// Factor of I + J built from the closed form.
    static std::shared_ptr<const CholeskyFactor> exact(Index dim) {
        return std::make_shared<const CholeskyFactor>(exact_sigma_cholesky(dim));
    }

    Index dim() const noexcept { return lower_.rows(); }
    const Matrix& matrix() const noexcept { return lower_; }
    const Matrix& covariance() const noexcept { return covariance_; }
    bool column_constant() const noexcept { return column_constant_; }
    bool exchangeable() const noexcept { return exchangeable_; }

    /// Value below the diagonal of column j; meaningful when column_constant().
    double subdiagonal(Index j) const noexcept { return subdiagonal_(j); }

private:
    Matrix lower_;
    Matrix covariance_;
    Vector subdiagonal_;
    bool column_constant_ = false;
    bool exchangeable_ = false;
};

using CholeskyFactorPtr = std::shared_ptr<const CholeskyFactor>;

/// P(t >= 0) for t ~ N(mean, L L^T).
class OrthantProblem {
public:
    OrthantProblem(Vector mean, CholeskyFactorPtr chol) : mean_(std::move(mean)), chol_(std::move(chol)) {
        if (!chol_) throw std::invalid_argument("OrthantProblem: null Cholesky factor");
        if (mean_.size() != chol_->dim()) throw std::invalid_argument("OrthantProblem: dimension mismatch between mean and chol");
    }

    OrthantProblem(Vector mean, Matrix chol)
        : OrthantProblem(std::move(mean), std::make_shared<const CholeskyFactor>(std::move(chol))) {}

    Index dim() const noexcept { return mean_.size(); }
    const Vector& mean() const noexcept { return mean_; }
    const CholeskyFactor& chol() const noexcept { return *chol_; }
    const CholeskyFactorPtr& chol_ptr() const noexcept { return chol_; }

private:
    Vector mean_;
    CholeskyFactorPtr chol_;
};

/// Distribution of the remaining coordinates given that one coordinate is zero.
struct ConditionalNormal {
    Vector mean;
    Matrix chol;
};

namespace detail {

/// Mean of all samples; standard error from the spread of the block means.
inline OrthantEstimate summarize(double total, std::span<const double> block_sums, std::span<const std::size_t> block_sizes,
                                 std::size_t n) {
    const double mean = total / static_cast<double>(n);
    const std::size_t blocks = block_sums.size();
    double se = 0.0;
    if (blocks > 1) {
        double ss = 0.0;
        for (std::size_t b = 0; b < blocks; ++b) {
            const double dev = block_sums[b] / static_cast<double>(block_sizes[b]) - mean;
            ss += dev * dev;
        }
        se = std::sqrt(ss / static_cast<double>(blocks - 1) / static_cast<double>(blocks));
    }
    return {std::clamp(mean, 0.0, 1.0), se};
}

/// Fractional parts of sqrt(prime) for the first `count` primes (Richtmyer generators).
inline std::vector<double> richtmyer_generators(std::size_t count) {
    std::vector<double> out;
    out.reserve(count);
    for (std::uint64_t candidate = 2; out.size() < count; ++candidate) {
        bool prime = true;
        for (std::uint64_t f = 2; f * f <= candidate && prime; ++f) prime = candidate % f != 0;
        if (prime) {
            const double r = std::sqrt(static_cast<double>(candidate));
            out.push_back(r - std::floor(r));
        }
    }
    return out;
}

/// Source of the uniform u(n, i) used for coordinate i of sample n.
class GenzUniforms {
public:
    GenzUniforms(const GenzConfig& config, Index dim) : scheme_(config.scheme), rng_(config.seed), dim_(dim) {
        if (scheme_ == SamplingScheme::lattice) {
            const std::size_t dims = static_cast<std::size_t>(std::max<Index>(dim - 1, 1));
            blocks_ = std::min(config.lattice_shifts, config.sample_size);
            generators_ = richtmyer_generators(dims);
            shifts_.resize(blocks_ * dims);
            UniformStream shift_rng(derive_seed(config.seed, 0x5eedULL));
            for (auto& v : shifts_) v = shift_rng.next();
        } else {
            blocks_ = config.sample_size;
        }
        n_ = config.sample_size;
    }

    std::size_t blocks() const noexcept { return blocks_; }
    std::size_t block_begin(std::size_t b) const noexcept { return b * n_ / blocks_; }

    double operator()(std::size_t block, std::size_t n, Index i) const {
        if (scheme_ == SamplingScheme::pseudo_random)
            return rng_.uniform(static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(dim_) + static_cast<std::uint64_t>(i));
        const auto k = static_cast<double>(n - block_begin(block) + 1);
        const auto ii = static_cast<std::size_t>(i);
        const double x = k * generators_[ii] + shifts_[block * generators_.size() + ii];
        const double frac = x - std::floor(x);
        return std::clamp(std::fabs(2.0 * frac - 1.0), 0x1.0p-53, 1.0 - 0x1.0p-53);
    }

private:
    SamplingScheme scheme_;
    CounterRng rng_;
    Index dim_;
    std::size_t n_ = 0;
    std::size_t blocks_ = 0;
    std::vector<double> generators_;
    std::vector<double> shifts_;
};

/**
 * Genz sequential conditioning for the orthant {t >= 0}.
 *
 * With t = m + L z, coordinate i is feasible when
 *   z_i >= a_i = -(m_i + sum_{j<i} L_ij z_j) / L_ii.
 * Each sample multiplies the conditional tail masses 1 - Phi(a_i) and draws
 * z_i from the standard normal truncated to [a_i, inf) by inversion.
 */
template <bool ColumnConstant>
OrthantEstimate genz_orthant(std::span<const double> mean, const CholeskyFactor& factor, const GenzConfig& config) {
    const Index d = factor.dim();
    const Matrix& lower = factor.matrix();
    const GenzUniforms uniforms(config, d);
    const std::size_t blocks = uniforms.blocks();

    std::vector<double> z(static_cast<std::size_t>(d), 0.0);
    std::vector<double> block_sums(blocks, 0.0);
    std::vector<std::size_t> block_sizes(blocks, 0);
    double total = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t end = b + 1 == blocks ? config.sample_size : uniforms.block_begin(b + 1);
        for (std::size_t n = uniforms.block_begin(b); n < end; ++n) {
            double f = 1.0;
            double prefix = 0.0;
            for (Index i = 0; i < d; ++i) {
                double shift;
                if constexpr (ColumnConstant) {
                    shift = prefix;
                } else {
                    shift = 0.0;
                    for (Index j = 0; j < i; ++j) shift += lower(i, j) * z[static_cast<std::size_t>(j)];
                }
                const double a = -(mean[static_cast<std::size_t>(i)] + shift) / lower(i, i);
                const double below = std_normal_cdf(a);
                const double tail = std_normal_cdf(-a);
                f *= tail;
                if (f == 0.0) break;
                if (i + 1 < d) {
                    const double u = uniforms(b, n, i);
                    const double q = std::clamp(below + u * tail, kGenzProbabilityFloor, 1.0 - kGenzProbabilityFloor);
                    const double zi = std_normal_quantile(q);
                    z[static_cast<std::size_t>(i)] = zi;
                    if constexpr (ColumnConstant) prefix += factor.subdiagonal(i) * zi;
                }
            }
            block_sums[b] += f;
            ++block_sizes[b];
            total += f;
        }
    }
    return summarize(total, block_sums, block_sizes, config.sample_size);
}

inline OrthantEstimate genz_orthant(std::span<const double> mean, const CholeskyFactor& factor, const GenzConfig& config) {
    return factor.column_constant() ? genz_orthant<true>(mean, factor, config) : genz_orthant<false>(mean, factor, config);
}

inline std::uint64_t conditional_seed(std::uint64_t seed, Index i) {
    return derive_seed(seed, static_cast<std::uint64_t>(i) + 1);
}

}  // namespace detail

/// Genz estimate of P(t >= 0), t ~ N(mean, L L^T). Deterministic given the seed.
inline OrthantEstimate orthant_probability(const OrthantProblem& problem, const GenzConfig& config) {
    config.validate();
    const Vector& m = problem.mean();
    return detail::genz_orthant(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())), problem.chol(), config);
}

/**
 * Mean and Cholesky factor of the remaining coordinates conditioned on
 * coordinate i being zero (Schur complement of Sigma = L L^T).
 */
inline ConditionalNormal conditional_parameters(const Vector& mean, const Matrix& chol, Index i) {
    const Index d = chol.rows();
    if (d < 2) throw std::invalid_argument("conditional_parameters: dimension must be at least 2");
    if (mean.size() != d || chol.cols() != d) throw std::invalid_argument("conditional_parameters: dimension mismatch");
    if (i < 0 || i >= d) throw std::out_of_range("conditional_parameters: index out of range");

    const Matrix sigma = chol * chol.transpose();
    std::vector<Index> rest;
    rest.reserve(static_cast<std::size_t>(d - 1));
    for (Index k = 0; k < d; ++k)
        if (k != i) rest.push_back(k);

    const double s_ii = sigma(i, i);
    ConditionalNormal out;
    out.mean.resize(d - 1);
    Matrix cov(d - 1, d - 1);
    for (Index a = 0; a < d - 1; ++a) {
        const Index ra = rest[static_cast<std::size_t>(a)];
        out.mean(a) = mean(ra) - sigma(ra, i) / s_ii * mean(i);
        for (Index b = 0; b < d - 1; ++b) {
            const Index rb = rest[static_cast<std::size_t>(b)];
            cov(a, b) = sigma(ra, rb) - sigma(ra, i) * sigma(i, rb) / s_ii;
        }
    }
    out.chol = cholesky(cov);
    return out;
}

struct OrthantGradient {
    OrthantEstimate value;
    Vector grad;
    /// Standard error of each gradient entry, propagated from the inner integrals.
    Vector grad_std_error;
};

/**
 * Value and mean-gradient of the orthant probability.
 *
 * dP/dm_i equals the N(m_i, Sigma_ii) density at 0 times the orthant
 * probability of the other coordinates conditioned on t_i = 0. The inner
 * integral of a one-dimensional problem is 1.
 */
inline OrthantGradient orthant_probability_gradient(const OrthantProblem& problem, const GenzConfig& config) {
    config.validate();
    const Index d = problem.dim();
    const Vector& m = problem.mean();
    const CholeskyFactor& factor = problem.chol();
    const Matrix& sigma = factor.covariance();

    OrthantGradient out;
    out.value = orthant_probability(problem, config);
    out.grad = Vector::Zero(d);
    out.grad_std_error = Vector::Zero(d);

    if (d == 1) {
        out.grad(0) = normal_pdf(0.0, m(0), sigma(0, 0));
        return out;
    }

    // Exchangeable covariances share one conditional factor across all i.
    std::shared_ptr<const CholeskyFactor> shared_conditional;
    double regression = 0.0;
    if (factor.exchangeable()) {
        const ConditionalNormal c = conditional_parameters(Vector::Zero(d), factor.matrix(), 0);
        shared_conditional = std::make_shared<const CholeskyFactor>(c.chol);
        regression = sigma(1, 0) / sigma(0, 0);
    }

    Vector reduced(d - 1);
    for (Index i = 0; i < d; ++i) {
        const double density = normal_pdf(0.0, m(i), sigma(i, i));
        GenzConfig inner = config;
        inner.seed = detail::conditional_seed(config.seed, i);

        OrthantEstimate conditional;
        if (shared_conditional) {
            for (Index k = 0, r = 0; k < d; ++k)
                if (k != i) reduced(r++) = m(k) - regression * m(i);
            conditional = detail::genz_orthant(std::span<const double>(reduced.data(), static_cast<std::size_t>(d - 1)),
                                               *shared_conditional, inner);
        } else {
            const ConditionalNormal c = conditional_parameters(m, factor.matrix(), i);
            const CholeskyFactor cf(c.chol);
            conditional = detail::genz_orthant(std::span<const double>(c.mean.data(), static_cast<std::size_t>(d - 1)), cf, inner);
        }
        out.grad(i) = density * conditional.value;
        out.grad_std_error(i) = density * conditional.std_error;
    }
    return out;
}

}  // namespace exact
