#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "exact/linalg.hpp"
#include "exact/mvn_orthant.hpp"
#include "exact/parallel.hpp"
#include "exact/random.hpp"

namespace exact {

/// Class labels are 1-based throughout the library: y in [1, C].
using ClassLabel = int;

/// Mean score vectors (one row per example) and score standard deviations.
struct LogitBatch {
    Matrix mu;
    /// One entry per row, or a single entry shared by every row.
    Vector sigma;

    Index rows() const noexcept { return mu.rows(); }
    Index classes() const noexcept { return mu.cols(); }
    double sigma_at(Index row) const { return sigma.size() == 1 ? sigma(0) : sigma(row); }

    void validate() const {
        if (mu.cols() < 2) throw std::invalid_argument("LogitBatch: at least two classes are required");
        if (sigma.size() != 1 && sigma.size() != mu.rows())
            throw std::invalid_argument("LogitBatch: sigma must be scalar or have one entry per row");
        for (Index i = 0; i < sigma.size(); ++i)
            if (!(sigma(i) > 0.0)) throw std::invalid_argument("LogitBatch: sigma must be positive");
    }
};

enum class BatchNormAxis {
    per_dimension,  ///< statistics per output column across the batch
    global,         ///< one mean and variance over every entry of the batch
};

struct ExactConfig {
    std::optional<double> margin;
    std::size_t sample_size = 16;
    bool bn_enabled = false;
    BatchNormAxis bn_axis = BatchNormAxis::per_dimension;
    double bn_epsilon = 1e-8;
    std::uint64_t seed = 0;
    SamplingScheme scheme = SamplingScheme::pseudo_random;

    GenzConfig genz(std::uint64_t row_seed) const { return {sample_size, row_seed, scheme}; }

    void validate() const {
        if (margin && !(*margin > 0.0)) throw std::invalid_argument("ExactConfig: margin must be positive");
        if (sample_size < 1) throw std::invalid_argument("ExactConfig: sample_size must be >= 1");
        if (!(bn_epsilon >= 0.0)) throw std::invalid_argument("ExactConfig: bn_epsilon must be non-negative");
    }
};

inline void check_label(ClassLabel y, Index classes) {
    if (y < 1 || y > classes)
        throw std::out_of_range("class label " + std::to_string(y) + " outside [1, " + std::to_string(classes) + "]");
}

/// D_y * mu without forming D_y: (mu_y - mu_j) for every j != y, in class order.
inline Vector delta_apply(std::span<const double> mu_row, ClassLabel y) {
    const auto classes = static_cast<Index>(mu_row.size());
    check_label(y, classes);
    const auto yi = static_cast<std::size_t>(y - 1);
    Vector out(classes - 1);
    for (std::size_t j = 0, k = 0; j < mu_row.size(); ++j)
        if (j != yi) out(static_cast<Index>(k++)) = mu_row[yi] - mu_row[j];
    return out;
}

inline Vector delta_apply(const Vector& mu_row, ClassLabel y) {
    return delta_apply(std::span<const double>(mu_row.data(), static_cast<std::size_t>(mu_row.size())), y);
}

/// D_y^T * g: entry y receives sum(g), every other entry receives -g in order.
inline Vector delta_transpose_apply(const Vector& g, ClassLabel y) {
    const Index classes = g.size() + 1;
    check_label(y, classes);
    Vector out(classes);
    const Index yi = y - 1;
    for (Index j = 0, k = 0; j < classes; ++j)
        if (j != yi) out(j) = -g(k++);
    out(yi) = g.sum();
    return out;
}

/// Element-wise min(deltas, r).
inline Vector apply_margin(const Vector& deltas, double r) {
    return deltas.cwiseMin(r);
}

/// Subgradient of min(deltas, r): 1 where deltas <= r, 0 where clipped.
inline Vector margin_mask(const Vector& deltas, double r) {
    return (deltas.array() <= r).cast<double>().matrix();
}

struct BatchNormResult {
    Matrix normalized;
    BatchNormAxis axis = BatchNormAxis::per_dimension;
    Vector mean;     ///< per column, or a single entry in global mode
    Vector inv_std;  ///< 1 / sqrt(var + epsilon), same shape as mean
};

/// Normalizes mu without a learned affine transform. Variance is the biased batch variance.
inline BatchNormResult batch_normalize_mu(const Matrix& mu, double epsilon,
                                          BatchNormAxis axis = BatchNormAxis::per_dimension) {
    if (mu.rows() < 2) throw std::invalid_argument("batch_normalize_mu: batch must contain at least two rows");
    BatchNormResult out;
    out.axis = axis;
    const double b = static_cast<double>(mu.rows());
    if (axis == BatchNormAxis::per_dimension) {
        out.mean = mu.colwise().mean().transpose();
        const Matrix centered = mu.rowwise() - out.mean.transpose();
        const Vector var = centered.array().square().colwise().sum().transpose() / b;
        out.inv_std = (var.array() + epsilon).rsqrt().matrix();
        for (Index c = 0; c < var.size(); ++c)
            if (!std::isfinite(out.inv_std(c)) || var(c) + epsilon == 0.0) out.inv_std(c) = 0.0;
        out.normalized = centered * out.inv_std.asDiagonal();
    } else {
        const double mean = mu.mean();
        const Matrix centered = mu.array() - mean;
        const double var = centered.array().square().mean();
        const double inv = var + epsilon > 0.0 ? 1.0 / std::sqrt(var + epsilon) : 0.0;
        out.mean = Vector::Constant(1, mean);
        out.inv_std = Vector::Constant(1, inv);
        out.normalized = centered * inv;
    }
    return out;
}

/// Backward pass through batch_normalize_mu, including the dependence of the statistics on the input.
inline Matrix batch_normalize_backward(const Matrix& grad_out, const BatchNormResult& bn) {
    const Matrix& xhat = bn.normalized;
    if (bn.axis == BatchNormAxis::per_dimension) {
        const Vector mean_g = grad_out.colwise().mean().transpose();
        const Vector mean_gx = grad_out.cwiseProduct(xhat).colwise().mean().transpose();
        Matrix out = grad_out.rowwise() - mean_g.transpose();
        out -= xhat * mean_gx.asDiagonal();
        return out * bn.inv_std.asDiagonal();
    }
    const double mean_g = grad_out.mean();
    const double mean_gx = grad_out.cwiseProduct(xhat).mean();
    return ((grad_out.array() - mean_g) - xhat.array() * mean_gx) * bn.inv_std(0);
}

/// P(s_y > max_{i != y} s_i) for s ~ N(mu, sigma^2 I), with the optional margin applied to the deltas.
inline OrthantEstimate correct_probability(const Vector& mu_row, double sigma, ClassLabel y, const ExactConfig& config) {
    config.validate();
    if (!(sigma > 0.0)) throw std::invalid_argument("correct_probability: sigma must be positive");
    if (mu_row.size() < 2) throw std::invalid_argument("correct_probability: at least two classes are required");
    Vector deltas = delta_apply(mu_row, y);
    if (config.margin) deltas = apply_margin(deltas, *config.margin);
    const OrthantProblem problem(deltas / sigma, CholeskyFactor::exact(deltas.size()));
    return orthant_probability(problem, config.genz(config.seed));
}

struct ExactLossResult {
    double loss = 0.0;
    double std_error = 0.0;
    Matrix grad_mu;
    /// Same shape as LogitBatch::sigma.
    Vector grad_sigma;
    /// Estimated correct-classification probability per row.
    Vector probabilities;
};

/**
 * Mean of 1 - P(correct) over the batch, with gradients.
 *
 * Forward: [batch norm] -> D_y -> [margin] -> divide by sigma -> Genz.
 * Row b integrates with seed derive_seed(config.seed, b).
 */
inline ExactLossResult exact_loss_batch(const LogitBatch& batch, std::span<const ClassLabel> labels,
                                        const ExactConfig& config) {
    batch.validate();
    config.validate();
    const Index rows = batch.rows();
    const Index classes = batch.classes();
    if (static_cast<Index>(labels.size()) != rows) throw std::invalid_argument("exact_loss_batch: label count mismatch");
    if (rows < 1) throw std::invalid_argument("exact_loss_batch: empty batch");
    for (ClassLabel y : labels) check_label(y, classes);

    std::optional<BatchNormResult> bn;
    if (config.bn_enabled) bn = batch_normalize_mu(batch.mu, config.bn_epsilon, config.bn_axis);
    const Matrix& mu = bn ? bn->normalized : batch.mu;

    const CholeskyFactorPtr factor = CholeskyFactor::exact(classes - 1);
    const double inv_b = 1.0 / static_cast<double>(rows);

    Matrix grad_used = Matrix::Zero(rows, classes);
    Vector row_grad_sigma = Vector::Zero(rows);
    Vector probs(rows);
    Vector variances(rows);

    parallel_for(static_cast<std::size_t>(rows), [&](std::size_t r) {
        const auto b = static_cast<Index>(r);
        const ClassLabel y = labels[r];
        const double sigma = batch.sigma_at(b);
        const Vector row = mu.row(b).transpose();
        const Vector deltas = delta_apply(row, y);
        Vector clipped = deltas;
        Vector mask = Vector::Ones(deltas.size());
        if (config.margin) {
            clipped = apply_margin(deltas, *config.margin);
            mask = margin_mask(deltas, *config.margin);
        }
        const Vector m = clipped / sigma;
        const OrthantGradient g =
            orthant_probability_gradient(OrthantProblem(m, factor), config.genz(derive_seed(config.seed, r)));

        probs(b) = g.value.value;
        variances(b) = g.value.std_error * g.value.std_error;
        // d(loss)/dm = -grad / B; chain through m = min(deltas, r) / sigma.
        const Vector d_deltas = (-inv_b / sigma) * g.grad.cwiseProduct(mask);
        grad_used.row(b) = delta_transpose_apply(d_deltas, y).transpose();
        row_grad_sigma(b) = inv_b * m.dot(g.grad) / sigma;
    });

    ExactLossResult out;
    out.probabilities = probs;
    out.loss = std::clamp(1.0 - probs.mean(), 0.0, 1.0);
    out.std_error = std::sqrt(variances.sum()) * inv_b;
    out.grad_mu = bn ? batch_normalize_backward(grad_used, *bn) : grad_used;
    if (batch.sigma.size() == 1)
        out.grad_sigma = Vector::Constant(1, row_grad_sigma.sum());
    else
        out.grad_sigma = row_grad_sigma;
    return out;
}

inline ExactLossResult exact_loss_batch(const LogitBatch& batch, const std::vector<ClassLabel>& labels,
                                        const ExactConfig& config) {
    return exact_loss_batch(batch, std::span<const ClassLabel>(labels), config);
}

}  // namespace exact
