#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "exact/exact_loss.hpp"
#include "exact/linalg.hpp"

namespace exact {

struct LossAndGrad {
    double loss = 0.0;
    Matrix grad;
};

struct HingeConfig {
    double margin = 1.0;

    void validate() const {
        if (!(margin > 0.0)) throw std::invalid_argument("HingeConfig: margin must be positive");
    }
};

/// Mean softmax cross-entropy; gradient is (softmax - onehot) / B.
inline LossAndGrad cross_entropy_batch(const Matrix& logits, std::span<const ClassLabel> labels) {
    const Index rows = logits.rows();
    const Index classes = logits.cols();
    if (static_cast<Index>(labels.size()) != rows) throw std::invalid_argument("cross_entropy_batch: label count mismatch");
    if (rows < 1) throw std::invalid_argument("cross_entropy_batch: empty batch");

    const double inv_b = 1.0 / static_cast<double>(rows);
    LossAndGrad out{0.0, Matrix(rows, classes)};
    for (Index b = 0; b < rows; ++b) {
        const ClassLabel y = labels[static_cast<std::size_t>(b)];
        check_label(y, classes);
        const double top = logits.row(b).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(b).array() - top).exp().matrix();
        const double total = e.sum();
        out.loss += (std::log(total) - (logits(b, y - 1) - top)) * inv_b;
        out.grad.row(b) = e * (inv_b / total);
        out.grad(b, y - 1) -= inv_b;
    }
    return out;
}

/**
 * Weston-Watkins multiclass hinge:
 *   mean_b sum_{i != y} max(0, margin - (logit_y - logit_i)).
 * With two classes, the first logit pinned to 0 and margin 1 this is the
 * binary max(0, 1 - y f(x)). The subgradient at a kink is 0.
 */
inline LossAndGrad hinge_batch(const Matrix& logits, std::span<const ClassLabel> labels, const HingeConfig& config) {
    config.validate();
    const Index rows = logits.rows();
    const Index classes = logits.cols();
    if (static_cast<Index>(labels.size()) != rows) throw std::invalid_argument("hinge_batch: label count mismatch");
    if (rows < 1) throw std::invalid_argument("hinge_batch: empty batch");

    const double inv_b = 1.0 / static_cast<double>(rows);
    LossAndGrad out{0.0, Matrix::Zero(rows, classes)};
    for (Index b = 0; b < rows; ++b) {
        const ClassLabel y = labels[static_cast<std::size_t>(b)];
        check_label(y, classes);
        const Index yi = y - 1;
        for (Index i = 0; i < classes; ++i) {
            if (i == yi) continue;
            const double violation = config.margin - (logits(b, yi) - logits(b, i));
            if (violation > 0.0) {
                out.loss += violation * inv_b;
                out.grad(b, i) += inv_b;
                out.grad(b, yi) -= inv_b;
            }
        }
    }
    return out;
}

inline LossAndGrad cross_entropy_batch(const Matrix& logits, const std::vector<ClassLabel>& labels) {
    return cross_entropy_batch(logits, std::span<const ClassLabel>(labels));
}

inline LossAndGrad hinge_batch(const Matrix& logits, const std::vector<ClassLabel>& labels, const HingeConfig& config) {
    return hinge_batch(logits, std::span<const ClassLabel>(labels), config);
}

}  // namespace exact
