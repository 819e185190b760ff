#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "exact/exact_loss.hpp"
#include "exact/linalg.hpp"
#include "exact/random.hpp"
#include "exact/surrogate_losses.hpp"
#include "exact/tabular_data.hpp"

namespace exact {

enum class LossKind { exact, cross_entropy, hinge };

inline LossKind parse_loss_kind(const std::string& s) {
    if (s == "exact") return LossKind::exact;
    if (s == "ce" || s == "cross_entropy" || s == "cross-entropy") return LossKind::cross_entropy;
    if (s == "hinge") return LossKind::hinge;
    throw std::invalid_argument("unknown loss kind '" + s + "'");
}

inline std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::exact: return "exact";
        case LossKind::cross_entropy: return "cross_entropy";
        case LossKind::hinge: return "hinge";
    }
    return "?";
}

/// Linear scores with the first class pinned: logits = (0, W x + b).
struct LinearModel {
    Matrix weights;  ///< (C - 1) x d
    Vector bias;     ///< C - 1

    static LinearModel zeros(Index classes, Index dim) {
        return {Matrix::Zero(classes - 1, dim), Vector::Zero(classes - 1)};
    }

    Index classes() const noexcept { return weights.rows() + 1; }
    Index dim() const noexcept { return weights.cols(); }

    /// Logits for every row of x, as a rows x C matrix.
    Matrix logits(const Matrix& x) const {
        if (x.cols() != dim()) throw std::invalid_argument("LinearModel: feature dimension mismatch");
        Matrix out(x.rows(), classes());
        out.col(0).setZero();
        out.rightCols(classes() - 1) = (x * weights.transpose()).rowwise() + bias.transpose();
        return out;
    }

    friend bool operator==(const LinearModel& a, const LinearModel& b) {
        return a.weights == b.weights && a.bias == b.bias;
    }
};

inline Vector predict_logits(const LinearModel& model, const Vector& x) {
    if (x.size() != model.dim()) throw std::invalid_argument("predict_logits: feature dimension mismatch");
    Vector out(model.classes());
    out(0) = 0.0;
    out.tail(model.classes() - 1) = model.weights * x + model.bias;
    return out;
}

/// Fraction of rows whose label logit is strictly greater than every other logit.
inline double evaluate(const LinearModel& model, const TabularDataset& dataset) {
    if (dataset.dim() != model.dim()) throw std::invalid_argument("evaluate: feature dimension mismatch");
    if (dataset.size() == 0) return 0.0;
    const Matrix logits = model.logits(dataset.features);
    std::size_t correct = 0;
    for (Index r = 0; r < logits.rows(); ++r) {
        const Index y = dataset.labels[static_cast<std::size_t>(r)] - 1;
        bool strict = true;
        for (Index c = 0; c < logits.cols() && strict; ++c)
            if (c != y && !(logits(r, y) > logits(r, c))) strict = false;
        correct += strict;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

/// init * (final / init)^(step / (total - 1)); both endpoints are returned exactly.
inline double geometric_interpolate(double init, double final_value, std::size_t step, std::size_t total) {
    if (total <= 1 || step == 0) return init;
    if (step + 1 >= total) return final_value;
    const double t = static_cast<double>(step) / static_cast<double>(total - 1);
    return init * std::pow(final_value / init, t);
}

struct SigmaSchedule {
    double sigma_init = 10.0;
    double sigma_final = 0.01;
    std::size_t total_steps = 8000;

    void validate() const {
        if (!(sigma_final > 0.0 && sigma_final <= sigma_init))
            throw std::invalid_argument("SigmaSchedule: require 0 < sigma_final <= sigma_init");
        if (total_steps < 1) throw std::invalid_argument("SigmaSchedule: total_steps must be positive");
    }
};

inline double sigma_at(std::size_t step, const SigmaSchedule& schedule) {
    return geometric_interpolate(schedule.sigma_init, schedule.sigma_final, step, schedule.total_steps);
}

/// Divides gradients by an exponentially smoothed running mean of their norm.
class GradientNormalizer {
public:
    explicit GradientNormalizer(double smoothing = 0.9) : smoothing_(smoothing) {
        if (!(smoothing > 0.0 && smoothing < 1.0)) throw std::invalid_argument("GradientNormalizer: smoothing must lie in (0, 1)");
    }

    Vector normalize(const Vector& g) {
        const double norm = g.norm();
        if (!initialized_) {
            running_ = norm;
            initialized_ = true;
        } else {
            running_ = smoothing_ * running_ + (1.0 - smoothing_) * norm;
        }
        return g / (running_ + 1e-12);
    }

    double running_mean_norm() const noexcept { return running_; }
    bool initialized() const noexcept { return initialized_; }

private:
    double smoothing_;
    double running_ = 0.0;
    bool initialized_ = false;
};

/// Heavy-ball SGD in the dampening-free form: v = momentum * v + g; x -= lr * v.
class MomentumSgd {
public:
    explicit MomentumSgd(double momentum) : momentum_(momentum) {}

    void step(Vector& params, const Vector& grad, double lr) {
        if (velocity_.size() != grad.size()) {
            velocity_ = grad;
        } else {
            velocity_ = momentum_ * velocity_ + grad;
        }
        params -= lr * velocity_;
    }

private:
    double momentum_;
    Vector velocity_;
};

struct TrainConfig {
    LossKind loss_kind = LossKind::exact;
    double lr_init = 0.1;
    double lr_final = 1e-4;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    /// Coefficient of the 0.5 * l2 * |theta|^2 penalty.
    double l2 = 0.0;
    std::size_t steps = 8000;
    std::size_t batch_size = 256;
    double sigma_init = 10.0;
    double sigma_final = 0.01;
    /// When false sigma stays at sigma_final for the whole run.
    bool sigma_schedule = true;
    /// EXACT margin r, or the hinge margin (1 when absent).
    std::optional<double> margin;
    std::optional<double> grad_clip;
    /// Defaults to on for EXACT and off for the baselines.
    std::optional<bool> gradient_normalizer;
    double grad_norm_smoothing = 0.9;
    std::size_t sample_size = 16;
    bool bn_enabled = true;
    BatchNormAxis bn_axis = BatchNormAxis::global;
    double bn_epsilon = 1e-8;
    /// Freeze the weight matrix and train only the bias.
    bool learn_weights = true;
    std::optional<LinearModel> initial_model;
    /// Record train accuracy every this many steps (and at the last step); 0 disables.
    std::size_t eval_every = 100;
    std::uint64_t seed = 0;

    bool uses_normalizer() const { return gradient_normalizer.value_or(loss_kind == LossKind::exact); }

    /// Every violated constraint, empty when the config is usable.
    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        auto check = [&](bool ok, const char* m) {
            if (!ok) out.emplace_back(m);
        };
        check(lr_init > 0.0 && lr_final > 0.0, "learning rates must be positive");
        check(!(lr_final > lr_init), "lr_final must not exceed lr_init");
        check(sigma_init > 0.0 && sigma_final > 0.0, "sigma values must be positive");
        check(!(sigma_final > sigma_init), "sigma_final must not exceed sigma_init");
        check(steps >= 1, "steps must be positive");
        check(batch_size >= 1, "batch_size must be positive");
        check(l2 >= 0.0, "l2 must be non-negative");
        check(!margin || *margin > 0.0, "margin must be positive");
        check(!grad_clip || *grad_clip > 0.0, "grad_clip must be positive");
        check(grad_norm_smoothing > 0.0 && grad_norm_smoothing < 1.0, "grad_norm_smoothing must lie in (0, 1)");
        check(sample_size >= 1, "sample_size must be positive");
        return out;
    }

    void validate() const {
        const auto p = problems();
        if (!p.empty()) throw std::invalid_argument("TrainConfig: " + p.front());
    }
};

inline double lr_at(std::size_t step, const TrainConfig& config) {
    return geometric_interpolate(config.lr_init, config.lr_final, step, config.steps);
}

inline double sigma_at(std::size_t step, const TrainConfig& config) {
    if (!config.sigma_schedule) return config.sigma_final;
    return sigma_at(step, SigmaSchedule{config.sigma_init, config.sigma_final, config.steps});
}

struct StepRecord {
    std::size_t step = 0;
    double lr = 0.0;
    double sigma = 0.0;
    double loss = 0.0;
    /// Norm of the loss gradient before normalization and clipping.
    double grad_norm = 0.0;
    /// NaN on steps without an evaluation.
    double train_accuracy = std::numeric_limits<double>::quiet_NaN();

    friend bool operator==(const StepRecord& a, const StepRecord& b) {
        auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
        return a.step == b.step && same(a.lr, b.lr) && same(a.sigma, b.sigma) && same(a.loss, b.loss) &&
               same(a.grad_norm, b.grad_norm) && same(a.train_accuracy, b.train_accuracy);
    }
};

struct TrainResult {
    LinearModel model;
    std::vector<StepRecord> history;
    std::vector<std::string> warnings;
};

/// Produces shuffled minibatches epoch after epoch; a one-row tail joins the previous batch.
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
        : n_(n), batch_size_(std::min(batch_size, n)), seed_(seed) {
        if (n == 0) throw std::invalid_argument("BatchSampler: empty dataset");
        reshuffle();
    }

    std::vector<std::size_t> next() {
        if (cursor_ >= order_.size()) reshuffle();
        std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
        if (order_.size() - end == 1) end = order_.size();
        std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                       order_.begin() + static_cast<std::ptrdiff_t>(end));
        cursor_ = end;
        return batch;
    }

    std::size_t epoch() const noexcept { return epoch_; }

private:
    void reshuffle() {
        order_ = shuffled_indices(n_, derive_seed(seed_, epoch_++));
        cursor_ = 0;
    }

    std::size_t n_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

namespace detail {

inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kBatchStream = 2;
inline constexpr std::uint64_t kLossStream = 3;

inline LinearModel init_model(Index classes, Index dim, std::uint64_t seed) {
    // Uniform(-1/sqrt(d), 1/sqrt(d)), the usual fan-in initialization for a dense layer.
    LinearModel m = LinearModel::zeros(classes, dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(dim, 1)));
    UniformStream rng(seed);
    for (Index r = 0; r < m.weights.rows(); ++r)
        for (Index c = 0; c < m.weights.cols(); ++c) m.weights(r, c) = bound * (2.0 * rng.next() - 1.0);
    for (Index r = 0; r < m.bias.size(); ++r) m.bias(r) = bound * (2.0 * rng.next() - 1.0);
    return m;
}

inline Vector flatten(const LinearModel& m) {
    Vector out(m.weights.size() + m.bias.size());
    Index k = 0;
    for (Index r = 0; r < m.weights.rows(); ++r)
        for (Index c = 0; c < m.weights.cols(); ++c) out(k++) = m.weights(r, c);
    out.tail(m.bias.size()) = m.bias;
    return out;
}

inline void unflatten(const Vector& v, LinearModel& m) {
    Index k = 0;
    for (Index r = 0; r < m.weights.rows(); ++r)
        for (Index c = 0; c < m.weights.cols(); ++c) m.weights(r, c) = v(k++);
    m.bias = v.tail(m.bias.size());
}

}  // namespace detail

/**
 * Minibatch SGD with momentum on a LinearModel.
 *
 * Per step: loss gradient (+ L2 penalty) -> [gradient normalizer] ->
 * [global-norm clipping] -> + weight_decay * theta -> momentum update.
 * The EXACT loss sees batch-normalized logits (when enabled), the margin and
 * the scheduled sigma. Everything is a pure function of (dataset, config).
 */
inline TrainResult train(const TabularDataset& dataset, const TrainConfig& config) {
    dataset.validate();
    config.validate();
    const Index classes = dataset.classes();
    const Index dim = dataset.dim();

    TrainResult result;
    if (config.loss_kind == LossKind::cross_entropy && config.margin)
        result.warnings.push_back("margin is ignored for cross_entropy");
    if (config.loss_kind != LossKind::exact && config.bn_enabled)
        result.warnings.push_back("batch normalization applies to the EXACT loss only");

    LinearModel model = config.initial_model ? *config.initial_model
                                             : detail::init_model(classes, dim, derive_seed(config.seed, detail::kInitStream));
    if (model.classes() != classes || model.dim() != dim)
        throw std::invalid_argument("train: initial model does not match the dataset shape");

    BatchSampler sampler(static_cast<std::size_t>(dataset.size()), config.batch_size,
                         derive_seed(config.seed, detail::kBatchStream));
    GradientNormalizer normalizer(config.grad_norm_smoothing);
    MomentumSgd optimizer(config.momentum);
    Vector params = detail::flatten(model);
    const Index weight_count = model.weights.size();
    const HingeConfig hinge{config.margin.value_or(1.0)};

    result.history.reserve(config.steps);
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto rows = sampler.next();
        const TabularDataset batch = dataset.subset(rows);
        const Matrix logits = model.logits(batch.features);
        const double lr = lr_at(step, config);
        const double sigma = sigma_at(step, config);

        double loss = 0.0;
        Matrix grad_logits;
        switch (config.loss_kind) {
            case LossKind::exact: {
                ExactConfig ec;
                ec.margin = config.margin;
                ec.sample_size = config.sample_size;
                ec.bn_enabled = config.bn_enabled && batch.size() >= 2;
                ec.bn_axis = config.bn_axis;
                ec.bn_epsilon = config.bn_epsilon;
                ec.seed = derive_seed(config.seed, detail::kLossStream, step);
                const auto r = exact_loss_batch(LogitBatch{logits, Vector::Constant(1, sigma)}, batch.labels, ec);
                loss = r.loss;
                grad_logits = r.grad_mu;
                break;
            }
            case LossKind::cross_entropy: {
                auto r = cross_entropy_batch(logits, batch.labels);
                loss = r.loss;
                grad_logits = std::move(r.grad);
                break;
            }
            case LossKind::hinge: {
                auto r = hinge_batch(logits, batch.labels, hinge);
                loss = r.loss;
                grad_logits = std::move(r.grad);
                break;
            }
        }

        // Class 1 is pinned; only the remaining logits depend on the parameters.
        const Matrix g_free = grad_logits.rightCols(classes - 1);
        LinearModel grad_model{g_free.transpose() * batch.features, g_free.colwise().sum().transpose()};
        if (!config.learn_weights) grad_model.weights.setZero();
        Vector grad = detail::flatten(grad_model);
        if (config.l2 > 0.0) {
            loss += 0.5 * config.l2 * params.squaredNorm();
            grad += config.l2 * params;
        }
        if (!config.learn_weights) grad.head(weight_count).setZero();

        StepRecord rec;
        rec.step = step;
        rec.lr = lr;
        rec.sigma = sigma;
        rec.loss = loss;
        rec.grad_norm = grad.norm();

        if (config.uses_normalizer()) grad = normalizer.normalize(grad);
        if (config.grad_clip) {
            const double norm = grad.norm();
            if (norm > *config.grad_clip) grad *= *config.grad_clip / norm;
        }
        Vector decay = config.weight_decay * params;
        if (!config.learn_weights) decay.head(weight_count).setZero();
        grad += decay;

        optimizer.step(params, grad, lr);
        detail::unflatten(params, model);

        const bool last = step + 1 == config.steps;
        if (config.eval_every > 0 && (step % config.eval_every == 0 || last)) rec.train_accuracy = evaluate(model, dataset);
        result.history.push_back(rec);
    }
    result.model = std::move(model);
    return result;
}

}  // namespace exact
