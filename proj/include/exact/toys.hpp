#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "exact/exact_loss.hpp"
#include "exact/surrogate_losses.hpp"
#include "exact/tabular_data.hpp"
#include "exact/trainer.hpp"

// Drivers for the two one-dimensional toy problems. A threshold b means the
// model x -> x - b, i.e. weight 1 and bias -b.
namespace exact::toys {

inline LinearModel threshold_model(double weight, double bias) {
    LinearModel m = LinearModel::zeros(2, 1);
    m.weights(0, 0) = weight;
    m.bias(0) = bias;
    return m;
}

struct LossValues {
    double cross_entropy = 0.0;
    double hinge = 0.0;
    double accuracy = 0.0;
};

inline LossValues surrogate_values(const TabularDataset& data, const LinearModel& m) {
    const Matrix logits = m.logits(data.features);
    return {cross_entropy_batch(logits, data.labels).loss, hinge_batch(logits, data.labels, HingeConfig{1.0}).loss,
            evaluate(m, data)};
}

/// Mean EXACT loss without batch norm; exact in closed form for two classes.
inline double exact_value(const TabularDataset& data, const LinearModel& m, double sigma, std::optional<double> margin) {
    ExactConfig ec;
    ec.margin = margin;
    return exact_loss_batch(LogitBatch{m.logits(data.features), Vector::Constant(1, sigma)}, data.labels, ec).loss;
}

inline std::vector<double> grid(double lo, double hi, double step) {
    std::vector<double> out;
    const auto n = static_cast<long>(std::llround((hi - lo) / step));
    for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    return out;
}

inline const std::vector<double>& landscape_sigmas() {
    static const std::vector<double> s{0.01, 0.1, 1.0, 10.0};
    return s;
}

struct Toy1Report {
    LossKind loss = LossKind::exact;
    double threshold = 0.0;
    double accuracy = 0.0;
    /// Grid minimizer of the chosen loss (step 0.01 on [-1, 2]); NaN for EXACT.
    double sweep_minimizer = std::numeric_limits<double>::quiet_NaN();
    double sweep_accuracy = std::numeric_limits<double>::quiet_NaN();
    /// Extent of the grid points whose loss equals the minimum.
    double plateau_low = std::numeric_limits<double>::quiet_NaN();
    double plateau_high = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
};

/// Bias-only training: the weight is frozen at 1 and batch norm is off.
inline TrainConfig toy1_train_config(LossKind loss, std::uint64_t seed) {
    TrainConfig c;
    c.loss_kind = loss;
    c.learn_weights = false;
    c.bn_enabled = false;
    c.batch_size = 3;
    c.weight_decay = 0.0;
    c.eval_every = 0;
    c.seed = seed;
    c.initial_model = threshold_model(1.0, 0.0);
    if (loss == LossKind::exact) {
        c.steps = 1000;
        c.lr_init = 0.05;
        c.sigma_init = 1.0;
        c.sigma_final = 0.01;
    } else {
        c.steps = 2000;
        c.lr_init = 0.1;
    }
    return c;
}

inline Toy1Report run_toy1(LossKind loss, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    const TabularDataset data = toy1();
    Toy1Report r;
    r.loss = loss;
    const TrainResult trained = train(data, toy1_train_config(loss, seed));
    r.threshold = -trained.model.bias(0);
    r.accuracy = evaluate(trained.model, data);

    if (loss != LossKind::exact) {
        double best = std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, double>> values;
        for (double b : grid(-1.0, 2.0, 0.01)) {
            const LossValues v = surrogate_values(data, threshold_model(1.0, -b));
            const double value = loss == LossKind::cross_entropy ? v.cross_entropy : v.hinge;
            values.emplace_back(b, value);
            if (value < best) {
                best = value;
                r.sweep_minimizer = b;
            }
        }
        r.plateau_low = std::numeric_limits<double>::infinity();
        r.plateau_high = -std::numeric_limits<double>::infinity();
        for (const auto& [b, value] : values)
            if (value <= best + 1e-12) {
                r.plateau_low = std::min(r.plateau_low, b);
                r.plateau_high = std::max(r.plateau_high, b);
            }
        r.sweep_accuracy = evaluate(threshold_model(1.0, -r.sweep_minimizer), data);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Columns: b, accuracy, cross_entropy, hinge, then EXACT loss per sigma without and with margin 1.
inline void write_toy1_landscape(std::ostream& out) {
    const TabularDataset data = toy1();
    const auto old = out.precision(10);
    out << "b,accuracy,cross_entropy,hinge";
    for (double s : landscape_sigmas()) out << ",exact_sigma_" << s;
    for (double s : landscape_sigmas()) out << ",exact_margin1_sigma_" << s;
    out << '\n';
    for (double b : grid(-1.0, 2.0, 0.01)) {
        const LinearModel m = threshold_model(1.0, -b);
        const LossValues v = surrogate_values(data, m);
        out << b << ',' << v.accuracy << ',' << v.cross_entropy << ',' << v.hinge;
        for (double s : landscape_sigmas()) out << ',' << exact_value(data, m, s, std::nullopt);
        for (double s : landscape_sigmas()) out << ',' << exact_value(data, m, s, 1.0);
        out << '\n';
    }
    out.precision(old);
}

struct Toy2Report {
    LossKind loss = LossKind::exact;
    double weight = 0.0;
    double bias = 0.0;
    double threshold = 0.0;
    double accuracy = 0.0;
    /// For grid-searched losses: accuracy range over every grid point attaining the minimum.
    double optimum_accuracy_min = std::numeric_limits<double>::quiet_NaN();
    double optimum_accuracy_max = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
};

inline TrainConfig toy2_train_config(std::uint64_t seed) {
    TrainConfig c;
    c.loss_kind = LossKind::exact;
    c.bn_enabled = true;
    c.bn_axis = BatchNormAxis::global;
    c.batch_size = 5;
    c.steps = 2000;
    c.lr_init = 0.1;
    c.sigma_init = 10.0;
    c.sigma_final = 0.01;
    c.weight_decay = 0.0;
    c.eval_every = 0;
    c.seed = seed;
    return c;
}

/// EXACT is trained by SGD; cross-entropy and hinge take the global optimum of a weight x bias grid (step 0.05).
inline Toy2Report run_toy2(LossKind loss, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    const TabularDataset data = toy2();
    Toy2Report r;
    r.loss = loss;
    LinearModel best_model;
    if (loss == LossKind::exact) {
        best_model = train(data, toy2_train_config(seed)).model;
    } else {
        const auto axis = grid(-10.0, 10.0, 0.05);
        double best = std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, LinearModel>> values;
        values.reserve(axis.size() * axis.size());
        for (double w : axis)
            for (double b : axis) {
                const LinearModel m = threshold_model(w, b);
                const LossValues v = surrogate_values(data, m);
                const double value = loss == LossKind::cross_entropy ? v.cross_entropy : v.hinge;
                values.emplace_back(value, m);
                if (value < best) {
                    best = value;
                    best_model = m;
                }
            }
        r.optimum_accuracy_min = 1.0;
        r.optimum_accuracy_max = 0.0;
        for (const auto& [value, m] : values)
            if (value <= best + 1e-12) {
                const double acc = evaluate(m, data);
                r.optimum_accuracy_min = std::min(r.optimum_accuracy_min, acc);
                r.optimum_accuracy_max = std::max(r.optimum_accuracy_max, acc);
            }
    }
    r.weight = best_model.weights(0, 0);
    r.bias = best_model.bias(0);
    r.threshold = r.weight != 0.0 ? -r.bias / r.weight : std::numeric_limits<double>::quiet_NaN();
    r.accuracy = evaluate(best_model, data);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Columns: weight, bias, accuracy, cross_entropy, hinge, exact_sigma_1 on a step-0.25 grid.
inline void write_toy2_landscape(std::ostream& out) {
    const TabularDataset data = toy2();
    const auto old = out.precision(10);
    out << "weight,bias,accuracy,cross_entropy,hinge,exact_sigma_1\n";
    for (double w : grid(-10.0, 10.0, 0.25))
        for (double b : grid(-10.0, 10.0, 0.25)) {
            const LinearModel m = threshold_model(w, b);
            const LossValues v = surrogate_values(data, m);
            out << w << ',' << b << ',' << v.accuracy << ',' << v.cross_entropy << ',' << v.hinge << ','
                << exact_value(data, m, 1.0, std::nullopt) << '\n';
        }
    out.precision(old);
}

}  // namespace exact::toys
