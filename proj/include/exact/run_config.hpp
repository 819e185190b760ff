#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <type_traits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exact/tabular_data.hpp"
#include "exact/trainer.hpp"

namespace exact {

/// Every problem found in a run config, in the order encountered.
class ConfigErrors : public std::runtime_error {
public:
    explicit ConfigErrors(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errors) {
        std::string out = "invalid run config:";
        for (const auto& e : errors) out += "\n  " + e;
        return out;
    }

    std::vector<std::string> errors_;
};

/**
 * A training run: dataset, schema, split and TrainConfig fields in one flat
 * JSON object. Relative paths are resolved against the config file's directory.
 *
 *   { "dataset": "../data/wine.csv", "schema": "../data/wine.schema.json",
 *     "out": "../runs/wine-exact", "loss": "exact", "lr_init": 0.05, "margin": 5 }
 */
struct RunConfig {
    std::filesystem::path dataset;
    std::filesystem::path schema;
    std::filesystem::path out = "run";
    double test_fraction = 0.2;
    std::uint64_t split_seed = 0;
    TrainConfig train;
};

namespace detail {

inline const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys{
        "dataset", "schema", "out", "test_fraction", "split_seed", "loss", "lr_init", "lr_final", "momentum",
        "weight_decay", "l2", "steps", "batch_size", "sigma_init", "sigma_final", "sigma_schedule", "margin",
        "grad_clip", "gradient_normalizer", "grad_norm_smoothing", "sample_size", "batch_norm", "bn_axis",
        "bn_epsilon", "eval_every", "seed"};
    return keys;
}

class FieldReader {
public:
    FieldReader(const nlohmann::json& j, std::vector<std::string>& errors) : j_(j), errors_(errors) {}

    template <typename T>
    void read(const char* key, T& dst) {
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        const auto& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
                dst = v.get<bool>();
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("expected a string");
                dst = v.get<std::string>();
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw std::invalid_argument("expected a number");
                dst = v.get<T>();
            } else {
                if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                    throw std::invalid_argument("expected a non-negative integer");
                dst = static_cast<T>(v.get<std::uint64_t>());
            }
        } catch (const std::exception& e) {
            errors_.push_back(std::string(key) + ": " + e.what());
        }
    }

    template <typename T>
    void read(const char* key, std::optional<T>& dst) {
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        T value{};
        const auto before = errors_.size();
        read(key, value);
        if (errors_.size() == before) dst = value;
    }

private:
    const nlohmann::json& j_;
    std::vector<std::string>& errors_;
};

}  // namespace detail

/// Parses and validates a run config; throws ConfigErrors listing every problem.
inline RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    std::vector<std::string> errors;
    if (!j.is_object()) throw ConfigErrors({"top level must be a JSON object"});
    const auto& keys = detail::run_config_keys();
    for (const auto& [key, _] : j.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) errors.push_back("unknown key '" + key + "'");

    RunConfig rc;
    TrainConfig& t = rc.train;
    detail::FieldReader r(j, errors);
    std::string dataset, schema, out, loss, bn_axis = "global";
    r.read("dataset", dataset);
    r.read("schema", schema);
    r.read("out", out);
    r.read("loss", loss);
    r.read("test_fraction", rc.test_fraction);
    r.read("split_seed", rc.split_seed);
    r.read("lr_init", t.lr_init);
    r.read("lr_final", t.lr_final);
    r.read("momentum", t.momentum);
    r.read("weight_decay", t.weight_decay);
    r.read("l2", t.l2);
    r.read("steps", t.steps);
    r.read("batch_size", t.batch_size);
    r.read("sigma_init", t.sigma_init);
    r.read("sigma_final", t.sigma_final);
    r.read("sigma_schedule", t.sigma_schedule);
    r.read("margin", t.margin);
    r.read("grad_clip", t.grad_clip);
    r.read("gradient_normalizer", t.gradient_normalizer);
    r.read("grad_norm_smoothing", t.grad_norm_smoothing);
    r.read("sample_size", t.sample_size);
    r.read("batch_norm", t.bn_enabled);
    r.read("bn_axis", bn_axis);
    r.read("bn_epsilon", t.bn_epsilon);
    r.read("eval_every", t.eval_every);
    r.read("seed", t.seed);

    if (!j.contains("lr_init")) errors.push_back("lr_init: required");
    if (loss.empty()) {
        errors.push_back("loss: required (exact, cross_entropy or hinge)");
    } else {
        try {
            t.loss_kind = parse_loss_kind(loss);
        } catch (const std::exception& e) {
            errors.push_back(std::string("loss: ") + e.what());
        }
    }
    if (bn_axis == "global") t.bn_axis = BatchNormAxis::global;
    else if (bn_axis == "per_dimension") t.bn_axis = BatchNormAxis::per_dimension;
    else errors.push_back("bn_axis: expected 'global' or 'per_dimension'");
    if (!(rc.test_fraction > 0.0 && rc.test_fraction < 1.0)) errors.push_back("test_fraction: must lie in (0, 1)");

    auto resolve = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base_dir / p; };
    auto need_file = [&](const char* key, const std::string& value, std::filesystem::path& dst) {
        if (value.empty()) {
            errors.push_back(std::string(key) + ": required");
            return;
        }
        dst = resolve(value).lexically_normal();
        if (!std::filesystem::is_regular_file(dst)) errors.push_back(std::string(key) + ": file not found: " + dst.string());
    };
    need_file("dataset", dataset, rc.dataset);
    need_file("schema", schema, rc.schema);
    if (!out.empty()) rc.out = resolve(out).lexically_normal();
    else rc.out = resolve(rc.out.string()).lexically_normal();

    for (const auto& p : t.problems()) errors.push_back(p);
    if (!errors.empty()) throw ConfigErrors(std::move(errors));
    return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigErrors({"cannot open config file: " + path.string()});
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigErrors({std::string("malformed JSON: ") + e.what()});
    }
    return run_config_from_json(j, std::filesystem::absolute(path).parent_path());
}

/**
 * Model text format:
 *   exact-linear-model
 *   <classes> <dim>
 *   <classes - 1 lines of dim weights, row-major>
 *   <one line of classes - 1 biases>
 */
inline void write_model(std::ostream& out, const LinearModel& m) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "exact-linear-model\n" << m.classes() << ' ' << m.dim() << '\n';
    for (Index r = 0; r < m.weights.rows(); ++r) {
        for (Index c = 0; c < m.weights.cols(); ++c) out << (c ? " " : "") << m.weights(r, c);
        out << '\n';
    }
    for (Index r = 0; r < m.bias.size(); ++r) out << (r ? " " : "") << m.bias(r);
    out << '\n';
    out.precision(old);
}

inline LinearModel read_model(std::istream& in) {
    std::string tag;
    Index classes = 0, dim = 0;
    if (!(in >> tag) || tag != "exact-linear-model") throw std::runtime_error("read_model: bad header");
    if (!(in >> classes >> dim) || classes < 2 || dim < 0) throw std::runtime_error("read_model: bad dimensions");
    LinearModel m = LinearModel::zeros(classes, dim);
    for (Index r = 0; r < m.weights.rows(); ++r)
        for (Index c = 0; c < dim; ++c)
            if (!(in >> m.weights(r, c))) throw std::runtime_error("read_model: truncated weights");
    for (Index r = 0; r < m.bias.size(); ++r)
        if (!(in >> m.bias(r))) throw std::runtime_error("read_model: truncated bias");
    return m;
}

/// Columns: step, lr, sigma, loss, grad_norm, train_accuracy (empty when not evaluated).
inline void write_history_csv(std::ostream& out, const std::vector<StepRecord>& history) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "step,lr,sigma,loss,grad_norm,train_accuracy\n";
    for (const auto& h : history) {
        out << h.step << ',' << h.lr << ',' << h.sigma << ',' << h.loss << ',' << h.grad_norm << ',';
        if (!std::isnan(h.train_accuracy)) out << h.train_accuracy;
        out << '\n';
    }
    out.precision(old);
}

struct RunOutcome {
    TrainResult result;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    double wall_seconds = 0.0;
};

/// Loads, splits, trains and evaluates. Nothing is written.
inline RunOutcome execute_run(const RunConfig& rc) {
    const auto start = std::chrono::steady_clock::now();
    const TableSchema schema = load_schema(rc.schema.string());
    const RawTable table = load_csv(rc.dataset.string(), schema);
    const PreparedData data = prepare(table, rc.test_fraction, rc.split_seed);
    RunOutcome o;
    o.result = train(data.train, rc.train);
    o.train_accuracy = evaluate(o.result.model, data.train);
    o.test_accuracy = evaluate(o.result.model, data.test);
    o.train_rows = static_cast<std::size_t>(data.train.size());
    o.test_rows = static_cast<std::size_t>(data.test.size());
    o.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return o;
}

/// Key-value metrics; contains nothing that varies between identical runs.
inline void write_metrics(std::ostream& out, const RunConfig& rc, const RunOutcome& o) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "loss = " << to_string(rc.train.loss_kind) << '\n'
        << "seed = " << rc.train.seed << '\n'
        << "split_seed = " << rc.split_seed << '\n'
        << "train_rows = " << o.train_rows << '\n'
        << "test_rows = " << o.test_rows << '\n'
        << "train_accuracy = " << o.train_accuracy << '\n'
        << "test_accuracy = " << o.test_accuracy << '\n'
        << "final_loss = " << (o.result.history.empty() ? 0.0 : o.result.history.back().loss) << '\n';
    for (const auto& w : o.result.warnings) out << "warning = " << w << '\n';
    out.precision(old);
}

/// Writes model.txt, history.csv, metrics.txt and timing.txt into rc.out.
inline void write_run_artifacts(const RunConfig& rc, const RunOutcome& o) {
    std::filesystem::create_directories(rc.out);
    auto open = [&](const char* name) {
        std::ofstream f(rc.out / name);
        if (!f) throw std::runtime_error("cannot write " + (rc.out / name).string());
        return f;
    };
    {
        auto f = open("model.txt");
        write_model(f, o.result.model);
    }
    {
        auto f = open("history.csv");
        write_history_csv(f, o.result.history);
    }
    {
        auto f = open("metrics.txt");
        write_metrics(f, rc, o);
    }
    {
        auto f = open("timing.txt");
        f << "wall_seconds = " << o.wall_seconds << '\n';
    }
}

}  // namespace exact
