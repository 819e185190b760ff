#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "exact/exact_loss.hpp"
#include "exact/linalg.hpp"
#include "exact/mvn_orthant.hpp"
#include "exact/normal.hpp"
#include "exact/parallel.hpp"
#include "exact/random.hpp"

// Independent estimators used to cross-check the Genz path. They share only
// the uniform generator and the normal CDF/quantile with it.
namespace exact::oracles {

namespace detail {

inline double standard_normal(UniformStream& rng) {
    return std_normal_quantile(rng.next());
}

inline OrthantEstimate bernoulli_estimate(std::size_t hits, std::size_t n) {
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    const double se = n > 1 ? std::sqrt(p * (1.0 - p) / static_cast<double>(n - 1)) : 0.0;
    return {p, se};
}

/// Index of the unique maximum, or -1 on a tie for the maximum.
inline Index unique_argmax(const Vector& s) {
    Index best = 0;
    bool tie = false;
    for (Index i = 1; i < s.size(); ++i) {
        if (s(i) > s(best)) {
            best = i;
            tie = false;
        } else if (s(i) == s(best)) {
            tie = true;
        }
    }
    return tie ? -1 : best;
}

}  // namespace detail

/// Fraction of draws s ~ N(mu, sigma^2 I) whose unique argmax is y.
inline OrthantEstimate mc_correct_probability(const Vector& mu, double sigma, ClassLabel y, std::size_t n,
                                              std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("mc_correct_probability: n must be positive");
    check_label(y, mu.size());
    UniformStream rng(seed);
    Vector s(mu.size());
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n; ++k) {
        for (Index i = 0; i < mu.size(); ++i) s(i) = mu(i) + sigma * detail::standard_normal(rng);
        hits += detail::unique_argmax(s) == y - 1;
    }
    return detail::bernoulli_estimate(hits, n);
}

/// Fraction of draws t = mean + L z with every coordinate >= 0.
inline OrthantEstimate mc_orthant(const Vector& mean, const Matrix& chol, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("mc_orthant: n must be positive");
    if (chol.rows() != mean.size() || chol.cols() != mean.size()) throw std::invalid_argument("mc_orthant: dimension mismatch");
    UniformStream rng(seed);
    const auto lower = chol.triangularView<Eigen::Lower>();
    Vector z(mean.size());
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n; ++k) {
        for (Index i = 0; i < z.size(); ++i) z(i) = detail::standard_normal(rng);
        const Vector t = mean + lower * z;
        hits += (t.array() >= 0.0).all();
    }
    return detail::bernoulli_estimate(hits, n);
}

/// Log-derivative estimate of d P(argmax = y) / d mu: mean of 1[argmax(s) = y] (s - mu) / sigma^2.
inline Vector reinforce_gradient(const Vector& mu, double sigma, ClassLabel y, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("reinforce_gradient: n must be positive");
    check_label(y, mu.size());
    UniformStream rng(seed);
    Vector z(mu.size());
    Vector acc = Vector::Zero(mu.size());
    for (std::size_t k = 0; k < n; ++k) {
        for (Index i = 0; i < z.size(); ++i) z(i) = detail::standard_normal(rng);
        const Vector s = mu + sigma * z;
        if (detail::unique_argmax(s) == y - 1) acc += z;  // (s - mu) / sigma^2 = z / sigma
    }
    return acc / (sigma * static_cast<double>(n));
}

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
template <typename F>
Vector finite_difference(F&& f, const Vector& x, double h = 1e-3) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference: step must be positive");
    Vector grad(x.size());
    Vector probe = x;
    for (Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + h;
        const double up = f(probe);
        probe(i) = x(i) - h;
        const double down = f(probe);
        probe(i) = x(i);
        grad(i) = (up - down) / (2.0 * h);
    }
    return grad;
}

/// |a - b| / max(|a|, |b|) in the Euclidean norm; 0 when both vanish.
inline double relative_error(const Vector& a, const Vector& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale > 0.0 ? (a - b).norm() / scale : 0.0;
}

enum class Method { genz, mc_value, reinforce_grad, exact_grad };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::genz: return "genz";
        case Method::mc_value: return "mc_value";
        case Method::reinforce_grad: return "reinforce_grad";
        case Method::exact_grad: return "exact_grad";
    }
    return "?";
}

struct RmseReport {
    Method method = Method::genz;
    std::size_t sample_size = 0;
    double rmse = 0.0;
    std::size_t n_trials = 1000;
};

/// The fixed benchmark problem: score means, score sd and the label being scored.
struct BenchmarkProblem {
    Vector mu;
    double sigma = 1.0;
    ClassLabel label = 4;

    /// mu = (1, 2, 0.5, 10, 6, -3, -4, 5, 1, 0), sigma = 1, label = class of the maximum entry.
    static BenchmarkProblem reference() {
        BenchmarkProblem p;
        p.mu.resize(10);
        p.mu << 1, 2, 0.5, 10, 6, -3, -4, 5, 1, 0;
        Index top = 0;
        p.mu.maxCoeff(&top);
        p.label = static_cast<ClassLabel>(top) + 1;
        return p;
    }
};

struct BenchmarkTruth {
    double value = 0.0;
    Vector grad;
    std::size_t sample_size = 0;
};

/// Argmax-sampling ground truth: direct MC for the value, the log-derivative estimator for the gradient.
inline BenchmarkTruth benchmark_truth(const BenchmarkProblem& p, std::size_t n, std::uint64_t seed) {
    return {mc_correct_probability(p.mu, p.sigma, p.label, n, derive_seed(seed, 101)).value,
            reinforce_gradient(p.mu, p.sigma, p.label, n, derive_seed(seed, 102)), n};
}

/// Gradient of P(correct) with respect to mu through the Genz path.
inline Vector exact_mu_gradient(const BenchmarkProblem& p, std::size_t sample_size, std::uint64_t seed) {
    const Vector m = delta_apply(p.mu, p.label) / p.sigma;
    const OrthantGradient g =
        orthant_probability_gradient(OrthantProblem(m, CholeskyFactor::exact(m.size())), {sample_size, seed});
    return delta_transpose_apply(g.grad, p.label) / p.sigma;
}

inline double exact_value(const BenchmarkProblem& p, std::size_t sample_size, std::uint64_t seed) {
    const Vector m = delta_apply(p.mu, p.label) / p.sigma;
    return orthant_probability(OrthantProblem(m, CholeskyFactor::exact(m.size())), {sample_size, seed}).value;
}

/**
 * RMSE of each estimator against the ground truth over n_trials independent
 * seeds, for every sample size. Gradient errors are averaged over all
 * components: sqrt(mean_trials mean_i (g_i - g*_i)^2).
 */
inline std::vector<RmseReport> rmse_benchmark(const std::vector<std::size_t>& sample_sizes, std::size_t n_trials,
                                              std::uint64_t seed, const BenchmarkProblem& problem,
                                              const BenchmarkTruth& truth) {
    if (sample_sizes.empty()) throw std::invalid_argument("rmse_benchmark: no sample sizes");
    if (n_trials < 1) throw std::invalid_argument("rmse_benchmark: n_trials must be positive");
    const Method methods[] = {Method::genz, Method::mc_value, Method::reinforce_grad, Method::exact_grad};
    std::vector<RmseReport> out;
    for (std::size_t size : sample_sizes) {
        if (size < 1) throw std::invalid_argument("rmse_benchmark: sample sizes must be positive");
        for (Method method : methods) {
            std::vector<double> sq(n_trials, 0.0);
            parallel_for(n_trials, [&](std::size_t t) {
                const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(method) * 1000003ULL + size, t);
                switch (method) {
                    case Method::genz: sq[t] = std::pow(exact_value(problem, size, s) - truth.value, 2); break;
                    case Method::mc_value:
                        sq[t] = std::pow(mc_correct_probability(problem.mu, problem.sigma, problem.label, size, s).value -
                                             truth.value, 2);
                        break;
                    case Method::reinforce_grad:
                        sq[t] = (reinforce_gradient(problem.mu, problem.sigma, problem.label, size, s) - truth.grad)
                                    .squaredNorm() / static_cast<double>(truth.grad.size());
                        break;
                    case Method::exact_grad:
                        sq[t] = (exact_mu_gradient(problem, size, s) - truth.grad).squaredNorm() /
                                static_cast<double>(truth.grad.size());
                        break;
                }
            });
            double total = 0.0;
            for (double v : sq) total += v;
            out.push_back({method, size, std::sqrt(total / static_cast<double>(n_trials)), n_trials});
        }
    }
    return out;
}

inline std::vector<RmseReport> rmse_benchmark(const std::vector<std::size_t>& sample_sizes, std::size_t n_trials = 1000,
                                              std::uint64_t seed = 0, std::size_t truth_samples = 1000000) {
    const auto problem = BenchmarkProblem::reference();
    return rmse_benchmark(sample_sizes, n_trials, seed, problem, benchmark_truth(problem, truth_samples, seed));
}

struct BenchmarkChecks {
    /// Genz value RMSE below plain MC value RMSE at every sample size.
    bool value_ordering = true;
    /// EXACT gradient RMSE at sample size 1 no larger than REINFORCE at 256; empty when a size is missing.
    std::optional<bool> gradient_claim;
    bool passed() const { return value_ordering && gradient_claim.value_or(true); }
};

inline BenchmarkChecks check_benchmark(const std::vector<RmseReport>& reports) {
    auto find = [&](Method m, std::size_t size) -> const RmseReport* {
        for (const auto& r : reports)
            if (r.method == m && r.sample_size == size) return &r;
        return nullptr;
    };
    BenchmarkChecks c;
    for (const auto& r : reports) {
        if (r.method != Method::genz) continue;
        const RmseReport* mc = find(Method::mc_value, r.sample_size);
        if (mc && !(r.rmse < mc->rmse)) c.value_ordering = false;
    }
    const RmseReport* exact1 = find(Method::exact_grad, 1);
    const RmseReport* reinforce256 = find(Method::reinforce_grad, 256);
    if (exact1 && reinforce256) c.gradient_claim = exact1->rmse <= reinforce256->rmse;
    return c;
}

/// CSV with columns method, sample_size, rmse, n_trials.
inline void write_rmse_csv(std::ostream& out, const std::vector<RmseReport>& reports) {
    out << "method,sample_size,rmse,n_trials\n";
    const auto old = out.precision(10);
    for (const auto& r : reports) out << to_string(r.method) << ',' << r.sample_size << ',' << r.rmse << ',' << r.n_trials << '\n';
    out.precision(old);
}

struct GradCheckConfig {
    std::vector<Index> dims{1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::size_t trials = 20;
    std::uint64_t seed = 0;
    std::size_t sample_size = 10000;
    double step = 1e-3;
    SamplingScheme scheme = SamplingScheme::lattice;
    /// FD threshold for d >= 2; d = 1 is held to closed_form_tolerance.
    double tolerance = 1e-2;
    double closed_form_tolerance = 1e-6;
    /// Harness self-test: scales the first analytic component by 1.05.
    bool corrupt = false;
};

struct GradCheckRow {
    Index dim = 0;
    std::size_t trial = 0;
    double rel_error = 0.0;
    bool closed_form = false;
    bool passed = false;
};

struct GradCheckReport {
    std::vector<GradCheckRow> rows;
    double max_rel_error = 0.0;
    bool passed = true;
};

/// Random problem for (dim, trial): m with independent N(0, 1) entries.
inline Vector grad_check_problem(Index dim, std::size_t trial, std::uint64_t seed) {
    UniformStream rng(derive_seed(seed, static_cast<std::uint64_t>(dim), trial));
    Vector m(dim);
    for (Index i = 0; i < dim; ++i) m(i) = detail::standard_normal(rng);
    return m;
}

/**
 * Analytic orthant gradient against an independent reference: the closed form
 * phi(m / sqrt 2) / sqrt 2 for d = 1, central differences of the value with
 * common random numbers otherwise.
 */
inline GradCheckReport gradient_check(const GradCheckConfig& config) {
    if (config.trials < 1) throw std::invalid_argument("gradient_check: trials must be positive");
    for (Index d : config.dims)
        if (d < 1) throw std::invalid_argument("gradient_check: dims must be >= 1");
    GradCheckReport report;
    report.rows.resize(config.dims.size() * config.trials);
    parallel_for(report.rows.size(), [&](std::size_t k) {
        const Index d = config.dims[k / config.trials];
        const std::size_t trial = k % config.trials;
        const Vector m = grad_check_problem(d, trial, config.seed);
        const auto factor = CholeskyFactor::exact(d);
        const GenzConfig genz{config.sample_size, derive_seed(config.seed, 0xfd, k), config.scheme};
        Vector analytic = orthant_probability_gradient(OrthantProblem(m, factor), genz).grad;
        if (config.corrupt) analytic(0) *= 1.05;
        GradCheckRow& row = report.rows[k];
        row.dim = d;
        row.trial = trial;
        if (d == 1) {
            const Vector reference = Vector::Constant(1, std_normal_pdf(m(0) / std::sqrt(2.0)) / std::sqrt(2.0));
            row.closed_form = true;
            row.rel_error = relative_error(analytic, reference);
            row.passed = row.rel_error <= config.closed_form_tolerance;
        } else {
            const Vector fd = finite_difference(
                [&](const Vector& x) { return orthant_probability(OrthantProblem(x, factor), genz).value; }, m, config.step);
            row.rel_error = relative_error(analytic, fd);
            row.passed = row.rel_error <= config.tolerance;
        }
    }, 1);
    for (const auto& row : report.rows) {
        report.max_rel_error = std::max(report.max_rel_error, row.rel_error);
        report.passed = report.passed && row.passed;
    }
    return report;
}

inline void write_grad_check_csv(std::ostream& out, const GradCheckReport& report) {
    out << "dim,trial,reference,rel_error,passed\n";
    const auto old = out.precision(10);
    for (const auto& r : report.rows)
        out << r.dim << ',' << r.trial << ',' << (r.closed_form ? "closed_form" : "finite_difference") << ','
            << r.rel_error << ',' << (r.passed ? 1 : 0) << '\n';
    out.precision(old);
}

}  // namespace exact::oracles
