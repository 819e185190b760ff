#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exact/exact.hpp"

namespace fs = std::filesystem;
using namespace exact;

namespace {

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f.precision(10);
    return f;
}

const char* pass_fail(bool ok) { return ok ? "pass" : "fail"; }

int cmd_toy1(LossKind loss, std::uint64_t seed, const fs::path& out) {
    const toys::Toy1Report r = toys::run_toy1(loss, seed);
    bool ok = false;
    auto f = open_out(out, "report.txt");
    f << "problem = toy1\nloss = " << to_string(loss) << "\nseed = " << seed << "\nthreshold = " << r.threshold
      << "\naccuracy = " << r.accuracy << '\n';
    if (loss == LossKind::exact) {
        ok = r.threshold > 0.0 && r.threshold < 0.25 && r.accuracy == 1.0;
        f << "expected = threshold in (0, 0.25), accuracy 1\n";
    } else {
        f << "sweep_minimizer = " << r.sweep_minimizer << "\nsweep_accuracy = " << r.sweep_accuracy
          << "\nplateau_low = " << r.plateau_low << "\nplateau_high = " << r.plateau_high << '\n';
        const bool two_thirds = std::abs(r.sweep_accuracy - 2.0 / 3.0) < 1e-12;
        if (loss == LossKind::cross_entropy) {
            ok = std::abs(r.sweep_minimizer - 0.7) <= 0.05 && two_thirds;
            f << "expected = sweep minimizer 0.7 +- 0.05, accuracy 2/3\n";
        } else {
            ok = r.plateau_low <= 0.75 + 1e-9 && r.plateau_high >= 1.0 - 1e-9 && two_thirds;
            f << "expected = minimizing plateau covers [0.75, 1], accuracy 2/3\n";
        }
    }
    f << "check = " << pass_fail(ok) << '\n';
    auto land = open_out(out, "landscape.csv");
    toys::write_toy1_landscape(land);
    std::cout << "toy1 " << to_string(loss) << ": threshold " << r.threshold << ", accuracy " << r.accuracy << " ["
              << pass_fail(ok) << "]\n";
    return ok ? 0 : 1;
}

int cmd_toy2(LossKind loss, std::uint64_t seed, const fs::path& out) {
    const toys::Toy2Report r = toys::run_toy2(loss, seed);
    const double expected = loss == LossKind::exact ? 0.8 : 0.6;
    bool ok = std::abs(r.accuracy - expected) < 1e-12;
    auto f = open_out(out, "report.txt");
    f << "problem = toy2\nloss = " << to_string(loss) << "\nseed = " << seed << "\nweight = " << r.weight
      << "\nbias = " << r.bias << "\nthreshold = " << r.threshold << "\naccuracy = " << r.accuracy << '\n';
    if (loss != LossKind::exact) {
        f << "optimum_accuracy_min = " << r.optimum_accuracy_min << "\noptimum_accuracy_max = " << r.optimum_accuracy_max
          << '\n';
        ok = ok && std::abs(r.optimum_accuracy_max - expected) < 1e-12;
    }
    f << "expected_accuracy = " << expected << "\ncheck = " << pass_fail(ok) << '\n';
    auto land = open_out(out, "landscape.csv");
    toys::write_toy2_landscape(land);
    std::cout << "toy2 " << to_string(loss) << ": threshold " << r.threshold << ", accuracy " << r.accuracy << " ["
              << pass_fail(ok) << "]\n";
    return ok ? 0 : 1;
}

int cmd_train(const fs::path& config_path, const std::optional<std::uint64_t>& seed, const std::optional<fs::path>& out) {
    RunConfig rc;
    try {
        rc = load_run_config(config_path);
    } catch (const ConfigErrors& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    if (seed) rc.train.seed = *seed;
    if (out) rc.out = *out;
    const RunOutcome o = execute_run(rc);
    write_run_artifacts(rc, o);
    for (const auto& w : o.result.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "train accuracy " << o.train_accuracy << ", test accuracy " << o.test_accuracy << " -> "
              << rc.out.string() << '\n';
    return 0;
}

int cmd_bench(const std::vector<std::size_t>& sizes, std::size_t trials, std::size_t truth_samples, std::uint64_t seed,
              const fs::path& out) {
    const auto problem = oracles::BenchmarkProblem::reference();
    const auto truth = oracles::benchmark_truth(problem, truth_samples, seed);
    const auto reports = oracles::rmse_benchmark(sizes, trials, seed, problem, truth);
    const auto checks = oracles::check_benchmark(reports);
    auto csv = open_out(out, "rmse.csv");
    oracles::write_rmse_csv(csv, reports);
    auto f = open_out(out, "summary.txt");
    f << "mu = 1,2,0.5,10,6,-3,-4,5,1,0\nlabel = " << problem.label << " (argmax of mu)\nsigma = " << problem.sigma
      << "\nseed = " << seed << "\ntrials = " << trials << "\ntruth_samples = " << truth_samples
      << "\ntruth_value = " << truth.value << "\nvalue_ordering = " << pass_fail(checks.value_ordering)
      << "\ngradient_claim = " << (checks.gradient_claim ? pass_fail(*checks.gradient_claim) : "skipped") << '\n';
    oracles::write_rmse_csv(std::cout, reports);
    std::cout << "value ordering: " << pass_fail(checks.value_ordering) << ", gradient claim: "
              << (checks.gradient_claim ? pass_fail(*checks.gradient_claim) : "skipped") << '\n';
    return checks.passed() ? 0 : 1;
}

int cmd_grad_check(const oracles::GradCheckConfig& config, const std::optional<fs::path>& out) {
    const auto report = oracles::gradient_check(config);
    if (out) {
        auto csv = open_out(*out, "grad_check.csv");
        oracles::write_grad_check_csv(csv, report);
    }
    for (Index d : config.dims) {
        double worst = 0.0;
        for (const auto& r : report.rows)
            if (r.dim == d) worst = std::max(worst, r.rel_error);
        std::cout << "dim = " << d << " max_rel_error = " << worst << '\n';
    }
    std::cout << "max_rel_error = " << report.max_rel_error << "\nresult = " << pass_fail(report.passed) << '\n';
    return report.passed ? 0 : 1;
}

std::vector<Index> parse_dims(const std::string& spec) {
    std::vector<Index> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto comma = std::min(spec.find(',', pos), spec.size());
        const std::string part = spec.substr(pos, comma - pos);
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            out.push_back(std::stol(part));
        } else {
            const long lo = std::stol(part.substr(0, dash)), hi = std::stol(part.substr(dash + 1));
            for (long d = lo; d <= hi; ++d) out.push_back(d);
        }
        pos = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EXACT: expected accuracy optimization for linear classifiers"};
    app.require_subcommand(1);

    std::string loss_name = "exact";
    std::uint64_t seed = 0;
    std::string out_dir;
    const std::vector<std::string> loss_names{"exact", "ce", "cross_entropy", "hinge"};

    auto* toy1_cmd = app.add_subcommand("toy1", "three-point threshold problem");
    auto* toy2_cmd = app.add_subcommand("toy2", "five-point problem with a learned weight");
    for (auto* c : {toy1_cmd, toy2_cmd}) {
        c->add_option("--loss", loss_name, "loss kind")->check(CLI::IsMember(loss_names));
        c->add_option("--seed", seed, "random seed");
        c->add_option("--out", out_dir, "output directory")->default_val(c == toy1_cmd ? "toy1" : "toy2");
    }

    std::string config_path;
    std::optional<std::uint64_t> train_seed;
    std::optional<std::string> train_out;
    auto* train_cmd = app.add_subcommand("train", "train a linear model from a run config");
    train_cmd->add_option("--config", config_path, "run config (JSON)")->required();
    train_cmd->add_option("--seed", train_seed, "override the config seed");
    train_cmd->add_option("--out", train_out, "override the output directory");

    std::vector<std::size_t> sizes{1, 4, 16, 64, 256};
    std::size_t trials = 1000, truth_samples = 1000000;
    auto* bench_cmd = app.add_subcommand("bench-integration", "RMSE of Genz and Monte-Carlo estimators");
    bench_cmd->add_option("--sizes", sizes, "sample sizes")->delimiter(',');
    bench_cmd->add_option("--trials", trials, "independent trials per size");
    bench_cmd->add_option("--truth-samples", truth_samples, "sample size of the ground truth");
    bench_cmd->add_option("--seed", seed, "random seed");
    bench_cmd->add_option("--out", out_dir, "output directory")->default_val("bench");

    oracles::GradCheckConfig gc;
    std::string dims_spec = "1-9";
    std::optional<std::string> gc_out;
    auto* grad_cmd = app.add_subcommand("grad-check", "analytic gradient against finite differences");
    grad_cmd->add_option("--dims", dims_spec, "dimensions, e.g. 1-9 or 2,5");
    grad_cmd->add_option("--trials", gc.trials, "random problems per dimension");
    grad_cmd->add_option("--seed", gc.seed, "random seed");
    grad_cmd->add_option("--sample-size", gc.sample_size, "Genz sample size");
    grad_cmd->add_option("--out", gc_out, "directory for grad_check.csv");
    grad_cmd->add_flag("--corrupt", gc.corrupt, "perturb the analytic gradient")->group("");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*toy1_cmd) return cmd_toy1(parse_loss_kind(loss_name), seed, out_dir);
        if (*toy2_cmd) return cmd_toy2(parse_loss_kind(loss_name), seed, out_dir);
        if (*train_cmd) {
            std::optional<fs::path> out;
            if (train_out) out = fs::path(*train_out);
            return cmd_train(config_path, train_seed, out);
        }
        if (*bench_cmd) return cmd_bench(sizes, trials, truth_samples, seed, out_dir);
        if (*grad_cmd) {
            gc.dims = parse_dims(dims_spec);
            std::optional<fs::path> out;
            if (gc_out) out = fs::path(*gc_out);
            return cmd_grad_check(gc, out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
