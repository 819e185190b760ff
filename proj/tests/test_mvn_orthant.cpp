#include <cmath>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "exact/linalg.hpp"
#include "exact/mvn_orthant.hpp"

using namespace exact;

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(t1 >= 0, t2 >= 0), t ~ N(m, S), by composite Simpson over t1.
double bivariate_orthant(double m1, double m2, double s11, double s12, double s22) {
    const double sd1 = std::sqrt(s11);
    const double cond_sd = std::sqrt(s22 - s12 * s12 / s11);
    const double lo = std::max(0.0, m1 - 14.0 * sd1), hi = std::max(0.0, m1 + 14.0 * sd1);
    if (hi <= lo) return 0.0;
    const int n = 20000;
    const double h = (hi - lo) / n;
    auto f = [&](double t) {
        const double dens = std::exp(-0.5 * (t - m1) * (t - m1) / s11) / (sd1 * std::sqrt(2.0 * M_PI));
        return dens * phi((m2 + s12 / s11 * (t - m1)) / cond_sd);
    };
    double sum = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

struct McResult {
    double value;
    double se;
};

// Plain Monte Carlo with its own generator.
McResult brute_force(const Vector& m, const Matrix& chol, int n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z;
    const Index d = m.size();
    Vector e(d);
    int hits = 0;
    for (int k = 0; k < n; ++k) {
        for (Index i = 0; i < d; ++i) e(i) = z(gen);
        const Vector t = m + chol * e;
        hits += (t.array() >= 0.0).all();
    }
    const double p = static_cast<double>(hits) / n;
    return {p, std::sqrt(std::max(p * (1 - p), 1e-12) / n)};
}

Matrix random_lower(Index d, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(-0.8, 0.8), diag(0.5, 1.5);
    Matrix l = Matrix::Zero(d, d);
    for (Index i = 0; i < d; ++i) {
        l(i, i) = diag(gen);
        for (Index j = 0; j < i; ++j) l(i, j) = u(gen);
    }
    return l;
}

GenzConfig lattice(std::size_t n, std::uint64_t seed = 0) {
    GenzConfig c;
    c.sample_size = n;
    c.seed = seed;
    c.scheme = SamplingScheme::lattice;
    return c;
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace

TEST(Orthant, OneDimensionIsExactForAnySampleSize) {
    for (double m : {-3.0, -1.0, -0.2, 0.0, 0.4, 2.5}) {
        const OrthantProblem p(vec({m}), CholeskyFactor::exact(1));
        for (std::size_t n : {1, 7, 1000}) {
            const OrthantEstimate e = orthant_probability(p, GenzConfig{n, 3});
            EXPECT_NEAR(e.value, phi(m / std::sqrt(2.0)), 1e-12) << "m = " << m;
            EXPECT_LT(e.std_error, 1e-14);
        }
    }
    EXPECT_DOUBLE_EQ(orthant_probability(OrthantProblem(vec({0.0}), CholeskyFactor::exact(1)), {}).value, 0.5);
}

TEST(Orthant, ZeroMeanTwoDimensionsIsOneThird) {
    const OrthantProblem p(Vector::Zero(2), CholeskyFactor::exact(2));
    const OrthantEstimate mc = orthant_probability(p, GenzConfig{100000, 1});
    EXPECT_NEAR(mc.value, 1.0 / 3.0, 4.0 * mc.std_error);
    EXPECT_LT(mc.std_error, 2e-3);
    EXPECT_NEAR(orthant_probability(p, lattice(100000)).value, 1.0 / 3.0, 1e-4);
}

// With Sigma = I + J and zero mean the orthant probability is E[Phi(z)^d] = 1 / (d + 1).
TEST(Orthant, ZeroMeanExchangeableMatchesClosedForm) {
    for (Index d = 1; d <= 12; ++d) {
        const OrthantProblem p(Vector::Zero(d), CholeskyFactor::exact(d));
        const OrthantEstimate e = orthant_probability(p, GenzConfig{20000, static_cast<std::uint64_t>(d)});
        EXPECT_NEAR(e.value, 1.0 / static_cast<double>(d + 1), std::max(4.0 * e.std_error, 1e-12)) << "d = " << d;
        EXPECT_NEAR(orthant_probability(p, lattice(20000)).value, 1.0 / static_cast<double>(d + 1), 2e-3) << "d = " << d;
    }
}

TEST(Orthant, BivariateAgreesWithQuadrature) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> mean(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix l = random_lower(2, gen);
        const Matrix s = l * l.transpose();
        const Vector m = vec({mean(gen), mean(gen)});
        const double truth = bivariate_orthant(m(0), m(1), s(0, 0), s(0, 1), s(1, 1));
        const OrthantEstimate e = orthant_probability(OrthantProblem(m, l), lattice(50000, trial));
        EXPECT_NEAR(e.value, truth, std::max(5.0 * e.std_error, 2e-4)) << "trial " << trial;
    }
}

TEST(Orthant, HigherDimensionsAgreeWithBruteForce) {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> mean(0.0, 1.0);
    for (Index d : {3, 5, 8}) {
        for (int trial = 0; trial < 3; ++trial) {
            const Matrix l = random_lower(d, gen);
            Vector m(d);
            for (Index i = 0; i < d; ++i) m(i) = mean(gen) + 0.8;
            const McResult truth = brute_force(m, l, 400000, 100 + trial);
            const OrthantEstimate e = orthant_probability(OrthantProblem(m, l), GenzConfig{40000, 9});
            EXPECT_NEAR(e.value, truth.value, 4.0 * std::hypot(truth.se, e.std_error)) << "d = " << d;
        }
    }
}

TEST(Orthant, ExactCovarianceAgreesWithBruteForce) {
    const Vector m = vec({1.0, 2.0, 0.5, -1.0, 3.0});
    const McResult truth = brute_force(m, exact_sigma_cholesky(5), 1000000, 77);
    const OrthantEstimate e = orthant_probability(OrthantProblem(m, CholeskyFactor::exact(5)), GenzConfig{100000, 2});
    EXPECT_NEAR(e.value, truth.value, 4.0 * std::hypot(truth.se, e.std_error));
}

TEST(Orthant, PermutingExchangeableMeansLeavesValueUnchanged) {
    const Vector m = vec({0.3, -1.2, 2.0, 0.0});
    const Vector perm = vec({2.0, 0.0, 0.3, -1.2});
    const auto f = CholeskyFactor::exact(4);
    const OrthantEstimate a = orthant_probability(OrthantProblem(m, f), lattice(50000));
    const OrthantEstimate b = orthant_probability(OrthantProblem(perm, f), lattice(50000));
    EXPECT_NEAR(a.value, b.value, 4.0 * std::hypot(a.std_error, b.std_error) + 1e-6);
}

TEST(Orthant, EstimatesStayInUnitInterval) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> mean(0.0, 20.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Index d = 1 + trial % 7;
        Vector m(d);
        for (Index i = 0; i < d; ++i) m(i) = mean(gen);
        const OrthantEstimate e = orthant_probability(OrthantProblem(m, random_lower(d, gen)), GenzConfig{16, 1});
        EXPECT_GE(e.value, 0.0);
        EXPECT_LE(e.value, 1.0);
        EXPECT_TRUE(std::isfinite(e.std_error));
    }
}

TEST(Orthant, ExtremeMeansSaturate) {
    const auto f = CholeskyFactor::exact(4);
    EXPECT_NEAR(orthant_probability(OrthantProblem(Vector::Constant(4, 40.0), f), {}).value, 1.0, 1e-11);
    EXPECT_LE(orthant_probability(OrthantProblem(Vector::Constant(4, -40.0), f), {}).value, 1e-12);
}

TEST(Orthant, DeterministicGivenSeed) {
    const OrthantProblem p(vec({0.2, 1.1, -0.4}), CholeskyFactor::exact(3));
    const OrthantEstimate a = orthant_probability(p, GenzConfig{64, 5});
    const OrthantEstimate b = orthant_probability(p, GenzConfig{64, 5});
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.std_error, b.std_error);
    EXPECT_NE(a.value, orthant_probability(p, GenzConfig{64, 6}).value);
}

TEST(Orthant, StandardErrorShrinksLikeRootN) {
    const OrthantProblem p(vec({0.2, 1.1, -0.4, 0.5}), CholeskyFactor::exact(4));
    const double small = orthant_probability(p, GenzConfig{1000, 1}).std_error;
    const double large = orthant_probability(p, GenzConfig{100000, 1}).std_error;
    EXPECT_NEAR(small / large, 10.0, 2.5);
}

TEST(Orthant, LatticeBeatsPlainSampling) {
    const OrthantProblem p(vec({0.5, -0.3, 1.0, 0.2, 0.7}), CholeskyFactor::exact(5));
    const double truth = orthant_probability(p, lattice(400000, 99)).value;
    double err_mc = 0.0, err_lat = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        err_mc += std::pow(orthant_probability(p, GenzConfig{4096, s}).value - truth, 2);
        err_lat += std::pow(orthant_probability(p, lattice(4096, s)).value - truth, 2);
    }
    EXPECT_LT(err_lat, err_mc);
}

TEST(Orthant, MonotoneInEachMeanEntry) {
    const Vector m = vec({0.4, -0.6, 1.2, 0.0});
    const auto f = CholeskyFactor::exact(4);
    const double base = orthant_probability(OrthantProblem(m, f), lattice(20000)).value;
    for (Index i = 0; i < 4; ++i) {
        Vector up = m;
        up(i) += 0.5;
        EXPECT_GT(orthant_probability(OrthantProblem(up, f), lattice(20000)).value, base) << "i = " << i;
    }
}

TEST(Orthant, RejectsBadInput) {
    EXPECT_THROW(OrthantProblem(Vector::Zero(3), CholeskyFactor::exact(2)), std::invalid_argument);
    EXPECT_THROW(OrthantProblem(Vector::Zero(2), CholeskyFactorPtr{}), std::invalid_argument);
    Matrix upper(2, 2);
    upper << 1, 1, 0, 1;
    EXPECT_THROW(CholeskyFactor{upper}, std::invalid_argument);
    Matrix neg(2, 2);
    neg << -1, 0, 0, 1;
    EXPECT_THROW(CholeskyFactor{neg}, std::invalid_argument);
    const OrthantProblem p(Vector::Zero(2), CholeskyFactor::exact(2));
    EXPECT_THROW(orthant_probability(p, GenzConfig{0, 0}), std::invalid_argument);
}

TEST(Orthant, FactorStructureFlags) {
    EXPECT_TRUE(CholeskyFactor::exact(6)->column_constant());
    EXPECT_TRUE(CholeskyFactor::exact(6)->exchangeable());
    std::mt19937_64 gen(1);
    const CholeskyFactor general(random_lower(4, gen));
    EXPECT_FALSE(general.column_constant());
    EXPECT_FALSE(general.exchangeable());
    const CholeskyFactor diag(Matrix::Identity(3, 3) * 2.0);
    EXPECT_TRUE(diag.exchangeable());
}

TEST(ConditionalParameters, ExactSigmaTwoDimensions) {
    const ConditionalNormal c = conditional_parameters(vec({1.0, 3.0}), exact_sigma_cholesky(2), 0);
    ASSERT_EQ(c.mean.size(), 1);
    EXPECT_NEAR(c.mean(0), 3.0 - 1.0 / 2.0, 1e-12);
    EXPECT_NEAR(c.chol(0, 0) * c.chol(0, 0), 1.5, 1e-12);
}

TEST(ConditionalParameters, ExactSigmaGeneralDimension) {
    // Conditioning I + J on one coordinate leaves I + J/2 and shifts means by m_i / 2.
    const Vector m = vec({0.5, -1.0, 2.0, 4.0});
    for (Index i = 0; i < 4; ++i) {
        const ConditionalNormal c = conditional_parameters(m, exact_sigma_cholesky(4), i);
        const Matrix cov = c.chol * c.chol.transpose();
        const Matrix expected = Matrix::Identity(3, 3) + 0.5 * Matrix::Ones(3, 3);
        EXPECT_LE(max_abs_diff(cov, expected), 1e-12);
        for (Index k = 0, r = 0; k < 4; ++k)
            if (k != i) {
                EXPECT_NEAR(c.mean(r++), m(k) - m(i) / 2.0, 1e-12);
            }
    }
}

TEST(ConditionalParameters, DiagonalCovarianceDropsCoordinate) {
    Matrix l = Matrix::Zero(3, 3);
    l.diagonal() = vec({1.0, 2.0, 3.0});
    const ConditionalNormal c = conditional_parameters(vec({1.0, 2.0, 3.0}), l, 1);
    EXPECT_NEAR(c.mean(0), 1.0, 1e-15);
    EXPECT_NEAR(c.mean(1), 3.0, 1e-15);
    EXPECT_NEAR(c.chol(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(c.chol(1, 1), 3.0, 1e-15);
    EXPECT_EQ(c.chol(1, 0), 0.0);
}

TEST(ConditionalParameters, RejectsBadIndex) {
    EXPECT_THROW(conditional_parameters(Vector::Zero(1), Matrix::Identity(1, 1), 0), std::invalid_argument);
    EXPECT_THROW(conditional_parameters(Vector::Zero(2), Matrix::Identity(2, 2), 2), std::out_of_range);
}

TEST(OrthantGradient, OneDimensionClosedForm) {
    const OrthantGradient g = orthant_probability_gradient(OrthantProblem(vec({0.0}), CholeskyFactor::exact(1)), {});
    EXPECT_NEAR(g.grad(0), 0.282095, 1e-6);
    for (double m : {-2.0, 0.5, 3.0}) {
        const OrthantGradient gm = orthant_probability_gradient(OrthantProblem(vec({m}), CholeskyFactor::exact(1)), {});
        const double expected = std::exp(-m * m / 4.0) / std::sqrt(4.0 * M_PI);
        EXPECT_NEAR(gm.grad(0), expected, 1e-14);
    }
}

TEST(OrthantGradient, BivariateMatchesQuadratureDerivative) {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> mean(-1.5, 1.5);
    const double h = 1e-4;
    for (int trial = 0; trial < 8; ++trial) {
        const Matrix l = trial % 2 ? random_lower(2, gen) : exact_sigma_cholesky(2);
        const Matrix s = l * l.transpose();
        const Vector m = vec({mean(gen), mean(gen)});
        auto q = [&](const Vector& v) { return bivariate_orthant(v(0), v(1), s(0, 0), s(0, 1), s(1, 1)); };
        const OrthantGradient g = orthant_probability_gradient(OrthantProblem(m, l), GenzConfig{16, 0});
        for (Index i = 0; i < 2; ++i) {
            Vector up = m, down = m;
            up(i) += h;
            down(i) -= h;
            // In two dimensions the inner integral is one-dimensional, hence exact.
            EXPECT_NEAR(g.grad(i), (q(up) - q(down)) / (2 * h), 1e-7) << "trial " << trial << " i " << i;
        }
    }
}

TEST(OrthantGradient, MatchesCommonRandomNumberDifferences) {
    std::mt19937_64 gen(21);
    std::normal_distribution<double> mean(0.0, 1.0);
    const double h = 1e-3;
    for (Index d : {3, 4, 6}) {
        Vector m(d);
        for (Index i = 0; i < d; ++i) m(i) = mean(gen);
        const auto f = CholeskyFactor::exact(d);
        const GenzConfig c = lattice(20000, 4);
        const OrthantGradient g = orthant_probability_gradient(OrthantProblem(m, f), c);
        for (Index i = 0; i < d; ++i) {
            Vector up = m, down = m;
            up(i) += h;
            down(i) -= h;
            const double fd =
                (orthant_probability(OrthantProblem(up, f), c).value - orthant_probability(OrthantProblem(down, f), c).value) /
                (2 * h);
            EXPECT_NEAR(g.grad(i), fd, 1e-2 * std::max(std::fabs(fd), 1e-3)) << "d " << d << " i " << i;
        }
    }
}

TEST(OrthantGradient, SymmetricMeansGiveEqualEntries) {
    const Vector m = Vector::Constant(5, 0.7);
    const OrthantGradient g = orthant_probability_gradient(OrthantProblem(m, CholeskyFactor::exact(5)), lattice(20000));
    for (Index i = 1; i < 5; ++i) EXPECT_NEAR(g.grad(i), g.grad(0), 4.0 * std::hypot(g.grad_std_error(i), g.grad_std_error(0)) + 1e-5);
}

TEST(OrthantGradient, EntriesArePositiveAndBounded) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> mean(0.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Index d = 2 + trial % 6;
        Vector m(d);
        for (Index i = 0; i < d; ++i) m(i) = mean(gen);
        const auto f = CholeskyFactor::exact(d);
        const OrthantGradient g = orthant_probability_gradient(OrthantProblem(m, f), GenzConfig{32, 1});
        for (Index i = 0; i < d; ++i) {
            EXPECT_GE(g.grad(i), 0.0);
            // Bounded by the marginal density at its mode.
            EXPECT_LE(g.grad(i), 1.0 / std::sqrt(4.0 * M_PI) + 1e-12);
        }
    }
}

TEST(OrthantGradient, GeneralCovarianceUsesPerCoordinateConditioning) {
    std::mt19937_64 gen(33);
    const Matrix l = random_lower(3, gen);
    const Vector m = vec({0.3, -0.2, 0.9});
    const GenzConfig c = lattice(40000, 2);
    const OrthantGradient g = orthant_probability_gradient(OrthantProblem(m, l), c);
    const double h = 1e-3;
    for (Index i = 0; i < 3; ++i) {
        Vector up = m, down = m;
        up(i) += h;
        down(i) -= h;
        const double fd = (orthant_probability(OrthantProblem(up, l), c).value - orthant_probability(OrthantProblem(down, l), c).value) / (2 * h);
        EXPECT_NEAR(g.grad(i), fd, 1e-2 * std::max(std::fabs(fd), 1e-3));
    }
}
