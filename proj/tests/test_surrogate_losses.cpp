#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "exact/surrogate_losses.hpp"
#include "exact/tabular_data.hpp"
#include "exact/trainer.hpp"

using namespace exact;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& gen, double scale = 1.0) {
    std::normal_distribution<double> z(0.0, scale);
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = z(gen);
    return m;
}

std::vector<ClassLabel> random_labels(Index rows, Index classes, std::mt19937_64& gen) {
    std::vector<ClassLabel> y(static_cast<std::size_t>(rows));
    for (auto& v : y) v = 1 + static_cast<int>(gen() % static_cast<unsigned>(classes));
    return y;
}

// Naive per-row cross-entropy without the max shift.
double naive_cross_entropy(const Matrix& logits, const std::vector<ClassLabel>& y) {
    double total = 0.0;
    for (Index b = 0; b < logits.rows(); ++b) {
        double z = 0.0;
        for (Index j = 0; j < logits.cols(); ++j) z += std::exp(logits(b, j));
        total += std::log(z) - logits(b, y[static_cast<std::size_t>(b)] - 1);
    }
    return total / static_cast<double>(logits.rows());
}

double naive_hinge(const Matrix& logits, const std::vector<ClassLabel>& y, double margin) {
    double total = 0.0;
    for (Index b = 0; b < logits.rows(); ++b) {
        const Index yi = y[static_cast<std::size_t>(b)] - 1;
        for (Index j = 0; j < logits.cols(); ++j)
            if (j != yi) total += std::max(0.0, margin - logits(b, yi) + logits(b, j));
    }
    return total / static_cast<double>(logits.rows());
}

template <typename F>
Matrix numeric_gradient(const Matrix& x, F&& f, double h = 1e-6) {
    Matrix g(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < x.cols(); ++j) {
            Matrix up = x, down = x;
            up(i, j) += h;
            down(i, j) -= h;
            g(i, j) = (f(up) - f(down)) / (2 * h);
        }
    return g;
}

}  // namespace

TEST(CrossEntropy, UniformLogitsGiveLogC) {
    const Matrix logits = Matrix::Zero(3, 4);
    const LossAndGrad r = cross_entropy_batch(logits, std::vector<ClassLabel>{1, 2, 4});
    EXPECT_NEAR(r.loss, std::log(4.0), 1e-15);
    EXPECT_NEAR(r.grad(0, 0), (0.25 - 1.0) / 3.0, 1e-15);
    EXPECT_NEAR(r.grad(0, 1), 0.25 / 3.0, 1e-15);
}

TEST(CrossEntropy, MatchesNaiveFormula) {
    std::mt19937_64 gen(1);
    for (Index c : {2, 3, 7}) {
        const Matrix logits = random_matrix(6, c, gen, 3.0);
        const auto y = random_labels(6, c, gen);
        EXPECT_NEAR(cross_entropy_batch(logits, y).loss, naive_cross_entropy(logits, y), 1e-12);
    }
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
    std::mt19937_64 gen(2);
    const Matrix logits = random_matrix(5, 4, gen, 2.0);
    const auto y = random_labels(5, 4, gen);
    const Matrix fd = numeric_gradient(logits, [&](const Matrix& x) { return naive_cross_entropy(x, y); });
    EXPECT_LE((cross_entropy_batch(logits, y).grad - fd).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CrossEntropy, GradientRowsSumToZero) {
    std::mt19937_64 gen(3);
    const Matrix logits = random_matrix(8, 5, gen, 4.0);
    const LossAndGrad r = cross_entropy_batch(logits, random_labels(8, 5, gen));
    for (Index i = 0; i < 8; ++i) EXPECT_NEAR(r.grad.row(i).sum(), 0.0, 1e-15);
}

TEST(CrossEntropy, ShiftInvariant) {
    std::mt19937_64 gen(4);
    const Matrix logits = random_matrix(4, 3, gen);
    const auto y = random_labels(4, 3, gen);
    const LossAndGrad a = cross_entropy_batch(logits, y);
    const LossAndGrad b = cross_entropy_batch(logits.array() + 37.0, y);
    EXPECT_NEAR(a.loss, b.loss, 1e-12);
    EXPECT_LE((a.grad - b.grad).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CrossEntropy, SaturatesWithoutOverflow) {
    Matrix logits(2, 2);
    logits << 1000.0, 0.0, 0.0, 1000.0;
    const LossAndGrad right = cross_entropy_batch(logits, std::vector<ClassLabel>{1, 2});
    EXPECT_EQ(right.loss, 0.0);
    const LossAndGrad wrong = cross_entropy_batch(logits, std::vector<ClassLabel>{2, 1});
    EXPECT_NEAR(wrong.loss, 1000.0, 1e-9);
    EXPECT_TRUE(wrong.grad.allFinite());
    EXPECT_NEAR(wrong.grad(0, 0), 0.5, 1e-15);
}

TEST(CrossEntropy, ToyOneStationaryNearPointSeven) {
    const TabularDataset data = toy1();
    auto loss_at = [&](double t) {
        LinearModel m = LinearModel::zeros(2, 1);
        m.weights(0, 0) = 1.0;
        m.bias(0) = -t;
        return cross_entropy_batch(m.logits(data.features), data.labels);
    };
    // d/dt of the mean loss equals minus the summed bias gradient.
    const double slope = -loss_at(0.7).grad.col(1).sum();
    EXPECT_LE(std::fabs(slope), 1e-3);
    const double h = 1e-5;
    EXPECT_NEAR(slope, (loss_at(0.7 + h).loss - loss_at(0.7 - h).loss) / (2 * h), 1e-8);
    EXPECT_LT(-loss_at(0.69).grad.col(1).sum(), 0.0);
    EXPECT_GT(-loss_at(0.71).grad.col(1).sum(), 0.0);
}

TEST(Hinge, BinaryExamples) {
    // Two classes with the first logit pinned to 0 reduce to max(0, 1 - s f).
    Matrix logits(4, 2);
    logits << 0.0, 2.0, 0.0, 0.5, 0.0, -0.5, 0.0, 1.0;
    const std::vector<ClassLabel> y{2, 2, 2, 2};
    const LossAndGrad r = hinge_batch(logits, y, HingeConfig{});
    EXPECT_NEAR(r.loss, (0.0 + 0.5 + 1.5 + 0.0) / 4.0, 1e-15);
    // At the kink (f = 1) the subgradient is zero.
    EXPECT_EQ(r.grad.row(3).cwiseAbs().sum(), 0.0);
    EXPECT_EQ(r.grad(1, 1), -0.25);
    EXPECT_EQ(r.grad(1, 0), 0.25);
}

TEST(Hinge, MulticlassExample) {
    Matrix logits(1, 3);
    logits << 1.0, 2.0, 1.5;
    const LossAndGrad r = hinge_batch(logits, std::vector<ClassLabel>{1}, HingeConfig{});
    EXPECT_NEAR(r.loss, 2.0 + 1.5, 1e-15);
    const LossAndGrad m = hinge_batch(logits, std::vector<ClassLabel>{2}, HingeConfig{0.25});
    EXPECT_EQ(m.loss, 0.0);
}

TEST(Hinge, MatchesNaiveFormula) {
    std::mt19937_64 gen(5);
    for (double margin : {0.5, 1.0, 3.0}) {
        const Matrix logits = random_matrix(7, 5, gen, 2.0);
        const auto y = random_labels(7, 5, gen);
        EXPECT_NEAR(hinge_batch(logits, y, HingeConfig{margin}).loss, naive_hinge(logits, y, margin), 1e-12);
    }
}

TEST(Hinge, GradientMatchesFiniteDifferencesAwayFromKinks) {
    std::mt19937_64 gen(6);
    const Matrix logits = random_matrix(6, 4, gen, 2.0);
    const auto y = random_labels(6, 4, gen);
    const Matrix fd = numeric_gradient(logits, [&](const Matrix& x) { return naive_hinge(x, y, 1.0); });
    EXPECT_LE((hinge_batch(logits, y, HingeConfig{}).grad - fd).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Hinge, GradientRowsSumToZero) {
    std::mt19937_64 gen(7);
    const Matrix logits = random_matrix(8, 6, gen);
    const LossAndGrad r = hinge_batch(logits, random_labels(8, 6, gen), HingeConfig{});
    for (Index i = 0; i < 8; ++i) EXPECT_EQ(r.grad.row(i).sum(), 0.0);
}

TEST(Hinge, ShiftInvariantAndLinearWhenAllViolated) {
    Matrix logits(2, 3);
    logits << 0.0, 3.0, 4.0, 2.0, 0.5, -1.0;
    const std::vector<ClassLabel> y{1, 3};
    const LossAndGrad a = hinge_batch(logits, y, HingeConfig{});
    const LossAndGrad b = hinge_batch(logits.array() - 8.0, y, HingeConfig{});
    EXPECT_EQ(a.loss, b.loss);
    // Every pair violates the margin, so the loss is linear in the logits.
    const LossAndGrad c = hinge_batch(logits * 2.0, y, HingeConfig{2.0});
    EXPECT_NEAR(c.loss, 2.0 * a.loss, 1e-12);
}

TEST(Surrogates, RejectBadInput) {
    const Matrix logits = Matrix::Zero(2, 3);
    EXPECT_THROW(cross_entropy_batch(logits, std::vector<ClassLabel>{1}), std::invalid_argument);
    EXPECT_THROW(cross_entropy_batch(logits, std::vector<ClassLabel>{1, 4}), std::out_of_range);
    EXPECT_THROW(hinge_batch(logits, std::vector<ClassLabel>{0, 1}, HingeConfig{}), std::out_of_range);
    EXPECT_THROW(hinge_batch(logits, std::vector<ClassLabel>{1, 1}, HingeConfig{0.0}), std::invalid_argument);
    EXPECT_THROW(cross_entropy_batch(Matrix::Zero(0, 3), std::vector<ClassLabel>{}), std::invalid_argument);
}
