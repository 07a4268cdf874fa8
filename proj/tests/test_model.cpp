// LTI model construction, seeded noise streams, and simulation.
#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include <innoguard/model.hpp>
#include <innoguard/rng.hpp>
#include <innoguard/scenario.hpp>

using namespace innoguard;

namespace {

SystemModel scalar_model(double a, double q, double r) {
    Eigen::MatrixXd A{{a}}, B{{0.0}}, C{{1.0}}, D{{0.0}}, E{{1.0}}, F{{0.0}};
    Eigen::MatrixXd Q{{q}}, R{{r}};
    return build_model(A, B, C, D, E, F, Q, R);
}

}  // namespace

// =============================================================================
// RngStream / sample_mvn
// =============================================================================

TEST(RngStream, Determinism) {
    RngStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    RngStream c(42), d(43);
    bool differ = false;
    for (int i = 0; i < 10; ++i) differ |= (c.next_u64() != d.next_u64());
    EXPECT_TRUE(differ);
}

TEST(RngStream, UniformInUnitInterval) {
    RngStream rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_uniform();
        EXPECT_GT(u, 0.0);
        EXPECT_LE(u, 1.0);
    }
}

TEST(SampleMvn, ZeroFactorGivesZero) {
    RngStream rng(1);
    const Eigen::VectorXd v = sample_mvn(Eigen::MatrixXd::Zero(3, 3), rng);
    EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SampleMvn, IdentityFactorMean) {
    RngStream rng(2024);
    const int draws = 100000;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (int i = 0; i < draws; ++i) mean += sample_mvn(Eigen::MatrixXd::Identity(2, 2), rng);
    mean /= draws;
    const double bound = 4.0 / std::sqrt(static_cast<double>(draws));
    EXPECT_LT(std::abs(mean(0)), bound);
    EXPECT_LT(std::abs(mean(1)), bound);
}

TEST(SampleMvn, ScaledFactorVariance) {
    RngStream rng(99);
    const Eigen::MatrixXd factor = 2.0 * Eigen::MatrixXd::Identity(1, 1);
    const int draws = 100000;
    double sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double x = sample_mvn(factor, rng)(0);
        sq += x * x;
    }
    EXPECT_NEAR(sq / draws, 4.0, 0.2);  // 5 percent
}

// =============================================================================
// build_model
// =============================================================================

TEST(BuildModel, CvModelAcceptedAndDetectable) {
    const SystemModel model = build_cv_model(5.0, 1e-2, 5.0);
    EXPECT_TRUE(model.detectable);
    EXPECT_EQ(model.n(), 4);
    EXPECT_EQ(model.m(), 2);
}

TEST(BuildModel, ZeroRRejected) {
    Eigen::MatrixXd A{{1.0}}, B{{0.0}}, C{{1.0}}, D{{0.0}}, E{{1.0}}, F{{0.0}};
    EXPECT_THROW(build_model(A, B, C, D, E, F, Eigen::MatrixXd{{0.0}}, Eigen::MatrixXd{{0.0}}),
                 NotPsd);
}

TEST(BuildModel, UnobservedMarginalModeFlagsNotDetectable) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 1);
    Eigen::MatrixXd C{{1.0, 0.0}};
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(1, 1);
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(2, 1);
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(1, 1);
    const SystemModel model = build_model(A, B, C, D, E, F, Eigen::MatrixXd::Identity(2, 2),
                                          Eigen::MatrixXd::Identity(1, 1));
    EXPECT_FALSE(model.detectable);
}

TEST(BuildModel, DimensionMismatchRejected) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 1);  // wrong rows
    Eigen::MatrixXd C{{1.0, 0.0}};
    EXPECT_THROW(build_model(A, B, C, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(2, 1),
                             Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Identity(2, 2),
                             Eigen::MatrixXd::Identity(1, 1)),
                 DimensionMismatch);
}

TEST(BuildModel, AsymmetricQRejected) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 1);
    Eigen::MatrixXd C{{1.0, 0.0}};
    Eigen::MatrixXd Q{{1.0, 0.5}, {0.0, 1.0}};
    EXPECT_THROW(build_model(A, B, C, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(2, 1),
                             Eigen::MatrixXd::Zero(1, 1), Q, Eigen::MatrixXd::Identity(1, 1)),
                 NotPsd);
}

// =============================================================================
// simulate
// =============================================================================

TEST(Simulate, AllZeroTrajectory) {
    const SystemModel model = build_cv_model(5.0, 1e-2, 5.0);
    const auto u = zero_sequence(2, 20);
    const auto d = zero_sequence(2, 20);
    const Trajectory traj = simulate_deterministic(model, u, d, Eigen::VectorXd::Zero(4));
    for (const auto& x : traj.x_seq) EXPECT_EQ(x.cwiseAbs().maxCoeff(), 0.0);
    for (const auto& y : traj.y_seq) EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Simulate, VelocityImpulsePropagation) {
    // Unit velocity impulse at k = 0: position ramps by T_s per step from k = 2.
    const SystemModel model = build_cv_model(5.0, 1e-2, 5.0);
    const Eigen::Index N = 10;
    auto u = zero_sequence(2, N);
    auto d = zero_sequence(2, N);
    d[0](0) = 1.0;
    const Trajectory traj = simulate_deterministic(model, u, d, Eigen::VectorXd::Zero(4));
    for (Eigen::Index k = 1; k < N; ++k) {
        EXPECT_NEAR(traj.x_seq[k](0), 5.0 * static_cast<double>(k - 1), 1e-12);
        EXPECT_NEAR(traj.x_seq[k](2), 1.0, 1e-12);
    }
}

TEST(Simulate, SeedDeterminism) {
    const SystemModel model = build_cv_model(5.0, 1e-2, 5.0);
    const auto u = default_inputs(50);
    const auto d = zero_sequence(2, 50);
    RngStream r1(12345), r2(12345);
    const Trajectory t1 = simulate(model, u, d, Eigen::VectorXd::Zero(4), r1);
    const Trajectory t2 = simulate(model, u, d, Eigen::VectorXd::Zero(4), r2);
    for (std::size_t k = 0; k < t1.x_seq.size(); ++k) {
        EXPECT_TRUE((t1.x_seq[k].array() == t2.x_seq[k].array()).all());
        EXPECT_TRUE((t1.y_seq[k].array() == t2.y_seq[k].array()).all());
    }
}

TEST(Simulate, DisturbanceLinearity) {
    const SystemModel model = build_cv_model(5.0, 1e-2, 5.0);
    const Eigen::Index N = 40;
    const auto u = default_inputs(N);
    RngStream rng(5);
    auto d1 = zero_sequence(2, N);
    auto d2 = zero_sequence(2, N);
    auto d12 = zero_sequence(2, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        d1[k] = 0.1 * rng.next_gaussian_vector(2);
        d2[k] = 0.1 * rng.next_gaussian_vector(2);
        d12[k] = d1[k] + d2[k];
    }
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(4);
    const Trajectory base = simulate_deterministic(model, u, zero_sequence(2, N), x0);
    const Trajectory ta = simulate_deterministic(model, u, d1, x0);
    const Trajectory tb = simulate_deterministic(model, u, d2, x0);
    const Trajectory tc = simulate_deterministic(model, u, d12, x0);
    for (std::size_t k = 0; k < static_cast<std::size_t>(N); ++k) {
        const Eigen::VectorXd lhs = tc.x_seq[k] - base.x_seq[k];
        const Eigen::VectorXd rhs = (ta.x_seq[k] - base.x_seq[k]) + (tb.x_seq[k] - base.x_seq[k]);
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Simulate, ProcessNoiseCovarianceMatchesQ) {
    // Reconstruct w[k] = x[k+1] - A x[k] on a long nominal run.
    const SystemModel model = build_cv_model(5.0, 1e-2, 5.0);
    const std::size_t N = 20000;
    const auto u = zero_sequence(2, N);
    const auto d = zero_sequence(2, N);
    RngStream rng(777);
    const Trajectory traj = simulate(model, u, d, Eigen::VectorXd::Zero(4), rng);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
    for (std::size_t k = 0; k + 1 < N; ++k) {
        const Eigen::VectorXd w = traj.x_seq[k + 1] - model.A * traj.x_seq[k];
        cov += w * w.transpose();
    }
    cov /= static_cast<double>(N - 1);
    EXPECT_LT((cov - model.Q).norm() / model.Q.norm(), 0.05);
}

TEST(Simulate, MismatchedSequenceLengths) {
    const SystemModel model = build_cv_model(5.0, 1e-2, 5.0);
    RngStream rng(1);
    EXPECT_THROW(simulate(model, zero_sequence(2, 5), zero_sequence(2, 4),
                          Eigen::VectorXd::Zero(4), rng),
                 DimensionMismatch);
}

TEST(Simulate, ScalarModelSmoke) {
    const SystemModel model = scalar_model(0.9, 0.1, 0.5);
    RngStream rng(3);
    const Trajectory traj =
        simulate(model, zero_sequence(1, 100), zero_sequence(1, 100), Eigen::VectorXd::Zero(1), rng);
    EXPECT_EQ(traj.samples(), 100);
}
