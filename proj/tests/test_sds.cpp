// The four-test detection suite and Fisher fusion.
#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include <innoguard/rng.hpp>
#include <innoguard/sds.hpp>

using namespace innoguard;

namespace {

InnovationWindow iid_window(Eigen::Index N, Eigen::Index m, RngStream& rng) {
    InnovationWindow w;
    w.z.reserve(N);
    for (Eigen::Index k = 0; k < N; ++k) w.z.push_back(rng.next_gaussian_vector(m));
    return w;
}

InnovationWindow zero_window(Eigen::Index N, Eigen::Index m) {
    InnovationWindow w;
    w.z.assign(N, Eigen::VectorXd::Zero(m));
    return w;
}

// Kolmogorov-Smirnov distance to Uniform[0,1].
double ks_uniform(std::vector<double> p) {
    std::sort(p.begin(), p.end());
    double d = 0.0;
    const double n = static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double hi = (static_cast<double>(i) + 1.0) / n - p[i];
        const double lo = p[i] - static_cast<double>(i) / n;
        d = std::max(d, std::max(hi, lo));
    }
    return d;
}

}  // namespace

// =============================================================================
// bias test
// =============================================================================

TEST(BiasTest, AllZeroWindow) {
    const auto [t, p] = bias_test(zero_window(31, 2));
    EXPECT_EQ(t, 0.0);
    EXPECT_EQ(p, 1.0);
}

TEST(BiasTest, SingleSampleClosedForm) {
    InnovationWindow w;
    w.z = {Eigen::VectorXd{{1.0, 1.0}}};
    const auto [t, p] = bias_test(w);
    EXPECT_NEAR(t, 2.0, 1e-15);
    EXPECT_NEAR(p, std::exp(-1.0), 1e-12);
}

// =============================================================================
// NIS test and excess budget
// =============================================================================

TEST(NisTest, AllZeroWindowOneSided) {
    const auto [q, p] = nis_test(zero_window(31, 2));
    EXPECT_EQ(q, 0.0);
    EXPECT_EQ(p, 1.0);  // underdispersion is not rejected
}

TEST(NisTest, ThresholdConsistency) {
    // Q = 81.38 over 31 two-dimensional samples sits at the alpha = 0.05 edge.
    InnovationWindow w;
    const double per = 81.38 / 31.0;
    for (int k = 0; k < 31; ++k) w.z.push_back(Eigen::VectorXd{{std::sqrt(per), 0.0}});
    const auto [q, p] = nis_test(w);
    EXPECT_NEAR(q, 81.38, 1e-9);
    EXPECT_NEAR(p, 0.05000785, 1e-6);
}

TEST(ExcessNisBudget, PublishedValue) {
    EXPECT_NEAR(excess_nis_budget(0.05, 2, 31), 19.381015, 1e-5);
}

TEST(ExcessNisBudget, MedianNearZero) {
    EXPECT_LT(std::abs(excess_nis_budget(0.5, 2, 31)), 1.0);
}

TEST(ExcessNisBudget, MonotoneInAlpha) {
    EXPECT_GT(excess_nis_budget(0.01, 2, 31), excess_nis_budget(0.05, 2, 31));
}

// =============================================================================
// Mardia kurtosis
// =============================================================================

TEST(Mardia, LargeIidSampleCentersAtTheory) {
    RngStream rng(100);
    const auto w = iid_window(10000, 2, rng);
    const MardiaResult res = mardia_kurtosis_test(w);
    const double sigma2 = std::sqrt(8.0 * 2.0 * 4.0 / 10000.0);
    EXPECT_NEAR(res.b2m, 8.0, 3.0 * sigma2);
    EXPECT_FALSE(res.singular_cov);
}

TEST(Mardia, PValueMatchesNormalReference) {
    RngStream rng(7);
    const auto w = iid_window(500, 2, rng);
    const MardiaResult res = mardia_kurtosis_test(w);
    EXPECT_NEAR(res.p_norm, 2.0 * (1.0 - normal_cdf(std::abs(res.Z_kurt))), 1e-14);
}

TEST(Mardia, HeavyTailsDetected) {
    // Student-t with 3 dof: infinite kurtosis, so the test should fire.
    int rejected = 0;
    const int seeds = 60;
    for (int s = 0; s < seeds; ++s) {
        RngStream rng(900 + static_cast<std::uint64_t>(s));
        InnovationWindow w;
        for (int k = 0; k < 1000; ++k) {
            const Eigen::VectorXd g = rng.next_gaussian_vector(2);
            double chi2 = 0.0;
            for (int j = 0; j < 3; ++j) {
                const double x = rng.next_gaussian();
                chi2 += x * x;
            }
            w.z.push_back(g / std::sqrt(chi2 / 3.0));
        }
        if (mardia_kurtosis_test(w).p_norm < 0.05) ++rejected;
    }
    EXPECT_GE(rejected, static_cast<int>(0.95 * seeds));
}

TEST(Mardia, SingularCovarianceFlagged) {
    InnovationWindow w;
    w.z.assign(20, Eigen::VectorXd{{1.0, -1.0}});  // zero sample covariance
    const MardiaResult res = mardia_kurtosis_test(w);
    EXPECT_TRUE(res.singular_cov);
}

TEST(Mardia, WindowTooSmallRejected) {
    EXPECT_THROW(mardia_kurtosis_test(zero_window(2, 2)), DomainError);
}

// =============================================================================
// portmanteau test
// =============================================================================

TEST(Portmanteau, ZeroWindow) {
    const auto [w, p] = portmanteau_test(zero_window(31, 2), 10);
    EXPECT_EQ(w, 0.0);
    EXPECT_EQ(p, 1.0);
}

TEST(Portmanteau, LagLimitEnforced) {
    RngStream rng(1);
    const auto w = iid_window(20, 2, rng);
    EXPECT_THROW(portmanteau_test(w, 7), WindowTooShort);  // 3L > T+1
    EXPECT_NO_THROW(portmanteau_test(w, 6));
}

TEST(Portmanteau, Ar1ColoringDetected) {
    // z itself AR(1)-colored with omega = 0.98: strong rejection expected.
    int rejected = 0;
    const int seeds = 50;
    for (int s = 0; s < seeds; ++s) {
        RngStream rng(4000 + static_cast<std::uint64_t>(s));
        InnovationWindow w;
        Eigen::VectorXd state = Eigen::VectorXd::Zero(2);
        for (int k = 0; k < 301; ++k) {
            state = 0.98 * state + rng.next_gaussian_vector(2);
            w.z.push_back(state);
        }
        if (portmanteau_test(w, 10).second < 0.05) ++rejected;
    }
    EXPECT_GE(rejected, static_cast<int>(0.9 * seeds));
}

// =============================================================================
// Fisher fusion
// =============================================================================

TEST(FisherFuse, AllOnes) { EXPECT_NEAR(fisher_fuse({1.0, 1.0, 1.0, 1.0}), 1.0, 1e-12); }

TEST(FisherFuse, FourHalves) {
    EXPECT_NEAR(fisher_fuse({0.5, 0.5, 0.5, 0.5}), 0.6980297367583733, 1e-9);
}

TEST(FisherFuse, ZeroPClampedAndMonotone) {
    const auto [fused, clamped] = fisher_fuse_detail({0.0, 0.5, 0.5, 0.5});
    EXPECT_TRUE(clamped);
    EXPECT_LT(fused, 1e-100);
    EXPECT_THROW(fisher_fuse({1.5}), DomainError);
    EXPECT_THROW(fisher_fuse({-0.1}), DomainError);
}

// =============================================================================
// run_suite and window slicing
// =============================================================================

TEST(RunSuite, DeterministicAndConsistent) {
    RngStream rng(55);
    const auto w = iid_window(301, 2, rng);
    const SdsReport a = run_suite(w, 0.05, 10);
    const SdsReport b = run_suite(w, 0.05, 10);
    EXPECT_EQ(a.W_L, b.W_L);
    EXPECT_EQ(a.fused_p, b.fused_p);
    for (double p : {a.p_mean, a.p_nis, a.p_norm, a.p_white, a.fused_p}) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
    }
    EXPECT_EQ(a.reject_nis(), a.p_nis < 0.05);
}

TEST(RunSuite, SliceMatchesManualSubwindow) {
    RngStream rng(66);
    const auto w = iid_window(301, 2, rng);
    const InnovationWindow sub = w.slice(0, 30);
    EXPECT_EQ(sub.samples(), 31);
    const auto [q_sub, p_sub] = nis_test(sub);
    double q_manual = 0.0;
    for (int k = 0; k <= 30; ++k) q_manual += w.z[k].squaredNorm();
    EXPECT_NEAR(q_sub, q_manual, 1e-12);
}

// =============================================================================
// statistical properties
// =============================================================================

TEST(SdsProperties, ScaleEquivariance) {
    RngStream rng(123);
    auto w = iid_window(101, 2, rng);
    const double gamma = 0.37;
    InnovationWindow ws = w;
    for (auto& z : ws.z) z *= gamma;

    const double q = nis_test(w).first;
    const double qs = nis_test(ws).first;
    EXPECT_NEAR(qs, gamma * gamma * q, 1e-10 * q);

    const double wl = portmanteau_test(w, 10).first;
    const double wls = portmanteau_test(ws, 10).first;
    EXPECT_NEAR(wls, std::pow(gamma, 4) * wl, 1e-10 * wl);
}

TEST(SdsProperties, RotationInvariance) {
    RngStream rng(321);
    auto w = iid_window(64, 2, rng);
    const double theta = 0.83;
    Eigen::Matrix2d rot;
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    InnovationWindow wr = w;
    for (auto& z : wr.z) z = rot * z;
    EXPECT_NEAR(bias_test(w).first, bias_test(wr).first, 1e-9);
    EXPECT_NEAR(nis_test(w).first, nis_test(wr).first, 1e-9);
}

TEST(SdsProperties, CalibrationUnderNull) {
    // Rejection rates at alpha = 0.05 over 1000 i.i.d. windows. bias/NIS
    // calibrate at both window lengths; Mardia only at the long one (the
    // normal approximation is conservative at T+1 = 31); the printed
    // portmanteau statistic over-rejects at finite samples (about 18
    // percent at T+1 = 31 and 7.6 percent at 301), which the bands below
    // pin down as regression values.
    const int seeds = 1000;
    for (const Eigen::Index N : {Eigen::Index(31), Eigen::Index(301)}) {
        int rej_bias = 0, rej_nis = 0, rej_mardia = 0, rej_port = 0;
        for (int s = 0; s < seeds; ++s) {
            RngStream rng(77000 + static_cast<std::uint64_t>(s) * 13 + N);
            const auto w = iid_window(N, 2, rng);
            rej_bias += bias_test(w).second < 0.05;
            rej_nis += nis_test(w).second < 0.05;
            rej_mardia += mardia_kurtosis_test(w).p_norm < 0.05;
            rej_port += portmanteau_test(w, 10).second < 0.05;
        }
        const double lo = 0.0322 * seeds, hi = 0.0678 * seeds;  // 99 percent band
        EXPECT_GT(rej_bias, lo) << "N=" << N;
        EXPECT_LT(rej_bias, hi) << "N=" << N;
        EXPECT_GT(rej_nis, lo) << "N=" << N;
        EXPECT_LT(rej_nis, hi) << "N=" << N;
        if (N == 301) {
            EXPECT_GT(rej_mardia, lo);
            EXPECT_LT(rej_mardia, hi);
            EXPECT_GT(rej_port, 0.050 * seeds);
            EXPECT_LT(rej_port, 0.105 * seeds);
        } else {
            EXPECT_LT(rej_mardia, hi);             // conservative direction
            EXPECT_GT(rej_port, 0.13 * seeds);     // known inflation
            EXPECT_LT(rej_port, 0.24 * seeds);
        }
    }
}

TEST(SdsProperties, PValueUniformityUnderNull) {
    const int seeds = 1000;
    std::vector<double> p_bias, p_nis, p_mardia;
    for (int s = 0; s < seeds; ++s) {
        RngStream rng(88000 + static_cast<std::uint64_t>(s));
        const auto w = iid_window(301, 2, rng);
        p_bias.push_back(bias_test(w).second);
        p_nis.push_back(nis_test(w).second);
        p_mardia.push_back(mardia_kurtosis_test(w).p_norm);
    }
    const double crit = 1.628 / std::sqrt(static_cast<double>(seeds));  // 1 percent level
    EXPECT_LT(ks_uniform(p_bias), crit);
    EXPECT_LT(ks_uniform(p_nis), crit);
    EXPECT_LT(ks_uniform(p_mardia), 1.5 * crit);  // asymptotic approximation slack
}
