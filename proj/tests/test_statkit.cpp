// Distribution primitives: chi-square CDF/quantile and normal CDF.
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <innoguard/statkit.hpp>

using namespace innoguard;

TEST(Chi2Cdf, ZeroIsZero) { EXPECT_DOUBLE_EQ(chi2_cdf(0.0, 5.0), 0.0); }

TEST(Chi2Cdf, TwoDofClosedForm) {
    // For nu = 2 the CDF is 1 - exp(-x/2).
    EXPECT_NEAR(chi2_cdf(2.0, 2.0), 1.0 - std::exp(-1.0), 1e-12);
    for (double x : {0.1, 0.5, 1.0, 3.0, 10.0, 40.0})
        EXPECT_NEAR(chi2_cdf(x, 2.0), 1.0 - std::exp(-0.5 * x), 1e-12);
}

TEST(Chi2Cdf, ErlangClosedForm) {
    // Even dof: 1 - exp(-x/2) sum_{j<k} (x/2)^j / j! with nu = 2k.
    for (int k : {1, 2, 5, 10, 31}) {
        for (double x : {0.5, 2.0, 7.5, 20.0, 65.0}) {
            double term = 1.0, sum = 1.0;
            for (int j = 1; j < k; ++j) {
                term *= 0.5 * x / j;
                sum += term;
            }
            const double expected = 1.0 - std::exp(-0.5 * x) * sum;
            EXPECT_NEAR(chi2_cdf(x, 2.0 * k), expected, 1e-9) << "k=" << k << " x=" << x;
        }
    }
}

TEST(Chi2Cdf, MonotoneInX) {
    for (double nu : {1.0, 2.0, 40.0, 62.0, 1000.0}) {
        double prev = -1.0;
        for (double x = 0.0; x < 3.0 * nu; x += 0.25 * nu / 10.0 + 0.05) {
            const double c = chi2_cdf(x, nu);
            EXPECT_GE(c, prev);
            prev = c;
        }
    }
}

TEST(Chi2Cdf, DomainErrors) {
    EXPECT_THROW(chi2_cdf(-0.1, 2.0), DomainError);
    EXPECT_THROW(chi2_cdf(1.0, 0.0), DomainError);
    EXPECT_THROW(chi2_cdf(1.0, -2.0), DomainError);
}

TEST(Chi2Quantile, MedianTwoDof) {
    EXPECT_NEAR(chi2_quantile(0.5, 2.0), 2.0 * std::log(2.0), 1e-9);
}

TEST(Chi2Quantile, RoundTrip) {
    for (double q : {0.01, 0.5, 0.99}) {
        for (double nu : {1.0, 2.0, 40.0, 62.0}) {
            const double x = chi2_quantile(q, nu);
            EXPECT_NEAR(chi2_cdf(x, nu), q, 1e-9) << "q=" << q << " nu=" << nu;
        }
    }
}

TEST(Chi2Quantile, WhitenessThreshold) {
    // chi2_quantile(0.95, 40), the m^2 L = 40 whiteness threshold.
    EXPECT_NEAR(chi2_quantile(0.95, 40.0), 55.75847927888702, 1e-6);
}

TEST(Chi2Quantile, ExcessNisBudgetValue) {
    // chi2_quantile(0.95, 62) - 62 is the published excess-NIS budget 19.38.
    EXPECT_NEAR(chi2_quantile(0.95, 62.0) - 62.0, 19.3810151888991, 1e-6);
}

TEST(Chi2Quantile, DomainErrors) {
    EXPECT_THROW(chi2_quantile(0.0, 2.0), DomainError);
    EXPECT_THROW(chi2_quantile(1.0, 2.0), DomainError);
    EXPECT_THROW(chi2_quantile(0.5, 0.0), DomainError);
}

TEST(NormalCdf, Zero) { EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5); }

TEST(NormalCdf, UpperQuantile) { EXPECT_NEAR(normal_cdf(1.959964), 0.975, 1e-7); }

TEST(NormalCdf, Symmetry) {
    for (double z : {0.5, 1.0, 3.0})
        EXPECT_NEAR(normal_cdf(z) + normal_cdf(-z), 1.0, 1e-12);
}
