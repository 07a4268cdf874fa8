#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "innoguard/errors.hpp"
#include "innoguard/statkit.hpp"

namespace innoguard {

/// A window of whitened innovations z[k], k = 0..T (window length T+1 >= 2).
struct InnovationWindow {
    std::vector<Eigen::VectorXd> z;

    Eigen::Index samples() const { return static_cast<Eigen::Index>(z.size()); }
    Eigen::Index dim() const { return z.empty() ? 0 : z.front().size(); }

    /// Sub-window [k0, k1] inclusive.
    InnovationWindow slice(Eigen::Index k0, Eigen::Index k1) const {
        if (k0 < 0 || k1 >= samples() || k0 > k1) throw DomainError("slice: bad range");
        InnovationWindow w;
        w.z.assign(z.begin() + k0, z.begin() + k1 + 1);
        return w;
    }

    Eigen::VectorXd mean() const {
        Eigen::VectorXd zbar = Eigen::VectorXd::Zero(dim());
        for (const auto& v : z) zbar += v;
        return zbar / static_cast<double>(samples());
    }
};

/// Statistics and p-values of the four checks plus optional Fisher fusion.
struct SdsReport {
    double T_mu = 0.0, p_mean = 1.0;
    double Q_nis = 0.0, p_nis = 1.0;
    double b2m = 0.0, Z_kurt = 0.0, p_norm = 1.0;
    double W_L = 0.0, p_white = 1.0;
    double fused_p = 1.0;
    double alpha = 0.05;
    int lags = 0;
    bool singular_cov = false;   ///< Mardia covariance was regularized
    bool clamped_p = false;      ///< a zero p-value was clamped in fusion

    bool reject_mean() const { return p_mean < alpha; }
    bool reject_nis() const { return p_nis < alpha; }
    bool reject_norm() const { return p_norm < alpha; }
    bool reject_white() const { return p_white < alpha; }
    bool reject_any() const {
        return reject_mean() || reject_nis() || reject_norm() || reject_white();
    }
    double min_p() const {
        return std::min(std::min(p_mean, p_nis), std::min(p_norm, p_white));
    }
};

namespace detail {

// bias/NIS are defined from a single sample onward; Mardia and the
// portmanteau enforce their own stricter lengths.
inline void require_window(const InnovationWindow& w) {
    if (w.samples() < 1) throw DomainError("window must not be empty");
}

}  // namespace detail

/// Zero-mean check: T_mu = (T+1) ||zbar||^2 against chi2_m, upper tail.
inline std::pair<double, double> bias_test(const InnovationWindow& w) {
    detail::require_window(w);
    const double N = static_cast<double>(w.samples());
    const double T_mu = N * w.mean().squaredNorm();
    return {T_mu, 1.0 - chi2_cdf(T_mu, static_cast<double>(w.dim()))};
}

/// Aggregate NIS: Q = sum ||z[k]||^2 against chi2_{m(T+1)}, upper tail only
/// (underdispersion is not rejected).
inline std::pair<double, double> nis_test(const InnovationWindow& w) {
    detail::require_window(w);
    double Q = 0.0;
    for (const auto& v : w.z) Q += v.squaredNorm();
    const double nu = static_cast<double>(w.dim() * w.samples());
    return {Q, 1.0 - chi2_cdf(Q, nu)};
}

/// Admissible mean-NIS inflation before the level-alpha detector fires:
/// chi2_quantile(1-alpha, m(T+1)) - m(T+1).
inline double excess_nis_budget(double alpha, Eigen::Index m, Eigen::Index samples) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("excess_nis_budget: alpha in (0,1)");
    const double nu = static_cast<double>(m * samples);
    return chi2_quantile(1.0 - alpha, nu) - nu;
}

struct MardiaResult {
    double b2m = 0.0;
    double Z_kurt = 0.0;
    double p_norm = 1.0;
    bool singular_cov = false;
};

/**
 * @brief Mardia multivariate kurtosis test (two-sided normal reference).
 *
 * b2m is the mean fourth power of the centered Mahalanobis distances under
 * the sample covariance; under normality it concentrates around m(m+2) with
 * variance 8m(m+2)/(T+1). A singular sample covariance is regularized with
 * 1e-8 * tr/m ridge and flagged.
 */
inline MardiaResult mardia_kurtosis_test(const InnovationWindow& w) {
    detail::require_window(w);
    const Eigen::Index m = w.dim();
    const double N = static_cast<double>(w.samples());
    if (w.samples() <= m) throw DomainError("mardia: T+1 > m required");

    const Eigen::VectorXd zbar = w.mean();
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(m, m);
    for (const auto& v : w.z) {
        const Eigen::VectorXd c = v - zbar;
        sigma += c * c.transpose();
    }
    sigma /= N;

    MardiaResult res;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        res.singular_cov = true;
        double ridge = 1e-8 * sigma.trace() / static_cast<double>(m);
        if (ridge <= 0.0) ridge = 1e-12;
        sigma += ridge * Eigen::MatrixXd::Identity(m, m);
        llt.compute(sigma);
        if (llt.info() != Eigen::Success) throw NotPsd("mardia: covariance unusable");
    }

    double b2m = 0.0;
    for (const auto& v : w.z) {
        const Eigen::VectorXd c = v - zbar;
        const double d2 = c.dot(llt.solve(c));
        b2m += d2 * d2;
    }
    b2m /= N;

    const double mu2 = static_cast<double>(m * (m + 2));
    const double sigma2 = std::sqrt(8.0 * mu2 / N);
    res.b2m = b2m;
    res.Z_kurt = (b2m - mu2) / sigma2;
    res.p_norm = 2.0 * (1.0 - normal_cdf(std::abs(res.Z_kurt)));
    return res;
}

/**
 * @brief Multivariate Ljung-Box/Hosking portmanteau whiteness statistic.
 *
 *   R(tau) = (1/(T+1)) sum_{k=tau}^{T} (z[k]-zbar)(z[k-tau]-zbar)^T
 *   W_L    = (T+1)(T+3) sum_{tau=1}^{L} tr(R(tau)^T R(tau)) / (T+1-tau)
 *
 * referenced against chi2_{m^2 L}. Requires L <= (T+1)/3.
 */
inline std::pair<double, double> portmanteau_test(const InnovationWindow& w, int lags) {
    detail::require_window(w);
    const Eigen::Index m = w.dim();
    const Eigen::Index N = w.samples();
    if (lags < 1) throw DomainError("portmanteau: lags must be >= 1");
    if (3 * static_cast<Eigen::Index>(lags) > N)
        throw WindowTooShort("portmanteau: require lags <= (T+1)/3");

    const Eigen::VectorXd zbar = w.mean();
    std::vector<Eigen::VectorXd> c(N);
    for (Eigen::Index k = 0; k < N; ++k) c[k] = w.z[k] - zbar;

    double W = 0.0;
    const double Nd = static_cast<double>(N);
    for (int tau = 1; tau <= lags; ++tau) {
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index k = tau; k < N; ++k) R += c[k] * c[k - tau].transpose();
        R /= Nd;
        W += R.squaredNorm() / (Nd - static_cast<double>(tau));
    }
    W *= Nd * (Nd + 2.0);
    const double nu = static_cast<double>(m * m * lags);
    return {W, 1.0 - chi2_cdf(W, nu)};
}

/// Fisher's method: -2 sum log p_i against chi2_{2k}. Zero p-values are
/// clamped to 1e-300; the flag is surfaced through run_suite.
inline std::pair<double, bool> fisher_fuse_detail(const std::vector<double>& p_values) {
    if (p_values.empty()) throw DomainError("fisher_fuse: empty input");
    bool clamped = false;
    double stat = 0.0;
    for (double p : p_values) {
        if (p < 0.0 || p > 1.0) throw DomainError("fisher_fuse: p outside [0,1]");
        if (p == 0.0) {
            p = 1e-300;
            clamped = true;
        }
        stat += -2.0 * std::log(p);
    }
    const double fused = 1.0 - chi2_cdf(stat, 2.0 * static_cast<double>(p_values.size()));
    return {fused, clamped};
}

inline double fisher_fuse(const std::vector<double>& p_values) {
    return fisher_fuse_detail(p_values).first;
}

/// All four tests plus fusion on one window. Deterministic given the window.
inline SdsReport run_suite(const InnovationWindow& w, double alpha, int lags) {
    SdsReport rep;
    rep.alpha = alpha;
    rep.lags = lags;
    std::tie(rep.T_mu, rep.p_mean) = bias_test(w);
    std::tie(rep.Q_nis, rep.p_nis) = nis_test(w);
    const MardiaResult mard = mardia_kurtosis_test(w);
    rep.b2m = mard.b2m;
    rep.Z_kurt = mard.Z_kurt;
    rep.p_norm = mard.p_norm;
    rep.singular_cov = mard.singular_cov;
    std::tie(rep.W_L, rep.p_white) = portmanteau_test(w, lags);
    auto [fused, clamped] = fisher_fuse_detail({rep.p_mean, rep.p_nis, rep.p_norm, rep.p_white});
    rep.fused_p = fused;
    rep.clamped_p = clamped;
    return rep;
}

/// Window of whitened innovations from a filter run.
template <typename Records>
InnovationWindow window_from_records(const Records& records) {
    InnovationWindow w;
    w.z.reserve(records.size());
    for (const auto& rec : records) w.z.push_back(rec.z);
    return w;
}

}  // namespace innoguard
