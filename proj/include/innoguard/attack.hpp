#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "innoguard/channels.hpp"
#include "innoguard/errors.hpp"
#include "innoguard/kalman.hpp"
#include "innoguard/model.hpp"
#include "innoguard/rng.hpp"

namespace innoguard {

/// Detector-side budgets for the attacker design.
struct AttackBudgets {
    double eps_cov = 0.0;    ///< excess-NIS allowance
    double eps_white = 0.0;  ///< portmanteau-mass allowance (chi2_{m^2 L} scale)
    double energy = 0.0;     ///< total disturbance energy D = tr(Sigma) bound
    int lags = 10;
    double alpha = 0.05;
};

/// Output of the convex relaxation.
struct RelaxationSolution {
    Eigen::MatrixXd sigma;       ///< Sigma*, PSD
    double J_relax = 0.0;        ///< <Q_H, Sigma*>
    double cov_residual = 0.0;   ///< relative violations after the final polish (<= 0 means slack)
    double white_residual = 0.0;
    double trace_residual = 0.0;
    long iterations = 0;
    bool converged = true;
};

/// Full synthesis output: everything needed to reproduce and audit the plan.
struct AttackPlan {
    FirTaps taps;                ///< scaled taps gamma * M[tau], ready to inject
    FirTaps taps_unscaled;
    Eigen::MatrixXd sigma_star;  ///< relaxed covariance
    Eigen::MatrixXd sigma_hat;   ///< recovered T T^T (unscaled)
    double gamma = 1.0;
    double J_relax = 0.0;
    double J_rec_unscaled = 0.0;
    double J_rec = 0.0;
    double certificate = 0.0;    ///< ||Q_H||_2 ||Sigma* - Sigma_hat||_*
    double T_nis = 0.0;          ///< tr(Q_G Sigma_hat), pre-scaling
    double T_p = 0.0;            ///< whiteness functional of G Sigma_hat G^T, pre-scaling
    AttackBudgets budgets;
    std::uint64_t seed = 0;
    bool relaxation_converged = true;
    bool recovery_converged = true;
};

/**
 * @brief Vector AR(1) disturbance: d[k] = omega d[k-1] + psi xi[k] inside
 * the window, zero outside.
 *
 * The process starts from its stationary distribution (variance
 * psi^2/(1-omega^2) per channel), so the injected segment carries the
 * nameplate AR(1) statistics from the first sample.
 */
inline std::vector<Eigen::VectorXd> ar1_attack(double omega, double psi, Eigen::Index horizon,
                                               Eigen::Index window_start,
                                               Eigen::Index window_len, Eigen::Index h,
                                               RngStream& rng) {
    if (!(omega >= 0.0 && omega < 1.0)) throw DomainError("ar1_attack: require 0 <= omega < 1");
    if (!(psi > 0.0)) throw DomainError("ar1_attack: require psi > 0");
    if (window_start < 0 || window_start + window_len > horizon)
        throw DomainError("ar1_attack: window outside horizon");

    std::vector<Eigen::VectorXd> d(horizon, Eigen::VectorXd::Zero(h));
    Eigen::VectorXd state =
        (psi / std::sqrt(1.0 - omega * omega)) * rng.next_gaussian_vector(h);
    for (Eigen::Index k = 0; k < window_len; ++k) {
        state = omega * state + psi * rng.next_gaussian_vector(h);
        d[static_cast<std::size_t>(window_start + k)] = state;
    }
    return d;
}

/// Spectral clipping onto the PSD cone: negative eigenvalues zeroed.
inline Eigen::MatrixXd psd_clip(const Eigen::MatrixXd& sigma) {
    const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

namespace detail {

// Exact Frobenius projection onto {Sigma PSD, tr(Sigma) <= D}: clip the
// spectrum, then water-fill the excess trace.
inline Eigen::MatrixXd project_psd_trace(const Eigen::MatrixXd& sigma, double D) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sigma + sigma.transpose()));
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    const double total = lam.sum();
    if (total > D) {
        std::vector<double> sorted(lam.data(), lam.data() + lam.size());
        std::sort(sorted.begin(), sorted.end(), std::greater<double>());
        double cum = 0.0, theta = 0.0;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            cum += sorted[i];
            const double cand = (cum - D) / static_cast<double>(i + 1);
            if (i + 1 == sorted.size() || sorted[i + 1] <= cand) {
                theta = cand;
                break;
            }
        }
        lam = (lam.array() - theta).cwiseMax(0.0);
    }
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

// Gradient of the whiteness functional W(Sigma) = sum_tau w_tau ||L_tau(G Sigma G^T)||_F^2.
inline Eigen::MatrixXd whiteness_gradient(const Eigen::MatrixXd& G, const Eigen::MatrixXd& sigma,
                                          Eigen::Index m, int lags) {
    const Eigen::MatrixXd gsg = G * sigma * G.transpose();
    const Eigen::Index N = gsg.rows() / m;
    const double Nd = static_cast<double>(N);
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(gsg.rows(), gsg.cols());
    for (int tau = 1; tau <= lags; ++tau) {
        const double w = Nd * (Nd + 2.0) / (Nd - static_cast<double>(tau));
        const Eigen::MatrixXd lt = lag_extract(gsg, m, tau);
        for (Eigen::Index k = tau; k < N; ++k)
            adj.block(m * k, m * (k - tau), m, m) += (w / Nd) * lt;
    }
    Eigen::MatrixXd grad = 2.0 * G.transpose() * adj * G;
    return 0.5 * (grad + grad.transpose());
}

// Right-kernel basis of G with singular values below 1e-9 * sigma_max.
inline Eigen::MatrixXd kernel_basis(const Eigen::MatrixXd& G) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double tol = (sv.size() > 0 ? sv(0) : 0.0) * 1e-9;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < G.cols(); ++i) {
        if (i >= sv.size() || sv(i) < tol || sv(i) == 0.0) keep.push_back(i);
    }
    Eigen::MatrixXd V(G.cols(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) V.col(static_cast<Eigen::Index>(i)) = svd.matrixV().col(keep[i]);
    return V;
}

// Projected ascent for a linear objective over {S PSD, tr(S) <= D}; the
// maximizer is D times the dominant eigenvector outer product, and the
// iteration converges to it like a damped power method.
inline std::pair<Eigen::MatrixXd, long> ascend_linear_spectrahedron(const Eigen::MatrixXd& Qobj,
                                                                    double D) {
    const Eigen::Index q = Qobj.rows();
    Eigen::MatrixXd S = (D / static_cast<double>(q)) * Eigen::MatrixXd::Identity(q, q);
    double step = (Qobj.norm() > 0.0) ? D / Qobj.norm() : 1.0;
    double best = (Qobj.array() * S.array()).sum();
    long iters = 0;
    int stall = 0;
    for (; iters < 20000 && stall < 20; ++iters) {
        Eigen::MatrixXd cand = project_psd_trace(S + step * Qobj, D);
        const double val = (Qobj.array() * cand.array()).sum();
        if (val > best + 1e-14 * (1.0 + std::abs(best))) {
            if (std::abs(val - best) < 1e-8 * (1.0 + std::abs(best))) ++stall;
            else stall = 0;
            S = std::move(cand);
            best = val;
            step *= 1.5;
        } else {
            step *= 0.5;
            ++stall;
            if (step < 1e-18) break;
        }
    }
    return {S, iters};
}

}  // namespace detail

/**
 * @brief First-order solver for the covariance relaxation
 *
 *   max <Q_H, Sigma>  s.t.  Sigma PSD, tr(Sigma) <= D,
 *                           <Q_G, Sigma> <= eps_cov,
 *                           sum_tau w_tau ||L_tau(G Sigma G^T)||_F^2 <= eps_white.
 *
 * Projected gradient ascent on the PSD-cone/trace-ball intersection with
 * quadratic penalties on the two detector constraints; the penalty weight is
 * raised until relative residuals fall below 1e-6, and a final uniform
 * scaling makes the returned iterate exactly feasible. With both detector
 * budgets at zero the feasible set collapses onto ker(G_T) and the same
 * ascent runs in the reduced subspace.
 */
inline RelaxationSolution solve_relaxation(const Eigen::MatrixXd& Q_H, const Eigen::MatrixXd& Q_G,
                                           const Eigen::MatrixXd& G, Eigen::Index meas_dim,
                                           const AttackBudgets& budgets) {
    const Eigen::Index q = Q_H.rows();
    if (Q_G.rows() != q || Q_G.cols() != q || Q_H.cols() != q || G.cols() != q)
        throw DimensionMismatch("solve_relaxation: dimension mismatch");
    if (G.rows() % meas_dim != 0) throw DimensionMismatch("solve_relaxation: bad meas_dim");
    if (budgets.energy < 0.0 || budgets.eps_cov < 0.0 || budgets.eps_white < 0.0)
        throw DomainError("solve_relaxation: budgets must be nonnegative");

    RelaxationSolution sol;
    const double D = budgets.energy;
    if (D == 0.0 || Q_H.norm() == 0.0) {
        sol.sigma = Eigen::MatrixXd::Zero(q, q);
        sol.J_relax = 0.0;
        return sol;
    }

    // Degenerate budgets: restrict to the kernel of G, where both detector
    // constraints hold with equality at zero. (For eps_white = 0 alone this
    // is a feasible restriction, not the full feasible set.)
    if (budgets.eps_cov == 0.0 || budgets.eps_white == 0.0) {
        const Eigen::MatrixXd V = detail::kernel_basis(G);
        if (V.cols() == 0) {
            sol.sigma = Eigen::MatrixXd::Zero(q, q);
            sol.J_relax = 0.0;
            return sol;
        }
        const Eigen::MatrixXd Qred = V.transpose() * Q_H * V;
        auto [S, iters] = detail::ascend_linear_spectrahedron(0.5 * (Qred + Qred.transpose()), D);
        sol.sigma = V * S * V.transpose();
        sol.sigma = 0.5 * (sol.sigma + sol.sigma.transpose()).eval();
        sol.J_relax = (Q_H.array() * sol.sigma.array()).sum();
        sol.iterations = iters;
        return sol;
    }

    const Eigen::Index mm = meas_dim;
    const Eigen::Index samples = G.rows() / mm;
    const int lags = std::min<int>(budgets.lags, static_cast<int>(samples - 1));

    const double cov_scale = std::max(budgets.eps_cov, 1e-12);
    const double white_scale = std::max(budgets.eps_white, 1e-12);

    auto cov_value = [&](const Eigen::MatrixXd& S) { return (Q_G.array() * S.array()).sum(); };
    auto white_value = [&](const Eigen::MatrixXd& S) {
        return lags >= 1 ? whiteness_functional(G * S * G.transpose(), mm, lags) : 0.0;
    };
    auto objective = [&](const Eigen::MatrixXd& S) { return (Q_H.array() * S.array()).sum(); };
    auto penalized = [&](const Eigen::MatrixXd& S, double mu) {
        const double gc = std::max(0.0, cov_value(S) - budgets.eps_cov) / cov_scale;
        const double gw = std::max(0.0, white_value(S) - budgets.eps_white) / white_scale;
        return objective(S) - mu * (gc * gc + gw * gw);
    };

    Eigen::MatrixXd sigma = (D / static_cast<double>(q)) * Eigen::MatrixXd::Identity(q, q);
    const double obj_scale = std::max(Q_H.norm(), 1e-300);
    double mu = obj_scale * D * 1e-2;
    long total_iters = 0;
    const long iter_cap = 200000;
    sol.converged = false;

    for (int outer = 0; outer < 12 && total_iters < iter_cap; ++outer) {
        double step = D / obj_scale;
        double phi = penalized(sigma, mu);
        double ref = phi;
        int stall = 0;
        while (total_iters < iter_cap) {
            ++total_iters;
            const double gc = std::max(0.0, cov_value(sigma) - budgets.eps_cov) / cov_scale;
            const double gw = std::max(0.0, white_value(sigma) - budgets.eps_white) / white_scale;
            Eigen::MatrixXd grad = Q_H;
            if (gc > 0.0) grad -= (2.0 * mu * gc / cov_scale) * Q_G;
            if (gw > 0.0 && lags >= 1)
                grad -= (2.0 * mu * gw / white_scale) * detail::whiteness_gradient(G, sigma, mm, lags);

            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                Eigen::MatrixXd cand = detail::project_psd_trace(sigma + step * grad, D);
                const double cand_phi = penalized(cand, mu);
                if (cand_phi > phi) {
                    sigma = std::move(cand);
                    phi = cand_phi;
                    step *= 1.3;
                    accepted = true;
                    break;
                }
                step *= 0.5;
                if (step * grad.norm() < 1e-16 * (1.0 + sigma.norm())) break;
            }
            if (!accepted) break;
            // Termination: relative objective change below 1e-8 over 20 iterations.
            if (std::abs(phi - ref) < 1e-8 * (1.0 + std::abs(ref))) {
                if (++stall >= 20) break;
            } else {
                stall = 0;
                ref = phi;
            }
        }
        const double cov_rel = (cov_value(sigma) - budgets.eps_cov) / cov_scale;
        const double white_rel = (white_value(sigma) - budgets.eps_white) / white_scale;
        if (cov_rel <= 1e-6 && white_rel <= 1e-6) {
            sol.converged = true;
            break;
        }
        mu *= 10.0;
    }

    // Uniform shrink onto the feasible set: the linear constraint scales with
    // rho, the whiteness term with rho^2, so this never overshoots.
    double rho = 1.0;
    const double cv = cov_value(sigma);
    if (cv > budgets.eps_cov) rho = std::min(rho, budgets.eps_cov / cv);
    const double wv = white_value(sigma);
    if (wv > budgets.eps_white) rho = std::min(rho, std::sqrt(budgets.eps_white / wv));
    const double tv = sigma.trace();
    if (tv > D) rho = std::min(rho, D / tv);
    if (rho < 1.0) sigma *= rho;

    sol.sigma = 0.5 * (sigma + sigma.transpose());
    sol.J_relax = objective(sol.sigma);
    sol.cov_residual = (cov_value(sol.sigma) - budgets.eps_cov) / cov_scale;
    sol.white_residual = (white_value(sol.sigma) - budgets.eps_white) / white_scale;
    sol.trace_residual = (sol.sigma.trace() - D) / std::max(D, 1e-12);
    sol.iterations = total_iters;
    if (!sol.converged && sol.cov_residual <= 1e-6 && sol.white_residual <= 1e-6)
        sol.converged = true;
    return sol;
}

/// Result of the structured covariance-fit recovery.
struct RecoveryResult {
    FirTaps taps;
    Eigen::MatrixXd sigma_hat;
    double J_rec_unscaled = 0.0;
    double fit_residual = 0.0;  ///< ||T T^T - Sigma*||_F / max(||Sigma*||_F, 1)
    long iterations = 0;
    bool converged = true;
};

/**
 * @brief Fit a block-Toeplitz operator so that T T^T matches Sigma*.
 *
 * Minimizes ||T T^T - Sigma*||_F^2 + zeta tr(T^T Q_G T) over the taps, with
 * the energy bound ||T||_F^2 <= D enforced by rescaling after each accepted
 * step. Gradient descent with backtracking line search, initialized from the
 * block-diagonal (Toeplitz) projection of the dominant rank-k Eckart-Young
 * factor of Sigma*, k = s(r+1) capped at the positive rank.
 */
inline RecoveryResult recover_fir(const Eigen::MatrixXd& sigma_star, const Eigen::MatrixXd& Q_H,
                                  const Eigen::MatrixXd& Q_G, int r, Eigen::Index s, double D,
                                  double zeta, Eigen::Index samples) {
    const Eigen::Index q = sigma_star.rows();
    if (sigma_star.cols() != q) throw DimensionMismatch("recover_fir: Sigma* must be square");
    if (q % samples != 0) throw DimensionMismatch("recover_fir: samples does not divide dim");
    const Eigen::Index h = q / samples;
    if (r < 0 || static_cast<Eigen::Index>(r) >= samples)
        throw OrderExceedsHorizon("recover_fir: order vs horizon");

    RecoveryResult out;
    const double sig_norm = sigma_star.norm();
    if (sig_norm == 0.0) {
        out.taps.M.assign(static_cast<std::size_t>(r) + 1, Eigen::MatrixXd::Zero(h, s));
        out.sigma_hat = Eigen::MatrixXd::Zero(q, q);
        return out;
    }

    // Eckart-Young rank-k factor, then Toeplitz projection.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sigma_star + sigma_star.transpose()));
    std::vector<std::pair<double, Eigen::Index>> order;
    for (Eigen::Index i = 0; i < q; ++i)
        if (es.eigenvalues()(i) > 0.0) order.emplace_back(es.eigenvalues()(i), i);
    std::sort(order.begin(), order.end(), std::greater<>());
    const Eigen::Index k = std::min<Eigen::Index>(s * (r + 1), static_cast<Eigen::Index>(order.size()));

    ToeplitzOperator init;
    init.block_rows = h;
    init.block_cols = s;
    init.samples = samples;
    init.T = Eigen::MatrixXd::Zero(q, s * samples);
    for (Eigen::Index i = 0; i < k; ++i)
        init.T.col(i) = es.eigenvectors().col(order[static_cast<std::size_t>(i)].second) *
                        std::sqrt(order[static_cast<std::size_t>(i)].first);
    FirTaps taps = taps_from_toeplitz(init, r);

    auto build = [&](const FirTaps& t) { return toeplitz_from_taps(t, samples).T; };
    auto rescale = [&](FirTaps& t) {
        const double e = build(t).squaredNorm();
        if (e > D && e > 0.0) {
            const double c = std::sqrt(D / e);
            for (auto& M : t.M) M *= c;
        }
    };
    auto cost = [&](const FirTaps& t) {
        const Eigen::MatrixXd T = build(t);
        double f = (T * T.transpose() - sigma_star).squaredNorm();
        if (zeta > 0.0) f += zeta * (T.transpose() * Q_G * T).trace();
        return f;
    };
    // Adjoint of the Toeplitz embedding: sum blocks along each diagonal.
    auto tap_gradient = [&](const FirTaps& t) {
        const Eigen::MatrixXd T = build(t);
        Eigen::MatrixXd GT = 4.0 * (T * T.transpose() - sigma_star) * T;
        if (zeta > 0.0) GT += 2.0 * zeta * Q_G * T;
        std::vector<Eigen::MatrixXd> g(static_cast<std::size_t>(r) + 1,
                                       Eigen::MatrixXd::Zero(h, s));
        for (int tau = 0; tau <= r; ++tau)
            for (Eigen::Index i = tau; i < samples; ++i)
                g[static_cast<std::size_t>(tau)] += GT.block(h * i, s * (i - tau), h, s);
        return g;
    };

    rescale(taps);
    double f = cost(taps);
    double step = 1e-6 / std::max(1.0, sig_norm);
    int stall = 0;
    out.converged = false;
    const long max_iters = 50000;
    for (; out.iterations < max_iters; ++out.iterations) {
        const auto g = tap_gradient(taps);
        double gnorm2 = 0.0;
        for (const auto& gi : g) gnorm2 += gi.squaredNorm();
        if (std::sqrt(gnorm2) < 1e-12 * (1.0 + f)) {
            out.converged = true;
            break;
        }
        step *= 2.0;
        bool accepted = false;
        for (int bt = 0; bt < 70; ++bt) {
            FirTaps cand = taps;
            for (std::size_t i = 0; i < cand.M.size(); ++i) cand.M[i] -= step * g[i];
            rescale(cand);
            const double fc = cost(cand);
            if (fc < f - 1e-14 * (1.0 + std::abs(f))) {
                taps = std::move(cand);
                if (std::abs(f - fc) < 1e-10 * (1.0 + std::abs(f))) ++stall;
                else stall = 0;
                f = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || stall >= 20) {
            out.converged = true;
            break;
        }
    }

    out.taps = taps;
    const Eigen::MatrixXd T = build(taps);
    out.sigma_hat = T * T.transpose();
    out.J_rec_unscaled = (Q_H.array() * out.sigma_hat.array()).sum();
    out.fit_residual = (out.sigma_hat - sigma_star).norm() / std::max(sig_norm, 1.0);
    return out;
}

/**
 * @brief Amplitude scaling bound: the attack statistics scale as gamma^2
 * (NIS) and gamma^4 (portmanteau), so
 *
 *   gamma_bar = min( sqrt(eps_cov / T_nis), (eps_white / T_p)^(1/4) )
 *
 * with the convention that a zero statistic contributes +infinity. The
 * pipeline never amplifies, so the result is capped at 1.
 */
inline double compute_scaling(double T_nis, double T_p, double eps_cov, double eps_white) {
    if (T_nis < 0.0 || T_p < 0.0) throw DomainError("compute_scaling: negative statistic");
    const double inf = std::numeric_limits<double>::infinity();
    const double b_nis = (T_nis == 0.0) ? inf : std::sqrt(eps_cov / T_nis);
    const double b_white = (T_p == 0.0) ? inf : std::pow(eps_white / T_p, 0.25);
    return std::min(1.0, std::min(b_nis, b_white));
}

/// Spectral norm by power iteration (symmetric PSD input), tolerance 1e-9.
inline double spectral_norm_power(const Eigen::MatrixXd& M) {
    const Eigen::Index q = M.rows();
    if (q == 0) return 0.0;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(q);
    for (Eigen::Index i = 0; i < q; ++i) v(i) += 1e-3 * static_cast<double>(i % 7);
    v.normalize();
    double lam = 0.0;
    for (int it = 0; it < 100000; ++it) {
        Eigen::VectorXd w = M * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        w /= norm;
        const double next = w.dot(M * w);
        if (std::abs(next - lam) <= 1e-9 * std::max(1.0, std::abs(next))) return std::abs(next);
        lam = next;
        v = std::move(w);
    }
    return std::abs(lam);
}

/// A-posteriori gap certificate ||Q_H||_2 ||Sigma* - Sigma_hat||_*; the
/// nuclear norm of the symmetrized difference is the sum of |eigenvalues|.
inline double certify_gap(const Eigen::MatrixXd& Q_H, const Eigen::MatrixXd& sigma_star,
                          const Eigen::MatrixXd& sigma_hat) {
    if (sigma_star.rows() != sigma_hat.rows() || sigma_star.cols() != sigma_hat.cols() ||
        Q_H.rows() != sigma_star.rows())
        throw DimensionMismatch("certify_gap: dimension mismatch");
    const Eigen::MatrixXd diff = 0.5 * ((sigma_star - sigma_hat) +
                                        (sigma_star - sigma_hat).transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
    return spectral_norm_power(Q_H) * es.eigenvalues().cwiseAbs().sum();
}

/// Kernel structure of the detection channel (Theorem-4-style analysis).
struct KernelAnalysis {
    Eigen::Index kernel_dim = 0;
    double lambda_max = 0.0;           ///< lambda_max(P Q_H P)
    Eigen::VectorXd direction;         ///< maximizing unit kernel vector
    Eigen::MatrixXd sigma_opt;         ///< D * v v^T (zero if kernel trivial)
};

inline KernelAnalysis kernel_analysis(const Eigen::MatrixXd& G, const Eigen::MatrixXd& Q_H,
                                      double D) {
    KernelAnalysis out;
    const Eigen::MatrixXd V = detail::kernel_basis(G);
    out.kernel_dim = V.cols();
    out.sigma_opt = Eigen::MatrixXd::Zero(G.cols(), G.cols());
    out.direction = Eigen::VectorXd::Zero(G.cols());
    if (out.kernel_dim == 0) return out;

    const Eigen::MatrixXd P = V * V.transpose();
    const Eigen::MatrixXd M = 0.5 * (P * Q_H * P + (P * Q_H * P).transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    Eigen::Index arg = 0;
    es.eigenvalues().maxCoeff(&arg);
    out.lambda_max = std::max(0.0, es.eigenvalues()(arg));
    out.direction = es.eigenvectors().col(arg);
    out.sigma_opt = D * out.direction * out.direction.transpose();
    return out;
}

/// Options for the synthesis pipeline beyond the published defaults.
struct SynthesisOptions {
    Eigen::Index seed_dim = 0;  ///< 0 means s = h
    double zeta = 0.0;
    bool steady_state_gains = false;
};

/**
 * @brief Full relaxation-recovery-scaling pipeline over a design window.
 *
 * Builds the channels from the frozen gain schedule, solves the covariance
 * relaxation, fits the FIR taps, restores PSD if needed, computes the
 * scaling from the recovered statistics, and samples one disturbance
 * realization d[k] = sum_tau gamma M[tau] xi[k - tau] over the window.
 */
inline std::pair<AttackPlan, std::vector<Eigen::VectorXd>> synthesize_attack(
    const SystemModel& model, const AttackBudgets& budgets, int r, Eigen::Index design_samples,
    RngStream& rng, const Eigen::MatrixXd& P0, const SynthesisOptions& opts = {}) {
    const Eigen::Index s = (opts.seed_dim > 0) ? opts.seed_dim : model.h();

    const FilterSchedule sched =
        gain_schedule(model, P0, design_samples, opts.steady_state_gains);
    const ChannelPair ch = build_channels(model, sched, design_samples);

    AttackPlan plan;
    plan.budgets = budgets;
    plan.seed = rng.seed();

    RelaxationSolution relax = solve_relaxation(ch.Q_H, ch.Q_G, ch.G, model.m(), budgets);
    plan.relaxation_converged = relax.converged;
    plan.sigma_star = psd_clip(relax.sigma);
    plan.J_relax = relax.J_relax;

    RecoveryResult rec = recover_fir(plan.sigma_star, ch.Q_H, ch.Q_G, r, s, budgets.energy,
                                     opts.zeta, design_samples);
    plan.recovery_converged = rec.converged;
    plan.sigma_hat = rec.sigma_hat;
    plan.taps_unscaled = rec.taps;
    plan.J_rec_unscaled = rec.J_rec_unscaled;

    const int lags = std::min<int>(budgets.lags, static_cast<int>(design_samples - 1));
    plan.T_nis = (ch.Q_G.array() * plan.sigma_hat.array()).sum();
    plan.T_p = lags >= 1 ? whiteness_functional(ch.G * plan.sigma_hat * ch.G.transpose(),
                                                model.m(), lags)
                         : 0.0;
    plan.gamma = compute_scaling(plan.T_nis, plan.T_p, budgets.eps_cov, budgets.eps_white);
    if (plan.gamma == 0.0)
        throw InfeasibleBudgets("synthesize_attack: scaling collapsed to zero");
    plan.taps = rec.taps.scaled(plan.gamma);
    plan.J_rec = plan.gamma * plan.gamma * plan.J_rec_unscaled;
    plan.certificate = certify_gap(ch.Q_H, plan.sigma_star, plan.sigma_hat);

    // One disturbance realization over the design window.
    std::vector<Eigen::VectorXd> xi(static_cast<std::size_t>(design_samples));
    for (auto& v : xi) v = rng.next_gaussian_vector(s);
    std::vector<Eigen::VectorXd> d(static_cast<std::size_t>(design_samples),
                                   Eigen::VectorXd::Zero(model.h()));
    for (Eigen::Index k = 0; k < design_samples; ++k) {
        for (int tau = 0; tau <= r && tau <= k; ++tau)
            d[static_cast<std::size_t>(k)] +=
                plan.taps.M[static_cast<std::size_t>(tau)] * xi[static_cast<std::size_t>(k - tau)];
    }
    return {std::move(plan), std::move(d)};
}

/// Realize d[k] = sum_tau M[tau] xi[k-tau] from a fresh seed over a window
/// inside a longer horizon (zero outside).
inline std::vector<Eigen::VectorXd> fir_attack(const FirTaps& taps, Eigen::Index horizon,
                                               Eigen::Index window_start, Eigen::Index window_len,
                                               RngStream& rng) {
    const Eigen::Index h = taps.out_dim();
    const Eigen::Index s = taps.seed_dim();
    if (window_start < 0 || window_start + window_len > horizon)
        throw DomainError("fir_attack: window outside horizon");
    std::vector<Eigen::VectorXd> xi(static_cast<std::size_t>(window_len));
    for (auto& v : xi) v = rng.next_gaussian_vector(s);
    std::vector<Eigen::VectorXd> d(static_cast<std::size_t>(horizon), Eigen::VectorXd::Zero(h));
    for (Eigen::Index k = 0; k < window_len; ++k) {
        Eigen::VectorXd val = Eigen::VectorXd::Zero(h);
        for (int tau = 0; tau <= taps.order() && tau <= k; ++tau)
            val += taps.M[static_cast<std::size_t>(tau)] * xi[static_cast<std::size_t>(k - tau)];
        d[static_cast<std::size_t>(window_start + k)] = val;
    }
    return d;
}

}  // namespace innoguard
