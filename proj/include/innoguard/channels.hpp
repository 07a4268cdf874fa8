#pragma once

#include <Eigen/Dense>
#include <vector>

#include "innoguard/errors.hpp"
#include "innoguard/kalman.hpp"
#include "innoguard/model.hpp"

namespace innoguard {

/**
 * @brief Finite-horizon detection and damage channels.
 *
 * G maps the stacked disturbance d_{0:T} to the stacked whitened-innovation
 * deviation Delta z_{0:T}; H maps it to the stacked state deviation
 * Delta x_{0:T}. Q_G = G^T G and Q_H = H^T H are the induced quadratic forms.
 */
struct ChannelPair {
    Eigen::MatrixXd G;    ///< m(T+1) x h(T+1)
    Eigen::MatrixXd H;    ///< n(T+1) x h(T+1)
    Eigen::MatrixXd Q_G;  ///< h(T+1) square
    Eigen::MatrixXd Q_H;  ///< h(T+1) square
    Eigen::Index samples = 0;
    Eigen::Index m = 0, n = 0, h = 0;
};

/// FIR filter coefficients M[0..r], each h x s (disturbance per unit seed).
struct FirTaps {
    std::vector<Eigen::MatrixXd> M;

    int order() const { return static_cast<int>(M.size()) - 1; }
    Eigen::Index out_dim() const { return M.empty() ? 0 : M.front().rows(); }
    Eigen::Index seed_dim() const { return M.empty() ? 0 : M.front().cols(); }

    FirTaps scaled(double gamma) const {
        FirTaps out = *this;
        for (auto& tap : out.M) tap *= gamma;
        return out;
    }
};

/**
 * @brief Impulse-response construction of the channel pair.
 *
 * Column (j, c) of G is the whitened-innovation deviation sequence caused by
 * a unit impulse on disturbance channel c at time j, propagated through the
 * plant (noise off) and the filter with the frozen gain/whitening schedule;
 * analogously H collects the state deviations. Both are block
 * lower-triangular by causality; with F = 0 the diagonal blocks of G vanish
 * because an impulse at k first reaches the measurements at k+1.
 */
inline ChannelPair build_channels(const SystemModel& model, const FilterSchedule& schedule,
                                  Eigen::Index samples) {
    const Eigen::Index n = model.n(), m = model.m(), h = model.h();
    if (static_cast<Eigen::Index>(schedule.K.size()) < samples)
        throw DimensionMismatch("build_channels: schedule shorter than horizon");

    ChannelPair ch;
    ch.samples = samples;
    ch.m = m;
    ch.n = n;
    ch.h = h;
    ch.G = Eigen::MatrixXd::Zero(m * samples, h * samples);
    ch.H = Eigen::MatrixXd::Zero(n * samples, h * samples);

    for (Eigen::Index j = 0; j < samples; ++j) {
        for (Eigen::Index c = 0; c < h; ++c) {
            Eigen::VectorXd dx = Eigen::VectorXd::Zero(n);       // plant deviation
            Eigen::VectorXd dx_pred = Eigen::VectorXd::Zero(n);  // filter prior deviation
            for (Eigen::Index k = 0; k < samples; ++k) {
                Eigen::VectorXd dy = model.C * dx;
                if (k == j) dy += model.F.col(c);
                const Eigen::VectorXd de = dy - model.C * dx_pred;
                const Eigen::VectorXd dz =
                    schedule.L[k].triangularView<Eigen::Lower>().solve(de);
                ch.G.block(m * k, h * j + c, m, 1) = dz;
                ch.H.block(n * k, h * j + c, n, 1) = dx;
                dx_pred = model.A * (dx_pred + schedule.K[k] * de);
                dx = model.A * dx;
                if (k == j) dx += model.E.col(c);
            }
        }
    }
    ch.Q_G = ch.G.transpose() * ch.G;
    ch.Q_H = ch.H.transpose() * ch.H;
    return ch;
}

/// Dense block-Toeplitz convolution operator: block (i, j) = M[i-j] for
/// 0 <= i-j <= r, zero otherwise. Shape h(T+1) x s(T+1).
struct ToeplitzOperator {
    Eigen::MatrixXd T;
    Eigen::Index block_rows = 0;  ///< h
    Eigen::Index block_cols = 0;  ///< s
    Eigen::Index samples = 0;
};

inline ToeplitzOperator toeplitz_from_taps(const FirTaps& taps, Eigen::Index samples) {
    if (taps.M.empty()) throw DomainError("toeplitz_from_taps: no taps");
    const Eigen::Index h = taps.out_dim(), s = taps.seed_dim();
    const int r = taps.order();
    if (static_cast<Eigen::Index>(r) > samples - 1)
        throw OrderExceedsHorizon("toeplitz_from_taps: r exceeds horizon");
    for (const auto& tap : taps.M)
        if (tap.rows() != h || tap.cols() != s)
            throw DimensionMismatch("toeplitz_from_taps: inconsistent tap shapes");

    ToeplitzOperator op;
    op.block_rows = h;
    op.block_cols = s;
    op.samples = samples;
    op.T = Eigen::MatrixXd::Zero(h * samples, s * samples);
    for (Eigen::Index i = 0; i < samples; ++i) {
        for (int tau = 0; tau <= r; ++tau) {
            const Eigen::Index j = i - tau;
            if (j < 0) break;
            op.T.block(h * i, s * j, h, s) = taps.M[static_cast<std::size_t>(tau)];
        }
    }
    return op;
}

/**
 * @brief Recover taps of order r by averaging the block diagonals.
 *
 * For an exact block-Toeplitz input this inverts toeplitz_from_taps; for a
 * general matrix it is the Frobenius-orthogonal projection onto the
 * block-Toeplitz set (the "quadratic Toeplitz projection" used to seed the
 * covariance-fit recovery). projected is set when the input was not
 * Toeplitz within 1e-9.
 */
inline FirTaps taps_from_toeplitz(const ToeplitzOperator& op, int r, bool* projected = nullptr) {
    const Eigen::Index h = op.block_rows, s = op.block_cols, N = op.samples;
    if (r < 0 || static_cast<Eigen::Index>(r) > N - 1)
        throw OrderExceedsHorizon("taps_from_toeplitz: bad order");

    FirTaps taps;
    taps.M.resize(static_cast<std::size_t>(r) + 1);
    for (int tau = 0; tau <= r; ++tau) {
        const Eigen::MatrixXd first = op.T.block(h * tau, 0, h, s);
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(h, s);
        bool constant = true;
        for (Eigen::Index i = tau; i < N; ++i) {
            const auto block = op.T.block(h * i, s * (i - tau), h, s);
            constant = constant && (block.array() == first.array()).all();
            sum += block;
        }
        // Exact inverse on exactly-Toeplitz inputs; averaged projection otherwise.
        taps.M[static_cast<std::size_t>(tau)] =
            constant ? first : Eigen::MatrixXd(sum / static_cast<double>(N - tau));
    }
    if (projected) {
        const ToeplitzOperator round_trip = toeplitz_from_taps(taps, N);
        *projected = (round_trip.T - op.T).cwiseAbs().maxCoeff() > 1e-9;
    }
    return taps;
}

/// Lag-tau extraction from a block covariance over m(T+1):
/// L_tau(Sigma) = (1/(T+1)) sum_{k=tau}^{T} Block(Sigma; k, k-tau).
inline Eigen::MatrixXd lag_extract(const Eigen::MatrixXd& sigma, Eigen::Index m, int tau) {
    if (sigma.rows() != sigma.cols()) throw DimensionMismatch("lag_extract: square input");
    if (sigma.rows() % m != 0) throw DimensionMismatch("lag_extract: block size mismatch");
    const Eigen::Index N = sigma.rows() / m;
    if (tau < 1 || static_cast<Eigen::Index>(tau) > N - 1)
        throw DomainError("lag_extract: 1 <= tau <= T required");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index k = tau; k < N; ++k) out += sigma.block(m * k, m * (k - tau), m, m);
    return out / static_cast<double>(N);
}

/// Model-implied portmanteau mass of a stacked innovation-deviation
/// covariance: sum_tau w_tau ||L_tau(Sigma)||_F^2 with the Eq.-style weights
/// w_tau = (T+1)(T+3) / ((T+1)-tau). Homogeneous of degree 2 in Sigma.
inline double whiteness_functional(const Eigen::MatrixXd& sigma_dz, Eigen::Index m, int lags) {
    if (sigma_dz.rows() != sigma_dz.cols()) throw DimensionMismatch("whiteness: square input");
    if (sigma_dz.rows() % m != 0) throw DimensionMismatch("whiteness: block size mismatch");
    const Eigen::Index N = sigma_dz.rows() / m;
    if (lags < 1 || static_cast<Eigen::Index>(lags) > N - 1)
        throw DomainError("whiteness: 1 <= L <= T required");
    const double Nd = static_cast<double>(N);
    double total = 0.0;
    for (int tau = 1; tau <= lags; ++tau) {
        const double w = Nd * (Nd + 2.0) / (Nd - static_cast<double>(tau));
        total += w * lag_extract(sigma_dz, m, tau).squaredNorm();
    }
    return total;
}

/// Stack a disturbance sequence into a single h(T+1) vector.
inline Eigen::VectorXd stack_sequence(const std::vector<Eigen::VectorXd>& seq) {
    if (seq.empty()) return {};
    const Eigen::Index d = seq.front().size();
    Eigen::VectorXd out(d * static_cast<Eigen::Index>(seq.size()));
    for (std::size_t k = 0; k < seq.size(); ++k) out.segment(d * k, d) = seq[k];
    return out;
}

/// Split a stacked vector back into per-sample pieces.
inline std::vector<Eigen::VectorXd> unstack_sequence(const Eigen::VectorXd& stacked,
                                                     Eigen::Index dim) {
    if (stacked.size() % dim != 0) throw DimensionMismatch("unstack_sequence: size mismatch");
    const Eigen::Index N = stacked.size() / dim;
    std::vector<Eigen::VectorXd> out(N);
    for (Eigen::Index k = 0; k < N; ++k) out[static_cast<std::size_t>(k)] = stacked.segment(dim * k, dim);
    return out;
}

}  // namespace innoguard
