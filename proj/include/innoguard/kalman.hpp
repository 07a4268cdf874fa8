#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <utility>
#include <vector>

#include "innoguard/errors.hpp"
#include "innoguard/model.hpp"

namespace innoguard {

/**
 * @brief Filter state carrying the one-step-ahead prediction for time k.
 *
 * (x_hat, P) is the prior (x_hat_{k|k-1}, P_{k|k-1}); kf_step consumes the
 * measurement y[k], emits the innovation record, and returns the prior for
 * k+1. kf_init therefore hands back the state "at k = 0 prior to the first
 * measurement update".
 */
struct FilterState {
    Eigen::VectorXd x_hat;
    Eigen::MatrixXd P;
    Eigen::Index k = 0;
};

/// Per-step innovation data: e, S = L L^T, whitened z = L^{-1} e, gain K.
struct InnovationRecord {
    Eigen::VectorXd e;
    Eigen::MatrixXd S;
    Eigen::MatrixXd L;
    Eigen::VectorXd z;
    Eigen::MatrixXd K;
};

inline FilterState kf_init(const SystemModel& model, const Eigen::VectorXd& x0,
                           const Eigen::MatrixXd& P0) {
    if (x0.size() != model.n()) throw DimensionMismatch("kf_init: x0 dimension");
    if (P0.rows() != model.n() || P0.cols() != model.n())
        throw DimensionMismatch("kf_init: P0 dimension");
    detail::require_symmetric(P0, "P0", 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P0);
    if (es.eigenvalues().minCoeff() < -1e-10) throw NotPsd("kf_init: P0 has negative eigenvalue");
    return FilterState{x0, 0.5 * (P0 + P0.transpose()), 0};
}

/**
 * @brief One measurement update followed by the time update.
 *
 *   e = y - C x_pred - D u,   S = C P_pred C^T + R,   K = P_pred C^T S^{-1}
 *   posterior: x += K e,      P = (I - K C) P_pred
 *   predict:   x_hat' = A x_post + B u,  P' = A P_post A^T + Q
 *
 * Whitening uses the lower Cholesky factor of S (z = L^{-1} e). P is
 * re-symmetrized each step to keep drift bounded over long horizons.
 */
inline std::pair<FilterState, InnovationRecord> kf_step(const FilterState& state,
                                                        const SystemModel& model,
                                                        const Eigen::VectorXd& y,
                                                        const Eigen::VectorXd& u) {
    if (y.size() != model.m()) throw DimensionMismatch("kf_step: y dimension");
    if (u.size() != model.p()) throw DimensionMismatch("kf_step: u dimension");

    InnovationRecord rec;
    rec.e = y - model.C * state.x_hat - model.D * u;
    rec.S = model.C * state.P * model.C.transpose() + model.R;
    Eigen::LLT<Eigen::MatrixXd> llt(rec.S);
    if (llt.info() != Eigen::Success) throw SingularS("kf_step: innovation covariance not PD");
    rec.L = llt.matrixL();
    rec.z = rec.L.triangularView<Eigen::Lower>().solve(rec.e);
    rec.K = state.P * model.C.transpose() * llt.solve(Eigen::MatrixXd::Identity(model.m(), model.m()));

    const Eigen::VectorXd x_post = state.x_hat + rec.K * rec.e;
    const Eigen::MatrixXd P_post =
        (Eigen::MatrixXd::Identity(model.n(), model.n()) - rec.K * model.C) * state.P;

    FilterState next;
    next.x_hat = model.A * x_post + model.B * u;
    next.P = model.A * P_post * model.A.transpose() + model.Q;
    next.P = 0.5 * (next.P + next.P.transpose()).eval();
    next.k = state.k + 1;
    return {std::move(next), std::move(rec)};
}

/// Run the filter over a full trajectory; one record per measurement.
/// The whitened sequence {z[k]} is the SDS input.
inline std::vector<InnovationRecord> run_filter(const SystemModel& model, const Trajectory& traj,
                                                const Eigen::VectorXd& x0,
                                                const Eigen::MatrixXd& P0) {
    std::vector<InnovationRecord> records;
    records.reserve(traj.y_seq.size());
    FilterState state = kf_init(model, x0, P0);
    for (std::size_t k = 0; k < traj.y_seq.size(); ++k) {
        auto [next, rec] = kf_step(state, model, traj.y_seq[k], traj.u_seq[k]);
        records.push_back(std::move(rec));
        state = std::move(next);
    }
    return records;
}

/**
 * @brief Data-independent gain/whitening schedule K[k], L[k] for k = 0..T.
 *
 * The Riccati recursion never touches measurements, so the schedule from a
 * nominal pass is exactly the schedule of any attacked run with the same
 * (P0, Q, R) -- which is what makes the detection channel a fixed linear map.
 */
struct FilterSchedule {
    std::vector<Eigen::MatrixXd> K;
    std::vector<Eigen::MatrixXd> L;
    std::vector<Eigen::MatrixXd> S;
};

inline FilterSchedule gain_schedule(const SystemModel& model, const Eigen::MatrixXd& P0,
                                    Eigen::Index samples, bool steady_state = false) {
    FilterSchedule sched;
    sched.K.reserve(samples);
    sched.L.reserve(samples);
    sched.S.reserve(samples);
    // With the steady-state toggle the recursion is iterated to convergence
    // first and every step is frozen at the converged triple.
    const Eigen::Index iters = steady_state ? std::max<Eigen::Index>(samples, 2000) : samples;
    Eigen::MatrixXd P = 0.5 * (P0 + P0.transpose());
    Eigen::MatrixXd S, L, K;
    for (Eigen::Index k = 0; k < iters; ++k) {
        S = model.C * P * model.C.transpose() + model.R;
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success) throw SingularS("gain_schedule: S not PD");
        L = llt.matrixL();
        K = P * model.C.transpose() * llt.solve(Eigen::MatrixXd::Identity(model.m(), model.m()));
        if (!steady_state) {
            sched.S.push_back(S);
            sched.L.push_back(L);
            sched.K.push_back(K);
        }
        Eigen::MatrixXd P_post =
            (Eigen::MatrixXd::Identity(model.n(), model.n()) - K * model.C) * P;
        Eigen::MatrixXd P_next = model.A * P_post * model.A.transpose() + model.Q;
        P_next = 0.5 * (P_next + P_next.transpose()).eval();
        if (steady_state && k > samples && (P_next - P).norm() < 1e-12) {
            P = P_next;
            break;
        }
        P = P_next;
    }
    if (steady_state) {
        sched.S.assign(samples, S);
        sched.L.assign(samples, L);
        sched.K.assign(samples, K);
    }
    return sched;
}

}  // namespace innoguard
