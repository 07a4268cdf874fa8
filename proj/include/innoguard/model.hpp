#pragma once

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "innoguard/errors.hpp"
#include "innoguard/rng.hpp"

namespace innoguard {

/**
 * @brief Discrete LTI plant with disturbance channels.
 *
 *   x[k+1] = A x[k] + B u[k] + E d[k] + w[k],   w ~ N(0, Q)
 *   y[k]   = C x[k] + D u[k] + F d[k] + v[k],   v ~ N(0, R)
 *
 * Immutable after construction; safe to share across threads.
 */
struct SystemModel {
    Eigen::MatrixXd A, B, C, D, E, F, Q, R;
    Eigen::MatrixXd chol_Q;  ///< lower factor of Q (jittered if semidefinite)
    Eigen::MatrixXd chol_R;  ///< lower factor of R
    bool detectable = true;  ///< PBH rank test over eigenvalues with |lambda| >= 1

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return C.rows(); }
    Eigen::Index p() const { return B.cols(); }
    Eigen::Index h() const { return E.cols(); }
};

/// State/measurement/input/disturbance sequences of a single run, all of
/// identical length T+1.
struct Trajectory {
    std::vector<Eigen::VectorXd> x_seq;
    std::vector<Eigen::VectorXd> y_seq;
    std::vector<Eigen::VectorXd> u_seq;
    std::vector<Eigen::VectorXd> d_seq;

    Eigen::Index samples() const { return static_cast<Eigen::Index>(y_seq.size()); }
};

namespace detail {

inline void require_symmetric(const Eigen::MatrixXd& M, const char* name, double tol = 1e-10) {
    if (M.rows() != M.cols()) throw DimensionMismatch(std::string(name) + " must be square");
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > tol)
        throw NotPsd(std::string(name) + " is not symmetric within tolerance");
}

// Lower Cholesky factor; adds diagonal jitter once if the matrix is only
// semidefinite (Q in the CV scenario is velocity-only, hence rank deficient).
inline Eigen::MatrixXd psd_cholesky(const Eigen::MatrixXd& M, const char* name,
                                    double jitter = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw NotPsd(std::string(name) + " has a negative eigenvalue below -1e-10");
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::MatrixXd jittered = M + jitter * Eigen::MatrixXd::Identity(M.rows(), M.cols());
    llt.compute(jittered);
    if (llt.info() != Eigen::Success)
        throw NotPsd(std::string(name) + " is not factorizable even with jitter");
    return llt.matrixL();
}

// PBH detectability: rank [A - lambda I; C] = n for every eigenvalue with
// |lambda| >= 1 (up to a small margin for eigenvalues on the unit circle).
inline bool pbh_detectable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
    const Eigen::Index n = A.rows();
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::complex<double> lambda = es.eigenvalues()(i);
        if (std::abs(lambda) < 1.0 - 1e-9) continue;
        Eigen::MatrixXcd pencil(n + C.rows(), n);
        pencil.topRows(n) =
            A.cast<std::complex<double>>() - lambda * Eigen::MatrixXcd::Identity(n, n);
        pencil.bottomRows(C.rows()) = C.cast<std::complex<double>>();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(pencil);
        qr.setThreshold(1e-9);
        if (qr.rank() < n) return false;
    }
    return true;
}

}  // namespace detail

/**
 * @brief Validate dimensions and noise covariances and assemble a model.
 *
 * Q must be symmetric PSD, R symmetric and strictly PD (the innovation
 * covariance S[k] inherits invertibility from R). Detectability of (A, C)
 * is recorded as a flag, not an error.
 */
inline SystemModel build_model(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C,
                               Eigen::MatrixXd D, Eigen::MatrixXd E, Eigen::MatrixXd F,
                               Eigen::MatrixXd Q, Eigen::MatrixXd R) {
    const Eigen::Index n = A.rows(), m = C.rows(), p = B.cols(), h = E.cols();
    if (A.cols() != n) throw DimensionMismatch("A must be square");
    if (B.rows() != n) throw DimensionMismatch("B row count must equal n");
    if (C.cols() != n) throw DimensionMismatch("C column count must equal n");
    if (D.rows() != m || D.cols() != p) throw DimensionMismatch("D must be m x p");
    if (E.rows() != n) throw DimensionMismatch("E row count must equal n");
    if (F.rows() != m || F.cols() != h) throw DimensionMismatch("F must be m x h");
    if (Q.rows() != n || Q.cols() != n) throw DimensionMismatch("Q must be n x n");
    if (R.rows() != m || R.cols() != m) throw DimensionMismatch("R must be m x m");

    detail::require_symmetric(Q, "Q");
    detail::require_symmetric(R, "R");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esR(R);
    if (esR.eigenvalues().minCoeff() <= 0.0)
        throw NotPsd("R must be strictly positive definite");

    SystemModel model;
    model.A = std::move(A);
    model.B = std::move(B);
    model.C = std::move(C);
    model.D = std::move(D);
    model.E = std::move(E);
    model.F = std::move(F);
    model.chol_Q = detail::psd_cholesky(Q, "Q");
    model.chol_R = detail::psd_cholesky(R, "R");
    model.Q = std::move(Q);
    model.R = std::move(R);
    model.detectable = detail::pbh_detectable(model.A, model.C);
    return model;
}

/**
 * @brief Propagate the plant over u_seq/d_seq with fresh noise per step.
 *
 * Draw order is fixed (v[k] before w[k]) so that runs sharing a seed share
 * noise realizations sample-for-sample regardless of the disturbance -- the
 * common-random-numbers pairing the scenario experiments rely on.
 * With Q = R = 0 the run is deterministic.
 */
inline Trajectory simulate(const SystemModel& model, const std::vector<Eigen::VectorXd>& u_seq,
                           const std::vector<Eigen::VectorXd>& d_seq, const Eigen::VectorXd& x0,
                           RngStream& rng) {
    if (u_seq.size() != d_seq.size())
        throw DimensionMismatch("u_seq and d_seq must have identical length");
    if (u_seq.empty()) return {};
    if (x0.size() != model.n()) throw DimensionMismatch("x0 dimension mismatch");

    const std::size_t samples = u_seq.size();
    const bool noise_free =
        model.Q.cwiseAbs().maxCoeff() == 0.0 && model.R.cwiseAbs().maxCoeff() == 0.0;

    Trajectory traj;
    traj.x_seq.resize(samples);
    traj.y_seq.resize(samples);
    traj.u_seq = u_seq;
    traj.d_seq = d_seq;

    Eigen::VectorXd x = x0;
    for (std::size_t k = 0; k < samples; ++k) {
        if (u_seq[k].size() != model.p()) throw DimensionMismatch("u_seq entry dimension");
        if (d_seq[k].size() != model.h()) throw DimensionMismatch("d_seq entry dimension");
        traj.x_seq[k] = x;
        Eigen::VectorXd y = model.C * x + model.D * u_seq[k] + model.F * d_seq[k];
        if (!noise_free) y += sample_mvn(model.chol_R, rng);
        traj.y_seq[k] = std::move(y);
        if (k + 1 < samples) {
            x = model.A * x + model.B * u_seq[k] + model.E * d_seq[k];
            if (!noise_free) x += sample_mvn(model.chol_Q, rng);
        }
    }
    return traj;
}

/// Noise-free propagation of the same recursion. Channel construction and
/// linearity checks use this; the stochastic overload keeps draw counts
/// independent of d so paired runs cancel noise exactly.
inline Trajectory simulate_deterministic(const SystemModel& model,
                                         const std::vector<Eigen::VectorXd>& u_seq,
                                         const std::vector<Eigen::VectorXd>& d_seq,
                                         const Eigen::VectorXd& x0) {
    if (u_seq.size() != d_seq.size())
        throw DimensionMismatch("u_seq and d_seq must have identical length");
    if (u_seq.empty()) return {};
    if (x0.size() != model.n()) throw DimensionMismatch("x0 dimension mismatch");

    Trajectory traj;
    traj.x_seq.resize(u_seq.size());
    traj.y_seq.resize(u_seq.size());
    traj.u_seq = u_seq;
    traj.d_seq = d_seq;
    Eigen::VectorXd x = x0;
    for (std::size_t k = 0; k < u_seq.size(); ++k) {
        traj.x_seq[k] = x;
        traj.y_seq[k] = model.C * x + model.D * u_seq[k] + model.F * d_seq[k];
        if (k + 1 < u_seq.size()) x = model.A * x + model.B * u_seq[k] + model.E * d_seq[k];
    }
    return traj;
}

/// Convenience: constant zero input/disturbance sequences.
inline std::vector<Eigen::VectorXd> zero_sequence(Eigen::Index dim, std::size_t samples) {
    return std::vector<Eigen::VectorXd>(samples, Eigen::VectorXd::Zero(dim));
}

}  // namespace innoguard
