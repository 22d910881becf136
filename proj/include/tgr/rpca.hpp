// Robust PCA via Principal Component Pursuit by Alternating Directions,
// together with the SVD / shrinkage / singular-value-thresholding primitives
// it is built from.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace tgr::rpca {

struct SvdNonConvergence : std::runtime_error {
    explicit SvdNonConvergence(int sweeps)
        : std::runtime_error("one-sided Jacobi SVD did not converge after " +
                             std::to_string(sweeps) + " sweeps") {}
};

struct SvdResult {
    Eigen::MatrixXd u;      // n1 x r
    Eigen::VectorXd sigma;  // r, non-negative, descending
    Eigen::MatrixXd v;      // n2 x r
};

namespace detail {

// Orthogonalizes the columns of a (m >= n assumed profitable, not required)
// by plane rotations, accumulating them into v. Standard Hestenes one-sided
// Jacobi; terminates when every column pair is numerically orthogonal.
inline void one_sided_jacobi(Eigen::MatrixXd& a, Eigen::MatrixXd& v) {
    const Eigen::Index n = a.cols();
    v = Eigen::MatrixXd::Identity(n, n);
    constexpr double eps = 1e-15;
    constexpr int max_sweeps = 60;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double app = a.col(p).squaredNorm();
                const double aqq = a.col(q).squaredNorm();
                const double apq = a.col(p).dot(a.col(q));
                if (std::abs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0)
                    continue;
                rotated = true;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // Rotate column pair in both a and v.
                const Eigen::VectorXd ap = a.col(p);
                a.col(p) = c * ap - s * a.col(q);
                a.col(q) = s * ap + c * a.col(q);
                const Eigen::VectorXd vp = v.col(p);
                v.col(p) = c * vp - s * v.col(q);
                v.col(q) = s * vp + c * v.col(q);
            }
        }
        if (!rotated) return;
    }
    throw SvdNonConvergence(max_sweeps);
}

}  // namespace detail

// Thin SVD, M = U diag(sigma) V^T with r = min(n1, n2). Singular values are
// non-negative and descending. Sign convention: the largest-magnitude entry
// of each left singular vector is positive, which makes the factorization
// deterministic.
inline SvdResult svd(const Eigen::MatrixXd& m) {
    if (m.size() == 0) throw std::invalid_argument("svd: empty matrix");
    if (!m.allFinite()) throw std::invalid_argument("svd: non-finite entries");

    const bool transposed = m.rows() < m.cols();
    Eigen::MatrixXd a = transposed ? m.transpose() : m;  // rows >= cols
    Eigen::MatrixXd w;
    detail::one_sided_jacobi(a, w);

    const Eigen::Index r = a.cols();
    SvdResult out;
    out.sigma.resize(r);
    Eigen::MatrixXd left(a.rows(), r);
    for (Eigen::Index j = 0; j < r; ++j) {
        const double s = a.col(j).norm();
        out.sigma[j] = s;
        left.col(j) = s > 0 ? Eigen::VectorXd(a.col(j) / s)
                            : Eigen::VectorXd::Zero(a.rows());
    }

    // Sort descending by singular value.
    std::vector<Eigen::Index> order(static_cast<size_t>(r));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) {
        return out.sigma[i] > out.sigma[j];
    });
    Eigen::VectorXd sig(r);
    Eigen::MatrixXd ls(left.rows(), r), ws(w.rows(), r);
    for (Eigen::Index j = 0; j < r; ++j) {
        sig[j] = out.sigma[order[static_cast<size_t>(j)]];
        ls.col(j) = left.col(order[static_cast<size_t>(j)]);
        ws.col(j) = w.col(order[static_cast<size_t>(j)]);
    }
    out.sigma = sig;
    out.u = transposed ? ws : ls;
    out.v = transposed ? ls : ws;

    // Deterministic signs on the left factor.
    for (Eigen::Index j = 0; j < r; ++j) {
        Eigen::Index imax = 0;
        out.u.col(j).cwiseAbs().maxCoeff(&imax);
        if (out.u(imax, j) < 0) {
            out.u.col(j) = -out.u.col(j);
            out.v.col(j) = -out.v.col(j);
        }
    }
    return out;
}

// Elementwise soft threshold sign(x) * max(|x| - tau, 0).
inline double shrink(double x, double tau) {
    const double mag = std::abs(x) - tau;
    return mag > 0 ? (x > 0 ? mag : -mag) : 0.0;
}

inline Eigen::MatrixXd shrink(const Eigen::MatrixXd& m, double tau) {
    return m.unaryExpr([tau](double x) { return shrink(x, tau); });
}

// Singular value thresholding: soft threshold on the spectrum.
inline Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double tau) {
    SvdResult f = svd(m);
    Eigen::VectorXd s = f.sigma.unaryExpr([tau](double x) { return shrink(x, tau); });
    return f.u * s.asDiagonal() * f.v.transpose();
}

struct RpcaConfig {
    double lambda = -1.0;  // <= 0: 1/sqrt(max(n1, n2))
    double mu = -1.0;      // <= 0: n1*n2 / (4*||M||_1)
    double tol = 1e-7;     // relative to ||M||_F
    int max_iter = 100;
};

struct RpcaResult {
    Eigen::MatrixXd low_rank;
    Eigen::MatrixXd sparse;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;  // ||M - L - S||_F at the returned iterate
};

// Principal Component Pursuit by Alternating Directions:
//   L <- svt(M - S + Y/mu, 1/mu)
//   S <- shrink(M - L + Y/mu, lambda/mu)
//   Y <- Y + mu (M - L - S)
// until ||M - L - S||_F <= tol * ||M||_F or max_iter. Returns the iterate
// with the smallest residual seen.
inline RpcaResult pcp(const Eigen::MatrixXd& m, const RpcaConfig& cfg = {}) {
    if (m.size() == 0) throw std::invalid_argument("pcp: empty matrix");
    if (!m.allFinite()) throw std::invalid_argument("pcp: non-finite entries");
    if (cfg.tol <= 0 || cfg.max_iter < 1)
        throw std::invalid_argument("pcp: bad config");

    const auto n1 = m.rows(), n2 = m.cols();
    const double norm_m = m.norm();
    const double l1_m = m.cwiseAbs().sum();

    RpcaResult out;
    out.low_rank = Eigen::MatrixXd::Zero(n1, n2);
    out.sparse = Eigen::MatrixXd::Zero(n1, n2);
    if (norm_m == 0.0) {
        out.iterations = 1;
        out.converged = true;
        return out;
    }

    const double lambda =
        cfg.lambda > 0 ? cfg.lambda : 1.0 / std::sqrt(double(std::max(n1, n2)));
    const double mu =
        cfg.mu > 0 ? cfg.mu : double(n1) * double(n2) / (4.0 * l1_m);

    Eigen::MatrixXd low = Eigen::MatrixXd::Zero(n1, n2);
    Eigen::MatrixXd sp = Eigen::MatrixXd::Zero(n1, n2);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n1, n2);
    double best_residual = norm_m;

    for (int it = 1; it <= cfg.max_iter; ++it) {
        low = svt(m - sp + y / mu, 1.0 / mu);
        sp = shrink(m - low + y / mu, lambda / mu);
        const Eigen::MatrixXd gap = m - low - sp;
        const double residual = gap.norm();
        y += mu * gap;

        if (residual < best_residual || it == 1) {
            best_residual = residual;
            out.low_rank = low;
            out.sparse = sp;
            out.residual = residual;
            out.iterations = it;
        }
        if (residual <= cfg.tol * norm_m) {
            out.converged = true;
            break;
        }
    }
    return out;
}

}  // namespace tgr::rpca
