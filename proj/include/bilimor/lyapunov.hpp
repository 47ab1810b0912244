#pragma once

// Generalized Lyapunov / Sylvester equations
//
//     A1 X + X A2^T + sum_k N1_k X N2_k^T = F
//
// and the mean-square (Kronecker) stability tests built on the operator
// L(X) + Pi(X) with L(X) = A X + X A^T and Pi(X) = sum_k N_k X N_k^T.
//
// Two regimes: a dense vectorized solve when the unknown count is small, and a
// GMRES-accelerated fixed-point iteration on top of a Schur-based standard
// Sylvester solver otherwise. The Kronecker spectrum is computed densely for small n and via
// the spectral radius of -L^{-1} Pi (resolvent-positive characterization) for
// larger n.

#include "bilimor/system.hpp"

#include <optional>

namespace bilimor {

enum class GramianSide { Reach, Observe };

struct SolverOptions {
    Index dense_max_unknowns = 1600;
    double rel_tol = 1e-10;
    int max_iterations = 500;
    int dense_spectrum_max_n = 20; ///< explicit n^2 x n^2 eigenproblem up to this n
    int size_cap_n = 1500;
    double psd_tol = 1e-10;
};

struct SolveResult {
    Mat X;
    double residual = 0.0; ///< relative Frobenius residual
    int iterations = 0;    ///< 0 for the dense solve
    bool dense = true;
};

enum class KronMethod { DenseSpectrum, LyapunovRadius };

inline const char* to_string(KronMethod m) {
    return m == KronMethod::DenseSpectrum ? "dense-spectrum" : "lyapunov-radius";
}

struct StabilityReport {
    bool hurwitz = false;
    double spectral_abscissa_A = 0.0;
    double kron_abscissa = 0.0;
    std::optional<double> sufficient_margin; ///< ||X||_2 with A X + X A^T = -sum N_k N_k^T
    std::optional<double> lyapunov_radius;   ///< rho(-L^{-1} Pi), when A is Hurwitz
    bool mean_square_stable = false;
    KronMethod method = KronMethod::DenseSpectrum;
};

// ---------------------------------------------------------------------------
// Standard Sylvester solver  A1 X + X A2^T - shift X = F
// ---------------------------------------------------------------------------

/// Bartels-Stewart on complex Schur forms. Symmetric coefficients use the
/// real eigendecomposition (T diagonal), which the triangular sweep exploits.
class SylvesterSolver {
  public:
    SylvesterSolver(const Mat& A1, const Mat& A2) : left_(factor(A1)), right_(factor(A2)) {}

    [[nodiscard]] Mat solve(const Mat& F, double shift = 0.0) const {
        const Index n1 = left_.T.rows(), n2 = right_.T.rows();
        require(F.rows() == n1 && F.cols() == n2, ErrorKind::Dimension, "Sylvester right-hand side has wrong shape");
        if (left_.real && right_.real) {
            // Both diagonalized by orthogonal matrices.
            Mat G = left_.Qr.transpose() * F * right_.Qr;
            for (Index j = 0; j < n2; ++j)
                for (Index i = 0; i < n1; ++i) {
                    const double d = left_.diag_r(i) + right_.diag_r(j) - shift;
                    require(d != 0.0, ErrorKind::Singularity, "Sylvester operator is singular");
                    G(i, j) /= d;
                }
            return left_.Qr * G * right_.Qr.transpose();
        }
        // A2^T = conj(Q2) T2^T Q2^T, so X = Q1 Y Q2^T with T1 Y + Y T2^T - s Y = Q1^H F conj(Q2).
        const CMat Q1 = left_.complex_Q(), Q2 = right_.complex_Q();
        CMat G = Q1.adjoint() * F.cast<std::complex<double>>() * Q2.conjugate();
        CMat Y(n1, n2);
        const CMat& T1 = left_.T;
        const CMat& T2 = right_.T;
        for (Index j = n2 - 1; j >= 0; --j) {
            CVec rhs = G.col(j);
            for (Index k = j + 1; k < n2; ++k)
                if (T2(j, k) != 0.0) rhs -= T2(j, k) * Y.col(k);
            CMat M = T1;
            M.diagonal().array() += T2(j, j) - shift;
            for (Index i = 0; i < n1; ++i)
                require(std::abs(M(i, i)) > 0.0, ErrorKind::Singularity, "Sylvester operator is singular");
            Y.col(j) = M.triangularView<Eigen::Upper>().solve(rhs);
        }
        return (Q1 * Y * Q2.transpose()).real();
    }

  private:
    struct Factor {
        bool real = false;
        Mat Qr;
        Vec diag_r;
        CMat Q;
        CMat T;
        [[nodiscard]] CMat complex_Q() const { return real ? CMat(Qr.cast<std::complex<double>>()) : Q; }
    };

    static Factor factor(const Mat& A) {
        Factor f;
        if (A.size() > 0 && (A - A.transpose()).norm() <= 1e-14 * A.norm()) {
            Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(A));
            f.real = true;
            f.Qr = es.eigenvectors();
            f.diag_r = es.eigenvalues();
            f.T = es.eigenvalues().cast<std::complex<double>>().asDiagonal();
            return f;
        }
        Eigen::ComplexSchur<CMat> schur(A.cast<std::complex<double>>());
        f.Q = schur.matrixU();
        f.T = schur.matrixT();
        return f;
    }

    Factor left_, right_;
};

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// Matrix of vec(X) -> vec(A1 X + X A2^T + sum N1_k X N2_k^T) (column-major vec).
inline Mat sylvester_operator(const Mat& A1, const Mat& A2, const std::vector<Mat>& N1, const std::vector<Mat>& N2) {
    const Index n1 = A1.rows(), n2 = A2.rows();
    Mat K = Eigen::kroneckerProduct(Mat::Identity(n2, n2), A1).eval();
    K += Eigen::kroneckerProduct(A2, Mat::Identity(n1, n1));
    for (std::size_t k = 0; k < N1.size(); ++k) K += Eigen::kroneckerProduct(N2[k], N1[k]);
    return K;
}

/// A (x) I + I (x) A + sum N_k (x) N_k.
inline Mat kron_operator(const Mat& A, const std::vector<Mat>& N) { return sylvester_operator(A, A, N, N); }

inline Mat apply_sylvester(const Mat& A1, const Mat& A2, const std::vector<Mat>& N1, const std::vector<Mat>& N2,
                           const Mat& X) {
    Mat out = A1 * X + X * A2.transpose();
    for (std::size_t k = 0; k < N1.size(); ++k) out += N1[k] * X * N2[k].transpose();
    return out;
}

inline double sylvester_residual(const Mat& A1, const Mat& A2, const std::vector<Mat>& N1,
                                 const std::vector<Mat>& N2, const Mat& X, const Mat& F) {
    double scale = A1.norm() + A2.norm();
    for (std::size_t k = 0; k < N1.size(); ++k) scale += N1[k].norm() * N2[k].norm();
    const double denom = F.norm() + X.norm() * scale;
    const double num = (apply_sylvester(A1, A2, N1, N2, X) - F).norm();
    return denom == 0.0 ? num : num / denom;
}

namespace detail {

inline Mat apply_pi(const std::vector<Mat>& N1, const std::vector<Mat>& N2, const Mat& X) {
    Mat out = Mat::Zero(X.rows(), X.cols());
    for (std::size_t k = 0; k < N1.size(); ++k) out += N1[k] * X * N2[k].transpose();
    return out;
}

inline bool any_nonzero(const std::vector<Mat>& N) {
    return std::any_of(N.begin(), N.end(), [](const Mat& Nk) { return Nk.norm() > 0.0; });
}

struct RadiusEstimate {
    double rho = 0.0;
    Mat eigvec;
};

/// Spectral radius of X -> (shift I - L)^{-1} Pi(X) by power iteration. The
/// operator is positive for shift > 2*abscissa(A), so the radius is attained
/// at a PSD eigenvector and the iteration from a PSD start converges to it.
inline RadiusEstimate lyapunov_radius(const SylvesterSolver& solver, const std::vector<Mat>& N, Index n,
                                      double shift, const Mat* warm = nullptr, int max_iter = 2000,
                                      double tol = 1e-12) {
    RadiusEstimate est;
    Mat X = warm != nullptr ? *warm : Mat(Mat::Identity(n, n));
    X /= X.norm();
    double previous = -1.0;
    for (int it = 0; it < max_iter; ++it) {
        Mat Y = solver.solve(-apply_pi(N, N, X), shift);
        Y = symmetrize(Y);
        const double norm = Y.norm();
        if (norm == 0.0 || !std::isfinite(norm)) {
            est.rho = std::isfinite(norm) ? 0.0 : std::numeric_limits<double>::infinity();
            est.eigvec = X;
            return est;
        }
        est.rho = norm;
        X = Y / norm;
        if (previous >= 0.0 && std::abs(norm - previous) <= tol * norm && it > 5) break;
        previous = norm;
    }
    est.eigvec = X;
    return est;
}

/// Iterative regime. The fixed point X = L^{-1}(F - Pi(X)) is accelerated by
/// restarted GMRES on (I + L^{-1} Pi) X = L^{-1} F, with L the standard
/// Sylvester operator. Each Krylov step costs one standard solve; the total
/// is capped by max_iterations. Plain fixed-point sweeps need ~log(tol)/log(rho)
/// steps, which blows the cap as rho -> 1 near the stability boundary.
inline SolveResult fixed_point_sylvester(const Mat& A1, const Mat& A2, const std::vector<Mat>& N1,
                                         const std::vector<Mat>& N2, const Mat& F, const SolverOptions& opts) {
    SylvesterSolver base(A1, A2);
    auto op = [&](const Mat& X) { return Mat(X + base.solve(apply_pi(N1, N2, X))); };
    const auto dot = [](const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); };
    const Mat rhs = base.solve(F);
    const double bnorm = rhs.norm();
    constexpr int restart = 40;

    SolveResult res;
    res.dense = false;
    Mat X = rhs;
    int applications = 1;
    while (true) {
        res.iterations = applications;
        res.residual = sylvester_residual(A1, A2, N1, N2, X, F);
        require(std::isfinite(res.residual), ErrorKind::Stability, "iterative Sylvester solve produced non-finite values");
        // The forward error is the residual amplified by the operator's
        // conditioning, so aim well below the acceptance tolerance.
        if (bnorm == 0.0 || res.residual <= 1e-3 * opts.rel_tol) break;
        const int m = std::min(restart, opts.max_iterations - applications - 1);
        if (m <= 0) break;
        const Mat R = rhs - op(X);
        ++applications;
        const double beta = R.norm();
        if (beta == 0.0) break;
        std::vector<Mat> V{R / beta};
        Mat H = Mat::Zero(m + 1, m);
        Vec g = Vec::Zero(m + 1);
        g(0) = beta;
        std::vector<double> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m));
        int k = 0;
        while (k < m) {
            Mat W = op(V[static_cast<std::size_t>(k)]);
            ++applications;
            for (int i = 0; i <= k; ++i) {
                H(i, k) = dot(W, V[static_cast<std::size_t>(i)]);
                W -= H(i, k) * V[static_cast<std::size_t>(i)];
            }
            const double next = W.norm();
            H(k + 1, k) = next;
            for (int i = 0; i < k; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                const double t = cs[ui] * H(i, k) + sn[ui] * H(i + 1, k);
                H(i + 1, k) = -sn[ui] * H(i, k) + cs[ui] * H(i + 1, k);
                H(i, k) = t;
            }
            const double d = std::hypot(H(k, k), H(k + 1, k));
            require(d > 0.0, ErrorKind::Singularity, "generalized Sylvester operator is singular");
            const auto uk = static_cast<std::size_t>(k);
            cs[uk] = H(k, k) / d;
            sn[uk] = H(k + 1, k) / d;
            H(k, k) = d;
            H(k + 1, k) = 0.0;
            g(k + 1) = -sn[uk] * g(k);
            g(k) = cs[uk] * g(k);
            ++k;
            if (std::abs(g(k)) <= 1e-15 * bnorm || next <= 1e-300) break;
            V.push_back(W / next);
        }
        const Vec y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        for (int i = 0; i < k; ++i) X += y(i) * V[static_cast<std::size_t>(i)];
    }
    if (res.residual <= opts.rel_tol) {
        res.X = X;
        return res;
    }
    throw Error(ErrorKind::Stability, "iterative Sylvester solve did not reach the residual tolerance within " +
                                          std::to_string(opts.max_iterations) + " standard solves (residual " +
                                          std::to_string(res.residual) + ")");
}

} // namespace detail

/// rho(-L^{-1} Pi) for L(X) = A X + X A^T. Requires A Hurwitz. Mean-square
/// stability holds iff this is below one.
inline double lyapunov_radius(const Mat& A, const std::vector<Mat>& N) {
    require(is_hurwitz(A), ErrorKind::Stability, "Lyapunov radius needs a Hurwitz A");
    if (!detail::any_nonzero(N)) return 0.0;
    SylvesterSolver solver(A, A);
    return detail::lyapunov_radius(solver, N, A.rows(), 0.0).rho;
}

inline StabilityReport kron_stability(const Mat& A, const std::vector<Mat>& N, const SolverOptions& opts = {}) {
    const Index n = A.rows();
    require(n <= opts.size_cap_n, ErrorKind::SizeCap,
            "n = " + std::to_string(n) + " exceeds the configured Kronecker size cap");
    StabilityReport rep;
    rep.spectral_abscissa_A = spectral_abscissa(A);
    rep.hurwitz = rep.spectral_abscissa_A < 0.0;
    const bool bilinear = detail::any_nonzero(N);

    std::optional<SylvesterSolver> solver;
    if (rep.hurwitz) {
        solver.emplace(A, A);
        Mat NN = Mat::Zero(n, n);
        for (const auto& Nk : N) NN += Nk * Nk.transpose();
        rep.sufficient_margin = spectral_norm(solver->solve(-NN));
        rep.lyapunov_radius = bilinear ? detail::lyapunov_radius(*solver, N, n, 0.0).rho : 0.0;
    }

    if (n <= opts.dense_spectrum_max_n) {
        rep.method = KronMethod::DenseSpectrum;
        rep.kron_abscissa = spectral_abscissa(kron_operator(A, N));
    } else {
        rep.method = KronMethod::LyapunovRadius;
        const double base = 2.0 * rep.spectral_abscissa_A;
        if (!bilinear) {
            rep.kron_abscissa = base;
        } else {
            // abscissa(L + Pi) = inf{ s > abscissa(L) : rho((sI - L)^{-1} Pi) < 1 }, rho decreasing in s.
            SylvesterSolver shifted(A, A);
            const double scale = std::max(1.0, std::abs(base));
            double lo = base + 1e-9 * scale;
            auto at_lo = detail::lyapunov_radius(shifted, N, n, lo);
            if (at_lo.rho < 1.0) {
                rep.kron_abscissa = base;
            } else {
                double step = scale;
                double hi = lo + step;
                auto at_hi = detail::lyapunov_radius(shifted, N, n, hi, &at_lo.eigvec);
                while (at_hi.rho >= 1.0) {
                    lo = hi;
                    step *= 2.0;
                    hi = lo + step;
                    at_hi = detail::lyapunov_radius(shifted, N, n, hi, &at_hi.eigvec);
                }
                Mat warm = at_hi.eigvec;
                while (hi - lo > 1e-10 * std::max(1.0, std::abs(hi))) {
                    const double mid = 0.5 * (lo + hi);
                    auto at_mid = detail::lyapunov_radius(shifted, N, n, mid, &warm, 400, 1e-13);
                    warm = at_mid.eigvec;
                    (at_mid.rho >= 1.0 ? lo : hi) = mid;
                }
                rep.kron_abscissa = 0.5 * (lo + hi);
            }
            // The decision at s = 0 is made from the radius directly; keep the
            // reported abscissa on the same side of zero.
            if (rep.hurwitz) {
                const bool stable = *rep.lyapunov_radius < 1.0;
                if (stable && rep.kron_abscissa >= 0.0) rep.kron_abscissa = -std::numeric_limits<double>::min();
                if (!stable && rep.kron_abscissa < 0.0) rep.kron_abscissa = 0.0;
            }
        }
    }
    rep.mean_square_stable = rep.kron_abscissa < 0.0;
    return rep;
}

inline StabilityReport kron_stability(const BilinearSystem& sys, const SolverOptions& opts = {}) {
    return kron_stability(sys.A(), sys.Ns(), opts);
}

/// Solves A1 X + X A2^T + sum_k N1_k X N2_k^T = F. The sign of F is the
/// caller's: Gramian-type equations pass F = -B Bhat^T.
inline SolveResult solve_generalized_sylvester(const Mat& A1, const Mat& A2, const std::vector<Mat>& N1,
                                               const std::vector<Mat>& N2, const Mat& F,
                                               const SolverOptions& opts = {}) {
    require(A1.rows() == A1.cols() && A2.rows() == A2.cols(), ErrorKind::Dimension, "A1, A2 must be square");
    require(N1.size() == N2.size(), ErrorKind::Dimension, "N lists must have equal length");
    require(F.rows() == A1.rows() && F.cols() == A2.rows(), ErrorKind::Dimension, "F must be n1 x n2");
    const Index unknowns = A1.rows() * A2.rows();
    SolveResult res;
    if (unknowns == 0) {
        res.X = Mat::Zero(A1.rows(), A2.rows());
        return res;
    }
    if (unknowns <= opts.dense_max_unknowns) {
        const Mat K = sylvester_operator(A1, A2, N1, N2);
        Eigen::PartialPivLU<Mat> lu(K);
        const double rcond = lu.rcond();
        require(rcond > 1e-14, ErrorKind::Singularity,
                "vectorized Sylvester operator is numerically singular (rcond " + std::to_string(rcond) + ")");
        res.X = unvec(lu.solve(vec(F)), A1.rows(), A2.rows());
        res.dense = true;
    } else {
        res = detail::fixed_point_sylvester(A1, A2, N1, N2, F, opts);
    }
    res.residual = sylvester_residual(A1, A2, N1, N2, res.X, F);
    require(res.residual <= opts.rel_tol, ErrorKind::Inconsistency,
            "Sylvester residual " + std::to_string(res.residual) + " above tolerance");
    return res;
}

/// Reach side:   A P + P A^T + sum N_k P N_k^T = -RHS.
/// Observe side: A^T Q + Q A + sum N_k^T Q N_k = -RHS.
inline SolveResult solve_generalized_lyapunov(const Mat& A, const std::vector<Mat>& N, const Mat& rhs,
                                              GramianSide side = GramianSide::Reach,
                                              const SolverOptions& opts = {}) {
    require(A.rows() == A.cols() && rhs.rows() == A.rows() && rhs.cols() == A.cols(), ErrorKind::Dimension,
            "Lyapunov operands must be n x n");
    const Mat Aeff = side == GramianSide::Reach ? A : Mat(A.transpose());
    std::vector<Mat> Neff;
    for (const auto& Nk : N) Neff.push_back(side == GramianSide::Reach ? Nk : Mat(Nk.transpose()));

    require(is_hurwitz(Aeff), ErrorKind::Stability, "A is not Hurwitz: no mean-square stable Gramian");
    if (A.rows() <= opts.dense_spectrum_max_n) {
        require(spectral_abscissa(kron_operator(Aeff, Neff)) < 0.0, ErrorKind::Stability,
                "Kronecker spectrum is not in the open left half-plane");
    } else if (detail::any_nonzero(Neff)) {
        require(lyapunov_radius(Aeff, Neff) < 1.0, ErrorKind::Stability,
                "Kronecker spectrum is not in the open left half-plane (rho(L^-1 Pi) >= 1)");
    }

    SolveResult res = solve_generalized_sylvester(Aeff, Aeff, Neff, Neff, -rhs, opts);
    res.X = symmetrize(res.X);
    // Residual normalization ||RHS|| + ||P|| ||A||.
    Mat lhs = Aeff * res.X + res.X * Aeff.transpose() + detail::apply_pi(Neff, Neff, res.X);
    const double denom = rhs.norm() + res.X.norm() * A.norm();
    res.residual = denom == 0.0 ? (lhs + rhs).norm() : (lhs + rhs).norm() / denom;
    require(res.residual <= opts.rel_tol, ErrorKind::Inconsistency, "Lyapunov residual above tolerance");

    const double min_eig = min_symmetric_eigenvalue(res.X);
    const double max_eig = max_symmetric_eigenvalue(res.X);
    require(min_eig >= -opts.psd_tol * std::max(max_eig, 0.0) - 1e-300, ErrorKind::Inconsistency,
            "Gramian is not positive semidefinite (min eigenvalue " + std::to_string(min_eig) + ")");
    return res;
}

/// Standard Lyapunov A X + X A^T = -RHS (no bilinear term).
inline Mat solve_lyapunov(const Mat& A, const Mat& rhs) {
    SylvesterSolver solver(A, A);
    return symmetrize(solver.solve(-rhs));
}

} // namespace bilimor
