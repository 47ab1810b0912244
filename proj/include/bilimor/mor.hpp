#pragma once

// Balancing, balanced truncation (BT), singular perturbation approximation
// (SPA), bilinear IRKA, and the first-order H2 optimality residuals.

#include "bilimor/gramians.hpp"

#include <array>
#include <optional>
#include <random>

namespace bilimor {

enum class ReductionMethod { BT, SPA, IRKA };

inline const char* to_string(ReductionMethod m) {
    switch (m) {
    case ReductionMethod::BT: return "bt";
    case ReductionMethod::SPA: return "spa";
    case ReductionMethod::IRKA: return "irka";
    }
    return "unknown";
}

inline ReductionMethod parse_method(const std::string& s) {
    if (s == "bt") return ReductionMethod::BT;
    if (s == "spa") return ReductionMethod::SPA;
    if (s == "irka") return ReductionMethod::IRKA;
    throw Error(ErrorKind::InvalidParameter, "unknown reduction method '" + s + "'");
}

struct BalancingTransform {
    Mat S;
    Mat S_inv;
    Vec hsv; ///< descending
};

struct ReductionResult {
    BilinearSystem rom;
    ReductionMethod method = ReductionMethod::BT;
    std::optional<BalancingTransform> transform;
    Vec hsv_kept;
    Vec hsv_dropped;
    int iterations = 0;
    bool converged = true;
    std::optional<StabilityReport> rom_stability;
    std::optional<double> a22_condition; ///< SPA only
    Mat V, W;                            ///< IRKA projection bases (orthonormal)
    std::vector<std::string> warnings;
};

namespace detail {

/// K with K K^T = X from the symmetric eigendecomposition; eigenvalues above
/// -psd_tol * max are clipped to zero. Strict: every eigenvalue must exceed
/// rank_tol * max. Truncating: columns below that level are dropped, so K is
/// n x k with k the numerical rank.
inline Mat psd_factor(const Mat& X, const char* name, bool truncate = false, double psd_tol = 1e-10,
                      double rank_tol = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(X));
    const Vec& lam = es.eigenvalues();
    const double top = lam.maxCoeff();
    require(top > 0.0, ErrorKind::RankDeficiency, std::string(name) + " Gramian is zero");
    require(lam.minCoeff() >= -psd_tol * top, ErrorKind::Inconsistency,
            std::string(name) + " Gramian is indefinite beyond tolerance");
    const Vec clipped = lam.cwiseMax(0.0);
    if (!truncate) {
        require(clipped.minCoeff() >= rank_tol * top, ErrorKind::RankDeficiency,
                std::string(name) + " Gramian is numerically singular (eigenvalue ratio " +
                    std::to_string(clipped.minCoeff() / top) + ")");
        return es.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
    }
    // Eigenvalues ascend, so the retained ones are a trailing block.
    Index first = 0;
    while (clipped(first) < rank_tol * top) ++first;
    const Index k = X.rows() - first;
    return es.eigenvectors().rightCols(k) * clipped.tail(k).cwiseSqrt().asDiagonal();
}

inline void check_order(int r, int n) {
    require(r >= 1 && r <= n, ErrorKind::InvalidParameter,
            "reduced order must satisfy 1 <= r <= n (r = " + std::to_string(r) + ", n = " + std::to_string(n) + ")");
}

inline std::vector<std::string> cluster_warning(const Vec& hsv, int r) {
    if (r >= hsv.size()) return {};
    if (hsv(r - 1) - hsv(r) < 1e-10 * hsv(0))
        return {"order " + std::to_string(r) + " splits a cluster of Hankel singular values"};
    return {};
}

/// Truncating balance for BT / SPA; r must not exceed the numerical Hankel rank.
inline void balance_for_reduction(ReductionResult& res, const BilinearSystem& sys, int r, const GramianSet& g);

inline BilinearSystem leading_block(const BilinearSystem& bal, int r) {
    std::vector<Mat> N;
    for (const auto& Nk : bal.Ns()) N.push_back(Nk.topLeftCorner(r, r));
    return BilinearSystem(bal.A().topLeftCorner(r, r), bal.B().topRows(r), bal.C().leftCols(r), std::move(N));
}

} // namespace detail

enum class BalanceMode {
    Strict,  ///< both Gramians must be numerically nonsingular
    Truncate ///< balance the numerically minimal part only
};

/// Square-root balancing: P = K K^T, Q = L L^T, K^T L = V Sigma U^T,
/// S = Sigma^{-1/2} U^T L^T, S^{-1} = K V Sigma^{-1/2}.
/// In Truncate mode S is q x n and S^{-1} is n x q, where q counts the Hankel
/// singular values above 1e-12 * the largest; S S^{-1} = I_q either way.
inline BalancingTransform balance(const Mat& P, const Mat& Q, BalanceMode mode = BalanceMode::Strict) {
    require(P.rows() == P.cols() && Q.rows() == Q.cols() && P.rows() == Q.rows(), ErrorKind::Dimension,
            "Gramians must be square and of equal size");
    const bool truncate = mode == BalanceMode::Truncate;
    const Mat K = detail::psd_factor(P, "reachability", truncate);
    const Mat L = detail::psd_factor(Q, "observability", truncate);
    Eigen::JacobiSVD<Mat> svd(K.transpose() * L, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec sigma = svd.singularValues();
    Index q = sigma.size();
    if (truncate)
        while (q > 0 && sigma(q - 1) <= 1e-12 * sigma(0)) --q;
    else
        require(q == P.rows() && sigma.minCoeff() > 0.0, ErrorKind::RankDeficiency, "zero Hankel singular value");
    require(q > 0, ErrorKind::RankDeficiency, "all Hankel singular values vanish");
    const Vec isqrt = sigma.head(q).cwiseSqrt().cwiseInverse();
    BalancingTransform t;
    t.S = isqrt.asDiagonal() * svd.matrixV().leftCols(q).transpose() * L.transpose();
    t.S_inv = K * svd.matrixU().leftCols(q) * isqrt.asDiagonal();
    t.hsv = sigma.head(q);
    return t;
}

inline BalancingTransform balance(const BilinearSystem& sys, const Mat& P, const Mat& Q,
                                  BalanceMode mode = BalanceMode::Strict) {
    require(P.rows() == sys.n(), ErrorKind::Dimension, "Gramian size does not match the system");
    return balance(P, Q, mode);
}

inline BilinearSystem balanced_realization(const BilinearSystem& sys, const BalancingTransform& t) {
    return transform(sys, t.S, t.S_inv);
}

namespace detail {

inline void balance_for_reduction(ReductionResult& res, const BilinearSystem& sys, int r, const GramianSet& g) {
    res.transform = balance(sys, g.P, g.Q, BalanceMode::Truncate);
    const Vec& hsv = res.transform->hsv;
    const Index q = hsv.size();
    require(r <= q, ErrorKind::RankDeficiency,
            "order " + std::to_string(r) + " exceeds the numerical Hankel rank " + std::to_string(q));
    res.hsv_kept = hsv.head(r);
    res.hsv_dropped = hsv.tail(q - r);
    res.warnings = cluster_warning(hsv, r);
    if (q < sys.n())
        res.warnings.push_back(std::to_string(sys.n() - q) +
                               " states below the numerical Hankel rank were discarded before reduction");
}

} // namespace detail

inline ReductionResult balanced_truncation(const BilinearSystem& sys, int r, const GramianSet& g,
                                           const SolverOptions& opts = {}) {
    require_valid(sys);
    detail::check_order(r, sys.n());
    ReductionResult res;
    res.method = ReductionMethod::BT;
    detail::balance_for_reduction(res, sys, r, g);
    res.rom = detail::leading_block(balanced_realization(sys, *res.transform), r);
    res.rom_stability = kron_stability(res.rom, opts);
    if (!res.rom_stability->mean_square_stable) res.warnings.push_back("BT reduced model is not mean-square stable");
    return res;
}

inline ReductionResult balanced_truncation(const BilinearSystem& sys, int r, const SolverOptions& opts = {}) {
    return balanced_truncation(sys, r, gramian_set(sys, std::nullopt, opts), opts);
}

/// SPA on a balanced realization: (A11 - A12 A22^{-1} A21, B1, C1 - C2 A22^{-1} A21,
/// N11 - N12 A22^{-1} A21).
inline BilinearSystem spa_from_balanced(const BilinearSystem& bal, int r, double* condition = nullptr) {
    const int n = bal.n();
    if (r == n) {
        if (condition) *condition = 1.0;
        return bal;
    }
    const Mat A22 = bal.A().bottomRightCorner(n - r, n - r);
    Eigen::PartialPivLU<Mat> lu(A22);
    const double rcond = lu.rcond();
    if (condition) *condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    require(rcond > 1e-14, ErrorKind::Singularity,
            "A22 is singular (condition estimate " + std::to_string(rcond > 0 ? 1.0 / rcond : INFINITY) + ")");
    const Mat G = lu.solve(bal.A().bottomLeftCorner(n - r, r)); // A22^{-1} A21
    std::vector<Mat> N;
    for (const auto& Nk : bal.Ns()) N.push_back(Nk.topLeftCorner(r, r) - Nk.topRightCorner(r, n - r) * G);
    return BilinearSystem(bal.A().topLeftCorner(r, r) - bal.A().topRightCorner(r, n - r) * G, bal.B().topRows(r),
                          bal.C().leftCols(r) - bal.C().rightCols(n - r) * G, std::move(N));
}

inline ReductionResult singular_perturbation(const BilinearSystem& sys, int r, const GramianSet& g,
                                             const SolverOptions& opts = {}) {
    require_valid(sys);
    detail::check_order(r, sys.n());
    ReductionResult res;
    res.method = ReductionMethod::SPA;
    detail::balance_for_reduction(res, sys, r, g);
    double cond = 1.0;
    res.rom = spa_from_balanced(balanced_realization(sys, *res.transform), r, &cond);
    res.a22_condition = cond;
    res.rom_stability = kron_stability(res.rom, opts);
    if (!res.rom_stability->mean_square_stable) res.warnings.push_back("SPA reduced model is not mean-square stable");
    return res;
}

inline ReductionResult singular_perturbation(const BilinearSystem& sys, int r, const SolverOptions& opts = {}) {
    return singular_perturbation(sys, r, gramian_set(sys, std::nullopt, opts), opts);
}

// ---------------------------------------------------------------------------
// Bilinear IRKA
// ---------------------------------------------------------------------------

struct IrkaOptions {
    double tol = 1e-8;
    int max_iterations = 100;
    std::optional<BilinearSystem> init; ///< default: BT at the same order
    bool random_init = false;
    std::uint64_t seed = 0;
};

namespace detail {

/// Dense complex solve of A1 X + X A2^T + sum N1_k X N2_k^T = F.
inline CMat complex_sylvester(const Mat& A1, const CMat& A2, const std::vector<Mat>& N1, const std::vector<CMat>& N2,
                              const CMat& F) {
    const Index n1 = A1.rows(), n2 = A2.rows();
    const CMat A1c = A1.cast<std::complex<double>>();
    CMat K = Eigen::kroneckerProduct(CMat::Identity(n2, n2), A1c);
    K += Eigen::kroneckerProduct(A2, CMat::Identity(n1, n1));
    for (std::size_t k = 0; k < N1.size(); ++k) K += Eigen::kroneckerProduct(N2[k], N1[k].cast<std::complex<double>>());
    Eigen::PartialPivLU<CMat> lu(K);
    const double rcond = lu.rcond();
    require(rcond > 1e-14, ErrorKind::Singularity,
            "IRKA Sylvester operator is singular (degenerate shifts, rcond " + std::to_string(rcond) + ")");
    const CVec x = lu.solve(Eigen::Map<const CVec>(F.data(), F.size()));
    return Eigen::Map<const CMat>(x.data(), n1, n2);
}

/// Orthonormal basis of the leading r-dimensional range of [Re X, Im X].
inline Mat realified_orth(const CMat& X, int r) {
    Mat R(X.rows(), 2 * X.cols());
    R << X.real(), X.imag();
    Eigen::JacobiSVD<Mat> svd(R, Eigen::ComputeThinU);
    const Vec& s = svd.singularValues();
    require(s.size() >= r && s(r - 1) > 1e-13 * s(0), ErrorKind::RankDeficiency,
            "IRKA basis lost rank during orthonormalization");
    return svd.matrixU().leftCols(r);
}

inline CVec sorted_eigenvalues(const Mat& A) {
    Eigen::EigenSolver<Mat> es(A, false);
    CVec ev = es.eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size(), [](const std::complex<double>& a, const std::complex<double>& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return ev;
}

inline BilinearSystem random_rom(const BilinearSystem& sys, int r, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    auto rnd = [&](Index rows, Index cols) {
        Mat M(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) M(i, j) = g(rng);
        return M;
    };
    // Distinct negative real poles keep the first spectral decomposition benign.
    Mat A = Mat::Zero(r, r);
    for (int i = 0; i < r; ++i) A(i, i) = -(1.0 + i) * std::max(1.0, std::abs(spectral_abscissa(sys.A())));
    std::vector<Mat> N;
    for (int k = 0; k < sys.m(); ++k) N.push_back(sys.N(k).norm() > 0.0 ? Mat(0.1 * rnd(r, r)) : Mat::Zero(r, r));
    return BilinearSystem(A, rnd(r, sys.m()), rnd(sys.p(), r), std::move(N));
}

} // namespace detail

inline ReductionResult bilinear_irka(const BilinearSystem& sys, int r, const IrkaOptions& opts = {},
                                     const SolverOptions& solver = {}) {
    require_valid(sys);
    detail::check_order(r, sys.n());
    const int m = sys.m();
    ReductionResult res;
    res.method = ReductionMethod::IRKA;
    res.converged = false;

    BilinearSystem rom;
    if (opts.init) {
        require(opts.init->n() == r && opts.init->m() == m && opts.init->p() == sys.p(), ErrorKind::Dimension,
                "IRKA initial guess has the wrong dimensions");
        rom = *opts.init;
    } else if (opts.random_init) {
        rom = detail::random_rom(sys, r, opts.seed);
    } else {
        rom = balanced_truncation(sys, r, solver).rom;
    }

    std::vector<Mat> Nt;
    for (const auto& Nk : sys.Ns()) Nt.push_back(Nk.transpose());
    const Mat At = sys.A().transpose();
    CVec previous = detail::sorted_eigenvalues(rom.A());

    for (int it = 1; it <= opts.max_iterations; ++it) {
        res.iterations = it;
        Eigen::EigenSolver<Mat> es(rom.A());
        const CMat X = es.eigenvectors(); // Ahat = X D X^{-1}, so S = X^{-1}
        Eigen::PartialPivLU<CMat> xlu(X);
        require(xlu.rcond() > 1e-12, ErrorKind::ProjectionBreakdown, "reduced A is not diagonalizable");
        const CMat S = xlu.inverse();
        const CMat D = es.eigenvalues().asDiagonal();
        const CMat Bt = S * rom.B().cast<std::complex<double>>();
        const CMat Ct = rom.C().cast<std::complex<double>>() * X;
        std::vector<CMat> Ntil, NtilT;
        for (int k = 0; k < m; ++k) {
            Ntil.push_back(S * rom.N(k).cast<std::complex<double>>() * X);
            NtilT.push_back(Ntil.back().transpose());
        }
        // A V + V D + sum N V Ntil^T = -B Bt^T
        const CMat V = detail::complex_sylvester(sys.A(), D, sys.Ns(), Ntil,
                                                 -sys.B().cast<std::complex<double>>() * Bt.transpose());
        // A^T W + W D + sum N^T W Ntil = -C^T Ct
        const CMat W = detail::complex_sylvester(At, D, Nt, NtilT,
                                                 -sys.C().transpose().cast<std::complex<double>>() * Ct);
        const Mat Vr = detail::realified_orth(V, r);
        const Mat Wr = detail::realified_orth(W, r);
        const Mat WtV = Wr.transpose() * Vr;
        Eigen::PartialPivLU<Mat> plu(WtV);
        require(plu.rcond() > 1e-13, ErrorKind::ProjectionBreakdown, "W^T V is singular");
        std::vector<Mat> N;
        for (int k = 0; k < m; ++k) N.push_back(plu.solve(Wr.transpose() * sys.N(k) * Vr));
        rom = BilinearSystem(plu.solve(Wr.transpose() * sys.A() * Vr), plu.solve(Wr.transpose() * sys.B()),
                             sys.C() * Vr, std::move(N));
        res.V = Vr;
        res.W = Wr;

        const CVec current = detail::sorted_eigenvalues(rom.A());
        const double change = (current - previous).norm() / std::max(previous.norm(), 1e-300);
        previous = current;
        if (!current.allFinite()) throw Error(ErrorKind::Divergence, "IRKA produced non-finite reduced matrices");
        if (change < opts.tol) {
            res.converged = true;
            break;
        }
    }
    res.rom = rom;
    if (!res.converged) res.warnings.push_back("IRKA did not converge within the iteration limit");
    try {
        res.rom_stability = kron_stability(rom, solver);
    } catch (const Error&) {
    }
    return res;
}

/// Relative Frobenius residuals of the four first-order H2 conditions
///   Ch Ph = C P_g,  Qh Bh = Q_g B,  Qh Ph = Q_g P_g,  Qh Nh_k Ph = Q_g N_k P_g.
/// Order: output, input, cross, bilinear (max over k).
inline std::array<double, 4> optimality_residuals(const BilinearSystem& full, const BilinearSystem& reduced,
                                                  const SolverOptions& opts = {}) {
    const GramianSet g = gramian_set(full, reduced, opts);
    auto rel = [](const Mat& a, const Mat& b) {
        const double scale = std::max(a.norm(), b.norm());
        return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
    };
    const Mat& Ph = *g.P_hat;
    const Mat& Qh = *g.Q_hat;
    const Mat& Pg = *g.P_g;
    const Mat& Qg = *g.Q_g;
    std::array<double, 4> out{};
    out[0] = rel(reduced.C() * Ph, full.C() * Pg);
    out[1] = rel(Qh * reduced.B(), Qg * full.B());
    out[2] = rel(Qh * Ph, Qg * Pg);
    for (int k = 0; k < full.m(); ++k) out[3] = std::max(out[3], rel(Qh * reduced.N(k) * Ph, Qg * full.N(k) * Pg));
    return out;
}

} // namespace bilimor
