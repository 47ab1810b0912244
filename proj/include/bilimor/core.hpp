#pragma once

// Shared types, the error taxonomy, and small numerical helpers used by every
// module of the library.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <functional>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bilimor {

inline constexpr const char* kVersion = "0.3.1";

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Index = Eigen::Index;

enum class ErrorKind {
    InvalidParameter,
    Dimension,
    Stability,
    Singularity,
    SizeCap,
    Divergence,
    Inconsistency,
    RankDeficiency,
    BalanceRequired,
    ProjectionBreakdown,
    FitQuality,
    Io,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Stability: return "stability";
    case ErrorKind::Singularity: return "singularity";
    case ErrorKind::SizeCap: return "size-cap";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Inconsistency: return "inconsistency";
    case ErrorKind::RankDeficiency: return "rank-deficiency";
    case ErrorKind::BalanceRequired: return "balance-required";
    case ErrorKind::ProjectionBreakdown: return "projection-breakdown";
    case ErrorKind::FitQuality: return "fit-quality";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) throw Error(kind, what);
}

// ---------------------------------------------------------------------------
// Dense helpers
// ---------------------------------------------------------------------------

inline Mat symmetrize(const Mat& X) { return 0.5 * (X + X.transpose()); }

inline double spectral_norm(const Mat& X) {
    if (X.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(X);
    return svd.singularValues()(0);
}

/// Largest real part over the spectrum of a square matrix.
inline double spectral_abscissa(const Mat& A) {
    if (A.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::EigenSolver<Mat> es(A, false);
    return es.eigenvalues().real().maxCoeff();
}

inline bool is_hurwitz(const Mat& A) { return spectral_abscissa(A) < 0.0; }

inline double min_symmetric_eigenvalue(const Mat& X) {
    if (X.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(X), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline double max_symmetric_eigenvalue(const Mat& X) {
    if (X.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(X), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(X.rows() - 1);
}

inline Mat expm(const Mat& X) { return X.exp(); }

inline Vec vec(const Mat& X) { return Eigen::Map<const Vec>(X.data(), X.size()); }

inline Mat unvec(const Vec& v, Index rows, Index cols) { return Eigen::Map<const Mat>(v.data(), rows, cols); }

inline bool all_finite(const Mat& X) { return X.allFinite(); }

/// |a - b| / max(|a|, |b|), with 0 for two zeros.
inline double relative_difference(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline double relative_fro_error(const Mat& X, const Mat& reference) {
    const double scale = reference.norm();
    const double diff = (X - reference).norm();
    return scale == 0.0 ? diff : diff / scale;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

namespace detail {

inline double simpson_recurse(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                              double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive Simpson quadrature with relative tolerance `rel_tol` (absolute
/// floor `abs_tol`). The interval is pre-split into `pieces` panels so that
/// oscillatory or localized integrands are not missed by the first probe.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-8,
                               double abs_tol = 1e-14, int pieces = 16, int max_depth = 40) {
    if (b <= a) return 0.0;
    // A coarse pass fixes the magnitude used by the relative tolerance.
    double coarse = 0.0;
    std::vector<double> nodes(pieces + 1);
    for (int i = 0; i <= pieces; ++i) nodes[i] = a + (b - a) * i / pieces;
    std::vector<double> fn(pieces + 1);
    for (int i = 0; i <= pieces; ++i) fn[i] = f(nodes[i]);
    std::vector<double> fm(pieces);
    for (int i = 0; i < pieces; ++i) {
        fm[i] = f(0.5 * (nodes[i] + nodes[i + 1]));
        coarse += (nodes[i + 1] - nodes[i]) / 6.0 * (fn[i] + 4.0 * fm[i] + fn[i + 1]);
    }
    const double tol = std::max(abs_tol, rel_tol * std::abs(coarse));
    double total = 0.0;
    for (int i = 0; i < pieces; ++i) {
        const double whole = (nodes[i + 1] - nodes[i]) / 6.0 * (fn[i] + 4.0 * fm[i] + fn[i + 1]);
        total += detail::simpson_recurse(f, nodes[i], nodes[i + 1], fn[i], fm[i], fn[i + 1], whole, tol / pieces,
                                         max_depth);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Worker count: BILIMOR_THREADS if set and positive, else hardware concurrency.
inline unsigned thread_budget() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BILIMOR_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) return static_cast<unsigned>(std::min<long>(cap, 1024));
    }
    return hw;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// handled by exactly one worker; callers write results into per-index slots.
template <typename Body> void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace bilimor
