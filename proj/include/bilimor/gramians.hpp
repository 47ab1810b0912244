#pragma once

// Reachability / observability Gramians, the mixed Gramians of a full/reduced
// pair, time-limited Gramians, and H2 quantities.

#include "bilimor/lyapunov.hpp"
#include "bilimor/simulate.hpp"

#include <map>
#include <optional>

namespace bilimor {

struct GramianSet {
    Mat P; ///< A P + P A^T + sum N P N^T = -B B^T
    Mat Q; ///< A^T Q + Q A + sum N^T Q N = -C^T C
    std::optional<Mat> P_hat; ///< reduced reach Gramian, r x r
    std::optional<Mat> Q_hat; ///< reduced observe Gramian, r x r
    std::optional<Mat> P_g;   ///< A P_g + P_g Ah^T + sum N P_g Nh^T = -B Bh^T, n x r
    std::optional<Mat> Q_g;   ///< Ah^T Q_g + Q_g A + sum Nh^T Q_g N = -Ch^T C, r x n
    double gamma_used = 1.0;
    std::map<std::string, double> residuals;
};

/// Mixed reach Gramian P_g (n x r).
inline SolveResult mixed_reach_gramian(const BilinearSystem& full, const BilinearSystem& reduced,
                                       const SolverOptions& opts = {}) {
    require(full.m() == reduced.m(), ErrorKind::Dimension, "full and reduced input counts differ");
    return solve_generalized_sylvester(full.A(), reduced.A(), full.Ns(), reduced.Ns(),
                                       -full.B() * reduced.B().transpose(), opts);
}

/// Mixed observe Gramian Q_g (r x n).
inline SolveResult mixed_observe_gramian(const BilinearSystem& full, const BilinearSystem& reduced,
                                         const SolverOptions& opts = {}) {
    require(full.m() == reduced.m() && full.p() == reduced.p(), ErrorKind::Dimension,
            "full and reduced dimensions differ");
    std::vector<Mat> N1, N2;
    for (int k = 0; k < full.m(); ++k) {
        N1.push_back(reduced.N(k).transpose());
        N2.push_back(full.N(k).transpose());
    }
    return solve_generalized_sylvester(reduced.A().transpose(), full.A().transpose(), N1, N2,
                                       -reduced.C().transpose() * full.C(), opts);
}

inline SolveResult reach_gramian(const BilinearSystem& sys, const SolverOptions& opts = {}) {
    return solve_generalized_lyapunov(sys.A(), sys.Ns(), sys.B() * sys.B().transpose(), GramianSide::Reach, opts);
}

inline SolveResult observe_gramian(const BilinearSystem& sys, const SolverOptions& opts = {}) {
    return solve_generalized_lyapunov(sys.A(), sys.Ns(), sys.C().transpose() * sys.C(), GramianSide::Observe,
                                      opts);
}

inline GramianSet gramian_set(const BilinearSystem& full, const std::optional<BilinearSystem>& reduced = std::nullopt,
                              const SolverOptions& opts = {}) {
    require_valid(full);
    GramianSet g;
    auto P = reach_gramian(full, opts);
    auto Q = observe_gramian(full, opts);
    g.P = P.X;
    g.Q = Q.X;
    g.residuals["P"] = P.residual;
    g.residuals["Q"] = Q.residual;
    if (reduced) {
        require_valid(*reduced);
        auto Ph = reach_gramian(*reduced, opts);
        auto Qh = observe_gramian(*reduced, opts);
        auto Pg = mixed_reach_gramian(full, *reduced, opts);
        auto Qg = mixed_observe_gramian(full, *reduced, opts);
        g.P_hat = Ph.X;
        g.Q_hat = Qh.X;
        g.P_g = Pg.X;
        g.Q_g = Qg.X;
        g.residuals["P_hat"] = Ph.residual;
        g.residuals["Q_hat"] = Qh.residual;
        g.residuals["P_g"] = Pg.residual;
        g.residuals["Q_g"] = Qg.residual;
    }
    return g;
}

struct TimeLimitedGramian {
    std::vector<double> grid;
    std::vector<Mat> P; ///< P_t = int_0^t Zbar(s, B B^T) ds
};

/// Zbar from Z0 = B B^T by matrix RK4, accumulated with the trapezoid rule on
/// the supplied grid.
inline TimeLimitedGramian time_limited_gramian(const BilinearSystem& sys, const std::vector<double>& grid,
                                               const IntegratorOptions& opts = {}) {
    require(!grid.empty() && grid.front() == 0.0, ErrorKind::InvalidParameter, "grid must start at 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
        require(grid[i] > grid[i - 1], ErrorKind::InvalidParameter, "grid must be strictly increasing");
    const MatrixPath Z = integrate_matrix_ode(sys, sys.B() * sys.B().transpose(), grid, opts);
    TimeLimitedGramian out;
    out.grid = grid;
    Mat acc = Mat::Zero(sys.n(), sys.n());
    out.P.push_back(acc);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        acc += 0.5 * (grid[i] - grid[i - 1]) * (Z.values[i - 1] + Z.values[i]);
        out.P.push_back(acc);
    }
    return out;
}

inline double h2_norm_from(const Mat& C, const Mat& P) {
    const double tr = (C * P * C.transpose()).trace();
    return std::sqrt(std::max(tr, 0.0));
}

inline double h2_norm(const BilinearSystem& sys, const SolverOptions& opts = {}) {
    return h2_norm_from(sys.C(), reach_gramian(sys, opts).X);
}

/// Squared H2 error from the three traces; clips roundoff down to -1e-10.
inline double h2_error_squared(const BilinearSystem& full, const BilinearSystem& reduced, const Mat& P,
                               const Mat& P_hat, const Mat& P_g) {
    const double value = (full.C() * P * full.C().transpose()).trace() +
                         (reduced.C() * P_hat * reduced.C().transpose()).trace() -
                         2.0 * (full.C() * P_g * reduced.C().transpose()).trace();
    require(value >= -1e-10, ErrorKind::Inconsistency,
            "squared H2 error is negative beyond roundoff (" + std::to_string(value) + ")");
    return std::max(value, 0.0);
}

inline double h2_error(const BilinearSystem& full, const BilinearSystem& reduced, const SolverOptions& opts = {}) {
    require(full.m() == reduced.m() && full.p() == reduced.p(), ErrorKind::Dimension,
            "full and reduced dimensions differ");
    const Mat P = reach_gramian(full, opts).X;
    const Mat Ph = reach_gramian(reduced, opts).X;
    const Mat Pg = mixed_reach_gramian(full, reduced, opts).X;
    return std::sqrt(h2_error_squared(full, reduced, P, Ph, Pg));
}

} // namespace bilimor
