#pragma once

// Output bounds of the form  sup_t ||y(t)|| <= h2 * exp{0.5 ||u0||^2} ||u||,
// their gamma-rescaled variants, the H2 output-error bound for a reduced
// model, reachability estimates, and the weighted Sigma_2 bounds for BT/SPA.

#include "bilimor/mor.hpp"

namespace bilimor {

struct BoundReport {
    double h2_quantity = 0.0;
    double control_factor = 0.0; ///< exp{0.5 gamma^2 ||u0||^2} gamma ||u||
    double bound = 0.0;
    double gamma = 1.0;
    double l2_u = 0.0;  ///< of the unscaled control
    double l2_u0 = 0.0; ///< of the unscaled control
    std::optional<double> simulated_sup;
    std::optional<double> ratio;
};

struct L2Norms {
    double u = 0.0;
    double u0 = 0.0;
};

/// ||u||_{L2} and ||u0||_{L2} by adaptive Simpson between breakpoints.
inline L2Norms control_l2_norms(const ControlSignal& u, const U0Mask& mask) {
    require(static_cast<int>(mask.active.size()) == u.m(), ErrorKind::Dimension, "mask length differs from m");
    L2Norms out;
    double a = 0.0;
    for (double b : u.breakpoints()) {
        if (b <= a) continue;
        const double start = a;
        out.u += adaptive_simpson([&](double t) { return u.on_interval(t, start).squaredNorm(); }, a, b, 1e-10, 1e-300);
        if (mask.any())
            out.u0 += adaptive_simpson([&](double t) { return mask.apply(u.on_interval(t, start)).squaredNorm(); }, a,
                                       b, 1e-10, 1e-300);
        a = b;
    }
    out.u = std::sqrt(out.u);
    out.u0 = std::sqrt(out.u0);
    return out;
}

/// f(gamma u) = exp{0.5 gamma^2 ||u0||^2} gamma ||u||.
inline double control_factor(const L2Norms& norms, double gamma = 1.0) {
    return std::exp(0.5 * gamma * gamma * norms.u0 * norms.u0) * gamma * norms.u;
}

/// Window [0, T_sim] with T_sim = horizon + 5 / |abscissa(A)|.
inline double simulation_window(const BilinearSystem& sys, const ControlSignal& u) {
    const double a = spectral_abscissa(sys.A());
    require(a < 0.0, ErrorKind::Stability, "simulation window needs a Hurwitz A");
    return u.horizon() + 5.0 / std::abs(a);
}

inline std::vector<double> sup_grid(double T, const ControlSignal& u, double dt = 1e-3) {
    return make_grid(T, dt, u.breakpoints());
}

/// sup over the window of ||y(t)|| from x0 = 0.
inline double simulated_sup_output(const BilinearSystem& sys, const ControlSignal& u, std::optional<double> T = {},
                                   const IntegratorOptions& opts = {}) {
    const double window = T ? *T : simulation_window(sys, u);
    return sup_output(integrate_bilinear(sys, u, Vec::Zero(sys.n()), sup_grid(window, u), opts));
}

/// sup over the window of ||y(t) - yhat(t)||, both systems simulated from zero.
inline double simulated_sup_error(const BilinearSystem& full, const BilinearSystem& reduced, const ControlSignal& u,
                                  std::optional<double> T = {}, const IntegratorOptions& opts = {}) {
    const double window = T ? *T : simulation_window(full, u);
    const auto grid = sup_grid(window, u);
    const Trajectory y = integrate_bilinear(full, u, Vec::Zero(full.n()), grid, opts);
    const Trajectory yh = integrate_bilinear(reduced, u, Vec::Zero(reduced.n()), grid, opts);
    double sup = 0.0;
    for (Index k = 0; k < y.outputs.cols(); ++k) sup = std::max(sup, (y.outputs.col(k) - yh.outputs.col(k)).norm());
    return sup;
}

inline void attach_simulation(BoundReport& report, double sup) {
    report.simulated_sup = sup;
    report.ratio = sup > 0.0 ? report.bound / sup : std::numeric_limits<double>::infinity();
}

inline bool mean_square_stable(const BilinearSystem& sys, const SolverOptions& opts = {}) {
    return kron_stability(sys, opts).mean_square_stable;
}

/// gamma = 1 when the system is mean-square stable, else 1.01 max(gamma*, 1).
inline double auto_gamma(const BilinearSystem& sys, const SolverOptions& opts = {}) {
    require(is_hurwitz(sys.A()), ErrorKind::Stability, "A is not Hurwitz: no rescaling makes the bound finite");
    if (mean_square_stable(sys, opts)) return 1.0;
    return 1.01 * std::max(gamma_threshold(sys), 1.0);
}

inline BoundReport output_bound(const BilinearSystem& sys, const ControlSignal& u,
                                std::optional<double> gamma = std::nullopt, const SolverOptions& opts = {}) {
    require_valid(sys);
    require(u.m() == sys.m(), ErrorKind::Dimension, "control dimension does not match the system");
    require(is_hurwitz(sys.A()), ErrorKind::Stability, "A is not Hurwitz");
    BoundReport rep;
    rep.gamma = gamma ? *gamma : auto_gamma(sys, opts);
    const BilinearSystem scaled = rescale(sys, rep.gamma);
    require(mean_square_stable(scaled, opts), ErrorKind::Stability,
            "infeasible gamma " + std::to_string(rep.gamma) + ": rescaled system is not mean-square stable");
    const L2Norms norms = control_l2_norms(u, u0_mask(sys));
    rep.l2_u = norms.u;
    rep.l2_u0 = norms.u0;
    rep.h2_quantity = h2_norm(scaled, opts);
    rep.control_factor = control_factor(norms, rep.gamma);
    rep.bound = rep.h2_quantity * rep.control_factor;
    return rep;
}

/// Common gamma for a (full, reduced) pair: 1 if both are mean-square stable,
/// else 1.01 max(gamma*_full, gamma*_reduced, 1).
inline double auto_gamma(const BilinearSystem& full, const BilinearSystem& reduced, const SolverOptions& opts = {}) {
    require(is_hurwitz(full.A()), ErrorKind::Stability, "A is not Hurwitz");
    require(is_hurwitz(reduced.A()), ErrorKind::Stability, "reduced A is not Hurwitz");
    if (mean_square_stable(full, opts) && mean_square_stable(reduced, opts)) return 1.0;
    return 1.01 * std::max({gamma_threshold(full), gamma_threshold(reduced), 1.0});
}

inline BoundReport output_error_bound(const BilinearSystem& full, const BilinearSystem& reduced,
                                      const ControlSignal& u, std::optional<double> gamma = std::nullopt,
                                      const SolverOptions& opts = {}) {
    require_valid(full);
    require_valid(reduced);
    require(full.m() == reduced.m() && full.p() == reduced.p(), ErrorKind::Dimension,
            "full and reduced dimensions differ");
    BoundReport rep;
    rep.gamma = gamma ? *gamma : auto_gamma(full, reduced, opts);
    const BilinearSystem fs = rescale(full, rep.gamma);
    const BilinearSystem rs = rescale(reduced, rep.gamma);
    require(mean_square_stable(fs, opts), ErrorKind::Stability,
            "infeasible gamma " + std::to_string(rep.gamma) + ": rescaled full system is not mean-square stable");
    require(mean_square_stable(rs, opts), ErrorKind::Stability,
            "reduced-stability: rescaled reduced system is not mean-square stable at gamma " +
                std::to_string(rep.gamma));
    const L2Norms norms = control_l2_norms(u, u0_mask(build_error_system(full, reduced).system));
    rep.l2_u = norms.u;
    rep.l2_u0 = norms.u0;
    rep.h2_quantity = h2_error(fs, rs, opts);
    rep.control_factor = control_factor(norms, rep.gamma);
    rep.bound = rep.h2_quantity * rep.control_factor;
    return rep;
}

struct ReachabilityRow {
    double lambda = 0.0;
    Vec direction;
    double rhs = 0.0;
    std::optional<double> observed;
};

/// Per eigendirection v_k of P: sup |<x(t), v_k>| <= sqrt(lambda_k) exp{0.5 ||u0||^2} ||u||.
inline std::vector<ReachabilityRow> reachability_estimate(const BilinearSystem& sys, const ControlSignal& u,
                                                          bool simulate = true, const SolverOptions& opts = {}) {
    const Mat P = reach_gramian(sys, opts).X;
    Eigen::SelfAdjointEigenSolver<Mat> es(P);
    const L2Norms norms = control_l2_norms(u, u0_mask(sys));
    const double factor = control_factor(norms);
    std::optional<Trajectory> traj;
    if (simulate) traj = integrate_bilinear(sys, u, Vec::Zero(sys.n()), sup_grid(simulation_window(sys, u), u));
    std::vector<ReachabilityRow> rows;
    for (Index k = P.rows() - 1; k >= 0; --k) {
        ReachabilityRow row;
        row.lambda = std::max(es.eigenvalues()(k), 0.0);
        row.direction = es.eigenvectors().col(k);
        row.rhs = std::sqrt(row.lambda) * factor;
        if (traj) row.observed = (row.direction.transpose() * traj->states).cwiseAbs().maxCoeff();
        rows.push_back(std::move(row));
    }
    return rows;
}

struct WeightedBound {
    BoundReport report;
    Mat K;
    double weighted_trace = 0.0;  ///< tr(Sigma_2 K)
    double h2_error_squared = 0.0; ///< three-trace value for the same reduced model
    double identity_gap = 0.0;     ///< relative difference of the two
    BilinearSystem rom;
};

namespace detail {

/// The supplied system must already be balanced with Gramians diag(hsv).
inline void require_balanced(const BilinearSystem& bal, const Vec& hsv, const SolverOptions& opts) {
    require(hsv.size() == bal.n(), ErrorKind::Dimension, "hsv length differs from n");
    const Mat S = hsv.asDiagonal();
    const Mat P = reach_gramian(bal, opts).X;
    const Mat Q = observe_gramian(bal, opts).X;
    const double scale = hsv.norm();
    require((P - S).norm() <= 1e-6 * scale && (Q - S).norm() <= 1e-6 * scale, ErrorKind::BalanceRequired,
            "system is not balanced: Gramians differ from diag(hsv)");
}

inline WeightedBound finish_weighted(WeightedBound wb, const Vec& hsv, int r, const BilinearSystem& bal,
                                     const ControlSignal& u, double gamma, const SolverOptions& opts) {
    const int n = bal.n();
    wb.weighted_trace = (hsv.tail(n - r).asDiagonal() * wb.K).trace();
    require(wb.weighted_trace >= -1e-10, ErrorKind::Inconsistency, "weighted trace is negative beyond roundoff");
    const GramianSet g = gramian_set(bal, wb.rom, opts);
    wb.h2_error_squared = h2_error_squared(bal, wb.rom, g.P, *g.P_hat, *g.P_g);
    wb.identity_gap = relative_difference(wb.weighted_trace, wb.h2_error_squared);
    const L2Norms norms = control_l2_norms(u, u0_mask(build_error_system(bal, wb.rom).system));
    wb.report.gamma = gamma;
    wb.report.l2_u = norms.u;
    wb.report.l2_u0 = norms.u0;
    wb.report.h2_quantity = std::sqrt(std::max(wb.weighted_trace, 0.0));
    wb.report.control_factor = control_factor(norms, gamma);
    wb.report.bound = wb.report.h2_quantity * wb.report.control_factor;
    return wb;
}

} // namespace detail

/// Weighted BT bound on a balanced (and, for gamma != 1, already rescaled)
/// realization. The control factor is evaluated at gamma u.
inline WeightedBound bt_weighted_bound(const BilinearSystem& bal, const Vec& hsv, int r, const ControlSignal& u,
                                       double gamma = 1.0, const SolverOptions& opts = {}) {
    require_valid(bal);
    detail::check_order(r, bal.n());
    detail::require_balanced(bal, hsv, opts);
    const int n = bal.n(), q = n - r;
    WeightedBound wb;
    wb.rom = detail::leading_block(bal, r);
    if (q == 0) {
        wb.K = Mat::Zero(0, 0);
        return detail::finish_weighted(std::move(wb), hsv, r, bal, u, gamma, opts);
    }
    const Mat Pg = mixed_reach_gramian(bal, wb.rom, opts).X;
    const Mat Ph = reach_gramian(wb.rom, opts).X;
    const Mat Pg1 = Pg.topRows(r), Pg2 = Pg.bottomRows(q);
    const Mat B2 = bal.B().bottomRows(q);
    const Mat A21 = bal.A().bottomLeftCorner(q, r);
    Mat K = B2 * B2.transpose() + 2.0 * Pg2 * A21.transpose();
    for (const auto& N : bal.Ns()) {
        const Mat N21 = N.bottomLeftCorner(q, r), N22 = N.bottomRightCorner(q, q);
        K += 2.0 * N22 * Pg2 * N21.transpose() + 2.0 * N21 * Pg1 * N21.transpose() - N21 * Ph * N21.transpose();
    }
    wb.K = K;
    return detail::finish_weighted(std::move(wb), hsv, r, bal, u, gamma, opts);
}

inline WeightedBound spa_weighted_bound(const BilinearSystem& bal, const Vec& hsv, int r, const ControlSignal& u,
                                        double gamma = 1.0, const SolverOptions& opts = {}) {
    require_valid(bal);
    detail::check_order(r, bal.n());
    detail::require_balanced(bal, hsv, opts);
    const int n = bal.n(), q = n - r;
    WeightedBound wb;
    wb.rom = spa_from_balanced(bal, r);
    if (q == 0) {
        wb.K = Mat::Zero(0, 0);
        return detail::finish_weighted(std::move(wb), hsv, r, bal, u, gamma, opts);
    }
    require(mean_square_stable(wb.rom, opts), ErrorKind::Stability,
            "reduced-stability: SPA reduced model is not mean-square stable");
    const Mat Pg = mixed_reach_gramian(bal, wb.rom, opts).X;
    const Mat Ph = reach_gramian(wb.rom, opts).X;
    const Mat Pg1 = Pg.topRows(r), Pg2 = Pg.bottomRows(q);
    const Mat B2 = bal.B().bottomRows(q);
    const Mat A21 = bal.A().bottomLeftCorner(q, r), A22 = bal.A().bottomRightCorner(q, q);
    const Mat G = A22.partialPivLu().solve(A21); // A22^{-1} A21
    Mat K = B2 * B2.transpose() - 2.0 * (A22 * Pg2 + A21 * Pg1) * G.transpose();
    for (const auto& N : bal.Ns()) {
        const Mat N21 = N.bottomLeftCorner(q, r), N22 = N.bottomRightCorner(q, q);
        const Mat M = N21 - N22 * G;
        K += 2.0 * (N22 * Pg2 + N21 * Pg1) * M.transpose() - M * Ph * M.transpose();
    }
    wb.K = K;
    return detail::finish_weighted(std::move(wb), hsv, r, bal, u, gamma, opts);
}

} // namespace bilimor
