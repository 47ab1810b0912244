#pragma once

// Fixed-step classical RK4 for the bilinear state equation, its fundamental
// solution, and the Lyapunov-type matrix ODE
//
//     Z' = A Z + Z A^T + sum_k N_k Z N_k^T,
//
// plus the matrix Gronwall verifier that compares the two.

#include "bilimor/system.hpp"

namespace bilimor {

struct IntegratorOptions {
    double max_step = 1e-3;
    double overflow_guard = 1e12;
};

struct Trajectory {
    std::vector<double> t;
    Mat states;  ///< n x K
    Mat outputs; ///< p x K
};

struct MatrixPath {
    std::vector<double> t;
    std::vector<Mat> values;
};

/// Uniform grid 0, dt, 2dt, ..., T with the given breakpoints merged in.
inline std::vector<double> make_grid(double T, double dt, const std::vector<double>& breakpoints = {},
                                     double start = 0.0) {
    require(T >= start && dt > 0.0, ErrorKind::InvalidParameter, "grid needs T >= start and dt > 0");
    std::vector<double> grid;
    const auto steps = static_cast<long>(std::ceil((T - start) / dt - 1e-9));
    for (long i = 0; i <= steps; ++i) grid.push_back(std::min(T, start + static_cast<double>(i) * dt));
    for (double b : breakpoints)
        if (b > start && b < T) grid.push_back(b);
    std::sort(grid.begin(), grid.end());
    std::vector<double> merged;
    for (double t : grid)
        if (merged.empty() || t - merged.back() > 1e-12 * std::max(1.0, std::abs(t))) merged.push_back(t);
    return merged;
}

namespace detail {

inline void check_grid(const std::vector<double>& grid, double start) {
    require(!grid.empty(), ErrorKind::InvalidParameter, "empty time grid");
    require(grid.front() == start, ErrorKind::InvalidParameter, "time grid must start at the initial time");
    for (std::size_t i = 1; i < grid.size(); ++i)
        require(grid[i] > grid[i - 1], ErrorKind::InvalidParameter, "time grid must be strictly increasing");
}

/// Requested grid plus control breakpoints, with flags marking requested points.
inline std::vector<std::pair<double, bool>> integration_nodes(const std::vector<double>& grid,
                                                              const std::vector<double>& breakpoints) {
    std::vector<std::pair<double, bool>> nodes;
    for (double t : grid) nodes.emplace_back(t, true);
    for (double b : breakpoints)
        if (b > grid.front() && b < grid.back() &&
            !std::binary_search(grid.begin(), grid.end(), b))
            nodes.emplace_back(b, false);
    std::sort(nodes.begin(), nodes.end());
    return nodes;
}

inline double step_for(double max_step, double rate) {
    // RK4 is stable on the real axis up to |h lambda| ~ 2.78.
    return rate > 0.0 ? std::min(max_step, 2.5 / rate) : max_step;
}

template <typename State, typename Rhs>
State rk4_interval(State x, double a, double b, double h_max, Rhs&& rhs) {
    const auto sub = static_cast<long>(std::max(1.0, std::ceil((b - a) / h_max - 1e-9)));
    const double h = (b - a) / static_cast<double>(sub);
    for (long i = 0; i < sub; ++i) {
        const double t = a + static_cast<double>(i) * h;
        const State k1 = rhs(t, x, a);
        const State k2 = rhs(t + 0.5 * h, State(x + 0.5 * h * k1), a);
        const State k3 = rhs(t + 0.5 * h, State(x + 0.5 * h * k2), a);
        const State k4 = rhs(t + h, State(x + h * k3), a);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

inline double bilinear_rate(const BilinearSystem& sys, const ControlSignal& u) {
    double rate = spectral_norm(sys.A());
    if (sys.has_bilinear_terms()) {
        // Coarse sup of |u_k| over the support.
        Vec peak = Vec::Zero(sys.m());
        const double T = u.horizon();
        for (int i = 0; i <= 200; ++i) peak = peak.cwiseMax(u(T * i / 200.0).cwiseAbs());
        for (int k = 0; k < sys.m(); ++k) rate += spectral_norm(sys.N(k)) * peak(k);
    }
    return rate;
}

} // namespace detail

/// Integral of ||u0(tau)||^2 from grid.front() to each grid point, Simpson on
/// the same sub-steps the integrator takes.
inline std::vector<double> cumulative_u0_energy(const ControlSignal& u, const U0Mask& mask,
                                                const std::vector<double>& grid, double max_step = 1e-3) {
    std::vector<double> out(grid.size(), 0.0);
    if (grid.empty()) return out;
    const auto nodes = detail::integration_nodes(grid, u.breakpoints());
    double acc = 0.0;
    std::size_t k = 0;
    out[k++] = 0.0;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double a = nodes[i - 1].first, b = nodes[i].first;
        const auto sub = static_cast<long>(std::max(1.0, std::ceil((b - a) / max_step - 1e-9)));
        const double h = (b - a) / static_cast<double>(sub);
        for (long j = 0; j < sub; ++j) {
            const double t0 = a + static_cast<double>(j) * h;
            auto e = [&](double t) { return mask.apply(u.on_interval(t, a)).squaredNorm(); };
            acc += h / 6.0 * (e(t0) + 4.0 * e(t0 + 0.5 * h) + e(t0 + h));
        }
        if (nodes[i].second) out[k++] = acc;
    }
    return out;
}

inline Trajectory integrate_bilinear(const BilinearSystem& sys, const ControlSignal& u, const Vec& x0,
                                     const std::vector<double>& grid, const IntegratorOptions& opts = {}) {
    require_valid(sys);
    require(u.m() == sys.m(), ErrorKind::Dimension, "control dimension does not match the system");
    require(x0.size() == sys.n(), ErrorKind::Dimension, "initial state dimension does not match the system");
    detail::check_grid(grid, grid.front());
    require(grid.front() >= 0.0, ErrorKind::InvalidParameter, "grid must start at a nonnegative time");

    const double h = detail::step_for(opts.max_step, detail::bilinear_rate(sys, u));
    auto rhs = [&](double t, const Vec& x, double interval_start) {
        const Vec uk = u.on_interval(t, interval_start);
        Vec dx = sys.A() * x + sys.B() * uk;
        for (int k = 0; k < sys.m(); ++k)
            if (uk(k) != 0.0) dx += uk(k) * (sys.N(k) * x);
        return dx;
    };

    Trajectory traj;
    traj.t = grid;
    traj.states.resize(sys.n(), static_cast<Index>(grid.size()));
    const auto nodes = detail::integration_nodes(grid, u.breakpoints());
    Vec x = x0;
    Index col = 0;
    traj.states.col(col++) = x;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        x = detail::rk4_interval(x, nodes[i - 1].first, nodes[i].first, h, rhs);
        if (!x.allFinite() || x.norm() > opts.overflow_guard)
            throw Error(ErrorKind::Divergence, "state norm exceeded the overflow guard at t = " +
                                                   std::to_string(nodes[i].first));
        if (nodes[i].second) traj.states.col(col++) = x;
    }
    traj.outputs = sys.C() * traj.states;
    return traj;
}

/// Phi_u(t, s) on a grid starting at s, integrated columnwise from the identity.
inline MatrixPath fundamental_solution(const BilinearSystem& sys, const ControlSignal& u, double s,
                                       const std::vector<double>& grid, const IntegratorOptions& opts = {}) {
    require_valid(sys);
    detail::check_grid(grid, s);
    const double h = detail::step_for(opts.max_step, detail::bilinear_rate(sys, u));
    auto rhs = [&](double t, const Mat& X, double interval_start) {
        const Vec uk = u.on_interval(t, interval_start);
        Mat dX = sys.A() * X;
        for (int k = 0; k < sys.m(); ++k)
            if (uk(k) != 0.0) dX += uk(k) * (sys.N(k) * X);
        return dX;
    };
    MatrixPath path;
    path.t = grid;
    const auto nodes = detail::integration_nodes(grid, u.breakpoints());
    Mat X = Mat::Identity(sys.n(), sys.n());
    path.values.push_back(X);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        X = detail::rk4_interval(X, nodes[i - 1].first, nodes[i].first, h, rhs);
        if (!X.allFinite() || X.norm() > opts.overflow_guard)
            throw Error(ErrorKind::Divergence, "fundamental solution exceeded the overflow guard");
        if (nodes[i].second) path.values.push_back(X);
    }
    return path;
}

/// Z' = A Z + Z A^T + sum N_k Z N_k^T from Z(grid[0]) = Z0; symmetrized each interval.
inline MatrixPath integrate_matrix_ode(const Mat& A, const std::vector<Mat>& N, const Mat& Z0,
                                       const std::vector<double>& grid, const IntegratorOptions& opts = {}) {
    require(Z0.rows() == A.rows() && Z0.cols() == A.rows(), ErrorKind::Dimension, "Z0 must be n x n");
    require((Z0 - Z0.transpose()).norm() <= 1e-12 * std::max(1.0, Z0.norm()), ErrorKind::InvalidParameter,
            "Z0 must be symmetric");
    detail::check_grid(grid, grid.front());
    double rate = 2.0 * spectral_norm(A);
    for (const auto& Nk : N) rate += std::pow(spectral_norm(Nk), 2);
    const double h = detail::step_for(opts.max_step, rate);
    auto rhs = [&](double, const Mat& Z, double) {
        Mat dZ = A * Z + Z * A.transpose();
        for (const auto& Nk : N) dZ += Nk * Z * Nk.transpose();
        return dZ;
    };
    MatrixPath path;
    path.t = grid;
    Mat Z = Z0;
    path.values.push_back(Z);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        Z = symmetrize(detail::rk4_interval(Z, grid[i - 1], grid[i], h, rhs));
        if (!Z.allFinite() || Z.norm() > opts.overflow_guard)
            throw Error(ErrorKind::Divergence, "matrix ODE exceeded the overflow guard");
        path.values.push_back(Z);
    }
    return path;
}

inline MatrixPath integrate_matrix_ode(const BilinearSystem& sys, const Mat& Z0, const std::vector<double>& grid,
                                       const IntegratorOptions& opts = {}) {
    return integrate_matrix_ode(sys.A(), sys.Ns(), Z0, grid, opts);
}

struct GronwallResult {
    std::vector<double> t;
    std::vector<double> margins; ///< min eig(exp{int ||u0||^2} Zbar(t-s) - x x^T)
    std::vector<double> scales;  ///< ||exp{...} Zbar(t-s)||_2
    double worst_relative = 0.0; ///< min over t of margin / max(scale, tiny)
    bool holds = true;
};

/// Checks x(t) x(t)^T <= exp{int_s^t ||u0||^2} Zbar(t - s, x0 x0^T) for the
/// homogeneous state started at x0 at time s.
inline GronwallResult gronwall_check(const BilinearSystem& sys, const ControlSignal& u, const Vec& x0, double s,
                                     const std::vector<double>& grid, double tol = 1e-6,
                                     const IntegratorOptions& opts = {}) {
    detail::check_grid(grid, s);
    const BilinearSystem homogeneous(sys.A(), Mat::Zero(sys.n(), sys.m()), sys.C(), sys.Ns());
    const Trajectory traj = integrate_bilinear(homogeneous, u, x0, grid, opts);
    std::vector<double> shifted(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) shifted[i] = grid[i] - s;
    shifted.front() = 0.0;
    const MatrixPath Z = integrate_matrix_ode(sys, x0 * x0.transpose(), shifted, opts);
    const auto energy = cumulative_u0_energy(u, u0_mask(sys), grid, opts.max_step);

    GronwallResult res;
    res.t = grid;
    res.worst_relative = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Mat rhs = std::exp(energy[i]) * Z.values[i];
        const Vec x = traj.states.col(static_cast<Index>(i));
        const double margin = min_symmetric_eigenvalue(rhs - x * x.transpose());
        const double scale = spectral_norm(rhs);
        res.margins.push_back(margin);
        res.scales.push_back(scale);
        const double rel = margin / std::max(scale, std::numeric_limits<double>::min());
        res.worst_relative = std::min(res.worst_relative, rel);
        if (margin < -tol * scale) res.holds = false;
    }
    return res;
}

inline double sup_output(const Trajectory& traj) {
    double sup = 0.0;
    for (Index k = 0; k < traj.outputs.cols(); ++k) sup = std::max(sup, traj.outputs.col(k).norm());
    return sup;
}

/// ||x(t)||^2 <= exp{gamma^2 ||u0||_{L2}^2} ||x0||^2 k1 e^{-k2 t} on the grid
/// for the homogeneous state equation.
inline bool decay_envelope_check(const BilinearSystem& sys, const ControlSignal& u, const Vec& x0, double gamma,
                                 double k1, double k2, const std::vector<double>& grid,
                                 const IntegratorOptions& opts = {}) {
    const BilinearSystem homogeneous(sys.A(), Mat::Zero(sys.n(), sys.m()), sys.C(), sys.Ns());
    const Trajectory traj = integrate_bilinear(homogeneous, u, x0, grid, opts);
    const U0Mask mask = u0_mask(sys);
    const auto energy = cumulative_u0_energy(u, mask, make_grid(std::max(u.horizon(), 1e-12), u.horizon() > 0 ? u.horizon() : 1.0,
                                                                u.breakpoints()),
                                             opts.max_step);
    const double total = energy.back();
    const double factor = std::exp(gamma * gamma * total) * x0.squaredNorm() * k1;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double lhs = traj.states.col(static_cast<Index>(i)).squaredNorm();
        const double env = factor * std::exp(-k2 * grid[i]);
        if (lhs > env * (1.0 + 1e-6) + 1e-300) return false;
    }
    return true;
}

} // namespace bilimor
