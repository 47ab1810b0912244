#pragma once

// Monte Carlo for the homogeneous SDE  dz = A z dt + sum_k N_k z dw_k,
// second-moment comparison against the matrix ODE, mean-square decay fits,
// and the stochastic form of the Gronwall ordering.

#include "bilimor/lyapunov.hpp"
#include "bilimor/simulate.hpp"

#include <random>

namespace bilimor {

struct MomentPath {
    std::vector<double> grid;
    std::vector<Mat> M;            ///< sample second moments
    std::vector<double> fourth;    ///< sample mean of ||z||^4, for standard errors
    std::size_t paths = 0;         ///< requested
    std::size_t excluded = 0;      ///< diverged paths left out of the averages
    std::uint64_t seed = 0;
    bool instability_warning = false; ///< more than 1% of paths excluded

    [[nodiscard]] std::size_t used() const { return paths - excluded; }

    /// Standard error of M(t) in the Frobenius norm.
    [[nodiscard]] double standard_error(std::size_t i) const {
        const double var = std::max(fourth[i] - M[i].squaredNorm(), 0.0);
        return std::sqrt(var / static_cast<double>(std::max<std::size_t>(used(), 1)));
    }
};

struct SdeOptions {
    unsigned threads = 0;          ///< 0: thread_budget()
    double overflow_guard = 1e12;
    std::size_t block = 64;        ///< paths per reduction block
};

namespace detail {

inline double uniform_step(const std::vector<double>& grid) {
    require(grid.size() >= 2 && grid.front() == 0.0, ErrorKind::InvalidParameter,
            "SDE grid must start at 0 and have at least two points");
    const double h = grid[1] - grid[0];
    require(h > 0.0, ErrorKind::InvalidParameter, "SDE grid must be increasing");
    for (std::size_t i = 1; i < grid.size(); ++i)
        require(std::abs((grid[i] - grid[i - 1]) - h) <= 1e-9 * std::max(1.0, h * 1e3),
                ErrorKind::InvalidParameter, "SDE grid must be uniform");
    return h;
}

inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return std::mt19937_64(seq);
}

struct BlockSums {
    std::vector<Mat> second;
    std::vector<double> fourth;
    std::size_t excluded = 0;
};

} // namespace detail

/// Euler-Maruyama with step = grid spacing. Path j draws its increments from
/// its own engine keyed by (seed, j); blocks of paths are summed in index
/// order, so the result does not depend on the thread count.
inline MomentPath simulate_sde(const BilinearSystem& sys, const Vec& x0, const std::vector<double>& grid,
                               std::size_t paths, std::uint64_t seed, const SdeOptions& opts = {}) {
    require_valid(sys);
    require(x0.size() == sys.n(), ErrorKind::Dimension, "initial state dimension does not match the system");
    require(paths >= 1, ErrorKind::InvalidParameter, "at least one path is required");
    const double h = detail::uniform_step(grid);
    const double sqrt_h = std::sqrt(h);
    const Index n = sys.n();
    const std::size_t K = grid.size();
    std::vector<int> channels;
    for (int k = 0; k < sys.m(); ++k)
        if (sys.N(k).norm() > 0.0) channels.push_back(k);

    auto run_block = [&](std::size_t first, std::size_t last) {
        detail::BlockSums sums;
        sums.second.assign(K, Mat::Zero(n, n));
        sums.fourth.assign(K, 0.0);
        Mat states(n, static_cast<Index>(K));
        Vec z(n), drift(n);
        for (std::size_t j = first; j < last; ++j) {
            auto rng = detail::path_engine(seed, j);
            std::normal_distribution<double> normal;
            z = x0;
            states.col(0) = z;
            bool diverged = false;
            for (std::size_t i = 1; i < K; ++i) {
                drift = z + h * (sys.A() * z);
                for (int k : channels) drift += (sqrt_h * normal(rng)) * (sys.N(k) * z);
                z = drift;
                if (!z.allFinite() || z.norm() > opts.overflow_guard) {
                    diverged = true;
                    break;
                }
                states.col(static_cast<Index>(i)) = z;
            }
            if (diverged) {
                ++sums.excluded;
                continue;
            }
            for (std::size_t i = 0; i < K; ++i) {
                const auto col = states.col(static_cast<Index>(i));
                sums.second[i].noalias() += col * col.transpose();
                const double sq = col.squaredNorm();
                sums.fourth[i] += sq * sq;
            }
        }
        return sums;
    };

    MomentPath out;
    out.grid = grid;
    out.paths = paths;
    out.seed = seed;
    out.M.assign(K, Mat::Zero(n, n));
    out.fourth.assign(K, 0.0);

    const std::size_t block = std::max<std::size_t>(opts.block, 1);
    const std::size_t blocks = (paths + block - 1) / block;
    const unsigned threads = opts.threads ? opts.threads : thread_budget();
    // Waves of blocks bound the memory held in partial sums.
    const std::size_t wave = std::max<std::size_t>(threads, 1) * 4;
    for (std::size_t start = 0; start < blocks; start += wave) {
        const std::size_t count = std::min(wave, blocks - start);
        std::vector<detail::BlockSums> partial(count);
        parallel_for(count, threads, [&](std::size_t b) {
            const std::size_t first = (start + b) * block;
            partial[b] = run_block(first, std::min(paths, first + block));
        });
        for (auto& p : partial) {
            for (std::size_t i = 0; i < K; ++i) {
                out.M[i] += p.second[i];
                out.fourth[i] += p.fourth[i];
            }
            out.excluded += p.excluded;
        }
    }
    const double used = static_cast<double>(out.used());
    if (out.used() > 0)
        for (std::size_t i = 0; i < K; ++i) {
            out.M[i] /= used;
            out.fourth[i] /= used;
        }
    out.instability_warning = out.excluded * 100 > paths;
    return out;
}

/// Exact second moment of the Euler-Maruyama recursion:
/// M_{i+1} = (I + hA) M_i (I + hA)^T + h sum N_k M_i N_k^T.
inline std::vector<Mat> euler_maruyama_moments(const BilinearSystem& sys, const Mat& M0, std::size_t steps, double h) {
    const Mat F = Mat::Identity(sys.n(), sys.n()) + h * sys.A();
    std::vector<Mat> out{M0};
    Mat M = M0;
    for (std::size_t i = 0; i < steps; ++i) {
        Mat next = F * M * F.transpose();
        for (const auto& N : sys.Ns()) next += h * N * M * N.transpose();
        M = symmetrize(next);
        out.push_back(M);
    }
    return out;
}

struct MomentCheck {
    double deviation = 0.0; ///< max_t ||Mhat - Zbar||_F / max(1, ||Zbar||_F)
    double tolerance = 0.0;
    double statistical = 0.0; ///< 5 * max_t se(t) / max(1, ||Zbar||_F)
    double bias = 0.0;        ///< max_t ||M_EM - Zbar||_F / max(1, ||Zbar||_F)
    bool pass = false;
    MomentPath mc;
    MatrixPath exact;
};

/// Compares the Monte Carlo second moment with the matrix ODE solution.
/// Tolerance = 5 standard errors (relative, worst grid point) plus twice the
/// deterministic Euler-Maruyama bias.
inline MomentCheck moment_check(const BilinearSystem& sys, const Vec& x0, const std::vector<double>& grid,
                                std::size_t paths, std::uint64_t seed, const SdeOptions& opts = {}) {
    MomentCheck res;
    res.mc = simulate_sde(sys, x0, grid, paths, seed, opts);
    res.exact = integrate_matrix_ode(sys, x0 * x0.transpose(), grid);
    const double h = grid[1] - grid[0];
    const auto em = euler_maruyama_moments(sys, x0 * x0.transpose(), grid.size() - 1, h);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double scale = std::max(1.0, res.exact.values[i].norm());
        res.deviation = std::max(res.deviation, (res.mc.M[i] - res.exact.values[i]).norm() / scale);
        res.statistical = std::max(res.statistical, 5.0 * res.mc.standard_error(i) / scale);
        res.bias = std::max(res.bias, (em[i] - res.exact.values[i]).norm() / scale);
    }
    res.tolerance = res.statistical + 2.0 * res.bias;
    res.pass = res.deviation <= res.tolerance;
    return res;
}

struct DecayFit {
    double k1 = 0.0;
    double k2 = 0.0;
    double residual = 0.0; ///< RMS of the log-linear fit
};

/// Least squares of log tr M(t) = log(k1 ||x0||^2) - k2 t over the tail half
/// of the grid. k1 is then raised so the envelope dominates tr M on the whole
/// grid. No sign requirement on k2.
inline DecayFit fit_decay_rate(const std::vector<double>& grid, const std::vector<Mat>& M, const Vec& x0) {
    require(grid.size() == M.size() && grid.size() >= 4, ErrorKind::InvalidParameter, "need at least four samples");
    const double x2 = x0.squaredNorm();
    require(x2 > 0.0, ErrorKind::InvalidParameter, "decay fit needs a nonzero initial state");
    const double half = 0.5 * grid.back();
    double st = 0, sy = 0, stt = 0, sty = 0;
    std::size_t cnt = 0;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < half) continue;
        const double tr = M[i].trace();
        require(tr > 0.0, ErrorKind::FitQuality, "second moment trace is not positive");
        const double y = std::log(tr);
        pts.emplace_back(grid[i], y);
        st += grid[i];
        sy += y;
        stt += grid[i] * grid[i];
        sty += grid[i] * y;
        ++cnt;
    }
    const double c = static_cast<double>(cnt);
    const double slope = (c * sty - st * sy) / (c * stt - st * st);
    const double intercept = (sy - slope * st) / c;
    DecayFit fit;
    fit.k2 = -slope;
    double ss = 0.0;
    for (const auto& [t, y] : pts) ss += std::pow(y - (intercept + slope * t), 2);
    fit.residual = std::sqrt(ss / c);
    fit.k1 = std::exp(intercept) / x2;
    for (std::size_t i = 0; i < grid.size(); ++i)
        fit.k1 = std::max(fit.k1, M[i].trace() * std::exp(fit.k2 * grid[i]) / x2);
    return fit;
}

/// Mean-square decay constants from Monte Carlo on [0, T] with step 1e-3.
/// Requires the Kronecker stability condition.
inline DecayFit decay_fit(const BilinearSystem& sys, const Vec& x0, double T, std::size_t paths, std::uint64_t seed,
                          const SdeOptions& opts = {}, double step = 1e-3) {
    require(kron_stability(sys).mean_square_stable, ErrorKind::Stability,
            "decay fit requires mean-square stability");
    const auto grid = make_grid(T, step);
    const MomentPath mp = simulate_sde(sys, x0, grid, paths, seed, opts);
    DecayFit fit = fit_decay_rate(grid, mp.M, x0);
    require(fit.k2 > 0.0, ErrorKind::FitQuality, "fitted decay rate is not positive for a mean-square stable system");
    return fit;
}

/// x(t) x(t)^T <= exp{int_0^t ||u0||^2} E[z z^T] for the homogeneous state,
/// with E[z z^T] from the matrix ODE (default) or from Monte Carlo.
inline GronwallResult bilinear_stochastic_domination(const BilinearSystem& sys, const ControlSignal& u,
                                                     const Vec& x0, const std::vector<double>& grid,
                                                     std::size_t paths = 0, std::uint64_t seed = 0,
                                                     bool monte_carlo = false, double tol = 1e-6) {
    if (!monte_carlo) return gronwall_check(sys, u, x0, 0.0, grid, tol);
    const BilinearSystem homogeneous(sys.A(), Mat::Zero(sys.n(), sys.m()), sys.C(), sys.Ns());
    const Trajectory traj = integrate_bilinear(homogeneous, u, x0, grid);
    const MomentPath mp = simulate_sde(sys, x0, grid, paths, seed);
    const auto energy = cumulative_u0_energy(u, u0_mask(sys), grid);
    GronwallResult res;
    res.t = grid;
    res.worst_relative = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Mat rhs = std::exp(energy[i]) * mp.M[i];
        const Vec x = traj.states.col(static_cast<Index>(i));
        const double margin = min_symmetric_eigenvalue(rhs - x * x.transpose());
        const double scale = spectral_norm(rhs);
        res.margins.push_back(margin);
        res.scales.push_back(scale);
        res.worst_relative = std::min(res.worst_relative, margin / std::max(scale, std::numeric_limits<double>::min()));
        if (margin < -tol * scale) res.holds = false;
    }
    return res;
}

} // namespace bilimor
