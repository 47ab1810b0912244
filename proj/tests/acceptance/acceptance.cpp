// Acceptance checks. One PASS/FAIL line per criterion; exit status is nonzero
// if any criterion fails. Set BILIMOR_ACCEPT_FULL_HEAT=1 to also run the
// 900-state heat check (slow).

#include "bilimor.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace bilimor;

namespace {

// Pinned tolerances and runtime limits.
constexpr double kGramianTol = 1e-9;
constexpr double kTraceTol = 1e-8;
constexpr double kWeightedTol = 1e-8;
constexpr double kSpaCondMax = 1e6;
constexpr double kDominationSlack = 1e-6;
constexpr double kGronwallTol = 1e-6;
constexpr double kClosedFormSe = 3.0;
constexpr double kAbscissaExclusion = 0.05;
constexpr double kHeatGammaMax = 1.6;
constexpr double kIrkaGridTol = 1e-4;
constexpr double kIrkaLinearResidual = 1e-6;
constexpr double kIrkaToyResidual = 1e-5;
constexpr double kSuperpositionTol = 1e-5;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

struct Criterion {
    int id;
    const char* title;
    double limit_seconds;
    std::function<void(Outcome&)> run;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

/// Error system assembled directly: [A 0; 0 Ah], [B; Bh], [C -Ch], blkdiag(N, Nh).
BilinearSystem error_system(const BilinearSystem& f, const BilinearSystem& r) {
    const Index n = f.n(), q = r.n();
    Mat A = Mat::Zero(n + q, n + q), B(n + q, f.m()), C(f.p(), n + q);
    A.topLeftCorner(n, n) = f.A();
    A.bottomRightCorner(q, q) = r.A();
    B << f.B(), r.B();
    C << f.C(), -r.C();
    std::vector<Mat> N;
    for (int k = 0; k < f.m(); ++k) {
        Mat Nk = Mat::Zero(n + q, n + q);
        Nk.topLeftCorner(n, n) = f.N(k);
        Nk.bottomRightCorner(q, q) = r.N(k);
        N.push_back(Nk);
    }
    return BilinearSystem(A, B, C, N);
}

double oracle_h2_error2(const BilinearSystem& f, const BilinearSystem& r) {
    const auto e = error_system(f, r);
    return (e.C() * oracle::reach(e) * e.C().transpose()).trace();
}

// 1 ---------------------------------------------------------------------------
void gramian_solvers(Outcome& o) {
    double worst = 0.0;
    int iterative_cases = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const int n = 1 + static_cast<int>(seed % 12), m = 1 + static_cast<int>(seed % 3);
        const auto s = oracle::random_ms_stable(n, m, 2, 1000 + seed);
        const int r = 1 + static_cast<int>(seed % static_cast<std::uint64_t>(n));
        const auto red = oracle::random_ms_stable(r, m, 2, 5000 + seed);
        SolverOptions opts;
        if (seed % 2 == 1) {
            opts.dense_max_unknowns = 0; // iterative regime
            ++iterative_cases;
        }
        const Mat P = reach_gramian(s, opts).X;
        const Mat Q = observe_gramian(s, opts).X;
        const Mat Pg = mixed_reach_gramian(s, red, opts).X;
        const Mat Qg = mixed_observe_gramian(s, red, opts).X;
        std::vector<Mat> Nt, Nht;
        for (int k = 0; k < m; ++k) {
            Nt.push_back(s.N(k).transpose());
            Nht.push_back(red.N(k).transpose());
        }
        const Mat Pg_ref = oracle::solve(s.A(), red.A(), s.Ns(), red.Ns(), -s.B() * red.B().transpose());
        const Mat Qg_ref = oracle::solve(red.A().transpose(), s.A().transpose(), Nht, Nt, -red.C().transpose() * s.C());
        worst = std::max({worst, relative_fro_error(P, oracle::reach(s)), relative_fro_error(Q, oracle::observe(s)),
                          relative_fro_error(Pg, Pg_ref), relative_fro_error(Qg, Qg_ref)});
    }
    o.detail << "100 systems (" << iterative_cases << " iterative), worst rel. error " << sci(worst);
    o.require(worst <= kGramianTol, "relative error above " + sci(kGramianTol));
}

// 2 ---------------------------------------------------------------------------
void three_trace_identity(Outcome& o) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const int n = 3 + static_cast<int>(seed % 8), m = 1 + static_cast<int>(seed % 3);
        const auto s = oracle::random_ms_stable(n, m, 1 + static_cast<int>(seed % 2), 2000 + seed);
        const auto rom = balanced_truncation(s, std::max(1, n / 3)).rom;
        const double three = std::pow(h2_error(s, rom), 2);
        const double direct = oracle_h2_error2(s, rom);
        worst = std::max(worst, std::abs(three - direct) / direct);
    }
    o.detail << "50 pairs, worst rel. gap " << sci(worst);
    o.require(worst <= kTraceTol, "gap above " + sci(kTraceTol));
}

// 3 ---------------------------------------------------------------------------
BilinearSystem hand_truncation(const BilinearSystem& bal, int r) {
    std::vector<Mat> N;
    for (const auto& Nk : bal.Ns()) N.push_back(Nk.block(0, 0, r, r));
    return BilinearSystem(bal.A().block(0, 0, r, r), bal.B().block(0, 0, r, bal.m()), bal.C().block(0, 0, bal.p(), r), N);
}

BilinearSystem hand_spa(const BilinearSystem& bal, int r) {
    const int q = bal.n() - r;
    const Mat G = bal.A().block(r, r, q, q).fullPivLu().solve(bal.A().block(r, 0, q, r));
    std::vector<Mat> N;
    for (const auto& Nk : bal.Ns()) N.push_back(Nk.block(0, 0, r, r) - Nk.block(0, r, r, q) * G);
    return BilinearSystem(bal.A().block(0, 0, r, r) - bal.A().block(0, r, r, q) * G, bal.B().block(0, 0, r, bal.m()),
                          bal.C().block(0, 0, bal.p(), r) - bal.C().block(0, r, bal.p(), q) * G, N);
}

void weighted_identities(Outcome& o) {
    double worst_bt = 0.0, worst_spa = 0.0;
    int spa_cases = 0, spa_skipped = 0;
    const ControlSignal u = ControlSignal::zero(3);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const int n = 3 + static_cast<int>(seed % 7);
        const auto s = oracle::random_ms_stable(n, 3, 1, 3000 + seed);
        const auto g = gramian_set(s);
        const auto t = balance(s, g.P, g.Q);
        const auto bal = balanced_realization(s, t);
        const int r = 1 + static_cast<int>(seed % static_cast<std::uint64_t>(n - 1));
        // Extend the control to three channels for every instance.
        const auto bt = bt_weighted_bound(bal, t.hsv, r, u);
        const double ref_bt = oracle_h2_error2(bal, hand_truncation(bal, r));
        worst_bt = std::max(worst_bt, std::abs(bt.weighted_trace - ref_bt) / ref_bt);
        const Mat A22 = bal.A().block(r, r, n - r, n - r);
        Eigen::JacobiSVD<Mat> svd(A22);
        const double cond = svd.singularValues()(0) / svd.singularValues().tail(1)(0);
        if (cond > kSpaCondMax) {
            ++spa_skipped;
            continue;
        }
        try {
            const auto spa = spa_weighted_bound(bal, t.hsv, r, u);
            const double ref_spa = oracle_h2_error2(bal, hand_spa(bal, r));
            worst_spa = std::max(worst_spa, std::abs(spa.weighted_trace - ref_spa) / ref_spa);
            ++spa_cases;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Stability) throw;
            ++spa_skipped; // SPA model not mean-square stable: its H2 error does not exist
        }
    }
    o.detail << "BT worst rel. gap " << sci(worst_bt) << "; SPA worst rel. gap " << sci(worst_spa) << " over "
             << spa_cases << " cases (" << spa_skipped << " skipped)";
    o.require(worst_bt <= kWeightedTol, "BT gap");
    o.require(worst_spa <= kWeightedTol, "SPA gap");
    o.require(spa_cases >= 25, "too few SPA instances");
}

// 4 ---------------------------------------------------------------------------
void bound_domination(Outcome& o) {
    const auto toy = toy_system();
    const std::vector<double> alphas{0.25, 0.5, 1.0, 2.0, 4.0};
    std::vector<double> ratios;
    for (double a : alphas) {
        const auto u = paper_control(a);
        const auto rep = output_bound(toy, u);
        const double sup = simulated_sup_output(toy, u);
        ratios.push_back(rep.bound / sup);
        o.require(sup <= rep.bound + kDominationSlack, "alpha " + sci(a) + " sup exceeds bound");
        o.detail << "a=" << a << ": " << sci(sup) << " <= " << sci(rep.bound) << "; ";
    }
    const auto argmin = static_cast<std::size_t>(std::min_element(ratios.begin(), ratios.end()) - ratios.begin());
    o.detail << "ratio minimized at alpha=" << alphas[argmin];
    o.require(alphas[argmin] >= 0.25 && alphas[argmin] <= 1.0, "ratio minimum outside [0.25, 1]");
    o.require(ratios[4] > ratios[3], "ratio at alpha=4 not above alpha=2");
}

// 5 ---------------------------------------------------------------------------
void gronwall_ordering(Outcome& o) {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> unif(-1.5, 1.5), start(0.0, 0.5);
    double worst = std::numeric_limits<double>::infinity();
    int failures = 0;
    for (std::uint64_t c = 0; c < 100; ++c) {
        const int n = 2 + static_cast<int>(c % 5), m = 1 + static_cast<int>(c % 3);
        const auto sys = oracle::random_ms_stable(n, m, 1, 4000 + c);
        const int pieces = 2 + static_cast<int>(c % 4);
        std::vector<double> times{0.0};
        for (int i = 1; i <= pieces; ++i) times.push_back(1.5 * i / pieces);
        Mat vals(m, pieces);
        for (Index j = 0; j < pieces; ++j)
            for (Index i = 0; i < m; ++i) vals(i, j) = unif(rng);
        const auto u = ControlSignal::piecewise_constant(times, vals);
        Vec x0(n);
        for (Index i = 0; i < n; ++i) x0(i) = unif(rng);
        const double s = c % 2 ? start(rng) : 0.0;
        auto bps = u.breakpoints();
        bps.push_back(s);
        auto grid = make_grid(2.0, 0.01, bps);
        grid.erase(std::remove_if(grid.begin(), grid.end(), [s](double t) { return t < s; }), grid.end());
        const auto g = gronwall_check(sys, u, x0, s, grid, kGronwallTol);
        worst = std::min(worst, g.worst_relative);
        if (!g.holds) ++failures;
    }
    o.detail << "100 systems, worst margin / ||Zbar|| = " << sci(worst);
    o.require(failures == 0, std::to_string(failures) + " systems violate the ordering");
}

// 6 ---------------------------------------------------------------------------
void stochastic_link(Outcome& o) {
    const auto toy = toy_system();
    const auto grid = make_grid(1.0, 1e-3);
    const auto mc = moment_check(toy, Vec::Ones(2), grid, 10000, 20240601);
    o.detail << "toy: deviation " << sci(mc.deviation) << " <= tolerance " << sci(mc.tolerance) << "; ";
    o.require(mc.pass, "toy moment deviation above tolerance");

    const double c = 0.5;
    const auto scalar = oracle::scalar(-1.0, c, 1.0, 1.0);
    const auto mp = simulate_sde(scalar, Vec::Ones(1), grid, 10000, 777);
    double worst = 0.0;
    for (double t : {0.25, 0.5, 0.75, 1.0}) {
        const auto i = static_cast<std::size_t>(std::lround(t / 1e-3));
        const double exact = std::exp((-2.0 + c * c) * t);
        worst = std::max(worst, std::abs(mp.M[i](0, 0) - exact) / mp.standard_error(i));
    }
    o.detail << "scalar: worst deviation " << sci(worst) << " standard errors";
    o.require(worst <= kClosedFormSe, "scalar closed form outside 3 standard errors");
}

// 7 ---------------------------------------------------------------------------
void stability_equivalence(Outcome& o) {
    std::mt19937_64 rng(70);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> shift_d(-0.5, 1.0), noise_d(0.2, 0.8);
    int compared = 0, excluded = 0, mismatches = 0, stable = 0;
    const auto grid = make_grid(12.0, 1e-2);
    // Both signs are driven mainly by the drift shift. With large noise a
    // mean-square unstable system can decay along almost every path, with its
    // second moment carried by rare paths no finite sample resolves.
    for (int c = 0; c < 50; ++c) {
        const int n = 3;
        Mat R(n, n), N(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                R(i, j) = g(rng) / std::sqrt(3.0);
                N(i, j) = g(rng) / std::sqrt(3.0);
            }
        const Mat A = R - (spectral_abscissa(R) + shift_d(rng)) * Mat::Identity(n, n);
        N *= noise_d(rng);
        const BilinearSystem sys(A, Mat::Ones(n, 1), Mat::Ones(1, n), {N});
        const double abscissa = oracle::kron_abscissa(A, {N});
        if (std::abs(abscissa) < kAbscissaExclusion) {
            ++excluded;
            continue;
        }
        const auto mp = simulate_sde(sys, Vec::Ones(n), grid, 4000, 9000 + static_cast<std::uint64_t>(c));
        const auto fit = fit_decay_rate(grid, mp.M, Vec::Ones(n));
        ++compared;
        if (abscissa < 0) ++stable;
        if ((fit.k2 > 0) != (abscissa < 0)) ++mismatches;
    }
    o.detail << compared << " compared (" << stable << " stable, " << excluded << " excluded), " << mismatches
             << " sign mismatches; ";
    o.require(mismatches == 0, "decay sign disagrees with the Kronecker abscissa");
    o.require(stable > 0 && stable < compared, "both signs must occur");

    const auto toy = toy_system();
    const Vec x0 = Vec::Ones(2);
    const auto fit = decay_fit(toy, x0, 5.0, 10000, 4242);
    const bool env = decay_envelope_check(toy, paper_control(1.0), x0, 1.0, fit.k1, fit.k2, make_grid(5.0, 1e-3));
    o.detail << "toy envelope k1=" << sci(fit.k1) << " k2=" << sci(fit.k2);
    o.require(env, "envelope violated on the toy system");
}

// 8 ---------------------------------------------------------------------------
void heat_benchmark(Outcome& o) {
    const auto heat = heat2d(10).system;
    o.require(is_hurwitz(heat.A()), "A not Hurwitz");
    const double rho = lyapunov_radius(heat.A(), heat.Ns());
    const double gamma_exact = std::sqrt(rho); // radius scales as 1/gamma^2
    const bool fails_at_1 = !kron_stability(heat).mean_square_stable;
    const bool passes_at_max = kron_stability(rescale(heat, kHeatGammaMax)).mean_square_stable;
    o.detail << "n=100, stability threshold gamma=" << sci(gamma_exact) << "; ";
    o.require(fails_at_1, "condition holds already at gamma=1 (threshold " + sci(gamma_exact) + " < 1)");
    o.require(passes_at_max, "condition fails at gamma=1.6");

    const double gamma_min = 1.01 * gamma_exact;
    o.require(kron_stability(rescale(heat, gamma_min)).mean_square_stable, "not stable at gamma_min");
    const auto u = paper_control(1.0);
    double worst_ratio = std::numeric_limits<double>::infinity();
    int violations = 0;
    for (int i = 0; i < 10; ++i) {
        const double gamma = gamma_min + (3.0 - gamma_min) * i / 9.0;
        const auto bt = balanced_truncation(rescale(heat, gamma), 10);
        const auto rom = rescale(bt.rom, 1.0 / gamma);
        const auto rep = output_error_bound(heat, rom, u, gamma);
        const double err = simulated_sup_error(heat, rom, u, 2.0);
        worst_ratio = std::min(worst_ratio, rep.bound / err);
        if (err > rep.bound * (1.0 + 1e-6)) ++violations;
    }
    o.detail << "BT r=10 over gamma in [" << sci(gamma_min) << ", 3]: min bound/error " << sci(worst_ratio);
    o.require(violations == 0, std::to_string(violations) + " sweep points with error above bound");
}

void heat_full_scale() {
    const char* flag = std::getenv("BILIMOR_ACCEPT_FULL_HEAT");
    if (flag == nullptr || std::string(flag) != "1") {
        std::cout << "INFO 8 full-scale heat (n=900) skipped; set BILIMOR_ACCEPT_FULL_HEAT=1\n";
        return;
    }
    const auto heat = heat2d(30).system;
    const double gamma_exact = std::sqrt(lyapunov_radius(heat.A(), heat.Ns()));
    std::cout << "INFO 8 full-scale heat: threshold gamma=" << sci(gamma_exact)
              << ", fails at 1: " << (gamma_exact > 1.0 ? "yes" : "no")
              << ", passes at 1.3: " << (gamma_exact < 1.3 ? "yes" : "no") << '\n';
}

// 9 ---------------------------------------------------------------------------
double linear_r1_error2(double a, double g) {
    // G(s) = 1/(s+1) + 1/(s+3) against g/(s-a), a < 0.
    const double l[2] = {-1.0, -3.0};
    double full = 0.0, cross = 0.0;
    for (double li : l) {
        for (double lj : l) full += -1.0 / (li + lj);
        cross += -g / (li + a);
    }
    return full - g * g / (2 * a) - 2 * cross;
}

void irka_optimality(Outcome& o) {
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = -1;
    A(1, 1) = -3;
    const BilinearSystem lin(A, Mat::Ones(2, 1), Mat::Ones(1, 2), {Mat::Zero(2, 2)});
    const auto res = bilinear_irka(lin, 1);
    double best = std::numeric_limits<double>::infinity(), ba = -1, bg = 1;
    double a_lo = -20, a_hi = -1e-3, g_lo = -10, g_hi = 10;
    for (int level = 0; level < 8; ++level) {
        for (int i = 0; i <= 200; ++i)
            for (int j = 0; j <= 200; ++j) {
                const double a = a_lo + (a_hi - a_lo) * i / 200.0, gg = g_lo + (g_hi - g_lo) * j / 200.0;
                const double e = linear_r1_error2(a, gg);
                if (e < best) best = e, ba = a, bg = gg;
            }
        const double da = (a_hi - a_lo) / 20, dg = (g_hi - g_lo) / 20;
        a_lo = std::max(-20.0, ba - da), a_hi = std::min(-1e-3, ba + da), g_lo = bg - dg, g_hi = bg + dg;
    }
    const double irka_err = h2_error(lin, res.rom), grid_err = std::sqrt(std::max(best, 0.0));
    const auto lin_res = optimality_residuals(lin, res.rom);
    const double lin_max = *std::max_element(lin_res.begin(), lin_res.end());
    o.detail << "linear: IRKA " << sci(irka_err) << " vs grid " << sci(grid_err) << ", residual " << sci(lin_max)
             << "; ";
    o.require(res.converged, "linear IRKA did not converge");
    o.require(std::abs(irka_err - grid_err) <= kIrkaGridTol, "linear optimum mismatch");
    o.require(lin_max <= kIrkaLinearResidual, "linear optimality residual");

    const auto toy = toy_system();
    const auto tres = bilinear_irka(toy, 1);
    const auto r = optimality_residuals(toy, tres.rom);
    const double toy_max = *std::max_element(r.begin(), r.end());
    o.detail << "toy: residual " << sci(toy_max) << " after " << tres.iterations << " iterations";
    o.require(tres.converged, "toy IRKA did not converge");
    o.require(toy_max <= kIrkaToyResidual, "toy optimality residual");
}

// 10 --------------------------------------------------------------------------
void superposition(Outcome& o) {
    const auto toy = toy_system();
    const auto u = paper_control(1.0);
    Vec x0(2);
    x0 << 0.5, -0.2;
    const double T = 2.0;
    const auto direct = integrate_bilinear(toy, u, x0, make_grid(T, 0.01, u.breakpoints()));
    Vec x = fundamental_solution(toy, u, 0.0, {0.0, T}).values.back() * x0;
    // Composite Simpson of Phi(T, s) B u(s) over the control support [0, 1].
    const int panels = 100;
    const double ds = 1.0 / panels;
    Vec integral = Vec::Zero(2);
    for (int i = 0; i <= panels; ++i) {
        const double s = i * ds;
        const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const Vec bu = toy.B() * u(s);
        integral += w * fundamental_solution(toy, u, s, {s, T}).values.back() * bu;
    }
    x += integral * ds / 3.0;
    const double err = (x - direct.states.col(direct.states.cols() - 1)).norm();
    o.detail << "||x_superposition - x_direct|| = " << sci(err);
    o.require(err <= kSuperpositionTol, "superposition mismatch");
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "generalized Lyapunov/Sylvester solutions vs Kronecker oracle", 60, gramian_solvers},
        {2, "three-trace H2 error identity", 60, three_trace_identity},
        {3, "weighted trace identities for BT and SPA", 120, weighted_identities},
        {4, "output bound dominates simulation on the toy system", 60, bound_domination},
        {5, "matrix Gronwall ordering", 120, gronwall_ordering},
        {6, "Monte Carlo second moment vs matrix ODE and closed form", 120, stochastic_link},
        {7, "mean-square decay sign vs Kronecker abscissa; decay envelope", 120, stability_equivalence},
        {8, "heat benchmark at 10 x 10", 300, heat_benchmark},
        {9, "IRKA optimality", 60, irka_optimality},
        {10, "solution representation by superposition", 10, superposition},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.require(secs <= c.limit_seconds, "runtime above " + std::to_string(static_cast<int>(c.limit_seconds)) + " s");
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << " " << c.title << ": " << o.detail.str() << " ("
                  << sci(secs) << " s)" << std::endl;
        if (c.id == 8) heat_full_scale();
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
