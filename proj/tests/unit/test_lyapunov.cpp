#include "bilimor/lyapunov.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace bilimor;

namespace {
Mat m1(double v) { return Mat::Constant(1, 1, v); }
} // namespace

TEST(Kron, NegativeIdentity) {
    auto rep = kron_stability(-Mat::Identity(2, 2), {Mat::Zero(2, 2)});
    EXPECT_NEAR(rep.kron_abscissa, -2.0, 1e-12);
    EXPECT_TRUE(rep.mean_square_stable);
    EXPECT_TRUE(rep.hurwitz);
}

TEST(Kron, ScalarNoise) {
    auto a = kron_stability(m1(-1), {m1(1.0)});
    EXPECT_NEAR(a.kron_abscissa, -1.0, 1e-12);
    EXPECT_TRUE(a.mean_square_stable);
    auto b = kron_stability(m1(-1), {m1(1.5)});
    EXPECT_NEAR(b.kron_abscissa, 0.25, 1e-12);
    EXPECT_FALSE(b.mean_square_stable);
}

TEST(Kron, ToyStable) {
    auto rep = kron_stability(oracle::toy());
    EXPECT_TRUE(rep.mean_square_stable);
    EXPECT_NEAR(rep.kron_abscissa, oracle::kron_abscissa(oracle::toy().A(), oracle::toy().Ns()), 1e-10);
}

TEST(Kron, SizeCap) {
    SolverOptions opts;
    opts.size_cap_n = 3;
    EXPECT_THROW(kron_stability(-Mat::Identity(4, 4), {}, opts), Error);
}

TEST(Kron, SufficientConditionImpliesStability) {
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto s = oracle::random_ms_stable(5, 2, 1, 1000 + seed, 2.0);
        std::vector<Mat> N = s.Ns();
        for (auto& Nk : N) Nk *= 0.4 + 0.1 * static_cast<double>(seed % 10);
        auto rep = kron_stability(s.A(), N);
        ASSERT_TRUE(rep.sufficient_margin.has_value());
        if (*rep.sufficient_margin < 1.0) {
            ++checked;
            EXPECT_TRUE(rep.mean_square_stable) << seed;
        }
    }
    EXPECT_GT(checked, 10);
}

TEST(Kron, RadiusMethodAgreesWithSpectrum) {
    SolverOptions radius;
    radius.dense_spectrum_max_n = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = oracle::random_ms_stable(6, 2, 1, 50 + seed, 2.0);
        for (double scale : {0.5, 1.0, 1.6, 3.0}) {
            std::vector<Mat> N = s.Ns();
            for (auto& Nk : N) Nk *= scale;
            const double exact = oracle::kron_abscissa(s.A(), N);
            auto rep = kron_stability(s.A(), N, radius);
            EXPECT_EQ(rep.method, KronMethod::LyapunovRadius);
            EXPECT_EQ(rep.mean_square_stable, exact < 0.0) << seed << " " << scale;
            EXPECT_NEAR(rep.kron_abscissa, exact, 1e-6 * (1 + std::abs(exact))) << seed << " " << scale;
        }
    }
}

TEST(Lyapunov, ScalarExamples) {
    EXPECT_NEAR(solve_generalized_lyapunov(m1(-1), {m1(0)}, m1(1)).X(0, 0), 0.5, 1e-14);
    EXPECT_NEAR(solve_generalized_lyapunov(m1(-1), {m1(1)}, m1(1)).X(0, 0), 1.0, 1e-14);
    EXPECT_NEAR(solve_generalized_sylvester(m1(-1), m1(-1), {}, {}, m1(-1)).X(0, 0), 0.5, 1e-14);
}

TEST(Lyapunov, UnstableRejected) {
    try {
        solve_generalized_lyapunov(m1(-1), {m1(1.5)}, m1(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Stability);
    }
}

TEST(Lyapunov, SingularOperatorRejected) {
    try {
        solve_generalized_sylvester(m1(1), m1(-1), {}, {}, m1(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Singularity);
    }
}

TEST(Lyapunov, ToyAgainstOracle) {
    auto toy = oracle::toy();
    const Mat P = solve_generalized_lyapunov(toy.A(), toy.Ns(), toy.B() * toy.B().transpose()).X;
    EXPECT_LE(relative_fro_error(P, oracle::reach(toy)), 1e-12);
    const Mat Q =
        solve_generalized_lyapunov(toy.A(), toy.Ns(), toy.C().transpose() * toy.C(), GramianSide::Observe).X;
    EXPECT_LE(relative_fro_error(Q, oracle::observe(toy)), 1e-12);
}

TEST(Lyapunov, FixedPointAgainstOracle) {
    SolverOptions iterative;
    iterative.dense_max_unknowns = 0;
    iterative.dense_spectrum_max_n = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto s = oracle::random_ms_stable(7, 2, 2, 300 + seed);
        auto res = solve_generalized_lyapunov(s.A(), s.Ns(), s.B() * s.B().transpose(), GramianSide::Reach,
                                              iterative);
        EXPECT_FALSE(res.dense);
        EXPECT_LE(relative_fro_error(res.X, oracle::reach(s)), 1e-9) << seed;
        auto q = solve_generalized_lyapunov(s.A(), s.Ns(), s.C().transpose() * s.C(), GramianSide::Observe,
                                            iterative);
        EXPECT_LE(relative_fro_error(q.X, oracle::observe(s)), 1e-9) << seed;
    }
}

TEST(Lyapunov, SymmetryAndPsdOnRandomSystems) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto s = oracle::random_ms_stable(1 + static_cast<int>(seed % 9), 1 + static_cast<int>(seed % 3), 1, seed);
        const Mat P = solve_generalized_lyapunov(s.A(), s.Ns(), s.B() * s.B().transpose()).X;
        EXPECT_LE((P - P.transpose()).norm(), 1e-12 * P.norm());
        EXPECT_GE(min_symmetric_eigenvalue(P), -1e-10 * max_symmetric_eigenvalue(P)) << seed;
    }
}

TEST(Lyapunov, NoNoiseMatchesStandard) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto s = oracle::random_ms_stable(6, 2, 1, 77 + seed);
        const Mat rhs = s.B() * s.B().transpose();
        const Mat P = solve_generalized_lyapunov(s.A(), {Mat::Zero(6, 6), Mat::Zero(6, 6)}, rhs).X;
        EXPECT_LE(relative_fro_error(P, solve_lyapunov(s.A(), rhs)), 1e-10);
    }
}

TEST(Sylvester, SchurSolverNonsymmetric) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto a = oracle::random_ms_stable(5, 1, 1, seed);
        auto b = oracle::random_ms_stable(3, 1, 1, 40 + seed);
        const Mat F = a.B() * b.B().transpose();
        SylvesterSolver solver(a.A(), b.A());
        const Mat X = solver.solve(F, 0.3);
        EXPECT_LE((a.A() * X + X * b.A().transpose() - 0.3 * X - F).norm(), 1e-12 * F.norm());
    }
}

TEST(Sylvester, MixedAgainstOracle) {
    auto a = oracle::random_ms_stable(6, 2, 1, 5);
    auto b = oracle::random_ms_stable(3, 2, 1, 6);
    const Mat F = -a.B() * b.B().transpose();
    const Mat X = solve_generalized_sylvester(a.A(), b.A(), a.Ns(), b.Ns(), F).X;
    EXPECT_LE(relative_fro_error(X, oracle::solve(a.A(), b.A(), a.Ns(), b.Ns(), F)), 1e-12);
    SolverOptions iterative;
    iterative.dense_max_unknowns = 0;
    const Mat Y = solve_generalized_sylvester(a.A(), b.A(), a.Ns(), b.Ns(), F, iterative).X;
    EXPECT_LE(relative_fro_error(Y, X), 1e-9);
}

TEST(Sylvester, SameSystemGivesGramian) {
    auto toy = oracle::toy();
    const Mat Pg = solve_generalized_sylvester(toy.A(), toy.A(), toy.Ns(), toy.Ns(), -toy.B() * toy.B().transpose()).X;
    EXPECT_LE(relative_fro_error(Pg, oracle::reach(toy)), 1e-12);
}

TEST(Lyapunov, IterativeNearStabilityBoundary) {
    // rho(-L^{-1} Pi) close to one: plain fixed-point sweeps would need
    // thousands of steps.
    auto s = oracle::random_ms_stable(8, 1, 1, 91);
    const double rho = lyapunov_radius(s.A(), s.Ns());
    std::vector<Mat> N{s.N(0) * std::sqrt(0.995 / rho)};
    SolverOptions iterative;
    iterative.dense_max_unknowns = 0;
    iterative.dense_spectrum_max_n = 0;
    const Mat rhs = s.B() * s.B().transpose();
    auto res = solve_generalized_lyapunov(s.A(), N, rhs, GramianSide::Reach, iterative);
    EXPECT_LE(res.iterations, 500);
    EXPECT_LE(relative_fro_error(res.X, oracle::solve(s.A(), s.A(), N, N, -rhs)), 1e-8);
}
