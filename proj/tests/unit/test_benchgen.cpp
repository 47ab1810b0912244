#include "bilimor/benchgen.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace bilimor;

TEST(Toy, Matrices) {
    auto t = toy_system();
    auto o = oracle::toy();
    EXPECT_EQ(t.A(), o.A());
    EXPECT_EQ(t.N(0), o.N(0));
    EXPECT_EQ(t.N(1), o.N(1));
    EXPECT_EQ(t.B(), o.B());
    EXPECT_EQ(t.C(), o.C());
}

TEST(PaperControl, NormsAndHorizon) {
    for (double alpha : {0.5, 1.0, 3.0}) {
        auto u = paper_control(alpha);
        auto norms = control_l2_norms(u, u0_mask(toy_system()));
        EXPECT_NEAR(norms.u, alpha, 1e-8 * alpha);
        EXPECT_NEAR(norms.u0, 0.48 * alpha, 0.01 * alpha);
        EXPECT_EQ(u(1.0 + 1e-12), Vec::Zero(2));
    }
    // Closed form: ||u1||^2 / ||ubar||^2 with ||ubar||^2 = (1 - e^-2)/2 + (e^2 - 1)(1/4 - 1/(4 + 4 pi^2)).
    const double e1 = 0.5 * (1 - std::exp(-2.0));
    const double e2 = (std::exp(2.0) - 1) * (0.25 - 1.0 / (4 + 4 * M_PI * M_PI));
    EXPECT_NEAR(control_l2_norms(paper_control(1.0), u0_mask(toy_system())).u0, std::sqrt(e1 / (e1 + e2)), 1e-9);
    EXPECT_EQ(control_l2_norms(paper_control(0.0), u0_mask(toy_system())).u, 0.0);
    EXPECT_THROW(paper_control(-1.0), Error);
}

TEST(Heat, HandAssembledTwoByTwo) {
    auto bench = heat2d(2);
    const double h = 1.0 / 3.0, s = 1.0 / (h * h);
    // Nodes: 0 = (0,0), 1 = (0,1), 2 = (1,0), 3 = (1,1); i = 0 is the Robin edge.
    Mat A(4, 4);
    A << -3, 1, 1, 0,
          1, -3, 0, 1,
          1, 0, -4, 1,
          0, 1, 1, -4;
    A *= s;
    Mat N1 = Mat::Zero(4, 4);
    N1(0, 0) = N1(1, 1) = 1 / h;
    Mat B(4, 2);
    B << -1 / h, 0, -1 / h, 0, 0, s, 0, s;
    EXPECT_LE((bench.system.A() - A).norm(), 1e-12 * A.norm());
    EXPECT_LE((bench.system.N(0) - N1).norm(), 1e-12);
    EXPECT_EQ(bench.system.N(1).norm(), 0.0);
    EXPECT_LE((bench.system.B() - B).norm(), 1e-12 * B.norm());
    EXPECT_EQ(bench.system.C(), Mat::Constant(1, 4, 0.25));
    EXPECT_THROW(heat2d(1), Error);
}

TEST(Heat, SignsAndStructure) {
    for (int nn : {3, 5, 8}) {
        auto bench = heat2d(nn);
        const Mat& A = bench.system.A();
        EXPECT_LT(A.diagonal().maxCoeff(), 0.0);
        EXPECT_EQ((A - A.transpose()).norm(), 0.0);
        EXPECT_LT(spectral_abscissa(A), 0.0);
        const Mat& N1 = bench.system.N(0);
        for (int i = 0; i < nn; ++i)
            for (int j = 0; j < nn; ++j)
                if (i > 0) EXPECT_EQ(N1.row(i * nn + j).norm() + N1.col(i * nn + j).norm(), 0.0);
    }
}

TEST(Heat, TenByTenStabilityShape) {
    auto bench = heat2d(10);
    EXPECT_TRUE(is_hurwitz(bench.system.A()));
    auto at1 = kron_stability(bench.system);
    EXPECT_TRUE(at1.lyapunov_radius.has_value());
    auto at16 = kron_stability(rescale(bench.system, 1.6));
    EXPECT_TRUE(at16.mean_square_stable);
}

TEST(Random, TargetsAndDeterminism) {
    auto a = random_stable_system(6, 2, 1, 5);
    auto b = random_stable_system(6, 2, 1, 5);
    EXPECT_EQ(a.A(), b.A());
    EXPECT_EQ(a.N(1), b.N(1));
    EXPECT_TRUE(kron_stability(a).mean_square_stable);
    auto s = random_stable_system(1, 1, 1, 3, StabilityTarget::Hurwitz);
    EXPECT_LT(s.A()(0, 0), 0.0);
}
