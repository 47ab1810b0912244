#pragma once

// Benchmark systems: the 2x2 toy example with its input, a 2D heat equation
// with a bilinear Robin boundary, and seeded random stable systems.

#include "bilimor/bounds.hpp"

#include <random>

namespace bilimor {

inline BilinearSystem toy_system() {
    Mat A(2, 2), N1(2, 2), C(1, 2);
    A << -2, 1, 1, -2;
    N1 << 0, 1, 0.5, 0;
    C << 1, 1;
    return BilinearSystem(A, Mat::Identity(2, 2), C, {N1, Mat::Zero(2, 2)});
}

/// u(t) = alpha ubar(t) / ||ubar||, ubar(t) = (e^{-t}, sin(pi t) e^t) on [0, 1].
inline ControlSignal paper_control(double alpha) {
    require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::InvalidParameter, "alpha must be nonnegative");
    auto ubar = [](double t) {
        Vec v(2);
        v << std::exp(-t), std::sin(M_PI * t) * std::exp(t);
        return v;
    };
    const double energy = adaptive_simpson([&](double t) { return ubar(t).squaredNorm(); }, 0.0, 1.0, 1e-12, 1e-300);
    const double scale = alpha / std::sqrt(energy);
    return ControlSignal(2, 1.0, [ubar, scale](double t) { return Vec(scale * ubar(t)); });
}

struct HeatBenchSpec {
    int nn = 0;     ///< interior points per axis
    double h = 0.0; ///< mesh width 1 / (nn + 1)
    BilinearSystem system;
};

/// Heat equation on the unit square, nn x nn interior mesh, node (i, j) at
/// index i * nn + j (i along x, j along y).
///   * Left edge (x = 0): Robin condition dX/dn = u1 (X - 1). The one-sided
///     difference turns the i = 0 row of the x-stencil into (-1, 1) / h^2 and
///     adds u1 X / h (bilinear term N1) and -u1 / h (input column b1).
///   * Right edge (x = 1): Dirichlet X = u2, folded into b2 = 1 / h^2 on i = nn-1.
///   * Bottom and top edges: homogeneous Dirichlet.
/// N2 = 0 and C averages all states.
inline HeatBenchSpec heat2d(int nn) {
    require(nn >= 2, ErrorKind::InvalidParameter, "heat benchmark needs at least a 2 x 2 mesh");
    const int n = nn * nn;
    const double h = 1.0 / (nn + 1);
    auto idx = [nn](int i, int j) { return i * nn + j; };
    Mat A = Mat::Zero(n, n), N1 = Mat::Zero(n, n), B = Mat::Zero(n, 2);
    for (int i = 0; i < nn; ++i)
        for (int j = 0; j < nn; ++j) {
            const int row = idx(i, j);
            // x-direction
            A(row, row) += (i == 0 ? -1.0 : -2.0);
            if (i > 0) A(row, idx(i - 1, j)) += 1.0;
            if (i < nn - 1) A(row, idx(i + 1, j)) += 1.0;
            // y-direction
            A(row, row) += -2.0;
            if (j > 0) A(row, idx(i, j - 1)) += 1.0;
            if (j < nn - 1) A(row, idx(i, j + 1)) += 1.0;
            if (i == 0) {
                N1(row, row) = 1.0 / h;
                B(row, 0) = -1.0 / h;
            }
            if (i == nn - 1) B(row, 1) = 1.0 / (h * h);
        }
    A /= h * h;
    const Mat C = Mat::Constant(1, n, 1.0 / n);
    return HeatBenchSpec{nn, h, BilinearSystem(A, B, C, {N1, Mat::Zero(n, n)})};
}

enum class StabilityTarget { Hurwitz, MeanSquare };

/// A = R - (abscissa(R) + 0.5) I with R Gaussian / sqrt(n); N_k Gaussian / sqrt(n),
/// shrunk by 0.8 until the target holds.
inline BilinearSystem random_stable_system(int n, int m, int p, std::uint64_t seed,
                                           StabilityTarget target = StabilityTarget::MeanSquare) {
    require(n > 0 && m > 0 && p > 0, ErrorKind::InvalidParameter, "dimensions must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    auto rnd = [&](Index r, Index c) {
        Mat M(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) M(i, j) = g(rng);
        return M;
    };
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    const Mat R = s * rnd(n, n);
    const Mat A = R - (spectral_abscissa(R) + 0.5) * Mat::Identity(n, n);
    const Mat B = rnd(n, m);
    const Mat C = rnd(p, n);
    std::vector<Mat> N;
    for (int k = 0; k < m; ++k) N.push_back(s * rnd(n, n));
    if (target == StabilityTarget::MeanSquare)
        while (!kron_stability(A, N).mean_square_stable)
            for (auto& Nk : N) Nk *= 0.8;
    return BilinearSystem(A, B, C, std::move(N));
}

} // namespace bilimor
