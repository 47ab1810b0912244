#pragma once

// Bilinear control systems
//
//     x' = A x + B u + sum_k N_k x u_k,   y = C x,
//
// the inputs that drive them, the mask of control channels that enter
// bilinearly, and the augmented error system of a (full, reduced) pair.

#include "bilimor/core.hpp"

#include <memory>
#include <sstream>
#include <utility>

namespace bilimor {

class BilinearSystem {
  public:
    BilinearSystem() = default;

    /// Dimensions are taken from the matrices: n = rows(A), m = cols(B), p = rows(C).
    BilinearSystem(Mat A, Mat B, Mat C, std::vector<Mat> N)
        : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), N_(std::move(N)),
          n_(static_cast<int>(A_.rows())), m_(static_cast<int>(B_.cols())), p_(static_cast<int>(C_.rows())) {}

    /// Explicitly declared dimensions, as read from a bundle manifest. No
    /// checks happen here; see validate().
    BilinearSystem(Mat A, Mat B, Mat C, std::vector<Mat> N, int n, int m, int p)
        : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), N_(std::move(N)), n_(n), m_(m), p_(p) {}

    [[nodiscard]] const Mat& A() const { return A_; }
    [[nodiscard]] const Mat& B() const { return B_; }
    [[nodiscard]] const Mat& C() const { return C_; }
    [[nodiscard]] const Mat& N(int k) const { return N_.at(static_cast<std::size_t>(k)); }
    [[nodiscard]] const std::vector<Mat>& Ns() const { return N_; }

    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] int p() const { return p_; }

    [[nodiscard]] bool has_bilinear_terms() const {
        return std::any_of(N_.begin(), N_.end(), [](const Mat& Nk) { return Nk.norm() > 0.0; });
    }

  private:
    Mat A_, B_, C_;
    std::vector<Mat> N_;
    int n_ = 0, m_ = 0, p_ = 0;
};

/// Input signal u : [0, inf) -> R^m with finite support [0, horizon].
///
/// Evaluation past the horizon returns exactly zero. `breakpoints` lists the
/// times where u may jump; integrators put grid points there and never step
/// across them.
class ControlSignal {
  public:
    using Function = std::function<Vec(double)>;

    ControlSignal(int m, double horizon, Function f, std::vector<double> breakpoints = {}, double resolution = 1e-3)
        : m_(m), horizon_(horizon), f_(std::make_shared<Function>(std::move(f))),
          breakpoints_(std::move(breakpoints)), resolution_(resolution) {
        require(m >= 0, ErrorKind::InvalidParameter, "control dimension must be nonnegative");
        require(horizon >= 0.0 && std::isfinite(horizon), ErrorKind::InvalidParameter,
                "control horizon must be finite and nonnegative");
        breakpoints_.push_back(horizon_);
        std::sort(breakpoints_.begin(), breakpoints_.end());
        breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()), breakpoints_.end());
    }

    static ControlSignal zero(int m) {
        return ControlSignal(m, 0.0, [m](double) { return Vec::Zero(m); });
    }

    static ControlSignal constant(const Vec& value, double horizon) {
        return ControlSignal(static_cast<int>(value.size()), horizon, [value](double) { return value; });
    }

    /// Piecewise-constant control: values.col(i) on [times[i], times[i+1]).
    /// The last interval ends at the horizon times.back().
    static ControlSignal piecewise_constant(std::vector<double> times, Mat values) {
        require(times.size() >= 2 && static_cast<Index>(times.size()) == values.cols() + 1,
                ErrorKind::Dimension, "piecewise-constant control needs one more time than values");
        require(std::is_sorted(times.begin(), times.end()) && times.front() == 0.0, ErrorKind::InvalidParameter,
                "piecewise-constant times must start at 0 and increase");
        const double horizon = times.back();
        std::vector<double> jumps(times.begin() + 1, times.end() - 1);
        auto t_shared = std::make_shared<std::vector<double>>(std::move(times));
        auto v_shared = std::make_shared<Mat>(std::move(values));
        return ControlSignal(static_cast<int>(v_shared->rows()), horizon,
                             [t_shared, v_shared](double t) {
                                 const auto& ts = *t_shared;
                                 auto it = std::upper_bound(ts.begin(), ts.end(), t);
                                 Index i = std::clamp<Index>(static_cast<Index>(it - ts.begin()) - 1, 0,
                                                             v_shared->cols() - 1);
                                 return Vec(v_shared->col(i));
                             },
                             std::move(jumps));
    }

    /// Linear interpolation through (times[i], values.col(i)); horizon = times.back().
    static ControlSignal from_samples(std::vector<double> times, Mat values) {
        require(!times.empty() && static_cast<Index>(times.size()) == values.cols(), ErrorKind::Dimension,
                "sampled control needs one sample column per time");
        require(std::is_sorted(times.begin(), times.end()) && times.front() >= 0.0, ErrorKind::InvalidParameter,
                "sample times must be nonnegative and increasing");
        const double horizon = times.back();
        auto t_shared = std::make_shared<std::vector<double>>(std::move(times));
        auto v_shared = std::make_shared<Mat>(std::move(values));
        return ControlSignal(static_cast<int>(v_shared->rows()), horizon, [t_shared, v_shared](double t) {
            const auto& ts = *t_shared;
            if (ts.size() == 1 || t <= ts.front()) return Vec(v_shared->col(0));
            auto it = std::upper_bound(ts.begin(), ts.end(), t);
            if (it == ts.end()) return Vec(v_shared->col(v_shared->cols() - 1));
            const Index hi = static_cast<Index>(it - ts.begin());
            const double w = (t - ts[hi - 1]) / (ts[hi] - ts[hi - 1]);
            return Vec((1.0 - w) * v_shared->col(hi - 1) + w * v_shared->col(hi));
        });
    }

    [[nodiscard]] Vec operator()(double t) const {
        if (t > horizon_ || t < 0.0) return Vec::Zero(m_);
        return (*f_)(t);
    }

    /// Value used inside an integration interval starting at `interval_start`:
    /// intervals that begin at or after the horizon see u = 0 (right limit).
    [[nodiscard]] Vec on_interval(double t, double interval_start) const {
        if (interval_start >= horizon_) return Vec::Zero(m_);
        // Evaluate jumps from the left: the interval ends at the next breakpoint.
        auto next = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), interval_start);
        if (next != breakpoints_.end() && t >= *next) t = std::nextafter(*next, interval_start);
        return (*f_)(t);
    }

    [[nodiscard]] ControlSignal scaled(double factor) const {
        auto f = f_;
        ControlSignal out(m_, horizon_, [f, factor](double t) { return Vec(factor * (*f)(t)); }, breakpoints_,
                          resolution_);
        return out;
    }

    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] double horizon() const { return horizon_; }
    [[nodiscard]] const std::vector<double>& breakpoints() const { return breakpoints_; }
    [[nodiscard]] double resolution() const { return resolution_; }

  private:
    int m_;
    double horizon_;
    std::shared_ptr<const Function> f_;
    std::vector<double> breakpoints_;
    double resolution_;
};

/// Channels whose N_k is not identically zero.
struct U0Mask {
    std::vector<bool> active;

    [[nodiscard]] Vec apply(const Vec& u) const {
        Vec out = u;
        for (Index k = 0; k < out.size(); ++k)
            if (!active.at(static_cast<std::size_t>(k))) out(k) = 0.0;
        return out;
    }

    [[nodiscard]] bool any() const { return std::find(active.begin(), active.end(), true) != active.end(); }
};

struct ErrorSystem {
    BilinearSystem system;
    int split = 0; ///< dimension of the full system; reduced states follow
};

// ---------------------------------------------------------------------------

inline std::vector<std::string> validate(const BilinearSystem& sys) {
    std::vector<std::string> diagnostics;
    auto shape = [](const Mat& M) {
        std::ostringstream os;
        os << M.rows() << "x" << M.cols();
        return os.str();
    };
    const int n = sys.n(), m = sys.m(), p = sys.p();
    if (n <= 0 || m <= 0 || p <= 0) diagnostics.push_back("dimensions n, m, p must be positive");
    if (sys.A().rows() != n || sys.A().cols() != n)
        diagnostics.push_back("A is " + shape(sys.A()) + ", expected n x n with n=" + std::to_string(n));
    if (sys.B().rows() != n || sys.B().cols() != m)
        diagnostics.push_back("B is " + shape(sys.B()) + ", expected n x m");
    if (sys.C().rows() != p || sys.C().cols() != n)
        diagnostics.push_back("C is " + shape(sys.C()) + ", expected p x n");
    if (static_cast<int>(sys.Ns().size()) != m)
        diagnostics.push_back("|N| = " + std::to_string(sys.Ns().size()) + " but m = " + std::to_string(m));
    for (std::size_t k = 0; k < sys.Ns().size(); ++k)
        if (sys.Ns()[k].rows() != n || sys.Ns()[k].cols() != n)
            diagnostics.push_back("N_" + std::to_string(k + 1) + " is " + shape(sys.Ns()[k]) + ", expected n x n");

    bool finite = sys.A().allFinite() && sys.B().allFinite() && sys.C().allFinite();
    for (const auto& Nk : sys.Ns()) finite = finite && Nk.allFinite();
    if (!finite) diagnostics.push_back("non-finite matrix entry");
    return diagnostics;
}

inline void require_valid(const BilinearSystem& sys) {
    const auto diagnostics = validate(sys);
    if (diagnostics.empty()) return;
    std::string msg = "invalid bilinear system:";
    for (const auto& d : diagnostics) msg += " [" + d + "]";
    throw Error(ErrorKind::Dimension, msg);
}

/// (B, N_k) -> (B/gamma, N_k/gamma). Pair with the control gamma*u.
inline BilinearSystem rescale(const BilinearSystem& sys, double gamma) {
    require(gamma > 0.0 && std::isfinite(gamma), ErrorKind::InvalidParameter, "rescaling factor must be positive");
    std::vector<Mat> N;
    N.reserve(sys.Ns().size());
    for (const auto& Nk : sys.Ns()) N.push_back(Nk / gamma);
    return BilinearSystem(sys.A(), sys.B() / gamma, sys.C(), std::move(N), sys.n(), sys.m(), sys.p());
}

inline U0Mask u0_mask(const BilinearSystem& sys) {
    U0Mask mask;
    mask.active.resize(static_cast<std::size_t>(sys.m()), false);
    for (std::size_t k = 0; k < sys.Ns().size() && k < mask.active.size(); ++k)
        mask.active[k] = sys.Ns()[k].norm() > 0.0; // exact zero test
    return mask;
}

/// Integral of ||e^{At}||_2^2 over [0, inf), truncated once the integrand drops
/// below 1e-12 of its initial value.
inline double exponential_energy(const Mat& A) {
    require(is_hurwitz(A), ErrorKind::Stability, "A must be Hurwitz");
    auto integrand = [&A](double t) {
        const double s = spectral_norm(expm(A * t));
        return s * s;
    };
    const double initial = integrand(0.0);
    double horizon = 1.0;
    while (integrand(horizon) >= 1e-12 * initial) {
        horizon *= 2.0;
        require(horizon < 1e8, ErrorKind::Stability, "matrix exponential does not decay");
    }
    // Panels on doubling intervals keep the quadrature resolving the early transient.
    double total = 0.0;
    double a = 0.0;
    for (double b = std::min(horizon, 1.0 / 64.0); a < horizon; b = std::min(horizon, 2.0 * b)) {
        total += adaptive_simpson(integrand, a, b, 1e-10, 1e-16, 4);
        a = b;
    }
    return total;
}

/// sqrt(sum_k ||N_k||_2^2 * int_0^inf ||e^{At}||_2^2 dt): any gamma above this
/// value makes rescale(sys, gamma) mean-square stable.
inline double gamma_threshold(const BilinearSystem& sys) {
    require(is_hurwitz(sys.A()), ErrorKind::Stability, "gamma threshold needs a Hurwitz A");
    double sum = 0.0;
    for (const auto& Nk : sys.Ns()) {
        const double s = spectral_norm(Nk);
        sum += s * s;
    }
    if (sum == 0.0) return 0.0;
    return std::sqrt(sum * exponential_energy(sys.A()));
}

inline ErrorSystem build_error_system(const BilinearSystem& full, const BilinearSystem& reduced) {
    require(full.m() == reduced.m() && full.p() == reduced.p(), ErrorKind::Dimension,
            "full and reduced systems must share input and output dimensions");
    const int n = full.n(), r = reduced.n(), ne = n + r;
    Mat A = Mat::Zero(ne, ne);
    A.topLeftCorner(n, n) = full.A();
    A.bottomRightCorner(r, r) = reduced.A();
    Mat B(ne, full.m());
    B << full.B(), reduced.B();
    Mat C(full.p(), ne);
    C << full.C(), -reduced.C();
    std::vector<Mat> N;
    for (int k = 0; k < full.m(); ++k) {
        Mat Nk = Mat::Zero(ne, ne);
        Nk.topLeftCorner(n, n) = full.N(k);
        Nk.bottomRightCorner(r, r) = reduced.N(k);
        N.push_back(std::move(Nk));
    }
    return ErrorSystem{BilinearSystem(std::move(A), std::move(B), std::move(C), std::move(N)), n};
}

/// State-space change of coordinates x_new = T x.
inline BilinearSystem transform(const BilinearSystem& sys, const Mat& T, const Mat& T_inv) {
    std::vector<Mat> N;
    for (const auto& Nk : sys.Ns()) N.push_back(T * Nk * T_inv);
    return BilinearSystem(T * sys.A() * T_inv, T * sys.B(), sys.C() * T_inv, std::move(N));
}

} // namespace bilimor
