// bilimor command-line tool: generate benchmark systems, reduce them, evaluate
// output bounds against simulation, and run the validation suites.
//
// Every subcommand reads and writes under --out. Exit codes: 0 success,
// 2 configuration error, 3 numerical or stability error, 4 validation failure.

#include "bilimor.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bilimor;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitValidation = 4;

struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run configuration and artifacts
// ---------------------------------------------------------------------------

struct Run {
    fs::path out;
    json config; ///< every option of the subcommand, keys sorted
    std::string hash;

    void finalize(const std::string& command) {
        config["command"] = command;
        hash = hex64(fnv1a64(config.dump()));
        fs::create_directories(out);
    }

    [[nodiscard]] std::string path(const std::string& name) const { return (out / name).string(); }

    [[nodiscard]] fs::path resolve(const std::string& p) const {
        fs::path q(p);
        return q.is_absolute() ? q : out / q;
    }

    void write_json(const std::string& name, json body) const {
        body["config"] = config;
        body["config_hash"] = hash;
        body["version"] = kVersion;
        std::ofstream f(path(name));
        require(static_cast<bool>(f), ErrorKind::Io, "cannot write " + path(name));
        f << body.dump(2) << '\n';
    }
};

/// JSON numbers cannot hold inf/nan; those become strings.
json num(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

void write_bundle(const Run& run, const std::string& name, const BilinearSystem& sys) {
    const std::string comment = " bilimor " + std::string(kVersion) + " config " + run.hash;
    json manifest;
    manifest["n"] = sys.n();
    manifest["m"] = sys.m();
    manifest["p"] = sys.p();
    auto put = [&](const std::string& key, const Mat& X) {
        const std::string file = name + "_" + key + ".mtx";
        write_matrix_market(run.path(file), X, MmFormat::Auto, comment);
        return file;
    };
    manifest["A"] = put("A", sys.A());
    manifest["B"] = put("B", sys.B());
    manifest["C"] = put("C", sys.C());
    json ns = json::array();
    for (int k = 0; k < sys.m(); ++k)
        ns.push_back(sys.N(k).norm() == 0.0 ? json("zero") : json(put("N" + std::to_string(k + 1), sys.N(k))));
    manifest["N"] = ns;
    run.write_json(name + ".json", manifest);
}

BilinearSystem read_bundle(const fs::path& manifest_path) {
    std::ifstream f(manifest_path);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot open bundle " + manifest_path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, manifest_path.string() + ": " + e.what());
    }
    const fs::path dir = manifest_path.parent_path();
    try {
        const int n = j.at("n"), m = j.at("m"), p = j.at("p");
        auto load = [&](const json& entry) { return read_matrix_market((dir / entry.get<std::string>()).string()); };
        Mat A = load(j.at("A")), B = load(j.at("B")), C = load(j.at("C"));
        std::vector<Mat> N;
        for (const auto& e : j.at("N")) N.push_back(e == "zero" ? Mat::Zero(n, n) : load(e));
        require(A.rows() == n && B.cols() == m && C.rows() == p && static_cast<int>(N.size()) == m,
                ErrorKind::Dimension, manifest_path.string() + ": sizes disagree with the manifest");
        BilinearSystem sys(std::move(A), std::move(B), std::move(C), std::move(N));
        require_valid(sys);
        return sys;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, manifest_path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

struct ControlOpts {
    std::string name = "paper"; ///< paper | zero | path to a CSV of samples
    double alpha = 1.0;

    void add(CLI::App* app) {
        app->add_option("--control", name, "paper, zero, or a CSV file of samples t,u_1..u_m");
        app->add_option("--alpha", alpha, "L2 norm of the built-in control")->check(CLI::NonNegativeNumber);
    }

    void record(json& c) const {
        c["control"] = name;
        c["alpha"] = alpha;
    }

    [[nodiscard]] ControlSignal make(const Run& run, int m, double alpha_value) const {
        if (name == "zero") return ControlSignal::zero(m);
        if (name == "paper") {
            require(m == 2, ErrorKind::InvalidParameter, "the built-in control has two channels, the system has " +
                                                             std::to_string(m));
            return paper_control(alpha_value);
        }
        ControlSignal u = read_control_csv(run.resolve(name).string());
        require(u.m() == m, ErrorKind::Dimension, "control file has " + std::to_string(u.m()) + " channels");
        return u;
    }

    [[nodiscard]] ControlSignal make(const Run& run, int m) const { return make(run, m, alpha); }
};

std::optional<double> parse_gamma(const std::string& g) {
    if (g == "auto") return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(g, &used);
        require(used == g.size() && v > 0.0 && std::isfinite(v), ErrorKind::InvalidParameter, "bad gamma " + g);
        return v;
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::InvalidParameter, "gamma must be 'auto' or a positive number, got " + g);
    }
}

struct Sweep {
    std::string kind; ///< alpha | gamma
    double lo = 0.0, hi = 0.0;
    int steps = 0;

    [[nodiscard]] double at(int i) const { return steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1); }
};

Sweep parse_sweep(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    require(parts.size() == 4 && (parts[0] == "alpha" || parts[0] == "gamma"), ErrorKind::InvalidParameter,
            "sweep must look like alpha:A0:A1:STEPS or gamma:G0:G1:STEPS");
    Sweep s;
    s.kind = parts[0];
    try {
        s.lo = std::stod(parts[1]);
        s.hi = std::stod(parts[2]);
        s.steps = std::stoi(parts[3]);
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::InvalidParameter, "sweep bounds must be numeric: " + text);
    }
    require(s.steps >= 1 && s.lo <= s.hi, ErrorKind::InvalidParameter, "sweep needs STEPS >= 1 and lo <= hi");
    require(s.kind == "alpha" ? s.lo >= 0.0 : s.lo > 0.0, ErrorKind::InvalidParameter, "sweep range out of domain");
    return s;
}

json report_json(const BoundReport& r) {
    json j;
    j["h2_quantity"] = num(r.h2_quantity);
    j["control_factor"] = num(r.control_factor);
    j["bound"] = num(r.bound);
    j["gamma"] = num(r.gamma);
    j["l2_u"] = num(r.l2_u);
    j["l2_u0"] = num(r.l2_u0);
    j["simulated_sup"] = r.simulated_sup ? num(*r.simulated_sup) : json(nullptr);
    j["ratio"] = r.ratio ? num(*r.ratio) : json(nullptr);
    return j;
}

json stability_json(const StabilityReport& s) {
    json j;
    j["hurwitz"] = s.hurwitz;
    j["spectral_abscissa_A"] = num(s.spectral_abscissa_A);
    j["kron_abscissa"] = num(s.kron_abscissa);
    j["mean_square_stable"] = s.mean_square_stable;
    j["lyapunov_radius"] = s.lyapunov_radius ? num(*s.lyapunov_radius) : json(nullptr);
    j["sufficient_margin"] = s.sufficient_margin ? num(*s.sufficient_margin) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct GenOpts {
    std::string kind;
    int nn = 10;
    int n = 8, m = 2, p = 1;
    std::uint64_t seed = 0;
};

void cmd_gen(Run& run, const GenOpts& o) {
    run.config["kind"] = o.kind;
    if (o.kind == "heat") run.config["nn"] = o.nn;
    if (o.kind == "random") {
        run.config["n"] = o.n;
        run.config["m"] = o.m;
        run.config["p"] = o.p;
        run.config["seed"] = o.seed;
    }
    run.finalize("gen");
    BilinearSystem sys = o.kind == "toy"    ? toy_system()
                         : o.kind == "heat" ? heat2d(o.nn).system
                                            : random_stable_system(o.n, o.m, o.p, o.seed);
    write_bundle(run, "system", sys);
    std::cout << "wrote " << run.path("system.json") << " (n=" << sys.n() << ", m=" << sys.m() << ", p=" << sys.p()
              << ")\n";
}

struct ReduceOpts {
    std::string method = "bt";
    int order = 1;
    std::string gamma = "1";
    std::string system = "system.json";
    double tol = 1e-8;
    int max_iterations = 100;
};

void cmd_reduce(Run& run, const ReduceOpts& o) {
    run.config["method"] = o.method;
    run.config["order"] = o.order;
    run.config["gamma"] = o.gamma;
    run.config["system"] = o.system;
    if (o.method == "irka") {
        run.config["tol"] = o.tol;
        run.config["max_iterations"] = o.max_iterations;
    }
    run.finalize("reduce");
    const ReductionMethod method = parse_method(o.method);
    const BilinearSystem full = read_bundle(run.resolve(o.system));
    const auto g_opt = parse_gamma(o.gamma);
    const double gamma = g_opt ? *g_opt : auto_gamma(full);
    const BilinearSystem scaled = rescale(full, gamma);
    require(kron_stability(scaled).mean_square_stable, ErrorKind::Stability,
            "the system rescaled by gamma = " + format_double(gamma) +
                " is not mean-square stable; raise --gamma or use auto");

    ReductionResult res;
    if (method == ReductionMethod::BT) res = balanced_truncation(scaled, o.order);
    else if (method == ReductionMethod::SPA) res = singular_perturbation(scaled, o.order);
    else {
        IrkaOptions io;
        io.tol = o.tol;
        io.max_iterations = o.max_iterations;
        res = bilinear_irka(scaled, o.order, io);
    }
    // Back to the original input scaling: B -> gamma B, N -> gamma N.
    const BilinearSystem rom = rescale(res.rom, 1.0 / gamma);
    write_bundle(run, "rom", rom);

    json meta;
    meta["method"] = to_string(method);
    meta["order"] = o.order;
    meta["gamma"] = gamma;
    meta["hsv_kept"] = vec_json(res.hsv_kept);
    meta["hsv_dropped"] = vec_json(res.hsv_dropped);
    meta["iterations"] = res.iterations;
    meta["converged"] = res.converged;
    meta["warnings"] = res.warnings;
    meta["a22_condition"] = res.a22_condition ? num(*res.a22_condition) : json(nullptr);
    meta["rom_stability_scaled"] = res.rom_stability ? stability_json(*res.rom_stability) : json(nullptr);
    meta["h2_error_scaled"] = num(h2_error(scaled, res.rom));
    meta["h2_norm_scaled"] = num(h2_norm(scaled));
    run.write_json("reduction.json", meta);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "reduced n=" << full.n() << " -> r=" << rom.n() << " with " << to_string(method)
              << " at gamma=" << gamma << '\n';
}

struct BoundOpts {
    ControlOpts control;
    std::string gamma = "auto";
    std::string sweep;
    std::string system = "system.json";
    std::string rom = "rom.json";
    bool output_only = false;
    bool no_simulate = false;
};

void cmd_bound(Run& run, const BoundOpts& o) {
    o.control.record(run.config);
    run.config["gamma"] = o.gamma;
    run.config["sweep"] = o.sweep;
    run.config["system"] = o.system;
    run.config["rom"] = o.rom;
    run.config["output_only"] = o.output_only;
    run.config["simulate"] = !o.no_simulate;
    run.finalize("bound");

    const BilinearSystem full = read_bundle(run.resolve(o.system));
    std::optional<BilinearSystem> rom;
    if (!o.output_only && fs::exists(run.resolve(o.rom))) rom = read_bundle(run.resolve(o.rom));
    const auto gamma = parse_gamma(o.gamma);

    auto bound_at = [&](const ControlSignal& u, std::optional<double> g) {
        return rom ? output_error_bound(full, *rom, u, g) : output_bound(full, u, g);
    };
    auto sup_of = [&](const ControlSignal& u) {
        return rom ? simulated_sup_error(full, *rom, u) : simulated_sup_output(full, u);
    };

    const ControlSignal u = o.control.make(run, full.m());
    BoundReport base = bound_at(u, gamma);
    if (!o.no_simulate) attach_simulation(base, sup_of(u));
    json body;
    body["kind"] = rom ? "output_error" : "output";
    body["report"] = report_json(base);
    body["n"] = full.n();
    if (rom) body["r"] = rom->n();

    if (!o.sweep.empty()) {
        const Sweep sw = parse_sweep(o.sweep);
        require(sw.kind == "gamma" || o.control.name == "paper", ErrorKind::InvalidParameter,
                "an alpha sweep needs the built-in control");
        std::vector<std::array<double, 4>> rows(static_cast<std::size_t>(sw.steps));
        std::vector<std::string> notes(rows.size());
        const double fixed_sup = (sw.kind == "gamma" && !o.no_simulate) ? *base.simulated_sup : 0.0;
        parallel_for(rows.size(), thread_budget(), [&](std::size_t i) {
            const double x = sw.at(static_cast<int>(i));
            const ControlSignal ui = sw.kind == "alpha" ? o.control.make(run, full.m(), x) : u;
            const std::optional<double> gi = sw.kind == "gamma" ? std::optional<double>(x) : gamma;
            double sup = std::numeric_limits<double>::quiet_NaN();
            if (!o.no_simulate) sup = sw.kind == "gamma" ? fixed_sup : sup_of(ui);
            double b = std::numeric_limits<double>::quiet_NaN();
            try {
                b = bound_at(ui, gi).bound;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Stability) throw;
                notes[i] = e.what();
            }
            rows[i] = {x, sup, b, sup > 0.0 ? b / sup : std::numeric_limits<double>::quiet_NaN()};
        });
        const std::string csv = "sweep_" + sw.kind + ".csv";
        CsvWriter w(run.path(csv), {sw.kind, "sup_output", "bound", "ratio"}, run.hash);
        json infeasible = json::array();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            w.row({rows[i].begin(), rows[i].end()});
            if (!notes[i].empty()) infeasible.push_back({{sw.kind, rows[i][0]}, {"reason", notes[i]}});
        }
        body["sweep"] = {{"file", csv}, {"kind", sw.kind}, {"steps", sw.steps}, {"infeasible", infeasible}};
    }
    run.write_json("bound.json", body);
    std::cout << (rom ? "error bound " : "output bound ") << format_double(base.bound);
    if (base.simulated_sup) std::cout << ", simulated sup " << format_double(*base.simulated_sup);
    std::cout << '\n';
}

struct SimulateOpts {
    ControlOpts control;
    std::string system = "system.json";
    double T = 0.0; ///< 0: horizon plus five decay times
    double h = 1e-3;
    bool states = false;
};

void cmd_simulate(Run& run, const SimulateOpts& o) {
    o.control.record(run.config);
    run.config["system"] = o.system;
    run.config["T"] = o.T;
    run.config["h"] = o.h;
    run.config["states"] = o.states;
    run.finalize("simulate");
    const BilinearSystem sys = read_bundle(run.resolve(o.system));
    const ControlSignal u = o.control.make(run, sys.m());
    const double T = o.T > 0.0 ? o.T : simulation_window(sys, u);
    const auto grid = make_grid(T, o.h);
    const Trajectory tr = integrate_bilinear(sys, u, Vec::Zero(sys.n()), grid);
    std::vector<std::string> cols{"t"};
    if (o.states)
        for (int i = 1; i <= sys.n(); ++i) cols.push_back("x_" + std::to_string(i));
    for (int i = 1; i <= sys.p(); ++i) cols.push_back("y_" + std::to_string(i));
    CsvWriter w(run.path("trajectory.csv"), cols, run.hash);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<double> row{grid[k]};
        const Index c = static_cast<Index>(k);
        if (o.states)
            for (Index i = 0; i < sys.n(); ++i) row.push_back(tr.states(i, c));
        for (Index i = 0; i < sys.p(); ++i) row.push_back(tr.outputs(i, c));
        w.row(row);
    }
    std::cout << "wrote " << grid.size() << " samples to " << run.path("trajectory.csv") << '\n';
}

// Validation suites on seeded random systems.

struct SuiteResult {
    int cases = 0;
    std::vector<std::string> failures;
    double worst = 0.0;
};

SuiteResult suite_gronwall(std::uint64_t seed) {
    SuiteResult r;
    r.worst = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.5, 1.5);
    for (int c = 0; c < 20; ++c) {
        const int n = 2 + c % 5, m = 1 + c % 3;
        const BilinearSystem sys = random_stable_system(n, m, 1, seed * 1000 + static_cast<std::uint64_t>(c));
        std::vector<double> times{0.0, 0.3, 0.55, 1.0};
        Mat vals(m, 3);
        for (Index j = 0; j < 3; ++j)
            for (Index i = 0; i < m; ++i) vals(i, j) = unif(rng);
        const ControlSignal u = ControlSignal::piecewise_constant(times, vals);
        Vec x0(n);
        for (Index i = 0; i < n; ++i) x0(i) = unif(rng);
        const auto grid = make_grid(1.2, 0.01, u.breakpoints());
        const GronwallResult g = gronwall_check(sys, u, x0, 0.0, grid);
        ++r.cases;
        r.worst = std::min(r.worst, g.worst_relative);
        if (!g.holds) r.failures.push_back("gronwall case " + std::to_string(c));
    }
    return r;
}

SuiteResult suite_traces(std::uint64_t seed) {
    SuiteResult r;
    for (int c = 0; c < 20; ++c) {
        const int n = 3 + c % 5;
        const BilinearSystem sys = random_stable_system(n, 1 + c % 2, 1 + c % 2, seed * 1000 + 100 + static_cast<std::uint64_t>(c));
        const int order = 1 + c % (n - 1);
        const auto g = gramian_set(sys);
        const auto t = balance(sys, g.P, g.Q);
        const BilinearSystem bal = balanced_realization(sys, t);
        const BilinearSystem rom = balanced_truncation(sys, order, g).rom;
        const double three = std::pow(h2_error(sys, rom), 2);
        const double direct = std::pow(h2_norm(build_error_system(sys, rom).system), 2);
        const double gap = std::abs(three - direct) / std::max(direct, 1e-300);
        const WeightedBound wb = bt_weighted_bound(bal, t.hsv, order, ControlSignal::zero(sys.m()));
        r.worst = std::max({r.worst, gap, wb.identity_gap});
        ++r.cases;
        if (gap > 1e-8) r.failures.push_back("three-trace identity case " + std::to_string(c));
        if (wb.identity_gap > 1e-8) r.failures.push_back("weighted trace identity case " + std::to_string(c));
    }
    return r;
}

SuiteResult suite_stability(std::uint64_t seed) {
    SuiteResult r;
    for (int c = 0; c < 20; ++c) {
        const int n = 3 + c % 6;
        const BilinearSystem sys = random_stable_system(n, 1 + c % 3, 1, seed * 1000 + 200 + static_cast<std::uint64_t>(c));
        ++r.cases;
        const auto res = balanced_truncation(sys, 1 + c % (n - 1));
        if (!res.rom_stability->mean_square_stable) r.failures.push_back("BT lost stability, case " + std::to_string(c));
        // Inflate N until unstable: gamma rescaling must restore stability.
        std::vector<Mat> big;
        for (int k = 0; k < sys.m(); ++k) big.push_back(4.0 * sys.N(k));
        const BilinearSystem loud(sys.A(), sys.B(), sys.C(), big);
        const double g = auto_gamma(loud);
        if (!kron_stability(rescale(loud, g)).mean_square_stable)
            r.failures.push_back("auto gamma not stabilizing, case " + std::to_string(c));
        const auto rep = kron_stability(sys);
        if (rep.sufficient_margin && *rep.sufficient_margin < 1.0 && !rep.mean_square_stable)
            r.failures.push_back("sufficient condition contradicted, case " + std::to_string(c));
    }
    return r;
}

struct ValidateOpts {
    std::string suite = "all";
    std::uint64_t seed = 0;
};

void cmd_validate(Run& run, const ValidateOpts& o) {
    run.config["suite"] = o.suite;
    run.config["seed"] = o.seed;
    run.finalize("validate");
    std::vector<std::pair<std::string, SuiteResult (*)(std::uint64_t)>> suites{
        {"gronwall", suite_gronwall}, {"traces", suite_traces}, {"stability", suite_stability}};
    require(o.suite == "all" || std::any_of(suites.begin(), suites.end(), [&](auto& s) { return s.first == o.suite; }),
            ErrorKind::InvalidParameter, "unknown suite " + o.suite);
    json body;
    bool ok = true;
    for (const auto& [name, fn] : suites) {
        if (o.suite != "all" && o.suite != name) continue;
        const SuiteResult r = fn(o.seed);
        body[name] = {{"cases", r.cases}, {"failures", r.failures}, {"worst", num(r.worst)}};
        std::cout << name << ": " << (r.failures.empty() ? "PASS" : "FAIL") << " (" << r.cases << " cases)\n";
        for (const auto& f : r.failures) std::cout << "  " << f << '\n';
        ok = ok && r.failures.empty();
    }
    body["pass"] = ok;
    run.write_json("validate.json", body);
    if (!ok) throw ValidationFailure("validation failed");
}

struct McOpts {
    std::size_t paths = 10000;
    std::uint64_t seed = 0;
    std::string system = "system.json";
    double T = 1.0;
    double h = 1e-3;
    double x0 = 1.0;
};

void cmd_mc(Run& run, const McOpts& o) {
    run.config["paths"] = o.paths;
    run.config["seed"] = o.seed;
    run.config["system"] = o.system;
    run.config["T"] = o.T;
    run.config["h"] = o.h;
    run.config["x0"] = o.x0;
    run.finalize("mc");
    const BilinearSystem sys = read_bundle(run.resolve(o.system));
    const Vec x0 = Vec::Constant(sys.n(), o.x0);
    const auto grid = make_grid(o.T, o.h);
    const MomentCheck mc = moment_check(sys, x0, grid, o.paths, o.seed);
    CsvWriter w(run.path("mc_summary.csv"), {"t", "trace", "fro_norm", "deviation_vs_ode"}, run.hash);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Mat& M = mc.mc.M[i];
        w.row({grid[i], M.trace(), M.norm(), (M - mc.exact.values[i]).norm()});
    }
    json body;
    body["seed"] = o.seed;
    body["paths"] = o.paths;
    body["excluded"] = mc.mc.excluded;
    body["instability_warning"] = mc.mc.instability_warning;
    body["deviation"] = num(mc.deviation);
    body["tolerance"] = num(mc.tolerance);
    body["statistical"] = num(mc.statistical);
    body["bias"] = num(mc.bias);
    body["pass"] = mc.pass;
    run.write_json("mc.json", body);
    std::cout << "relative deviation " << format_double(mc.deviation) << " vs tolerance "
              << format_double(mc.tolerance) << (mc.pass ? " PASS" : " FAIL") << '\n';
    if (!mc.pass) throw ValidationFailure("Monte Carlo moment check failed");
}

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidParameter:
    case ErrorKind::Dimension:
    case ErrorKind::Io: return kExitConfig;
    default: return kExitNumerical;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model order reduction and output bounds for bilinear systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));
    Run run;
    std::string out = ".";
    auto add_out = [&](CLI::App* sub) { sub->add_option("--out", out, "output directory")->capture_default_str(); };

    GenOpts gen;
    auto* g = app.add_subcommand("gen", "write a benchmark system bundle");
    g->add_option("kind", gen.kind, "toy | heat | random")->required()->check(CLI::IsMember({"toy", "heat", "random"}));
    g->add_option("--nn", gen.nn, "heat: interior points per axis")->check(CLI::Range(2, 1000));
    g->add_option("--n", gen.n, "random: state dimension")->check(CLI::Range(1, 1500));
    g->add_option("--m", gen.m, "random: inputs")->check(CLI::Range(1, 100));
    g->add_option("--p", gen.p, "random: outputs")->check(CLI::Range(1, 100));
    g->add_option("--seed", gen.seed, "random: seed");
    add_out(g);

    ReduceOpts red;
    auto* r = app.add_subcommand("reduce", "reduce the system bundle");
    r->add_option("--method", red.method, "bt | spa | irka")->check(CLI::IsMember({"bt", "spa", "irka"}));
    r->add_option("--order", red.order, "reduced order")->required()->check(CLI::PositiveNumber);
    r->add_option("--gamma", red.gamma, "input scaling: auto or a positive number");
    r->add_option("--system", red.system, "bundle manifest, relative to --out");
    r->add_option("--tol", red.tol, "irka: relative eigenvalue change")->check(CLI::PositiveNumber);
    r->add_option("--max-iterations", red.max_iterations, "irka: iteration cap")->check(CLI::PositiveNumber);
    add_out(r);

    BoundOpts bo;
    auto* b = app.add_subcommand("bound", "evaluate the output or output-error bound");
    bo.control.add(b);
    b->add_option("--gamma", bo.gamma, "auto or a positive number");
    b->add_option("--sweep", bo.sweep, "alpha:A0:A1:STEPS or gamma:G0:G1:STEPS");
    b->add_option("--system", bo.system, "bundle manifest, relative to --out");
    b->add_option("--rom", bo.rom, "reduced bundle; used when it exists");
    b->add_flag("--output-only", bo.output_only, "ignore any reduced model");
    b->add_flag("--no-simulate", bo.no_simulate, "skip the simulated sup-norm");
    add_out(b);

    SimulateOpts so;
    auto* s = app.add_subcommand("simulate", "simulate the system from rest");
    so.control.add(s);
    s->add_option("--system", so.system, "bundle manifest, relative to --out");
    s->add_option("--T", so.T, "final time (default: horizon plus five decay times)")->check(CLI::NonNegativeNumber);
    s->add_option("--dt", so.h, "output spacing")->check(CLI::PositiveNumber);
    s->add_flag("--states", so.states, "include state columns");
    add_out(s);

    ValidateOpts vo;
    auto* v = app.add_subcommand("validate", "run the property suites");
    v->add_option("--suite", vo.suite, "all | gronwall | traces | stability");
    v->add_option("--seed", vo.seed, "seed");
    add_out(v);

    McOpts mo;
    auto* mc = app.add_subcommand("mc", "Monte Carlo second-moment check");
    mc->add_option("--paths", mo.paths, "sample paths")->check(CLI::PositiveNumber);
    mc->add_option("--seed", mo.seed, "seed");
    mc->add_option("--system", mo.system, "bundle manifest, relative to --out");
    mc->add_option("--T", mo.T, "final time")->check(CLI::PositiveNumber);
    mc->add_option("--dt", mo.h, "Euler-Maruyama step")->check(CLI::PositiveNumber);
    mc->add_option("--x0", mo.x0, "initial state, every entry");
    add_out(mc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        run.out = out;
        if (*g) cmd_gen(run, gen);
        else if (*r) cmd_reduce(run, red);
        else if (*b) cmd_bound(run, bo);
        else if (*s) cmd_simulate(run, so);
        else if (*v) cmd_validate(run, vo);
        else if (*mc) cmd_mc(run, mo);
    } catch (const ValidationFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return 0;
}
