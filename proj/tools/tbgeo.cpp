// tbgeo: scenario-driven front end for the tensor bundle geometry library.
//
//   tbgeo verify     run the verification registry, print one record per check
//   tbgeo curvature  print a curvature report at a seeded sample point
//   tbgeo geodesic   integrate a bundle geodesic and write the trace as CSV
//   tbgeo presets    list built-in scenarios, config keys, and the registry
//
// Reports are pure functions of the scenario text and the seed: reruns are
// byte-identical. Exit status: 0 all checks passed, 1 at least one failed,
// 2 configuration error.
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tensorbundle/verify.hpp"

using namespace tbundle;

namespace {

const char* kUsage =
    "usage: tbgeo <command> [options]\n"
    "\n"
    "commands:\n"
    "  verify     run the verification registry; no --config runs the built-in set\n"
    "  curvature  print a curvature report at a seeded sample point\n"
    "  geodesic   integrate a bundle geodesic and write the trace as CSV\n"
    "  presets    list built-in scenarios, config keys, and the check registry\n"
    "\n"
    "options:\n"
    "  --config PATH      scenario config file (key = value lines)\n"
    "  --out PATH         write the report or trace to PATH instead of stdout\n"
    "  --seed N           override the scenario seed\n"
    "  --checks LIST      comma-separated check ids or group prefixes (verify)\n"
    "  --tol ID=VALUE     override one check threshold; repeatable (verify)\n"
    "  --connection KIND  geodesic connection: lc or metric (default lc)\n"
    "  --lift             geodesic: horizontal lift of the base geodesic instead\n"
    "  --s-max X          geodesic parameter span (default 1)\n"
    "  --step H           geodesic step size (default 0.001)\n"
    "\n"
    "exit status: 0 all checks passed, 1 at least one failed, 2 config error\n";

struct Options {
    std::string config;
    std::string out;
    bool seed_set = false;
    std::uint64_t seed = 0;
    std::vector<std::string> checks;
    std::map<std::string, double> tol;
    std::string connection = "lc";
    bool lift = false;
    double s_max = 1.0;
    double step = 1e-3;
};

std::string need_value(int argc, char** argv, int& i) {
    if (i + 1 >= argc) throw ConfigError(std::string(argv[i]) + ": missing value");
    return argv[++i];
}

Options parse_options(int argc, char** argv) {
    Options opt;
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") {
            opt.config = need_value(argc, argv, i);
        } else if (a == "--out") {
            opt.out = need_value(argc, argv, i);
        } else if (a == "--seed") {
            const std::string v = need_value(argc, argv, i);
            long long s = tbundle::detail::parse_int_field("--seed", v);
            if (s < 0) throw ConfigError("--seed: must be non-negative");
            opt.seed = static_cast<std::uint64_t>(s);
            opt.seed_set = true;
        } else if (a == "--checks") {
            const std::string v = need_value(argc, argv, i);
            std::size_t pos = 0;
            while (pos <= v.size()) {
                std::size_t comma = v.find(',', pos);
                if (comma == std::string::npos) comma = v.size();
                std::string tok = tbundle::detail::trim_ws(v.substr(pos, comma - pos));
                if (!tok.empty()) opt.checks.push_back(tok);
                pos = comma + 1;
                if (pos > v.size()) break;
            }
            if (opt.checks.empty()) throw ConfigError("--checks: empty list");
        } else if (a == "--tol") {
            const std::string v = need_value(argc, argv, i);
            auto eq = v.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError("--tol: expected ID=VALUE, got '" + v + "'");
            const std::string id = v.substr(0, eq);
            const double val = tbundle::detail::parse_double_field("--tol " + id, v.substr(eq + 1));
            if (!(val > 0.0)) throw ConfigError("--tol " + id + ": threshold must be positive");
            opt.tol[id] = val;
        } else if (a == "--connection") {
            opt.connection = need_value(argc, argv, i);
            if (opt.connection != "lc" && opt.connection != "metric")
                throw ConfigError("--connection: expected lc or metric");
        } else if (a == "--lift") {
            opt.lift = true;
        } else if (a == "--s-max") {
            opt.s_max = tbundle::detail::parse_double_field("--s-max", need_value(argc, argv, i));
            if (!(opt.s_max > 0.0)) throw ConfigError("--s-max: must be positive");
        } else if (a == "--step") {
            opt.step = tbundle::detail::parse_double_field("--step", need_value(argc, argv, i));
            if (!(opt.step > 0.0)) throw ConfigError("--step: must be positive");
        } else {
            throw ConfigError("unknown option '" + a + "'");
        }
    }
    return opt;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Scenarios a command acts on: the configured one, or the built-in set.
std::vector<Scenario> load_scenarios(const Options& opt, bool all_builtin) {
    std::vector<Scenario> out;
    if (!opt.config.empty()) {
        out.push_back(parse_scenario(read_file(opt.config)));
    } else if (all_builtin) {
        for (const auto& [name, text] : builtin_scenarios()) out.push_back(parse_scenario(text));
    } else {
        out.push_back(parse_scenario(builtin_scenarios().front().second));
    }
    for (Scenario& sc : out) {
        if (opt.seed_set) sc.seed = opt.seed;
        for (const auto& [k, v] : opt.tol) sc.tol[k] = v;
    }
    return out;
}

// Stream selector: --out file or stdout.
class OutStream {
  public:
    explicit OutStream(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw ConfigError("--out: cannot open '" + path + "'");
        }
    }
    std::ostream& get() { return file_.is_open() ? file_ : std::cout; }

  private:
    std::ofstream file_;
};

std::string num(double v) { return tbundle::detail::json_num(v); }

int cmd_verify(const Options& opt) {
    const std::vector<std::string> filters = expand_check_filters(opt.checks);
    const std::vector<Scenario> scenarios = load_scenarios(opt, true);
    OutStream out(opt.out);
    int failed = 0;
    for (const Scenario& sc : scenarios) {
        const VerificationReport rep = run_verification(sc, filters);
        write_report(out.get(), rep);
        failed += rep.failed();
    }
    if (scenarios.size() > 1)
        out.get() << "{\"overall\":\"builtin\",\"scenarios\":" << scenarios.size()
                  << ",\"failed\":" << failed << ",\"pass\":" << (failed == 0 ? "true" : "false")
                  << "}\n";
    return failed == 0 ? 0 : 1;
}

void print_vector(std::ostream& os, const std::vector<double>& v) {
    os << "[";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << num(v[i]);
    os << "]";
}

int cmd_curvature(const Options& opt) {
    const Scenario sc = load_scenarios(opt, false).front();
    const VerifyEnv env = make_verify_env(sc);
    OutStream out(opt.out);
    std::ostream& os = out.get();

    Rng rng(sc.seed ^ tbundle::detail::fnv1a64("cli.curvature"));
    const FiberPoint fp = random_fiber_point(env.chart, env.type, rng, -0.8, 0.8);
    const PointContext ctx = point_context_at(env.chart, env.f, fp, 3);

    os << "scenario: " << sc.name << " (base " << sc.preset << ", n=" << env.n << ", f=" << sc.f_expr
       << ", type (" << sc.p << "," << sc.q << "), seed " << sc.seed << ")\n";
    os << "point: x = ";
    print_vector(os, fp.x);
    os << ", t = ";
    print_vector(os, fp.t);
    os << "\n";
    os << "f = " << num(ctx.rs.f) << ", base scalar = " << num(ctx.geo.scalar)
       << ", rescale term fL = " << num(ctx.rs.fL) << "\n";

    if (env.is_11) {
        const BundleCurvature rep = bundle_curvature_report_11(ctx);
        const DTensor zero(rep.blocks.shape());
        const auto magnitude = curvature_family_deviations(rep.blocks, zero, env.n);
        os << "levi-civita curvature blocks (adapted frame):\n";
        if (env.oracle_ok) {
            InducedOracle oracle(env.chart, env.f, env.type);
            const auto gap = curvature_family_deviations(rep.blocks, oracle.adapted_riemann(fp),
                                                         env.n);
            for (std::size_t k = 0; k < magnitude.size(); ++k)
                os << "  " << magnitude[k].family << "  max " << num(magnitude[k].max_dev)
                   << "  oracle gap " << num(gap[k].max_dev) << "\n";
        } else {
            for (const auto& fam : magnitude)
                os << "  " << fam.family << "  max " << num(fam.max_dev) << "\n";
        }
        os << "  ricci two-path gap = " << num(tbundle::detail::tensor_gap(rep.ricci_contracted,
                                                                           rep.ricci_direct))
           << "\n";
        const double via = scalar_from_ricci(ctx, rep.ricci_contracted);
        const double direct = bundle_scalar_direct_11(ctx);
        os << "  scalar: contracted = " << num(via) << ", direct = " << num(direct)
           << ", gap = " << num(std::abs(via - direct)) << "\n";
        if (env.kappa == env.kappa) {
            const double closed =
                constant_curvature_scalar(ctx.geo, env.kappa, ctx.rs.f, fp.t, ctx.rs.fL);
            os << "  constant-curvature closed form (kappa = " << num(env.kappa)
               << ") = " << num(closed) << ", gap = " << num(std::abs(via - closed)) << "\n";
        }
    } else {
        os << "levi-civita curvature blocks: closed form covers p=q=1 only; skipped\n";
    }

    const ScalarSplit split = metric_connection_scalar(ctx);
    const ConnectionField mconn = metric_connection_pq(ctx);
    const double mc_via =
        scalar_from_ricci(ctx, ricci_from_curvature(metric_connection_curvature(ctx)));
    os << "metric connection with prescribed torsion:\n";
    os << "  scalar split: base = " << num(split.base_part) << ", rescale = "
       << num(split.rescale_part) << ", total = " << num(split.total) << "\n";
    os << "  two-path scalar gap = " << num(std::abs(split.total - mc_via)) << "\n";
    os << "  metricity defect (fd) = " << num(metricity_defect(env.chart, env.f, ctx, mconn))
       << "\n";
    os << "  torsion gap = "
       << num(tbundle::detail::tensor_gap(connection_torsion(ctx.frame, mconn),
                                          prescribed_torsion(ctx)))
       << "\n";
    return 0;
}

int cmd_geodesic(const Options& opt) {
    const Scenario sc = load_scenarios(opt, false).front();
    const VerifyEnv env = make_verify_env(sc);
    OutStream out(opt.out);

    Rng rng(sc.seed ^ tbundle::detail::fnv1a64("cli.geodesic"));
    const BundleCurveState st = tbundle::detail::geo_start(env, rng, opt.lift ? 0.0 : 0.3);
    const ConnectionRule rule =
        opt.connection == "metric" ? metric_connection_rule() : levi_civita_rule();

    double s_max = opt.s_max;
    GeodesicTrace trace = opt.lift
                              ? tbundle::detail::lift_ladder(env, st, s_max, opt.step)
                              : tbundle::detail::geo_ladder(env, st, rule, s_max, opt.step);
    if (s_max != opt.s_max)
        std::cerr << "tbgeo: note: span shortened to " << s_max
                  << " to stay inside the chart box\n";

    double res_max = std::numeric_limits<double>::quiet_NaN();
    if (trace.samples.size() >= 5)
        res_max = geodesic_residuals(env.chart, env.f, trace, rule).max_total;
    else
        std::cerr << "tbgeo: note: fewer than 5 samples, residual column left as nan\n";

    const double e0 = trace.samples.front().energy;
    double drift = 0.0;
    for (const auto& smp : trace.samples) drift = std::max(drift, std::abs(smp.energy - e0));

    write_trace_csv(out.get(), env.chart, trace);
    std::cerr << "tbgeo: " << (opt.lift ? "horizontal lift" : "geodesic") << " connection="
              << opt.connection << " samples=" << trace.samples.size() << " span=" << s_max
              << " residual_max=" << res_max << " energy_drift=" << drift << "\n";
    return 0;
}

int cmd_presets(const Options& opt) {
    OutStream out(opt.out);
    std::ostream& os = out.get();
    os << "built-in scenarios:\n";
    for (const auto& [name, text] : builtin_scenarios()) {
        os << "--- " << name << " ---\n" << text;
    }
    os << "\nconfiguration keys:\n"
          "  name                        report label\n"
          "  base.preset                 euclidean | sphere | hyperbolic | product | custom\n"
          "  base.n                      base dimension (1..4; presets fix their own)\n"
          "  base.radius                 sphere radius\n"
          "  base.g.<i>.<j>              custom metric entry, expression in x1..xn\n"
          "  f.expr                      rescale factor expression (must stay positive)\n"
          "  bundle.p, bundle.q          fiber tensor type; n^(p+q) capped at 256\n"
          "  box.<i>.min, box.<i>.max    sampling box override per coordinate\n"
          "  tol.<check-id>              threshold override for one check\n"
          "  seed                        sampling seed (reports are deterministic per seed)\n"
          "  samples                     sample points per check (1..1000)\n";
    os << "\nchecks (id, default threshold, direction):\n";
    for (const auto& spec : check_registry()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%-28s %-8g %s", spec.id, spec.tol,
                      spec.live ? "above" : "below");
        os << "  " << buf << "\n";
    }
    os << "\ncurv.flatness and structures.parakahler switch direction with the scenario:\n"
          "expected-zero when the flatness verdict applies, expected-live otherwise.\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << kUsage;
        return 2;
    }
    const std::string cmd = argv[1];
    if (cmd == "help" || cmd == "--help" || cmd == "-h") {
        std::cout << kUsage;
        return 0;
    }
    try {
        const Options opt = parse_options(argc, argv);
        if (cmd == "verify") return cmd_verify(opt);
        if (cmd == "curvature") return cmd_curvature(opt);
        if (cmd == "geodesic") return cmd_geodesic(opt);
        if (cmd == "presets") return cmd_presets(opt);
        std::cerr << "tbgeo: unknown command '" << cmd << "'\n\n" << kUsage;
        return 2;
    } catch (const Error& e) {
        std::cerr << "tbgeo: error: " << e.what() << "\n";
        return 2;
    }
}
