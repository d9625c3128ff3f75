// Scenario-driven command line for the geometry-of-filtering library.
//
// Exit codes: 0 success, 1 embedded check failed, 2 validation error,
// 3 numerical error.

#include "geomfilter/acceptance.hpp"
#include "geomfilter/equivariant.hpp"
#include "geomfilter/filter.hpp"
#include "geomfilter/flows.hpp"
#include "geomfilter/systems.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace geomfilter;
using nlohmann::json;

namespace {

struct Scenario {
    std::string task;
    std::string system = "torus";
    json params = json::object();
    double dt = 1e-3;
    double T = 1.0;
    int particles = 1000;
    std::uint64_t seed = 0;
    double tolerance = 1e-6;
    std::string observe = "simulate";  // csv path or "simulate"
    std::string input;                 // task-specific input file
    std::string out_dir = ".";
    std::string suite = "all";
    int threads = default_threads();
    int n = 3;
    int k = 1;
};

const std::vector<std::string> kKnownKeys = {
    "task", "system", "params", "dt", "T", "particles", "seed", "tolerance",
    "observe", "input", "out", "suite", "threads", "n", "k"};

Scenario parse_scenario_json(const json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(kKnownKeys.begin(), kKnownKeys.end(), it.key()) == kKnownKeys.end())
            throw std::invalid_argument("unknown scenario key: " + it.key());
    }
    Scenario s;
    if (!j.contains("task")) throw std::invalid_argument("scenario needs a task");
    s.task = j.at("task").get<std::string>();
    if (j.contains("system")) s.system = j.at("system").get<std::string>();
    if (j.contains("params")) s.params = j.at("params");
    if (j.contains("dt")) s.dt = j.at("dt").get<double>();
    if (j.contains("T")) s.T = j.at("T").get<double>();
    if (j.contains("particles")) s.particles = j.at("particles").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("tolerance")) s.tolerance = j.at("tolerance").get<double>();
    if (j.contains("observe")) s.observe = j.at("observe").get<std::string>();
    if (j.contains("input")) s.input = j.at("input").get<std::string>();
    if (j.contains("out")) s.out_dir = j.at("out").get<std::string>();
    if (j.contains("suite")) s.suite = j.at("suite").get<std::string>();
    if (j.contains("threads")) s.threads = j.at("threads").get<int>();
    if (j.contains("n")) s.n = j.at("n").get<int>();
    if (j.contains("k")) s.k = j.at("k").get<int>();
    if (s.dt <= 0 || s.T <= 0 || s.particles < 1)
        throw std::invalid_argument("dt, T must be positive and particles >= 1");
    return s;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << "\n";
}

std::filesystem::path out_path(const Scenario& s, const std::string& name) {
    std::filesystem::create_directories(s.out_dir);
    return std::filesystem::path(s.out_dir) / name;
}

std::vector<Vec> default_box(const ChartSpace& c, double lo, double hi, int count) {
    return sample_box(c, Vec::Constant(c.dim, lo), Vec::Constant(c.dim, hi), count);
}

std::pair<std::vector<Vec>, std::vector<Vec>> system_sample_boxes(const ExampleSystem& sys) {
    double lo = -1.0, hi = 1.0;
    if (sys.id == "torus") {
        lo = 0.1;
        hi = 2.0 * M_PI - 0.1;
    } else if (sys.id == "bessel") {
        lo = 0.4;
        hi = 1.6;
    }
    auto total = default_box(sys.N, lo, hi, 12);
    auto base = default_box(sys.M, sys.id == "bessel" ? 0.5 : lo,
                            sys.id == "bessel" ? 2.5 : hi, 10);
    return {total, base};
}

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Mat matrix_from_json(const json& j) {
    const auto rows = j.size();
    const auto cols = j.at(0).size();
    Mat m(static_cast<long>(rows), static_cast<long>(cols));
    for (size_t i = 0; i < rows; ++i)
        for (size_t jj = 0; jj < cols; ++jj)
            m(static_cast<long>(i), static_cast<long>(jj)) = j.at(i).at(jj).get<double>();
    return m;
}

PointPath observed_path(const Scenario& s, const ExampleSystem& sys) {
    if (s.observe != "simulate") return read_path_csv(s.observe);
    // observation = base diffusion path from the system's A with a dedicated
    // noise stream
    NoiseDriver drv{s.seed, streams::kObservation, sys.M.dim, s.dt};
    Vec x0 = Vec::Zero(sys.M.dim);
    if (sys.id == "bessel") x0 = Vec::Ones(1);
    if (sys.id == "sphere_gradient") {
        x0 = Vec::Zero(sys.M.dim);
        x0[sys.M.dim - 1] = 1.0;
    }
    return integrate(sys.A, x0, s.T, drv);
}

int run_list_systems() {
    for (const std::string& id : registered_systems()) {
        const ExampleSystem sys = get_system(id, {});
        std::cout << id << " params=" << sys.params.dump() << "\n";
        for (const RefValue& r : sys.refs)
            std::cout << "    " << r.name << " = " << r.value << "  [" << r.provenance << "] "
                      << r.note << "\n";
    }
    return 0;
}

int run_decompose(const Scenario& s) {
    const ExampleSystem sys = get_system(s.system, s.params);
    const auto [total, base] = system_sample_boxes(sys);
    const Decomposition dec = decompose(sys.B, sys.A, sys.p, base, total);
    const Vec probe = total.front();
    json out{{"system", s.system},
             {"params", sys.params},
             {"probe", std::vector<double>(probe.data(), probe.data() + probe.size())},
             {"AH_a", matrix_json(dec.AH.a(probe))},
             {"BV_a", matrix_json(dec.BV.a(probe))},
             {"AH_symbol", matrix_json(symbol_at(dec.AH, probe))}};
    if (s.system == "torus") {
        out["bv_coefficient"] = 0.5 * dec.BV.a(probe)(1, 1);
        out["bv_coefficient_reference"] = sys.ref("bv_coefficient");
    }
    // embedded checks: additivity of the decomposition over the samples
    double worst = 0.0;
    for (const Vec& u : total) {
        worst = std::max(worst, (dec.AH.a(u) + dec.BV.a(u) - sys.B.a(u)).cwiseAbs().maxCoeff());
        worst = std::max(worst, (dec.AH.b(u) + dec.BV.b(u) - sys.B.b(u)).norm());
    }
    out["additivity_residual"] = worst;
    out["pass"] = worst < 1e-8;
    write_json(out, out_path(s, "decompose.json").string());
    std::cout << "decompose " << s.system << ": additivity residual " << worst << " -> "
              << (worst < 1e-8 ? "ok" : "FAIL") << "\n";
    return worst < 1e-8 ? 0 : 1;
}

int run_lift(const Scenario& s) {
    const ExampleSystem sys = get_system(s.system, s.params);
    SemiConnection conn = make_semi_connection(sys.B, sys.A, sys.p, [&sys] {
        if (sys.id == "heisenberg") return Vec::Zero(3).eval();
        if (sys.id == "torus") return Vec::Zero(2).eval();
        return Vec::Zero(sys.N.dim).eval();
    }());
    PointPath sigma;
    if (!s.input.empty()) {
        sigma = read_path_csv(s.input);
    } else {
        // demo path: the parabola (t, t^2) for 2-d bases, sin(t) for 1-d
        const int steps = static_cast<int>(std::llround(s.T / s.dt));
        for (int k = 0; k <= steps; ++k) {
            const double t = k * s.dt;
            sigma.times.push_back(t);
            if (sys.M.dim == 2)
                sigma.points.push_back((Vec(2) << t, t * t).finished());
            else
                sigma.points.push_back(Vec::Constant(1, std::sin(t)));
        }
    }
    Vec u0 = Vec::Zero(sys.N.dim);
    u0.head(sys.M.dim) = sigma.points.front();
    const PointPath lift = lift_path(conn, sigma, u0, LiftMode::Ode);
    write_path_csv(lift, out_path(s, "lift.csv").string());
    std::cout << "lift " << s.system << ": wrote " << lift.size() << " samples, endpoint ("
              << lift.points.back().transpose() << ")\n";
    return 0;
}

int run_simulate(const Scenario& s) {
    const ExampleSystem sys = get_system(s.system, s.params);
    NoiseDriver drv{s.seed, 0, sys.B_horm ? sys.B_horm->noise_dim() : sys.N.dim, s.dt};
    Vec x0 = Vec::Zero(sys.N.dim);
    if (sys.id == "bessel") x0 = Vec::Ones(sys.N.dim);
    if (sys.id == "sphere_gradient") x0[sys.N.dim - 1] = 1.0;
    PointPath path;
    std::string scheme;
    if (sys.B_horm) {
        path = integrate(*sys.B_horm, x0, s.T, drv, Scheme::StratonovichHeun);
        scheme = "stratonovich_heun";
    } else {
        path = integrate(sys.B, x0, s.T, drv);
        scheme = "ito_euler";
    }
    write_path_csv(path, out_path(s, "path.csv").string());
    write_json(json{{"seed", s.seed}, {"dt", s.dt}, {"scheme", scheme}, {"T", s.T}},
               out_path(s, "path.json").string());
    std::cout << "simulate " << s.system << ": " << path.size() << " samples -> "
              << out_path(s, "path.csv").string() << "\n";
    return 0;
}

int run_filter(const Scenario& s) {
    if (s.system != "linear_filter_1d")
        throw std::invalid_argument("filter task currently supports linear_filter_1d");
    const ExampleSystem sys = get_system(s.system, s.params);
    const ClassicalSystem& cs = *sys.classical;
    PointPath obs;
    if (s.observe == "simulate") {
        obs = acceptance::detail::simulate_linear_observation(cs, s.seed, s.T, s.dt);
    } else {
        obs = read_path_csv(s.observe);
    }
    KsFilterOptions opt;
    opt.particle_count = s.particles;
    opt.threads = s.threads;
    NoiseDriver drv{s.seed + 1, 0, 1, s.dt};
    const FilterEstimate est =
        ks_filter(cs, obs, Vec::Zero(1), drv, [](const Vec& z) { return z[0]; }, opt);
    std::ofstream f(out_path(s, "posterior.csv"));
    f << "t,pi_mean,pi_var,ESS,Zbar\n";
    for (size_t k = 0; k < est.times.size(); ++k)
        f << format_double(est.times[k]) << "," << format_double(est.pi_f[k]) << ","
          << format_double(est.pi_var[k]) << "," << format_double(est.ess[k]) << ","
          << format_double(est.pi_hat_1[k]) << "\n";
    const double Pstar = sys.ref("stationary_posterior_variance");
    double late = 0.0;
    int nlate = 0;
    for (size_t k = 0; k < est.times.size(); ++k)
        if (est.times[k] >= 0.5 * s.T) {
            late += est.pi_var[k];
            ++nlate;
        }
    late /= std::max(1, nlate);
    std::cout << "filter linear_filter_1d: late-time posterior variance " << late
              << " (stationary reference " << Pstar << ") -> posterior.csv\n";
    return 0;
}

int run_skewprod(const Scenario& s) {
    const ExampleSystem sys = get_system(
        s.system == "planar_flow_redundant" || s.system == "torus" ? s.system
                                                                   : "planar_flow_redundant",
        s.params);
    if (!sys.kernel) throw std::invalid_argument("system has no kernel data");
    Vec x0(2);
    x0 << 0.3, 0.2;
    std::vector<Vec> probes;
    for (int i = 0; i < 6; ++i)
        probes.push_back(
            (Vec(2) << 0.8 * std::cos(0.9 * i) + 0.4, 0.8 * std::sin(0.9 * i) - 0.1).finished());
    NoiseDriver drv{s.seed, 0, sys.kernel->X.noise_dim(), s.dt};
    const SkewProductReport rep = skew_product_check(*sys.kernel, x0, probes, s.T, drv);
    json out{{"fixed_point", rep.fixed_point.to_json()},
             {"reconstruction", rep.reconstruction.to_json()}};
    write_json(out, out_path(s, "skewprod.json").string());
    const bool ok = rep.fixed_point.pass && rep.reconstruction.pass;
    std::cout << "skewprod: fixed-point residual " << rep.fixed_point.residual_max
              << ", reconstruction residual " << rep.reconstruction.residual_max << " -> "
              << (ok ? "ok" : "FAIL") << "\n";
    return ok ? 0 : 1;
}

int run_commute(const Scenario& s) {
    const ExampleSystem sys = get_system(s.system, s.params);
    const auto [total, base] = system_sample_boxes(sys);
    const Decomposition dec = decompose(sys.B, sys.A, sys.p, base, total);
    const Report rep = commutator_check(dec, default_box(sys.N, 0.3, 1.5, 5), s.tolerance > 0
                                                                                  ? s.tolerance
                                                                                  : 1e-4);
    write_json(rep.to_json(), out_path(s, "commute.json").string());
    std::cout << "commute " << s.system << ": residual " << rep.residual_max << " -> "
              << (rep.pass ? "ok" : "FAIL") << "\n";
    return rep.pass ? 0 : 1;
}

int run_weitzenbock(const Scenario& s) {
    VerticalData vd;
    ExteriorBasis basis(s.n, s.k);
    json out{{"n", s.n}, {"k", s.k}};
    Mat lam;
    if (!s.input.empty()) {
        std::ifstream f(s.input);
        if (!f) throw std::invalid_argument("cannot read " + s.input);
        json j;
        f >> j;
        if (j.contains("curvature")) {
            CurvatureData c = CurvatureData::zeros(s.n);
            const auto& R = j.at("curvature");
            for (int i = 0; i < s.n; ++i)
                for (int k2 = 0; k2 < s.n; ++k2)
                    for (int jj = 0; jj < s.n; ++jj)
                        for (int l = 0; l < s.n; ++l)
                            c.at(i, k2, jj, l) = R.at(i).at(k2).at(jj).at(l).get<double>();
            c.Ric = matrix_from_json(j.at("ric"));
            lam = weitzenbock_from_curvature(c, basis).matrix;
        } else {
            vd.lie_basis = so_basis(s.n);
            vd.alpha = matrix_from_json(j.at("alpha"));
            vd.beta = Vec::Zero(static_cast<long>(vd.lie_basis.size()));
            if (j.contains("beta"))
                for (size_t i = 0; i < j.at("beta").size(); ++i)
                    vd.beta[static_cast<long>(i)] = j.at("beta").at(i).get<double>();
            lam = lambda_wedge(vd, basis).total.matrix;
        }
    } else {
        // default: the symmetric-sphere data for (n, k)
        const SymmetricSphereData d = make_symmetric_sphere(s.n, s.k);
        vd.lie_basis = so_basis(s.n);
        vd.alpha = d.alpha;
        vd.beta = Vec::Zero(static_cast<long>(vd.lie_basis.size()));
        lam = lambda_wedge(vd, basis).total.matrix;
        out["reference_scale"] = d.lambda_scale;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (lam + lam.transpose()));
    out["matrix"] = matrix_json(lam);
    json spec = json::array();
    for (long i = 0; i < es.eigenvalues().size(); ++i) spec.push_back(es.eigenvalues()[i]);
    out["spectrum"] = spec;
    write_json(out, out_path(s, "weitzenbock.json").string());
    std::cout << "weitzenbock n=" << s.n << " k=" << s.k << ": spectrum ["
              << es.eigenvalues().minCoeff() << ", " << es.eigenvalues().maxCoeff() << "]\n";
    return 0;
}

int run_coefficients(const Scenario& s) {
    const ExampleSystem sys = get_system(s.system, s.params);
    json out{{"system", s.system}, {"samples", json::array()}};
    if (s.system == "sphere_gradient") {
        const int n = sys.params.at("n").get<int>();
        const HormanderForm H = sphere_gradient_fields(n);
        FrameBundleChart fb = frame_bundle(H.space, n, gl_group(n));
        const DerivativeFlowSystem dfs = derivative_flow_system(H, fb);
        Vec x = Vec::Zero(n + 1);
        x[n] = 1.0;
        Mat U = Mat::Zero(n + 1, n);
        for (int c = 0; c < n; ++c) U(c, c) = 1.0;
        const Vec u = fb.pack(x, U);
        out["samples"].push_back(json{{"alpha", matrix_json(dfs.alpha_coefficients(u))},
                                      {"beta", matrix_json(dfs.beta_matrix(u))}});
    } else {
        if (!sys.principal) throw std::invalid_argument("system has no principal chart");
        SemiConnection conn = make_semi_connection(sys.B, sys.A, sys.p, Vec::Zero(sys.N.dim));
        for (const Vec& u : default_box(sys.N, 0.2, 1.8, 4)) {
            const VerticalCoefficients vc = vertical_coefficients(sys.B, conn, *sys.principal, u);
            out["samples"].push_back(
                json{{"point", std::vector<double>(u.data(), u.data() + u.size())},
                     {"alpha", matrix_json(vc.alpha)},
                     {"beta", std::vector<double>(vc.beta.data(), vc.beta.data() + vc.beta.size())}});
        }
    }
    write_json(out, out_path(s, "coefficients.json").string());
    std::cout << "coefficients " << s.system << " -> coefficients.json\n";
    return 0;
}

int run_check(const Scenario& s) {
    std::vector<acceptance::CriterionResult> results;
    if (s.suite == "all") {
        results = acceptance::run_all(s.threads);
    } else if (s.suite == "fast") {
        results.push_back(acceptance::torus_decomposition_criterion());
        results.push_back(acceptance::heisenberg_lift_criterion());
        results.push_back(acceptance::sphere_coefficients_criterion());
        results.push_back(acceptance::weitzenboeck_criterion());
        results.push_back(acceptance::girsanov_criterion());
        results.push_back(acceptance::skew_product_criterion());
    } else {
        throw std::invalid_argument("unknown suite: " + s.suite + " (use all|fast)");
    }
    return acceptance::print_and_summarize(results);
}

int dispatch(const Scenario& s) {
    if (s.task == "list-systems") return run_list_systems();
    if (s.task == "decompose") return run_decompose(s);
    if (s.task == "lift") return run_lift(s);
    if (s.task == "simulate") return run_simulate(s);
    if (s.task == "filter") return run_filter(s);
    if (s.task == "skewprod") return run_skewprod(s);
    if (s.task == "commute") return run_commute(s);
    if (s.task == "weitzenbock") return run_weitzenbock(s);
    if (s.task == "coefficients") return run_coefficients(s);
    if (s.task == "check") return run_check(s);
    throw std::invalid_argument("unknown task: " + s.task);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geometry-of-filtering numerics"};
    app.require_subcommand(0, 1);

    std::string scenario_file;
    app.add_option("--scenario", scenario_file, "scenario JSON file");

    Scenario flags;
    auto add_common = [&flags](CLI::App* cmd) {
        cmd->add_option("--system", flags.system, "registered system id");
        cmd->add_option("--param", [&flags](const std::vector<std::string>& kv) {
            for (const auto& item : kv) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) return false;
                flags.params[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
            }
            return true;
        }, "system parameter key=value");
        cmd->add_option("--dt", flags.dt, "time step");
        cmd->add_option("--T", flags.T, "horizon");
        cmd->add_option("--particles", flags.particles, "particle count");
        cmd->add_option("--seed", flags.seed, "noise seed");
        cmd->add_option("--tolerance", flags.tolerance, "check tolerance");
        cmd->add_option("--observe", flags.observe, "observation: csv path or 'simulate'");
        cmd->add_option("--input", flags.input, "task input file");
        cmd->add_option("--out", flags.out_dir, "output directory");
        cmd->add_option("--suite", flags.suite, "check suite: all|fast");
        cmd->add_option("--threads", flags.threads, "worker cap (or GEOMFILTER_THREADS)");
        cmd->add_option("--n", flags.n, "dimension parameter");
        cmd->add_option("--k", flags.k, "degree parameter");
    };
    for (const char* name : {"decompose", "lift", "simulate", "filter", "skewprod", "commute",
                             "weitzenbock", "coefficients", "check", "list-systems"}) {
        add_common(app.add_subcommand(name, name));
    }

    CLI11_PARSE(app, argc, argv);

    try {
        Scenario s;
        if (!scenario_file.empty()) {
            std::ifstream f(scenario_file);
            if (!f) {
                std::cerr << "cannot open scenario file " << scenario_file << "\n";
                return 2;
            }
            json j;
            f >> j;
            s = parse_scenario_json(j);
        } else {
            const auto subs = app.get_subcommands();
            if (subs.empty()) {
                std::cerr << "need --scenario or a subcommand; see --help\n";
                return 2;
            }
            s = flags;
            s.task = subs.front()->get_name();
        }
        return dispatch(s);
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownSystem& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
