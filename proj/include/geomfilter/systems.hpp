#ifndef GEOMFILTER_SYSTEMS_HPP
#define GEOMFILTER_SYSTEMS_HPP

#include "geomfilter/equivariant.hpp"
#include "geomfilter/filter.hpp"
#include "geomfilter/flows.hpp"

#include <json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace geomfilter {

/// Named reference constant with its mathematical provenance.
struct RefValue {
    std::string name;
    double value = 0.0;
    std::string provenance;  // closed_form | analytic | cross_checked
    std::string note;
};

/// Weitzenboeck data of the rank-one symmetric sphere: alpha = 1/2 sum A (x) A
/// over so(n), beta = 0; lambda^{wedge k} = -k(n-k)/4.
struct SymmetricSphereData {
    int n = 0;
    int k = 0;
    Mat alpha;  // coefficients in the so(n) basis
    double lambda_scale = 0.0;
};

inline SymmetricSphereData make_symmetric_sphere(int n, int k) {
    if (n < 2 || k < 1 || k > n - 1)
        throw NumericalDomainError("symmetric_sphere needs n >= 2 and 1 <= k <= n-1");
    SymmetricSphereData d;
    d.n = n;
    d.k = k;
    const int dim_so = n * (n - 1) / 2;
    d.alpha = 0.5 * Mat::Identity(dim_so, dim_so);
    d.lambda_scale = -0.25 * k * (n - k);
    return d;
}

/// A fully wired intertwined pair with optional extras used by tests and the
/// CLI.
struct ExampleSystem {
    std::string id;
    nlohmann::json params;
    ChartSpace N, M;
    DiffusionOperator B, A;
    SmoothMap p;
    bool intertwined = true;  // false when B only descends cohesively over A
    std::optional<HormanderForm> B_horm;
    std::optional<HormanderForm> A_horm;
    std::optional<PrincipalChart> principal;
    std::optional<ClassicalSystem> classical;
    std::optional<KernelSystem> kernel;
    std::optional<SymmetricSphereData> symmetric;
    std::vector<RefValue> refs;

    double ref(const std::string& name) const {
        for (const auto& r : refs)
            if (r.name == name) return r.value;
        throw UnknownSystem("no reference value named " + name + " in " + id);
    }
};

// ---------------------------------------------------------------------------

inline ExampleSystem make_torus(double alpha) {
    if (!(alpha > 0.0 && alpha < M_PI / 4.0))
        throw NumericalDomainError("torus alpha must lie in (0, pi/4) for ellipticity");
    const double t = std::tan(alpha);
    ExampleSystem sys;
    sys.id = "torus";
    sys.params = {{"alpha", alpha}};
    sys.N = torus_chart("T2", 2);
    sys.M = torus_chart("S1", 1);
    sys.p = coordinate_projection(sys.N, sys.M);

    Mat aB(2, 2);
    aB << 1.0, t, t, 1.0;
    sys.B = DiffusionOperator{sys.N, MatrixField{[aB](const Vec&) { return aB; }},
                              constant_field(Vec::Zero(2))};
    sys.A = DiffusionOperator{sys.M, MatrixField{[](const Vec&) { return Mat::Identity(1, 1); }},
                              constant_field(Vec::Zero(1))};
    // B = 1/2 (U1^2 + U2^2) for U1 = d_x + tan(alpha) d_y, U2 = sqrt(1-t^2) d_y
    Vec u1(2), u2(2);
    u1 << 1.0, t;
    u2 << 0.0, std::sqrt(1.0 - t * t);
    sys.B_horm = HormanderForm{sys.N, {constant_field(u1), constant_field(u2)},
                               constant_field(Vec::Zero(2))};
    sys.A_horm = HormanderForm{sys.M, {constant_field(Vec::Ones(1))},
                               constant_field(Vec::Zero(1))};
    sys.principal = trivial_additive_bundle(sys.N, sys.M, circle_group());
    sys.refs = {{"bv_coefficient", 0.5 * (1.0 - t * t), "closed_form",
                 "vertical second-order coefficient 1/2 (1 - tan^2 alpha)"},
                {"lift_slope", t, "closed_form", "horizontal lift of the unit base vector"}};
    return sys;
}

inline ExampleSystem make_heisenberg() {
    ExampleSystem sys;
    sys.id = "heisenberg";
    sys.params = nlohmann::json::object();
    sys.N = euclidean_chart("H3", 3);
    sys.M = euclidean_chart("R2", 2);
    sys.p = coordinate_projection(sys.N, sys.M);

    // left-invariant frame: X = d_x - y/2 d_z, Y = d_y + x/2 d_z, Z = d_z
    VectorField X{[](const Vec& u) -> Vec {
                      Vec v(3);
                      v << 1.0, 0.0, -0.5 * u[1];
                      return v;
                  },
                  [](const Vec&) -> Mat {
                      Mat J = Mat::Zero(3, 3);
                      J(2, 1) = -0.5;
                      return J;
                  }};
    VectorField Y{[](const Vec& u) -> Vec {
                      Vec v(3);
                      v << 0.0, 1.0, 0.5 * u[0];
                      return v;
                  },
                  [](const Vec&) -> Mat {
                      Mat J = Mat::Zero(3, 3);
                      J(2, 0) = 0.5;
                      return J;
                  }};
    VectorField Z = constant_field((Vec(3) << 0.0, 0.0, 1.0).finished());
    sys.B_horm = HormanderForm{sys.N, {X, Y, Z}, constant_field(Vec::Zero(3))};
    sys.B = from_hormander(*sys.B_horm);
    sys.A = DiffusionOperator{sys.M, MatrixField{[](const Vec&) { return Mat::Identity(2, 2); }},
                              constant_field(Vec::Zero(2))};
    sys.A_horm = HormanderForm{
        sys.M,
        {constant_field((Vec(2) << 1.0, 0.0).finished()),
         constant_field((Vec(2) << 0.0, 1.0).finished())},
        constant_field(Vec::Zero(2))};
    sys.principal = trivial_additive_bundle(sys.N, sys.M, additive_group(1, "R"));
    sys.refs = {{"bv_coefficient", 0.5, "closed_form", "vertical operator 1/2 d^2/dz^2"},
                {"lift_area_T1", 1.0 / 6.0, "closed_form",
                 "area integral of (t, t^2) over [0,1] by quadrature"}};
    return sys;
}

inline ExampleSystem make_bessel(int n) {
    if (n < 2) throw NumericalDomainError("bessel needs n >= 2");
    ExampleSystem sys;
    sys.id = "bessel";
    sys.params = {{"n", n}};
    sys.N = euclidean_chart("R" + std::to_string(n) + "_minus_origin", n);
    sys.M = euclidean_chart("half_line", 1);
    sys.p = SmoothMap{sys.N, sys.M,
                      [](const Vec& x) -> Vec { return Vec::Constant(1, x.norm()); },
                      [](const Vec& x) -> Mat {
                          const double r = x.norm();
                          if (r < 1e-12) throw NumericalDomainError("radial map singular at 0");
                          return x.transpose() / r;
                      }};
    sys.B = DiffusionOperator{
        sys.N, MatrixField{[n](const Vec&) { return Mat::Identity(n, n); }},
        constant_field(Vec::Zero(n))};
    sys.A = DiffusionOperator{
        sys.M, MatrixField{[](const Vec&) { return Mat::Identity(1, 1); }},
        VectorField{[n](const Vec& r) -> Vec {
                        return Vec::Constant(1, 0.5 * (n - 1) / r[0]);
                    },
                    [n](const Vec& r) -> Mat {
                        return Mat::Constant(1, 1, -0.5 * (n - 1) / (r[0] * r[0]));
                    }}};
    std::vector<VectorField> Bfields;
    for (int j = 0; j < n; ++j) {
        Vec e = Vec::Zero(n);
        e[j] = 1.0;
        Bfields.push_back(constant_field(e));
    }
    sys.B_horm = HormanderForm{sys.N, Bfields, constant_field(Vec::Zero(n))};
    sys.refs = {{"drift_at_2", 0.5 * (n - 1) / 2.0, "closed_form",
                 "radial drift (n-1)/(2 r) at r = 2"}};
    return sys;
}

/// Gradient SDE fields on the unit sphere: X^p(x) = e_p - x_p x, with analytic
/// Jacobians for the connection machinery.
inline HormanderForm sphere_gradient_fields(int n) {
    ChartSpace chart = sphere_chart("S" + std::to_string(n), n);
    std::vector<VectorField> fields;
    const int d = n + 1;
    for (int pidx = 0; pidx < d; ++pidx) {
        fields.push_back(VectorField{
            [pidx, d](const Vec& x) -> Vec {
                Vec v = -x[pidx] * x;
                v[pidx] += 1.0;
                return v;
            },
            [pidx, d](const Vec& x) -> Mat {
                Mat J = -x[pidx] * Mat::Identity(d, d);
                J.col(pidx) -= x;
                return J;
            }});
    }
    return HormanderForm{chart, fields, VectorField{}};
}

inline ExampleSystem make_sphere_gradient(int n) {
    if (n < 2) throw NumericalDomainError("sphere_gradient needs n >= 2");
    ExampleSystem sys;
    sys.id = "sphere_gradient";
    sys.params = {{"n", n}};
    HormanderForm H = sphere_gradient_fields(n);
    sys.M = H.space;
    const int d = n + 1;
    // intrinsic coefficients on the sphere: a = I - x x^T, b = -(n/2) x
    sys.A = DiffusionOperator{
        sys.M,
        MatrixField{[d](const Vec& x) -> Mat {
            return Mat::Identity(d, d) - x * x.transpose();
        }},
        VectorField{[n](const Vec& x) -> Vec { return -0.5 * n * x; },
                    [n, d](const Vec&) -> Mat { return -0.5 * n * Mat::Identity(d, d); }}};
    sys.A_horm = H;

    FrameBundleChart fb = frame_bundle(sys.M, n, gl_group(n));
    DerivativeFlowSystem dfs = derivative_flow_system(H, fb);
    sys.N = fb.chart.total;
    sys.B = dfs.B;
    sys.B_horm = dfs.lifted;
    sys.p = fb.chart.projection;
    sys.principal = fb.chart;
    sys.kernel = KernelSystem{H};
    sys.refs = {{"alpha_scale", 0.5, "closed_form", "alpha = 1/2 Id (x) Id"},
                {"beta_scale", -0.5 * n, "closed_form", "beta = -(n/2) Id"},
                {"ricci_scale", n - 1.0, "closed_form", "Ric = (n-1) Id on the unit sphere"}};
    return sys;
}

inline ExampleSystem make_linear_filter_1d(double a = -1.0, double c = 1.0, double q = 1.0,
                                           double r = 1.0) {
    ExampleSystem sys;
    sys.id = "linear_filter_1d";
    sys.params = {{"a", a}, {"c", c}, {"q", q}, {"r", r}};
    sys.N = euclidean_chart("signal_obs", 2);  // (z, x)
    sys.M = euclidean_chart("obs", 1);
    sys.p = SmoothMap{sys.N, sys.M, [](const Vec& u) -> Vec { return u.tail(1); },
                      [](const Vec&) -> Mat {
                          Mat J(1, 2);
                          J << 0.0, 1.0;
                          return J;
                      },
                      true};
    sys.intertwined = false;  // feedback drift: B descends cohesively over A
    Mat aN(2, 2);
    aN << q, 0.0, 0.0, r;
    sys.B = DiffusionOperator{sys.N, MatrixField{[aN](const Vec&) { return aN; }},
                              VectorField{[a, c](const Vec& u) -> Vec {
                                              Vec v(2);
                                              v << a * u[0], c * u[0];
                                              return v;
                                          },
                                          [a, c](const Vec&) -> Mat {
                                              Mat J(2, 2);
                                              J << a, 0.0, c, 0.0;
                                              return J;
                                          }}};
    // reference observation operator: symbol eta, no drift
    sys.A = DiffusionOperator{sys.M, MatrixField{[r](const Vec&) { return Mat::Constant(1, 1, r); }},
                              constant_field(Vec::Zero(1))};
    ClassicalSystem cs;
    cs.signal_dim = 1;
    cs.obs_dim = 1;
    cs.dB = 1;
    cs.dW = 1;
    cs.V = [q](const Vec&, const Vec&) { return Mat::Constant(1, 1, std::sqrt(q)); };
    cs.beta = [a](const Vec& z, const Vec&) { return (a * z).eval(); };
    cs.X1 = [r](const Vec&) { return Mat::Constant(1, 1, std::sqrt(r)); };
    cs.X2 = [](const Vec&) { return Mat::Zero(1, 1); };
    cs.b = [c](const Vec& z, const Vec&) { return (c * z).eval(); };
    sys.classical = cs;

    // stationary Riccati root of q - 2|a| P - c^2 P^2 / r = 0 (a < 0)
    const double A2 = c * c / r;
    const double P = (2.0 * a + std::sqrt(4.0 * a * a + 4.0 * A2 * q)) / (2.0 * A2);
    sys.refs = {{"stationary_posterior_variance", P, "closed_form",
                 "positive root of the stationary Riccati equation"},
                {"signal_stationary_std", std::sqrt(q / (2.0 * std::abs(a))), "closed_form",
                 "Ornstein-Uhlenbeck stationary deviation"}};
    return sys;
}

/// Planar system with three noise fields (two translations and one rotation):
/// rank E = 2 < 3 noise directions, so the kernel split is non-trivial.
inline ExampleSystem make_planar_flow_redundant() {
    ExampleSystem sys;
    sys.id = "planar_flow_redundant";
    sys.params = nlohmann::json::object();
    sys.M = euclidean_chart("R2", 2);
    sys.N = sys.M;
    sys.p = identity_map(sys.M);
    VectorField rot{[](const Vec& x) -> Vec {
                        Vec v(2);
                        v << -x[1], x[0];
                        return v;
                    },
                    [](const Vec&) -> Mat {
                        Mat J(2, 2);
                        J << 0.0, -1.0, 1.0, 0.0;
                        return J;
                    }};
    HormanderForm H{sys.M,
                    {constant_field((Vec(2) << 1.0, 0.0).finished()),
                     constant_field((Vec(2) << 0.0, 1.0).finished()), rot},
                    VectorField{}};
    sys.A_horm = H;
    sys.B_horm = H;
    sys.A = from_hormander(H);
    sys.B = sys.A;
    sys.kernel = KernelSystem{H};
    sys.refs = {{"noise_dim", 3.0, "analytic", "three driving fields over a rank-2 symbol"}};
    return sys;
}

/// Registry entry for the symmetric-sphere coefficients: carries the
/// Weitzenboeck data, no intertwined pair.
inline ExampleSystem make_symmetric_sphere_system(int n, int k) {
    const SymmetricSphereData d = make_symmetric_sphere(n, k);
    ExampleSystem sys;
    sys.id = "symmetric_sphere";
    sys.params = {{"n", n}, {"k", k}};
    sys.N = euclidean_chart("unused", 1);
    sys.M = sys.N;
    sys.p = identity_map(sys.N);
    sys.B = DiffusionOperator{sys.N, MatrixField{[](const Vec&) { return Mat::Zero(1, 1); }},
                              constant_field(Vec::Zero(1))};
    sys.A = sys.B;
    sys.symmetric = d;
    sys.refs = {{"lambda_scale", d.lambda_scale, "closed_form",
                 "scalar -k(n-k)/4 of the exterior-power zero-order operator"}};
    return sys;
}

inline std::vector<std::string> registered_systems() {
    return {"heisenberg",          "torus",           "bessel",          "sphere_gradient",
            "linear_filter_1d",    "planar_flow_redundant", "symmetric_sphere"};
}

inline ExampleSystem get_system(const std::string& id, const nlohmann::json& params) {
    auto num = [&params](const char* key, double fallback) {
        return params.contains(key) ? params.at(key).get<double>() : fallback;
    };
    if (id == "heisenberg") return make_heisenberg();
    if (id == "torus") return make_torus(num("alpha", M_PI / 6.0));
    if (id == "bessel") return make_bessel(static_cast<int>(num("n", 3)));
    if (id == "sphere_gradient") return make_sphere_gradient(static_cast<int>(num("n", 3)));
    if (id == "linear_filter_1d")
        return make_linear_filter_1d(num("a", -1.0), num("c", 1.0), num("q", 1.0), num("r", 1.0));
    if (id == "planar_flow_redundant") return make_planar_flow_redundant();
    if (id == "symmetric_sphere")
        return make_symmetric_sphere_system(static_cast<int>(num("n", 3)),
                                            static_cast<int>(num("k", 1)));
    throw UnknownSystem("unknown system id: " + id);
}

/// Construction-time sanity battery shared by the registered systems.
/// Intertwined systems must pass is_over; feedback systems (which only
/// descend cohesively) must pass projectible_symbol_check and descends.
inline std::vector<Report> system_construction_checks(const ExampleSystem& sys,
                                                      const std::vector<Vec>& total_samples,
                                                      const std::vector<Vec>& base_samples) {
    std::vector<Report> reps;
    if (sys.intertwined) {
        reps.push_back(is_over(sys.B, sys.A, sys.p, total_samples));
    } else {
        std::vector<std::vector<Vec>> fibers;
        for (const Vec& u : total_samples) {
            std::vector<Vec> fiber{u};
            Vec shifted = u;
            shifted.head(sys.N.dim - sys.M.dim).array() += 0.7;  // move along the fibre
            fiber.push_back(shifted);
            fibers.push_back(std::move(fiber));
        }
        reps.push_back(projectible_symbol_check(sys.B, sys.p, fibers));
        reps.push_back(descends(sys.B, sys.p, sys.A, total_samples).verification);
    }
    reps.push_back(cohesive_check(sys.A, base_samples));
    reps.push_back(symbol_psd_check(sys.B, total_samples));
    return reps;
}

}  // namespace geomfilter

#endif  // GEOMFILTER_SYSTEMS_HPP
