#ifndef GEOMFILTER_ACCEPTANCE_HPP
#define GEOMFILTER_ACCEPTANCE_HPP

#include "geomfilter/equivariant.hpp"
#include "geomfilter/filter.hpp"
#include "geomfilter/flows.hpp"
#include "geomfilter/systems.hpp"
#include "geomfilter/weitzenboeck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace geomfilter::acceptance {

struct CriterionResult {
    int number = 0;
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    std::string detail;
};

namespace detail {

inline std::vector<Vec> box(const ChartSpace& c, double lo, double hi, int count) {
    return sample_box(c, Vec::Constant(c.dim, lo), Vec::Constant(c.dim, hi), count);
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

struct KalmanTrace {
    std::vector<double> mean, var;
};

/// Kalman-Bucy oracle for dz = a z dt + sqrt(q) dW, dx = c z dt + sqrt(r) dB,
/// integrated along the supplied observation path. Independent of the
/// particle-filter implementation.
inline KalmanTrace kalman_oracle(const PointPath& obs, double a, double c, double q, double r) {
    KalmanTrace out;
    double m = 0.0, P = 0.0;
    out.mean.push_back(m);
    out.var.push_back(P);
    for (size_t k = 0; k + 1 < obs.size(); ++k) {
        const double dt = obs.times[k + 1] - obs.times[k];
        const double dx = obs.points[k + 1][0] - obs.points[k][0];
        const double K = P * c / r;
        m += a * m * dt + K * (dx - c * m * dt);
        P += (2.0 * a * P + q - c * c * P * P / r) * dt;
        out.mean.push_back(m);
        out.var.push_back(P);
    }
    return out;
}

inline PointPath simulate_linear_observation(const ClassicalSystem& cs, std::uint64_t seed,
                                             double T, double dt,
                                             std::vector<double>* z_trace = nullptr) {
    NoiseDriver dW{seed, streams::kObservation + 1, cs.dW, dt};
    NoiseDriver dB{seed, streams::kObservation + 2, cs.dB, dt};
    Vec z = Vec::Zero(cs.signal_dim), x = Vec::Zero(cs.obs_dim);
    PointPath obs;
    obs.times.push_back(0.0);
    obs.points.push_back(x);
    if (z_trace) z_trace->push_back(z[0]);
    const int steps = static_cast<int>(std::llround(T / dt));
    for (int s = 0; s < steps; ++s) {
        const Vec dw = dW.increment(static_cast<std::uint64_t>(s));
        const Vec db = dB.increment(static_cast<std::uint64_t>(s));
        x += cs.X1(x) * db + cs.X2(x) * dw + cs.b(z, x) * dt;
        z += cs.V(z, x) * dw + cs.beta(z, x) * dt;
        obs.times.push_back((s + 1) * dt);
        obs.points.push_back(x);
        if (z_trace) z_trace->push_back(z[0]);
    }
    return obs;
}

template <class Fn>
CriterionResult timed(int number, const std::string& name, Fn&& fn) {
    CriterionResult res;
    res.number = number;
    res.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        res.pass = fn(res.detail);
    } catch (const std::exception& e) {
        res.pass = false;
        res.detail = std::string("exception: ") + e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace detail

// criterion 1: torus decomposition coefficients to 1e-10
inline CriterionResult torus_decomposition_criterion() {
    return detail::timed(1, "torus decomposition", [](std::string& detail) {
        const double alpha = M_PI / 6.0, ta = std::tan(alpha);
        const ExampleSystem t = make_torus(alpha);
        const Decomposition dec =
            decompose(t.B, t.A, t.p, detail::box(t.M, 0.0, 2.0 * M_PI, 8),
                      detail::box(t.N, 0.0, 2.0 * M_PI, 12));
        Mat symAH(2, 2), aBV(2, 2);
        symAH << 0.5, 0.5 * ta, 0.5 * ta, 0.5 * ta * ta;
        aBV << 0.0, 0.0, 0.0, 1.0 - ta * ta;
        double worst = 0.0;
        for (const Vec& u : detail::box(t.N, 0.0, 2.0 * M_PI, 10)) {
            worst = std::max(worst, (symbol_at(dec.AH, u) - symAH).cwiseAbs().maxCoeff());
            worst = std::max(worst, (dec.BV.a(u) - aBV).cwiseAbs().maxCoeff());
            worst = std::max(worst, dec.BV.b(u).norm());
            worst = std::max(worst,
                             std::abs(0.5 * dec.BV.a(u)(1, 1) - (1.0 / 3.0)));
        }
        detail = "max coefficient error " + std::to_string(worst);
        return worst < 1e-10;
    });
}

// criterion 2: heisenberg deterministic lift, error and empirical order
inline CriterionResult heisenberg_lift_criterion() {
    return detail::timed(2, "heisenberg horizontal lift", [](std::string& detail) {
        const ExampleSystem h = make_heisenberg();
        SemiConnection conn = make_semi_connection(h.B, h.A, h.p, Vec::Zero(3));
        auto err_at = [&](double dt) {
            PointPath sigma;
            const int n = static_cast<int>(std::llround(1.0 / dt));
            for (int k = 0; k <= n; ++k) {
                const double s = k * dt;
                sigma.times.push_back(s);
                sigma.points.push_back((Vec(2) << s, s * s).finished());
            }
            const PointPath lift = lift_path(conn, sigma, Vec::Zero(3), LiftMode::Ode);
            return std::abs(lift.points.back()[2] - 1.0 / 6.0);
        };
        const double e1 = err_at(1e-3);
        const double e2 = err_at(5e-4);
        const double order = std::log2(e1 / e2);
        detail = "error " + std::to_string(e1) + ", halving order " + std::to_string(order);
        return e1 < 5e-4 && order >= 1.8;
    });
}

// criterion 3: bessel intertwining and the radial-law KS test
inline CriterionResult bessel_criterion() {
    return detail::timed(3, "bessel intertwining", [](std::string& detail) {
        const int n = 3;
        const ExampleSystem bes = make_bessel(n);
        const Report over = is_over(
            bes.B, bes.A, bes.p,
            sample_box(bes.N, Vec::Constant(n, 0.4), Vec::Constant(n, 1.6), 50), 1e-6);
        if (!over.pass) {
            detail = "intertwining residual " + std::to_string(over.residual_max);
            return false;
        }
        const int paths = 10000;
        const double T = 1.0, dt = 1e-3;
        std::vector<double> radial, bessel;
        radial.reserve(paths);
        bessel.reserve(paths);
        DiffusionOperator bm{bes.N, bes.B.a, bes.B.b};
        for (int i = 0; i < paths; ++i) {
            NoiseDriver d3{91001, static_cast<std::uint64_t>(i), n, dt};
            Vec x = Vec::Zero(n);
            x[0] = 1.0;
            const auto steps = static_cast<std::uint64_t>(std::llround(T / dt));
            for (std::uint64_t s = 0; s < steps; ++s) x += d3.increment(s);
            radial.push_back(x.norm());

            NoiseDriver d1{92001, static_cast<std::uint64_t>(i), 1, dt};
            double r = 1.0;
            for (std::uint64_t s = 0; s < steps; ++s) {
                r += 0.5 * (n - 1) / std::max(r, 1e-6) * dt + d1.increment(s)[0];
                r = std::max(r, 1e-6);
            }
            bessel.push_back(r);
        }
        const double D = detail::ks_statistic(radial, bessel);
        const double crit = 1.628 * std::sqrt(2.0 / paths);  // two-sample, alpha = 1%
        detail = "intertwining " + std::to_string(over.residual_max) + ", KS " +
                 std::to_string(D) + " (crit " + std::to_string(crit) + ")";
        return D < crit;
    });
}

// criterion 4: sphere derivative-flow coefficients
inline CriterionResult sphere_coefficients_criterion() {
    return detail::timed(4, "sphere derivative-flow coefficients", [](std::string& detail) {
        double worst = 0.0;
        for (int n : {2, 3}) {
            const HormanderForm H = sphere_gradient_fields(n);
            FrameBundleChart fb = frame_bundle(H.space, n, gl_group(n));
            const DerivativeFlowSystem sys = derivative_flow_system(H, fb);
            // two frame points: the north-pole identity frame and a generic one
            std::vector<Vec> frames;
            {
                Vec x = Vec::Zero(n + 1);
                x[n] = 1.0;
                Mat U = Mat::Zero(n + 1, n);
                for (int c = 0; c < n; ++c) U(c, c) = 1.0;
                frames.push_back(fb.pack(x, U));
            }
            {
                Vec x = Vec::Ones(n + 1);
                x[0] = 0.5;
                x /= x.norm();
                Mat U(n + 1, n);
                for (int c = 0; c < n; ++c) {
                    Vec col = Vec::Unit(n + 1, c) * 1.1;
                    col[n] += 0.3 * (c + 1);
                    col -= x * x.dot(col);
                    for (int prev = 0; prev < c; ++prev)
                        col -= U.col(prev) * U.col(prev).dot(col) / U.col(prev).squaredNorm();
                    U.col(c) = col;
                }
                frames.push_back(fb.pack(x, U));
            }
            for (const Vec& u : frames) {
                worst = std::max(worst, (sys.alpha_coefficients(u) -
                                         id_tensor_id_coefficients(n, 0.5))
                                            .cwiseAbs()
                                            .maxCoeff());
                worst = std::max(worst, (sys.beta_matrix(u) +
                                         0.5 * n * Mat::Identity(n, n))
                                            .cwiseAbs()
                                            .maxCoeff());
            }
        }
        detail = "max coefficient error " + std::to_string(worst);
        return worst < 1e-8;
    });
}

// criterion 5: weitzenboeck battery
inline CriterionResult weitzenboeck_criterion() {
    return detail::timed(5, "weitzenboeck battery", [](std::string& detail) {
        // commutation law, n <= 6, exact to 1e-14
        double worst_comm = 0.0;
        for (int n = 2; n <= 6; ++n)
            for (int k = 0; k < n; ++k) {
                ExteriorBasis bk(n, k), bk1(n, k + 1);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        Mat acc = annihilation(i, bk1).matrix * creation(j, bk).matrix;
                        if (k >= 1)
                            acc += creation(j, ExteriorBasis(n, k - 1)).matrix *
                                   annihilation(i, bk).matrix;
                        if (i == j) acc -= Mat::Identity(bk.dim(), bk.dim());
                        worst_comm = std::max(worst_comm, acc.cwiseAbs().maxCoeff());
                    }
            }
        if (worst_comm > 1e-14) {
            detail = "commutation residual " + std::to_string(worst_comm);
            return false;
        }
        // casimir for n <= 6, all k
        double worst_cas = 0.0;
        for (int n = 3; n <= 6; ++n)
            for (int k = 1; k < n; ++k)
                worst_cas = std::max(
                    worst_cas, std::abs(casimir(n, k) - 0.5 * n * (n - 1) /
                                                            static_cast<double>(binomial(n, k))));
        if (worst_cas > 1e-10) {
            detail = "casimir residual " + std::to_string(worst_cas);
            return false;
        }
        // symmetric-space lambda for n = 3, 4
        double worst_sym = 0.0;
        for (int n : {3, 4})
            for (int k = 1; k < n; ++k) {
                const SymmetricSphereData d = make_symmetric_sphere(n, k);
                VerticalData vd{so_basis(n), d.alpha, Vec::Zero(n * (n - 1) / 2)};
                ExteriorBasis basis(n, k);
                const Mat lam = lambda_wedge(vd, basis).total.matrix;
                worst_sym = std::max(worst_sym,
                                     (lam - d.lambda_scale * Mat::Identity(basis.dim(), basis.dim()))
                                         .cwiseAbs()
                                         .maxCoeff());
            }
        if (worst_sym > 1e-10) {
            detail = "symmetric-space residual " + std::to_string(worst_sym);
            return false;
        }
        // spectral bounds: 20 random PSD trials without violations beyond 1e-8
        int violations = 0;
        const int dim_so = 4 * 3 / 2;
        for (int trial = 0; trial < 20; ++trial) {
            NoiseDriver d{88000 + static_cast<std::uint64_t>(trial), 0, 1, 1.0};
            Mat R(dim_so, dim_so);
            for (int i = 0; i < dim_so; ++i)
                for (int j = 0; j < dim_so; ++j)
                    R(i, j) = d.gaussian(static_cast<std::uint64_t>(i),
                                         static_cast<std::uint64_t>(j));
            if (!eigen_bounds_check(R * R.transpose(), 4, 2).pass) ++violations;
        }
        detail = "commutation " + std::to_string(worst_comm) + ", casimir " +
                 std::to_string(worst_cas) + ", symmetric " + std::to_string(worst_sym) +
                 ", bound violations " + std::to_string(violations) + "/20";
        return violations == 0;
    });
}

// criterion 6: girsanov unit-drift removal
inline CriterionResult girsanov_criterion() {
    return detail::timed(6, "girsanov reweighting", [](std::string& detail) {
        ChartSpace r1 = euclidean_chart("R", 1);
        HormanderForm bm{r1, {constant_field(Vec::Ones(1))}, VectorField{}};
        OneForm bsharp{r1, [](const Vec&) { return Vec::Ones(1); }};
        const int n = 10000;
        const double T = 1.0, dt = 1e-3;
        double zbar = 0.0, z2 = 0.0, rew = 0.0, rew2 = 0.0, direct = 0.0, direct2 = 0.0;
        const int steps = static_cast<int>(std::llround(T / dt));
        for (int i = 0; i < n; ++i) {
            NoiseDriver d{555, static_cast<std::uint64_t>(i), 1, dt};
            double x = 0.0, y = 0.0, M = 0.0;
            for (int s = 0; s < steps; ++s) {
                const double dw = d.increment(static_cast<std::uint64_t>(s))[0];
                M += dw;  // b# = 1, martingale increment along the reference path
                x += dw;
                y += dt + dw;
            }
            const double Z = std::exp(M - 0.5 * T);
            zbar += Z;
            z2 += Z * Z;
            rew += Z * x;
            rew2 += Z * x * Z * x;
            direct += y;
            direct2 += y * y;
        }
        zbar /= n;
        rew /= n;
        direct /= n;
        const double se_z = std::sqrt((z2 / n - zbar * zbar) / n);
        const double se_r = std::sqrt((rew2 / n - rew * rew) / n);
        const double se_d = std::sqrt((direct2 / n - direct * direct) / n);
        const double se_cmp = std::sqrt(se_r * se_r + se_d * se_d);
        detail = "mean(Z) " + std::to_string(zbar) + " (3SE " + std::to_string(3.0 * se_z) +
                 "), reweighted-direct gap " + std::to_string(std::abs(rew - direct)) +
                 " (3SE " + std::to_string(3.0 * se_cmp) + ")";
        return std::abs(zbar - 1.0) < 3.0 * se_z && std::abs(rew - direct) < 3.0 * se_cmp;
    });
}

// criterion 7: kalman-bucy oracle comparison
inline CriterionResult kalman_criterion(int threads = 1) {
    return detail::timed(7, "kalman-bucy particle filter", [threads](std::string& detail) {
        const ExampleSystem lf = make_linear_filter_1d();
        const ClassicalSystem& cs = *lf.classical;
        const double T = 10.0, dt = 1e-3;
        const PointPath obs = detail::simulate_linear_observation(cs, 424241, T, dt);
        KsFilterOptions opt;
        opt.particle_count = 10000;
        opt.threads = threads;
        NoiseDriver drv{424243, 0, 1, dt};
        const FilterEstimate est =
            ks_filter(cs, obs, Vec::Zero(1), drv, [](const Vec& z) { return z[0]; }, opt);
        const detail::KalmanTrace kal = detail::kalman_oracle(obs, -1.0, 1.0, 1.0, 1.0);
        double var_avg = 0.0, rmse = 0.0;
        int nlate = 0;
        for (size_t k = 0; k < est.times.size(); ++k) {
            const double d = est.pi_f[k] - kal.mean[k];
            rmse += d * d;
            if (est.times[k] >= 5.0) {
                var_avg += est.pi_var[k];
                ++nlate;
            }
        }
        rmse = std::sqrt(rmse / est.times.size());
        var_avg /= nlate;
        const double Pstar = lf.ref("stationary_posterior_variance");
        const double std_sig = lf.ref("signal_stationary_std");
        detail = "time-avg var " + std::to_string(var_avg) + " vs " + std::to_string(Pstar) +
                 ", mean RMSE " + std::to_string(rmse) + " vs bound " +
                 std::to_string(0.05 * std_sig);
        return std::abs(var_avg - Pstar) < 0.05 * Pstar && rmse < 0.05 * std_sig;
    });
}

// criterion 8: estimator cross-validation on the torus
inline CriterionResult estimator_cross_validation_criterion(int threads = 1) {
    return detail::timed(8, "estimator cross-validation", [threads](std::string& detail) {
        const double alpha = M_PI / 6.0;
        const ExampleSystem t = make_torus(alpha);
        const Decomposition dec =
            decompose(t.B, t.A, t.p, detail::box(t.M, 0.0, 2.0 * M_PI, 8),
                      detail::box(t.N, 0.0, 2.0 * M_PI, 12));
        const double T = 0.5, dt = 2e-3;
        // observed path: seeded base Brownian motion
        PointPath sigma;
        {
            NoiseDriver d{31415, streams::kObservation, 1, dt};
            Vec x = Vec::Zero(1);
            sigma.times.push_back(0.0);
            sigma.points.push_back(x);
            const int steps = static_cast<int>(std::llround(T / dt));
            for (int s = 0; s < steps; ++s) {
                x += d.increment(static_cast<std::uint64_t>(s));
                sigma.times.push_back((s + 1) * dt);
                sigma.points.push_back(x);
            }
        }
        auto f = [](const Vec& u) { return u[1]; };
        auto mean_se = [](const std::vector<double>& v) {
            double m = 0.0;
            for (double x : v) m += x;
            m /= v.size();
            double s2 = 0.0;
            for (double x : v) s2 += (x - m) * (x - m);
            s2 /= (v.size() - 1);
            return std::make_pair(m, std::sqrt(s2 / v.size()));
        };
        std::vector<double> cs_vals, pc_vals;
        for (int rep = 0; rep < 6; ++rep) {
            NoiseDriver drv{9000 + static_cast<std::uint64_t>(rep), 0, 2, dt};
            ConditionalSamplerOptions opt;
            opt.particle_count = 10000;
            opt.threads = threads;
            cs_vals.push_back(
                conditional_sampler(dec, sigma, Vec::Zero(2), drv, f, opt).pi_f.back());
        }
        std::vector<double> partition;
        for (int j = 1; j <= 8; ++j) partition.push_back(T * j / 8.0);
        for (int rep = 0; rep < 10; ++rep) {
            NoiseDriver drv{9500 + static_cast<std::uint64_t>(rep), 0, 2, dt};
            PartitionConditioningOptions opt;
            opt.particle_count = 10000;
            opt.bandwidth = 0.05;
            opt.threads = threads;
            pc_vals.push_back(partition_conditioning(*t.B_horm, t.p, sigma, partition,
                                                     Vec::Zero(2), drv, f, opt));
        }
        const auto [m1, se1] = mean_se(cs_vals);
        const auto [m2, se2] = mean_se(pc_vals);
        const double se = std::sqrt(se1 * se1 + se2 * se2);
        detail = "conditional " + std::to_string(m1) + " +- " + std::to_string(se1) +
                 ", partition " + std::to_string(m2) + " +- " + std::to_string(se2);
        return std::abs(m1 - m2) < 3.0 * se;
    });
}

// criterion 9: innovations martingale across seeds
inline CriterionResult innovations_criterion(int threads = 1) {
    return detail::timed(9, "innovations martingale", [threads](std::string& detail) {
        const ExampleSystem lf = make_linear_filter_1d();
        const ClassicalSystem& cs = *lf.classical;
        const double T = 2.0, dt = 1e-3;
        int passed = 0;
        for (int seed = 0; seed < 50; ++seed) {
            const PointPath obs = detail::simulate_linear_observation(
                cs, 20000 + static_cast<std::uint64_t>(seed), T, dt);
            KsFilterOptions opt;
            opt.particle_count = 2000;
            opt.threads = threads;
            NoiseDriver drv{30000 + static_cast<std::uint64_t>(seed), 0, 1, dt};
            const FilterEstimate est =
                ks_filter(cs, obs, Vec::Zero(1), drv, [](const Vec& z) { return z[0]; }, opt);
            const InnovationsAccumulator acc =
                innovations(obs, est.pi_b, [](double) { return 1.0; });
            if (acc.bin_ztest(10, 1.96).pass) ++passed;
        }
        detail = std::to_string(passed) + "/50 seeded runs passed the 95% bin tests";
        return passed >= 45;
    });
}

// criterion 10: skew product and commutator checks
inline CriterionResult skew_product_criterion() {
    return detail::timed(10, "skew product and commutators", [](std::string& detail) {
        const KernelSystem K = *make_planar_flow_redundant().kernel;
        Vec x0(2);
        x0 << 0.3, 0.2;
        std::vector<Vec> probes;
        for (int i = 0; i < 10; ++i)
            probes.push_back(
                (Vec(2) << 0.8 * std::cos(0.6 * i) + 0.4, 0.8 * std::sin(0.6 * i) - 0.1)
                    .finished());
        NoiseDriver drv{70001, 0, 3, 1e-3};
        const SkewProductReport skew = skew_product_check(K, x0, probes, 1.0, drv);
        if (!(skew.fixed_point.residual_max < 1e-6 && skew.reconstruction.residual_max < 1e-6)) {
            detail = "fixed-point " + std::to_string(skew.fixed_point.residual_max) +
                     ", reconstruction " + std::to_string(skew.reconstruction.residual_max);
            return false;
        }
        const ExampleSystem t = make_torus(M_PI / 6.0);
        const Decomposition dect =
            decompose(t.B, t.A, t.p, detail::box(t.M, 0.0, 2.0 * M_PI, 8),
                      detail::box(t.N, 0.0, 2.0 * M_PI, 12));
        const Report rt = commutator_check(dect, detail::box(t.N, 0.3, 2.0, 5));
        const ExampleSystem h = make_heisenberg();
        const Decomposition dech =
            decompose(h.B, h.A, h.p, detail::box(h.M, -1.0, 1.0, 8),
                      detail::box(h.N, -1.0, 1.0, 12));
        const Report rh = commutator_check(dech, detail::box(h.N, -0.8, 0.8, 5));
        Decomposition broken = dect;
        broken.BV.a = MatrixField{[](const Vec& u) -> Mat {
            Mat a = Mat::Zero(2, 2);
            a(1, 1) = (1.0 + 0.1 * std::sin(u[1])) * (1.0 - std::pow(std::tan(M_PI / 6.0), 2.0));
            return a;
        }};
        const Report rb = commutator_check(broken, detail::box(t.N, 0.3, 2.0, 5));
        detail = "skew " + std::to_string(skew.reconstruction.residual_max) + ", torus comm " +
                 std::to_string(rt.residual_max) + ", heisenberg comm " +
                 std::to_string(rh.residual_max) + ", control comm " +
                 std::to_string(rb.residual_max);
        return rt.pass && rh.pass && !rb.pass && rb.residual_max >= 1e-2;
    });
}

inline std::vector<CriterionResult> run_all(int threads = 1) {
    std::vector<CriterionResult> out;
    out.push_back(torus_decomposition_criterion());
    out.push_back(heisenberg_lift_criterion());
    out.push_back(bessel_criterion());
    out.push_back(sphere_coefficients_criterion());
    out.push_back(weitzenboeck_criterion());
    out.push_back(girsanov_criterion());
    out.push_back(kalman_criterion(threads));
    out.push_back(estimator_cross_validation_criterion(threads));
    out.push_back(innovations_criterion(threads));
    out.push_back(skew_product_criterion());
    return out;
}

inline int print_and_summarize(const std::vector<CriterionResult>& results) {
    int failures = 0;
    for (const auto& r : results) {
        std::printf("[%s] criterion %2d: %-35s (%6.2fs) %s\n", r.pass ? "PASS" : "FAIL",
                    r.number, r.name.c_str(), r.seconds, r.detail.c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failures,
                results.size());
    return failures == 0 ? 0 : 1;
}

}  // namespace geomfilter::acceptance

#endif  // GEOMFILTER_ACCEPTANCE_HPP
