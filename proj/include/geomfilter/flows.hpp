#ifndef GEOMFILTER_FLOWS_HPP
#define GEOMFILTER_FLOWS_HPP

#include "geomfilter/connection.hpp"
#include "geomfilter/simulate.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace geomfilter {

/// Finite-noise reproducing-kernel system: k#(x,y) = X(y) Y_x maps E_x to E_y
/// and drives the horizontal flow; K-perp(x) = Y_x X(x) projects the noise
/// onto the components relevant at x.
struct KernelSystem {
    HormanderForm X;

    Mat Y(const Vec& x) const { return pinv(X.matrix(x)); }
    Mat kernel(const Vec& x, const Vec& y) const { return X.matrix(y) * Y(x); }

    /// Projection of R^m onto ker(X(x))^perp.
    Mat ell(const Vec& x) const { return Y(x) * X.matrix(x); }

    /// k#(x,x) = identity on E_x, and the noise splitting K + K-perp is a pair
    /// of complementary projections (ell idempotent).
    Report kernel_identity_check(const std::vector<Vec>& samples, double tol = 1e-10) const {
        Report rep;
        rep.check = "kernel_identity";
        rep.tolerance = tol;
        double worst = 0.0;
        for (const Vec& x : samples) {
            const Mat P = image_projector(X.matrix(x) * X.matrix(x).transpose());
            worst = std::max(worst, (kernel(x, x) * P - P).cwiseAbs().maxCoeff());
            const Mat l = ell(x);
            worst = std::max(worst, (l * l - l).cwiseAbs().maxCoeff());
            worst = std::max(worst, (l - l.transpose()).cwiseAbs().maxCoeff());
        }
        rep.samples = static_cast<int>(samples.size());
        rep.residual_max = worst;
        rep.pass = worst < tol;
        return rep;
    }
};

/// The flow evaluated on a finite configuration of points.
struct MultiPointState {
    std::vector<Vec> points;
    double time = 0.0;
};

/// One Stratonovich Heun step of the full flow: every configuration point is
/// advanced with the same noise increment.
inline MultiPointState flow_step(const KernelSystem& K, const MultiPointState& state,
                                 const Vec& dB, double dt, double norm_cap = 1e8) {
    MultiPointState out;
    out.time = state.time + dt;
    out.points.reserve(state.points.size());
    for (const Vec& x : state.points) {
        const Vec y = stratonovich_heun_step(K.X, x, dB, dt);
        if (y.norm() > norm_cap) throw Explosion("flow point exceeded the norm cap");
        out.points.push_back(y);
    }
    return out;
}

/// Shared record of one flow realisation: the base path, its noise increments.
struct FlowTrace {
    std::vector<Vec> increments;
    PointPath base;
    double dt = 0.0;
};

inline FlowTrace simulate_base(const KernelSystem& K, const Vec& x0, double T,
                               const NoiseDriver& driver) {
    FlowTrace tr;
    tr.dt = driver.dt;
    const auto steps = static_cast<std::uint64_t>(std::llround(T / driver.dt));
    tr.base.times.push_back(0.0);
    tr.base.points.push_back(x0);
    Vec x = x0;
    for (std::uint64_t s = 0; s < steps; ++s) {
        const Vec dB = driver.increment(s);
        tr.increments.push_back(dB);
        x = stratonovich_heun_step(K.X, x, dB, tr.dt);
        tr.base.times.push_back(static_cast<double>(s + 1) * tr.dt);
        tr.base.points.push_back(x);
    }
    return tr;
}

/// Full-flow endpoint of one point under a stored noise trace.
inline Vec full_flow_point(const KernelSystem& K, const FlowTrace& tr, const Vec& q) {
    Vec y = q;
    for (const Vec& dB : tr.increments) y = stratonovich_heun_step(K.X, y, dB, tr.dt);
    return y;
}

namespace flowdetail {

/// One horizontal Heun step of a single point. The base's two Heun stages are
/// replayed through the kernel (stage value X(stage) dB + X0(stage) dt pushed
/// by Y at the stage base point), which makes the lift of the base point
/// reproduce the base path to rounding.
inline Vec horizontal_step(const KernelSystem& K, const Vec& x, const Vec& dB, double dt, Vec y) {
    const Mat Xx = K.X.matrix(x);
    const Vec drift_x = K.X.X0.eval ? K.X.X0(x) : Vec::Zero(x.size());
    const Vec stage1 = Xx * dB + drift_x * dt;
    const Vec xpred = K.X.space.retract(x + stage1);
    const Mat Xp = K.X.matrix(xpred);
    const Vec drift_p = K.X.X0.eval ? K.X.X0(xpred) : Vec::Zero(x.size());
    const Vec stage2 = Xp * dB + drift_p * dt;

    const Vec k1 = K.X.matrix(y) * (K.Y(x) * stage1);
    const Vec ypred = K.X.space.retract(y + k1);
    const Vec k2 = K.X.matrix(ypred) * (K.Y(xpred) * stage2);
    return K.X.space.retract(y + 0.5 * (k1 + k2));
}

}  // namespace flowdetail

/// Horizontal-flow endpoint: dy = k#(x_t, y)(o dx_t); only the noise
/// components relevant at the base point act.
inline Vec horizontal_flow_point(const KernelSystem& K, const FlowTrace& tr, const Vec& q) {
    Vec y = q;
    for (size_t s = 0; s < tr.increments.size(); ++s)
        y = flowdetail::horizontal_step(K, tr.base.points[s], tr.increments[s], tr.dt, y);
    return y;
}

/// Horizontal flow trace of a configuration (used by tests and the CLI).
inline std::vector<MultiPointState> horizontal_flow(const KernelSystem& K, const FlowTrace& tr,
                                                    const MultiPointState& init,
                                                    int store_every = 1) {
    std::vector<MultiPointState> out;
    MultiPointState cur = init;
    out.push_back(cur);
    std::vector<Vec> ys = init.points;
    for (size_t s = 0; s < tr.increments.size(); ++s) {
        for (auto& y : ys)
            y = flowdetail::horizontal_step(K, tr.base.points[s], tr.increments[s], tr.dt, y);
        if ((s + 1) % static_cast<size_t>(store_every) == 0 || s + 1 == tr.increments.size()) {
            cur.points = ys;
            cur.time = tr.base.times[s + 1];
            out.push_back(cur);
        }
    }
    return out;
}

/// Damped Newton inversion of w -> horizontal_flow_point(w) = target; the
/// pseudo-inverse step keeps constrained (retracted) charts well posed.
inline Vec invert_horizontal_flow(const KernelSystem& K, const FlowTrace& tr, const Vec& target,
                                  const Vec& seed, double tol = 1e-8, int max_iter = 50) {
    Vec w = K.X.space.retract(seed);
    const int d = static_cast<int>(seed.size());
    double res = (horizontal_flow_point(K, tr, w) - target).norm();
    for (int it = 0; it < max_iter; ++it) {
        if (res < tol) return w;
        const Vec F = horizontal_flow_point(K, tr, w) - target;
        Mat J(d, d);
        for (int c = 0; c < d; ++c) {
            const double h = fd::step1(w[c]);
            Vec wp = K.X.space.retract([&] { Vec t = w; t[c] += h; return t; }());
            Vec wm = K.X.space.retract([&] { Vec t = w; t[c] -= h; return t; }());
            J.col(c) = (horizontal_flow_point(K, tr, wp) - horizontal_flow_point(K, tr, wm)) /
                       (2.0 * h);
        }
        Vec step = pinv(J, 1e-10) * F;
        double damping = 1.0;
        for (int half = 0; half < 30; ++half) {
            const Vec cand = K.X.space.retract(w - damping * step);
            const double r2 = (horizontal_flow_point(K, tr, cand) - target).norm();
            if (r2 < res) {
                w = cand;
                res = r2;
                break;
            }
            damping *= 0.5;
            if (half == 29) return w;  // stalled; caller checks the residual
        }
    }
    if (res >= tol) throw NewtonDiverged("horizontal-flow inversion did not converge");
    return w;
}

struct SkewProductReport {
    Report fixed_point;      // g_t(x0) = x0
    Report reconstruction;   // xi_t(q) = x~_t(g_t(q))
    std::vector<Vec> g_values;
};

/// Skew-product check: run the full and horizontal flows on the same driver,
/// solve x~_T(w) = xi_T(q) for each probe and verify the decomposition.
inline SkewProductReport skew_product_check(const KernelSystem& K, const Vec& x0,
                                            const std::vector<Vec>& probes, double T,
                                            const NoiseDriver& driver, double tol = 1e-6) {
    const FlowTrace tr = simulate_base(K, x0, T, driver);
    SkewProductReport rep;
    rep.fixed_point.check = "skew_fixed_point";
    rep.fixed_point.tolerance = tol;
    rep.reconstruction.check = "skew_reconstruction";
    rep.reconstruction.tolerance = tol;

    // (a) the base point is fixed by the fiber motion
    {
        const Vec target = full_flow_point(K, tr, x0);
        const Vec g0 = invert_horizontal_flow(K, tr, target, x0);
        rep.fixed_point.residual_max = (g0 - x0).norm();
        rep.fixed_point.samples = 1;
        rep.fixed_point.pass = rep.fixed_point.residual_max < tol;
    }
    // (b) reconstruction for every probe
    double worst = 0.0;
    for (const Vec& q : probes) {
        const Vec target = full_flow_point(K, tr, q);
        const Vec g = invert_horizontal_flow(K, tr, target, q);
        rep.g_values.push_back(g);
        worst = std::max(worst, (horizontal_flow_point(K, tr, g) - target).norm());
    }
    rep.reconstruction.residual_max = worst;
    rep.reconstruction.samples = static_cast<int>(probes.size());
    rep.reconstruction.pass = worst < tol;
    return rep;
}

/// Correlation diagnostic for the independence claim: over seeds, the sample
/// correlation between fiber displacements and base displacements should
/// vanish within 2.6/sqrt(seeds) for most components.
inline Report skew_independence_check(const KernelSystem& K, const Vec& x0, const Vec& probe,
                                      double T, std::uint64_t seed0, int seeds, double dt) {
    Report rep;
    rep.check = "skew_independence";
    const int d = static_cast<int>(x0.size());
    Mat G(seeds, d), Xd(seeds, d);
    for (int s = 0; s < seeds; ++s) {
        NoiseDriver drv{seed0 + static_cast<std::uint64_t>(s), 0, K.X.noise_dim(), dt};
        const FlowTrace tr = simulate_base(K, x0, T, drv);
        const Vec target = full_flow_point(K, tr, probe);
        const Vec g = invert_horizontal_flow(K, tr, target, probe);
        G.row(s) = (g - probe).transpose();
        Xd.row(s) = (tr.base.points.back() - x0).transpose();
    }
    auto center = [&](Mat& M) {
        for (int c = 0; c < M.cols(); ++c) M.col(c).array() -= M.col(c).mean();
    };
    center(G);
    center(Xd);
    int total = 0, passed = 0;
    double worst = 0.0;
    const double crit = 2.6 / std::sqrt(static_cast<double>(seeds));
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            const double denom = G.col(a).norm() * Xd.col(b).norm();
            if (denom < 1e-14) continue;
            const double corr = G.col(a).dot(Xd.col(b)) / denom;
            worst = std::max(worst, std::abs(corr));
            ++total;
            if (std::abs(corr) < crit) ++passed;
        }
    rep.tolerance = crit;
    rep.residual_max = worst;
    rep.samples = total;
    rep.pass = passed * 10 >= total * 9;  // 90% of component pairs
    rep.details = {{"passed", passed}, {"total", total}};
    return rep;
}

/// Equivariant commutation criterion: the vertical coefficients are constant
/// along horizontal curves, i.e. A^H applied to every alpha^{ij} and beta^k
/// vanishes at the samples.
inline Report coefficient_constancy_check(
    const Decomposition& decomp, const std::function<Mat(const Vec&)>& alpha_field,
    const std::function<Vec(const Vec&)>& beta_field, const std::vector<Vec>& samples,
    double threshold = 1e-4) {
    Report rep;
    rep.check = "coefficient_constancy";
    rep.tolerance = threshold;
    double worst = 0.0;
    const long k = alpha_field(samples.front()).rows();
    for (const Vec& u : samples) {
        for (long i = 0; i < k; ++i) {
            for (long j = 0; j < k; ++j) {
                ScalarField entry{[&alpha_field, i, j](const Vec& w) {
                    return alpha_field(w)(i, j);
                }};
                worst = std::max(worst, std::abs(apply(decomp.AH, entry, u)));
            }
            ScalarField bentry{[&beta_field, i](const Vec& w) { return beta_field(w)[i]; }};
            worst = std::max(worst, std::abs(apply(decomp.AH, bentry, u)));
        }
    }
    rep.samples = static_cast<int>(samples.size());
    rep.residual_max = worst;
    rep.pass = worst < threshold;
    return rep;
}

/// Commutator residual r(u) = A^H(B^V f)(u) - B^V(A^H f)(u) over a battery,
/// inner applications analytic in f, outer by finite differences.
inline Report commutator_check(const Decomposition& decomp, const std::vector<Vec>& samples,
                               double threshold = 1e-4) {
    Report rep;
    rep.check = "commutator";
    rep.tolerance = threshold;
    const auto battery = test_battery(decomp.AH.space.dim);
    double worst = 0.0;
    for (const Vec& u : samples) {
        for (const auto& f : battery) {
            ScalarField bvf{[&](const Vec& w) { return apply(decomp.BV, f, w); }};
            ScalarField ahf{[&](const Vec& w) { return apply(decomp.AH, f, w); }};
            const double r = apply(decomp.AH, bvf, u) - apply(decomp.BV, ahf, u);
            worst = std::max(worst, std::abs(r));
        }
    }
    rep.samples = static_cast<int>(samples.size());
    rep.residual_max = worst;
    rep.pass = worst < threshold;
    return rep;
}

}  // namespace geomfilter

#endif  // GEOMFILTER_FLOWS_HPP
