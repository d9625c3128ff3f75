#ifndef GEOMFILTER_SIMULATE_HPP
#define GEOMFILTER_SIMULATE_HPP

#include "geomfilter/operators.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace geomfilter {

namespace rngdetail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix4(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    std::uint64_t h = splitmix64(a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    h = splitmix64(h ^ d);
    return h;
}

inline double to_unit(std::uint64_t u) {  // (0,1]
    return (static_cast<double>(u >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace rngdetail

/// Counter-based Gaussian stream: identical (seed, stream, step, component)
/// always reproduces the identical increment, independent of scheduling.
struct NoiseDriver {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    int dimension = 1;
    double dt = 1e-3;

    double gaussian(std::uint64_t step, std::uint64_t component) const {
        const std::uint64_t u1 = rngdetail::mix4(seed, stream, step, 2 * component);
        const std::uint64_t u2 = rngdetail::mix4(seed, stream, step, 2 * component + 1);
        const double a = rngdetail::to_unit(u1);
        const double b = rngdetail::to_unit(u2);
        return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * M_PI * b);
    }

    /// Brownian increment over one step: sqrt(dt) * N(0, I_m).
    Vec increment(std::uint64_t step) const {
        Vec dw(dimension);
        const double s = std::sqrt(dt);
        for (int k = 0; k < dimension; ++k)
            dw[k] = s * gaussian(step, static_cast<std::uint64_t>(k));
        return dw;
    }

    NoiseDriver with_stream(std::uint64_t s) const {
        NoiseDriver d = *this;
        d.stream = s;
        return d;
    }
};

// stream-id ranges keeping particle, observation, vertical and resampling
// noise disjoint
namespace streams {
constexpr std::uint64_t kParticleBase = 0;
constexpr std::uint64_t kObservation = 1ULL << 32;
constexpr std::uint64_t kVerticalBase = 1ULL << 33;
constexpr std::uint64_t kResampling = 1ULL << 34;
constexpr std::uint64_t kBridge = 1ULL << 35;
}  // namespace streams

/// Symmetric PSD square root by eigendecomposition; eigenvalues below zero are
/// clamped, values below -1e-10 reject the input.
inline Mat sqrt_psd(const Mat& S) {
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, S.cwiseAbs().maxCoeff()))
        throw NotPSD("matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
    const Vec& ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
        throw NotPSD("matrix has an eigenvalue below -1e-10");
    Vec root = ev.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

enum class Scheme { ItoEuler, StratonovichHeun };

/// One Euler-Maruyama step for chart coefficients (a, b).
inline Vec ito_euler_step(const DiffusionOperator& L, const Vec& x, const Vec& dw, double dt) {
    const Mat s = sqrt_psd(L.a(x));
    return L.space.retract(x + L.b(x) * dt + s * dw);
}

/// One Heun predictor-corrector step for Stratonovich data (X, X0).
inline Vec stratonovich_heun_step(const HormanderForm& H, const Vec& x, const Vec& dw, double dt) {
    const Mat X = H.matrix(x);
    const Vec drift = H.X0.eval ? H.X0(x) : Vec::Zero(H.space.dim);
    const Vec pred = H.space.retract(x + X * dw + drift * dt);
    const Mat X2 = H.matrix(pred);
    const Vec drift2 = H.X0.eval ? H.X0(pred) : Vec::Zero(H.space.dim);
    return H.space.retract(x + 0.5 * (X + X2) * dw + 0.5 * (drift + drift2) * dt);
}

struct IntegrateOptions {
    double norm_cap = 1e8;
    int store_every = 1;  // thin the stored path
};

/// Integrate an SDE from x0 to T. Ito mode accepts chart coefficients (with
/// diffusion sqrt_psd(a)) or a Hoermander form (diffusion X, drift converted);
/// Stratonovich mode requires the Hoermander form.
inline PointPath integrate(const HormanderForm& H, const Vec& x0, double T,
                           const NoiseDriver& driver, Scheme scheme,
                           const IntegrateOptions& opt = {}) {
    const auto steps = static_cast<std::uint64_t>(std::llround(T / driver.dt));
    PointPath path;
    path.times.push_back(0.0);
    path.points.push_back(x0);
    Vec x = x0;
    DiffusionOperator L;  // Ito coefficients, built once if needed
    if (scheme == Scheme::ItoEuler) L = from_hormander(H);
    for (std::uint64_t s = 0; s < steps; ++s) {
        const Vec dw = driver.increment(s);
        x = scheme == Scheme::ItoEuler
                ? L.space.retract(x + L.b(x) * driver.dt + H.matrix(x) * dw)
                : stratonovich_heun_step(H, x, dw, driver.dt);
        if (!x.allFinite()) throw NumericalDomainError("non-finite state during integration");
        if (x.norm() > opt.norm_cap) throw Explosion("trajectory exceeded the norm cap");
        if ((s + 1) % static_cast<std::uint64_t>(opt.store_every) == 0 || s + 1 == steps) {
            path.times.push_back(static_cast<double>(s + 1) * driver.dt);
            path.points.push_back(x);
        }
    }
    return path;
}

inline PointPath integrate(const DiffusionOperator& L, const Vec& x0, double T,
                           const NoiseDriver& driver, const IntegrateOptions& opt = {}) {
    const auto steps = static_cast<std::uint64_t>(std::llround(T / driver.dt));
    PointPath path;
    path.times.push_back(0.0);
    path.points.push_back(x0);
    Vec x = x0;
    for (std::uint64_t s = 0; s < steps; ++s) {
        x = ito_euler_step(L, x, driver.increment(s), driver.dt);
        if (!x.allFinite()) throw NumericalDomainError("non-finite state during integration");
        if (x.norm() > opt.norm_cap) throw Explosion("trajectory exceeded the norm cap");
        if ((s + 1) % static_cast<std::uint64_t>(opt.store_every) == 0 || s + 1 == steps) {
            path.times.push_back(static_cast<double>(s + 1) * driver.dt);
            path.points.push_back(x);
        }
    }
    return path;
}

/// Exponential martingale state: Z = exp(M - bracket/2).
struct GirsanovWeight {
    double M = 0.0;
    double bracket = 0.0;
    double Z() const { return std::exp(M - 0.5 * bracket); }
};

/// Accumulate the change-of-measure weight along a path driven by known
/// increments: M += b#(X dB), bracket += 2 b# sigma b# dt. The precondition
/// 2 sigma(b#) = b is checked against the supplied drift field when given.
inline std::vector<GirsanovWeight> girsanov_weight(
    const HormanderForm& H, const PointPath& path, const std::vector<Vec>& increments,
    const OneForm& bsharp, const VectorField* drift_b = nullptr, double check_tol = 1e-6) {
    path.validate();
    if (increments.size() + 1 != path.size())
        throw NumericalDomainError("need one driver increment per path step");
    std::vector<GirsanovWeight> trace;
    trace.reserve(path.size());
    GirsanovWeight w;
    trace.push_back(w);
    for (size_t k = 0; k + 1 < path.size(); ++k) {
        const Vec& x = path.points[k];
        const double dt = path.times[k + 1] - path.times[k];
        const Vec bs = bsharp.phi(x);
        const Mat X = H.matrix(x);
        const Mat sigma = 0.5 * X * X.transpose();
        if (drift_b) {
            const Vec b = (*drift_b)(x);
            if ((2.0 * sigma * bs - b).norm() > check_tol * std::max(1.0, b.norm()))
                throw BsharpMismatch("2 sigma(b#) != b along the path");
        }
        w.M += bs.dot(X * increments[k]);
        w.bracket += 2.0 * bs.dot(sigma * bs) * dt;
        trace.push_back(w);
    }
    return trace;
}

/// Run fn(i) for i in [0, n) over a small thread pool. Results must be written
/// to disjoint slots; the driver contract keeps everything reproducible
/// independent of scheduling.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

inline int default_threads() {
    if (const char* env = std::getenv("GEOMFILTER_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace geomfilter

#endif  // GEOMFILTER_SIMULATE_HPP
