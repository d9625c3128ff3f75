#ifndef GEOMFILTER_CORE_HPP
#define GEOMFILTER_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace geomfilter {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

#define GEOMFILTER_ERROR(Name)                                        \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& what) : Error(#Name, what) {} \
    }

GEOMFILTER_ERROR(NumericalDomainError);
GEOMFILTER_ERROR(VNotInE);
GEOMFILTER_ERROR(FactorizationMismatch);
GEOMFILTER_ERROR(NotCohesive);
GEOMFILTER_ERROR(NotIntertwined);
GEOMFILTER_ERROR(NotAboveStart);
GEOMFILTER_ERROR(PathLeavesE);
GEOMFILTER_ERROR(DriftDefectNotInE);
GEOMFILTER_ERROR(DegenerateSplit);
GEOMFILTER_ERROR(AlphaNotPSD);
GEOMFILTER_ERROR(BadSymmetry);
GEOMFILTER_ERROR(NotScalar);
GEOMFILTER_ERROR(NotPSD);
GEOMFILTER_ERROR(Explosion);
GEOMFILTER_ERROR(BsharpMismatch);
GEOMFILTER_ERROR(DegenerateWeights);
GEOMFILTER_ERROR(NoBridgeSampler);
GEOMFILTER_ERROR(UnknownSystem);
GEOMFILTER_ERROR(NewtonDiverged);
GEOMFILTER_ERROR(RankDrop);

#undef GEOMFILTER_ERROR

/// Coordinate chart hosting a manifold. Periodic coordinates carry their
/// period length (0 = not periodic). Embedded manifolds (spheres) live in an
/// ambient chart and supply `project`, a retraction onto the manifold used
/// whenever derivatives must be sampled along on-manifold curves.
struct ChartSpace {
    std::string name;
    int dim = 0;
    std::vector<double> periods;  // per-coordinate, 0 = non-periodic
    std::function<Vec(const Vec&)> project;  // optional retraction
    // optional embedding into R^m with its derivative (dim columns, full rank)
    std::function<Vec(const Vec&)> embed;
    std::function<Mat(const Vec&)> embed_jacobian;

    ChartSpace() = default;
    ChartSpace(std::string n, int d) : name(std::move(n)), dim(d), periods(d, 0.0) {
        if (d < 1) throw NumericalDomainError("chart dimension must be >= 1");
    }

    bool periodic(int i) const { return periods[static_cast<size_t>(i)] > 0.0; }

    /// Wrap coordinate difference to the nearest representative.
    double wrap_delta(int i, double delta) const {
        const double p = periods[static_cast<size_t>(i)];
        if (p <= 0.0) return delta;
        return delta - p * std::round(delta / p);
    }

    Vec wrap_deltas(const Vec& delta) const {
        Vec out = delta;
        for (int i = 0; i < dim; ++i) out[i] = wrap_delta(i, delta[i]);
        return out;
    }

    Vec retract(const Vec& x) const { return project ? project(x) : x; }
    bool embedded() const { return static_cast<bool>(project); }
};

inline ChartSpace euclidean_chart(const std::string& name, int dim) {
    return ChartSpace(name, dim);
}

inline ChartSpace torus_chart(const std::string& name, int dim, double period = 2.0 * M_PI) {
    ChartSpace c(name, dim);
    for (auto& p : c.periods) p = period;
    return c;
}

/// Ambient chart of S^{n} in R^{n+1} with normalisation as the retraction.
inline ChartSpace sphere_chart(const std::string& name, int n) {
    ChartSpace c(name, n + 1);
    c.project = [](const Vec& x) -> Vec {
        const double r = x.norm();
        if (r < 1e-14) throw NumericalDomainError("cannot retract the origin to the sphere");
        return x / r;
    };
    return c;
}

/// Scalar field with optional analytic derivatives.
struct ScalarField {
    std::function<double(const Vec&)> eval;
    std::function<Vec(const Vec&)> grad;   // optional
    std::function<Mat(const Vec&)> hess;   // optional

    double operator()(const Vec& x) const { return eval(x); }
};

/// Vector field with optional analytic Jacobian.
struct VectorField {
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jac;  // optional, J_ij = d(field_i)/dx_j

    Vec operator()(const Vec& x) const { return eval(x); }
};

struct MatrixField {
    std::function<Mat(const Vec&)> eval;
    Mat operator()(const Vec& x) const { return eval(x); }
};

inline VectorField constant_field(const Vec& v) {
    const long n = v.size();
    return VectorField{[v](const Vec&) { return v; },
                       [n](const Vec&) { return Mat::Zero(n, n); }};
}

namespace fd {

inline double eps() { return std::numeric_limits<double>::epsilon(); }

/// Step for first derivatives: h = cbrt(eps) * max(1, |xi|).
inline double step1(double xi) { return std::cbrt(eps()) * std::max(1.0, std::abs(xi)); }

/// Step for second derivatives: h = eps^(1/4) * max(1, |xi|).
inline double step2(double xi) { return std::pow(eps(), 0.25) * std::max(1.0, std::abs(xi)); }

inline void check_finite(double v, const char* where) {
    if (!std::isfinite(v)) throw NumericalDomainError(std::string("non-finite value in ") + where);
}

inline void check_finite(const Vec& v, const char* where) {
    if (!v.allFinite()) throw NumericalDomainError(std::string("non-finite value in ") + where);
}

}  // namespace fd

/// Central difference of f along coordinate i.
inline double fd_partial(const std::function<double(const Vec&)>& f, const Vec& x, int i) {
    const double h = fd::step1(x[i]);
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(xp), fm = f(xm);
    fd::check_finite(fp, "finite_diff");
    fd::check_finite(fm, "finite_diff");
    return (fp - fm) / (2.0 * h);
}

/// Central second difference, pure (i==j) or mixed.
inline double fd_partial2(const std::function<double(const Vec&)>& f, const Vec& x, int i, int j) {
    if (i == j) {
        const double h = fd::step2(x[i]);
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fp = f(xp), f0 = f(x), fm = f(xm);
        fd::check_finite(fp, "finite_diff");
        fd::check_finite(f0, "finite_diff");
        fd::check_finite(fm, "finite_diff");
        return (fp - 2.0 * f0 + fm) / (h * h);
    }
    const double hi = fd::step2(x[i]);
    const double hj = fd::step2(x[j]);
    Vec xpp = x, xpm = x, xmp = x, xmm = x;
    xpp[i] += hi; xpp[j] += hj;
    xpm[i] += hi; xpm[j] -= hj;
    xmp[i] -= hi; xmp[j] += hj;
    xmm[i] -= hi; xmm[j] -= hj;
    const double v = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * hi * hj);
    fd::check_finite(v, "finite_diff");
    return v;
}

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x) {
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i) g[i] = fd_partial(f, x, i);
    return g;
}

inline Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x) {
    const int n = static_cast<int>(x.size());
    Mat H(n, n);
    for (int i = 0; i < n; ++i) {
        H(i, i) = fd_partial2(f, x, i, i);
        for (int j = i + 1; j < n; ++j) H(i, j) = H(j, i) = fd_partial2(f, x, i, j);
    }
    return H;
}

inline Vec gradient_of(const ScalarField& f, const Vec& x) {
    return f.grad ? f.grad(x) : fd_gradient(f.eval, x);
}

inline Mat hessian_of(const ScalarField& f, const Vec& x) {
    return f.hess ? f.hess(x) : fd_hessian(f.eval, x);
}

inline Mat jacobian_of(const VectorField& X, const Vec& x) {
    if (X.jac) return X.jac(x);
    const Vec fx = X.eval(x);
    Mat J(fx.size(), x.size());
    for (int j = 0; j < x.size(); ++j) {
        const double h = fd::step1(x[j]);
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const Vec fp = X.eval(xp), fm = X.eval(xm);
        fd::check_finite(fp, "jacobian");
        fd::check_finite(fm, "jacobian");
        J.col(j) = (fp - fm) / (2.0 * h);
    }
    return J;
}

/// d/dt F(c(t)) at t=0 for the retraction curve c(t) = retract(x + t v).
/// Falls back to a straight line on flat charts.
inline Vec directional_on_chart(const ChartSpace& chart,
                                const std::function<Vec(const Vec&)>& F, const Vec& x,
                                const Vec& v) {
    const double vn = v.norm();
    if (vn == 0.0) return Vec::Zero(F(x).size());
    const double h = std::cbrt(fd::eps()) * std::max(1.0, x.norm()) / vn;
    const Vec xp = chart.retract(x + h * v);
    const Vec xm = chart.retract(x - h * v);
    const Vec fp = F(xp), fm = F(xm);
    fd::check_finite(fp, "directional derivative");
    fd::check_finite(fm, "directional derivative");
    return (fp - fm) / (2.0 * h);
}

/// Chart-to-chart smooth map. `linear` marks maps with vanishing second
/// derivative (projections, identities), which makes pullbacks of analytic
/// fields exact.
struct SmoothMap {
    ChartSpace domain;
    ChartSpace codomain;
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jacobian_fn;  // optional analytic derivative
    bool linear = false;

    Vec operator()(const Vec& u) const { return eval(u); }
};

/// Jacobian of p at u; analytic if available, else central differences with
/// periodic codomain coordinates unwrapped before differencing.
inline Mat jacobian(const SmoothMap& p, const Vec& u) {
    if (p.jacobian_fn) return p.jacobian_fn(u);
    const Vec f0 = p.eval(u);
    Mat J(p.codomain.dim, p.domain.dim);
    for (int j = 0; j < p.domain.dim; ++j) {
        const double h = fd::step1(u[j]);
        Vec up = u, um = u;
        up[j] += h;
        um[j] -= h;
        const Vec fp = p.eval(up), fm = p.eval(um);
        fd::check_finite(fp, "map jacobian");
        fd::check_finite(fm, "map jacobian");
        J.col(j) = p.codomain.wrap_deltas(fp - fm) / (2.0 * h);
    }
    return J;
}

inline SmoothMap identity_map(const ChartSpace& c) {
    return SmoothMap{c, c, [](const Vec& u) { return u; },
                     [d = c.dim](const Vec&) { return Mat::Identity(d, d); }, true};
}

/// Projection onto the first k coordinates.
inline SmoothMap coordinate_projection(const ChartSpace& dom, const ChartSpace& cod) {
    const int k = cod.dim;
    return SmoothMap{dom, cod, [k](const Vec& u) -> Vec { return u.head(k); },
                     [k, d = dom.dim](const Vec&) -> Mat {
                         Mat J = Mat::Zero(k, d);
                         J.topLeftCorner(k, k).setIdentity();
                         return J;
                     },
                     true};
}

/// Sampled path in a chart.
struct PointPath {
    std::vector<double> times;
    std::vector<Vec> points;

    size_t size() const { return times.size(); }

    void validate() const {
        if (times.size() != points.size() || times.size() < 2)
            throw NumericalDomainError("path needs matching times/points with length >= 2");
        for (size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw NumericalDomainError("path times must be strictly increasing");
    }

    /// Piecewise-linear interpolation.
    Vec at(double t) const {
        if (t <= times.front()) return points.front();
        if (t >= times.back()) return points.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const size_t k = static_cast<size_t>(it - times.begin());
        const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
        return (1.0 - w) * points[k - 1] + w * points[k];
    }
};

// CSV format: header "t,x0,x1,...", '.' decimal separator, one row per sample.

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline void write_path_csv(const PointPath& path, std::ostream& os) {
    path.validate();
    const long d = path.points.front().size();
    os << "t";
    for (long i = 0; i < d; ++i) os << ",x" << i;
    os << "\n";
    for (size_t k = 0; k < path.size(); ++k) {
        os << format_double(path.times[k]);
        for (long i = 0; i < d; ++i) os << "," << format_double(path.points[k][i]);
        os << "\n";
    }
}

inline void write_path_csv(const PointPath& path, const std::string& filename) {
    std::ofstream f(filename);
    if (!f) throw NumericalDomainError("cannot open " + filename + " for writing");
    write_path_csv(path, f);
}

inline PointPath read_path_csv(std::istream& is) {
    PointPath path;
    std::string line;
    if (!std::getline(is, line)) throw NumericalDomainError("empty path CSV");
    if (line.rfind("t", 0) != 0) throw NumericalDomainError("path CSV must start with header t,x0,...");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 2) throw NumericalDomainError("path CSV row too short");
        path.times.push_back(row[0]);
        Vec x(static_cast<long>(row.size()) - 1);
        for (size_t i = 1; i < row.size(); ++i) x[static_cast<long>(i) - 1] = row[i];
        path.points.push_back(std::move(x));
    }
    path.validate();
    return path;
}

inline PointPath read_path_csv(const std::string& filename) {
    std::ifstream f(filename);
    if (!f) throw NumericalDomainError("cannot open " + filename);
    return read_path_csv(f);
}

/// finite_diff operation from the public surface: order 1 partial or order 2
/// (pure/mixed) partial of a scalar field.
inline double finite_diff(const ScalarField& f, const Vec& x, int order, int i, int j = -1) {
    if (order == 1) return fd_partial(f.eval, x, i);
    if (order == 2) return fd_partial2(f.eval, x, i, j < 0 ? i : j);
    throw NumericalDomainError("finite_diff order must be 1 or 2");
}

/// Moore-Penrose pseudo-inverse with a scale-relative rank cutoff.
inline Mat pinv(const Mat& M, double rel_tol = 1e-12) {
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = rel_tol * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
    Vec inv = sv;
    for (long i = 0; i < sv.size(); ++i) inv[i] = sv[i] > cutoff ? 1.0 / sv[i] : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Rank with the module-wide threshold: singular values below
/// 1e-9 * max(largest, 1) count as zero.
inline int symbol_rank(const Mat& M, double rel_tol = 1e-9) {
    Eigen::JacobiSVD<Mat> svd(M);
    const auto& sv = svd.singularValues();
    const double cutoff = rel_tol * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
    int r = 0;
    for (long i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) ++r;
    return r;
}

/// Orthogonal projector onto the column space of a symmetric PSD matrix.
inline Mat image_projector(const Mat& S, double rel_tol = 1e-9) {
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    const Vec& ev = es.eigenvalues();
    const double cutoff = rel_tol * std::max(1.0, ev.size() > 0 ? ev[ev.size() - 1] : 0.0);
    Mat P = Mat::Zero(S.rows(), S.cols());
    for (long i = 0; i < ev.size(); ++i)
        if (ev[i] > cutoff) P += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
    return P;
}

}  // namespace geomfilter

#endif  // GEOMFILTER_CORE_HPP
