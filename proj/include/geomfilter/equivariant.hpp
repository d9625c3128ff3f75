#ifndef GEOMFILTER_EQUIVARIANT_HPP
#define GEOMFILTER_EQUIVARIANT_HPP

#include "geomfilter/connection.hpp"
#include "geomfilter/weitzenboeck.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace geomfilter {

/// Matrix Lie group with a chosen Lie-algebra basis. Abelian translation
/// groups (R^k, S^1) are carried along with vector "matrices" and additive
/// composition.
struct MatrixLieGroup {
    std::string name;
    bool additive = false;
    int matrix_size = 0;  // n for matrix groups, k for additive ones
    std::vector<Mat> basis;

    int dim() const { return static_cast<int>(basis.size()); }

    Mat exponential(const Mat& X) const { return additive ? X : X.exp().eval(); }
    Mat compose(const Mat& g, const Mat& h) const { return additive ? (g + h).eval() : (g * h).eval(); }
    Mat identity_element() const {
        if (additive) return Mat::Zero(matrix_size, 1);
        return Mat::Identity(matrix_size, matrix_size);
    }

    /// Coefficients of Ad(g) A_i = g A_i g^{-1} in the basis, solved through
    /// the Gram matrix (exact for orthonormal bases).
    Mat adjoint_matrix(const Mat& g) const {
        const int k = dim();
        if (additive) return Mat::Identity(k, k);
        auto flat = [](const Mat& A) -> Vec {
            return Eigen::Map<const Vec>(A.data(), A.size());
        };
        Mat G(k, k), rhs(k, k);
        const Mat ginv = g.inverse();
        for (int i = 0; i < k; ++i) {
            const Mat adi = g * basis[static_cast<size_t>(i)] * ginv;
            for (int j = 0; j < k; ++j) {
                G(j, i) = flat(basis[static_cast<size_t>(j)]).dot(flat(basis[static_cast<size_t>(i)]));
                rhs(j, i) = flat(basis[static_cast<size_t>(j)]).dot(flat(adi));
            }
        }
        return G.ldlt().solve(rhs);
    }

    /// Closure of the basis under brackets: residual of [A_i,A_j] off the span.
    Report closure_check() const {
        Report rep;
        rep.check = "lie_closure";
        rep.tolerance = 1e-10;
        double worst = 0.0;
        if (!additive) {
            const int k = dim();
            Mat span(basis[0].size(), k);
            for (int i = 0; i < k; ++i)
                span.col(i) = Eigen::Map<const Vec>(basis[static_cast<size_t>(i)].data(),
                                                    basis[static_cast<size_t>(i)].size());
            const Mat proj = span * pinv(span);
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    const Mat br = basis[static_cast<size_t>(i)] * basis[static_cast<size_t>(j)] -
                                   basis[static_cast<size_t>(j)] * basis[static_cast<size_t>(i)];
                    const Vec v = Eigen::Map<const Vec>(br.data(), br.size());
                    worst = std::max(worst, (v - proj * v).norm());
                }
        }
        rep.residual_max = worst;
        rep.samples = dim() * dim();
        rep.pass = worst < rep.tolerance;
        return rep;
    }
};

inline MatrixLieGroup additive_group(int k, const std::string& name = "translation") {
    MatrixLieGroup g;
    g.name = name;
    g.additive = true;
    g.matrix_size = k;
    for (int i = 0; i < k; ++i) {
        Mat e = Mat::Zero(k, 1);
        e(i, 0) = 1.0;
        g.basis.push_back(e);
    }
    return g;
}

inline MatrixLieGroup circle_group() { return additive_group(1, "S1"); }

inline MatrixLieGroup so_group(int n) {
    MatrixLieGroup g;
    g.name = "SO(" + std::to_string(n) + ")";
    g.matrix_size = n;
    g.basis = so_basis(n);
    return g;
}

inline MatrixLieGroup gl_group(int n) {
    MatrixLieGroup g;
    g.name = "GL(" + std::to_string(n) + ")";
    g.matrix_size = n;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            Mat E = Mat::Zero(n, n);
            E(a, b) = 1.0;
            g.basis.push_back(E);
        }
    return g;
}

/// Local trivialisation of a principal bundle: total chart = base chart x
/// fiber coordinates, right action on the fiber factor, fundamental fields
/// spanning ker Tpi.
struct PrincipalChart {
    ChartSpace total;
    ChartSpace base;
    MatrixLieGroup group;
    int fiber_dim = 0;
    SmoothMap projection;  // total -> base
    std::function<Vec(const Vec&, const Mat&)> act;      // u.g
    std::function<Vec(const Vec&, int)> fundamental;     // A*_i(u)
};

/// Trivial bundle over a flat/periodic base with an additive group acting by
/// translation on the trailing fiber coordinates.
inline PrincipalChart trivial_additive_bundle(const ChartSpace& total, const ChartSpace& base,
                                              const MatrixLieGroup& group) {
    PrincipalChart P;
    P.total = total;
    P.base = base;
    P.group = group;
    P.fiber_dim = group.matrix_size;
    P.projection = coordinate_projection(total, base);
    const int db = base.dim, k = group.matrix_size;
    P.act = [db, k](const Vec& u, const Mat& g) -> Vec {
        Vec out = u;
        out.segment(db, k) += g.col(0);
        return out;
    };
    P.fundamental = [db, dt = total.dim](const Vec&, int i) -> Vec {
        Vec v = Vec::Zero(dt);
        v[db + i] = 1.0;
        return v;
    };
    return P;
}

/// Frame-bundle chart: points are [x; vec(U)] for U a (base.dim x n) frame
/// whose columns span the manifold tangent at x. GL(n) (or a subgroup) acts by
/// right matrix multiplication on the frame factor.
struct FrameBundleChart {
    PrincipalChart chart;
    int n = 0;      // manifold dimension / frame rank
    int base_dim = 0;

    Vec pack(const Vec& x, const Mat& U) const {
        Vec u(base_dim + base_dim * n);
        u.head(base_dim) = x;
        Eigen::Map<Mat>(u.data() + base_dim, base_dim, n) = U;
        return u;
    }
    Vec base_point(const Vec& u) const { return u.head(base_dim); }
    Mat frame(const Vec& u) const {
        return Eigen::Map<const Mat>(u.data() + base_dim, base_dim, n);
    }
};

inline FrameBundleChart frame_bundle(const ChartSpace& base, int manifold_dim,
                                     const MatrixLieGroup& group) {
    FrameBundleChart fb;
    fb.n = manifold_dim;
    fb.base_dim = base.dim;
    const int db = base.dim, n = manifold_dim;
    ChartSpace total("frames(" + base.name + ")", db + db * n);
    if (base.project) {
        auto bproj = base.project;
        total.project = [bproj, db, n](const Vec& u) -> Vec {
            Vec out = u;
            const Vec x = bproj(u.head(db));
            out.head(db) = x;
            // keep frame columns tangent for embedded unit-sphere style bases
            Mat U = Eigen::Map<const Mat>(u.data() + db, db, n);
            U -= x * (x.transpose() * U) / x.squaredNorm();
            Eigen::Map<Mat>(out.data() + db, db, n) = U;
            return out;
        };
    }
    PrincipalChart P;
    P.total = total;
    P.base = base;
    P.group = group;
    P.fiber_dim = db * n;
    P.projection = coordinate_projection(total, base);
    P.act = [db, n](const Vec& u, const Mat& g) -> Vec {
        Vec out = u;
        const Mat U = Eigen::Map<const Mat>(u.data() + db, db, n);
        Eigen::Map<Mat>(out.data() + db, db, n) = U * g;
        return out;
    };
    const auto basis = group.basis;
    P.fundamental = [db, n, basis](const Vec& u, int i) -> Vec {
        Vec v = Vec::Zero(u.size());
        const Mat U = Eigen::Map<const Mat>(u.data() + db, db, n);
        Eigen::Map<Mat>(v.data() + db, db, n) = U * basis[static_cast<size_t>(i)];
        return v;
    };
    fb.chart = std::move(P);
    return fb;
}

/// Connection one-form at u in the fundamental-field frame: the k x dim(total)
/// matrix whose rows are the omega^l. Vanishes on H_u, is delta on the A*_i,
/// and annihilates the orthogonal complement of H + V.
inline Mat connection_form(const SemiConnection& conn, const PrincipalChart& P, const Vec& u,
                           double angle_tol = 1e-6) {
    const Vec x = P.projection.eval(u);
    const Mat symA = symbol_at(conn.A, x);
    Eigen::SelfAdjointEigenSolver<Mat> es(symA);
    const double cutoff = 1e-9 * std::max(1.0, es.eigenvalues().maxCoeff());
    std::vector<long> idx;
    for (long i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i] > cutoff) idx.push_back(i);
    const int r = static_cast<int>(idx.size());
    const int k = P.group.dim();

    const Mat h = conn.lift_matrix(u);
    Mat H(P.total.dim, r);
    for (int c = 0; c < r; ++c) H.col(c) = h * es.eigenvectors().col(idx[static_cast<size_t>(c)]);
    Mat V(P.total.dim, k);
    for (int i = 0; i < k; ++i) V.col(i) = P.fundamental(u, i);

    // principal-angle test between H and V
    const Mat QH = Eigen::HouseholderQR<Mat>(H).householderQ() * Mat::Identity(P.total.dim, r);
    const Mat QV = Eigen::HouseholderQR<Mat>(V).householderQ() * Mat::Identity(P.total.dim, k);
    Eigen::JacobiSVD<Mat> angles(QH.transpose() * QV);
    if (angles.singularValues().size() > 0 && angles.singularValues()[0] > 1.0 - 0.5 * angle_tol * angle_tol)
        throw DegenerateSplit("horizontal and vertical spaces are not transversal");

    Mat W(P.total.dim, r + k);
    W.leftCols(r) = H;
    W.rightCols(k) = V;
    // omega = [0 I_k] W^+ : vanishes on H, identity coefficients on V, zero on
    // the orthogonal complement of H + V
    const Mat Wp = pinv(W);
    return Wp.bottomRows(k);
}

/// alpha/beta coefficient fields of the vertical part of an equivariant B, in
/// the group basis: alpha = omega sigma^B omega^T, beta^l = delta^B(omega^l).
struct VerticalCoefficients {
    Mat alpha;  // k x k
    Vec beta;   // k
};

inline VerticalCoefficients vertical_coefficients(const DiffusionOperator& B,
                                                  const SemiConnection& conn,
                                                  const PrincipalChart& P, const Vec& u) {
    const Mat Pi = connection_form(conn, P, u);
    const Mat sym = symbol_at(B, u);
    VerticalCoefficients out;
    out.alpha = Pi * sym * Pi.transpose();
    const int k = P.group.dim();
    out.beta = Vec(k);
    for (int l = 0; l < k; ++l) {
        OneForm omega_l{B.space, [conn, P, l](const Vec& w) -> Vec {
            return connection_form(conn, P, w).row(l).transpose();
        }};
        out.beta[l] = delta(B, omega_l, u);
    }
    return out;
}

/// Equivariance of the coefficients: alpha(ug) = Ad(g) alpha(u) Ad(g)^T and
/// beta(ug) = Ad(g) beta(u).
inline Report equivariance_check(const std::function<VerticalCoefficients(const Vec&)>& coeffs,
                                 const PrincipalChart& P, const std::vector<Mat>& group_elements,
                                 const std::vector<Vec>& fiber_samples, double tolerance = 1e-8) {
    Report rep;
    rep.check = "equivariance";
    rep.tolerance = tolerance;
    double worst = 0.0;
    int count = 0;
    for (const Vec& u : fiber_samples) {
        const VerticalCoefficients at_u = coeffs(u);
        for (const Mat& g : group_elements) {
            const Vec ug = P.act(u, g);
            const VerticalCoefficients at_ug = coeffs(ug);
            const Mat Ad = P.group.adjoint_matrix(g);
            worst = std::max(worst,
                             (at_ug.alpha - Ad * at_u.alpha * Ad.transpose()).cwiseAbs().maxCoeff());
            worst = std::max(worst, (at_ug.beta - Ad * at_u.beta).cwiseAbs().maxCoeff());
            ++count;
        }
    }
    rep.residual_max = worst;
    rep.samples = count;
    rep.pass = worst < tolerance;
    return rep;
}

// ---------------------------------------------------------------------------
// Derivative flow on the frame bundle and the LeJan-Watanabe connection.
// ---------------------------------------------------------------------------

/// Metric connection on E = span X^j projected from the flat connection:
/// cov_deriv(x, v, U) = X(x) d[y -> Y_y U(y)](v). Analytic when the fields
/// carry Jacobians (constant-rank pseudo-inverse differential), finite
/// differences along on-manifold curves otherwise.
struct LWConnection {
    HormanderForm H;

    bool analytic() const {
        for (const auto& X : H.X)
            if (!X.jac) return false;
        return true;
    }

    /// d(pinv X)(x)[v] for constant-rank X.
    Mat dpinv(const Vec& x, const Vec& v) const {
        const Mat X = H.matrix(x);
        const Mat Xp = pinv(X);
        Mat dX(X.rows(), X.cols());
        for (int j = 0; j < X.cols(); ++j) dX.col(j) = H.X[static_cast<size_t>(j)].jac(x) * v;
        const Mat I_d = Mat::Identity(X.rows(), X.rows());
        const Mat I_m = Mat::Identity(X.cols(), X.cols());
        return -Xp * dX * Xp + Xp * Xp.transpose() * dX.transpose() * (I_d - X * Xp) +
               (I_m - Xp * X) * dX.transpose() * Xp.transpose() * Xp;
    }

    Vec cov_deriv(const Vec& x, const Vec& v, const VectorField& U) const {
        const Mat X = H.matrix(x);
        if (analytic() && U.jac) {
            const Mat Xp = pinv(X);
            const Vec dg = dpinv(x, v) * U.eval(x) + Xp * (U.jac(x) * v);
            return X * dg;
        }
        auto g = [this, &U](const Vec& y) -> Vec { return pinv(H.matrix(y)) * U.eval(y); };
        return X * directional_on_chart(H.space, g, x, v);
    }

    /// Field version y -> cov_deriv(y, B(y), W) packaged for re-differentiation.
    VectorField cov_deriv_field(const VectorField& B, const VectorField& W) const {
        auto self = *this;
        return VectorField{[self, B, W](const Vec& y) -> Vec {
            return self.cov_deriv(y, B.eval(y), W);
        }};
    }

    /// Curvature R(v, w) Z at x, computed from the field extensions
    /// A(y) = X(y) Y_x(v), B-field and Z-field supplied by the caller.
    Vec curvature(const Vec& x, const Vec& v, const VectorField& Bf, const VectorField& Wf) const {
        const Mat Yx = pinv(H.matrix(x));
        const Vec coeffs = Yx * v;
        auto fields = H.X;
        VectorField Af{[fields, coeffs, d = H.space.dim](const Vec& y) -> Vec {
                           Vec out = Vec::Zero(d);
                           for (size_t j = 0; j < fields.size(); ++j)
                               out += coeffs[static_cast<long>(j)] * fields[j].eval(y);
                           return out;
                       },
                       [fields, coeffs, d = H.space.dim](const Vec& y) -> Mat {
                           Mat J = Mat::Zero(d, d);
                           for (size_t j = 0; j < fields.size(); ++j)
                               J += coeffs[static_cast<long>(j)] * jacobian_of(fields[j], y);
                           return J;
                       }};
        const VectorField gradBW = cov_deriv_field(Bf, Wf);
        const VectorField gradAW = cov_deriv_field(Af, Wf);
        // outer covariant derivatives by one finite-difference level over the
        // analytically evaluated inner fields
        auto outer = [this](const Vec& x0, const Vec& dir, const VectorField& F) -> Vec {
            auto g = [this, &F](const Vec& y) -> Vec { return pinv(H.matrix(y)) * F.eval(y); };
            return H.matrix(x0) * directional_on_chart(H.space, g, x0, dir);
        };
        const Vec t1 = outer(x, Af.eval(x), gradBW);
        const Vec t2 = outer(x, Bf.eval(x), gradAW);
        const Vec bracket = jacobian_of(Bf, x) * Af.eval(x) - jacobian_of(Af, x) * Bf.eval(x);
        return t1 - t2 - cov_deriv(x, bracket, Wf);
    }

    /// Ric^#(v) = sum_j R(v, X^j) X^j.
    Vec ricci(const Vec& x, const Vec& v) const {
        Vec out = Vec::Zero(H.space.dim);
        for (const auto& Xj : H.X) out += curvature(x, v, Xj, Xj);
        return out;
    }
};

/// Equivariant diffusion induced on a frame-bundle chart by the derivative
/// flow of a Hoermander-form SDE, with the predicted vertical coefficients.
struct DerivativeFlowSystem {
    HormanderForm base;
    FrameBundleChart bundle;
    HormanderForm lifted;     // (X^j)^{GL} on the total chart
    DiffusionOperator B;      // from_hormander(lifted)
    LWConnection lw;

    /// alpha(u) = 1/2 sum_p (u^{-1} cov_deriv_{u(.)} X^p) (x) (same), as the
    /// coefficient matrix in the gl(n) elementary-matrix basis.
    Mat alpha_coefficients(const Vec& u_total) const {
        const Vec x = bundle.base_point(u_total);
        const Mat U = bundle.frame(u_total);
        const Mat Uinv = pinv(U);
        const int n = bundle.n;
        Mat alpha = Mat::Zero(n * n, n * n);
        for (const auto& Xp : base.X) {
            Mat ap(n, n);
            for (int i = 0; i < n; ++i) ap.col(i) = Uinv * lw.cov_deriv(x, U.col(i), Xp);
            const Vec v = Eigen::Map<const Vec>(ap.data(), ap.size());
            alpha += 0.5 * v * v.transpose();
        }
        return alpha;
    }

    /// beta(u) as an n x n matrix (its action on R^n):
    /// -1/2 sum_p u^{-1} cov_deriv_{cov_deriv_{u(.)} X^p} X^p
    /// -1/2 u^{-1} Ric^#(u(.)) + u^{-1} cov_deriv_{u(.)} X^0.
    Mat beta_matrix(const Vec& u_total) const {
        const Vec x = bundle.base_point(u_total);
        const Mat U = bundle.frame(u_total);
        const Mat Uinv = pinv(U);
        const int n = bundle.n;
        Mat beta = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            Vec acc = Vec::Zero(base.space.dim);
            for (const auto& Xp : base.X) {
                const Vec w = lw.cov_deriv(x, U.col(i), Xp);
                acc -= 0.5 * lw.cov_deriv(x, w, Xp);
            }
            acc -= 0.5 * lw.ricci(x, U.col(i));
            if (base.X0.eval) acc += lw.cov_deriv(x, U.col(i), base.X0);
            beta.col(i) = Uinv * acc;
        }
        return beta;
    }
};

/// Lift of a vector field to the frame bundle chart: (V(x), DV(x) U).
inline VectorField gl_lift(const VectorField& V, const FrameBundleChart& fb) {
    const int db = fb.base_dim, n = fb.n;
    return VectorField{[V, db, n](const Vec& u) -> Vec {
        const Vec x = u.head(db);
        const Mat U = Eigen::Map<const Mat>(u.data() + db, db, n);
        Vec out(u.size());
        out.head(db) = V.eval(x);
        Eigen::Map<Mat>(out.data() + db, db, n) = jacobian_of(V, x) * U;
        return out;
    }};
}

inline DerivativeFlowSystem derivative_flow_system(const HormanderForm& base,
                                                   const FrameBundleChart& bundle,
                                                   const std::vector<Vec>& rank_samples = {}) {
    if (!rank_samples.empty()) {
        int rank0 = -1;
        for (const Vec& x : rank_samples) {
            const Mat X = base.matrix(base.space.retract(x));
            const int r = symbol_rank(X * X.transpose());
            if (rank0 < 0) rank0 = r;
            if (r != rank0)
                throw RankDrop("span of the driving fields changes rank across the samples");
        }
        if (rank0 != bundle.n)
            throw RankDrop("field span rank does not match the frame dimension");
    }
    DerivativeFlowSystem sys{base, bundle, HormanderForm{}, DiffusionOperator{}, LWConnection{base}};
    sys.lifted.space = bundle.chart.total;
    for (const auto& X : base.X) sys.lifted.X.push_back(gl_lift(X, bundle));
    if (base.X0.eval) sys.lifted.X0 = gl_lift(base.X0, bundle);
    sys.B = from_hormander(sys.lifted);
    return sys;
}

/// Coefficient matrix of c * Id (x) Id in the elementary gl(n) basis, for
/// comparisons against alpha_coefficients.
inline Mat id_tensor_id_coefficients(int n, double c) {
    Mat id = Mat::Identity(n, n);
    const Vec v = Eigen::Map<const Vec>(id.data(), id.size());
    return c * v * v.transpose();
}

}  // namespace geomfilter

#endif  // GEOMFILTER_EQUIVARIANT_HPP
