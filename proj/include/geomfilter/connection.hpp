#ifndef GEOMFILTER_CONNECTION_HPP
#define GEOMFILTER_CONNECTION_HPP

#include "geomfilter/operators.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace geomfilter {

/// Semi-connection induced by an intertwined pair: the horizontal lift
/// h_u : E_{p(u)} -> T_uN with h_u(v) = sigma^B (Tp)^* alpha, alpha the
/// minimal-norm solution of sigma^A alpha = v.
struct SemiConnection {
    DiffusionOperator B;
    DiffusionOperator A;
    SmoothMap p;
    int rank = 0;

    /// Matrix representative of h_u (applies to vectors already in E).
    Mat lift_matrix(const Vec& u) const {
        const Vec x = p.eval(u);
        const Mat Tp = jacobian(p, u);
        return symbol_at(B, u) * Tp.transpose() * pinv(symbol_at(A, x));
    }

    /// Projector onto E_x = Image sigma^A(x).
    Mat base_projector(const Vec& x) const { return image_projector(symbol_at(A, x)); }
};

inline SemiConnection make_semi_connection(const DiffusionOperator& B, const DiffusionOperator& A,
                                           const SmoothMap& p, const Vec& probe) {
    SemiConnection conn{B, A, p, 0};
    conn.rank = symbol_rank(symbol_at(A, p.eval(probe)));
    return conn;
}

inline Vec horizontal_lift(const SemiConnection& conn, const Vec& u, const Vec& v,
                           double tol = 1e-8) {
    const Vec x = conn.p.eval(u);
    const Mat P = conn.base_projector(x);
    if ((v - P * v).norm() > tol * std::max(1.0, v.norm()))
        throw VNotInE("vector is not in the image of the base symbol");
    return conn.lift_matrix(u) * v;
}

/// Horizontal lift via the factorisation route: h_u = Xt(u) l_u Y(p(u)) with
/// l_u = Y(x) X(x) in the p-related case and ker l_u = ker X(x) in general.
inline Mat lift_via_factorization(const HormanderForm& Xt, const HormanderForm& X,
                                  const SmoothMap& p, const Vec& u, double tol = 1e-6) {
    const Vec x = p.eval(u);
    const Mat Xu = Xt.matrix(u);
    const Mat Xx = X.matrix(x);
    const Mat Tp = jacobian(p, u);

    bool p_related = Xt.noise_dim() == X.noise_dim();
    if (p_related) {
        const double mismatch = (Tp * Xu - Xx).cwiseAbs().maxCoeff();
        if (mismatch > tol)
            throw FactorizationMismatch("Tp o Xt != X o p at the requested point (residual " +
                                        std::to_string(mismatch) + ")");
    }
    const Mat Y = pinv(Xx);
    Mat ell;
    if (p_related) {
        ell = Y * Xx;  // projection onto ker(X)^perp
    } else {
        ell = Xu.transpose() * Tp.transpose() * pinv(Xx.transpose());
        const double mismatch = (Tp * Xu * ell - Xx * (Y * Xx)).cwiseAbs().maxCoeff();
        if (mismatch > tol) throw FactorizationMismatch("factorisation diagram does not close");
    }
    return Xu * ell * Y;
}

/// B = A^H + B^V with A^H the horizontal lift of A and B^V vertical.
struct Decomposition {
    DiffusionOperator AH;
    DiffusionOperator BV;
    SemiConnection conn;
};

namespace detail {

/// Columns of sqrt(2 sigma^A): a Hoermander square root of the base symbol.
/// Smooth in x wherever the rank is constant.
inline Mat base_sqrt_fields(const DiffusionOperator& A, const Vec& x) {
    Eigen::SelfAdjointEigenSolver<Mat> es(A.a(x));
    Mat X = Mat::Zero(A.space.dim, A.space.dim);
    const double cutoff = 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
    for (long k = 0; k < es.eigenvalues().size(); ++k)
        if (es.eigenvalues()[k] > cutoff)
            X.col(k) = std::sqrt(es.eigenvalues()[k]) * es.eigenvectors().col(k);
    return X;  // a(x) = X X^T
}

/// Hoermander drift of A in the chart: X0 = b - 1/2 sum_j (dX^j) X^j where the
/// field correction is differentiated along on-manifold curves.
inline Vec hormander_drift(const DiffusionOperator& A, const Vec& x) {
    Vec corr = Vec::Zero(A.space.dim);
    const Mat X0cols = base_sqrt_fields(A, x);
    for (int j = 0; j < A.space.dim; ++j) {
        const Vec Xj = X0cols.col(j);
        if (Xj.norm() < 1e-14) continue;
        auto field = [&A, j](const Vec& y) -> Vec { return base_sqrt_fields(A, y).col(j); };
        corr += 0.5 * directional_on_chart(A.space, field, x, Xj);
    }
    return A.b(x) - corr;
}

}  // namespace detail

/// Decompose B over A through p. sigma^{A^H}(u) = h_u sigma^A h_u^*; the A^H
/// drift comes from lifting a Hoermander form of A field-by-field; B^V is the
/// coefficient-wise remainder.
inline Decomposition decompose(const DiffusionOperator& B, const DiffusionOperator& A,
                               const SmoothMap& p, const std::vector<Vec>& base_samples,
                               const std::vector<Vec>& total_samples) {
    {
        const Report coh = cohesive_check(A, base_samples);
        if (!coh.pass) throw NotCohesive("base operator failed the cohesiveness check");
        const Report over = is_over(B, A, p, total_samples);
        if (!over.pass) throw NotIntertwined("operators are not intertwined by p");
    }
    SemiConnection conn = make_semi_connection(B, A, p, total_samples.front());

    MatrixField aAH{[conn](const Vec& u) -> Mat {
        const Mat h = conn.lift_matrix(u);
        return h * conn.A.a(conn.p.eval(u)) * h.transpose();
    }};
    VectorField bAH{[conn](const Vec& u) -> Vec {
        const Vec x = conn.p.eval(u);
        // lifted Hoermander drift
        Vec out = conn.lift_matrix(u) * detail::hormander_drift(conn.A, x);
        // Ito correction of the lifted diffusion fields
        const Mat Xx = detail::base_sqrt_fields(conn.A, x);
        for (int j = 0; j < Xx.cols(); ++j) {
            if (Xx.col(j).norm() < 1e-14) continue;
            auto lifted = [&conn, j](const Vec& w) -> Vec {
                return conn.lift_matrix(w) *
                       detail::base_sqrt_fields(conn.A, conn.p.eval(w)).col(j);
            };
            const Vec Xtilde = conn.lift_matrix(u) * Xx.col(j);
            out += 0.5 * directional_on_chart(conn.B.space, lifted, u, Xtilde);
        }
        return out;
    }};
    DiffusionOperator AH{B.space, aAH, bAH};
    DiffusionOperator BV{B.space,
                         MatrixField{[B, aAH](const Vec& u) -> Mat { return B.a(u) - aAH(u); }},
                         VectorField{[B, bAH](const Vec& u) -> Vec { return B.b(u) - bAH(u); }}};
    return Decomposition{std::move(AH), std::move(BV), std::move(conn)};
}

enum class LiftMode { Ode, Stratonovich };

/// Horizontal lift of a sampled base path: integrates du = h_u(dsigma).
/// Ode mode: RK4 on the finite-difference velocity of the samples.
/// Stratonovich mode: Heun (midpoint) rule on the increments.
inline PointPath lift_path(const SemiConnection& conn, const PointPath& sigma, const Vec& u0,
                           LiftMode mode, double leave_tol = 1e-6, double norm_cap = 1e8) {
    sigma.validate();
    const Vec x0 = conn.p.eval(u0);
    if ((conn.A.space.wrap_deltas(x0 - sigma.points.front())).norm() > 1e-8)
        throw NotAboveStart("u0 does not lie above sigma(0)");

    PointPath out;
    out.times = sigma.times;
    out.points.reserve(sigma.size());
    out.points.push_back(u0);
    Vec u = u0;

    auto check_in_E = [&](const Vec& x, const Vec& v) {
        const Mat P = conn.base_projector(x);
        const double r = (v - P * v).norm();
        if (r > leave_tol * std::max(1.0, v.norm()))
            throw PathLeavesE("path velocity leaves Image sigma^A (residual " + std::to_string(r) +
                              ")");
    };

    const size_t n = sigma.size();
    if (mode == LiftMode::Ode) {
        // sampled velocities by central differences, endpoints one-sided
        std::vector<Vec> vel(n);
        for (size_t k = 0; k < n; ++k) {
            const size_t kp = std::min(k + 1, n - 1), km = k > 0 ? k - 1 : 0;
            vel[k] = conn.A.space.wrap_deltas(sigma.points[kp] - sigma.points[km]) /
                     (sigma.times[kp] - sigma.times[km]);
        }
        auto velocity = [&](double t) -> Vec {
            if (t <= sigma.times.front()) return vel.front();
            if (t >= sigma.times.back()) return vel.back();
            const auto it = std::upper_bound(sigma.times.begin(), sigma.times.end(), t);
            const size_t k = static_cast<size_t>(it - sigma.times.begin());
            const double w = (t - sigma.times[k - 1]) / (sigma.times[k] - sigma.times[k - 1]);
            return (1.0 - w) * vel[k - 1] + w * vel[k];
        };
        for (size_t k = 0; k + 1 < n; ++k) {
            const double t = sigma.times[k];
            const double dt = sigma.times[k + 1] - t;
            check_in_E(conn.p.eval(u), velocity(t));
            auto rhs = [&](const Vec& w, double s) -> Vec {
                return conn.lift_matrix(w) * velocity(s);
            };
            const Vec k1 = rhs(u, t);
            const Vec k2 = rhs(conn.B.space.retract(u + 0.5 * dt * k1), t + 0.5 * dt);
            const Vec k3 = rhs(conn.B.space.retract(u + 0.5 * dt * k2), t + 0.5 * dt);
            const Vec k4 = rhs(conn.B.space.retract(u + dt * k3), t + dt);
            u = conn.B.space.retract(u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
            if (u.norm() > norm_cap) throw Explosion("lifted path exceeded the norm cap");
            out.points.push_back(u);
        }
    } else {
        for (size_t k = 0; k + 1 < n; ++k) {
            const Vec dsig = conn.A.space.wrap_deltas(sigma.points[k + 1] - sigma.points[k]);
            check_in_E(conn.p.eval(u), dsig);
            const Vec upred = conn.B.space.retract(u + conn.lift_matrix(u) * dsig);
            u = conn.B.space.retract(
                u + 0.5 * (conn.lift_matrix(u) + conn.lift_matrix(upred)) * dsig);
            if (u.norm() > norm_cap) throw Explosion("lifted path exceeded the norm cap");
            out.points.push_back(u);
        }
    }
    return out;
}

/// Result of the descends-cohesively reduction: the drift defect b along p and
/// its horizontal lift.
struct DescendData {
    std::function<Vec(const Vec&)> b;   // u -> b(u) in T_{p(u)}M
    std::function<Vec(const Vec&)> bH;  // u -> horizontal field on N
    Report verification;
};

/// Recover the drift defect of B relative to A_choice from coordinate
/// functions, check it lies in E, lift it, and verify B - L_{bH} is over
/// A_choice on the battery.
inline DescendData descends(const DiffusionOperator& B, const SmoothMap& p,
                            const DiffusionOperator& A_choice,
                            const std::vector<Vec>& total_samples, double tol = 1e-8) {
    SemiConnection conn = make_semi_connection(B, A_choice, p, total_samples.front());
    const int m = A_choice.space.dim;

    auto defect = [B, p, A_choice, m](const Vec& u) -> Vec {
        const Vec x = p.eval(u);
        Vec out(m);
        for (int l = 0; l < m; ++l) {
            std::vector<int> expo(static_cast<size_t>(m), 0);
            expo[static_cast<size_t>(l)] = 1;
            const ScalarField coord = monomial_field(m, expo);
            out[l] = apply(B, pullback(coord, p), u) - apply(A_choice, coord, x);
        }
        return out;
    };
    auto lifted = [conn, defect](const Vec& u) -> Vec { return conn.lift_matrix(u) * defect(u); };

    // b(u) must take values in E
    for (const Vec& u : total_samples) {
        const Vec bu = defect(u);
        const Mat P = conn.base_projector(p.eval(u));
        if ((bu - P * bu).norm() > std::max(1e-6, tol * bu.norm()))
            throw DriftDefectNotInE("drift defect leaves Image sigma^A");
    }

    // verify B - L_{bH} lies over A_choice
    DiffusionOperator Bred{B.space, B.a,
                           VectorField{[B, lifted](const Vec& u) -> Vec {
                               return B.b(u) - lifted(u);
                           }}};
    Report rep = is_over(Bred, A_choice, p, total_samples);
    rep.check = "descends";
    return DescendData{defect, lifted, rep};
}

}  // namespace geomfilter

#endif  // GEOMFILTER_CONNECTION_HPP
