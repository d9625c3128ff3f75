#ifndef GEOMFILTER_OPERATORS_HPP
#define GEOMFILTER_OPERATORS_HPP

#include "geomfilter/core.hpp"
#include "geomfilter/report.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace geomfilter {

/// Second-order semi-elliptic operator with no zero-order term, in a chart:
///   L f = 1/2 sum a^{ij} d_i d_j f + sum b^i d_i f,
/// with a(x) symmetric positive semi-definite.
struct DiffusionOperator {
    ChartSpace space;
    MatrixField a;
    VectorField b;
};

/// One-form phi = sum phi_j dx^j with optional analytic derivative
/// dphi(x)_{ij} = d_i phi_j.
struct OneForm {
    ChartSpace space;
    std::function<Vec(const Vec&)> phi;
    std::function<Mat(const Vec&)> dphi;  // optional
};

/// Hoermander data: L = 1/2 sum_j L_{X^j} L_{X^j} + L_{X^0}.
struct HormanderForm {
    ChartSpace space;
    std::vector<VectorField> X;
    VectorField X0;

    int noise_dim() const { return static_cast<int>(X.size()); }

    /// Matrix whose columns are X^j(x).
    Mat matrix(const Vec& x) const {
        Mat M(space.dim, noise_dim());
        for (int j = 0; j < noise_dim(); ++j) M.col(j) = X[static_cast<size_t>(j)](x);
        return M;
    }
};

/// Distribution in TN given by spanning fields or annihilating one-forms.
struct Distribution {
    ChartSpace space;
    std::vector<VectorField> spanning;
    std::vector<OneForm> annihilators;
};

inline double apply(const DiffusionOperator& L, const ScalarField& f, const Vec& x) {
    const Mat A = L.a(x);
    const Mat H = hessian_of(f, x);
    const Vec g = gradient_of(f, x);
    fd::check_finite(g, "apply");
    return 0.5 * (A.array() * H.array()).sum() + L.b(x).dot(g);
}

/// sigma^L = a/2 as a matrix field.
inline MatrixField symbol(const DiffusionOperator& L) {
    return MatrixField{[a = L.a](const Vec& x) -> Mat { return 0.5 * a(x); }};
}

inline Mat symbol_at(const DiffusionOperator& L, const Vec& x) { return 0.5 * L.a(x); }

/// Convert a Hoermander form to chart coefficients:
/// a = sum_j X^j (X^j)^T, b = X^0 + 1/2 sum_j (dX^j) X^j.
inline DiffusionOperator from_hormander(const HormanderForm& H) {
    auto fields = H.X;
    auto drift = H.X0;
    MatrixField a{[fields, d = H.space.dim](const Vec& x) -> Mat {
        Mat A = Mat::Zero(d, d);
        for (const auto& X : fields) {
            const Vec v = X(x);
            A += v * v.transpose();
        }
        return A;
    }};
    VectorField b{[fields, drift, d = H.space.dim](const Vec& x) -> Vec {
        Vec out = drift.eval ? drift(x) : Vec::Zero(d);
        for (const auto& X : fields) out += 0.5 * jacobian_of(X, x) * X(x);
        return out;
    }};
    return DiffusionOperator{H.space, std::move(a), std::move(b)};
}

/// delta^L phi = 1/2 sum a^{ij} d_i phi_j + sum b^i phi_i. The a-contraction
/// only involves derivatives of phi along Image a, so it is evaluated along
/// on-manifold curves when the chart carries a retraction.
inline double delta(const DiffusionOperator& L, const OneForm& phi, const Vec& x) {
    const Mat A = L.a(x);
    double trace_term = 0.0;
    if (phi.dphi) {
        trace_term = 0.5 * (A.array() * phi.dphi(x).array()).sum();
    } else if (!L.space.embedded()) {
        Mat D(L.space.dim, L.space.dim);  // D_{ij} = d_i phi_j
        for (int i = 0; i < L.space.dim; ++i) {
            const double h = fd::step1(x[i]);
            Vec xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            D.row(i) = ((phi.phi(xp) - phi.phi(xm)) / (2.0 * h)).transpose();
        }
        trace_term = 0.5 * (A.array() * D.array()).sum();
    } else {
        // factor a = sum_k X^k (X^k)^T at x and differentiate phi along the
        // tangential directions X^k only
        Eigen::SelfAdjointEigenSolver<Mat> es(A);
        for (long k = 0; k < es.eigenvalues().size(); ++k) {
            const double lam = es.eigenvalues()[k];
            if (lam <= 1e-13 * std::max(1.0, es.eigenvalues().maxCoeff())) continue;
            const Vec Xk = std::sqrt(lam) * es.eigenvectors().col(k);
            const Vec dphi_dir = directional_on_chart(L.space, phi.phi, x, Xk);
            trace_term += 0.5 * dphi_dir.dot(Xk);
        }
    }
    const Vec ph = phi.phi(x);
    fd::check_finite(ph, "delta");
    return trace_term + ph.dot(L.b(x));
}

// ---------------------------------------------------------------------------
// Test battery: coordinate monomials up to degree 3 plus sin/cos of each
// coordinate, with analytic derivatives, evaluated at quasi-random points.
// ---------------------------------------------------------------------------

inline ScalarField monomial_field(int dim, std::vector<int> exponents) {
    auto value = [exponents](const Vec& x) {
        double v = 1.0;
        for (size_t i = 0; i < exponents.size(); ++i) v *= std::pow(x[static_cast<long>(i)], exponents[i]);
        return v;
    };
    auto gradf = [exponents, dim](const Vec& x) -> Vec {
        Vec g = Vec::Zero(dim);
        for (int i = 0; i < dim; ++i) {
            const int e = exponents[static_cast<size_t>(i)];
            if (e == 0) continue;
            double v = e * std::pow(x[i], e - 1);
            for (int j = 0; j < dim; ++j)
                if (j != i) v *= std::pow(x[j], exponents[static_cast<size_t>(j)]);
            g[i] = v;
        }
        return g;
    };
    auto hessf = [exponents, dim](const Vec& x) -> Mat {
        Mat H = Mat::Zero(dim, dim);
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                double v = 1.0;
                for (int k = 0; k < dim; ++k) {
                    int e = exponents[static_cast<size_t>(k)];
                    if (k == i) --e;
                    if (k == j) --e;
                    if (e < 0) { v = 0.0; break; }
                    double c = 1.0;
                    int orig = exponents[static_cast<size_t>(k)];
                    for (int down = orig; down > e; --down) c *= down;
                    v *= c * std::pow(x[k], e);
                }
                H(i, j) = v;
            }
        }
        return H;
    };
    return ScalarField{value, gradf, hessf};
}

inline ScalarField trig_field(int dim, int coord, bool use_sin) {
    auto value = [coord, use_sin](const Vec& x) {
        return use_sin ? std::sin(x[coord]) : std::cos(x[coord]);
    };
    auto gradf = [coord, use_sin, dim](const Vec& x) -> Vec {
        Vec g = Vec::Zero(dim);
        g[coord] = use_sin ? std::cos(x[coord]) : -std::sin(x[coord]);
        return g;
    };
    auto hessf = [coord, use_sin, dim](const Vec& x) -> Mat {
        Mat H = Mat::Zero(dim, dim);
        H(coord, coord) = use_sin ? -std::sin(x[coord]) : -std::cos(x[coord]);
        return H;
    };
    return ScalarField{value, gradf, hessf};
}

/// All coordinate monomials of total degree 1..3 plus sin/cos per coordinate.
inline std::vector<ScalarField> test_battery(int dim) {
    std::vector<ScalarField> fs;
    std::vector<int> expo(static_cast<size_t>(dim), 0);
    std::function<void(int, int)> rec = [&](int i, int remaining) {
        if (i == dim) {
            int total = 0;
            for (int e : expo) total += e;
            if (total >= 1) fs.push_back(monomial_field(dim, expo));
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            expo[static_cast<size_t>(i)] = e;
            rec(i + 1, remaining - e);
        }
        expo[static_cast<size_t>(i)] = 0;
    };
    rec(0, 3);
    for (int i = 0; i < dim; ++i) {
        fs.push_back(trig_field(dim, i, true));
        fs.push_back(trig_field(dim, i, false));
    }
    return fs;
}

/// Halton low-discrepancy points in a box [lo, hi]^dim around a centre.
inline std::vector<Vec> sample_box(const ChartSpace& chart, const Vec& lo, const Vec& hi,
                                   int count) {
    auto halton = [](int index, int base) {
        double f = 1.0, r = 0.0;
        int i = index;
        while (i > 0) {
            f /= base;
            r += f * (i % base);
            i /= base;
        }
        return r;
    };
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61};
    std::vector<Vec> pts;
    pts.reserve(static_cast<size_t>(count));
    for (int k = 0; k < count; ++k) {
        Vec x(chart.dim);
        for (int i = 0; i < chart.dim; ++i) {
            const double u = halton(k + 1, primes[i % 18]);
            x[i] = lo[i] + u * (hi[i] - lo[i]);
        }
        pts.push_back(chart.retract(x));
    }
    return pts;
}

inline ScalarField pullback(const ScalarField& f, const SmoothMap& p) {
    ScalarField out;
    out.eval = [f, p](const Vec& u) { return f.eval(p.eval(u)); };
    if (p.linear && p.jacobian_fn && f.grad) {
        out.grad = [f, p](const Vec& u) -> Vec {
            return p.jacobian_fn(u).transpose() * f.grad(p.eval(u));
        };
        if (f.hess)
            out.hess = [f, p](const Vec& u) -> Mat {
                const Mat J = p.jacobian_fn(u);
                return J.transpose() * f.hess(p.eval(u)) * J;
            };
    }
    return out;
}

/// Intertwining check: B(f o p) = (A f) o p over the battery, plus the symbol
/// diagram Tp sigma^B Tp^* = sigma^A at the same points.
inline Report is_over(const DiffusionOperator& B, const DiffusionOperator& A, const SmoothMap& p,
                      const std::vector<Vec>& samples, double tolerance = 1e-6) {
    Report rep;
    rep.check = "is_over";
    rep.tolerance = tolerance;
    rep.samples = static_cast<int>(samples.size());
    const auto battery = test_battery(A.space.dim);
    double worst_scalar = 0.0, worst_symbol = 0.0;
    for (const Vec& u : samples) {
        const Vec x = p.eval(u);
        for (const auto& f : battery) {
            const double lhs = apply(B, pullback(f, p), u);
            const double rhs = apply(A, f, x);
            worst_scalar = std::max(worst_scalar, std::abs(lhs - rhs));
        }
        const Mat Tp = jacobian(p, u);
        const Mat diagram = Tp * symbol_at(B, u) * Tp.transpose() - symbol_at(A, x);
        worst_symbol = std::max(worst_symbol, diagram.cwiseAbs().maxCoeff());
    }
    rep.residual_max = std::max(worst_scalar, worst_symbol);
    rep.details = {{"scalar_residual", worst_scalar}, {"symbol_residual", worst_symbol}};
    rep.pass = rep.residual_max < tolerance;
    return rep;
}

/// Projectible-symbol check: eta(u) = Tp sigma^B Tp^* must agree within each
/// fibre (fiber_samples groups points with equal p-image).
inline Report projectible_symbol_check(const DiffusionOperator& B, const SmoothMap& p,
                                       const std::vector<std::vector<Vec>>& fiber_samples,
                                       double tolerance = 1e-8) {
    Report rep;
    rep.check = "projectible_symbol";
    rep.tolerance = tolerance;
    double worst = 0.0;
    int count = 0;
    for (const auto& fiber : fiber_samples) {
        if (fiber.empty()) continue;
        Mat eta0;
        for (const Vec& u : fiber) {
            const Mat Tp = jacobian(p, u);
            const Mat eta = Tp * symbol_at(B, u) * Tp.transpose();
            if (eta0.size() == 0)
                eta0 = eta;
            else
                worst = std::max(worst, (eta - eta0).cwiseAbs().maxCoeff());
            ++count;
        }
    }
    rep.samples = count;
    rep.residual_max = worst;
    rep.pass = worst < tolerance;
    return rep;
}

/// Annihilator one-forms of Image sigma(y), built from the eigendecomposition
/// of a(y). Smooth wherever the rank is locally constant.
inline OneForm annihilator_form(const DiffusionOperator& L, int component) {
    return OneForm{L.space, [L, component](const Vec& y) -> Vec {
        const Mat Q = Mat::Identity(L.space.dim, L.space.dim) - image_projector(L.a(y));
        return Q.col(component);
    }};
}

/// Cohesiveness: constant nonzero symbol rank, and the operator is along
/// Image sigma (delta^L kills the annihilator forms of the image). The raw
/// projection residual of the chart drift onto the image is reported as a
/// diagnostic; on embedded charts it includes the curvature correction and is
/// not the pass criterion.
inline Report cohesive_check(const DiffusionOperator& A, const std::vector<Vec>& samples,
                             double tolerance = 1e-8) {
    Report rep;
    rep.check = "cohesive";
    rep.tolerance = tolerance;
    rep.samples = static_cast<int>(samples.size());
    int rank0 = -1;
    bool rank_constant = true;
    double worst_delta = 0.0, worst_drift_proj = 0.0;
    for (const Vec& x : samples) {
        const Mat S = symbol_at(A, x);
        const int r = symbol_rank(S);
        if (rank0 < 0) rank0 = r;
        rank_constant = rank_constant && (r == rank0);
        const Mat P = image_projector(S);
        const Vec b = A.b(x);
        worst_drift_proj = std::max(worst_drift_proj, (b - P * b).norm());
        if (r < A.space.dim) {
            for (int l = 0; l < A.space.dim; ++l) {
                const OneForm phi = annihilator_form(A, l);
                if (phi.phi(x).norm() < 1e-12) continue;
                worst_delta = std::max(worst_delta, std::abs(delta(A, phi, x)));
            }
        }
    }
    rep.residual_max = worst_delta;
    rep.pass = rank_constant && rank0 > 0 && worst_delta < tolerance;
    rep.details = {{"rank", rank0},
                   {"rank_constant", rank_constant},
                   {"drift_projection_residual", worst_drift_proj},
                   {"delta_annihilator_residual", worst_delta}};
    return rep;
}

/// Annihilator forms of a distribution, either given directly or built as the
/// orthogonal complement of the spanning fields.
inline std::vector<OneForm> distribution_annihilators(const Distribution& S) {
    if (!S.annihilators.empty()) return S.annihilators;
    std::vector<OneForm> out;
    for (int l = 0; l < S.space.dim; ++l) {
        out.push_back(OneForm{S.space, [S, l](const Vec& y) -> Vec {
            Mat span(S.space.dim, static_cast<long>(S.spanning.size()));
            for (size_t j = 0; j < S.spanning.size(); ++j)
                span.col(static_cast<long>(j)) = S.spanning[j](y);
            const Mat P = span * pinv(span);  // projector onto the span
            return (Mat::Identity(S.space.dim, S.space.dim) - P).col(l);
        }});
    }
    return out;
}

/// "L along S": the symbol annihilates every annihilator of S and delta^L
/// kills the generating annihilator forms. Together with the product rule
/// delta(f phi) = df sigma(phi) + f delta(phi) this covers the whole module
/// of S-vanishing one-forms.
inline Report along_distribution_check(const DiffusionOperator& L, const Distribution& S,
                                       const std::vector<Vec>& samples, double tolerance = 1e-6) {
    Report rep;
    rep.check = "along_distribution";
    rep.tolerance = tolerance;
    rep.samples = static_cast<int>(samples.size());
    double worst_delta = 0.0, worst_symbol = 0.0;
    const auto forms = distribution_annihilators(S);
    for (const Vec& x : samples)
        for (const auto& phi : forms) {
            const Vec ph = phi.phi(x);
            if (ph.norm() < 1e-12) continue;
            worst_symbol = std::max(worst_symbol, (symbol_at(L, x) * ph).norm());
            worst_delta = std::max(worst_delta, std::abs(delta(L, phi, x)));
        }
    rep.residual_max = std::max(worst_delta, worst_symbol);
    rep.pass = rep.residual_max < tolerance;
    rep.details = {{"delta_residual", worst_delta}, {"symbol_residual", worst_symbol}};
    return rep;
}

/// Consistency of a proposed distribution: spanning fields must be annihilated
/// by the annihilator forms at the sampled points.
inline Report distribution_consistency(const Distribution& S, const std::vector<Vec>& samples,
                                       double tolerance = 1e-10) {
    Report rep;
    rep.check = "distribution_consistency";
    rep.tolerance = tolerance;
    rep.samples = static_cast<int>(samples.size());
    double worst = 0.0;
    for (const Vec& x : samples)
        for (const auto& phi : S.annihilators)
            for (const auto& X : S.spanning)
                worst = std::max(worst, std::abs(phi.phi(x).dot(X(x))));
    rep.residual_max = worst;
    rep.pass = worst < tolerance;
    return rep;
}

/// Symbol sanity at samples: symmetry to 1e-12, eigenvalues >= -1e-10.
inline Report symbol_psd_check(const DiffusionOperator& L, const std::vector<Vec>& samples) {
    Report rep;
    rep.check = "symbol_psd";
    rep.tolerance = 1e-10;
    rep.samples = static_cast<int>(samples.size());
    double worst_sym = 0.0, worst_eig = 0.0;
    for (const Vec& x : samples) {
        const Mat A = L.a(x);
        worst_sym = std::max(worst_sym, (A - A.transpose()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
        worst_eig = std::max(worst_eig, std::max(0.0, -es.eigenvalues().minCoeff()));
    }
    rep.residual_max = std::max(worst_sym, worst_eig);
    rep.pass = worst_sym < 1e-12 && worst_eig < 1e-10;
    rep.details = {{"symmetry", worst_sym}, {"negative_eigenvalue", worst_eig}};
    return rep;
}

}  // namespace geomfilter

#endif  // GEOMFILTER_OPERATORS_HPP
