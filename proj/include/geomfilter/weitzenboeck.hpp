#ifndef GEOMFILTER_WEITZENBOECK_HPP
#define GEOMFILTER_WEITZENBOECK_HPP

#include "geomfilter/core.hpp"
#include "geomfilter/report.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace geomfilter {

inline long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

/// Lexicographically ordered k-subsets of {0..n-1} indexing an orthonormal
/// basis e_I of wedge^k R^n.
struct ExteriorBasis {
    int n = 0;
    int k = 0;
    std::vector<std::vector<int>> index;

    ExteriorBasis() = default;
    ExteriorBasis(int n_, int k_) : n(n_), k(k_) {
        std::vector<int> cur;
        build(0, cur);
    }

    long dim() const { return static_cast<long>(index.size()); }

    long find(const std::vector<int>& I) const {
        for (size_t i = 0; i < index.size(); ++i)
            if (index[i] == I) return static_cast<long>(i);
        return -1;
    }

private:
    void build(int start, std::vector<int>& cur) {
        if (static_cast<int>(cur.size()) == k) {
            index.push_back(cur);
            return;
        }
        for (int i = start; i < n; ++i) {
            cur.push_back(i);
            build(i + 1, cur);
            cur.pop_back();
        }
    }
};

/// Matrix on wedge^k (or between degrees, for creation/annihilation).
struct FormOperator {
    ExteriorBasis domain;
    ExteriorBasis codomain;
    Mat matrix;
};

/// a_i^* = (e_i wedge -): wedge^k -> wedge^{k+1}; sign from the position
/// parity of i in the sorted multi-index.
inline FormOperator creation(int i, const ExteriorBasis& basis) {
    ExteriorBasis cod(basis.n, basis.k + 1);
    Mat M = Mat::Zero(cod.dim(), basis.dim());
    for (long c = 0; c < basis.dim(); ++c) {
        const auto& I = basis.index[static_cast<size_t>(c)];
        bool contains = false;
        int before = 0;
        for (int j : I) {
            if (j == i) contains = true;
            if (j < i) ++before;
        }
        if (contains) continue;
        std::vector<int> J = I;
        J.insert(J.begin() + before, i);
        M(cod.find(J), c) = (before % 2 == 0) ? 1.0 : -1.0;
    }
    return FormOperator{basis, cod, M};
}

/// a_i = iota_{e_i}: wedge^k -> wedge^{k-1}; the adjoint of creation in the
/// orthonormal basis.
inline FormOperator annihilation(int i, const ExteriorBasis& basis) {
    ExteriorBasis cod(basis.n, basis.k - 1);
    FormOperator cre = creation(i, cod);
    return FormOperator{basis, cod, cre.matrix.transpose()};
}

/// Derivation extension of A: wedge^k term-by-term replacement, with the
/// operator route sum_ij <A e_j, e_i> a_i^* a_j computed alongside and
/// asserted to agree.
inline FormOperator dLambda(const Mat& A, const ExteriorBasis& basis, bool cross_check = false) {
    const int n = basis.n;
    Mat M = Mat::Zero(basis.dim(), basis.dim());
    for (long c = 0; c < basis.dim(); ++c) {
        const auto& I = basis.index[static_cast<size_t>(c)];
        for (size_t pos = 0; pos < I.size(); ++pos) {
            const int j = I[pos];
            for (int i = 0; i < n; ++i) {
                const double coef = A(i, j);
                if (coef == 0.0) continue;
                bool dup = false;
                for (size_t q = 0; q < I.size(); ++q)
                    if (q != pos && I[q] == i) dup = true;
                if (dup) continue;
                std::vector<int> J = I;
                J[pos] = i;
                int sign = 1;  // bubble sort with sign
                for (size_t a = 0; a + 1 < J.size(); ++a)
                    for (size_t b = 0; b + 1 < J.size() - a; ++b)
                        if (J[b] > J[b + 1]) {
                            std::swap(J[b], J[b + 1]);
                            sign = -sign;
                        }
                M(basis.find(J), c) += sign * coef;
            }
        }
    }
    if (cross_check && basis.k >= 1) {
        Mat Mops = Mat::Zero(basis.dim(), basis.dim());
        ExteriorBasis lower(basis.n, basis.k - 1);
        for (int i = 0; i < n; ++i) {
            const Mat crei = creation(i, lower).matrix;
            for (int j = 0; j < n; ++j)
                if (A(i, j) != 0.0) Mops += A(i, j) * crei * annihilation(j, basis).matrix;
        }
        if ((M - Mops).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
            throw NumericalDomainError("dLambda construction mismatch");
    }
    return FormOperator{basis, basis, M};
}

/// Lie-algebra coefficients of a vertical operator: alpha = sum alpha^{ij}
/// A_i (x) A_j (symmetric PSD), beta = sum beta^k A_k in a supplied basis.
struct VerticalData {
    std::vector<Mat> lie_basis;  // A_1..A_k, matrices acting on R^n
    Mat alpha;                   // k x k symmetric PSD coefficient matrix
    Vec beta;                    // k coefficients
};

/// Hilbert-Schmidt-orthonormal basis of so(n): A_[p,q] = (E_pq - E_qp)/sqrt2,
/// p < q in lexicographic order.
inline std::vector<Mat> so_basis(int n) {
    std::vector<Mat> B;
    for (int p = 0; p < n; ++p)
        for (int q = p + 1; q < n; ++q) {
            Mat A = Mat::Zero(n, n);
            A(p, q) = 1.0 / std::sqrt(2.0);
            A(q, p) = -1.0 / std::sqrt(2.0);
            B.push_back(A);
        }
    return B;
}

/// T[i][j][k][l] = <(rho* x rho*)(alpha)(e_j (x) e_l), e_i (x) e_k> with the
/// module's factor-one tensor inner product.
inline std::vector<double> tensor_coefficients(const VerticalData& vd, int n) {
    std::vector<double> T(static_cast<size_t>(n) * n * n * n, 0.0);
    auto at = [n](std::vector<double>& t, int i, int j, int k, int l) -> double& {
        return t[static_cast<size_t>(((i * n + j) * n + k) * n + l)];
    };
    const int nb = static_cast<int>(vd.lie_basis.size());
    for (int m = 0; m < nb; ++m)
        for (int l = 0; l < nb; ++l) {
            const double c = vd.alpha(m, l);
            if (c == 0.0) continue;
            const Mat& Am = vd.lie_basis[static_cast<size_t>(m)];
            const Mat& Al = vd.lie_basis[static_cast<size_t>(l)];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    if (Am(i, j) == 0.0) continue;
                    for (int k = 0; k < n; ++k)
                        for (int l2 = 0; l2 < n; ++l2)
                            at(T, i, j, k, l2) += c * Am(i, j) * Al(k, l2);
                }
        }
    return T;
}

struct LambdaWedgeResult {
    FormOperator total;      // dLambda(rho* beta) + Comp(rho* x rho*)(alpha)
    FormOperator quartic;    // -sum_{i<k, j<l} Q a_i^* a_k^* a_j a_l
    FormOperator dLambda_Z;  // 1/2 dLambda(Z)
    FormOperator dLambda_beta;
    double split_agreement = 0.0;  // max |total - (quartic + Z-term + beta-term)|
};

/// Zero-order operator on wedge^k from vertical coefficients, assembled two
/// ways (direct composition and the quartic + contraction split); the two
/// routes are cross-checked.
inline LambdaWedgeResult lambda_wedge(const VerticalData& vd, const ExteriorBasis& basis,
                                      double psd_tol = 1e-10) {
    const int n = basis.n;
    {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (vd.alpha + vd.alpha.transpose()));
        if (es.eigenvalues().minCoeff() <
            -psd_tol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
            throw AlphaNotPSD("alpha coefficient matrix is not PSD");
    }
    const int nb = static_cast<int>(vd.lie_basis.size());

    // direct: sum alpha^{ml} dL(A_m) dL(A_l) + dL(beta)
    Mat beta_mat = Mat::Zero(n, n);
    for (int k2 = 0; k2 < nb; ++k2) beta_mat += vd.beta[k2] * vd.lie_basis[static_cast<size_t>(k2)];
    const Mat dbeta = dLambda(beta_mat, basis).matrix;

    std::vector<Mat> dL(static_cast<size_t>(nb));
    for (int m = 0; m < nb; ++m)
        dL[static_cast<size_t>(m)] = dLambda(vd.lie_basis[static_cast<size_t>(m)], basis).matrix;
    Mat direct = Mat::Zero(basis.dim(), basis.dim());
    for (int m = 0; m < nb; ++m)
        for (int l = 0; l < nb; ++l)
            if (vd.alpha(m, l) != 0.0)
                direct += vd.alpha(m, l) * dL[static_cast<size_t>(m)] * dL[static_cast<size_t>(l)];

    // split: quartic + 1/2 dLambda(Z)
    const auto T = tensor_coefficients(vd, n);
    auto at = [n, &T](int i, int j, int k, int l) {
        return T[static_cast<size_t>(((i * n + j) * n + k) * n + l)];
    };
    Mat quartic = Mat::Zero(basis.dim(), basis.dim());
    if (basis.k >= 2) {
        ExteriorBasis bm1(n, basis.k - 1);
        ExteriorBasis bm2(n, basis.k - 2);
        std::vector<Mat> cre_top(static_cast<size_t>(n)), cre_mid(static_cast<size_t>(n)),
            ann_top(static_cast<size_t>(n)), ann_mid(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            cre_top[static_cast<size_t>(i)] = creation(i, bm1).matrix;   // k-1 -> k
            cre_mid[static_cast<size_t>(i)] = creation(i, bm2).matrix;   // k-2 -> k-1
            ann_top[static_cast<size_t>(i)] = annihilation(i, basis).matrix;  // k -> k-1
            ann_mid[static_cast<size_t>(i)] = annihilation(i, bm1).matrix;    // k-1 -> k-2
        }
        for (int i = 0; i < n; ++i)
            for (int k2 = i + 1; k2 < n; ++k2)
                for (int j = 0; j < n; ++j)
                    for (int l = j + 1; l < n; ++l) {
                        const double Q = 2.0 * (at(i, j, k2, l) - at(i, l, k2, j));
                        if (Q == 0.0) continue;
                        quartic -= Q * cre_top[static_cast<size_t>(i)] *
                                   cre_mid[static_cast<size_t>(k2)] *
                                   ann_mid[static_cast<size_t>(j)] *
                                   ann_top[static_cast<size_t>(l)];
                    }
    }
    Mat Z = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += at(i, j, j, l);
            Z(i, l) = 2.0 * s;
        }
    const Mat zterm = 0.5 * dLambda(Z, basis).matrix;

    LambdaWedgeResult res;
    res.total = FormOperator{basis, basis, direct + dbeta};
    res.quartic = FormOperator{basis, basis, quartic};
    res.dLambda_Z = FormOperator{basis, basis, zterm};
    res.dLambda_beta = FormOperator{basis, basis, dbeta};
    res.split_agreement = (direct - (quartic + zterm)).cwiseAbs().maxCoeff();
    if (res.split_agreement > 1e-10 * std::max(1.0, direct.cwiseAbs().maxCoeff()))
        throw NumericalDomainError("lambda_wedge assembly routes disagree");
    return res;
}

/// Curvature input R_{ikjl} (4-index, antisymmetric in (i,k) and (j,l)) plus
/// the Ricci matrix.
struct CurvatureData {
    int n = 0;
    std::vector<double> R;  // R[((i*n+k)*n+j)*n+l]
    Mat Ric;

    double at(int i, int k, int j, int l) const {
        return R[static_cast<size_t>(((i * n + k) * n + j) * n + l)];
    }
    double& at(int i, int k, int j, int l) {
        return R[static_cast<size_t>(((i * n + k) * n + j) * n + l)];
    }

    static CurvatureData zeros(int n) {
        CurvatureData c;
        c.n = n;
        c.R.assign(static_cast<size_t>(n) * n * n * n, 0.0);
        c.Ric = Mat::Zero(n, n);
        return c;
    }

    /// Constant-curvature data R_{ikjl} = d_ij d_kl - d_il d_kj, Ric = (n-1)I.
    static CurvatureData constant_curvature(int n) {
        CurvatureData c = zeros(n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < n; ++j)
                    for (int l = 0; l < n; ++l)
                        c.at(i, k, j, l) = (i == j && k == l ? 1.0 : 0.0) -
                                           (i == l && k == j ? 1.0 : 0.0);
        c.Ric = static_cast<double>(n - 1) * Mat::Identity(n, n);
        return c;
    }

    void check_symmetries(double tol = 1e-10) const {
        double worst = 0.0;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < n; ++j)
                    for (int l = 0; l < n; ++l) {
                        worst = std::max(worst, std::abs(at(i, k, j, l) + at(k, i, j, l)));
                        worst = std::max(worst, std::abs(at(i, k, j, l) + at(i, k, l, j)));
                        worst = std::max(worst, std::abs(at(i, k, j, l) - at(j, l, i, k)));
                    }
        if (worst > tol) throw BadSymmetry("curvature tensor lacks the required symmetries");
    }
};

/// Generalised Weitzenboeck operator on wedge^q:
///   -1/2 dLambda(Ric) - sum_{i<k, j<l} R_{ikjl} a_i^* a_k^* a_j a_l.
inline FormOperator weitzenbock_from_curvature(const CurvatureData& C, const ExteriorBasis& basis) {
    C.check_symmetries();
    const int n = basis.n;
    Mat M = -0.5 * dLambda(C.Ric, basis).matrix;
    if (basis.k >= 2) {
        ExteriorBasis bm1(n, basis.k - 1);
        ExteriorBasis bm2(n, basis.k - 2);
        for (int i = 0; i < n; ++i)
            for (int k2 = i + 1; k2 < n; ++k2) {
                const Mat ik = creation(i, bm1).matrix * creation(k2, bm2).matrix;
                for (int j = 0; j < n; ++j)
                    for (int l = j + 1; l < n; ++l) {
                        const double q = C.at(i, k2, j, l);
                        if (q == 0.0) continue;
                        M -= q * ik * annihilation(j, bm1).matrix * annihilation(l, basis).matrix;
                    }
            }
    }
    return FormOperator{basis, basis, M};
}

/// Casimir of the wedge^k representation of so(n): built as
/// sum_l dLambda(A_l) dLambda(A_l') with the trace-form normalisation
/// A_l' = -((k-1)!(n-k-1)!/(n-2)!) A_l; must be the scalar n(n-1)/(2 C(n,k)).
inline double casimir(int n, int k, double scalar_tol = 1e-10) {
    if (k < 1 || k > n - 1) throw NumericalDomainError("casimir needs 1 <= k <= n-1");
    ExteriorBasis basis(n, k);
    auto fact = [](int m) {
        double r = 1.0;
        for (int i = 2; i <= m; ++i) r *= i;
        return r;
    };
    const double cnorm = fact(k - 1) * fact(n - k - 1) / fact(n - 2);
    Mat M = Mat::Zero(basis.dim(), basis.dim());
    for (const Mat& A : so_basis(n)) {
        const Mat dA = dLambda(A, basis).matrix;
        M += dA * (-cnorm * dA);
    }
    const double diag = M.trace() / static_cast<double>(basis.dim());
    const Mat off = M - diag * Mat::Identity(basis.dim(), basis.dim());
    if (off.cwiseAbs().maxCoeff() > scalar_tol)
        throw NotScalar("Casimir is not scalar on wedge^k");
    return diag;
}

/// Spectral bounds for the zero-order operator of a PSD alpha over so(n):
/// the quadratic form of lambda^{wedge k} lies in
/// [-k(n-k)/2 mu_max, -k(n-k)/2 mu_min] for mu the eigenvalues of alpha^#.
inline Report eigen_bounds_check(const Mat& alpha, int n, int k, double tolerance = 1e-8) {
    Report rep;
    rep.check = "eigen_bounds";
    rep.tolerance = tolerance;
    const auto basis_vecs = so_basis(n);
    if (alpha.rows() != static_cast<long>(basis_vecs.size()))
        throw NumericalDomainError("alpha must be coefficients in the so(n) basis");
    VerticalData vd{basis_vecs, alpha, Vec::Zero(static_cast<long>(basis_vecs.size()))};
    ExteriorBasis basis(n, k);
    const auto lam = lambda_wedge(vd, basis);
    const Mat sym = 0.5 * (lam.total.matrix + lam.total.matrix.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> mu(0.5 * (alpha + alpha.transpose()));
    Eigen::SelfAdjointEigenSolver<Mat> spec(sym);
    const double lo = -0.5 * k * (n - k) * mu.eigenvalues().maxCoeff();
    const double hi = -0.5 * k * (n - k) * mu.eigenvalues().minCoeff();
    const double below = std::max(0.0, lo - spec.eigenvalues().minCoeff());
    const double above = std::max(0.0, spec.eigenvalues().maxCoeff() - hi);
    rep.residual_max = std::max(below, above);
    rep.samples = static_cast<int>(spec.eigenvalues().size());
    rep.pass = rep.residual_max < tolerance;
    rep.details = {{"mu_min", mu.eigenvalues().minCoeff()},
                   {"mu_max", mu.eigenvalues().maxCoeff()},
                   {"spectrum_min", spec.eigenvalues().minCoeff()},
                   {"spectrum_max", spec.eigenvalues().maxCoeff()},
                   {"bound_lo", lo},
                   {"bound_hi", hi}};
    return rep;
}

}  // namespace geomfilter

#endif  // GEOMFILTER_WEITZENBOECK_HPP
