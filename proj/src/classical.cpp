#include "ltoda/classical.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ltoda {

std::string to_string(AlgebraFamily f) {
    switch (f) {
    case AlgebraFamily::gl: return "gl";
    case AlgebraFamily::sl: return "sl";
    case AlgebraFamily::so: return "so";
    case AlgebraFamily::sp: return "sp";
    case AlgebraFamily::glB: return "glB";
    }
    return "?";
}

AlgebraForm AlgebraForm::gl(int n) {
    if (n <= 0) throw DimensionError("algebra dimension must be positive");
    return {AlgebraFamily::gl, n, std::nullopt};
}

AlgebraForm AlgebraForm::sl(int n) {
    if (n <= 0) throw DimensionError("algebra dimension must be positive");
    return {AlgebraFamily::sl, n, std::nullopt};
}

AlgebraForm AlgebraForm::so(int n) {
    if (n <= 0) throw DimensionError("algebra dimension must be positive");
    return {AlgebraFamily::so, n, std::nullopt};
}

AlgebraForm AlgebraForm::sp(int n) {
    if (n <= 0 || n % 2 != 0) throw DimensionError("sp_n requires even n, got " + std::to_string(n));
    return {AlgebraFamily::sp, n, std::nullopt};
}

AlgebraForm AlgebraForm::twisted(const Matrix& B) {
    if (!B.square() || B.rows() == 0) throw DimensionError("twisting form must be square");
    if (condition_number(B) > 1e12) throw SingularMatrixError("twisting form is singular");
    return {AlgebraFamily::glB, B.rows(), B};
}

std::optional<Matrix> AlgebraForm::form() const {
    switch (family) {
    case AlgebraFamily::so: return special_matrix(SpecialKind::J, n);
    case AlgebraFamily::sp: return special_matrix(SpecialKind::K, n);
    case AlgebraFamily::glB: return B;
    default: return std::nullopt;
    }
}

namespace {

void require_size(const Matrix& x, const AlgebraForm& alg) {
    if (!x.square() || x.rows() != alg.n)
        throw DimensionError("element has shape " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                             ", algebra dimension is " + std::to_string(alg.n));
}

Matrix twisted_transpose(const Matrix& x, const Matrix& B) {
    if (auto mono = Monomial::from(B)) return gen_transpose(x, *mono, *mono);
    return gen_transpose(x, B);
}

} // namespace

bool is_in_algebra(const Matrix& x, const AlgebraForm& alg, double tol) {
    require_size(x, alg);
    const double scale = std::max(1.0, x.norm_inf());
    switch (alg.family) {
    case AlgebraFamily::gl: return true;
    case AlgebraFamily::sl: return std::abs(x.trace()) <= tol * scale;
    default: {
        const Matrix B = *alg.form();
        return (twisted_transpose(x, B) + x).norm_fro() <= tol * scale;
    }
    }
}

bool is_in_group(const Matrix& g, const AlgebraForm& alg, double tol) {
    require_size(g, alg);
    if (condition_number(g) > 1e12) throw SingularMatrixError("group element candidate is singular");
    const int n = alg.n;
    switch (alg.family) {
    case AlgebraFamily::gl: return true;
    case AlgebraFamily::sl: return std::abs(determinant(g) - 1.0) <= tol;
    default: {
        const Matrix B = *alg.form();
        const Matrix I = Matrix::identity(n);
        const bool form_ok = (twisted_transpose(g, B) * g - I).norm_fro() <= tol * std::max(1.0, g.norm_inf());
        if (!form_ok) return false;
        if (alg.family == AlgebraFamily::so) return std::abs(determinant(g) - 1.0) <= tol;
        return true;
    }
    }
}

std::vector<Matrix> algebra_basis(const AlgebraForm& alg) {
    const int n = alg.n;
    std::vector<Matrix> basis;
    if (alg.family == AlgebraFamily::gl || alg.family == AlgebraFamily::sl) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (alg.family == AlgebraFamily::sl && i == j) continue;
                basis.push_back(Matrix::unit(n, n, i, j));
            }
        if (alg.family == AlgebraFamily::sl)
            for (int i = 0; i + 1 < n; ++i) {
                Matrix hcart(n, n);
                hcart(i, i) = 1.0;
                hcart(i + 1, i + 1) = -1.0;
                basis.push_back(hcart);
            }
        return basis;
    }
    const Matrix B = *alg.form();
    if (auto mono = Monomial::from(B)) {
        std::map<std::pair<int, int>, bool> seen;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (seen.count({i, j})) continue;
                Matrix e = Matrix::unit(n, n, i, j);
                Matrix v = e - gen_transpose(e, *mono, *mono);
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b)
                        if (v(a, b) != cplx{}) seen[{a, b}] = true;
                if (v.max_abs() > 1e-14) basis.push_back(v * 0.5);
            }
        return basis;
    }
    // Generic form: Gram-Schmidt on the spanning set x - ^B x.
    std::vector<std::vector<cplx>> ortho;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Matrix e = Matrix::unit(n, n, i, j);
            Matrix v = (e - gen_transpose(e, B)) * 0.5;
            std::vector<cplx> w = v.data();
            for (const auto& q : ortho) {
                cplx dot{};
                for (std::size_t k = 0; k < w.size(); ++k) dot += std::conj(q[k]) * w[k];
                for (std::size_t k = 0; k < w.size(); ++k) w[k] -= dot * q[k];
            }
            double nrm = 0.0;
            for (const auto& c : w) nrm += std::norm(c);
            nrm = std::sqrt(nrm);
            if (nrm < 1e-10) continue;
            for (auto& c : w) c /= nrm;
            ortho.push_back(w);
            Matrix m(n, n);
            m.data() = w;
            basis.push_back(m);
        }
    return basis;
}

AutomorphismRep AutomorphismRep::inner(const AlgebraForm& alg, const Matrix& h, int M, std::optional<cplx> nu) {
    if (!h.square() || h.rows() != alg.n) throw DimensionError("conjugating matrix has the wrong size");
    if (M <= 0) throw DomainError("automorphism order must be positive");
    AutomorphismRep rep;
    rep.kind_ = AutoKind::inner;
    rep.h_ = h;
    rep.h_inv_ = inverse(h);
    rep.M_ = M;
    rep.algebra_ = alg;
    const Matrix hm = matrix_power(h, M);
    const double stol = 1e-9 * std::max(1.0, hm.max_abs());
    bool scalar = hm.is_diagonal(stol);
    for (int i = 1; scalar && i < alg.n; ++i) scalar = std::abs(hm(i, i) - hm(0, 0)) <= stol;
    if (nu) {
        if ((hm - Matrix::identity(alg.n) * *nu).norm_fro() > 1e-9 * std::max(1.0, std::abs(*nu)) * alg.n)
            throw ContractError("h^M differs from the declared nu * I");
        rep.nu_ = *nu;
    } else if (scalar) {
        rep.nu_ = hm(0, 0);
    }
    if (h.is_diagonal()) {
        std::vector<cplx> d(alg.n), di(alg.n);
        for (int i = 0; i < alg.n; ++i) d[i] = h(i, i), di[i] = 1.0 / h(i, i);
        rep.diag_ = d;
        rep.diag_inv_ = di;
    }
    return rep;
}

AutomorphismRep AutomorphismRep::outer(const AlgebraForm& alg, const Matrix& h, const Matrix& B, int M) {
    if (!h.square() || h.rows() != alg.n || !B.square() || B.rows() != alg.n)
        throw DimensionError("outer automorphism data have the wrong size");
    if (M <= 0 || M % 2 != 0) throw ContractError("outer automorphisms have even order, got M = " + std::to_string(M));
    AutomorphismRep rep;
    rep.kind_ = AutoKind::outer;
    rep.h_ = h;
    rep.h_inv_ = inverse(h);
    rep.B_ = B;
    rep.M_ = M;
    rep.algebra_ = alg;
    const Matrix hm = matrix_power(h, M);
    rep.nu_ = hm(0, 0);
    if (h.is_diagonal()) {
        std::vector<cplx> d(alg.n), di(alg.n);
        for (int i = 0; i < alg.n; ++i) d[i] = h(i, i), di[i] = 1.0 / h(i, i);
        rep.diag_ = d;
        rep.diag_inv_ = di;
    }
    rep.b_mono_ = Monomial::from(B);
    if (!rep.b_mono_ && condition_number(B) > 1e12) throw SingularMatrixError("twisting form is singular");
    return rep;
}

bool AutomorphismRep::outer_class() const {
    if (kind_ == AutoKind::outer) return true;
    const bool orthogonal_type =
        algebra_.family == AlgebraFamily::so ||
        (algebra_.family == AlgebraFamily::glB && (*algebra_.B - algebra_.B->transpose()).max_abs() < 1e-12);
    if (!orthogonal_type || algebra_.n % 2 != 0) return false;
    const Matrix B = *algebra_.form();
    const Matrix g = gen_transpose(h_, B) * h_;
    const cplx c2 = g(0, 0);
    const cplx ratio = determinant(h_) / std::pow(c2, algebra_.n / 2);
    return std::abs(ratio + 1.0) < 1e-6;
}

Matrix AutomorphismRep::apply(const Matrix& x) const {
    if (!x.square() || x.rows() != algebra_.n) throw DimensionError("element does not match the automorphism size");
    const int n = algebra_.n;
    Matrix y;
    if (kind_ == AutoKind::inner) {
        y = x;
    } else {
        y = b_mono_ ? gen_transpose(x, *b_mono_, *b_mono_) : gen_transpose(x, *B_);
    }
    Matrix out;
    if (diag_) {
        out = Matrix(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out(i, j) = (*diag_)[i] * y(i, j) * (*diag_inv_)[j];
    } else {
        out = h_ * y * h_inv_;
    }
    if (kind_ == AutoKind::outer) out *= -1.0;
    return out;
}

Matrix apply_automorphism(const AutomorphismRep& A, const Matrix& x) { return A.apply(x); }

int order_of(const AutomorphismRep& A, int max_order, double tol) {
    if (max_order < 1) throw DomainError("max_order must be at least 1");
    const std::vector<Matrix> basis = algebra_basis(A.algebra());
    std::vector<Matrix> images = basis;
    for (int k = 1; k <= max_order; ++k) {
        bool identity = true;
        for (std::size_t b = 0; b < basis.size(); ++b) {
            images[b] = A.apply(images[b]);
            if (identity && rel_diff(images[b], basis[b]) > tol) identity = false;
        }
        if (identity) return k;
    }
    throw NotFiniteOrderError("automorphism has no order up to " + std::to_string(max_order));
}

Matrix middle_swap(int n) {
    if (n < 2 || n % 2 != 0) throw DimensionError("middle_swap requires even n");
    Matrix u = Matrix::identity(n);
    const int r = n / 2;
    u(r - 1, r - 1) = 0.0;
    u(r, r) = 0.0;
    u(r - 1, r) = 1.0;
    u(r, r - 1) = 1.0;
    return u;
}

AutomorphismRep so_outer_canonical(int n, const Matrix& h_prime, int max_order) {
    if (n < 4 || n % 2 != 0) throw DomainError("so outer automorphisms need even n >= 4, got " + std::to_string(n));
    if (!h_prime.square() || h_prime.rows() != n) throw DimensionError("h' has the wrong size");
    if (!h_prime.is_diagonal()) throw ContractError("h' must be diagonal");
    const AlgebraForm alg = AlgebraForm::so(n);
    if (!is_in_group(h_prime, alg, 1e-9)) throw ContractError("h' is not in SO_n");
    const Matrix u = middle_swap(n);
    if ((u * h_prime * u - h_prime).max_abs() > 1e-12) throw ContractError("h' does not commute with the middle swap");
    const Matrix h = h_prime * u;
    const AutomorphismRep probe = AutomorphismRep::inner(alg, h, 1);
    const int M = order_of(probe, max_order);
    return AutomorphismRep::inner(alg, h, M);
}

} // namespace ltoda
