#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ltoda/matrix.hpp"

namespace ltoda {

enum class AlgebraFamily { gl, sl, so, sp, glB };

std::string to_string(AlgebraFamily f);

/// A classical matrix algebra in its defining or B-twisted form.
struct AlgebraForm {
    AlgebraFamily family = AlgebraFamily::gl;
    int n = 0;
    std::optional<Matrix> B; // required iff family == glB

    static AlgebraForm gl(int n);
    static AlgebraForm sl(int n);
    static AlgebraForm so(int n);
    static AlgebraForm sp(int n);
    static AlgebraForm twisted(const Matrix& B);

    /// J_n, K_n or B for the form-defined families; empty for gl and sl.
    std::optional<Matrix> form() const;
};

constexpr double kMembershipTol = 1e-9;

bool is_in_algebra(const Matrix& x, const AlgebraForm& alg, double tol = kMembershipTol);
bool is_in_group(const Matrix& g, const AlgebraForm& alg, double tol = kMembershipTol);

/// A basis of the algebra as sparse-friendly matrices.
std::vector<Matrix> algebra_basis(const AlgebraForm& alg);

enum class AutoKind { inner, outer };

/// Finite-order automorphism in canonical form.
///
/// inner: x -> h x h^{-1}; outer: x -> -h ^B x h^{-1}.
class AutomorphismRep {
public:
    static AutomorphismRep inner(const AlgebraForm& alg, const Matrix& h, int M, std::optional<cplx> nu = std::nullopt);
    static AutomorphismRep outer(const AlgebraForm& alg, const Matrix& h, const Matrix& B, int M);

    AutoKind kind() const { return kind_; }
    const Matrix& h() const { return h_; }
    const Matrix& h_inverse() const { return h_inv_; }
    const std::optional<Matrix>& B() const { return B_; }
    int M() const { return M_; }
    const AlgebraForm& algebra() const { return algebra_; }
    cplx nu() const { return nu_; }
    /// True for twisted actions and for conjugations of so by an element of determinant -1.
    bool outer_class() const;

    Matrix apply(const Matrix& x) const;

private:
    AutoKind kind_ = AutoKind::inner;
    Matrix h_, h_inv_;
    std::optional<Matrix> B_;
    int M_ = 1;
    AlgebraForm algebra_;
    cplx nu_ = 1.0;

    std::optional<std::vector<cplx>> diag_, diag_inv_;
    std::optional<Monomial> b_mono_;
};

Matrix apply_automorphism(const AutomorphismRep& A, const Matrix& x);

/// Smallest M' <= max_order with A^{M'} = id on a basis.
int order_of(const AutomorphismRep& A, int max_order, double tol = 1e-10);

/// The permutation matrix exchanging the two middle rows of the n x n identity.
Matrix middle_swap(int n);

/// The outer automorphism x -> (h'u) x (h'u)^{-1} of so_n (J-form).
AutomorphismRep so_outer_canonical(int n, const Matrix& h_prime, int max_order = 64);

} // namespace ltoda
