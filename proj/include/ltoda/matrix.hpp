#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <random>
#include <vector>

#include "ltoda/errors.hpp"

namespace ltoda {

using cplx = std::complex<double>;

/// Dense complex matrix, row-major.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);
    Matrix(int rows, int cols, cplx fill);
    Matrix(std::initializer_list<std::initializer_list<cplx>> rows);

    static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
    static Matrix identity(int n);
    static Matrix diagonal(const std::vector<cplx>& d);
    static Matrix unit(int rows, int cols, int i, int j);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    cplx& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    const cplx& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    const std::vector<cplx>& data() const { return data_; }
    std::vector<cplx>& data() { return data_; }

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(cplx s);

    Matrix transpose() const;
    cplx trace() const;
    bool is_diagonal(double tol = 0.0) const;
    bool all_finite() const;

    /// Max row sum.
    double norm_inf() const;
    /// Max column sum.
    double norm_1() const;
    double norm_fro() const;
    double max_abs() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<cplx> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator-(Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(Matrix a, cplx s);
Matrix operator*(cplx s, Matrix a);

Matrix commutator(const Matrix& a, const Matrix& b);

/// Frobenius distance scaled by max(1, |reference|_inf).
double rel_diff(const Matrix& a, const Matrix& ref);

enum class SpecialKind { I, J, K };

/// I_n, J_n (unit skew diagonal) or K_n = [[0, J_{n/2}], [-J_{n/2}, 0]].
Matrix special_matrix(SpecialKind kind, int n);

/// Forms used by the twisted transposes ^J and ^K.
enum class Form { J, K };

Matrix form_matrix(Form f, int n);

struct LU {
    Matrix lu;
    std::vector<int> piv;
    int sign = 1;
};

/// LU with partial pivoting; throws SingularMatrixError on a zero pivot.
LU lu_decompose(const Matrix& a);

Matrix inverse(const Matrix& a);
cplx determinant(const Matrix& a);
Matrix solve(const Matrix& a, const Matrix& b);

/// 1-norm condition number estimate from the explicit inverse.
double condition_number(const Matrix& a);

Matrix matrix_exp(const Matrix& m);
/// Principal logarithm; meant for arguments without eigenvalues on the closed negative real axis.
Matrix matrix_log(const Matrix& m);
Matrix matrix_sqrt(const Matrix& m);
Matrix matrix_power(const Matrix& m, int k);

/// ^{AB}m = A^{-1} (t m) B, with A of size cols(m) and B of size rows(m).
Matrix gen_transpose(const Matrix& m, const Matrix& A, const Matrix& B);
/// ^A m.
Matrix gen_transpose(const Matrix& m, const Matrix& A);
/// ^{ab}m with a, b in {J, K}, sized to fit m.
Matrix twist(const Matrix& m, Form a, Form b);
inline Matrix twist(const Matrix& m, Form f) { return twist(m, f, f); }
inline Matrix jt(const Matrix& m) { return twist(m, Form::J, Form::J); }
inline Matrix kt(const Matrix& m) { return twist(m, Form::K, Form::K); }

/// Matrix with exactly one nonzero entry per row and per column.
struct Monomial {
    std::vector<int> col;    // row i has its entry in column col[i]
    std::vector<cplx> coef;  // the entry itself
    std::vector<int> row_of; // inverse permutation

    static std::optional<Monomial> from(const Matrix& m);
    int size() const { return static_cast<int>(col.size()); }
    Matrix dense() const;
};

/// ^{AB}m for monomial A and B, in O(rows * cols).
Matrix gen_transpose(const Matrix& m, const Monomial& A, const Monomial& B);

class BlockPartition {
public:
    BlockPartition() = default;
    explicit BlockPartition(std::vector<int> sizes);

    int p() const { return static_cast<int>(sizes_.size()); }
    int dim() const { return offsets_.empty() ? 0 : offsets_.back(); }
    /// 1-based block index.
    int size(int alpha) const;
    int offset(int alpha) const;
    const std::vector<int>& sizes() const { return sizes_; }
    /// 1-based block containing the 0-based row index.
    int block_of(int index) const;

private:
    std::vector<int> sizes_;
    std::vector<int> offsets_;
};

/// Block x_{alpha beta}, 1-based indices.
Matrix block(const Matrix& m, const BlockPartition& part, int alpha, int beta);
void set_block(Matrix& m, const BlockPartition& part, int alpha, int beta, const Matrix& value);
Matrix submatrix(const Matrix& m, int r0, int c0, int rows, int cols);
void set_submatrix(Matrix& m, int r0, int c0, const Matrix& value);
Matrix direct_sum(const Matrix& a, const Matrix& b);
Matrix block_diagonal(const std::vector<Matrix>& blocks);

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0);

} // namespace ltoda
