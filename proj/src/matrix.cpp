#include "ltoda/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ltoda {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()));
}

void require_square(const Matrix& a, const char* op) {
    if (!a.square()) throw DimensionError(std::string(op) + ": matrix is not square");
}

} // namespace

Matrix::Matrix(int rows, int cols) : Matrix(rows, cols, cplx{}) {}

Matrix::Matrix(int rows, int cols, cplx fill) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
    data_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<cplx>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_) throw DimensionError("ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(const std::vector<cplx>& d) {
    const int n = static_cast<int>(d.size());
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::unit(int rows, int cols, int i, int j) {
    Matrix m(rows, cols);
    m(i, j) = 1.0;
    return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    require_same_shape(*this, o, "operator+");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    require_same_shape(*this, o, "operator-");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
}

Matrix& Matrix::operator*=(cplx s) {
    for (auto& v : data_) v *= s;
    return *this;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

cplx Matrix::trace() const {
    require_square(*this, "trace");
    cplx t{};
    for (int i = 0; i < rows_; ++i) t += (*this)(i, i);
    return t;
}

bool Matrix::is_diagonal(double tol) const {
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j)
            if (i != j && std::abs((*this)(i, j)) > tol) return false;
    return true;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

double Matrix::norm_inf() const {
    double best = 0.0;
    for (int i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols_; ++j) s += std::abs((*this)(i, j));
        best = std::max(best, s);
    }
    return best;
}

double Matrix::norm_1() const {
    double best = 0.0;
    for (int j = 0; j < cols_; ++j) {
        double s = 0.0;
        for (int i = 0; i < rows_; ++i) s += std::abs((*this)(i, j));
        best = std::max(best, s);
    }
    return best;
}

double Matrix::norm_fro() const {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return std::sqrt(s);
}

double Matrix::max_abs() const {
    double best = 0.0;
    for (const auto& v : data_) best = std::max(best, std::abs(v));
    return best;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

Matrix operator-(Matrix a) {
    for (auto& v : a.data()) v = -v;
    return a;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("operator*: inner dimensions " + std::to_string(a.cols()) + " and " +
                             std::to_string(b.rows()));
    Matrix c(a.rows(), b.cols());
    const int n = a.rows(), m = a.cols(), q = b.cols();
    const cplx* bd = b.data().data();
    cplx* cd = c.data().data();
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < m; ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx{}) continue;
            const cplx* brow = bd + static_cast<std::size_t>(k) * q;
            cplx* crow = cd + static_cast<std::size_t>(i) * q;
            for (int j = 0; j < q; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix operator*(Matrix a, cplx s) { return a *= s; }
Matrix operator*(cplx s, Matrix a) { return a *= s; }

Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

double rel_diff(const Matrix& a, const Matrix& ref) {
    return (a - ref).norm_fro() / std::max(1.0, ref.norm_inf());
}

Matrix special_matrix(SpecialKind kind, int n) {
    if (n <= 0) throw DimensionError("special_matrix: n must be positive");
    switch (kind) {
    case SpecialKind::I:
        return Matrix::identity(n);
    case SpecialKind::J: {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, n - 1 - i) = 1.0;
        return m;
    }
    case SpecialKind::K: {
        if (n % 2 != 0) throw DimensionError("K_n requires even n, got " + std::to_string(n));
        const int r = n / 2;
        Matrix m(n, n);
        for (int i = 0; i < r; ++i) {
            m(i, n - 1 - i) = 1.0;     // upper right J_r
            m(r + i, r - 1 - i) = -1.0; // lower left -J_r
        }
        return m;
    }
    }
    throw DomainError("special_matrix: unknown kind");
}

Matrix form_matrix(Form f, int n) { return special_matrix(f == Form::J ? SpecialKind::J : SpecialKind::K, n); }

LU lu_decompose(const Matrix& a) {
    require_square(a, "lu_decompose");
    const int n = a.rows();
    LU out{a, std::vector<int>(n), 1};
    std::iota(out.piv.begin(), out.piv.end(), 0);
    Matrix& m = out.lu;
    for (int k = 0; k < n; ++k) {
        int best = k;
        double bv = std::abs(m(k, k));
        for (int i = k + 1; i < n; ++i)
            if (std::abs(m(i, k)) > bv) bv = std::abs(m(i, k)), best = i;
        if (bv == 0.0) throw SingularMatrixError("matrix is singular (zero pivot)");
        if (best != k) {
            for (int j = 0; j < n; ++j) std::swap(m(k, j), m(best, j));
            std::swap(out.piv[k], out.piv[best]);
            out.sign = -out.sign;
        }
        const cplx inv = 1.0 / m(k, k);
        for (int i = k + 1; i < n; ++i) {
            const cplx f = m(i, k) * inv;
            m(i, k) = f;
            if (f == cplx{}) continue;
            for (int j = k + 1; j < n; ++j) m(i, j) -= f * m(k, j);
        }
    }
    return out;
}

namespace {

Matrix lu_solve(const LU& f, const Matrix& b) {
    const int n = f.lu.rows();
    if (b.rows() != n) throw DimensionError("solve: right-hand side has wrong row count");
    Matrix x(n, b.cols());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < b.cols(); ++j) x(i, j) = b(f.piv[i], j);
    for (int j = 0; j < b.cols(); ++j) {
        for (int i = 0; i < n; ++i) {
            cplx s = x(i, j);
            for (int k = 0; k < i; ++k) s -= f.lu(i, k) * x(k, j);
            x(i, j) = s;
        }
        for (int i = n - 1; i >= 0; --i) {
            cplx s = x(i, j);
            for (int k = i + 1; k < n; ++k) s -= f.lu(i, k) * x(k, j);
            x(i, j) = s / f.lu(i, i);
        }
    }
    return x;
}

constexpr double kMaxCondition = 1e12;

} // namespace

Matrix inverse(const Matrix& a) {
    const LU f = lu_decompose(a);
    Matrix inv = lu_solve(f, Matrix::identity(a.rows()));
    const double cond = a.norm_1() * inv.norm_1();
    if (!(cond <= kMaxCondition))
        throw SingularMatrixError("matrix is numerically singular (condition estimate " + std::to_string(cond) + ")");
    return inv;
}

double condition_number(const Matrix& a) {
    try {
        const LU f = lu_decompose(a);
        return a.norm_1() * lu_solve(f, Matrix::identity(a.rows())).norm_1();
    } catch (const SingularMatrixError&) {
        return INFINITY;
    }
}

cplx determinant(const Matrix& a) {
    require_square(a, "determinant");
    try {
        const LU f = lu_decompose(a);
        cplx d = static_cast<double>(f.sign);
        for (int i = 0; i < a.rows(); ++i) d *= f.lu(i, i);
        return d;
    } catch (const SingularMatrixError&) {
        return 0.0;
    }
}

Matrix solve(const Matrix& a, const Matrix& b) {
    const LU f = lu_decompose(a);
    Matrix x = lu_solve(f, b);
    if (!x.all_finite()) throw SingularMatrixError("solve produced non-finite values");
    return x;
}

namespace {

// Pade approximants of degree m for exp, scaling and squaring after Higham (2005).
const double kPade3[] = {120.0, 60.0, 12.0, 1.0};
const double kPade5[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
const double kPade7[] = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
const double kPade9[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                         2162160.0,     110880.0,     3960.0,       90.0,        1.0};
const double kPade13[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
                          129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
                          1323241920.0,        40840800.0,          960960.0,           16380.0,
                          182.0,               1.0};

Matrix pade_low(const Matrix& a, const double* b, int m) {
    const int n = a.rows();
    const Matrix I = Matrix::identity(n);
    const Matrix a2 = a * a;
    Matrix u_inner = I * b[1];
    Matrix v = I * b[0];
    Matrix power = I;
    for (int k = 1; 2 * k <= m; ++k) {
        power = power * a2;
        u_inner += power * b[2 * k + 1];
        v += power * b[2 * k];
    }
    const Matrix u = a * u_inner;
    return solve(v - u, v + u);
}

Matrix pade13(const Matrix& a) {
    const double* b = kPade13;
    const int n = a.rows();
    const Matrix I = Matrix::identity(n);
    const Matrix a2 = a * a, a4 = a2 * a2, a6 = a4 * a2;
    const Matrix u = a * (a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9]) + a6 * b[7] + a4 * b[5] + a2 * b[3] + I * b[1]);
    const Matrix v = a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8]) + a6 * b[6] + a4 * b[4] + a2 * b[2] + I * b[0];
    return solve(v - u, v + u);
}

} // namespace

Matrix matrix_exp(const Matrix& m) {
    require_square(m, "matrix_exp");
    if (m.rows() == 0) return m;
    const double nrm = m.norm_1();
    if (nrm <= 1.495585217958292e-2) return pade_low(m, kPade3, 3);
    if (nrm <= 2.539398330063230e-1) return pade_low(m, kPade5, 5);
    if (nrm <= 9.504178996162932e-1) return pade_low(m, kPade7, 7);
    if (nrm <= 2.097847961257068e0) return pade_low(m, kPade9, 9);
    const double theta13 = 5.371920351148152e0;
    int s = 0;
    if (nrm > theta13) s = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / theta13))));
    Matrix r = pade13(m * std::ldexp(1.0, -s));
    for (int k = 0; k < s; ++k) r = r * r;
    return r;
}

Matrix matrix_sqrt(const Matrix& m) {
    require_square(m, "matrix_sqrt");
    const int n = m.rows();
    Matrix y = m, z = Matrix::identity(n);
    for (int it = 0; it < 100; ++it) {
        const Matrix yi = inverse(y), zi = inverse(z);
        Matrix yn = (y + zi) * 0.5;
        Matrix zn = (z + yi) * 0.5;
        const double change = (yn - y).norm_1();
        y = std::move(yn);
        z = std::move(zn);
        if (change <= 1e-15 * std::max(1.0, y.norm_1())) break;
    }
    return y;
}

Matrix matrix_log(const Matrix& m) {
    require_square(m, "matrix_log");
    const int n = m.rows();
    const Matrix I = Matrix::identity(n);
    Matrix x = m;
    int k = 0;
    while ((x - I).norm_1() > 0.25) {
        if (++k > 60) throw DomainError("matrix_log: square root iteration did not approach the identity");
        x = matrix_sqrt(x);
    }
    // log x = 2 atanh(y), y = (x - I)(x + I)^{-1}
    const Matrix y = solve((x + I).transpose(), (x - I).transpose()).transpose();
    const Matrix y2 = y * y;
    Matrix term = y;
    Matrix sum = y;
    for (int j = 1; j < 200; ++j) {
        term = term * y2;
        const Matrix add = term * (1.0 / (2.0 * j + 1.0));
        sum += add;
        if (add.norm_1() <= 1e-18 * std::max(1e-300, sum.norm_1())) break;
    }
    return sum * std::ldexp(2.0, k);
}

Matrix matrix_power(const Matrix& m, int k) {
    require_square(m, "matrix_power");
    if (k < 0) return matrix_power(inverse(m), -k);
    Matrix result = Matrix::identity(m.rows()), base = m;
    while (k > 0) {
        if (k & 1) result = result * base;
        base = base * base;
        k >>= 1;
    }
    return result;
}

Matrix gen_transpose(const Matrix& m, const Matrix& A, const Matrix& B) {
    if (!A.square() || !B.square()) throw DimensionError("gen_transpose: forms must be square");
    if (A.rows() != m.cols() || B.rows() != m.rows())
        throw DimensionError("gen_transpose: form sizes do not match the matrix shape");
    return solve(A, m.transpose() * B);
}

Matrix gen_transpose(const Matrix& m, const Matrix& A) { return gen_transpose(m, A, A); }

namespace {

Monomial form_monomial(Form f, int n) {
    Monomial mono;
    mono.col.resize(n);
    mono.coef.assign(n, 1.0);
    mono.row_of.resize(n);
    if (f == Form::K && n % 2 != 0) throw DimensionError("K-form requires even size, got " + std::to_string(n));
    for (int i = 0; i < n; ++i) {
        mono.col[i] = n - 1 - i;
        mono.row_of[n - 1 - i] = i;
        if (f == Form::K && i >= n / 2) mono.coef[i] = -1.0;
    }
    return mono;
}

} // namespace

std::optional<Monomial> Monomial::from(const Matrix& m) {
    if (!m.square()) return std::nullopt;
    const int n = m.rows();
    Monomial mono;
    mono.col.assign(n, -1);
    mono.coef.assign(n, 0.0);
    mono.row_of.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (m(i, j) == cplx{}) continue;
            if (mono.col[i] != -1 || mono.row_of[j] != -1) return std::nullopt;
            mono.col[i] = j;
            mono.row_of[j] = i;
            mono.coef[i] = m(i, j);
        }
        if (mono.col[i] == -1) return std::nullopt;
    }
    return mono;
}

Matrix Monomial::dense() const {
    Matrix m(size(), size());
    for (int i = 0; i < size(); ++i) m(i, col[i]) = coef[i];
    return m;
}

Matrix gen_transpose(const Matrix& m, const Monomial& A, const Monomial& B) {
    const int r = m.rows(), c = m.cols();
    if (A.size() != c || B.size() != r) throw DimensionError("gen_transpose: form sizes do not match the matrix shape");
    // (t m B)_{a j} = m_{k a} B_{k j} with k = B.row_of[j]
    // (A^{-1} Y)_{i j} = Y_{q j} / A_{q i} with q = A.row_of[i]
    Matrix out(c, r);
    for (int i = 0; i < c; ++i) {
        const int q = A.row_of[i];
        const cplx ainv = 1.0 / A.coef[q];
        for (int j = 0; j < r; ++j) {
            const int k = B.row_of[j];
            out(i, j) = ainv * m(k, q) * B.coef[k];
        }
    }
    return out;
}

Matrix twist(const Matrix& m, Form a, Form b) {
    return gen_transpose(m, form_monomial(a, m.cols()), form_monomial(b, m.rows()));
}

BlockPartition::BlockPartition(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty()) throw DimensionError("BlockPartition: at least one block required");
    offsets_.assign(1, 0);
    for (int s : sizes_) {
        if (s <= 0) throw DimensionError("BlockPartition: block sizes must be positive");
        offsets_.push_back(offsets_.back() + s);
    }
}

int BlockPartition::size(int alpha) const {
    if (alpha < 1 || alpha > p()) throw DimensionError("block index " + std::to_string(alpha) + " out of range");
    return sizes_[alpha - 1];
}

int BlockPartition::offset(int alpha) const {
    if (alpha < 1 || alpha > p()) throw DimensionError("block index " + std::to_string(alpha) + " out of range");
    return offsets_[alpha - 1];
}

int BlockPartition::block_of(int index) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
    return static_cast<int>(it - offsets_.begin());
}

Matrix submatrix(const Matrix& m, int r0, int c0, int rows, int cols) {
    if (r0 < 0 || c0 < 0 || r0 + rows > m.rows() || c0 + cols > m.cols())
        throw DimensionError("submatrix out of range");
    Matrix out(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = m(r0 + i, c0 + j);
    return out;
}

void set_submatrix(Matrix& m, int r0, int c0, const Matrix& value) {
    if (r0 < 0 || c0 < 0 || r0 + value.rows() > m.rows() || c0 + value.cols() > m.cols())
        throw DimensionError("set_submatrix out of range");
    for (int i = 0; i < value.rows(); ++i)
        for (int j = 0; j < value.cols(); ++j) m(r0 + i, c0 + j) = value(i, j);
}

Matrix block(const Matrix& m, const BlockPartition& part, int alpha, int beta) {
    if (!m.square() || m.rows() != part.dim()) throw DimensionError("block: partition does not fit the matrix");
    return submatrix(m, part.offset(alpha), part.offset(beta), part.size(alpha), part.size(beta));
}

void set_block(Matrix& m, const BlockPartition& part, int alpha, int beta, const Matrix& value) {
    if (!m.square() || m.rows() != part.dim()) throw DimensionError("set_block: partition does not fit the matrix");
    if (value.rows() != part.size(alpha) || value.cols() != part.size(beta))
        throw DimensionError("set_block: value has the wrong shape");
    set_submatrix(m, part.offset(alpha), part.offset(beta), value);
}

Matrix direct_sum(const Matrix& a, const Matrix& b) {
    Matrix m(a.rows() + b.rows(), a.cols() + b.cols());
    set_submatrix(m, 0, 0, a);
    set_submatrix(m, a.rows(), a.cols(), b);
    return m;
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
    int r = 0, c = 0;
    for (const auto& b : blocks) r += b.rows(), c += b.cols();
    Matrix m(r, c);
    r = c = 0;
    for (const auto& b : blocks) {
        set_submatrix(m, r, c, b);
        r += b.rows();
        c += b.cols();
    }
    return m;
}

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> nd(0.0, scale);
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = cplx(nd(rng), nd(rng));
    return m;
}

} // namespace ltoda
