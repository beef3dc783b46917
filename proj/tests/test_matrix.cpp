#include "doctest.h"

#include <random>

#include "ltoda/matrix.hpp"

using namespace ltoda;

TEST_CASE("J transpose reflects across the skew diagonal") {
    const Matrix m{{1, 2}, {3, 4}};
    const Matrix want{{4, 2}, {3, 1}};
    CHECK(rel_diff(jt(m), want) < 1e-15);
}

TEST_CASE("K_n layout and K transpose involution") {
    const Matrix K = special_matrix(SpecialKind::K, 4);
    CHECK(K(0, 3) == cplx(1.0));
    CHECK(K(1, 2) == cplx(1.0));
    CHECK(K(2, 1) == cplx(-1.0));
    CHECK(K(3, 0) == cplx(-1.0));
    std::mt19937_64 rng(3);
    const Matrix x = random_matrix(4, 4, rng);
    CHECK(rel_diff(kt(kt(x)), x) < 1e-14);
    CHECK(rel_diff(jt(jt(x)), x) < 1e-14);
}

TEST_CASE("generalized transpose reverses products") {
    std::mt19937_64 rng(5);
    const Matrix a = random_matrix(4, 4, rng), b = random_matrix(4, 4, rng);
    CHECK(rel_diff(kt(a * b), kt(b) * kt(a)) < 1e-12);
    CHECK(rel_diff(jt(inverse(a)), inverse(jt(a))) < 1e-10);
}

TEST_CASE("monomial fast path agrees with the dense formula") {
    std::mt19937_64 rng(7);
    const Matrix A = direct_sum(special_matrix(SpecialKind::J, 3), special_matrix(SpecialKind::K, 4));
    const Matrix x = random_matrix(7, 7, rng);
    const auto mono = Monomial::from(A);
    REQUIRE(mono.has_value());
    CHECK(rel_diff(gen_transpose(x, *mono, *mono), gen_transpose(x, A, A)) < 1e-14);
}

TEST_CASE("exp and log are mutually inverse near the identity") {
    std::mt19937_64 rng(11);
    const Matrix x = random_matrix(5, 5, rng, 0.3);
    CHECK(rel_diff(matrix_log(matrix_exp(x)), x) < 1e-11);
    const Matrix big = random_matrix(4, 4, rng, 3.0);
    const Matrix e = matrix_exp(big);
    CHECK(rel_diff(matrix_exp(big * 0.5) * matrix_exp(big * 0.5), e) < 1e-10);
}

TEST_CASE("exp of a diagonal matrix") {
    const Matrix d = Matrix::diagonal({cplx(1.0), cplx(0.0, 3.14159265358979323846)});
    const Matrix e = matrix_exp(d);
    CHECK(std::abs(e(0, 0) - std::exp(1.0)) < 1e-13);
    CHECK(std::abs(e(1, 1) - cplx(-1.0)) < 1e-13);
}

TEST_CASE("inverse, determinant and solve") {
    std::mt19937_64 rng(13);
    const Matrix a = random_matrix(6, 6, rng);
    CHECK(rel_diff(a * inverse(a), Matrix::identity(6)) < 1e-10);
    CHECK(std::abs(determinant(a * a) - determinant(a) * determinant(a)) < 1e-9 * std::abs(determinant(a * a)));
    const Matrix b = random_matrix(6, 2, rng);
    CHECK(rel_diff(a * solve(a, b), b) < 1e-10);
    CHECK_THROWS_AS(inverse(Matrix(3, 3)), SingularMatrixError);
    CHECK_THROWS_AS(Matrix(2, 3) * Matrix(2, 3), DimensionError);
}

TEST_CASE("block partition addressing") {
    const BlockPartition part({2, 1, 3});
    CHECK(part.dim() == 6);
    CHECK(part.offset(3) == 3);
    CHECK(part.block_of(2) == 2);
    Matrix m(6, 6);
    set_block(m, part, 1, 3, Matrix(2, 3, 1.0));
    CHECK(block(m, part, 1, 3).max_abs() == 1.0);
    CHECK(block(m, part, 3, 1).max_abs() == 0.0);
}
