#include "doctest.h"

#include <random>
#include <algorithm>
#include <functional>
#include <numeric>
#include <set>

#include "ltoda/gradation.hpp"

using namespace ltoda;

namespace {

GradationSpec make(Family f, int n, int M, CaseKind c, int nu, std::vector<int> na, std::vector<int> ka) {
    GradationSpec s;
    s.family = f;
    s.n = n;
    s.M = M;
    s.kase = c;
    s.nu = nu;
    s.n_alpha = std::move(na);
    s.k_alpha = std::move(ka);
    return s;
}

// Independent count: multisets of Z_M of size n that contain 0 and whose
// elements generate Z_M, or are all zero.
int brute_force_gl_count(int n, int M) {
    int count = 0;
    std::vector<int> cur;
    std::function<void(int, int)> rec = [&](int left, int from) {
        if (left == 0) {
            if (cur.empty() || cur[0] != 0) return;
            int g = M;
            for (int v : cur) g = std::gcd(g, v);
            bool all_zero = std::all_of(cur.begin(), cur.end(), [](int v) { return v == 0; });
            if (all_zero || g == 1) ++count;
            return;
        }
        for (int v = from; v < M; ++v) {
            cur.push_back(v);
            rec(left - 1, v);
            cur.pop_back();
        }
    };
    rec(n, 0);
    return count;
}

} // namespace

TEST_CASE("validate_spec on the reference tuples") {
    CHECK(validate_spec(make(Family::gl_inner, 3, 2, CaseKind::m1_eq_M, 1, {2, 1}, {1})).ok());
    CHECK(validate_spec(make(Family::so_inner, 5, 3, CaseKind::m1_eq_M, 1, {1, 2, 2}, {1, 1})).ok());
    const auto bad = validate_spec(make(Family::so_inner, 5, 3, CaseKind::m1_eq_M, 1, {1, 3, 1}, {1, 1}));
    CHECK_FALSE(bad.ok());
    CHECK(bad.violates("size-mirror"));
    const auto gap = validate_spec(make(Family::so_inner, 5, 4, CaseKind::m1_eq_M, 1, {1, 2, 2}, {2, 2}));
    CHECK(gap.violates("gap-sum"));
    CHECK(validate_spec(make(Family::gl_inner, 3, 2, CaseKind::m1_eq_M, 1, {2, 1}, {2})).violates("k-sum-bound"));
    CHECK(validate_spec(make(Family::gl_inner, 3, 4, CaseKind::m1_eq_M, 1, {2, 1}, {2})).violates("exact-order"));
    CHECK(validate_spec(make(Family::gl_inner, 3, 2, CaseKind::m1_eq_M, 1, {3}, {})).violates("degenerate"));
    CHECK(validate_spec(make(Family::gl_inner, 4, 2, CaseKind::m1_eq_M, 1, {2, 1}, {1})).violates("structure"));
    CHECK(validate_spec(make(Family::gl_inner, 3, 2, CaseKind::m1_lt_M, 1, {2, 1}, {1})).violates("family"));
}

TEST_CASE("outer gl with m_1 < N: strict checks parity, permissive infers nu") {
    const auto s = make(Family::gl_outer, 2, 6, CaseKind::m1_lt_M, 1, {1, 1}, {2});
    // N - sum k = 1 is odd, so nu = -1 is the consistent choice.
    CHECK(validate_spec(s).violates("offset-parity"));
    const auto perm = validate_spec(s, ValidationMode::permissive);
    CHECK(perm.ok());
    CHECK(perm.notes.size() == 1);
    CHECK(effective_nu(s, ValidationMode::permissive) == -1);
}

TEST_CASE("build_h reference values") {
    const auto c = build_h(make(Family::gl_inner, 3, 2, CaseKind::m1_eq_M, 1, {2, 1}, {1}));
    CHECK(rel_diff(c.h, Matrix::diagonal({1.0, 1.0, -1.0})) < 1e-15);
    // so nu = -1, p = 1, M = 3: rejected as degenerate, but the exponents are still defined.
    const auto s = make(Family::so_inner, 2, 3, CaseKind::m1_lt_M, -1, {2}, {});
    CHECK(validate_spec(s).violates("degenerate"));
    const auto e = canonical_exponents(s);
    CHECK(e.m == std::vector<int>{2});
    const cplx mu = root_of_unity(2, 3) / root_of_unity(1, 6);
    const Matrix h = Matrix::diagonal({mu, mu});
    CHECK(rel_diff(jt(h) * h, Matrix::identity(2)) < 1e-14);
    CHECK_THROWS_AS(build_h(s), DomainError);
}

TEST_CASE("grading index follows the block formula") {
    const auto g = make_graded(make(Family::gl_inner, 2, 3, CaseKind::m1_eq_M, 1, {1, 1}, {1}));
    CHECK(grading_index(g, 1, 2) == std::set<int>{1});
    CHECK(grading_index(g, 2, 1) == std::set<int>{2});
    CHECK(grading_index(g, 1, 1) == std::set<int>{0});
    CHECK_THROWS_AS(grading_index(g, 3, 1), DimensionError);
    const auto o = make_graded(make(Family::gl_outer, 3, 4, CaseKind::m1_eq_M, 1, {1, 2}, {1}));
    CHECK(grading_index(o, 1, 2) == std::set<int>{1, 3});
    CHECK(grading_index(o, 2, 2) == std::set<int>{0, 2});
}

TEST_CASE("projector on gl_2 with h = diag(1,-1)") {
    const auto g = make_graded(make(Family::gl_inner, 2, 2, CaseKind::m1_eq_M, 1, {1, 1}, {1}));
    const Matrix e12 = Matrix::unit(2, 2, 0, 1);
    CHECK(rel_diff(project(g, e12, 1), e12) < 1e-15);
    CHECK(project(g, e12, 0).max_abs() < 1e-15);
}

TEST_CASE("projector completeness, idempotence and eigenvalues on random elements") {
    std::mt19937_64 rng(19);
    const auto g = make_graded(make(Family::so_inner, 5, 3, CaseKind::m1_eq_M, 1, {1, 2, 2}, {1, 1}));
    for (int trial = 0; trial < 10; ++trial) {
        Matrix x(5, 5);
        for (const auto& b : g.basis) x += b * cplx(std::normal_distribution<double>()(rng), 0.3);
        const auto parts = project_all(g, x);
        Matrix total(5, 5);
        for (int k = 0; k < g.M; ++k) {
            total += parts[k];
            CHECK(rel_diff(project(g, parts[k], k), parts[k]) < 1e-12);
            CHECK(rel_diff(g.automorphism().apply(parts[k]), parts[k] * root_of_unity(k, g.M)) < 1e-10);
        }
        CHECK(rel_diff(total, x) < 1e-12);
    }
}

TEST_CASE("block-diagonal elements are in the zero subspace") {
    const auto g = make_graded(make(Family::gl_inner, 3, 3, CaseKind::m1_eq_M, 1, {1, 2}, {1}));
    Matrix x(3, 3);
    x(0, 0) = 2.0;
    x(1, 2) = 1.0;
    x(2, 1) = 3.0;
    CHECK(rel_diff(project(g, x, 0), x) < 1e-14);
}

TEST_CASE("trivial and outer trivial gradations") {
    const auto t = make_graded(make(Family::gl_inner, 3, 4, CaseKind::trivial_h, 1, {3}, {}));
    CHECK(t.populated.at({1, 1}) == std::set<int>{0});
    CHECK(verify_gradation(t).ok());
    const auto o = make_graded(make(Family::gl_outer, 3, 2, CaseKind::trivial_h, 1, {3}, {}));
    CHECK(o.populated.at({1, 1}) == std::set<int>{0, 1});
    std::mt19937_64 rng(23);
    const Matrix x = random_matrix(3, 3, rng);
    const Matrix x0 = project(o, x, 0), x1 = project(o, x, 1);
    CHECK(rel_diff(jt(x0), -x0) < 1e-14);
    CHECK(rel_diff(jt(x1), x1) < 1e-14);
}

TEST_CASE("free offset of gl-inner does not change the gradation") {
    auto s = make(Family::gl_inner, 4, 5, CaseKind::m1_eq_M, 1, {1, 2, 1}, {1, 2});
    const auto a = make_graded(s);
    s.m_p_override = 1;
    const auto b = make_graded(s);
    CHECK(a.index_map == b.index_map);
    CHECK(a.populated == b.populated);
    for (const auto& e : a.basis)
        for (int k = 0; k < 5; ++k) CHECK(rel_diff(project(a, e, k), project(b, e, k)) < 1e-12);
}

TEST_CASE("outer gl: the square acts by eps_N^k") {
    const auto g = make_graded(make(Family::gl_outer, 4, 6, CaseKind::m1_eq_M, 1, {2, 1, 1}, {1, 1}));
    std::mt19937_64 rng(29);
    const Matrix x = random_matrix(4, 4, rng);
    for (int k = 0; k < 6; ++k) {
        const Matrix xk = project(g, x, k);
        const Matrix a2 = g.automorphism().apply(g.automorphism().apply(xk));
        CHECK(rel_diff(a2, xk * root_of_unity(k, 3)) < 1e-12);
    }
    CHECK(verify_gradation(g).ok());
}

TEST_CASE("L and loop type") {
    const auto g = make_graded(make(Family::gl_inner, 3, 3, CaseKind::m1_eq_M, 1, {1, 1, 1}, {1, 1}));
    CHECK(g.L == 1);
    CHECK(g.loop_type);
    const auto h = make_graded(make(Family::gl_inner, 2, 5, CaseKind::m1_eq_M, 1, {1, 1}, {3}));
    CHECK(h.L == 2);
    CHECK_FALSE(h.loop_type);
}

TEST_CASE("enumeration counts and order") {
    const auto gl = enumerate_specs(Family::gl_inner, 2, 2);
    REQUIRE(gl.size() == 2);
    CHECK(gl[0].kase == CaseKind::trivial_h);
    CHECK(gl[1].n_alpha == std::vector<int>{1, 1});
    const auto so = enumerate_specs(Family::so_inner, 2, 1);
    REQUIRE(so.size() == 1);
    CHECK(so[0].kase == CaseKind::trivial_h);
    for (int n = 1; n <= 5; ++n)
        for (int M = 1; M <= 6; ++M)
            CHECK(enumerate_specs(Family::gl_inner, n, M).size() == static_cast<std::size_t>(brute_force_gl_count(n, M)));
    CHECK(enumerate_specs(Family::gl_inner, 3, 3).size() == 6);
    CHECK_THROWS_AS(enumerate_specs(Family::sp_inner, 3, 2), DomainError);
    CHECK_THROWS_AS(enumerate_specs(Family::gl_inner, 17, 2), DomainError);
    CHECK_THROWS_AS(enumerate_specs(Family::gl_inner, 2, 25), DomainError);
    // Every yielded spec is unique.
    const auto all = enumerate_specs(Family::so_inner, 6, 8);
    std::set<std::string> seen;
    for (const auto& s : all) CHECK(seen.insert(spec_to_json(s)).second);
}

TEST_CASE("exhaustive small gradation sweep") {
    for (Family f : {Family::gl_inner, Family::so_inner, Family::sp_inner, Family::gl_outer})
        for (int n = 1; n <= 4; ++n)
            for (int M = 1; M <= 6; ++M) {
                std::vector<GradationSpec> specs;
                try {
                    specs = enumerate_specs(f, n, M);
                } catch (const DomainError&) {
                    continue;
                }
                for (const auto& s : specs) {
                    const auto g = make_graded(s);
                    const auto rep = verify_gradation(g);
                    INFO(spec_to_json(s));
                    CHECK(rep.ok());
                    CHECK(order_of(g.automorphism(), 64) == g.canon.order);
                    CHECK(verify_canonical(g).ok());
                }
            }
}

TEST_CASE("spec JSON round trip and strict parsing") {
    const auto s = make(Family::so_inner, 5, 3, CaseKind::m1_eq_M, 1, {1, 2, 2}, {1, 1});
    const std::string text = spec_to_json(s);
    CHECK(spec_from_json(text) == s);
    CHECK(spec_to_json(spec_from_json(text)) == text);
    CHECK_THROWS_AS(spec_from_json("{\"family\": \"gl-inner\""), ParseError);
    CHECK_THROWS_AS(spec_from_json(R"({"family":"gl-inner","n":1,"M":1,"case":"trivial-h","n_alpha":[1],"k_alpha":[],"extra":0})"),
                    ParseError);
    CHECK_THROWS_AS(spec_from_json(R"({"family":"xx","n":1,"M":1,"case":"trivial-h","n_alpha":[1],"k_alpha":[]})"),
                    ParseError);
}
