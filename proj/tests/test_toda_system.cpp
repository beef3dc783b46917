#include "doctest.h"

#include <algorithm>
#include <functional>
#include <random>

#include "ltoda/toda_system.hpp"
#include "oracles.hpp"

using namespace ltoda;

namespace {

using oracle::make;
using oracle::loop_specs;

TodaSystem sys_of(const GradationSpec& s) { return build_system(make_graded(s)); }

void check_matches_table(const TodaSystem& sys) {
    INFO(spec_to_json(sys.spec), " -> ", sys.archetype_name);
    CHECK(oracle::archetype_mismatch(sys) == "");
}

Matrix block_diag_rhs(const TodaSystem&, const std::vector<Matrix>& r) { return block_diagonal(r); }

using oracle::commutator_oracle;

} // namespace

TEST_CASE("gl-inner with p = 2 has four scalar sources") {
    const auto sys = sys_of(make(Family::gl_inner, 2, 2, CaseKind::m1_eq_M, 1, {1, 1}, {1}));
    CHECK(sys.archetype == Archetype::T1);
    CHECK(sys.G0 == "GL_1 × GL_1");
    CHECK(sys.independent_fields().size() == 2);
    CHECK(sys.independent_sources(1).size() == 2);
    CHECK(sys.independent_sources(-1).size() == 2);
    for (const auto& c : sys.plus) CHECK((c.rows == 1 && c.cols == 1));
    CHECK_FALSE(sys.reducible);
}

TEST_CASE("so_5 with n = (1,2,2) is a one-end system with an SO_1 factor") {
    const auto sys = sys_of(make(Family::so_inner, 5, 3, CaseKind::m1_eq_M, 1, {1, 2, 2}, {1, 1}));
    CHECK(sys.archetype == Archetype::T3);
    CHECK(sys.F1 == Form::J);
    CHECK(sys.G0 == "SO_1 × GL_2");
    CHECK(sys.s == 2);
    CHECK(sys.end_sign_s == -1);
    CHECK_FALSE(sys.mirrored);
    CHECK(sys.fields[2].tied_to == 2);
    CHECK(sys.fields[2].tie_form == Form::J);
}

TEST_CASE("sp with odd p has a symmetric end source") {
    const auto sys = sys_of(make(Family::sp_inner, 6, 3, CaseKind::m1_eq_M, 1, {2, 2, 2}, {1, 1}));
    CHECK(sys.archetype == Archetype::T3);
    CHECK(sys.F1 == Form::K);
    CHECK(sys.end_sign_s == 1);
    CHECK(sys.G0 == "Sp_2 × GL_2");
}

TEST_CASE("sl single field and sl cyclic G0") {
    const auto one = sys_of(make(Family::sl_inner, 3, 1, CaseKind::trivial_h, 1, {3}, {}));
    CHECK(one.archetype == Archetype::single);
    CHECK(one.G0 == "SL_3");
    CHECK(one.plus[0].symmetry == Symmetry::traceless);
    const auto cyc = sys_of(make(Family::sl_inner, 3, 3, CaseKind::m1_eq_M, 1, {1, 1, 1}, {1, 1}));
    CHECK(cyc.G0 == "S(GL_1 × GL_1 × GL_1)");
}

TEST_CASE("wrong L is a contract error") {
    const auto g = make_graded(make(Family::gl_inner, 2, 2, CaseKind::m1_eq_M, 1, {1, 1}, {1}));
    CHECK_THROWS_AS(build_system(g, 2), ContractError);
    CHECK_NOTHROW(build_system(g, 1));
}

TEST_CASE("archetype table over all loop-type gradations, n <= 8, M <= 12") {
    const auto specs = loop_specs(8, 12);
    REQUIRE(specs.size() > 100);
    for (const auto& s : specs) check_matches_table(sys_of(s));
}

TEST_CASE("sources lie in the grades +-L and the RHS lies in the zero subalgebra") {
    std::mt19937_64 rng(3);
    for (const auto& s : loop_specs(6, 8)) {
        const auto g = make_graded(s);
        const auto sys = build_system(g);
        INFO(spec_to_json(s));
        const auto gamma = random_fields(sys, rng, 0.3);
        const auto cp = random_sources(sys, 1, rng);
        const auto cm = random_sources(sys, -1, rng);
        const Matrix P = assemble_sources(sys, 1, cp), N = assemble_sources(sys, -1, cm);
        CHECK(rel_diff(project(g, P, sys.L % g.M), P) < 1e-10);
        CHECK(rel_diff(project(g, N, (g.M - sys.L % g.M) % g.M), N) < 1e-10);
        CHECK(is_in_algebra(P, g.algebra()));
        CHECK(is_in_algebra(N, g.algebra()));

        const Matrix G = assemble_fields(sys, gamma);
        const Matrix logG = matrix_log(G);
        CHECK(rel_diff(project(g, logG, 0), logG) < 1e-9);
        CHECK(is_in_algebra(logG, g.algebra(), 1e-9));

        const auto r = rhs_full(sys, gamma, cp, cm);
        const Matrix R = block_diag_rhs(sys, r);
        CHECK(rel_diff(R, commutator_oracle(sys, gamma, cp, cm)) < 1e-10);
        CHECK(rel_diff(project(g, R, 0), R) < 1e-9);
        CHECK(is_in_algebra(R, g.algebra(), 1e-9));
    }
}

TEST_CASE("constraint checks reject off-manifold data") {
    const auto sys = sys_of(make(Family::so_inner, 5, 3, CaseKind::m1_eq_M, 1, {1, 2, 2}, {1, 1}));
    std::mt19937_64 rng(1);
    auto gamma = random_fields(sys, rng);
    auto cp = random_sources(sys, 1, rng), cm = random_sources(sys, -1, rng);
    CHECK_NOTHROW(rhs(sys, gamma, cp, cm));
    auto bad = gamma;
    bad[0] = Matrix{{2.0}};
    CHECK_THROWS_AS(rhs(sys, bad, cp, cm), ContractError);
    // The end source is antisymmetric under ^J; a symmetric perturbation breaks it.
    auto badc = cp;
    const int s = sys.s % sys.p;
    badc[s] += Matrix::identity(badc[s].rows()) * cplx(0.0);
    badc[s](0, 0) += 1.0;
    CHECK_THROWS_AS(rhs(sys, gamma, badc, cm), ContractError);
}

TEST_CASE("T1 systems are invariant under a cyclic shift of the blocks") {
    const auto a = sys_of(make(Family::gl_inner, 3, 3, CaseKind::m1_eq_M, 1, {1, 1, 1}, {1, 1}));
    std::mt19937_64 rng(5);
    auto gamma = random_fields(a, rng);
    auto cp = random_sources(a, 1, rng), cm = random_sources(a, -1, rng);
    const auto r = rhs_full(a, gamma, cp, cm);
    // Relabel alpha -> alpha + 1: fields rotate, slot sigma -> sigma + 1.
    const int p = a.p;
    std::vector<Matrix> g2(p), p2(p), m2(p);
    for (int i = 0; i < p; ++i) {
        g2[(i + 1) % p] = gamma[i];
        p2[(i + 1) % p] = cp[i];
        m2[(i + 1) % p] = cm[i];
    }
    const auto r2 = rhs_full(a, g2, p2, m2);
    for (int i = 0; i < p; ++i) CHECK(rel_diff(r2[(i + 1) % p], r[i]) < 1e-12);
}

TEST_CASE("reducible systems are flagged when a source block is empty") {
    // gl_3 with cyclic gaps (1, 2, 2) is not of loop type.
    const auto sys = sys_of(make(Family::gl_inner, 3, 5, CaseKind::m1_eq_M, 1, {1, 1, 1}, {1, 2}));
    CHECK(sys.reducible);
    CHECK(sys.L == 1);
}

TEST_CASE("describe is deterministic and round trips") {
    for (const auto& s : loop_specs(4, 4)) {
        const auto sys = sys_of(s);
        const std::string j = describe(sys, DescribeFormat::json);
        const auto back = system_from_description(j);
        CHECK(describe(back, DescribeFormat::json) == j);
        CHECK(describe(sys, DescribeFormat::text) == describe(back, DescribeFormat::text));
        const std::string tex = describe(sys, DescribeFormat::latex);
        CHECK(tex.find("\\begin{align*}") != std::string::npos);
    }
    CHECK_THROWS_AS(system_from_description("{"), ParseError);
    CHECK_THROWS_AS(system_from_description("{\"archetype\": 1}"), ParseError);
    CHECK_THROWS_AS(describe_format_from_string("pdf"), DomainError);
}

TEST_CASE("describe text shows the tied field and dependent sources") {
    const auto sys = sys_of(make(Family::so_inner, 5, 3, CaseKind::m1_eq_M, 1, {1, 2, 2}, {1, 1}));
    const std::string t = describe(sys, DescribeFormat::text);
    CHECK(t.find("(^J Gamma_2)^-1") != std::string::npos);
    CHECK(t.find("T3-one-end(J,antisymmetric)") != std::string::npos);
}

TEST_CASE("registered equivalences map solutions of one system to the other") {
    const std::vector<GradationSpec> sources = {
        make(Family::so_inner, 4, 3, CaseKind::m1_lt_M, -1, {1, 2, 1}, {1, 1}),
        make(Family::sp_inner, 6, 3, CaseKind::m1_lt_M, -1, {2, 2, 2}, {1, 1}),
    };
    for (const auto& s : sources) {
        REQUIRE(validate_spec(s).ok());
        const auto src = sys_of(s);
        REQUIRE(src.mirrored);
        const auto tgt = sys_of(equivalence_target_spec(s));
        CHECK_FALSE(tgt.mirrored);
        CHECK(tgt.archetype == Archetype::T3);
        std::mt19937_64 rng(11);
        SystemState st{random_fields(src, rng), random_sources(src, 1, rng), random_sources(src, -1, rng)};
        const auto mapped = equivalence_substitution(src, tgt, st);
        CHECK_NOTHROW(check_fields(tgt, mapped.gamma));
        CHECK_NOTHROW(check_sources(tgt, 1, mapped.plus));
        CHECK_NOTHROW(check_sources(tgt, -1, mapped.minus));
        const auto r_src = rhs(src, st.gamma, st.plus, st.minus);
        const auto r_tgt = rhs(tgt, mapped.gamma, mapped.plus, mapped.minus);
        const auto want = transport_residual(src, tgt, r_src);
        for (int b : tgt.independent_fields()) CHECK(rel_diff(r_tgt[b - 1], want[b - 1]) < 1e-10);
    }
}

TEST_CASE("unregistered equivalence pairs are rejected") {
    const auto a = sys_of(make(Family::so_inner, 5, 3, CaseKind::m1_eq_M, 1, {1, 2, 2}, {1, 1}));
    const auto b = sys_of(make(Family::sp_inner, 6, 3, CaseKind::m1_eq_M, 1, {2, 2, 2}, {1, 1}));
    CHECK_THROWS_AS(registered_equivalence(a, b), DomainError);
    CHECK_THROWS_AS(equivalence_target_spec(a.spec), DomainError);
}
