#pragma once

// Independent oracles shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ltoda/toda_system.hpp"

namespace ltoda::oracle {

inline GradationSpec make(Family f, int n, int M, CaseKind c, int nu, std::vector<int> na, std::vector<int> ka) {
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

inline const std::vector<Family> kFamilies = {Family::gl_inner, Family::sl_inner, Family::so_inner,
                                              Family::sp_inner, Family::gl_outer, Family::so_outer};

/// Loop-type, non-trivial specs of one family within the caps.
inline std::vector<GradationSpec> loop_specs(Family f, int n_max, int M_max) {
    std::vector<GradationSpec> out;
    for (int n = 1; n <= n_max; ++n)
        for (int M = 1; M <= M_max; ++M) {
            if (f == Family::sp_inner && n % 2) continue;
            if (is_outer_family(f) && M % 2) continue;
            if (f == Family::so_outer && (n < 4 || n % 2)) continue;
            for (const auto& s : enumerate_specs(f, n, M)) {
                // Equal gaps are necessary for loop type; skip the projector work otherwise.
                if (std::adjacent_find(s.k_alpha.begin(), s.k_alpha.end(), std::not_equal_to<>()) != s.k_alpha.end())
                    continue;
                const auto g = make_graded(s);
                if (g.loop_type && s.kase != CaseKind::trivial_h) out.push_back(s);
            }
        }
    return out;
}

inline std::vector<GradationSpec> loop_specs(int n_max, int M_max) {
    std::vector<GradationSpec> out;
    for (Family f : kFamilies)
        for (auto& s : loop_specs(f, n_max, M_max)) out.push_back(std::move(s));
    return out;
}

struct Expected {
    Archetype a;
    std::optional<Form> F1, F2;
    bool mirrored = false;
    int sign0 = 0, signs = 0; // 0 means "not asserted"
};

/// Archetype predicted from family, case and parity of p alone.
inline Expected expected_archetype(const GradationSpec& s) {
    const int p = s.p();
    const bool even = p % 2 == 0;
    if (p == 1) return {Archetype::single};
    switch (s.family) {
    case Family::gl_inner:
    case Family::sl_inner: return {Archetype::T1};
    case Family::so_outer: return {Archetype::T2, Form::J, Form::J};
    case Family::so_inner:
        if (s.kase == CaseKind::m1_eq_M)
            return even ? Expected{Archetype::T2, Form::J, Form::J} : Expected{Archetype::T3, Form::J, {}, false, 0, -1};
        return even ? Expected{Archetype::T4, {}, {}, false, -1, -1} : Expected{Archetype::T3, Form::J, {}, true};
    case Family::sp_inner:
        if (s.kase == CaseKind::m1_eq_M)
            return even ? Expected{Archetype::T2, Form::K, Form::K} : Expected{Archetype::T3, Form::K, {}, false, 0, 1};
        return even ? Expected{Archetype::T4, {}, {}, false, 1, 1} : Expected{Archetype::T3, Form::K, {}, true, 1, 0};
    case Family::gl_outer:
        if (s.kase == CaseKind::m1_eq_M)
            return even ? Expected{Archetype::T2, Form::J, Form::K} : Expected{Archetype::T3, Form::J, {}, false, 0, 1};
        return even ? Expected{Archetype::T4, {}, {}, false, -1, 1} : Expected{Archetype::T3, Form::K, {}, true, -1, 0};
    }
    return {Archetype::T1};
}

/// Empty when the system matches the table; otherwise the first mismatch.
inline std::string archetype_mismatch(const TodaSystem& sys) {
    const Expected e = expected_archetype(sys.spec);
    if (sys.archetype != e.a) return "archetype " + sys.archetype_name;
    if (e.F1 && sys.F1 != e.F1) return "first end form";
    if (e.F2 && sys.F2 != e.F2) return "second end form";
    if (sys.mirrored != e.mirrored) return "mirroring";
    if (e.sign0 && sys.end_sign_0 != e.sign0) return "slot 0 source symmetry";
    if (e.signs && sys.end_sign_s != e.signs) return "slot s source symmetry";

    // G0 from the block sizes: one factor per independent slot, the constrained ends orthogonal or symplectic.
    const int p = sys.spec.p();
    const auto& n = sys.spec.n_alpha;
    int s = p;
    if (e.a == Archetype::T2) s = p / 2 + 1;
    if (e.a == Archetype::T3) s = (p + 1) / 2;
    if (e.a == Archetype::T4) s = p / 2;
    if (sys.s != s) return "number of independent fields " + std::to_string(sys.s);
    std::string g0;
    for (int a = 1; a <= s; ++a) {
        std::optional<Form> F;
        if ((e.a == Archetype::T2 || (e.a == Archetype::T3 && !e.mirrored)) && a == 1) F = e.F1;
        if (e.a == Archetype::T2 && a == s) F = e.F2;
        if (e.a == Archetype::T3 && e.mirrored && a == s) F = e.F1;
        const char* name = !F ? "GL_" : *F == Form::J ? "SO_" : "Sp_";
        if (F == Form::K && n[a - 1] % 2) return "odd symplectic end";
        if (sys.spec.family == Family::so_outer && F && n[a - 1] % 2 == 0) return "even so-outer end";
        g0 += (a > 1 ? " × " : "") + std::string(name) + std::to_string(n[a - 1]);
    }
    if (e.a == Archetype::single) g0 = sys.sl ? "SL_" + std::to_string(sys.spec.n) : "GL_" + std::to_string(n[0]);
    else if (sys.sl) g0 = "S(" + g0 + ")";
    if (sys.G0 != g0) return "G0 " + sys.G0 + ", expected " + g0;
    return {};
}

/// Diagonal blocks of [c_-, Gamma^{-1} c_+ Gamma] from full matrices.
inline Matrix commutator_oracle(const TodaSystem& sys, const std::vector<Matrix>& gamma, const std::vector<Matrix>& cp,
                                const std::vector<Matrix>& cm) {
    const Matrix G = assemble_fields(sys, gamma);
    const Matrix c = commutator(assemble_sources(sys, -1, cm), inverse(G) * assemble_sources(sys, 1, cp) * G);
    std::vector<Matrix> diag;
    for (int a = 1; a <= sys.p; ++a) diag.push_back(block(c, sys.partition, a, a));
    return block_diagonal(diag);
}

} // namespace ltoda::oracle
