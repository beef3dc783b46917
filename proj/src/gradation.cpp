#include "ltoda/gradation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace ltoda {

namespace {

constexpr double kPi = 3.14159265358979323846;

int mod(long a, long m) { return static_cast<int>(((a % m) + m) % m); }

int sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

bool so_type(Family f) { return f == Family::so_inner || f == Family::so_outer; }

/// Pairing of blocks induced by B, 1-based, or empty when the family has no form.
std::vector<int> pairing_of(const GradationSpec& s) {
    const int p = s.p();
    std::vector<int> pi;
    if (s.family == Family::gl_inner || s.family == Family::sl_inner) return pi;
    pi.resize(p + 1);
    pi[0] = 0;
    const bool ends_fixed = s.kase == CaseKind::m1_eq_M || s.kase == CaseKind::trivial_h;
    for (int a = 1; a <= p; ++a) {
        if (ends_fixed) pi[a] = a == 1 ? 1 : p - a + 2;
        else pi[a] = p - a + 1;
    }
    return pi;
}

std::string list(const std::vector<int>& v) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ")";
    return os.str();
}

} // namespace

std::string to_string(Family f) {
    switch (f) {
    case Family::gl_inner: return "gl-inner";
    case Family::sl_inner: return "sl-inner";
    case Family::so_inner: return "so-inner";
    case Family::sp_inner: return "sp-inner";
    case Family::gl_outer: return "gl-outer";
    case Family::so_outer: return "so-outer";
    }
    return "?";
}

std::string to_string(CaseKind c) {
    switch (c) {
    case CaseKind::m1_eq_M: return "m1-eq-M";
    case CaseKind::m1_lt_M: return "m1-lt-M";
    case CaseKind::trivial_h: return "trivial-h";
    }
    return "?";
}

Family family_from_string(const std::string& s) {
    for (Family f : {Family::gl_inner, Family::sl_inner, Family::so_inner, Family::sp_inner, Family::gl_outer,
                     Family::so_outer})
        if (to_string(f) == s) return f;
    throw DomainError("unknown family '" + s + "'");
}

CaseKind case_from_string(const std::string& s) {
    for (CaseKind c : {CaseKind::m1_eq_M, CaseKind::m1_lt_M, CaseKind::trivial_h})
        if (to_string(c) == s) return c;
    throw DomainError("unknown case '" + s + "'");
}

bool is_outer_family(Family f) { return f == Family::gl_outer || f == Family::so_outer; }

bool ValidationReport::violates(const std::string& relation) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.relation == relation; });
}

cplx root_of_unity(long num, long den) {
    if (den <= 0) throw DomainError("root_of_unity needs a positive denominator");
    const int r = mod(num, den);
    if ((4L * r) % den == 0) {
        switch ((4L * r) / den) {
        case 0: return {1.0, 0.0};
        case 1: return {0.0, 1.0};
        case 2: return {-1.0, 0.0};
        case 3: return {0.0, -1.0};
        }
    }
    return std::polar(1.0, 2.0 * kPi * static_cast<double>(r) / static_cast<double>(den));
}

namespace {

bool structurally_ok(const GradationSpec& s, std::vector<Violation>& out) {
    auto bad = [&](const std::string& msg) { out.push_back({"structure", "structure violated: " + msg}); };
    if (s.n < 1) bad("n must be positive");
    if (s.M < 1) bad("M must be positive");
    if (s.nu != 1 && s.nu != -1) bad("nu must be +1 or -1");
    if (s.n_alpha.empty()) bad("n_alpha is empty");
    if (static_cast<int>(s.k_alpha.size()) != std::max(0, s.p() - 1))
        bad("k_alpha must have p - 1 = " + std::to_string(std::max(0, s.p() - 1)) + " entries");
    for (int v : s.n_alpha)
        if (v < 1) bad("block sizes must be positive");
    for (int v : s.k_alpha)
        if (v < 1) bad("gaps k_alpha must be positive");
    if (!s.n_alpha.empty() && sum(s.n_alpha) != s.n)
        bad("sum of n_alpha is " + std::to_string(sum(s.n_alpha)) + ", n = " + std::to_string(s.n));
    return out.empty();
}

} // namespace

int effective_nu(const GradationSpec& s, ValidationMode mode) {
    if (mode == ValidationMode::permissive && s.family == Family::gl_outer && s.kase == CaseKind::m1_lt_M &&
        s.M % 2 == 0) {
        const int rest = s.M / 2 - sum(s.k_alpha);
        return rest % 2 == 0 ? 1 : -1;
    }
    return s.nu;
}

int expected_order(const GradationSpec& s) {
    const bool outer = s.family == Family::gl_outer;
    if (s.kase == CaseKind::trivial_h || s.p() <= 1) return outer ? 2 : 1;
    const std::vector<int> pi = pairing_of(s);
    const BlockPartition part(s.n_alpha);
    // Prefix sums give the block differences m_alpha - m_beta.
    std::vector<int> pre(s.p() + 1, 0);
    for (int a = 1; a < s.p(); ++a) pre[a + 1] = pre[a] + s.k_alpha[a - 1];
    const int modulus = outer ? s.M / 2 : s.M;
    int g = modulus;
    for (int a = 1; a <= s.p(); ++a)
        for (int b = a + 1; b <= s.p(); ++b) {
            // Self-paired 1x1 blocks of the orthogonal forms vanish identically.
            if (so_type(s.family) && !pi.empty() && pi[a] == b && part.size(a) == 1) continue;
            g = std::gcd(g, pre[b] - pre[a]);
        }
    return s.M / g;
}

ValidationReport validate_spec(const GradationSpec& s, ValidationMode mode) {
    ValidationReport rep;
    auto& V = rep.violations;
    if (!structurally_ok(s, V)) return rep;
    auto fail = [&](const std::string& rel, const std::string& detail) {
        V.push_back({rel, rel + " violated: " + detail});
    };
    const int p = s.p();
    const int n = s.n;
    const int M = s.M;
    const int K = sum(s.k_alpha);
    const auto& na = s.n_alpha;
    const auto& k = s.k_alpha;
    const Family f = s.family;
    const bool outer = is_outer_family(f);

    // Admissible family/case combinations.
    bool allowed = true;
    if ((f == Family::gl_inner || f == Family::sl_inner) && s.kase == CaseKind::m1_lt_M) allowed = false;
    if (f == Family::so_outer && s.kase != CaseKind::m1_eq_M) allowed = false;
    if (!allowed) {
        fail("family", "case " + to_string(s.kase) + " does not exist for " + to_string(f));
        return rep;
    }
    if (s.kase != CaseKind::m1_lt_M && s.nu != 1)
        fail("family", "case " + to_string(s.kase) + " requires nu = 1");
    if (f == Family::sp_inner && n % 2 != 0) fail("size-parity", "sp needs even n, got " + std::to_string(n));
    if (outer && M % 2 != 0) fail("even-order", "outer gradations need even M = 2N, got M = " + std::to_string(M));

    if (s.kase == CaseKind::trivial_h) {
        if (p != 1) fail("degenerate", "trivial h has a single block, got p = " + std::to_string(p));
        return rep;
    }
    if (p == 1) {
        fail("degenerate", "p = 1 only occurs as the trivial-h case");
        return rep;
    }

    const int N = M / 2;
    auto mirror_sizes = [&](int shift) {
        // n_alpha = n_{p - alpha + shift}
        const int from = shift == 2 ? 2 : 1;
        for (int a = from; a <= p; ++a) {
            const int b = p - a + shift;
            if (na[a - 1] != na[b - 1]) {
                fail("size-mirror", "n_" + std::to_string(a) + " = " + std::to_string(na[a - 1]) + " != n_" +
                                        std::to_string(b) + " = " + std::to_string(na[b - 1]) + " in n_alpha = " +
                                        list(na));
                return;
            }
        }
    };
    auto mirror_gaps = [&](int shift) {
        // shift 1: k_alpha = k_{p-alpha+1}, alpha >= 2; shift 0: k_alpha = k_{p-alpha}
        const int from = shift == 1 ? 2 : 1;
        for (int a = from; a <= p - 1; ++a) {
            const int b = p - a + shift;
            if (k[a - 1] != k[b - 1]) {
                fail("gap-mirror", "k_" + std::to_string(a) + " = " + std::to_string(k[a - 1]) + " != k_" +
                                       std::to_string(b) + " = " + std::to_string(k[b - 1]) + " in k_alpha = " +
                                       list(k));
                return;
            }
        }
    };
    const int s_mid = p / 2 + 1; // self-paired end block for even p in the m_1 = M shapes

    switch (f) {
    case Family::gl_inner:
    case Family::sl_inner:
        if (K >= M) fail("k-sum-bound", "sum k = " + std::to_string(K) + " must be < M = " + std::to_string(M));
        break;
    case Family::so_inner:
    case Family::sp_inner: {
        const bool sp = f == Family::sp_inner;
        if (s.kase == CaseKind::m1_eq_M) {
            if ((n - na[0]) % 2 != 0) fail("size-parity", "n - n_1 = " + std::to_string(n - na[0]) + " must be even");
            mirror_sizes(2);
            mirror_gaps(1);
            if (K + k[0] != M)
                fail("gap-sum", "sum k + k_1 = " + std::to_string(K + k[0]) + " != M = " + std::to_string(M));
            if (p % 2 == 0) {
                if (M % 2 != 0) fail("even-order", "even p needs even M, got M = " + std::to_string(M));
                if (na[s_mid - 1] % 2 != 0)
                    fail("end-size", "n_" + std::to_string(s_mid) + " = " + std::to_string(na[s_mid - 1]) +
                                         " must be even");
                if (sp && na[0] % 2 != 0) fail("end-size", "n_1 = " + std::to_string(na[0]) + " must be even");
            }
        } else {
            if (n % 2 != 0) fail("size-parity", "n = " + std::to_string(n) + " must be even");
            mirror_sizes(1);
            mirror_gaps(0);
            const int rest = M - K + (s.nu == -1 ? 1 : 0);
            const std::string what = s.nu == -1 ? "M - sum k + 1 = " : "M - sum k = ";
            if (rest <= 0 || rest % 2 != 0)
                fail("offset-parity", what + std::to_string(rest) + " must be an even positive integer");
        }
        break;
    }
    case Family::gl_outer:
        if (M % 2 != 0) break;
        if (s.kase == CaseKind::m1_eq_M) {
            if ((n - na[0]) % 2 != 0) fail("size-parity", "n - n_1 = " + std::to_string(n - na[0]) + " must be even");
            mirror_sizes(2);
            mirror_gaps(1);
            if (K + k[0] != N)
                fail("gap-sum", "sum k + k_1 = " + std::to_string(K + k[0]) + " != N = " + std::to_string(N));
        } else {
            if (n % 2 != 0) fail("size-parity", "n = " + std::to_string(n) + " must be even");
            mirror_sizes(1);
            mirror_gaps(0);
            const int rest = N - K;
            if (rest <= 0) {
                fail("offset-parity", "N - sum k = " + std::to_string(rest) + " must be positive");
            } else if (mode == ValidationMode::strict) {
                const int want = s.nu == 1 ? 0 : 1;
                if (rest % 2 != want)
                    fail("offset-parity", "N - sum k = " + std::to_string(rest) + " must be " +
                                              (want == 0 ? "even" : "odd") + " for nu = " + std::to_string(s.nu));
            } else {
                const int inferred = rest % 2 == 0 ? 1 : -1;
                if (inferred != s.nu)
                    rep.notes.push_back("nu inferred as " + std::to_string(inferred) + " from the parity of N - sum k = " +
                                        std::to_string(rest));
            }
        }
        break;
    case Family::so_outer:
        if (n % 2 != 0 || n < 4) fail("size-parity", "so outer gradations need even n >= 4, got " + std::to_string(n));
        if (p % 2 != 0) fail("structure", "p = " + std::to_string(p) + " must be even");
        if (M % 2 != 0) break;
        mirror_sizes(2);
        mirror_gaps(1);
        if (K + k[0] != M)
            fail("gap-sum", "sum k + k_1 = " + std::to_string(K + k[0]) + " != M = " + std::to_string(M));
        if (na[0] % 2 == 0) fail("end-size", "n_1 = " + std::to_string(na[0]) + " must be odd");
        if (p % 2 == 0 && na[s_mid - 1] % 2 == 0)
            fail("end-size", "n_" + std::to_string(s_mid) + " = " + std::to_string(na[s_mid - 1]) + " must be odd");
        break;
    }

    if (V.empty()) {
        const int ord = expected_order(s);
        if (ord != M)
            fail("exact-order", "the data describe an automorphism of order " + std::to_string(ord) + ", not M = " +
                                    std::to_string(M));
    }
    return rep;
}

Exponents canonical_exponents(const GradationSpec& s, ValidationMode mode) {
    std::vector<Violation> v;
    if (!structurally_ok(s, v)) throw DomainError(v.front().message);
    Exponents e;
    e.M = s.M;
    const int p = s.p();
    const int K = sum(s.k_alpha);
    const int nu = effective_nu(s, mode);
    e.m.assign(p, 0);
    auto down_from_top = [&](int m1) {
        e.m[0] = m1;
        for (int a = 1; a < p; ++a) e.m[a] = e.m[a - 1] - s.k_alpha[a - 1];
    };
    auto up_from_bottom = [&](int mp) {
        e.m[p - 1] = mp;
        for (int a = p - 2; a >= 0; --a) e.m[a] = e.m[a + 1] + s.k_alpha[a];
    };
    bool half = false;
    if (s.kase == CaseKind::trivial_h) {
        if (s.family == Family::so_inner || s.family == Family::sp_inner) {
            // A scalar h; nu = -1 needs an odd multiple of half the order.
            if (nu == -1) {
                half = true;
                up_from_bottom((s.M - K + 1) / 2);
            } else {
                up_from_bottom(s.M);
            }
        } else {
            up_from_bottom(s.M);
        }
    } else {
        switch (s.family) {
        case Family::gl_inner:
        case Family::sl_inner: up_from_bottom(s.m_p_override.value_or(s.M - K)); break;
        case Family::so_inner:
        case Family::sp_inner:
            if (s.kase == CaseKind::m1_eq_M) {
                down_from_top(s.M);
            } else if (nu == 1) {
                up_from_bottom((s.M - K) / 2);
            } else {
                half = true;
                up_from_bottom((s.M - K + 1) / 2);
            }
            break;
        case Family::gl_outer:
            if (s.kase == CaseKind::m1_eq_M) {
                down_from_top(s.M / 2);
            } else if (nu == 1) {
                up_from_bottom((s.M / 2 - K) / 2);
            } else {
                half = true;
                up_from_bottom((s.M / 2 - K + 1) / 2);
            }
            break;
        case Family::so_outer: down_from_top(s.M); break;
        }
    }
    e.rho = half ? root_of_unity(-1, 2L * s.M) : cplx{1.0, 0.0};
    return e;
}

CanonicalForm build_h(const GradationSpec& s, ValidationMode mode) {
    const ValidationReport rep = validate_spec(s, mode);
    if (!rep.ok()) {
        std::string msg = "invalid gradation spec:";
        for (const auto& v : rep.violations) msg += " " + v.message + ";";
        throw DomainError(msg);
    }
    const Exponents e = canonical_exponents(s, mode);
    const bool half = e.rho != cplx{1.0, 0.0};
    const int n = s.n;
    const int p = s.p();
    const bool trivial = s.kase == CaseKind::trivial_h;

    std::vector<cplx> d;
    d.reserve(n);
    for (int a = 0; a < p; ++a) {
        const cplx mu = trivial && !half ? cplx{1.0, 0.0}
                                         : root_of_unity(2L * e.m[a] - (half ? 1 : 0), 2L * s.M);
        for (int i = 0; i < s.n_alpha[a]; ++i) d.push_back(mu);
    }
    CanonicalForm c;
    c.h = Matrix::diagonal(d);
    const int n1 = s.n_alpha[0];
    const bool split = s.kase == CaseKind::m1_eq_M;
    auto two_part = [&](SpecialKind a, SpecialKind b) {
        if (!split || n1 == n) return special_matrix(a, n);
        return direct_sum(special_matrix(a, n1), special_matrix(b, n - n1));
    };
    switch (s.family) {
    case Family::gl_inner: c.algebra = AlgebraForm::gl(n); break;
    case Family::sl_inner: c.algebra = AlgebraForm::sl(n); break;
    case Family::so_inner:
    case Family::so_outer:
        c.B = two_part(SpecialKind::J, SpecialKind::J);
        c.algebra = AlgebraForm::twisted(*c.B);
        break;
    case Family::sp_inner:
        c.B = two_part(SpecialKind::K, SpecialKind::K);
        c.algebra = AlgebraForm::twisted(*c.B);
        break;
    case Family::gl_outer:
        c.algebra = AlgebraForm::gl(n);
        if (trivial) c.B = special_matrix(SpecialKind::J, n);
        else if (split) c.B = two_part(SpecialKind::J, SpecialKind::K);
        else c.B = special_matrix(SpecialKind::K, n);
        break;
    }
    const int nu = effective_nu(s, mode);
    c.nu = static_cast<double>(nu);
    if (s.family == Family::gl_outer) {
        c.automorphism = AutomorphismRep::outer(c.algebra, c.h, *c.B, s.M);
        Matrix target = Matrix::identity(n);
        if (!trivial && split)
            for (int i = n1; i < n; ++i) target(i, i) = -1.0;
        if (!trivial && !split) target = target * cplx{-1.0, 0.0};
        c.form_target = target;
    } else {
        c.automorphism = AutomorphismRep::inner(c.algebra, c.h, s.M, c.nu);
        if (c.B) c.form_target = Matrix::identity(n);
    }
    c.order = expected_order(s);
    return c;
}

std::vector<int> GradedAlgebra::cyclic_gaps() const {
    std::vector<int> g = spec.k_alpha;
    if (spec.p() >= 2) g.push_back(m.back() - m.front() + period);
    return g;
}

GradedAlgebra make_graded(const GradationSpec& s, ValidationMode mode) {
    GradedAlgebra g;
    g.spec = s;
    g.spec.nu = effective_nu(s, mode);
    g.canon = build_h(s, mode);
    g.partition = BlockPartition(s.n_alpha);
    g.m = canonical_exponents(s, mode).m;
    g.M = s.M;
    g.period = g.is_outer() ? s.M / 2 : s.M;
    g.pairing = pairing_of(s);
    const int p = s.p();
    for (int a = 1; a <= p; ++a)
        for (int b = 1; b <= p; ++b) {
            const int d = g.m[a - 1] - g.m[b - 1];
            std::set<int> idx{mod(d, g.M)};
            if (g.is_outer()) idx.insert(mod(d + g.M / 2, g.M));
            g.index_map[{a, b}] = idx;
        }
    g.basis = algebra_basis(g.algebra());
    for (const Matrix& b : g.basis) {
        const std::vector<Matrix> parts = project_all(g, b);
        for (int k = 0; k < g.M; ++k) {
            if (parts[k].max_abs() <= 1e-12) continue;
            for (int a = 1; a <= p; ++a)
                for (int c = 1; c <= p; ++c)
                    if (block(parts[k], g.partition, a, c).max_abs() > 1e-12) g.populated[{a, c}].insert(k);
        }
    }
    int L = 0;
    for (const auto& [key, set] : g.populated)
        for (int k : set)
            if (k != 0 && (L == 0 || k < L)) L = k;
    g.L = L;
    if (p >= 2 && L > 0) {
        const auto gaps = g.cyclic_gaps();
        g.loop_type = std::all_of(gaps.begin(), gaps.end(), [&](int x) { return x == L; });
    }
    return g;
}

std::set<int> grading_index(const GradedAlgebra& g, int alpha, int beta) {
    const int p = g.spec.p();
    if (alpha < 1 || alpha > p || beta < 1 || beta > p)
        throw DimensionError("block index (" + std::to_string(alpha) + ", " + std::to_string(beta) +
                             ") out of range for p = " + std::to_string(p));
    return g.index_map.at({alpha, beta});
}

std::vector<Matrix> project_all(const GradedAlgebra& g, const Matrix& x) {
    const int M = g.M;
    std::vector<Matrix> powers;
    powers.reserve(M);
    powers.push_back(x);
    for (int j = 1; j < M; ++j) powers.push_back(g.automorphism().apply(powers.back()));
    std::vector<Matrix> out(M, Matrix(x.rows(), x.cols()));
    for (int k = 0; k < M; ++k) {
        Matrix acc(x.rows(), x.cols());
        for (int j = 0; j < M; ++j) {
            const cplx w = root_of_unity(-static_cast<long>(j) * k, M);
            const auto& src = powers[j].data();
            auto& dst = acc.data();
            for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += w * src[t];
        }
        out[k] = acc * cplx{1.0 / M, 0.0};
    }
    return out;
}

Matrix project(const GradedAlgebra& g, const Matrix& x, int k) {
    const int M = g.M;
    const int kk = mod(k, M);
    Matrix acc(x.rows(), x.cols());
    Matrix y = x;
    for (int j = 0; j < M; ++j) {
        if (j > 0) y = g.automorphism().apply(y);
        acc += y * root_of_unity(-static_cast<long>(j) * kk, M);
    }
    return acc * cplx{1.0 / M, 0.0};
}

GradationReport verify_gradation(const GradedAlgebra& g, double tol) {
    GradationReport rep;
    const int M = g.M;
    const int p = g.spec.p();
    const AutomorphismRep& A = g.automorphism();
    auto failure = [&](bool& flag, const std::string& msg) {
        flag = false;
        if (rep.failures.size() < 20) rep.failures.push_back(msg);
    };
    std::vector<std::vector<Matrix>> graded(M);
    for (const Matrix& b : g.basis) {
        const std::vector<Matrix> parts = project_all(g, b);
        Matrix total(b.rows(), b.cols());
        for (int k = 0; k < M; ++k) {
            const Matrix& x = parts[k];
            total += x;
            if (x.max_abs() <= 1e-12) continue;
            graded[k].push_back(x);
            const double eig = rel_diff(A.apply(x), x * root_of_unity(k, M));
            if (eig > tol) failure(rep.eigen_ok, "eigenvalue mismatch " + std::to_string(eig) + " at index " + std::to_string(k));
            Matrix bx;
            if (g.is_outer()) bx = gen_transpose(x, *g.canon.B);
            for (int a = 1; a <= p; ++a)
                for (int c = 1; c <= p; ++c) {
                    const Matrix blk = block(x, g.partition, a, c);
                    if (blk.max_abs() <= 1e-12) continue;
                    if (!g.index_map.at({a, c}).count(k))
                        failure(rep.support_ok, "index " + std::to_string(k) + " found in block (" + std::to_string(a) +
                                                    ", " + std::to_string(c) + ")");
                    if (g.is_outer()) {
                        // Sign of x_ab against (^B x)_ab from the index range and block position.
                        const bool low = k < M / 2;
                        const double sign = ((a <= c) == low) ? -1.0 : 1.0;
                        const Matrix bb = block(bx, g.partition, a, c);
                        if ((blk - bb * cplx{sign, 0.0}).max_abs() > tol * std::max(1.0, blk.max_abs()))
                            failure(rep.table_ok, "block (" + std::to_string(a) + ", " + std::to_string(c) +
                                                      ") at index " + std::to_string(k) + " breaks the symmetry table");
                    }
                }
        }
        const double err = rel_diff(total, b);
        rep.completeness_err = std::max(rep.completeness_err, err);
        if (err > 1e-12) failure(rep.completeness_ok, "projections do not sum to the element: " + std::to_string(err));
    }
    for (const auto& [key, set] : g.populated)
        for (int k : set)
            if (!g.index_map.at(key).count(k)) rep.support_ok = false;

    for (int k = 0; k < M; ++k)
        for (int l = k; l < M; ++l) {
            const cplx w = root_of_unity(k + l, M);
            for (const Matrix& x : graded[k])
                for (const Matrix& y : graded[l]) {
                    const Matrix z = commutator(x, y);
                    const double err = rel_diff(A.apply(z), z * w);
                    rep.closure_err = std::max(rep.closure_err, err);
                    if (err > tol)
                        failure(rep.closure_ok, "bracket of indices " + std::to_string(k) + " and " + std::to_string(l) +
                                                    " leaves index " + std::to_string((k + l) % M));
                }
        }

    // The zero subspace against the block-diagonal members of the algebra.
    for (const Matrix& x : graded[0])
        for (int a = 1; a <= p; ++a)
            for (int c = 1; c <= p; ++c)
                if (a != c && block(x, g.partition, a, c).max_abs() > 1e-12)
                    failure(rep.zero_block_diagonal_ok, "zero subspace has an off-diagonal block");
    for (const Matrix& b : g.basis) {
        Matrix bd(b.rows(), b.cols());
        for (int a = 1; a <= p; ++a) set_block(bd, g.partition, a, a, block(b, g.partition, a, a));
        if (bd.max_abs() <= 1e-12) continue;
        if (!g.is_outer()) {
            if (rel_diff(project(g, bd, 0), bd) > tol)
                failure(rep.zero_block_diagonal_ok, "a block-diagonal element is not in the zero subspace");
        } else {
            // Diagonal blocks of an outer gradation only carry the indices 0 and N.
            const Matrix sum2 = project(g, bd, 0) + project(g, bd, M / 2);
            if (rel_diff(sum2, bd) > tol)
                failure(rep.zero_block_diagonal_ok, "a block-diagonal element leaves the indices 0 and N");
        }
    }
    return rep;
}

namespace {

void compositions(int n, int parts, std::vector<int>& cur, const std::function<bool(const std::vector<int>&)>& f,
                  bool& go) {
    if (!go) return;
    if (parts == 0) {
        if (n == 0) go = f(cur);
        return;
    }
    for (int v = 1; v <= n - (parts - 1) && go; ++v) {
        cur.push_back(v);
        compositions(n - v, parts - 1, cur, f, go);
        cur.pop_back();
    }
}

void bounded_tuples(int len, int budget, std::vector<int>& cur, const std::function<bool(const std::vector<int>&)>& f,
                    bool& go) {
    if (!go) return;
    if (len == 0) {
        go = f(cur);
        return;
    }
    for (int v = 1; v <= budget - (len - 1) && go; ++v) {
        cur.push_back(v);
        bounded_tuples(len - 1, budget - v, cur, f, go);
        cur.pop_back();
    }
}

} // namespace

void enumerate_specs(Family family, int n, int M, const std::optional<CaseKind>& case_filter,
                     const std::function<bool(const GradationSpec&)>& sink, EnumerationCaps caps) {
    if (n < 1 || M < 1) throw DomainError("n and M must be positive");
    if (n > caps.n_max) throw DomainError("n = " + std::to_string(n) + " exceeds the cap " + std::to_string(caps.n_max));
    if (M > caps.M_max) throw DomainError("M = " + std::to_string(M) + " exceeds the cap " + std::to_string(caps.M_max));
    if (family == Family::sp_inner && n % 2 != 0) throw DomainError("n must be even for sp-inner, got " + std::to_string(n));
    if (is_outer_family(family) && M % 2 != 0)
        throw DomainError("outer gradations need even M, got " + std::to_string(M));
    if (family == Family::so_outer && (n < 4 || n % 2 != 0))
        throw DomainError("so-outer needs even n >= 4, got " + std::to_string(n));

    std::vector<std::pair<CaseKind, int>> variants;
    for (CaseKind c : {CaseKind::m1_eq_M, CaseKind::m1_lt_M, CaseKind::trivial_h}) {
        if (case_filter && *case_filter != c) continue;
        if (c == CaseKind::m1_lt_M) {
            if (family == Family::so_inner || family == Family::sp_inner || family == Family::gl_outer) {
                variants.push_back({c, -1});
                variants.push_back({c, 1});
            }
        } else {
            variants.push_back({c, 1});
        }
    }
    const int budget = family == Family::gl_outer ? M / 2 : M;
    bool go = true;
    for (int p = 1; p <= n && go; ++p) {
        std::vector<int> comp;
        compositions(n, p, comp, [&](const std::vector<int>& na) {
            std::vector<int> kt;
            bool inner_go = true;
            bounded_tuples(p - 1, budget, kt, [&](const std::vector<int>& ka) {
                for (const auto& [c, nu] : variants) {
                    GradationSpec s;
                    s.family = family;
                    s.n = n;
                    s.M = M;
                    s.kase = c;
                    s.nu = nu;
                    s.n_alpha = na;
                    s.k_alpha = ka;
                    if (validate_spec(s).ok() && !sink(s)) return false;
                }
                return true;
            }, inner_go);
            return inner_go;
        }, go);
    }
}

std::vector<GradationSpec> enumerate_specs(Family family, int n, int M, const std::optional<CaseKind>& case_filter,
                                           EnumerationCaps caps) {
    std::vector<GradationSpec> out;
    enumerate_specs(family, n, M, case_filter, [&](const GradationSpec& s) {
        out.push_back(s);
        return true;
    }, caps);
    return out;
}

std::string spec_to_json(const GradationSpec& s) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["family"] = to_string(s.family);
    j["n"] = s.n;
    j["M"] = s.M;
    j["case"] = to_string(s.kase);
    j["nu"] = s.nu;
    j["n_alpha"] = s.n_alpha;
    j["k_alpha"] = s.k_alpha;
    return j.dump();
}

GradationSpec spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("a gradation spec must be a JSON object");
    static const std::set<std::string> known{"version", "family", "n", "M", "case", "nu", "n_alpha", "k_alpha"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ParseError("unknown field '" + key + "'");
    for (const char* req : {"family", "n", "M", "case", "n_alpha", "k_alpha"})
        if (!j.contains(req)) throw ParseError(std::string("missing field '") + req + "'");
    auto get_int = [&](const char* key) {
        const auto& v = j.at(key);
        if (!v.is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer");
        return v.get<int>();
    };
    auto get_list = [&](const char* key) {
        const auto& v = j.at(key);
        if (!v.is_array()) throw ParseError(std::string("field '") + key + "' must be an array");
        std::vector<int> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) throw ParseError(std::string("field '") + key + "' must hold integers");
            out.push_back(e.get<int>());
        }
        return out;
    };
    if (j.contains("version") && get_int("version") != 1) throw ParseError("unsupported spec version");
    GradationSpec s;
    if (!j.at("family").is_string() || !j.at("case").is_string()) throw ParseError("family and case must be strings");
    try {
        s.family = family_from_string(j.at("family").get<std::string>());
        s.kase = case_from_string(j.at("case").get<std::string>());
    } catch (const DomainError& e) {
        throw ParseError(e.what());
    }
    s.n = get_int("n");
    s.M = get_int("M");
    s.nu = j.contains("nu") ? get_int("nu") : 1;
    s.n_alpha = get_list("n_alpha");
    s.k_alpha = get_list("k_alpha");
    return s;
}

CanonicalReport verify_canonical(const GradedAlgebra& g, int max_order) {
    const CanonicalForm& c = g.canon;
    const int n = c.h.rows();
    CanonicalReport rep;
    rep.power_err = (matrix_power(c.h, g.M) - Matrix::identity(n) * c.nu).max_abs();
    if (c.B && c.form_target) rep.form_err = (gen_transpose(c.h, *c.B) * c.h - *c.form_target).max_abs();
    rep.expected = c.order; // M, except the identity automorphism of the trivial case
    try {
        rep.order = order_of(c.automorphism, max_order);
    } catch (const NotFiniteOrderError&) {
        rep.order = -1;
    }
    return rep;
}

} // namespace ltoda
