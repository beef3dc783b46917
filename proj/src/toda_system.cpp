#include "ltoda/toda_system.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace ltoda {

std::string to_string(Archetype a) {
    switch (a) {
    case Archetype::single: return "single";
    case Archetype::T1: return "T1";
    case Archetype::T2: return "T2";
    case Archetype::T3: return "T3";
    case Archetype::T4: return "T4";
    }
    return "?";
}

std::string to_string(Symmetry s) {
    switch (s) {
    case Symmetry::free: return "free";
    case Symmetry::antisymmetric: return "antisymmetric";
    case Symmetry::symmetric: return "symmetric";
    case Symmetry::traceless: return "traceless";
    case Symmetry::coupled: return "coupled";
    case Symmetry::general: return "general";
    }
    return "?";
}

namespace {

char form_char(Form f) { return f == Form::J ? 'J' : 'K'; }

std::string form_name(std::optional<Form> f) { return f ? std::string(1, form_char(*f)) : "none"; }

/// Label of the transpose tying a dependent field; "Q" when the block of B is not a standard form.
std::string tie_name(const FieldSlot& f) { return f.tie_form ? std::string(1, form_char(*f.tie_form)) : "Q"; }

/// J or K when Q is plus or minus that form.
std::optional<Form> detect_form(const Matrix& Q) {
    if (!Q.square() || Q.empty()) return std::nullopt;
    const int m = Q.rows();
    const Matrix J = special_matrix(SpecialKind::J, m);
    if ((Q - J).max_abs() < 1e-12 || (Q + J).max_abs() < 1e-12) return Form::J;
    if (m % 2 == 0) {
        const Matrix K = special_matrix(SpecialKind::K, m);
        if ((Q - K).max_abs() < 1e-12 || (Q + K).max_abs() < 1e-12) return Form::K;
    }
    return std::nullopt;
}

Matrix apply_coupling(cplx lambda, const Matrix& P, const Matrix& Q, const Matrix& x) {
    return (P * x.transpose() * Q) * lambda;
}

std::optional<TwistLabel> detect_twist(cplx lambda, const Matrix& P, const Matrix& Q, int rows, int cols) {
    std::mt19937_64 rng(12345);
    const Matrix x = random_matrix(rows, cols, rng);
    const Matrix y = apply_coupling(lambda, P, Q, x);
    for (Form a : {Form::J, Form::K})
        for (Form b : {Form::J, Form::K}) {
            if ((a == Form::K && cols % 2) || (b == Form::K && rows % 2)) continue;
            const Matrix t = twist(x, a, b);
            for (int sign : {-1, 1})
                if (rel_diff(y, t * cplx(sign, 0.0)) < 1e-12) return TwistLabel{sign, a, b};
        }
    return std::nullopt;
}

std::pair<int, int> slot_block(int p, int chirality, int slot) {
    if (p == 1) return {1, 1};
    if (chirality > 0) return slot == 0 ? std::pair{p, 1} : std::pair{slot, slot + 1};
    return slot == 0 ? std::pair{1, p} : std::pair{slot + 1, slot};
}

int slot_rank(int p, int slot) { return slot == 0 ? p : slot; }

std::string sign_word(int s) { return s > 0 ? "symmetric" : s < 0 ? "antisymmetric" : "none"; }

} // namespace

std::string TwistLabel::str() const {
    std::string s = sign < 0 ? "-^" : "^";
    if (a == b) return s + form_char(a);
    return s + "{" + form_char(a) + form_char(b) + "}";
}

Matrix TwistLabel::apply(const Matrix& x) const { return twist(x, a, b) * cplx(sign, 0.0); }

std::vector<int> TodaSystem::independent_fields() const {
    std::vector<int> out;
    for (const auto& f : fields)
        if (f.independent) out.push_back(f.index);
    return out;
}

std::vector<int> TodaSystem::independent_sources(int chirality) const {
    std::vector<int> out;
    for (const auto& c : (chirality > 0 ? plus : minus))
        if (c.independent && !c.zero) out.push_back(c.index);
    return out;
}

TodaSystem build_system(const GradedAlgebra& g) {
    const bool trivial_inner = g.spec.kase == CaseKind::trivial_h && !g.is_outer();
    return build_system(g, trivial_inner ? g.M : g.L);
}

TodaSystem build_system(const GradedAlgebra& g, int L) {
    const GradationSpec& spec = g.spec;
    const int p = spec.p();
    const bool trivial_inner = spec.kase == CaseKind::trivial_h && !g.is_outer();
    const int expected = trivial_inner ? g.M : g.L;
    if (L != expected || L <= 0)
        throw ContractError("L = " + std::to_string(L) + " is inconsistent with the gradation (expected " +
                            std::to_string(expected) + ")");

    TodaSystem sys;
    sys.p = p;
    sys.L = L;
    sys.spec = spec;
    sys.partition = g.partition;
    sys.pairing = g.pairing;
    sys.sl = spec.family == Family::sl_inner;
    sys.loop_type = g.loop_type;
    sys.grading = g.index_map;
    const auto& part = g.partition;

    std::optional<Matrix> B = g.canon.B;
    std::optional<Matrix> Binv;
    if (B) Binv = inverse(*B);
    const bool paired = !g.pairing.empty();

    // Fields.
    sys.fields.resize(p);
    for (int a = 1; a <= p; ++a) {
        FieldSlot& f = sys.fields[a - 1];
        f.index = a;
        f.size = part.size(a);
        if (!paired) continue;
        const int pa = g.pairing[a];
        if (pa == a) {
            f.Q = block(*B, part, a, a);
            f.Q_inv = inverse(f.Q);
            f.constraint = detect_form(f.Q);
            if (!f.constraint) throw ContractError("self-paired block form is neither J nor K");
        } else if (a < pa) {
            f.Q = block(*B, part, a, pa);
            f.Q_inv = inverse(f.Q);
        } else {
            f.independent = false;
            f.tied_to = pa;
            f.Q = block(*B, part, pa, a);
            f.Q_inv = inverse(f.Q);
            f.tie_form = detect_form(f.Q);
        }
    }
    sys.s = static_cast<int>(sys.independent_fields().size());

    // Sources.
    const std::vector<cplx> mu = [&] {
        std::vector<cplx> d;
        for (int a = 1; a <= p; ++a) d.push_back(g.canon.h(part.offset(a), part.offset(a)));
        return d;
    }();
    for (int chi : {1, -1}) {
        auto& list = chi > 0 ? sys.plus : sys.minus;
        list.resize(p);
        const int k = ((chi * L) % g.M + g.M) % g.M;
        for (int slot = 0; slot < p; ++slot) {
            SourceSlot& c = list[slot];
            c.index = slot;
            c.chirality = chi;
            const auto [r, cb] = slot_block(p, chi, slot);
            c.row_block = r;
            c.col_block = cb;
            c.rows = part.size(r);
            c.cols = part.size(cb);
            c.zero = !g.index_map.at({r, cb}).count(k);
            if (!paired) {
                c.partner = slot;
                c.symmetry = sys.sl && p == 1 ? Symmetry::traceless : Symmetry::free;
                continue;
            }
            // Block (r, cb) is the image of block (pi cb, pi r).
            const int pr = g.pairing[cb], pc = g.pairing[r];
            int partner = -1;
            for (int t = 0; t < p; ++t)
                if (slot_block(p, chi, t) == std::pair{pr, pc}) partner = t;
            if (partner < 0) throw ContractError("source coupling leaves the cyclic positions");
            c.partner = partner;
            c.P = block(*Binv, part, r, g.pairing[r]);
            c.Q = block(*B, part, g.pairing[cb], cb);
            if (g.is_outer()) c.lambda = -root_of_unity(-k, g.M) * mu[r - 1] / mu[cb - 1];
            else c.lambda = -1.0;
            c.relation = detect_twist(c.lambda, c.P, c.Q, part.size(pr), part.size(pc));
            if (partner == slot) {
                c.independent = true;
                if (c.relation && c.relation->a == c.relation->b)
                    c.symmetry = c.relation->sign > 0 ? Symmetry::symmetric : Symmetry::antisymmetric;
                else
                    c.symmetry = Symmetry::general;
                std::mt19937_64 rng(777);
                const Matrix x = random_matrix(c.rows, c.cols, rng);
                if ((x + apply_coupling(c.lambda, c.P, c.Q, x)).max_abs() < 1e-12) c.zero = true;
            } else {
                c.independent = slot_rank(p, slot) < slot_rank(p, partner);
                c.symmetry = c.independent ? Symmetry::free : Symmetry::coupled;
            }
        }
    }
    for (const auto& list : {sys.plus, sys.minus})
        for (const auto& c : list)
            if (c.zero) sys.reducible = true;

    // Archetype.
    auto end_sign = [&](int slot) {
        const SourceSlot& c = sys.plus[slot];
        if (c.partner != slot) return 0;
        return c.symmetry == Symmetry::symmetric ? 1 : c.symmetry == Symmetry::antisymmetric ? -1 : 0;
    };
    if (p == 1) {
        sys.archetype = Archetype::single;
        sys.archetype_name = "single-field";
    } else if (!paired) {
        sys.archetype = Archetype::T1;
        sys.archetype_name = "T1-cyclic";
    } else {
        const int s = sys.s;
        const auto c1 = sys.fields[0].constraint;
        const auto cs = sys.fields[s - 1].constraint;
        if (c1 && cs && s > 1) {
            sys.archetype = Archetype::T2;
            sys.F1 = c1;
            sys.F2 = cs;
            sys.archetype_name = std::string("T2-two-ends(") + form_char(*c1) + "," + form_char(*cs) + ")";
        } else if (c1 || cs) {
            sys.archetype = Archetype::T3;
            sys.mirrored = !c1;
            sys.F1 = c1 ? c1 : cs;
            const int sign = sys.mirrored ? end_sign(0) : end_sign(s % p);
            if (sys.mirrored) sys.end_sign_0 = sign;
            else sys.end_sign_s = sign;
            sys.archetype_name = std::string("T3-one-end(") + form_char(*sys.F1) + "," + sign_word(sign) +
                                 (sys.mirrored ? ",mirrored" : "") + ")";
        } else {
            sys.archetype = Archetype::T4;
            sys.end_sign_0 = end_sign(0);
            sys.end_sign_s = end_sign(s % p);
            sys.archetype_name =
                "T4-doubly-twisted(" + sign_word(sys.end_sign_0) + "," + sign_word(sys.end_sign_s) + ")";
        }
    }

    // G0 factorization.
    std::vector<std::string> factors;
    for (const auto& f : sys.fields) {
        if (!f.independent) continue;
        std::string name = !f.constraint ? "GL" : *f.constraint == Form::J ? "SO" : "Sp";
        factors.push_back(name + "_" + std::to_string(f.size));
    }
    std::string joined;
    for (std::size_t i = 0; i < factors.size(); ++i) joined += (i ? " × " : "") + factors[i];
    if (sys.sl) sys.G0 = p == 1 ? "SL_" + std::to_string(spec.n) : "S(" + joined + ")";
    else sys.G0 = joined;
    return sys;
}

Matrix coupling_map(const SourceSlot& slot, const Matrix& partner_value) {
    return apply_coupling(slot.lambda, slot.P, slot.Q, partner_value);
}

void materialize_fields(const TodaSystem& sys, std::vector<Matrix>& gamma) {
    if (static_cast<int>(gamma.size()) != sys.p) throw DimensionError("expected one field value per block");
    for (const auto& f : sys.fields) {
        const Matrix& g = gamma[f.index - 1];
        if (f.independent && (g.rows() != f.size || g.cols() != f.size))
            throw DimensionError("field " + std::to_string(f.index) + " must be " + std::to_string(f.size) + "x" +
                                 std::to_string(f.size));
    }
    for (const auto& f : sys.fields) {
        if (f.independent) continue;
        const Matrix& rep = gamma[f.tied_to - 1];
        gamma[f.index - 1] = inverse(f.Q_inv * rep.transpose() * f.Q);
    }
}

void materialize_sources(const TodaSystem& sys, int chirality, std::vector<Matrix>& c) {
    const auto& slots = chirality > 0 ? sys.plus : sys.minus;
    if (static_cast<int>(c.size()) != sys.p) throw DimensionError("expected one source value per slot");
    for (const auto& s : slots) {
        Matrix& v = c[s.index];
        if (s.zero) {
            v = Matrix(s.rows, s.cols);
        } else if (s.independent) {
            if (v.empty()) v = Matrix(s.rows, s.cols);
            if (v.rows() != s.rows || v.cols() != s.cols)
                throw DimensionError("source slot " + std::to_string(s.index) + " must be " + std::to_string(s.rows) +
                                     "x" + std::to_string(s.cols));
        }
    }
    for (const auto& s : slots)
        if (!s.zero && !s.independent) c[s.index] = coupling_map(s, c[s.partner]);
}

Matrix field_constraint_defect(const FieldSlot& f, const Matrix& g) {
    if (!f.constraint) return Matrix(g.rows(), g.cols());
    return f.Q_inv * g.transpose() * f.Q * g - Matrix::identity(g.rows());
}

Matrix tangent_projection(const FieldSlot& f, const Matrix& x) {
    if (!f.constraint) return x;
    return (x - f.Q_inv * x.transpose() * f.Q) * cplx(0.5, 0.0);
}

void check_fields(const TodaSystem& sys, const std::vector<Matrix>& gamma, double tol) {
    for (const auto& f : sys.fields) {
        if (!f.constraint) continue;
        const double d = field_constraint_defect(f, gamma[f.index - 1]).max_abs();
        if (d > tol)
            throw ContractError("field " + std::to_string(f.index) + " violates its " + form_name(f.constraint) +
                                "-orthogonality by " + std::to_string(d));
    }
}

void check_sources(const TodaSystem& sys, int chirality, const std::vector<Matrix>& c, double tol) {
    for (const auto& s : (chirality > 0 ? sys.plus : sys.minus)) {
        if (s.zero || !s.independent) continue;
        const Matrix& v = c[s.index];
        if (s.partner == s.index && !sys.pairing.empty()) {
            const double d = (coupling_map(s, v) - v).max_abs();
            if (d > tol * std::max(1.0, v.max_abs()))
                throw ContractError("source slot " + std::to_string(s.index) + " breaks its " + to_string(s.symmetry) +
                                    " constraint by " + std::to_string(d));
        }
        if (s.symmetry == Symmetry::traceless && std::abs(v.trace()) > tol * std::max(1.0, v.max_abs()))
            throw ContractError("source slot " + std::to_string(s.index) + " is not traceless");
    }
}

std::vector<Matrix> rhs_full(const TodaSystem& sys, const std::vector<Matrix>& gamma, const std::vector<Matrix>& cp,
                             const std::vector<Matrix>& cm) {
    const int p = sys.p;
    std::vector<Matrix> inv(p);
    for (int a = 0; a < p; ++a) inv[a] = inverse(gamma[a]);
    std::vector<Matrix> out(p);
    for (int a = 1; a <= p; ++a) {
        const int next = a % p + 1;
        const int prev = (a + p - 2) % p + 1;
        const int here = a % p;
        const int before = (a - 1) % p;
        Matrix r(sys.fields[a - 1].size, sys.fields[a - 1].size);
        if (!sys.plus[here].zero && !sys.minus[here].zero)
            r -= inv[a - 1] * cp[here] * gamma[next - 1] * cm[here];
        if (!sys.plus[before].zero && !sys.minus[before].zero)
            r += cm[before] * inv[prev - 1] * cp[before] * gamma[a - 1];
        out[a - 1] = r;
    }
    return out;
}

std::vector<Matrix> rhs(const TodaSystem& sys, std::vector<Matrix> gamma, std::vector<Matrix> cp,
                        std::vector<Matrix> cm, bool check) {
    materialize_fields(sys, gamma);
    materialize_sources(sys, 1, cp);
    materialize_sources(sys, -1, cm);
    if (check) {
        check_fields(sys, gamma);
        check_sources(sys, 1, cp);
        check_sources(sys, -1, cm);
    }
    std::vector<Matrix> all = rhs_full(sys, gamma, cp, cm);
    for (const auto& f : sys.fields)
        if (!f.independent) all[f.index - 1] = Matrix();
    return all;
}

std::vector<Matrix> random_fields(const TodaSystem& sys, std::mt19937_64& rng, double scale) {
    std::vector<Matrix> x(sys.p);
    cplx tr = 0.0;
    for (const auto& f : sys.fields) {
        if (!f.independent) continue;
        x[f.index - 1] = tangent_projection(f, random_matrix(f.size, f.size, rng, scale));
        tr += x[f.index - 1].trace();
    }
    // sl: remove the total trace so the assembled field has unit determinant.
    if (sys.sl)
        for (auto& m : x) m -= Matrix::identity(m.rows()) * (tr / cplx(sys.partition.dim(), 0.0));
    std::vector<Matrix> gamma(sys.p);
    for (const auto& f : sys.fields)
        if (f.independent) gamma[f.index - 1] = matrix_exp(x[f.index - 1]);
    materialize_fields(sys, gamma);
    return gamma;
}

std::vector<Matrix> random_sources(const TodaSystem& sys, int chirality, std::mt19937_64& rng, double scale) {
    std::vector<Matrix> c(sys.p);
    for (const auto& s : (chirality > 0 ? sys.plus : sys.minus)) {
        if (s.zero || !s.independent) continue;
        Matrix x = random_matrix(s.rows, s.cols, rng, scale);
        if (s.partner == s.index && !sys.pairing.empty()) x = (x + coupling_map(s, x)) * cplx(0.5, 0.0);
        if (s.symmetry == Symmetry::traceless) x -= Matrix::identity(s.rows) * (x.trace() / cplx(s.rows, 0.0));
        c[s.index] = x;
    }
    materialize_sources(sys, chirality, c);
    return c;
}

Matrix assemble_sources(const TodaSystem& sys, int chirality, const std::vector<Matrix>& c) {
    const int n = sys.partition.dim();
    Matrix out(n, n);
    for (const auto& s : (chirality > 0 ? sys.plus : sys.minus)) {
        if (s.zero) continue;
        Matrix cur = block(out, sys.partition, s.row_block, s.col_block);
        set_block(out, sys.partition, s.row_block, s.col_block, cur + c[s.index]);
    }
    return out;
}

Matrix assemble_fields(const TodaSystem& sys, const std::vector<Matrix>& gamma) {
    if (static_cast<int>(gamma.size()) != sys.p) throw DimensionError("expected one field value per block");
    return block_diagonal(gamma);
}

// ---------------------------------------------------------------------------
// describe

namespace {

struct Symbols {
    bool latex = false;

    std::string field(int b) const { return latex ? "\\Gamma_{" + std::to_string(b) + "}" : "Gamma_" + std::to_string(b); }
    std::string inv(const std::string& x) const { return latex ? x + "^{-1}" : x + "^-1"; }
    std::string twist(const std::string& label_prefix, const std::string& x) const {
        // label_prefix like "-^J" or "^{KJ}"
        std::string sign = label_prefix[0] == '-' ? "-" : "";
        std::string lab = label_prefix.substr(sign.empty() ? 1 : 2);
        if (latex) return sign + "{}^{" + (lab.front() == '{' ? lab.substr(1, lab.size() - 2) : lab) + "}" + x;
        return sign + "^" + lab + " " + x;
    }
    std::string source(int chi, int slot) const {
        const std::string c = chi > 0 ? "+" : "-";
        return latex ? "C_{" + c + std::to_string(slot) + "}" : "C" + c + std::to_string(slot);
    }
};

std::string field_expr(const TodaSystem& sys, const Symbols& sym, int b, bool inverse_of) {
    const FieldSlot& f = sys.fields[b - 1];
    if (f.independent) return inverse_of ? sym.inv(sym.field(b)) : sym.field(b);
    const std::string F = tie_name(f);
    const std::string t = sym.twist("^" + F, sym.field(f.tied_to));
    return inverse_of ? t : sym.inv("(" + t + ")");
}

std::optional<std::string> source_expr(const TodaSystem& sys, const Symbols& sym, int chi, int slot) {
    const SourceSlot& s = sys.source(chi, slot);
    if (s.zero) return std::nullopt;
    if (s.independent) return sym.source(chi, slot);
    const std::string inner = sym.source(chi, s.partner);
    if (s.relation) return "(" + sym.twist(s.relation->str(), inner) + ")";
    return std::string(sym.latex ? "\\tau(" : "T(") + inner + ")";
}

std::vector<std::string> equations(const TodaSystem& sys, bool latex) {
    Symbols sym{latex};
    std::vector<std::string> out;
    const int p = sys.p;
    for (const auto& f : sys.fields) {
        if (!f.independent) continue;
        const int a = f.index;
        const int next = a % p + 1, prev = (a + p - 2) % p + 1, here = a % p, before = (a - 1) % p;
        const std::string lhs = latex ? "\\partial_+ \\left(" + sym.inv(sym.field(a)) + " \\partial_- " + sym.field(a) + "\\right)"
                                      : "d+(" + sym.inv(sym.field(a)) + " d- " + sym.field(a) + ")";
        std::string rhs_text;
        const auto cp1 = source_expr(sys, sym, 1, here), cm1 = source_expr(sys, sym, -1, here);
        if (cp1 && cm1)
            rhs_text += "- " + sym.inv(sym.field(a)) + " " + *cp1 + " " + field_expr(sys, sym, next, false) + " " + *cm1;
        const auto cp0 = source_expr(sys, sym, 1, before), cm0 = source_expr(sys, sym, -1, before);
        if (cp0 && cm0) {
            if (!rhs_text.empty()) rhs_text += " ";
            rhs_text += "+ " + *cm0 + " " + field_expr(sys, sym, prev, true) + " " + *cp0 + " " + sym.field(a);
        }
        if (rhs_text.empty()) rhs_text = "0";
        out.push_back(lhs + (latex ? " &= " : " = ") + rhs_text);
    }
    return out;
}

nlohmann::ordered_json describe_json(const TodaSystem& sys) {
    using oj = nlohmann::ordered_json;
    oj j;
    j["archetype"] = sys.archetype_name;
    j["G0"] = sys.G0;
    j["L"] = sys.L;
    j["reducible"] = sys.reducible;
    j["loop_type"] = sys.loop_type;
    oj grading = oj::array();
    for (int a = 1; a <= sys.p; ++a) {
        oj row = oj::array();
        for (int b = 1; b <= sys.p; ++b) row.push_back(std::vector<int>(sys.grading.at({a, b}).begin(), sys.grading.at({a, b}).end()));
        grading.push_back(row);
    }
    j["grading"] = grading;
    oj fields = oj::array();
    for (const auto& f : sys.fields) {
        oj e;
        e["index"] = f.index;
        e["size"] = f.size;
        e["independent"] = f.independent;
        e["constraint"] = form_name(f.constraint);
        if (f.independent) e["tied_to"] = nullptr;
        else e["tied_to"] = f.tied_to;
        e["relation"] = f.independent ? "" : "(^" + tie_name(f) + " Gamma_" + std::to_string(f.tied_to) + ")^-1";
        fields.push_back(e);
    }
    j["fields"] = fields;
    oj sources = oj::array();
    for (int chi : {1, -1})
        for (const auto& s : (chi > 0 ? sys.plus : sys.minus)) {
            oj e;
            e["chirality"] = chi > 0 ? "+" : "-";
            e["index"] = s.index;
            e["block"] = {s.row_block, s.col_block};
            e["rows"] = s.rows;
            e["cols"] = s.cols;
            e["status"] = s.zero ? "zero" : s.independent ? "independent" : "dependent";
            e["symmetry"] = to_string(s.symmetry);
            if (s.partner >= 0 && s.partner != s.index) e["partner"] = s.partner;
            else e["partner"] = nullptr;
            e["relation"] = s.relation ? s.relation->str() : "";
            sources.push_back(e);
        }
    j["sources"] = sources;
    j["equations"] = equations(sys, false);
    oj prov;
    prov["spec"] = oj::parse(spec_to_json(sys.spec));
    prov["L"] = sys.L;
    j["provenance"] = prov;
    return j;
}

} // namespace

DescribeFormat describe_format_from_string(const std::string& s) {
    if (s == "json") return DescribeFormat::json;
    if (s == "latex") return DescribeFormat::latex;
    if (s == "text") return DescribeFormat::text;
    throw DomainError("unknown format '" + s + "'");
}

std::string describe(const TodaSystem& sys, DescribeFormat format) {
    if (format == DescribeFormat::json) return describe_json(sys).dump(2) + "\n";
    std::ostringstream os;
    if (format == DescribeFormat::latex) {
        os << "% archetype: " << sys.archetype_name << "\n";
        os << "% G0: " << sys.G0 << "\n";
        os << "\\begin{align*}\n";
        const auto eqs = equations(sys, true);
        for (std::size_t i = 0; i < eqs.size(); ++i) os << "  " << eqs[i] << (i + 1 < eqs.size() ? " \\\\\n" : "\n");
        os << "\\end{align*}\n";
        for (const auto& f : sys.fields)
            if (f.constraint)
                os << "% constraint: {}^{" << form_name(f.constraint) << "}\\Gamma_{" << f.index << "} \\Gamma_{"
                   << f.index << "} = I\n";
        return os.str();
    }
    os << "archetype: " << sys.archetype_name << "\n";
    os << "G0: " << sys.G0 << "\n";
    os << "L: " << sys.L << (sys.reducible ? " (reducible)" : "") << "\n";
    os << "grading:\n";
    for (int a = 1; a <= sys.p; ++a) {
        os << " ";
        for (int b = 1; b <= sys.p; ++b) {
            os << " {";
            bool first = true;
            for (int k : sys.grading.at({a, b})) {
                os << (first ? "" : ",") << k;
                first = false;
            }
            os << "}";
        }
        os << "\n";
    }
    os << "fields:\n";
    for (const auto& f : sys.fields) {
        os << "  Gamma_" << f.index << " (" << f.size << "x" << f.size << ")";
        if (f.constraint) os << " ^" << form_name(f.constraint) << "-orthogonal";
        if (!f.independent) os << " = (^" << tie_name(f) << " Gamma_" << f.tied_to << ")^-1";
        os << "\n";
    }
    os << "sources:\n";
    for (int chi : {1, -1})
        for (const auto& s : (chi > 0 ? sys.plus : sys.minus)) {
            os << "  C" << (chi > 0 ? "+" : "-") << s.index << " block (" << s.row_block << "," << s.col_block << ") "
               << s.rows << "x" << s.cols << ": ";
            if (s.zero) os << "zero";
            else if (!s.independent) os << "= " << (s.relation ? s.relation->str() : std::string("T")) << " C"
                                         << (chi > 0 ? "+" : "-") << s.partner;
            else os << to_string(s.symmetry);
            os << "\n";
        }
    os << "equations:\n";
    for (const auto& e : equations(sys, false)) os << "  " << e << "\n";
    return os.str();
}

TodaSystem system_from_description(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("provenance") || !j["provenance"].contains("spec") || !j["provenance"].contains("L"))
        throw ParseError("system document lacks provenance");
    const GradationSpec spec = spec_from_json(j["provenance"]["spec"].dump());
    if (!j["provenance"]["L"].is_number_integer()) throw ParseError("provenance L must be an integer");
    return build_system(make_graded(spec), j["provenance"]["L"].get<int>());
}

// ---------------------------------------------------------------------------
// equivalences

std::string to_string(EquivalenceKind k) {
    return k == EquivalenceKind::so_mirror ? "so-mirror" : "sp-mirror";
}

GradationSpec equivalence_target_spec(const GradationSpec& src) {
    const bool family_ok = src.family == Family::so_inner || src.family == Family::sp_inner;
    const int p = src.p();
    if (!family_ok || src.kase != CaseKind::m1_lt_M || p < 3 || p % 2 == 0)
        throw DomainError("no registered equivalence for " + to_string(src.family) + " " + to_string(src.kase) +
                          " with p = " + std::to_string(p));
    const int s = (p + 1) / 2;
    GradationSpec t = src;
    t.kase = CaseKind::m1_eq_M;
    t.nu = 1;
    t.n_alpha.clear();
    for (int b = s; b >= 1; --b) t.n_alpha.push_back(src.n_alpha[b - 1]);
    for (int b = 1; b <= s - 1; ++b) t.n_alpha.push_back(src.n_alpha[b - 1]);
    const auto rep = validate_spec(t);
    if (!rep.ok()) throw DomainError("registered target is invalid: " + rep.violations.front().message);
    return t;
}

EquivalenceKind registered_equivalence(const TodaSystem& src, const TodaSystem& tgt) {
    GradationSpec want;
    try {
        want = equivalence_target_spec(src.spec);
    } catch (const DomainError&) {
        throw DomainError("unregistered equivalence pair: " + src.archetype_name + " -> " + tgt.archetype_name);
    }
    if (!(tgt.spec == want) || src.L != tgt.L || src.archetype != Archetype::T3 || !src.mirrored ||
        tgt.archetype != Archetype::T3 || tgt.mirrored)
        throw DomainError("unregistered equivalence pair: " + src.archetype_name + " -> " + tgt.archetype_name);
    return src.spec.family == Family::so_inner ? EquivalenceKind::so_mirror : EquivalenceKind::sp_mirror;
}

SystemState equivalence_substitution(const TodaSystem& src, const TodaSystem& tgt, const SystemState& st) {
    const EquivalenceKind kind = registered_equivalence(src, tgt);
    const int s = src.s;
    const int p = tgt.p;
    SystemState out;
    out.gamma.assign(p, Matrix());
    out.plus.assign(p, Matrix());
    out.minus.assign(p, Matrix());
    for (int b = 1; b <= s; ++b) {
        const Matrix gi = inverse(st.gamma[s - b]);
        out.gamma[b - 1] = (kind == EquivalenceKind::sp_mirror && b == 1) ? kt(gi) : jt(gi);
    }
    for (int chi : {1, -1}) {
        const auto& c = chi > 0 ? st.plus : st.minus;
        auto& o = chi > 0 ? out.plus : out.minus;
        for (int b = 1; b <= s; ++b) {
            const Matrix& x = c[s - b];
            if (kind == EquivalenceKind::so_mirror) {
                o[b] = -jt(x);
            } else if (b == s) {
                o[b] = jt(x);
            } else if (b == 1) {
                o[b] = chi > 0 ? -twist(x, Form::K, Form::J) : -twist(x, Form::J, Form::K);
            } else {
                o[b] = -jt(x);
            }
        }
    }
    materialize_fields(tgt, out.gamma);
    materialize_sources(tgt, 1, out.plus);
    materialize_sources(tgt, -1, out.minus);
    return out;
}

std::vector<Matrix> transport_residual(const TodaSystem& src, const TodaSystem& tgt, const std::vector<Matrix>& r) {
    const EquivalenceKind kind = registered_equivalence(src, tgt);
    const int s = src.s;
    std::vector<Matrix> out(tgt.p);
    for (int b = 1; b <= s; ++b) {
        const Matrix& x = r[s - b];
        out[b - 1] = (kind == EquivalenceKind::sp_mirror && b == 1) ? -kt(x) : -jt(x);
    }
    return out;
}

} // namespace ltoda
