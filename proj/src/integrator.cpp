#include "ltoda/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace ltoda {

std::string to_string(Scheme s) { return s == Scheme::euler ? "euler" : "midpoint"; }

Scheme scheme_from_string(const std::string& s) {
    if (s == "euler") return Scheme::euler;
    if (s == "midpoint") return Scheme::midpoint;
    throw DomainError("unknown scheme '" + s + "'");
}

std::string to_string(SourceKind k) {
    switch (k) {
    case SourceKind::random: return "random";
    case SourceKind::zero: return "zero";
    case SourceKind::unit: return "unit";
    }
    return "?";
}

SourceKind source_kind_from_string(const std::string& s) {
    if (s == "random") return SourceKind::random;
    if (s == "zero") return SourceKind::zero;
    if (s == "unit") return SourceKind::unit;
    throw DomainError("unknown source kind '" + s + "'");
}

namespace {

const FieldSlot& field(const TodaSystem& sys, int a) { return sys.fields[a - 1]; }

/// p-vector of fields from the slot-indexed values at one node.
std::vector<Matrix> node_fields(const TodaSystem& sys, const std::vector<int>& slots,
                                const std::vector<std::vector<Matrix>>& gamma, int node) {
    std::vector<Matrix> g(sys.p);
    for (std::size_t k = 0; k < slots.size(); ++k) g[slots[k] - 1] = gamma[k][node];
    materialize_fields(sys, g);
    return g;
}

std::vector<Matrix> pick(const std::vector<std::vector<Matrix>>& c, int sample) {
    std::vector<Matrix> out(c.size());
    for (std::size_t s = 0; s < c.size(); ++s)
        if (!c[s].empty()) out[s] = c[s][sample];
    return out;
}

/// RHS on the independent slots, in slot order.
std::vector<Matrix> rhs_slots(const TodaSystem& sys, const std::vector<int>& slots, const std::vector<Matrix>& gamma_p,
                              const std::vector<Matrix>& cp, const std::vector<Matrix>& cm) {
    const auto all = rhs_full(sys, gamma_p, cp, cm);
    std::vector<Matrix> out;
    out.reserve(slots.size());
    for (int a : slots) out.push_back(all[a - 1]);
    return out;
}

double constraint_defect(const TodaSystem& sys, int a, const Matrix& g) {
    const FieldSlot& f = field(sys, a);
    return f.constraint ? field_constraint_defect(f, g).max_abs() : 0.0;
}

void check_node(const Matrix& g, int i, int j) {
    if (!g.all_finite()) throw BlowUpError(i, j, "non-finite field value");
    double cond = 0.0;
    try {
        cond = condition_number(g);
    } catch (const SingularMatrixError&) {
        throw BlowUpError(i, j, "singular field value");
    }
    if (!(cond <= 1e12)) throw BlowUpError(i, j, "ill-conditioned field value");
}

/// log(a^{-1} b) / h, the field derivative at the midpoint between two nodes.
Matrix half_step_w(const Matrix& a, const Matrix& b, double h) { return matrix_log(solve(a, b)) * cplx(1.0 / h, 0.0); }

std::vector<Matrix> random_tangent(const TodaSystem& sys, std::mt19937_64& rng, double scale) {
    std::vector<Matrix> x(sys.p);
    cplx tr = 0.0;
    for (const auto& f : sys.fields) {
        if (!f.independent) continue;
        x[f.index - 1] = tangent_projection(f, random_matrix(f.size, f.size, rng, scale));
        tr += x[f.index - 1].trace();
    }
    if (sys.sl)
        for (auto& m : x) m -= Matrix::identity(m.rows()) * (tr / cplx(sys.partition.dim(), 0.0));
    return x;
}

Matrix admissible(const TodaSystem& sys, const SourceSlot& s, Matrix x) {
    if (s.partner == s.index && !sys.pairing.empty()) x = (x + coupling_map(s, x)) * cplx(0.5, 0.0);
    if (s.symmetry == Symmetry::traceless) x -= Matrix::identity(s.rows) * (x.trace() / cplx(s.rows, 0.0));
    return x;
}

} // namespace

GoursatData sample_goursat(const TodaSystem& sys, const GridSpec& grid, const AxisField& gamma_minus,
                           const AxisField& gamma_plus, const AxisSource& c_plus, const AxisSource& c_minus,
                           const AxisField& w_minus) {
    GoursatData d;
    d.grid = grid;
    d.slots = sys.independent_fields();
    const std::size_t K = d.slots.size();
    d.gamma_minus.assign(K, {});
    d.gamma_plus.assign(K, {});
    if (w_minus) d.w_minus.assign(K, {});
    for (int i = 0; i <= grid.n_minus; ++i) {
        const double z = i * grid.h_minus;
        const auto g = gamma_minus(z);
        for (std::size_t k = 0; k < K; ++k) d.gamma_minus[k].push_back(g.at(d.slots[k] - 1));
        if (w_minus) {
            const auto w = w_minus(z);
            for (std::size_t k = 0; k < K; ++k) d.w_minus[k].push_back(w.at(d.slots[k] - 1));
        }
    }
    for (int j = 0; j <= grid.n_plus; ++j) {
        const auto g = gamma_plus(j * grid.h_plus);
        for (std::size_t k = 0; k < K; ++k) d.gamma_plus[k].push_back(g.at(d.slots[k] - 1));
    }
    d.c_plus.assign(sys.p, {});
    d.c_minus.assign(sys.p, {});
    for (int chi : {1, -1}) {
        auto& dst = chi > 0 ? d.c_plus : d.c_minus;
        const auto& fn = chi > 0 ? c_plus : c_minus;
        const int n = chi > 0 ? grid.n_plus : grid.n_minus;
        const double h = chi > 0 ? grid.h_plus : grid.h_minus;
        const auto slots = sys.independent_sources(chi);
        for (int t = 0; t <= n; ++t) {
            const auto c = fn(t * h);
            for (int s : slots) dst[s].push_back(c.at(s));
        }
    }
    return d;
}

GoursatData smooth_data(const TodaSystem& sys, const GridSpec& grid, const SmoothDataOptions& opt) {
    std::mt19937_64 rng(opt.seed);
    const auto gc = random_fields(sys, rng, opt.field_scale);
    const auto xm = random_tangent(sys, rng, opt.field_scale), ym = random_tangent(sys, rng, opt.field_scale);
    const auto xp = random_tangent(sys, rng, opt.field_scale), yp = random_tangent(sys, rng, opt.field_scale);
    std::vector<Matrix> c0p(sys.p), c0m(sys.p);
    for (int chi : {1, -1}) {
        auto& c0 = chi > 0 ? c0p : c0m;
        for (const auto& s : (chi > 0 ? sys.plus : sys.minus)) {
            if (s.zero || !s.independent) continue;
            Matrix x(s.rows, s.cols);
            if (opt.sources == SourceKind::random) x = random_matrix(s.rows, s.cols, rng, opt.source_scale);
            if (opt.sources == SourceKind::unit) x = Matrix(s.rows, s.cols, cplx(opt.source_scale, 0.0));
            c0[s.index] = admissible(sys, s, x);
        }
    }
    auto axis = [&sys, gc](const std::vector<Matrix>& x, const std::vector<Matrix>& y) {
        return [&sys, gc, x, y](double z) {
            std::vector<Matrix> g(sys.p);
            for (int a : sys.independent_fields())
                g[a - 1] = gc[a - 1] * matrix_exp(x[a - 1] * cplx(z, 0.0)) * matrix_exp(y[a - 1] * cplx(z * z, 0.0));
            return g;
        };
    };
    auto w_minus = [&sys, xm, ym](double z) {
        std::vector<Matrix> w(sys.p);
        for (int a : sys.independent_fields()) {
            const Matrix e = matrix_exp(ym[a - 1] * cplx(z * z, 0.0));
            w[a - 1] = inverse(e) * xm[a - 1] * e + ym[a - 1] * cplx(2.0 * z, 0.0);
        }
        return w;
    };
    const bool constant = opt.constant_sources;
    auto src = [constant](const std::vector<Matrix>& c0) {
        return [c0, constant](double z) {
            std::vector<Matrix> c = c0;
            if (!constant)
                for (auto& m : c)
                    if (!m.empty()) m *= cplx(1.0 + 0.25 * z, 0.0);
            return c;
        };
    };
    return sample_goursat(sys, grid, axis(xm, ym), axis(xp, yp), src(c0p), src(c0m), w_minus);
}

void check_goursat(const TodaSystem& sys, const GoursatData& d) {
    const GridSpec& g = d.grid;
    if (g.n_minus < 1 || g.n_plus < 1 || !(g.h_minus > 0) || !(g.h_plus > 0))
        throw DomainError("grid needs at least one positive step in each direction");
    if (d.slots != sys.independent_fields()) throw DomainError("data slots do not match the system's independent fields");
    const std::size_t K = d.slots.size();
    if (d.gamma_minus.size() != K || d.gamma_plus.size() != K || (!d.w_minus.empty() && d.w_minus.size() != K))
        throw DomainError("axis data must have one array per independent field");
    for (std::size_t k = 0; k < K; ++k) {
        const int a = d.slots[k];
        const int m = field(sys, a).size;
        if (static_cast<int>(d.gamma_minus[k].size()) != g.n_minus + 1 ||
            static_cast<int>(d.gamma_plus[k].size()) != g.n_plus + 1 ||
            (!d.w_minus.empty() && static_cast<int>(d.w_minus[k].size()) != g.n_minus + 1))
            throw DomainError("axis data for field " + std::to_string(a) + " has the wrong length");
        for (const auto* arr : {&d.gamma_minus[k], &d.gamma_plus[k]}) {
            for (const auto& x : *arr) {
                if (x.rows() != m || x.cols() != m) throw DomainError("axis field value has the wrong shape");
                const double def = constraint_defect(sys, a, x);
                if (def > 1e-10)
                    throw ContractError("axis data for field " + std::to_string(a) + " leaves its group by " +
                                        std::to_string(def));
            }
        }
        if ((d.gamma_minus[k][0] - d.gamma_plus[k][0]).max_abs() != 0.0)
            throw DomainError("corner compatibility violated: the axis data for field " + std::to_string(a) +
                              " disagree at the origin");
    }
    for (int chi : {1, -1}) {
        const auto& c = chi > 0 ? d.c_plus : d.c_minus;
        const int n = chi > 0 ? g.n_plus : g.n_minus;
        if (static_cast<int>(c.size()) != sys.p) throw DomainError("source data must have one array per slot");
        const auto slots = sys.independent_sources(chi);
        for (int s : slots)
            if (static_cast<int>(c[s].size()) != n + 1)
                throw DomainError("source slot " + std::to_string(s) + " has the wrong number of samples");
        for (int t = 0; t <= n; ++t) {
            std::vector<Matrix> v(sys.p);
            for (int s : slots) v[s] = c[s][t];
            materialize_sources(sys, chi, v);
            check_sources(sys, chi, v);
        }
    }
}

SystemState state_at(const TodaSystem& sys, const FieldGrid& grid, int i, int j) {
    SystemState st;
    st.gamma = node_fields(sys, grid.slots, grid.gamma, grid.grid.node(i, j));
    st.plus = pick(grid.c_plus, j);
    st.minus = pick(grid.c_minus, i);
    return st;
}

FieldGrid integrate(const TodaSystem& sys, const GoursatData& data, Scheme scheme, double drift_tol) {
    check_goursat(sys, data);
    const GridSpec& g = data.grid;
    const int Nm = g.n_minus, Np = g.n_plus;
    const double hm = g.h_minus, hp = g.h_plus;
    const std::vector<int>& slots = data.slots;
    const std::size_t K = slots.size();

    FieldGrid out;
    out.grid = g;
    out.scheme = scheme;
    out.slots = slots;
    out.gamma.assign(K, std::vector<Matrix>(g.nodes()));
    out.w.assign(K, std::vector<Matrix>(g.nodes()));
    out.drift.assign(g.nodes(), 0.0);

    // Materialized sources along each axis.
    out.c_plus.assign(sys.p, std::vector<Matrix>(Np + 1));
    out.c_minus.assign(sys.p, std::vector<Matrix>(Nm + 1));
    for (int j = 0; j <= Np; ++j) {
        std::vector<Matrix> v(sys.p);
        for (int s : sys.independent_sources(1)) v[s] = data.c_plus[s][j];
        materialize_sources(sys, 1, v);
        for (int s = 0; s < sys.p; ++s) out.c_plus[s][j] = v[s];
    }
    for (int i = 0; i <= Nm; ++i) {
        std::vector<Matrix> v(sys.p);
        for (int s : sys.independent_sources(-1)) v[s] = data.c_minus[s][i];
        materialize_sources(sys, -1, v);
        for (int s = 0; s < sys.p; ++s) out.c_minus[s][i] = v[s];
    }
    const auto cp_at = [&](int j) { return pick(out.c_plus, j); };
    const auto cm_at = [&](int i) { return pick(out.c_minus, i); };

    auto finish_node = [&](int i, int j) {
        const int nd = g.node(i, j);
        double drift = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            check_node(out.gamma[k][nd], i, j);
            drift = std::max(drift, constraint_defect(sys, slots[k], out.gamma[k][nd]));
        }
        out.drift[nd] = drift;
        if (drift > drift_tol)
            throw ContractError("constraint drift " + std::to_string(drift) + " exceeds " + std::to_string(drift_tol) +
                                " at node (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    };
    auto eval_rhs = [&](const std::vector<Matrix>& gamma_slots, int i, int j) {
        std::vector<Matrix> gp(sys.p);
        for (std::size_t k = 0; k < K; ++k) gp[slots[k] - 1] = gamma_slots[k];
        try {
            materialize_fields(sys, gp);
            return rhs_slots(sys, slots, gp, cp_at(j), cm_at(i));
        } catch (const SingularMatrixError&) {
            throw BlowUpError(i, j, "singular field value");
        }
    };
    auto node_gamma = [&](int nd) {
        std::vector<Matrix> v(K);
        for (std::size_t k = 0; k < K; ++k) v[k] = out.gamma[k][nd];
        return v;
    };

    // Axis values.
    for (std::size_t k = 0; k < K; ++k) {
        for (int i = 0; i <= Nm; ++i) out.gamma[k][g.node(i, 0)] = data.gamma_minus[k][i];
        for (int j = 0; j <= Np; ++j) out.gamma[k][g.node(0, j)] = data.gamma_plus[k][j];
    }

    for (int i = 0; i <= Nm; ++i)
        for (std::size_t k = 0; k < K; ++k) check_node(data.gamma_minus[k][i], i, 0);
    for (int j = 0; j <= Np; ++j)
        for (std::size_t k = 0; k < K; ++k) check_node(data.gamma_plus[k][j], 0, j);

    // W on the z- axis, exact or from log differences (second order, one-sided at the ends).
    for (std::size_t k = 0; k < K; ++k) {
        if (!data.w_minus.empty()) {
            for (int i = 0; i <= Nm; ++i) out.w[k][g.node(i, 0)] = data.w_minus[k][i];
            continue;
        }
        std::vector<Matrix> half(Nm);
        for (int i = 0; i < Nm; ++i) half[i] = half_step_w(data.gamma_minus[k][i], data.gamma_minus[k][i + 1], hm);
        for (int i = 0; i <= Nm; ++i) {
            Matrix w;
            if (Nm == 1) w = half[0];
            else if (i == 0) w = half[0] * cplx(1.5, 0.0) - half[1] * cplx(0.5, 0.0);
            else if (i == Nm) w = half[Nm - 1] * cplx(1.5, 0.0) - half[Nm - 2] * cplx(0.5, 0.0);
            else w = (half[i - 1] + half[i]) * cplx(0.5, 0.0);
            out.w[k][g.node(i, 0)] = tangent_projection(field(sys, slots[k]), w);
        }
    }

    // Gamma on the z- axis is re-stepped from the corner with the interior update, so that the first
    // row is discretely consistent with the rest of the grid. Taking the samples as they are leaves an
    // O(h^2) jump between rows 0 and 1 that shows up as a first-order residual.
    for (std::size_t k = 0; k < K; ++k)
        for (int i = 0; i < Nm; ++i) {
            const Matrix& w0 = out.w[k][g.node(i, 0)];
            const Matrix w = scheme == Scheme::midpoint ? (w0 + out.w[k][g.node(i + 1, 0)]) * cplx(0.5, 0.0) : w0;
            out.gamma[k][g.node(i + 1, 0)] = out.gamma[k][g.node(i, 0)] * matrix_exp(w * cplx(hm, 0.0));
        }
    for (int i = 0; i <= Nm; ++i) finish_node(i, 0);
    for (int j = 1; j <= Np; ++j) finish_node(0, j);

    // W on the z+ axis by the trapezoid rule (explicit since Gamma is known there).
    std::vector<Matrix> r_prev = eval_rhs(node_gamma(g.node(0, 0)), 0, 0);
    for (int j = 0; j < Np; ++j) {
        const auto r_next = eval_rhs(node_gamma(g.node(0, j + 1)), 0, j + 1);
        for (std::size_t k = 0; k < K; ++k) {
            const Matrix incr = scheme == Scheme::midpoint ? (r_prev[k] + r_next[k]) * cplx(0.5 * hp, 0.0)
                                                           : r_prev[k] * cplx(hp, 0.0);
            out.w[k][g.node(0, j + 1)] = out.w[k][g.node(0, j)] + incr;
        }
        r_prev = r_next;
    }

    // Interior sweep: z+ outer, z- inner.
    for (int j = 0; j < Np; ++j) {
        for (int i = 0; i < Nm; ++i) {
            const int below = g.node(i + 1, j), left = g.node(i, j + 1), nd = g.node(i + 1, j + 1);
            const auto r0 = eval_rhs(node_gamma(below), i + 1, j);
            if (scheme == Scheme::euler) {
                for (std::size_t k = 0; k < K; ++k) {
                    out.w[k][nd] = out.w[k][below] + r0[k] * cplx(hp, 0.0);
                    out.gamma[k][nd] = out.gamma[k][left] * matrix_exp(out.w[k][left] * cplx(hm, 0.0));
                }
            } else {
                std::vector<Matrix> pred(K);
                for (std::size_t k = 0; k < K; ++k) {
                    const Matrix w_star = out.w[k][below] + r0[k] * cplx(hp, 0.0);
                    pred[k] = out.gamma[k][left] * matrix_exp((out.w[k][left] + w_star) * cplx(0.5 * hm, 0.0));
                }
                for (std::size_t k = 0; k < K; ++k) check_node(pred[k], i + 1, j + 1);
                const auto r1 = eval_rhs(pred, i + 1, j + 1);
                for (std::size_t k = 0; k < K; ++k) {
                    out.w[k][nd] = out.w[k][below] + (r0[k] + r1[k]) * cplx(0.5 * hp, 0.0);
                    out.gamma[k][nd] =
                        out.gamma[k][left] * matrix_exp((out.w[k][left] + out.w[k][nd]) * cplx(0.5 * hm, 0.0));
                }
            }
            finish_node(i + 1, j + 1);
        }
    }
    return out;
}

ResidualField residual_field(const TodaSystem& sys, const FieldGrid& grid) {
    const GridSpec& g = grid.grid;
    const int Nm = g.n_minus, Np = g.n_plus;
    if (Nm < 2 || Np < 2) throw DomainError("residual needs an interior of at least one node (3x3 grid)");
    const std::size_t K = grid.slots.size();
    ResidualField rf;
    rf.grid = g;
    rf.slots = grid.slots;
    rf.r.assign(K, std::vector<Matrix>(g.nodes()));
    rf.rhs.assign(K, std::vector<Matrix>(g.nodes()));

    // Central W from log differences at interior i, all j.
    std::vector<std::vector<Matrix>> wc(K, std::vector<Matrix>(g.nodes()));
    for (std::size_t k = 0; k < K; ++k)
        for (int j = 0; j <= Np; ++j) {
            Matrix prev = half_step_w(grid.at(k, 0, j), grid.at(k, 1, j), g.h_minus);
            for (int i = 1; i < Nm; ++i) {
                Matrix next = half_step_w(grid.at(k, i, j), grid.at(k, i + 1, j), g.h_minus);
                wc[k][g.node(i, j)] = (prev + next) * cplx(0.5, 0.0);
                prev = std::move(next);
            }
        }
    for (int i = 1; i < Nm; ++i)
        for (int j = 1; j < Np; ++j) {
            const int nd = g.node(i, j);
            const SystemState st = state_at(sys, grid, i, j);
            const auto r = rhs_slots(sys, grid.slots, st.gamma, st.plus, st.minus);
            for (std::size_t k = 0; k < K; ++k) {
                const Matrix dw = (wc[k][g.node(i, j + 1)] - wc[k][g.node(i, j - 1)]) * cplx(0.5 / g.h_plus, 0.0);
                rf.r[k][nd] = dw - r[k];
                rf.rhs[k][nd] = r[k];
            }
        }
    return rf;
}

ResidualReport summarize(const ResidualField& rf) {
    const GridSpec& g = rf.grid;
    const std::size_t K = rf.slots.size();
    ResidualReport rep;
    rep.max_per_slot.assign(K, 0.0);
    rep.mean_per_slot.assign(K, 0.0);
    rep.node_max.assign(g.nodes(), 0.0);
    int count = 0;
    for (int i = 1; i < g.n_minus; ++i)
        for (int j = 1; j < g.n_plus; ++j) {
            const int nd = g.node(i, j);
            ++count;
            for (std::size_t k = 0; k < K; ++k) {
                const double v = rf.r[k][nd].norm_fro();
                rep.max_per_slot[k] = std::max(rep.max_per_slot[k], v);
                rep.mean_per_slot[k] += v;
                rep.node_max[nd] = std::max(rep.node_max[nd], v);
            }
        }
    for (std::size_t k = 0; k < K; ++k) {
        rep.mean_per_slot[k] /= std::max(1, count);
        rep.max = std::max(rep.max, rep.max_per_slot[k]);
        rep.mean = std::max(rep.mean, rep.mean_per_slot[k]);
    }
    return rep;
}

ResidualReport residual(const TodaSystem& sys, const FieldGrid& grid) { return summarize(residual_field(sys, grid)); }

InvariantReport monitor_invariants(const TodaSystem& sys, const FieldGrid& grid) {
    const GridSpec& g = grid.grid;
    InvariantReport rep;
    const std::size_t K = grid.slots.size();
    if (sys.pairing.empty() && g.n_minus >= 2) {
        // D(i, j) = sum_a tr(Gamma_a^{-1} d- Gamma_a), central in z-.
        double var = 0.0;
        for (int i = 1; i < g.n_minus; ++i) {
            cplx d0 = 0.0;
            for (int j = 0; j <= g.n_plus; ++j) {
                cplx d = 0.0;
                for (std::size_t k = 0; k < K; ++k)
                    d += solve(grid.at(k, i, j), grid.at(k, i + 1, j) - grid.at(k, i - 1, j)).trace() /
                         cplx(2.0 * g.h_minus, 0.0);
                if (j == 0) d0 = d;
                var = std::max(var, std::abs(d - d0));
            }
        }
        rep.determinant_variation = var;
    }
    for (std::size_t k = 0; k < K; ++k) {
        const FieldSlot& f = field(sys, grid.slots[k]);
        if (!f.constraint) continue;
        double m = 0.0;
        for (const auto& x : grid.gamma[k]) m = std::max(m, field_constraint_defect(f, x).max_abs());
        rep.constraint_drift.push_back(m);
        rep.max_constraint_drift = std::max(rep.max_constraint_drift, m);
    }
    return rep;
}

std::vector<cplx> determinant_product(const TodaSystem& sys, const FieldGrid& grid) {
    const GridSpec& g = grid.grid;
    std::vector<cplx> out(g.nodes(), 1.0);
    for (int nd = 0; nd < g.nodes(); ++nd) {
        const auto gp = node_fields(sys, grid.slots, grid.gamma, nd);
        for (const auto& m : gp) out[nd] *= determinant(m);
    }
    return out;
}

FieldGrid sl_reduce(const TodaSystem& sys, const FieldGrid& grid) {
    if (!sys.pairing.empty()) throw DomainError("sl_reduce applies to systems without field ties");
    const GridSpec& g = grid.grid;
    const auto delta = determinant_product(sys, grid);
    const double two_pi = 2.0 * std::numbers::pi;
    // Unwrapped log Delta: principal at the origin, continued along row i = 0, then down each column.
    std::vector<cplx> logd(g.nodes());
    auto continue_from = [&](int from, int to) {
        const double re = std::log(std::abs(delta[to]));
        double im = std::arg(delta[to]);
        im += two_pi * std::round((logd[from].imag() - im) / two_pi);
        logd[to] = cplx(re, im);
    };
    logd[0] = std::log(delta[0]);
    for (int j = 1; j <= g.n_plus; ++j) continue_from(g.node(0, j - 1), g.node(0, j));
    for (int j = 0; j <= g.n_plus; ++j)
        for (int i = 1; i <= g.n_minus; ++i) continue_from(g.node(i - 1, j), g.node(i, j));

    const double n = sys.partition.dim();
    FieldGrid out = grid;
    const std::size_t K = grid.slots.size();
    for (int nd = 0; nd < g.nodes(); ++nd) {
        const cplx scale = std::exp(-logd[nd] / n);
        cplx trw = 0.0;
        for (std::size_t k = 0; k < K; ++k) trw += grid.w[k][nd].trace();
        for (std::size_t k = 0; k < K; ++k) {
            out.gamma[k][nd] = grid.gamma[k][nd] * scale;
            out.w[k][nd] = grid.w[k][nd] - Matrix::identity(grid.w[k][nd].rows()) * (trw / n);
        }
    }
    return out;
}

FieldGrid transform_grid(const TodaSystem& src, const TodaSystem& tgt, const FieldGrid& grid) {
    registered_equivalence(src, tgt);
    const GridSpec& g = grid.grid;
    FieldGrid out;
    out.grid = g;
    out.scheme = grid.scheme;
    out.slots = tgt.independent_fields();
    const std::size_t K = out.slots.size();
    out.gamma.assign(K, std::vector<Matrix>(g.nodes()));
    out.w.assign(K, std::vector<Matrix>(g.nodes()));
    out.drift.assign(g.nodes(), 0.0);
    out.c_plus.assign(tgt.p, std::vector<Matrix>(g.n_plus + 1));
    out.c_minus.assign(tgt.p, std::vector<Matrix>(g.n_minus + 1));
    for (int i = 0; i <= g.n_minus; ++i)
        for (int j = 0; j <= g.n_plus; ++j) {
            const int nd = g.node(i, j);
            const SystemState mapped = equivalence_substitution(src, tgt, state_at(src, grid, i, j));
            std::vector<Matrix> w(src.p);
            for (std::size_t k = 0; k < grid.slots.size(); ++k) w[grid.slots[k] - 1] = grid.w[k][nd];
            // The field map is an anti-automorphism composed with inversion, so W transforms like a residual.
            const auto w2 = transport_residual(src, tgt, w);
            double drift = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const int a = out.slots[k];
                out.gamma[k][nd] = mapped.gamma[a - 1];
                out.w[k][nd] = w2[a - 1];
                drift = std::max(drift, constraint_defect(tgt, a, out.gamma[k][nd]));
            }
            out.drift[nd] = drift;
            if (i == 0)
                for (int s = 0; s < tgt.p; ++s) out.c_plus[s][j] = mapped.plus[s];
            if (j == 0)
                for (int s = 0; s < tgt.p; ++s) out.c_minus[s][i] = mapped.minus[s];
        }
    return out;
}

EquivalenceReport check_equivalence_numeric(const TodaSystem& src, const TodaSystem& tgt, const FieldGrid& grid,
                                            double tol) {
    EquivalenceReport rep;
    rep.kind = registered_equivalence(src, tgt);
    rep.tol = tol;
    const ResidualField rs = residual_field(src, grid);
    const FieldGrid tg = transform_grid(src, tgt, grid);
    const ResidualField rt = residual_field(tgt, tg);
    const GridSpec& g = grid.grid;
    double scale = 1.0;
    for (const auto& slot : rs.rhs)
        for (const auto& m : slot)
            if (!m.empty()) scale = std::max(scale, m.max_abs());
    double mismatch = 0.0;
    for (int i = 1; i < g.n_minus; ++i)
        for (int j = 1; j < g.n_plus; ++j) {
            const int nd = g.node(i, j);
            std::vector<Matrix> r(src.p);
            for (std::size_t k = 0; k < rs.slots.size(); ++k) {
                r[rs.slots[k] - 1] = rs.r[k][nd];
                rep.source_residual = std::max(rep.source_residual, rs.r[k][nd].norm_fro());
            }
            const auto want = transport_residual(src, tgt, r);
            for (std::size_t k = 0; k < rt.slots.size(); ++k) {
                const Matrix& got = rt.r[k][nd];
                rep.target_residual = std::max(rep.target_residual, got.norm_fro());
                mismatch = std::max(mismatch, (got - want[rt.slots[k] - 1]).max_abs());
            }
        }
    rep.max_mismatch = mismatch / scale;
    rep.target_constraint_defect = *std::max_element(tg.drift.begin(), tg.drift.end());
    return rep;
}

namespace {

nlohmann::ordered_json flat_array(const std::vector<Matrix>& values) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& m : values)
        for (const auto& z : m.data()) {
            arr.push_back(z.real());
            arr.push_back(z.imag());
        }
    return arr;
}

} // namespace

std::string grid_to_json(const FieldGrid& grid, const std::optional<ResidualReport>& res) {
    using oj = nlohmann::ordered_json;
    oj j;
    j["format"] = "ltoda-field-grid";
    j["version"] = 1;
    j["grid"] = {{"n_minus", grid.grid.n_minus},
                 {"n_plus", grid.grid.n_plus},
                 {"h_minus", grid.grid.h_minus},
                 {"h_plus", grid.grid.h_plus}};
    j["scheme"] = to_string(grid.scheme);
    j["layout"] = "node-major (i * (n_plus + 1) + j), entries row-major, each complex as re, im";
    oj slots = oj::array();
    for (std::size_t k = 0; k < grid.slots.size(); ++k) {
        oj s;
        s["index"] = grid.slots[k];
        s["size"] = grid.gamma[k].empty() ? 0 : grid.gamma[k][0].rows();
        s["gamma"] = flat_array(grid.gamma[k]);
        s["W"] = flat_array(grid.w[k]);
        slots.push_back(s);
    }
    j["slots"] = slots;
    oj diag;
    diag["max_constraint_drift"] = grid.drift.empty() ? 0.0 : *std::max_element(grid.drift.begin(), grid.drift.end());
    if (res) {
        diag["max_residual"] = res->max;
        diag["mean_residual"] = res->mean;
        diag["max_residual_per_slot"] = res->max_per_slot;
    }
    j["diagnostics"] = diag;
    return j.dump() + "\n";
}

std::string diagnostics_csv(const FieldGrid& grid, const std::optional<ResidualReport>& res) {
    std::ostringstream os;
    os.precision(17);
    os << "i,j,z_minus,z_plus,residual,drift\n";
    const GridSpec& g = grid.grid;
    for (int i = 0; i <= g.n_minus; ++i)
        for (int j = 0; j <= g.n_plus; ++j) {
            const int nd = g.node(i, j);
            os << i << ',' << j << ',' << i * g.h_minus << ',' << j * g.h_plus << ','
               << (res ? res->node_max[nd] : 0.0) << ',' << grid.drift[nd] << '\n';
        }
    return os.str();
}

} // namespace ltoda
