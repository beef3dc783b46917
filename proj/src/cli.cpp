#include "ltoda/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "ltoda/integrator.hpp"

namespace ltoda {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("LTODA_OUTPUT_DIR"); env && *env) return env;
    return ".";
}

// --- enumerate -------------------------------------------------------------

struct EnumerateArgs {
    std::string family;
    int n = 0, M = 0;
    std::string kase;
    bool count = false;
    EnumerationCaps caps;
};

int cmd_enumerate(const EnumerateArgs& a, std::ostream& out) {
    const Family f = family_from_string(a.family);
    std::optional<CaseKind> filter;
    if (!a.kase.empty()) filter = case_from_string(a.kase);
    long total = 0;
    enumerate_specs(
        f, a.n, a.M, filter,
        [&](const GradationSpec& s) {
            ++total;
            if (!a.count) out << spec_to_json(s) << "\n";
            return true;
        },
        a.caps);
    if (a.count) out << total << "\n";
    return exit_ok;
}

// --- validate --------------------------------------------------------------

int cmd_validate(const std::string& path, bool permissive, std::ostream& out) {
    const GradationSpec s = spec_from_json(read_input(path));
    const auto rep = validate_spec(s, permissive ? ValidationMode::permissive : ValidationMode::strict);
    for (const auto& n : rep.notes) out << "note: " << n << "\n";
    if (rep.ok()) {
        out << "ok\n";
        return exit_ok;
    }
    for (const auto& v : rep.violations) out << v.message << "\n";
    return exit_validation;
}

// --- describe --------------------------------------------------------------

int cmd_describe(const std::string& path, const std::string& format, std::optional<int> L, std::ostream& out,
                 std::ostream& err) {
    const DescribeFormat fmt = describe_format_from_string(format);
    const GradationSpec s = spec_from_json(read_input(path));
    const auto rep = validate_spec(s);
    if (!rep.ok()) {
        for (const auto& v : rep.violations) err << v.message << "\n";
        return exit_validation;
    }
    const GradedAlgebra g = make_graded(s);
    const auto vg = verify_gradation(g);
    if (!vg.ok()) {
        for (const auto& f : vg.failures) err << "gradation check failed: " << f << "\n";
        return exit_validation;
    }
    const TodaSystem sys = L ? build_system(g, *L) : build_system(g);
    out << describe(sys, fmt);
    return exit_ok;
}

// --- simulate --------------------------------------------------------------

struct RunConfig {
    GridSpec grid;
    Scheme scheme = Scheme::midpoint;
    SmoothDataOptions data;
    bool refine = false;
    double corner_perturbation = 0.0;
    std::string output = "ltoda_run";
    double tol_residual = 1e-3;
    double tol_determinant = 1e-4;
    double tol_drift = 1e-6;
};

template <class T>
T get_field(const json& j, const char* key, const char* what) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError(std::string("run.") + key + " must be " + what);
    }
}

RunConfig parse_run(const json& run) {
    if (!run.is_object()) throw ParseError("the run section must be an object");
    static const std::set<std::string> known{"n_minus",      "n_plus",          "h_minus", "h_plus",
                                             "scheme",       "sources",         "source_scale",
                                             "field_scale",  "constant_sources", "seed",
                                             "refine",       "corner_perturbation", "output",
                                             "tolerances"};
    for (const auto& [k, v] : run.items())
        if (!known.count(k)) throw ParseError("unknown run field '" + k + "'");
    RunConfig c;
    if (run.contains("n_minus")) c.grid.n_minus = get_field<int>(run, "n_minus", "an integer");
    if (run.contains("n_plus")) c.grid.n_plus = get_field<int>(run, "n_plus", "an integer");
    if (run.contains("h_minus")) c.grid.h_minus = get_field<double>(run, "h_minus", "a number");
    if (run.contains("h_plus")) c.grid.h_plus = get_field<double>(run, "h_plus", "a number");
    if (run.contains("scheme")) c.scheme = scheme_from_string(get_field<std::string>(run, "scheme", "a string"));
    if (run.contains("sources"))
        c.data.sources = source_kind_from_string(get_field<std::string>(run, "sources", "a string"));
    if (run.contains("source_scale")) c.data.source_scale = get_field<double>(run, "source_scale", "a number");
    if (run.contains("field_scale")) c.data.field_scale = get_field<double>(run, "field_scale", "a number");
    if (run.contains("constant_sources"))
        c.data.constant_sources = get_field<bool>(run, "constant_sources", "a boolean");
    if (run.contains("seed")) c.data.seed = get_field<std::uint64_t>(run, "seed", "a non-negative integer");
    if (run.contains("refine")) c.refine = get_field<bool>(run, "refine", "a boolean");
    if (run.contains("corner_perturbation"))
        c.corner_perturbation = get_field<double>(run, "corner_perturbation", "a number");
    if (run.contains("output")) c.output = get_field<std::string>(run, "output", "a string");
    if (run.contains("tolerances")) {
        const json& t = run["tolerances"];
        if (!t.is_object()) throw ParseError("run.tolerances must be an object");
        for (const auto& [k, v] : t.items()) {
            if (!v.is_number()) throw ParseError("tolerance '" + k + "' must be a number");
            if (k == "residual") c.tol_residual = v.get<double>();
            else if (k == "determinant") c.tol_determinant = v.get<double>();
            else if (k == "drift") c.tol_drift = v.get<double>();
            else throw ParseError("unknown tolerance '" + k + "'");
        }
    }
    return c;
}

int cmd_simulate(const std::string& path, const std::string& out_flag, std::optional<std::uint64_t> seed,
                 std::ostream& out, std::ostream& err) {
    json cfg;
    try {
        cfg = json::parse(read_input(path));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    if (!cfg.is_object()) throw ParseError("a run configuration must be a JSON object");
    RunConfig rc;
    if (cfg.contains("run")) {
        rc = parse_run(cfg["run"]);
        cfg.erase("run");
    }
    if (seed) rc.data.seed = *seed;
    const GradationSpec s = spec_from_json(cfg.dump());
    const auto rep = validate_spec(s);
    if (!rep.ok()) {
        for (const auto& v : rep.violations) err << v.message << "\n";
        return exit_validation;
    }
    const TodaSystem sys = build_system(make_graded(s));

    auto run_once = [&](const GridSpec& grid) {
        GoursatData data = smooth_data(sys, grid, rc.data);
        if (rc.corner_perturbation != 0.0 && !data.gamma_plus.empty())
            data.gamma_plus[0][0](0, 0) += rc.corner_perturbation;
        return integrate(sys, data, rc.scheme, rc.tol_drift);
    };
    const FieldGrid grid = run_once(rc.grid);
    const ResidualReport res = residual(sys, grid);
    const InvariantReport inv = monitor_invariants(sys, grid);

    std::optional<double> ratio;
    if (rc.refine) {
        GridSpec fine = rc.grid;
        fine.n_minus *= 2;
        fine.n_plus *= 2;
        fine.h_minus /= 2;
        fine.h_plus /= 2;
        const double r2 = residual(sys, run_once(fine)).max;
        ratio = r2 > 0 ? res.max / r2 : 0.0;
    }

    const std::string dir = output_dir(out_flag);
    const std::string base = dir + "/" + rc.output;
    {
        std::ofstream f(base + ".json");
        f << grid_to_json(grid, res);
        if (!f) throw DomainError("cannot write '" + base + ".json'");
    }
    {
        std::ofstream f(base + ".csv");
        f << diagnostics_csv(grid, res);
        if (!f) throw DomainError("cannot write '" + base + ".csv'");
    }

    const bool det_ok = !inv.determinant_variation || *inv.determinant_variation <= rc.tol_determinant;
    const bool ok = res.max <= rc.tol_residual && det_ok && inv.max_constraint_drift <= rc.tol_drift;
    out << "archetype: " << sys.archetype_name << "\n";
    out << "grid: " << rc.grid.n_minus << "x" << rc.grid.n_plus << ", h = " << rc.grid.h_minus << " x "
        << rc.grid.h_plus << ", scheme " << to_string(rc.scheme) << "\n";
    out << "max residual: " << res.max << "\n";
    out << "determinant variation: ";
    if (inv.determinant_variation) out << *inv.determinant_variation << "\n";
    else out << "n/a\n";
    out << "constraint drift: " << inv.max_constraint_drift << "\n";
    if (ratio) out << "residual ratio under halving: " << *ratio << "\n";
    out << "wrote: " << base << ".json, " << base << ".csv\n";
    out << "status: " << (ok ? "ok" : "tolerance exceeded") << "\n";
    return ok ? exit_ok : exit_validation;
}

// --- check -----------------------------------------------------------------

struct CheckArgs {
    std::string what = "all";
    int n_max = 6, M_max = 8;
    int jobs = 1;
    std::uint64_t seed = 0;
};

struct SweepResult {
    long checked = 0;
    std::vector<std::string> failures;
};

/// Runs task(k) for k < count on `jobs` threads; results are merged in task order.
SweepResult fan_out(int count, int jobs, const std::function<SweepResult(int)>& task) {
    std::vector<SweepResult> parts(count);
    std::atomic<int> next{0};
    std::mutex m;
    std::exception_ptr failure;
    auto worker = [&] {
        for (int k; (k = next++) < count;) {
            try {
                parts[k] = task(k);
            } catch (...) {
                std::lock_guard lock(m);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    SweepResult all;
    for (auto& p : parts) {
        all.checked += p.checked;
        for (auto& f : p.failures) all.failures.push_back(std::move(f));
    }
    return all;
}

const std::vector<Family> kFamilies = {Family::gl_inner, Family::sl_inner, Family::so_inner,
                                       Family::sp_inner, Family::gl_outer, Family::so_outer};

SweepResult check_gradations(const CheckArgs& a) {
    std::vector<std::tuple<Family, int, int>> tasks;
    for (Family f : kFamilies)
        for (int n = 1; n <= a.n_max; ++n)
            for (int M = 1; M <= a.M_max; ++M) tasks.emplace_back(f, n, M);
    return fan_out(static_cast<int>(tasks.size()), a.jobs, [&](int k) {
        const auto [f, n, M] = tasks[k];
        SweepResult r;
        std::vector<GradationSpec> specs;
        try {
            specs = enumerate_specs(f, n, M);
        } catch (const DomainError&) {
            return r; // parity or size excluded for this family
        }
        for (const auto& s : specs) {
            ++r.checked;
            const GradedAlgebra g = make_graded(s);
            const auto vg = verify_gradation(g);
            const auto vc = verify_canonical(g);
            if (!vg.ok()) r.failures.push_back(spec_to_json(s) + ": " + (vg.failures.empty() ? "?" : vg.failures[0]));
            if (!vc.ok())
                r.failures.push_back(spec_to_json(s) + ": canonical form contract (power " +
                                     std::to_string(vc.power_err) + ", form " + std::to_string(vc.form_err) +
                                     ", order " + std::to_string(vc.order) + ")");
        }
        return r;
    });
}

/// Source specs of the registered pairs within the caps.
std::vector<GradationSpec> equivalence_sources(int n_max, int M_max) {
    std::vector<GradationSpec> out;
    for (Family f : {Family::so_inner, Family::sp_inner})
        for (int n = 1; n <= n_max; ++n)
            for (int M = 1; M <= M_max; ++M) {
                if (f == Family::sp_inner && n % 2) continue;
                for (const auto& s : enumerate_specs(f, n, M, CaseKind::m1_lt_M)) {
                    if (s.p() < 3 || s.p() % 2 == 0) continue;
                    // Keep only pairs inside the registered domain: valid target, mirrored source.
                    try {
                        const TodaSystem src = build_system(make_graded(s));
                        const TodaSystem tgt = build_system(make_graded(equivalence_target_spec(s)));
                        registered_equivalence(src, tgt);
                        out.push_back(s);
                    } catch (const DomainError&) {
                    }
                }
            }
    return out;
}

SweepResult check_equivalences(const CheckArgs& a) {
    const auto specs = equivalence_sources(a.n_max, a.M_max);
    return fan_out(static_cast<int>(specs.size()), a.jobs, [&](int k) {
        const GradationSpec& s = specs[k];
        SweepResult r;
        r.checked = 1;
        const std::string tag = spec_to_json(s);
        try {
            const TodaSystem src = build_system(make_graded(s));
            const TodaSystem tgt = build_system(make_graded(equivalence_target_spec(s)));
            std::mt19937_64 rng(a.seed + k);
            for (int trial = 0; trial < 20; ++trial) {
                SystemState st{random_fields(src, rng), random_sources(src, 1, rng), random_sources(src, -1, rng)};
                const SystemState m = equivalence_substitution(src, tgt, st);
                check_fields(tgt, m.gamma, 1e-10);
                check_sources(tgt, 1, m.plus, 1e-10);
                check_sources(tgt, -1, m.minus, 1e-10);
                const auto want = transport_residual(src, tgt, rhs(src, st.gamma, st.plus, st.minus));
                const auto got = rhs(tgt, m.gamma, m.plus, m.minus);
                for (int b : tgt.independent_fields())
                    if (rel_diff(got[b - 1], want[b - 1]) > 1e-10) {
                        r.failures.push_back(tag + ": pointwise transport mismatch");
                        return r;
                    }
            }
            SmoothDataOptions opt;
            opt.seed = a.seed + k;
            const FieldGrid grid = integrate(src, smooth_data(src, GridSpec{20, 20, 0.025, 0.025}, opt));
            const auto rep = check_equivalence_numeric(src, tgt, grid);
            if (!rep.pass())
                r.failures.push_back(tag + ": residual transport mismatch " + std::to_string(rep.max_mismatch));
        } catch (const Error& e) {
            r.failures.push_back(tag + ": " + e.what());
        }
        return r;
    });
}

int cmd_check(const CheckArgs& a, std::ostream& out) {
    if (a.what != "gradations" && a.what != "equivalences" && a.what != "all")
        throw DomainError("check expects gradations, equivalences or all");
    if (a.n_max > EnumerationCaps{}.n_max || a.M_max > EnumerationCaps{}.M_max)
        throw DomainError("check caps exceed the enumeration caps");
    ojson summary;
    bool pass = true;
    auto section = [&](const char* name, const SweepResult& r) {
        ojson j;
        j["checked"] = r.checked;
        j["failed"] = r.failures.size();
        j["failures"] = r.failures;
        summary[name] = j;
        pass = pass && r.failures.empty();
    };
    if (a.what != "equivalences") section("gradations", check_gradations(a));
    if (a.what != "gradations") section("equivalences", check_equivalences(a));
    summary["seed"] = a.seed;
    summary["pass"] = pass;
    out << summary.dump(2) << "\n";
    return pass ? exit_ok : exit_validation;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gradations of classical Lie algebras and their Toda systems", "ltoda"};
    app.require_subcommand(1);

    EnumerateArgs ea;
    auto* en = app.add_subcommand("enumerate", "List canonical gradation specs, one JSON object per line");
    en->add_option("family", ea.family, "gl-inner, sl-inner, so-inner, sp-inner, gl-outer or so-outer")->required();
    en->add_option("--n", ea.n, "Matrix size")->required();
    en->add_option("--M", ea.M, "Automorphism order")->required();
    en->add_option("--case", ea.kase, "m1-eq-M, m1-lt-M or trivial-h");
    en->add_flag("--count", ea.count, "Print only the number of specs");
    en->add_option("--n-max", ea.caps.n_max, "Cap on n");
    en->add_option("--M-max", ea.caps.M_max, "Cap on M");

    std::string spec_path;
    bool permissive = false;
    auto* va = app.add_subcommand("validate", "Check a spec against the gradation relations");
    va->add_option("spec", spec_path, "Spec JSON file, or - for stdin")->required();
    va->add_flag("--permissive", permissive, "Infer nu for outer gl with m_1 < N");

    std::string format = "text";
    std::optional<int> L;
    auto* de = app.add_subcommand("describe", "Print the Toda system of a spec");
    de->add_option("spec", spec_path, "Spec JSON file, or - for stdin")->required();
    de->add_option("--format", format, "json, latex or text");
    de->add_option("--L", L, "Source grade (defaults to the gradation's own)");

    std::string out_dir;
    std::optional<std::uint64_t> sim_seed;
    auto* si = app.add_subcommand("simulate", "Integrate a system from smooth characteristic data");
    si->add_option("config", spec_path, "Spec JSON with an optional run section")->required();
    si->add_option("--out", out_dir, "Output directory (default $LTODA_OUTPUT_DIR or .)");
    si->add_option("--seed", sim_seed, "Seed for the generated data");

    CheckArgs ca;
    auto* ch = app.add_subcommand("check", "Run the exhaustive small-instance suites");
    ch->add_option("what", ca.what, "gradations, equivalences or all");
    ch->add_option("--n-max", ca.n_max, "Largest n");
    ch->add_option("--M-max", ca.M_max, "Largest M");
    ch->add_option("--jobs", ca.jobs, "Worker threads");
    ch->add_option("--seed", ca.seed, "Seed for randomized checks");

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "ltoda: " << e.what() << "\n";
        return exit_domain;
    }

    try {
        if (*en) return cmd_enumerate(ea, out);
        if (*va) return cmd_validate(spec_path, permissive, out);
        if (*de) return cmd_describe(spec_path, format, L, out, err);
        if (*si) return cmd_simulate(spec_path, out_dir, sim_seed, out, err);
        if (*ch) return cmd_check(ca, out);
    } catch (const ParseError& e) {
        err << "ltoda: parse error: " << e.what() << "\n";
        return exit_parse;
    } catch (const BlowUpError& e) {
        err << "ltoda: blow-up: " << e.what() << "\n";
        return exit_blowup;
    } catch (const Error& e) {
        err << "ltoda: " << e.what() << "\n";
        return exit_domain;
    } catch (const std::exception& e) {
        err << "ltoda: " << e.what() << "\n";
        return exit_domain;
    }
    return exit_domain;
}

} // namespace ltoda
