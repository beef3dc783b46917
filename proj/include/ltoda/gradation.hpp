#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ltoda/classical.hpp"

namespace ltoda {

enum class Family { gl_inner, sl_inner, so_inner, sp_inner, gl_outer, so_outer };
enum class CaseKind { m1_eq_M, m1_lt_M, trivial_h };

std::string to_string(Family f);
std::string to_string(CaseKind c);
/// Throw DomainError on unknown names.
Family family_from_string(const std::string& s);
CaseKind case_from_string(const std::string& s);

bool is_outer_family(Family f);

/// Integer data of a canonical gradation. For outer gl, "M" is 2N and m1-eq-M means m_1 = N.
struct GradationSpec {
    Family family = Family::gl_inner;
    int n = 1;
    int M = 1;
    CaseKind kase = CaseKind::trivial_h;
    int nu = 1;
    std::vector<int> n_alpha{1};
    std::vector<int> k_alpha;
    /// gl/sl inner only: replaces the default m_p = M - sum k. Never serialized.
    std::optional<int> m_p_override;

    int p() const { return static_cast<int>(n_alpha.size()); }
    bool operator==(const GradationSpec& o) const = default;
};

struct Violation {
    std::string relation; // e.g. "gap-sum"
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<std::string> notes;
    bool ok() const { return violations.empty(); }
    bool violates(const std::string& relation) const;
};

/// Strict checks the parity of N - sum k against the declared nu for outer gl with m_1 < N;
/// permissive infers nu from that parity and records a note.
enum class ValidationMode { strict, permissive };

ValidationReport validate_spec(const GradationSpec& spec, ValidationMode mode = ValidationMode::strict);

/// nu after permissive inference; equals spec.nu otherwise.
int effective_nu(const GradationSpec& spec, ValidationMode mode);

/// Order of the automorphism the spec describes, from its integer data.
int expected_order(const GradationSpec& spec);

struct Exponents {
    std::vector<int> m; // m_1 > ... > m_p
    cplx rho = 1.0;
    int M = 1;
};

/// The m_alpha and rho of the canonical h. Requires only structural well-formedness.
Exponents canonical_exponents(const GradationSpec& spec, ValidationMode mode = ValidationMode::strict);

/// exp(2 pi i num / den), exact at multiples of a quarter turn.
cplx root_of_unity(long num, long den);

struct CanonicalForm {
    Matrix h;
    std::optional<Matrix> B;
    AlgebraForm algebra;
    AutomorphismRep automorphism;
    /// Value of ^B h h; empty for gl and sl inner.
    std::optional<Matrix> form_target;
    cplx nu = 1.0;
    int order = 1;
};

/// Throws DomainError listing the violated relations if the spec is invalid.
CanonicalForm build_h(const GradationSpec& spec, ValidationMode mode = ValidationMode::strict);

using BlockKey = std::pair<int, int>; // 1-based (alpha, beta)
using IndexMap = std::map<BlockKey, std::set<int>>;

struct GradedAlgebra {
    GradationSpec spec;
    CanonicalForm canon;
    BlockPartition partition;
    std::vector<int> m;
    int M = 1;
    /// Period of the block index differences: M for inner, N for outer gl.
    int period = 1;
    /// Pairing alpha -> pi(alpha) induced by the block structure of B (1-based); empty for gl/sl inner.
    std::vector<int> pairing;
    /// Indices allowed by the block formula.
    IndexMap index_map;
    /// Indices actually carried by each block, derived from the projector.
    IndexMap populated;
    int L = 0;
    bool loop_type = false;
    std::vector<Matrix> basis;

    const AlgebraForm& algebra() const { return canon.algebra; }
    const AutomorphismRep& automorphism() const { return canon.automorphism; }
    bool is_outer() const { return canon.automorphism.kind() == AutoKind::outer; }
    /// The gaps k_1..k_{p-1} closed up by m_p - m_1 + period.
    std::vector<int> cyclic_gaps() const;
};

GradedAlgebra make_graded(const GradationSpec& spec, ValidationMode mode = ValidationMode::strict);

/// Indices of block (alpha, beta), 1-based. Throws DimensionError when out of range.
std::set<int> grading_index(const GradedAlgebra& g, int alpha, int beta);

/// x_k = (1/M) sum_j eps_M^{-jk} A^j(x).
Matrix project(const GradedAlgebra& g, const Matrix& x, int k);
/// All M projections at once.
std::vector<Matrix> project_all(const GradedAlgebra& g, const Matrix& x);

struct GradationReport {
    bool support_ok = true;
    bool table_ok = true;
    bool completeness_ok = true;
    bool eigen_ok = true;
    bool closure_ok = true;
    bool zero_block_diagonal_ok = true;
    double completeness_err = 0.0;
    double closure_err = 0.0;
    std::vector<std::string> failures;
    bool ok() const {
        return support_ok && table_ok && completeness_ok && eigen_ok && closure_ok && zero_block_diagonal_ok;
    }
};

GradationReport verify_gradation(const GradedAlgebra& g, double tol = 1e-10);

/// h^M = nu I, ^B h h = form target, and the order of the automorphism.
struct CanonicalReport {
    double power_err = 0.0;
    double form_err = 0.0;
    int order = 0;
    int expected = 0;
    bool ok(double tol = 1e-12) const { return power_err <= tol && form_err <= tol && order == expected; }
};

CanonicalReport verify_canonical(const GradedAlgebra& g, int max_order = 64);

struct EnumerationCaps {
    int n_max = 16;
    int M_max = 24;
};

/// Calls sink for every valid spec in lexicographic order of (p, n_alpha, k_alpha, case, nu).
/// Stops early when sink returns false.
void enumerate_specs(Family family, int n, int M, const std::optional<CaseKind>& case_filter,
                     const std::function<bool(const GradationSpec&)>& sink, EnumerationCaps caps = {});
std::vector<GradationSpec> enumerate_specs(Family family, int n, int M,
                                           const std::optional<CaseKind>& case_filter = std::nullopt,
                                           EnumerationCaps caps = {});

std::string spec_to_json(const GradationSpec& spec);
/// Strict: unknown fields, missing fields or wrong types throw ParseError.
GradationSpec spec_from_json(const std::string& text);

} // namespace ltoda
