#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ltoda/gradation.hpp"

namespace ltoda {

enum class Archetype { single, T1, T2, T3, T4 };

enum class Symmetry { free, antisymmetric, symmetric, traceless, coupled, general };

std::string to_string(Archetype a);
std::string to_string(Symmetry s);

/// A twist x -> sign * ^{ab} x, as written in the displayed systems ("-^J", "^{KJ}", ...).
struct TwistLabel {
    int sign = 1;
    Form a = Form::J;
    Form b = Form::J;
    std::string str() const;
    Matrix apply(const Matrix& x) const;
};

struct FieldSlot {
    int index = 1; // alpha, 1-based
    int size = 1;
    bool independent = true;
    /// Set for self-paired slots: ^F Gamma Gamma = I.
    std::optional<Form> constraint;
    /// Dependent slots: Gamma_alpha = (^Q Gamma_{tied_to})^{-1}, ^Q m = Q^{-1} (t m) Q.
    int tied_to = 0;
    std::optional<Form> tie_form;
    Matrix Q, Q_inv; // block B_{a, pi a} of the representative; empty for unpaired slots
};

struct SourceSlot {
    int index = 0;     // slot 0..p-1; slot a sits at block (a, a+1) for C_+ and (a+1, a) for C_-, slot 0 closes the cycle
    int chirality = 1; // +1 for C_+, -1 for C_-
    int row_block = 1, col_block = 1;
    int rows = 1, cols = 1;
    bool zero = false;
    bool independent = true;
    Symmetry symmetry = Symmetry::free;
    int partner = -1;
    /// Detected label of the coupling map T; empty when none of the standard twists matches.
    std::optional<TwistLabel> relation;
    /// T(X) = lambda * P (t X) Q maps the partner block into this block.
    cplx lambda = -1.0;
    Matrix P, Q;
};

struct TodaSystem {
    Archetype archetype = Archetype::T1;
    std::string archetype_name;
    std::optional<Form> F1, F2;   // constrained field forms at the two ends
    int end_sign_0 = 0;           // +1 symmetric, -1 antisymmetric self-paired source at slot 0
    int end_sign_s = 0;           // same at slot s
    bool mirrored = false;        // T3 with the constrained field at slot s
    std::string G0;
    int p = 1;
    int s = 1;
    bool sl = false;
    bool reducible = false;
    bool loop_type = false;
    int L = 0;
    IndexMap grading;
    GradationSpec spec;
    BlockPartition partition;
    std::vector<int> pairing;
    std::vector<FieldSlot> fields;       // p entries, fields[a-1]
    std::vector<SourceSlot> plus, minus; // p entries, by slot index

    const SourceSlot& source(int chirality, int slot) const { return chirality > 0 ? plus[slot] : minus[slot]; }
    std::vector<int> independent_fields() const;
    std::vector<int> independent_sources(int chirality) const;
};

/// Uses the gradation's own L (L = M for the inner trivial case).
TodaSystem build_system(const GradedAlgebra& g);
/// Throws ContractError when L is not the gradation's smallest nontrivial index.
TodaSystem build_system(const GradedAlgebra& g, int L);

/// Fills dependent entries of a p-vector of field values from the independent ones.
void materialize_fields(const TodaSystem& sys, std::vector<Matrix>& gamma);
/// Fills dependent and zero slots; symmetrizes nothing.
void materialize_sources(const TodaSystem& sys, int chirality, std::vector<Matrix>& c);
/// Applies the coupling of a self-paired or dependent slot to an arbitrary block value.
Matrix coupling_map(const SourceSlot& slot, const Matrix& partner_value);

/// Throws ContractError when a constrained field or a source coupling is violated beyond tol.
void check_fields(const TodaSystem& sys, const std::vector<Matrix>& gamma, double tol = 1e-6);
void check_sources(const TodaSystem& sys, int chirality, const std::vector<Matrix>& c, double tol = 1e-8);

/// Right-hand sides of all p cyclic equations from fully materialized data.
std::vector<Matrix> rhs_full(const TodaSystem& sys, const std::vector<Matrix>& gamma, const std::vector<Matrix>& cp,
                             const std::vector<Matrix>& cm);
/// Right-hand sides of the independent equations, indexed like fields (dependent entries left empty).
/// Inputs need only their independent entries; constraints are checked unless check is false.
std::vector<Matrix> rhs(const TodaSystem& sys, std::vector<Matrix> gamma, std::vector<Matrix> cp,
                        std::vector<Matrix> cm, bool check = true);

/// Projection of an arbitrary square matrix onto the tangent algebra of a field slot.
Matrix tangent_projection(const FieldSlot& f, const Matrix& x);
Matrix field_constraint_defect(const FieldSlot& f, const Matrix& g);

std::vector<Matrix> random_fields(const TodaSystem& sys, std::mt19937_64& rng, double scale = 0.5);
std::vector<Matrix> random_sources(const TodaSystem& sys, int chirality, std::mt19937_64& rng, double scale = 1.0);
/// Full block matrix c_+ or c_- from materialized slots.
Matrix assemble_sources(const TodaSystem& sys, int chirality, const std::vector<Matrix>& c);
Matrix assemble_fields(const TodaSystem& sys, const std::vector<Matrix>& gamma);

enum class DescribeFormat { json, latex, text };
DescribeFormat describe_format_from_string(const std::string& s);
std::string describe(const TodaSystem& sys, DescribeFormat format);
/// Rebuilds the system from a describe(json) document's provenance.
TodaSystem system_from_description(const std::string& json_text);

enum class EquivalenceKind { so_mirror, sp_mirror };
std::string to_string(EquivalenceKind k);

/// Spec of the registered target of a source spec; throws DomainError when none is registered.
GradationSpec equivalence_target_spec(const GradationSpec& source);
/// Throws DomainError for unregistered pairs.
EquivalenceKind registered_equivalence(const TodaSystem& source, const TodaSystem& target);

struct SystemState {
    std::vector<Matrix> gamma, plus, minus;
};

/// Maps materialized source-system data to materialized target-system data.
SystemState equivalence_substitution(const TodaSystem& source, const TodaSystem& target, const SystemState& state);
/// The field map Gamma -> Gamma' has a linear differential on W; this applies the induced map
/// to source residuals, giving the residual expected on target slot beta (independent slots only).
std::vector<Matrix> transport_residual(const TodaSystem& source, const TodaSystem& target,
                                       const std::vector<Matrix>& source_residual);

} // namespace ltoda
