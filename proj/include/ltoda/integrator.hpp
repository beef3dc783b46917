#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ltoda/toda_system.hpp"

namespace ltoda {

struct GridSpec {
    int n_minus = 100; // steps along z-
    int n_plus = 100;  // steps along z+
    double h_minus = 0.01;
    double h_plus = 0.01;

    int nodes() const { return (n_minus + 1) * (n_plus + 1); }
    int node(int i, int j) const { return i * (n_plus + 1) + j; }
};

enum class Scheme { euler, midpoint };
std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// Characteristic data. Field arrays are indexed by position in slots (the independent fields),
/// source arrays by slot index 0..p-1 with only independent, nonzero slots required.
struct GoursatData {
    GridSpec grid;
    std::vector<int> slots;
    std::vector<std::vector<Matrix>> gamma_minus; // [k][i], Gamma on z+ = 0
    std::vector<std::vector<Matrix>> gamma_plus;  // [k][j], Gamma on z- = 0
    /// Optional exact Gamma^{-1} d_- Gamma on z+ = 0; central log differences are used otherwise.
    std::vector<std::vector<Matrix>> w_minus;
    std::vector<std::vector<Matrix>> c_plus;  // [slot][j]
    std::vector<std::vector<Matrix>> c_minus; // [slot][i]
};

using AxisField = std::function<std::vector<Matrix>(double)>; // z -> p-vector with independent entries
using AxisSource = std::function<std::vector<Matrix>(double)>;

/// Samples closed-form axis data. w_minus may be empty.
GoursatData sample_goursat(const TodaSystem& sys, const GridSpec& grid, const AxisField& gamma_minus,
                           const AxisField& gamma_plus, const AxisSource& c_plus, const AxisSource& c_minus,
                           const AxisField& w_minus = {});

enum class SourceKind { random, zero, unit };
std::string to_string(SourceKind k);
SourceKind source_kind_from_string(const std::string& s);

/// Smooth test data: Gamma = Gamma_c exp(z X) exp(z^2 Y) on each axis with tangent X, Y,
/// sources (1 + z/4) C0 with C0 admissible. Exact W is supplied on the z- axis.
struct SmoothDataOptions {
    double field_scale = 0.05;
    double source_scale = 0.3;
    SourceKind sources = SourceKind::random;
    bool constant_sources = false;
    std::uint64_t seed = 0;
};
GoursatData smooth_data(const TodaSystem& sys, const GridSpec& grid, const SmoothDataOptions& opt = {});

/// Throws DomainError on corner mismatch or wrong array shapes, ContractError on constraint violations.
void check_goursat(const TodaSystem& sys, const GoursatData& data);

struct FieldGrid {
    GridSpec grid;
    Scheme scheme = Scheme::midpoint;
    std::vector<int> slots;
    std::vector<std::vector<Matrix>> gamma; // [k][node]
    std::vector<std::vector<Matrix>> w;     // [k][node]
    std::vector<std::vector<Matrix>> c_plus;  // [slot][j], materialized
    std::vector<std::vector<Matrix>> c_minus; // [slot][i], materialized
    std::vector<double> drift;                // max constraint defect per node

    const Matrix& at(int k, int i, int j) const { return gamma[k][grid.node(i, j)]; }
};

/// Materialized fields and sources at a node.
SystemState state_at(const TodaSystem& sys, const FieldGrid& grid, int i, int j);

/// Gamma on the z- axis is rebuilt from the corner value and W by the scheme's own update; the
/// z+ axis samples are used as given.
/// Throws BlowUpError at the first node with a singular or ill-conditioned field, ContractError on
/// constraint drift beyond drift_tol.
FieldGrid integrate(const TodaSystem& sys, const GoursatData& data, Scheme scheme = Scheme::midpoint,
                    double drift_tol = 1e-6);

/// Per-node residual matrices d+(Gamma^-1 d- Gamma) - RHS on interior nodes.
struct ResidualField {
    GridSpec grid;
    std::vector<int> slots;
    std::vector<std::vector<Matrix>> r;   // [k][node]; empty matrices on the boundary
    std::vector<std::vector<Matrix>> rhs; // [k][node]
};

struct ResidualReport {
    std::vector<double> max_per_slot, mean_per_slot;
    double max = 0.0;
    double mean = 0.0;
    std::vector<double> node_max; // max over slots, per node (zero on the boundary)
};

ResidualField residual_field(const TodaSystem& sys, const FieldGrid& grid);
ResidualReport summarize(const ResidualField& r);
/// Needs at least 3x3 nodes.
ResidualReport residual(const TodaSystem& sys, const FieldGrid& grid);

struct InvariantReport {
    /// max |D(i, j) - D(i, 0)|; only for systems without field ties.
    std::optional<double> determinant_variation;
    std::vector<double> constraint_drift; // per constrained slot, in field order
    double max_constraint_drift = 0.0;
    double source_variation = 0.0; // sources depend on one coordinate by construction
};
InvariantReport monitor_invariants(const TodaSystem& sys, const FieldGrid& grid);

/// Gamma_a -> Delta^{-1/n} Gamma_a with Delta the product of determinants; n-th root on the principal
/// branch at the origin, continued along the first row then down the columns.
FieldGrid sl_reduce(const TodaSystem& sys, const FieldGrid& grid);
/// Product of determinants at each node.
std::vector<cplx> determinant_product(const TodaSystem& sys, const FieldGrid& grid);

struct EquivalenceReport {
    EquivalenceKind kind = EquivalenceKind::so_mirror;
    double max_mismatch = 0.0; // max |r' - transported r|, relative to max(1, max |RHS|)
    double source_residual = 0.0;
    double target_residual = 0.0;
    double target_constraint_defect = 0.0;
    double tol = 1e-8;
    bool pass() const { return max_mismatch <= tol && target_constraint_defect <= 1e-6; }
};

/// Substitutes the source grid nodewise into the target system.
FieldGrid transform_grid(const TodaSystem& source, const TodaSystem& target, const FieldGrid& grid);
EquivalenceReport check_equivalence_numeric(const TodaSystem& source, const TodaSystem& target, const FieldGrid& grid,
                                            double tol = 1e-8);

/// Self-describing bundle: metadata, per-slot complex arrays as [re, im] pairs, diagnostics.
std::string grid_to_json(const FieldGrid& grid, const std::optional<ResidualReport>& res = std::nullopt);
/// Columns i, j, z_minus, z_plus, residual, drift.
std::string diagnostics_csv(const FieldGrid& grid, const std::optional<ResidualReport>& res = std::nullopt);

} // namespace ltoda
