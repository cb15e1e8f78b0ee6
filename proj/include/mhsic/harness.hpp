#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mhsic/martingale.hpp"
#include "mhsic/types.hpp"

namespace mhsic {

enum class DgpKind { Mixture, LinearGaussian };

std::string_view to_string(DgpKind kind);

/// One point of a sweep. For the mixture DGP d is 2 and p equals d_ambient;
/// for the linear-Gaussian DGP d_ambient is 0 (not applicable).
struct CellCoordinates {
    DgpKind dgp = DgpKind::Mixture;
    Index n = 100;
    double a = 0.0;
    Index d = 2;
    Index d_ambient = 1;
    Index p = 1;
    double noise_scale = 0.25;

    static CellCoordinates mixture(Index d_ambient, Index n, double a, double noise_scale = 0.25);
    static CellCoordinates linear_gaussian(Index d, Index p, Index n, double a);
};

struct RunOptions {
    double alpha = 0.05;
    Index trials = 100;
    std::uint64_t base_seed = 0;
    int permutations = 200;
    int threads = 1;
};

struct TrialOutcome {
    bool reject = false;
    double statistic = 0.0;
    double runtime_seconds = 0.0;
};

struct CellResult {
    Method method = Method::MHsic;
    CellCoordinates cell;
    double alpha = 0.05;
    Index trials = 0;
    Index trials_completed = 0;
    Index degenerate_count = 0;
    Index rejections = 0;
    /// rejections / trials_completed; NaN when no trial completed.
    double rejection_rate = 0.0;
    /// sqrt(rate (1 - rate) / trials_completed).
    double stderr_rate = 0.0;
    double mean_runtime_seconds = 0.0;
    std::uint64_t base_seed = 0;
};

/// Seed of trial `trial` in `cell`; a pure function of its arguments.
std::uint64_t trial_seed(std::uint64_t base_seed, const CellCoordinates& cell, Index trial);

MultiSample generate_cell_data(const CellCoordinates& cell, std::uint64_t seed);

/// Runs one test with Gaussian median-heuristic kernels (first-half medians for mdhsic).
TestResult run_method(Method method, const MultiSample& data, double alpha, int permutations, std::uint64_t seed);

using TrialFunction = std::function<TrialOutcome(Index trial)>;

/// Runs `trials` calls of `fn` (possibly on several threads) and aggregates
/// them in trial order. DegenerateVariance and DegenerateSample are counted
/// as degenerate trials and excluded from the rate.
CellResult run_trials(const TrialFunction& fn, Index trials, int threads);

CellResult run_cell(Method method, const CellCoordinates& cell, const RunOptions& options);

struct GridConfig {
    std::vector<Method> methods;
    DgpKind dgp = DgpKind::Mixture;
    std::vector<Index> n_grid;
    std::vector<double> a_grid;
    std::vector<Index> d_grid{2};
    std::vector<Index> d_ambient_grid{1};
    Index p = 5;
    double noise_scale = 0.25;
    RunOptions run;
};

/// Throws ConfigInvalid on empty grids, M < 1, or method/DGP combinations
/// that cannot run (two-variable methods on d != 2).
void validate(const GridConfig& config);

/// Cells of the Cartesian product, in canonical order.
std::vector<CellCoordinates> grid_cells(const GridConfig& config);

/// FNV-1a of the canonical key=value rendering, as 16 hex digits.
std::string config_hash(const GridConfig& config);

/// Canonical key=value rendering (the config file format).
std::string render_config(const GridConfig& config);

/// Parses the flat key=value format. Lists repeat their key; '#' starts a comment.
GridConfig parse_grid_config(std::istream& in);

/// Desk-scale presets: fig1-desk, fig2-desk, table1-desk.
GridConfig preset_config(std::string_view name);

struct GridReport {
    std::vector<CellResult> cells;
    std::string config_hash;
    std::string tool_version;
    std::string hardware;
    std::uint64_t base_seed = 0;
};

/// Runs every (method, cell) pair; cells sorted by (method, d, d_ambient, n, a).
GridReport run_grid(const GridConfig& config);

struct RuntimeRow {
    Method method = Method::MHsic;
    Index n = 0;
    double mean_seconds = 0.0;
    Index repeats = 0;
};

struct RuntimeTable {
    std::vector<Index> n_grid;
    std::vector<RuntimeRow> rows;
    /// mean(hsic-perm) / mean(mhsic) per n; empty if either method is missing.
    std::vector<double> speedup;

    double mean_seconds(Method method, Index n) const;
};

/// Per-test wall clock (bandwidth + Gram + statistic + threshold; data
/// generation excluded) on the mixture DGP, single-threaded.
RuntimeTable bench_runtime(const std::vector<Method>& methods, const std::vector<Index>& n_grid, Index d_ambient,
                           double a, Index repeats, std::uint64_t base_seed, int permutations = 200);

struct NormalityReport {
    std::vector<double> etas;
    Index degenerate_count = 0;
    double ks_distance = 0.0;
    double q90 = 0.0;
    double q95 = 0.0;
    double q99 = 0.0;
};

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and N(0, 1).
double ks_distance_to_normal(std::vector<double> values);

/// Linear-interpolation (type 7) empirical quantile.
double empirical_quantile(std::vector<double> values, double q);

NormalityReport normality_from_values(std::vector<double> etas);

/// Collects eta over `trials` null trials of a martingale method.
NormalityReport normality_report(Method method, const CellCoordinates& null_cell, Index trials,
                                 std::uint64_t base_seed, int threads = 1);

std::string hardware_string();
std::string_view tool_version();

}  // namespace mhsic
