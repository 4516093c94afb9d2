// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef GAPCHECK_REPORT_HPP
#define GAPCHECK_REPORT_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>
#include "gapcheck/fem.hpp"
#include "gapcheck/frame.hpp"
#include "gapcheck/synthetic.hpp"

namespace gapcheck::report
{

// Invalid configuration; the CLI exits with code 2.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// A linear algebra failure during a sweep; the CLI exits with code 3.
class NumericalFailure : public std::runtime_error
{
  std::string op;

public:
  NumericalFailure(std::string operation, const std::string &what)
    : std::runtime_error(what), op(std::move(operation))
  {
  }
  const std::string &operation() const { return op; }
};

enum class ModelKind
{
  Synthetic,
  Fem2d
};

struct SyntheticParams
{
  // 0 selects 4 × the largest level.
  Index truncation = 0;
  // −1 selects the truncation.
  Index kernel_dim = -1;
  // λ_k = k^p.
  double lambda_exponent = 2.0;
  std::optional<synthetic::CounterexampleKind> counterexample;
  // ε_n = |v_n|^p for adk-not-df; p > 1 keeps ε_n = o(|v_n|).
  double eps_exponent = 2.0;
};

struct FemParams
{
  double width = 0.0, height = 0.0;  // 0 selects π
  fem::SpaceKind space = fem::SpaceKind::Edge;
  fem::Boundary bc = fem::Boundary::Essential;
  std::string coefficients = "unit";
  fem::SpaceKind reference_space = fem::SpaceKind::Edge2;
  Index reference_level = 32;
};

// Trend rules for the verdicts. The window holds the last window_steps + 1 levels.
struct VerdictRules
{
  int window_steps = 3;
  // Bounded: no ratio x_j / x_i (i < j in the window) reaches this value.
  double growth_limit = 2.0;
  // Vanishing gap: non-increasing over the window and, at the finest level, at most this
  // value or decayed like the decay rule below.
  double gap_threshold = 0.05;
  // Decay: non-increasing over the window and the finest value at most this fraction of
  // the first one.
  double decay_factor = 0.5;
  // Series at or below this value count as exactly zero.
  double zero_floor = 1e-9;
};

struct ExperimentConfig
{
  std::string name = "experiment";
  ModelKind model = ModelKind::Synthetic;
  SyntheticParams synthetic;
  FemParams fem;
  std::vector<Index> levels;
  Index num_eigenvalues = 8;
  Index audit_samples = 20;
  std::uint64_t seed = 1;
  Tolerances tol;
  VerdictRules rules;
  std::filesystem::path output_dir = ".";
};

// Sectioned key-value document; unknown sections or keys, malformed values and violated
// invariants raise ConfigError.
ExperimentConfig parse_config(std::istream &in);
ExperimentConfig load_config(const std::filesystem::path &path);
std::vector<Index> parse_levels(const std::string &text);
// A positive length given as a number, "pi", "<c>*pi" or "pi/<d>".
double parse_length(const std::string &text);
void validate(const ExperimentConfig &config);

enum class Flag
{
  Pass,
  Fail,
  Inconclusive
};

std::string_view to_string(Flag flag);

struct Verdict
{
  Flag flag = Flag::Inconclusive;
  std::string rule;
  std::vector<double> trend;
};

struct Verdicts
{
  Verdict adk, df, vg, odf, nc;
  // Broken implications among ODF ⇒ VG ⇔ NC ⇒ DF ⇒ ADK.
  std::vector<std::string> violations;

  bool consistent() const { return violations.empty(); }
};

struct LevelAudit
{
  bool skipped = false;
  std::string reason;
  double gap_energy = 0.0, kernel_source_norm = 0.0;
  double gap_bound_residual = 0.0;  // gap_X − ‖K_n‖_{W→X}
  double odf = 0.0, gap_pivot = 0.0, odf_predicted = 0.0;
  double odf_identity_residual = 0.0;     // |gap_O² + odf⁻² − 1|
  double solve_identity_residual = 0.0;   // relative, energy norm
  double energy_identity_residual = 0.0;  // relative
  bool tame_built = false;
  double tame_o_norm = 0.0;
  double tame_residual = 0.0;  // o_norm − odf (1 + 1e-8)
};

struct LevelResult
{
  DiagnosticsRow row;
  LevelAudit audit;
  double seconds = 0.0;
};

struct SuiteResult
{
  std::vector<LevelResult> levels;
  Verdicts verdicts;
  double setup_seconds = 0.0;
  double total_seconds = 0.0;
};

// Reference problem of a sweep: forms, splitting and kernel samples. Building it dominates
// the cost of small sweeps, so configurations that agree on it can share one.
struct Reference
{
  ExperimentConfig source;
  std::shared_ptr<const FormPair> forms;
  RefSplitting split;
  Matrix kernel_samples;
  std::optional<synthetic::DiagonalModel> model;
  std::optional<fem::FemSpace> space;
  double seconds = 0.0;
};

Reference build_reference(const ExperimentConfig &config);

// True when both configurations lead to the same reference problem.
bool same_reference(const ExperimentConfig &a, const ExperimentConfig &b);

// Pinned audit tolerances.
inline constexpr double kGapBoundSlack = 1e-9;
inline constexpr double kIdentityTolerance = 1e-9;
inline constexpr double kTameSlack = 1e-8;

Verdicts evaluate_verdicts(const std::vector<DiagnosticsRow> &rows, const VerdictRules &rules);
std::vector<std::string> implication_violations(const Verdicts &v);

// Runs the sweep without writing files.
SuiteResult run_experiment(const ExperimentConfig &config);

// Same, on a prebuilt reference; throws ConfigError when it does not match the config.
SuiteResult run_experiment(const ExperimentConfig &config, const Reference &reference);

// Runs the sweep and writes diagnostics.csv, verdicts.json and inequality-audit.json into
// the output directory.
SuiteResult run_suite(const ExperimentConfig &config);

void write_diagnostics_csv(const std::vector<LevelResult> &levels, Index num_eigenvalues,
                           std::ostream &out);

}  // namespace gapcheck::report

#endif  // GAPCHECK_REPORT_HPP
