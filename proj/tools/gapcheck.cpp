// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Command line driver. Exit codes: 0 on success, 2 for invalid configuration or
// arguments, 3 when a numerical kernel fails.

#include <cstdio>
#include <sstream>
#include <CLI11.hpp>
#include <fmt/format.h>
#include "gapcheck/report.hpp"

using namespace gapcheck;

namespace
{

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

void print_summary(const report::ExperimentConfig &config, const report::SuiteResult &result)
{
  fmt::print("{}: {} levels, {:.1f} s\n", config.name, result.levels.size(),
             result.total_seconds);
  const report::Verdicts &v = result.verdicts;
  const std::pair<const char *, const report::Verdict *> rows[] = {
      {"ADK", &v.adk}, {"DF", &v.df}, {"VG", &v.vg}, {"ODF", &v.odf}, {"NC", &v.nc}};
  for (const auto &[name, verdict] : rows)
  {
    fmt::print("  {:<4} {}\n", name, report::to_string(verdict->flag));
  }
  for (const std::string &violation : v.violations)
  {
    fmt::print("  inconsistent: {}\n", violation);
  }
  fmt::print("  output: {}\n", config.output_dir.string());
}

int run(const std::string &config_path, const std::string &out, const std::string &levels)
{
  report::ExperimentConfig config = report::load_config(config_path);
  if (!out.empty())
  {
    config.output_dir = out;
  }
  if (!levels.empty())
  {
    config.levels = report::parse_levels(levels);
    report::validate(config);
  }
  const report::SuiteResult result = report::run_suite(config);
  print_summary(config, result);
  return 0;
}

int oracle(const std::string &domain, const std::string &bc_name, Index count)
{
  const auto comma = domain.find(',');
  if (comma == std::string::npos)
  {
    throw report::ConfigError(fmt::format("--domain expects a,b; got '{}'", domain));
  }
  const double a = report::parse_length(domain.substr(0, comma));
  const double b = report::parse_length(domain.substr(comma + 1));
  const auto bc = fem::parse_boundary(bc_name);
  if (!bc)
  {
    throw report::ConfigError(fmt::format("--bc: unknown value '{}'", bc_name));
  }
  if (count < 1)
  {
    throw report::ConfigError("-k must be positive");
  }
  const Vector values = fem::exact_eigenvalues(a, b, *bc, count);
  for (Index i = 0; i < values.size(); ++i)
  {
    fmt::print("{:.17g}\n", values(i));
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Discrete compactness diagnostics for Galerkin eigenvalue problems"};
  app.require_subcommand(1);

  std::string config_path, out, levels;
  CLI::App *run_cmd = app.add_subcommand("run", "Run a configured refinement sweep");
  run_cmd->add_option("--config", config_path, "Experiment configuration file")->required();
  run_cmd->add_option("--out", out, "Output directory (overrides the config)");
  run_cmd->add_option("--levels", levels, "Comma separated levels (overrides the config)");

  std::string domain, bc_name;
  Index count = 8;
  CLI::App *oracle_cmd =
      app.add_subcommand("oracle", "Print exact curl-curl eigenvalues on a rectangle");
  oracle_cmd->add_option("--domain", domain, "Side lengths a,b (numbers or pi forms)")
      ->required();
  oracle_cmd->add_option("--bc", bc_name, "natural or essential")->required();
  oracle_cmd->add_option("-k", count, "Number of eigenvalues");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try
  {
    if (run_cmd->parsed())
    {
      return run(config_path, out, levels);
    }
    return oracle(domain, bc_name, count);
  }
  catch (const report::ConfigError &e)
  {
    fmt::print(stderr, "error: {}\n", e.what());
    return kConfigExit;
  }
  catch (const report::NumericalFailure &e)
  {
    fmt::print(stderr, "numerical failure in {}: {}\n", e.operation(), e.what());
    return kNumericalExit;
  }
  catch (const std::exception &e)
  {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
