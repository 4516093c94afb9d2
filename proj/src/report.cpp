// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "gapcheck/report.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

namespace gapcheck::report
{

namespace
{

using json = nlohmann::ordered_json;
namespace pt = boost::property_tree;

// Allowed keys per section.
const std::map<std::string, std::set<std::string>> kSchema = {
    {"experiment", {"name", "model", "levels", "eigenvalues", "audit_samples", "seed"}},
    {"synthetic",
     {"truncation", "kernel_dim", "lambda_exponent", "counterexample", "eps_exponent"}},
    {"fem2d",
     {"width", "height", "space", "bc", "coefficients", "reference_space", "reference_level"}},
    {"tolerances", {"kernel", "consistency", "compatible"}},
    {"verdicts", {"window", "growth_limit", "gap_threshold", "decay_factor", "zero_floor"}},
    {"output", {"directory"}},
};

std::string trim(std::string_view text)
{
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos)
  {
    return {};
  }
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::string key_name(const std::string &section, const std::string &key)
{
  return fmt::format("[{}] {}", section, key);
}

double to_double(const std::string &where, const std::string &text)
{
  const std::string t = trim(text);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size() || !std::isfinite(value))
  {
    throw ConfigError(fmt::format("{}: '{}' is not a finite number", where, text));
  }
  return value;
}

long long to_integer(const std::string &where, const std::string &text)
{
  const std::string t = trim(text);
  long long value = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size())
  {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", where, text));
  }
  return value;
}

// A number, "pi", "<c>*pi" or "pi/<d>".
double to_length(const std::string &where, const std::string &text)
{
  const std::string t = trim(text);
  constexpr double pi = std::numbers::pi;
  if (t == "pi")
  {
    return pi;
  }
  if (t.size() > 3 && t.ends_with("*pi"))
  {
    return to_double(where, t.substr(0, t.size() - 3)) * pi;
  }
  if (t.size() > 3 && t.starts_with("pi/"))
  {
    return pi / to_double(where, t.substr(3));
  }
  return to_double(where, t);
}

template <typename T, typename Parse>
T to_enum(const std::string &where, const std::string &text, Parse parse)
{
  const auto value = parse(trim(text));
  if (!value)
  {
    throw ConfigError(fmt::format("{}: unknown value '{}'", where, text));
  }
  return *value;
}

std::string number(double x)
{
  if (std::isnan(x))
  {
    return "nan";
  }
  if (std::isinf(x))
  {
    return x > 0 ? "inf" : "-inf";
  }
  return fmt::format("{:.17g}", x);
}

json json_number(double x)
{
  if (std::isfinite(x))
  {
    return x;
  }
  return number(x);
}

json json_series(const std::vector<double> &xs)
{
  json out = json::array();
  for (double x : xs)
  {
    out.push_back(json_number(x));
  }
  return out;
}

double friedrichs_value(const FriedrichsConstant &c)
{
  return c.status == FriedrichsConstant::Status::Infinite ? INFINITY : c.value;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Last window_steps + 1 entries.
std::vector<double> window(const std::vector<double> &xs, const VerdictRules &rules)
{
  const std::size_t n = std::min<std::size_t>(xs.size(), rules.window_steps + 1);
  return {xs.end() - static_cast<std::ptrdiff_t>(n), xs.end()};
}

bool non_increasing(const std::vector<double> &xs, double floor)
{
  for (std::size_t i = 1; i < xs.size(); ++i)
  {
    if (!(xs[i] <= xs[i - 1] * (1.0 + 1e-9) + floor))
    {
      return false;
    }
  }
  return true;
}

Verdict bounded_verdict(const std::vector<double> &series, const VerdictRules &rules)
{
  Verdict v;
  v.trend = series;
  v.rule = fmt::format("finite and no growth by {}x over the last {} levels",
                       rules.growth_limit, rules.window_steps + 1);
  if (series.size() < 2)
  {
    v.flag = Flag::Inconclusive;
    return v;
  }
  const std::vector<double> w = window(series, rules);
  double growth = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i)
  {
    for (std::size_t j = i + 1; j < w.size(); ++j)
    {
      if (!std::isfinite(w[j]))
      {
        growth = INFINITY;
      }
      else if (w[i] > 0.0)
      {
        growth = std::max(growth, w[j] / w[i]);
      }
    }
  }
  v.flag = growth < rules.growth_limit ? Flag::Pass : Flag::Fail;
  return v;
}

Verdict vanishing_verdict(const std::vector<double> &series, const VerdictRules &rules)
{
  Verdict v;
  v.trend = series;
  v.rule =
      fmt::format("non-increasing over the last {} levels and at the finest level at most "
                  "{} or at most {} of the first",
                  rules.window_steps + 1, rules.gap_threshold, rules.decay_factor);
  if (series.size() < 2)
  {
    v.flag = Flag::Inconclusive;
    return v;
  }
  const std::vector<double> w = window(series, rules);
  const bool zero =
      std::all_of(w.begin(), w.end(), [&](double x) { return x <= rules.zero_floor; });
  const bool small =
      w.back() <= rules.gap_threshold || w.back() <= rules.decay_factor * w.front();
  const bool pass = zero || (non_increasing(w, rules.zero_floor) && small);
  v.flag = pass ? Flag::Pass : Flag::Fail;
  return v;
}

Verdict decay_verdict(const std::vector<double> &series, const VerdictRules &rules)
{
  Verdict v;
  v.trend = series;
  v.rule = fmt::format("non-increasing over the last {} levels with the finest value at most "
                       "{} of the first",
                       rules.window_steps + 1, rules.decay_factor);
  if (series.size() < 2)
  {
    v.flag = Flag::Inconclusive;
    return v;
  }
  const std::vector<double> w = window(series, rules);
  const bool zero =
      std::all_of(w.begin(), w.end(), [&](double x) { return x <= rules.zero_floor; });
  const bool pass = zero || (non_increasing(w, rules.zero_floor) &&
                             w.back() <= rules.decay_factor * w.front());
  v.flag = pass ? Flag::Pass : Flag::Fail;
  return v;
}

json verdict_json(const Verdict &v)
{
  return {{"flag", std::string(to_string(v.flag))},
          {"rule", v.rule},
          {"trend", json_series(v.trend)}};
}

std::string model_name(ModelKind kind)
{
  return kind == ModelKind::Synthetic ? "synthetic" : "fem2d";
}

json config_json(const ExperimentConfig &c)
{
  json levels = json::array();
  for (Index n : c.levels)
  {
    levels.push_back(n);
  }
  json out = {{"name", c.name},
              {"model", model_name(c.model)},
              {"levels", levels},
              {"eigenvalues", c.num_eigenvalues},
              {"audit_samples", c.audit_samples},
              {"seed", c.seed}};
  if (c.model == ModelKind::Synthetic)
  {
    const SyntheticParams &s = c.synthetic;
    out["synthetic"] = {
        {"truncation", s.truncation},
        {"kernel_dim", s.kernel_dim},
        {"lambda_exponent", s.lambda_exponent},
        {"counterexample",
         s.counterexample ? std::string(synthetic::to_string(*s.counterexample)) : "none"},
        {"eps_exponent", s.eps_exponent}};
  }
  else
  {
    const FemParams &f = c.fem;
    out["fem2d"] = {{"width", f.width},
                    {"height", f.height},
                    {"space", std::string(fem::to_string(f.space))},
                    {"bc", std::string(fem::to_string(f.bc))},
                    {"coefficients", f.coefficients},
                    {"reference_space", std::string(fem::to_string(f.reference_space))},
                    {"reference_level", f.reference_level},
                    {"curl", "scalar curl in two dimensions"}};
  }
  return out;
}

fem::Coefficients coefficients(const std::string &name)
{
  return name == "smooth" ? fem::Coefficients::smooth() : fem::Coefficients::unit();
}

// Reference forms and kernel samples; the splitting is left to the caller.
Reference make_reference(const ExperimentConfig &c)
{
  Reference setup;
  setup.source = c;
  if (c.model == ModelKind::Synthetic)
  {
    const SyntheticParams &s = c.synthetic;
    Vector lambda(s.truncation);
    for (Index k = 0; k < s.truncation; ++k)
    {
      lambda(k) = std::pow(static_cast<double>(k + 1), s.lambda_exponent);
    }
    setup.model.emplace(std::move(lambda), s.kernel_dim);
    setup.forms = setup.model->forms();
    setup.kernel_samples = setup.model->kernel_samples();
    return setup;
  }
  const FemParams &f = c.fem;
  const auto mesh = std::make_shared<const fem::StructuredMesh>(
      fem::build_mesh(f.width, f.height, f.reference_level));
  setup.space = fem::make_space(mesh, f.reference_space, f.bc);
  const fem::SparseAssembly as =
      fem::assemble_sparse(*setup.space, coefficients(f.coefficients));
  setup.forms = std::make_shared<const FormPair>(Matrix(as.mass), Matrix(as.stiffness));
  // Gradients of two smooth scalars that vanish on the boundary.
  const double a = f.width, b = f.height;
  const std::vector<std::function<double(const fem::Point &)>> scalars = {
      [a, b](const fem::Point &x)
      {
        return std::sin(std::numbers::pi * x.x() / a) * std::sin(std::numbers::pi * x.y() / b);
      },
      [a, b](const fem::Point &x)
      { return x.x() * (a - x.x()) * x.y() * (b - x.y()) * std::cos(x.x() + 0.5 * x.y()); }};
  setup.kernel_samples.resize(setup.forms->order(), static_cast<Index>(scalars.size()));
  for (std::size_t j = 0; j < scalars.size(); ++j)
  {
    setup.kernel_samples.col(static_cast<Index>(j)) =
        as.gradient * fem::scalar_interpolant(*setup.space, scalars[j]);
  }
  return setup;
}

Discretization build_level(const ExperimentConfig &c, const Reference &setup, Index n)
{
  if (c.model == ModelKind::Synthetic)
  {
    const synthetic::DiagonalModel &model = *setup.model;
    if (!c.synthetic.counterexample)
    {
      return synthetic::baseline(model, n);
    }
    switch (*c.synthetic.counterexample)
    {
    case synthetic::CounterexampleKind::AdkNotDf:
    {
      const double pivot = 1.0 / std::sqrt(1.0 + model.eigenvalue(n));
      return synthetic::perturb_adk_not_df(model, n, std::pow(pivot, c.synthetic.eps_exponent))
          .disc;
    }
    case synthetic::CounterexampleKind::DfNotDc:
      return synthetic::augment_df_not_dc(model, n).disc;
    case synthetic::CounterexampleKind::VgNotOdf:
      return synthetic::augment_vg_not_odf(model, n).disc;
    }
  }
  const fem::FemSpace &ref = *setup.space;
  const auto mesh = std::make_shared<const fem::StructuredMesh>(
      fem::build_mesh(c.fem.width, c.fem.height, n));
  const fem::FemSpace space = fem::make_space(mesh, c.fem.space, c.fem.bc);
  return Discretization::restricted(setup.forms, Matrix(fem::refine_embed(space, ref)));
}

// Largest energy norm of the columns of X relative to that of Y.
double energy_ratio(const FormPair &forms, const Matrix &X, const Matrix &Y)
{
  const Vector nx =
      X.cwiseProduct(forms.energy_times(X)).colwise().sum().cwiseMax(0.0).cwiseSqrt();
  const Vector ny =
      Y.cwiseProduct(forms.energy_times(Y)).colwise().sum().cwiseMax(0.0).cwiseSqrt();
  double worst = 0.0;
  for (Index j = 0; j < X.cols(); ++j)
  {
    worst = std::max(worst, nx(j) / std::max(ny(j), 1e-300));
  }
  return worst;
}

LevelAudit audit_level(const LevelOperators &ops, const DiagnosticsRow &row,
                       const RefSplitting &ref, const ExperimentConfig &c)
{
  LevelAudit a;
  const FormPair &forms = *ops.discretization().reference;
  if (ref.degenerate || ref.complement.cols() == 0)
  {
    a.skipped = true;
    a.reason = "reference stiffness form vanishes; the splitting is degenerate";
    return a;
  }
  if (row.dim_complement == 0)
  {
    a.skipped = true;
    a.reason = "empty discrete complement";
    return a;
  }
  a.gap_energy = row.gap_energy;
  a.kernel_source_norm = row.kernel_source_norm;
  a.gap_bound_residual = row.gap_energy - row.kernel_source_norm;
  a.odf = friedrichs_value(row.odf);
  a.gap_pivot = row.gap_pivot;
  a.odf_predicted =
      row.gap_pivot < 1.0 ? 1.0 / std::sqrt(1.0 - row.gap_pivot * row.gap_pivot) : INFINITY;
  // Compared as gap_O² + odf⁻² = 1; the odf form amplifies rounding by odf² near gap_O = 1.
  a.odf_identity_residual =
      std::abs(row.gap_pivot * row.gap_pivot + 1.0 / (a.odf * a.odf) - 1.0);

  std::mt19937_64 rng(c.seed + static_cast<std::uint64_t>(row.level));
  std::normal_distribution<double> normal;
  const auto random = [&](Index rows, Index cols)
  {
    return Matrix(Matrix::NullaryExpr(rows, cols, [&]() { return normal(rng); }));
  };

  // a(Pu, Pv) = a(u, v) on random reference vectors.
  const Matrix U = random(forms.order(), c.audit_samples);
  const Matrix PU = ref.project(U);
  const Matrix projected = PU.transpose() * forms.stiffness_times(PU);
  const Matrix plain = U.transpose() * forms.stiffness_times(U);
  a.energy_identity_residual = (projected - plain).cwiseAbs().maxCoeff() /
                               std::max(plain.cwiseAbs().maxCoeff(), 1e-300);

  if (row.df.finite())
  {
    // K_n u = P_n K u for u in the reference complement.
    const Matrix V = ref.complement * random(ref.complement.cols(), c.audit_samples);
    const Matrix lhs = ops.solve(V);
    const Matrix rhs = ops.project(reference_solve(ref, V));
    a.solve_identity_residual = energy_ratio(forms, lhs - rhs, lhs);
  }
  else
  {
    a.solve_identity_residual = NAN;
  }

  if (row.odf.finite())
  {
    const FactoredMap R = ops.tame_operator(ref);
    a.tame_built = true;
    a.tame_o_norm = pivot_norm(R, forms);
    a.tame_residual = a.tame_o_norm - a.odf * (1.0 + kTameSlack);
  }
  return a;
}

json audit_json(const std::vector<LevelResult> &levels)
{
  json rows = json::array();
  double gap_bound = -INFINITY, odf_identity = 0.0, solve_identity = 0.0,
         energy_identity = 0.0, tame = -INFINITY;
  for (const LevelResult &lr : levels)
  {
    const LevelAudit &a = lr.audit;
    json r = {{"n", lr.row.level}};
    if (a.skipped)
    {
      r["skipped"] = a.reason;
      rows.push_back(r);
      continue;
    }
    r["gap_bound"] = {{"gap_X", json_number(a.gap_energy)},
                      {"norm_Kn_WtoX", json_number(a.kernel_source_norm)},
                      {"residual", json_number(a.gap_bound_residual)}};
    r["odf_gap_identity"] = {{"odf_const", json_number(a.odf)},
                             {"gap_O", json_number(a.gap_pivot)},
                             {"predicted", json_number(a.odf_predicted)},
                             {"residual", json_number(a.odf_identity_residual)}};
    r["discrete_solve_identity"] = {
        {"relative_residual", json_number(a.solve_identity_residual)}};
    r["projected_energy_identity"] = {
        {"relative_residual", json_number(a.energy_identity_residual)}};
    if (a.tame_built)
    {
      r["tame_operator_bound"] = {{"o_norm", json_number(a.tame_o_norm)},
                                  {"odf_const", json_number(a.odf)},
                                  {"residual", json_number(a.tame_residual)}};
      tame = std::max(tame, a.tame_residual);
    }
    else
    {
      r["tame_operator_bound"] = {
          {"skipped", "odf constant is infinite; no tame operator exists"}};
    }
    gap_bound = std::max(gap_bound, a.gap_bound_residual);
    odf_identity = std::max(odf_identity, a.odf_identity_residual);
    if (!std::isnan(a.solve_identity_residual))
    {
      solve_identity = std::max(solve_identity, a.solve_identity_residual);
    }
    energy_identity = std::max(energy_identity, a.energy_identity_residual);
    rows.push_back(r);
  }
  json summary = {{"gap_bound",
                   {{"max_residual", json_number(gap_bound)},
                    {"slack", kGapBoundSlack},
                    {"holds", !(gap_bound > kGapBoundSlack)}}},
                  {"odf_gap_identity",
                   {{"max_residual", json_number(odf_identity)},
                    {"tolerance", kIdentityTolerance},
                    {"holds", !(odf_identity > kIdentityTolerance)}}},
                  {"discrete_solve_identity",
                   {{"max_relative_residual", json_number(solve_identity)},
                    {"tolerance", kIdentityTolerance},
                    {"holds", !(solve_identity > kIdentityTolerance)}}},
                  {"projected_energy_identity",
                   {{"max_relative_residual", json_number(energy_identity)},
                    {"tolerance", kIdentityTolerance},
                    {"holds", !(energy_identity > kIdentityTolerance)}}},
                  {"tame_operator_bound",
                   {{"max_residual", json_number(tame)},
                    {"relative_slack", kTameSlack},
                    {"holds", !(tame > 0.0)}}}};
  return {{"levels", rows}, {"summary", summary}};
}

void write_file(const std::filesystem::path &path, const std::string &content)
{
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out)
  {
    throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  }
}

// Maps library errors onto the driver's two failure classes.
template <typename F>
auto translate_errors(F &&body)
{
  try
  {
    return body();
  }
  catch (const linalg::LinalgError &e)
  {
    throw NumericalFailure(std::string(e.operation()), e.what());
  }
  catch (const std::invalid_argument &e)
  {
    // Precondition, mesh, nesting and coefficient errors all derive from invalid_argument.
    throw ConfigError(e.what());
  }
}

}  // namespace

double parse_length(const std::string &text)
{
  const double x = to_length("length", text);
  if (!(x > 0.0))
  {
    throw ConfigError(fmt::format("length: '{}' is not positive", text));
  }
  return x;
}

std::vector<Index> parse_levels(const std::string &text)
{
  std::vector<Index> levels;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
  {
    const long long n = to_integer("levels", item);
    if (n < 1)
    {
      throw ConfigError(fmt::format("levels: {} is not a positive level", n));
    }
    levels.push_back(static_cast<Index>(n));
  }
  if (levels.empty())
  {
    throw ConfigError("levels: the list is empty");
  }
  return levels;
}

ExperimentConfig parse_config(std::istream &in)
{
  pt::ptree tree;
  try
  {
    pt::read_ini(in, tree);
  }
  catch (const pt::ini_parser_error &e)
  {
    throw ConfigError(fmt::format("malformed config: {} (line {})", e.message(), e.line()));
  }
  std::map<std::string, std::map<std::string, std::string>> values;
  for (const auto &[section, body] : tree)
  {
    const auto schema = kSchema.find(section);
    if (schema == kSchema.end() || body.empty())
    {
      throw ConfigError(body.empty() && !body.data().empty()
                            ? fmt::format("key '{}' must belong to a section", section)
                            : fmt::format("unknown section [{}]", section));
    }
    for (const auto &[key, value] : body)
    {
      if (!schema->second.contains(key))
      {
        throw ConfigError(fmt::format("unknown key {}", key_name(section, key)));
      }
      values[section][key] = value.data();
    }
  }
  const auto get = [&](const std::string &section,
                       const std::string &key) -> std::optional<std::string>
  {
    const auto s = values.find(section);
    if (s == values.end())
    {
      return std::nullopt;
    }
    const auto k = s->second.find(key);
    if (k == s->second.end())
    {
      return std::nullopt;
    }
    return k->second;
  };

  ExperimentConfig c;
  if (auto v = get("experiment", "name"))
  {
    c.name = trim(*v);
  }
  const auto model = get("experiment", "model");
  if (!model)
  {
    throw ConfigError("missing key [experiment] model");
  }
  if (trim(*model) == "synthetic")
  {
    c.model = ModelKind::Synthetic;
  }
  else if (trim(*model) == "fem2d")
  {
    c.model = ModelKind::Fem2d;
  }
  else
  {
    throw ConfigError(fmt::format("[experiment] model: unknown value '{}'", *model));
  }
  if (values.contains(c.model == ModelKind::Synthetic ? "fem2d" : "synthetic"))
  {
    throw ConfigError(fmt::format("section [{}] does not apply to model {}",
                                  c.model == ModelKind::Synthetic ? "fem2d" : "synthetic",
                                  model_name(c.model)));
  }
  const auto levels = get("experiment", "levels");
  if (!levels)
  {
    throw ConfigError("missing key [experiment] levels");
  }
  c.levels = parse_levels(*levels);
  if (auto v = get("experiment", "eigenvalues"))
  {
    c.num_eigenvalues = to_integer(key_name("experiment", "eigenvalues"), *v);
  }
  if (auto v = get("experiment", "audit_samples"))
  {
    c.audit_samples = to_integer(key_name("experiment", "audit_samples"), *v);
  }
  if (auto v = get("experiment", "seed"))
  {
    const long long seed = to_integer(key_name("experiment", "seed"), *v);
    if (seed < 0)
    {
      throw ConfigError("[experiment] seed must be non-negative");
    }
    c.seed = static_cast<std::uint64_t>(seed);
  }

  if (auto v = get("synthetic", "truncation"))
  {
    c.synthetic.truncation = to_integer(key_name("synthetic", "truncation"), *v);
  }
  if (auto v = get("synthetic", "kernel_dim"))
  {
    c.synthetic.kernel_dim = to_integer(key_name("synthetic", "kernel_dim"), *v);
  }
  if (auto v = get("synthetic", "lambda_exponent"))
  {
    c.synthetic.lambda_exponent = to_double(key_name("synthetic", "lambda_exponent"), *v);
  }
  if (auto v = get("synthetic", "counterexample"))
  {
    if (trim(*v) != "none")
    {
      c.synthetic.counterexample = to_enum<synthetic::CounterexampleKind>(
          key_name("synthetic", "counterexample"), *v, synthetic::parse_counterexample);
    }
  }
  if (auto v = get("synthetic", "eps_exponent"))
  {
    c.synthetic.eps_exponent = to_double(key_name("synthetic", "eps_exponent"), *v);
  }

  if (auto v = get("fem2d", "width"))
  {
    c.fem.width = to_length(key_name("fem2d", "width"), *v);
  }
  if (auto v = get("fem2d", "height"))
  {
    c.fem.height = to_length(key_name("fem2d", "height"), *v);
  }
  if (auto v = get("fem2d", "space"))
  {
    c.fem.space =
        to_enum<fem::SpaceKind>(key_name("fem2d", "space"), *v, fem::parse_space_kind);
  }
  if (auto v = get("fem2d", "bc"))
  {
    c.fem.bc = to_enum<fem::Boundary>(key_name("fem2d", "bc"), *v, fem::parse_boundary);
  }
  if (auto v = get("fem2d", "coefficients"))
  {
    c.fem.coefficients = trim(*v);
  }
  if (auto v = get("fem2d", "reference_space"))
  {
    c.fem.reference_space = to_enum<fem::SpaceKind>(key_name("fem2d", "reference_space"), *v,
                                                    fem::parse_space_kind);
  }
  if (auto v = get("fem2d", "reference_level"))
  {
    c.fem.reference_level = to_integer(key_name("fem2d", "reference_level"), *v);
  }

  if (auto v = get("tolerances", "kernel"))
  {
    c.tol.kernel = to_double(key_name("tolerances", "kernel"), *v);
  }
  if (auto v = get("tolerances", "consistency"))
  {
    c.tol.consistency = to_double(key_name("tolerances", "consistency"), *v);
  }
  if (auto v = get("tolerances", "compatible"))
  {
    c.tol.compatible = to_double(key_name("tolerances", "compatible"), *v);
  }

  if (auto v = get("verdicts", "window"))
  {
    c.rules.window_steps = static_cast<int>(to_integer(key_name("verdicts", "window"), *v));
  }
  if (auto v = get("verdicts", "growth_limit"))
  {
    c.rules.growth_limit = to_double(key_name("verdicts", "growth_limit"), *v);
  }
  if (auto v = get("verdicts", "gap_threshold"))
  {
    c.rules.gap_threshold = to_double(key_name("verdicts", "gap_threshold"), *v);
  }
  if (auto v = get("verdicts", "decay_factor"))
  {
    c.rules.decay_factor = to_double(key_name("verdicts", "decay_factor"), *v);
  }
  if (auto v = get("verdicts", "zero_floor"))
  {
    c.rules.zero_floor = to_double(key_name("verdicts", "zero_floor"), *v);
  }
  if (auto v = get("output", "directory"))
  {
    c.output_dir = trim(*v);
  }

  // Defaults that depend on other keys.
  if (c.model == ModelKind::Synthetic)
  {
    if (c.synthetic.truncation == 0)
    {
      c.synthetic.truncation = 4 * *std::max_element(c.levels.begin(), c.levels.end());
    }
    if (c.synthetic.kernel_dim < 0)
    {
      c.synthetic.kernel_dim = c.synthetic.truncation;
    }
  }
  else
  {
    if (c.fem.width == 0.0)
    {
      c.fem.width = std::numbers::pi;
    }
    if (c.fem.height == 0.0)
    {
      c.fem.height = std::numbers::pi;
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError(fmt::format("cannot open config {}", path.string()));
  }
  return parse_config(in);
}

void validate(const ExperimentConfig &c)
{
  if (c.levels.empty())
  {
    throw ConfigError("levels: the list is empty");
  }
  for (std::size_t i = 0; i < c.levels.size(); ++i)
  {
    if (c.levels[i] < 1 || (i > 0 && c.levels[i] <= c.levels[i - 1]))
    {
      throw ConfigError("levels must be positive and strictly ascending");
    }
  }
  if (c.num_eigenvalues < 0)
  {
    throw ConfigError("[experiment] eigenvalues must be non-negative");
  }
  if (c.audit_samples < 1)
  {
    throw ConfigError("[experiment] audit_samples must be positive");
  }
  if (!(c.tol.kernel > 0.0 && c.tol.kernel < 1.0) || !(c.tol.consistency > 0.0) ||
      !(c.tol.compatible > 0.0))
  {
    throw ConfigError("tolerances must be positive (kernel below 1)");
  }
  const VerdictRules &r = c.rules;
  if (r.window_steps < 1 || !(r.growth_limit > 1.0) || !(r.gap_threshold > 0.0) ||
      !(r.decay_factor > 0.0 && r.decay_factor < 1.0) || !(r.zero_floor >= 0.0))
  {
    throw ConfigError("verdict rules out of range (window >= 1, growth_limit > 1, "
                      "gap_threshold > 0, 0 < decay_factor < 1, zero_floor >= 0)");
  }
  const Index top = c.levels.back();
  if (c.model == ModelKind::Synthetic)
  {
    const SyntheticParams &s = c.synthetic;
    if (s.truncation <= top)
    {
      throw ConfigError(fmt::format(
          "[synthetic] truncation {} must exceed the largest level {}", s.truncation, top));
    }
    if (s.kernel_dim < 0)
    {
      throw ConfigError("[synthetic] kernel_dim must be non-negative");
    }
    if (!(s.lambda_exponent > 0.0))
    {
      throw ConfigError("[synthetic] lambda_exponent must be positive");
    }
    if (s.counterexample)
    {
      using synthetic::CounterexampleKind;
      if (*s.counterexample == CounterexampleKind::AdkNotDf)
      {
        if (!(s.eps_exponent > 1.0))
        {
          throw ConfigError(fmt::format(
              "[synthetic] eps_exponent {} does not make eps_n = o(|v_n|); it must exceed 1",
              s.eps_exponent));
        }
        if (s.kernel_dim < top + 1)
        {
          throw ConfigError("[synthetic] adk-not-df needs kernel_dim >= largest level + 1");
        }
      }
      else if (s.truncation < 2 * top || s.kernel_dim < 2 * top)
      {
        throw ConfigError(fmt::format("[synthetic] {} needs truncation and kernel_dim >= {}",
                                      synthetic::to_string(*s.counterexample), 2 * top));
      }
    }
    return;
  }
  const FemParams &f = c.fem;
  if (!(f.width > 0.0) || !(f.height > 0.0))
  {
    throw ConfigError("[fem2d] width and height must be positive");
  }
  if (f.coefficients != "unit" && f.coefficients != "smooth")
  {
    throw ConfigError(fmt::format("[fem2d] coefficients: unknown value '{}'", f.coefficients));
  }
  if (f.reference_space == fem::SpaceKind::Nodal)
  {
    throw ConfigError("[fem2d] reference_space must be an edge space");
  }
  if (f.space != f.reference_space && f.reference_space != fem::SpaceKind::Edge2)
  {
    throw ConfigError(fmt::format("[fem2d] a {} reference does not contain {} levels",
                                  fem::to_string(f.reference_space), fem::to_string(f.space)));
  }
  const bool richer = f.reference_space != f.space;
  if (f.reference_level < top || (f.reference_level == top && !richer))
  {
    throw ConfigError("[fem2d] the reference space must be strictly finer than every level");
  }
  for (Index n : c.levels)
  {
    if (f.reference_level % n != 0)
    {
      throw ConfigError(fmt::format("[fem2d] level {} does not divide reference_level {}", n,
                                    f.reference_level));
    }
  }
}

std::string_view to_string(Flag flag)
{
  switch (flag)
  {
  case Flag::Pass:
    return "pass";
  case Flag::Fail:
    return "fail";
  case Flag::Inconclusive:
    return "inconclusive";
  }
  return "unknown";
}

std::vector<std::string> implication_violations(const Verdicts &v)
{
  struct Arrow
  {
    const char *from, *to;
    const Verdict &a, &b;
  };
  const Arrow arrows[] = {
      {"ODF", "VG", v.odf, v.vg}, {"VG", "NC", v.vg, v.nc},     {"NC", "VG", v.nc, v.vg},
      {"VG", "DF", v.vg, v.df},   {"NC", "DF", v.nc, v.df},     {"DF", "ADK", v.df, v.adk},
      {"ODF", "DF", v.odf, v.df}, {"ODF", "ADK", v.odf, v.adk}, {"VG", "ADK", v.vg, v.adk}};
  std::vector<std::string> out;
  for (const Arrow &arrow : arrows)
  {
    if (arrow.a.flag == Flag::Pass && arrow.b.flag == Flag::Fail)
    {
      out.push_back(fmt::format("{} passes but {} fails ({} implies {})", arrow.from, arrow.to,
                                arrow.from, arrow.to));
    }
  }
  return out;
}

Verdicts evaluate_verdicts(const std::vector<DiagnosticsRow> &rows, const VerdictRules &rules)
{
  std::vector<double> adk, df, vg, odf, nc;
  for (const DiagnosticsRow &r : rows)
  {
    adk.push_back(r.kernel_distance);
    df.push_back(friedrichs_value(r.df));
    vg.push_back(r.gap_energy);
    odf.push_back(friedrichs_value(r.odf));
    nc.push_back(r.solution_error);
  }
  Verdicts v;
  v.adk = decay_verdict(adk, rules);
  v.df = bounded_verdict(df, rules);
  v.vg = vanishing_verdict(vg, rules);
  v.odf = bounded_verdict(odf, rules);
  v.nc = decay_verdict(nc, rules);
  v.violations = implication_violations(v);
  return v;
}

Reference build_reference(const ExperimentConfig &config)
{
  validate(config);
  return translate_errors(
      [&]
      {
        const auto start = std::chrono::steady_clock::now();
        Reference reference = make_reference(config);
        reference.split = split_reference(*reference.forms, config.tol);
        reference.seconds = seconds_since(start);
        return reference;
      });
}

bool same_reference(const ExperimentConfig &a, const ExperimentConfig &b)
{
  if (a.model != b.model || a.tol.kernel != b.tol.kernel)
  {
    return false;
  }
  if (a.model == ModelKind::Synthetic)
  {
    return a.synthetic.truncation == b.synthetic.truncation &&
           a.synthetic.kernel_dim == b.synthetic.kernel_dim &&
           a.synthetic.lambda_exponent == b.synthetic.lambda_exponent;
  }
  return a.fem.width == b.fem.width && a.fem.height == b.fem.height && a.fem.bc == b.fem.bc &&
         a.fem.coefficients == b.fem.coefficients &&
         a.fem.reference_space == b.fem.reference_space &&
         a.fem.reference_level == b.fem.reference_level;
}

SuiteResult run_experiment(const ExperimentConfig &config)
{
  const Reference reference = build_reference(config);
  return run_experiment(config, reference);
}

SuiteResult run_experiment(const ExperimentConfig &config, const Reference &reference)
{
  validate(config);
  if (!same_reference(config, reference.source))
  {
    throw ConfigError(fmt::format("reference built for '{}' does not match '{}'",
                                  reference.source.name, config.name));
  }
  const auto start = std::chrono::steady_clock::now();
  SuiteResult result;
  result.setup_seconds = reference.seconds;
  translate_errors(
      [&]
      {
        for (Index n : config.levels)
        {
          const auto level_start = std::chrono::steady_clock::now();
          const Discretization d = build_level(config, reference, n);
          const Splitting s = split_discrete(d, config.tol);
          const LevelOperators ops(d, s, config.tol);
          LevelResult lr;
          lr.row = diagnose(ops, reference.split, reference.kernel_samples,
                            config.num_eigenvalues, static_cast<int>(n));
          lr.audit = audit_level(ops, lr.row, reference.split, config);
          lr.seconds = seconds_since(level_start);
          result.levels.push_back(std::move(lr));
        }
        return 0;
      });
  std::vector<DiagnosticsRow> rows;
  for (const LevelResult &lr : result.levels)
  {
    rows.push_back(lr.row);
  }
  result.verdicts = evaluate_verdicts(rows, config.rules);
  result.total_seconds = reference.seconds + seconds_since(start);
  return result;
}

void write_diagnostics_csv(const std::vector<LevelResult> &levels, Index num_eigenvalues,
                           std::ostream &out)
{
  fmt::print(out, "n,dim_Xn,dim_Wn,dim_Vn,df_const,odf_const,gap_X,gap_O,adk_dist,"
                  "norm_Kn_WtoX,nc_norm");
  for (Index k = 1; k <= num_eigenvalues; ++k)
  {
    fmt::print(out, ",eig_{}", k);
  }
  fmt::print(out, "\n");
  for (const LevelResult &lr : levels)
  {
    const DiagnosticsRow &r = lr.row;
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{}", r.level, r.dim_space, r.dim_kernel,
               r.dim_complement, number(friedrichs_value(r.df)),
               number(friedrichs_value(r.odf)), number(r.gap_energy), number(r.gap_pivot),
               number(r.kernel_distance), number(r.kernel_source_norm),
               number(r.solution_error));
    for (Index k = 0; k < num_eigenvalues; ++k)
    {
      fmt::print(out, ",{}", k < r.eigenvalues.size() ? number(r.eigenvalues(k)) : "nan");
    }
    fmt::print(out, "\n");
  }
}

SuiteResult run_suite(const ExperimentConfig &config)
{
  SuiteResult result = run_experiment(config);
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec)
  {
    throw std::runtime_error(fmt::format("cannot create output directory {}: {}",
                                         config.output_dir.string(), ec.message()));
  }

  std::ostringstream csv;
  write_diagnostics_csv(result.levels, config.num_eigenvalues, csv);
  write_file(config.output_dir / "diagnostics.csv", csv.str());

  const Verdicts &v = result.verdicts;
  json timings = json::array();
  for (const LevelResult &lr : result.levels)
  {
    timings.push_back({{"n", lr.row.level}, {"seconds", lr.seconds}});
  }
  json verdicts = {
      {"verdicts",
       {{"ADK", verdict_json(v.adk)},
        {"DF", verdict_json(v.df)},
        {"VG", verdict_json(v.vg)},
        {"ODF", verdict_json(v.odf)},
        {"NC", verdict_json(v.nc)}}},
      {"consistency", {{"consistent", v.consistent()}, {"violations", v.violations}}},
      {"config", config_json(config)},
      {"tolerances",
       {{"kernel", config.tol.kernel},
        {"consistency", config.tol.consistency},
        {"compatible", config.tol.compatible}}},
      {"rules",
       {{"window_levels", config.rules.window_steps + 1},
        {"growth_limit", config.rules.growth_limit},
        {"gap_threshold", config.rules.gap_threshold},
        {"decay_factor", config.rules.decay_factor},
        {"zero_floor", config.rules.zero_floor}}},
      {"wall_times",
       {{"setup_seconds", result.setup_seconds},
        {"levels", timings},
        {"total_seconds", result.total_seconds}}}};
  write_file(config.output_dir / "verdicts.json", verdicts.dump(2) + "\n");
  write_file(config.output_dir / "inequality-audit.json",
             audit_json(result.levels).dump(2) + "\n");
  return result;
}

}  // namespace gapcheck::report
