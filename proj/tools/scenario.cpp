#include "scenario.hpp"

#include "specflow/acceptance.hpp"
#include "specflow/doi.hpp"
#include "specflow/operator_io.hpp"
#include "specflow/paths.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

namespace specflow::cli {

using nlohmann::json;

namespace {

const std::vector<std::pair<std::string, ScenarioKind>> kKinds = {
    {"bounded_path", ScenarioKind::bounded_path}, {"unbounded_path", ScenarioKind::unbounded_path},
    {"loop_test", ScenarioKind::loop_test},       {"exactness_test", ScenarioKind::exactness_test},
    {"doi_check", ScenarioKind::doi_check},       {"retract_test", ScenarioKind::retract_test},
    {"selftest", ScenarioKind::selftest}};

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

double number(const json& j, const std::string& key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) config_error(where, "'" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) config_error(where, "'" + key + "' must be finite");
  return x;
}

int integer(const json& j, const std::string& key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) config_error(where, "'" + key + "' must be an integer");
  return v.get<int>();
}

std::uint64_t parse_seed(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  config_error(where, "'seed' must be a nonnegative integer");
}

std::vector<double> real_list(const json& v, const std::string& where, const std::string& key) {
  if (!v.is_array()) config_error(where, "'" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) config_error(where, "'" + key + "' must be a list of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

// Operator blocks: {"diagonal": [...]}, {"spectrum": [...]}, {"random": scale},
// {"real": [[...]], "imag": [[...]]} or {"file": "op.txt"}.
Matrix parse_block(const json& j, int dim, random::Engine& rng, const std::filesystem::path& base,
                   const std::string& where) {
  if (!j.is_object()) config_error(where, "operator must be an object");
  Matrix m;
  if (j.contains("diagonal")) {
    const auto d = real_list(j.at("diagonal"), where, "diagonal");
    m = Matrix::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = d[i];
  } else if (j.contains("spectrum")) {
    const auto d = real_list(j.at("spectrum"), where, "spectrum");
    m = random::with_spectrum(rng, Eigen::Map<const RealVector>(d.data(), static_cast<Eigen::Index>(d.size())));
  } else if (j.contains("random")) {
    m = random::hermitian(rng, dim, number(j, "random", 1.0, where));
  } else if (j.contains("real")) {
    const auto& re = j.at("real");
    if (!re.is_array()) config_error(where, "'real' must be a list of rows");
    const auto rows = static_cast<Eigen::Index>(re.size());
    m = Matrix::Zero(rows, rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto row = real_list(re[static_cast<std::size_t>(r)], where, "real");
      if (static_cast<Eigen::Index>(row.size()) != rows) config_error(where, "'real' must be square");
      for (Eigen::Index c = 0; c < rows; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    if (j.contains("imag")) {
      const auto& im = j.at("imag");
      if (!im.is_array() || static_cast<Eigen::Index>(im.size()) != rows) config_error(where, "'imag' shape mismatch");
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row = real_list(im[static_cast<std::size_t>(r)], where, "imag");
        if (static_cast<Eigen::Index>(row.size()) != rows) config_error(where, "'imag' shape mismatch");
        for (Eigen::Index c = 0; c < rows; ++c) m(r, c) += Complex(0.0, row[static_cast<std::size_t>(c)]);
      }
    }
  } else if (j.contains("file")) {
    if (!j.at("file").is_string()) config_error(where, "'file' must be a string");
    std::filesystem::path p = j.at("file").get<std::string>();
    if (p.is_relative()) p = base / p;
    try {
      m = read_operator(p).block();
    } catch (const Error& e) {
      config_error(where, e.what());
    }
  } else {
    config_error(where, "operator needs one of diagonal, spectrum, random, real, file");
  }
  if (m.rows() != dim) {
    config_error(where, "operator has size " + std::to_string(m.rows()) + ", expected dim " + std::to_string(dim));
  }
  if (!m.allFinite() || (m - m.adjoint()).cwiseAbs().maxCoeff() > kHermitianTolerance * (1.0 + m.cwiseAbs().maxCoeff())) {
    config_error(where, "operator is not Hermitian");
  }
  return m;
}

std::string path_type(const Scenario& s, const std::string& fallback) {
  if (!s.path_spec.contains("type")) return fallback;
  if (!s.path_spec.at("type").is_string()) config_error(s.id, "'path_spec.type' must be a string");
  return s.path_spec.at("type").get<std::string>();
}

TrigPathSpec trig_spec(const Scenario& s) {
  const auto& p = s.path_spec;
  TrigPathSpec t;
  t.seed = s.seed;
  t.n = s.dim;
  t.essential_points = s.essential_points;
  t.amplitude = number(p, "amplitude", t.amplitude, s.id);
  t.harmonics = integer(p, "harmonics", t.harmonics, s.id);
  t.margin = number(p, "margin", t.margin, s.id);
  t.base_radius = number(p, "base_radius", t.base_radius, s.id);
  t.base_gap = number(p, "base_gap", t.base_gap, s.id);
  t.drift = number(p, "drift", t.drift, s.id);
  return t;
}

// Builds the path a scenario describes. Operators are drawn from a generator
// seeded by the scenario seed, so the path is a function of the config.
OperatorPath build_path(const Scenario& s, PathKind kind) {
  random::Engine rng(s.seed);
  const auto& p = s.path_spec;
  const std::vector<double> ess = kind == PathKind::bounded ? s.essential_points : std::vector<double>{};
  const std::string type = path_type(s, kind == PathKind::bounded ? "trig" : "quadratic");
  const auto op = [&](const char* key) {
    if (!p.contains(key)) config_error(s.id, std::string("path_spec needs '") + key + "'");
    return parse_block(p.at(key), s.dim, rng, s.base_dir, s.id + ".path_spec." + key);
  };
  if (type == "line") {
    const Matrix a = op("F0");
    const Matrix b = op("F1");
    return make_line_path(FramedOperator(a, ess), FramedOperator(b, ess), kind);
  }
  if (type == "polynomial") {
    if (!p.contains("coefficients") || !p.at("coefficients").is_array() || p.at("coefficients").empty()) {
      config_error(s.id, "polynomial path needs a nonempty 'coefficients' list");
    }
    std::vector<Matrix> c;
    for (std::size_t k = 0; k < p.at("coefficients").size(); ++k) {
      c.push_back(parse_block(p.at("coefficients")[k], s.dim, rng, s.base_dir,
                              s.id + ".path_spec.coefficients[" + std::to_string(k) + "]"));
    }
    return make_polynomial_path(std::move(c), ess, kind);
  }
  if (type == "trig" && kind == PathKind::bounded) return make_trig_path(trig_spec(s));
  if (type == "quadratic" && kind == PathKind::unbounded_model) {
    QuadraticPathSpec q;
    q.seed = s.seed;
    q.n = s.dim;
    q.headroom = number(p, "headroom", q.headroom, s.id);
    q.spread = number(p, "spread", q.spread, s.id);
    q.curvature = number(p, "curvature", q.curvature, s.id);
    return make_quadratic_dpath(q);
  }
  config_error(s.id, "unsupported path_spec.type '" + type + "' for " + to_string(s.kind));
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

struct Checker {
  ScenarioResult& r;
  void require(bool ok, const std::string& invariant, const std::string& detail) {
    if (!ok) r.failures.push_back(invariant + " (" + detail + ")");
  }
};

SFOptions sf_options(const Scenario& s) {
  SFOptions o;
  o.grid = s.grid;
  return o;
}

void check_sf(const Scenario& s, const SFReport& rep, Checker& c) {
  const double defect_tol = s.tolerance("integer_defect", 1e-6);
  c.require(rep.integer_defect < defect_tol, "integer_defect",
            fmt(rep.integer_defect) + " >= " + fmt(defect_tol));
  c.require(rep.sf_partition == rep.sf_crossing, "partition_equals_crossing",
            std::to_string(rep.sf_partition) + " vs " + std::to_string(rep.sf_crossing));
  c.require(rep.rounded_total == rep.sf_partition, "integral_equals_partition",
            std::to_string(rep.rounded_total) + " vs " + std::to_string(rep.sf_partition));
}

void check_weight_independence(const Scenario& s, const std::vector<SFReport>& reps, ScenarioResult& r,
                               Checker& c) {
  if (reps.size() < 2) return;
  const double tol = s.tolerance("weight_independence", std::max(1e-8, 10.0 * s.quad_tol));
  double spread = 0.0;
  json totals = json::array();
  for (const auto& rep : reps) {
    spread = std::max(spread, std::abs(rep.total - reps.front().total));
    totals.push_back(rep.total);
  }
  r.details["weight_totals"] = totals;
  r.details["weight_spread"] = spread;
  c.require(spread <= tol, "weight_independence", fmt(spread) + " > " + fmt(tol));
}

void run_bounded(const Scenario& s, ScenarioResult& r, Checker& c) {
  const auto path = build_path(s, PathKind::bounded);
  std::vector<SFReport> reps;
  for (const auto& spec : s.weights) {
    reps.push_back(sf_integral_bounded(path, make_weight(spec), s.quad_tol, sf_options(s)));
    check_sf(s, reps.back(), c);
  }
  r.sf = reps.front();
  check_weight_independence(s, reps, r, c);
}

void run_unbounded(const Scenario& s, ScenarioResult& r, Checker& c) {
  const auto dpath = build_path(s, PathKind::unbounded_model);
  std::vector<SFReport> reps;
  for (const auto& spec : s.weights) {
    const auto w = make_weight(spec);
    if (w.compact()) {
      // Compact weights go through the bounded transform vartheta(D).
      reps.push_back(sf_integral_bounded(vartheta_path(dpath), w, s.quad_tol, sf_options(s)));
    } else {
      reps.push_back(sf_integral_unbounded(dpath, w, s.quad_tol, sf_options(s)));
    }
    check_sf(s, reps.back(), c);
  }
  r.sf = reps.front();
  check_weight_independence(s, reps, r, c);
}

void run_loop(const Scenario& s, ScenarioResult& r, Checker& c) {
  const std::string type = path_type(s, "trig");
  std::optional<OperatorPath> loop;
  if (type == "trig") {
    auto t = trig_spec(s);
    t.drift = 0.0;
    loop = make_trig_path(t);
  } else if (type == "rectangle") {
    random::Engine rng(s.seed);
    const FramedOperator f0(parse_block(s.path_spec.value("F0", json()), s.dim, rng, s.base_dir, s.id + ".F0"),
                            s.essential_points);
    const FramedOperator f1(parse_block(s.path_spec.value("F1", json()), s.dim, rng, s.base_dir, s.id + ".F1"),
                            s.essential_points);
    loop = make_phase_rectangle_loop(f0, f1, make_line_path(f0, f1));
  } else {
    config_error(s.id, "unsupported path_spec.type '" + type + "' for loop_test");
  }
  const auto w = make_weight(s.weights.front());
  const double value = loop_integral(*loop, w, s.quad_tol);
  const double length = arc_length(*loop);
  const double tol = s.tolerance("loop", 1e-8) * (1.0 + length);
  SFReport rep;
  rep.integral_value = value;
  rep.total = value;
  rep.rounded_total = std::lround(value);
  rep.integer_defect = std::abs(value - static_cast<double>(rep.rounded_total));
  rep.sf_partition = sf_partition(*loop, s.grid);
  rep.sf_crossing = sf_crossing(*loop, s.grid);
  r.sf = rep;
  r.details["arc_length"] = length;
  c.require(std::abs(value) < tol, "loop_vanishing", "|" + fmt(value) + "| >= " + fmt(tol));
  c.require(rep.sf_partition == 0, "loop_partition_zero", std::to_string(rep.sf_partition));
}

void run_exactness(const Scenario& s, ScenarioResult& r, Checker& c) {
  random::Engine rng(s.seed);
  const auto& p = s.path_spec;
  const auto endpoint = [&](const char* key) {
    const json spec = p.contains(key) ? p.at(key) : json{{"random", 0.9}};
    return FramedOperator(parse_block(spec, s.dim, rng, s.base_dir, s.id + "." + key), s.essential_points);
  };
  const FramedOperator f0 = endpoint("F0");
  const FramedOperator f1 = endpoint("F1");
  const double bend = number(p, "bend", 0.3, s.id);
  const Matrix k = p.contains("K") ? parse_block(p.at("K"), s.dim, rng, s.base_dir, s.id + ".K")
                                   : random::hermitian(rng, s.dim, 1.0);
  const Matrix kn = k / std::max(1e-300, operator_norm(k));
  const auto straight = make_line_path(f0, f1);
  const Matrix a = f0.block();
  const Matrix d = f1.block() - f0.block();
  const auto ess = s.essential_points;
  const OperatorPath bent(
      [=](double t) { return FramedOperator(a + t * d + (bend * std::sin(std::numbers::pi * t)) * kn, ess); },
      [=](double t, Side) { return Matrix(d + (bend * std::numbers::pi * std::cos(std::numbers::pi * t)) * kn); },
      {}, PathKind::bounded);
  const auto w = make_weight(s.weights.front());
  const auto r0 = sf_integral_bounded(straight, w, s.quad_tol, sf_options(s));
  const auto r1 = sf_integral_bounded(bent, w, s.quad_tol, sf_options(s));
  r.sf = r0;
  r.details["bent_total"] = r1.total;
  const double gap = std::abs(r0.total - r1.total);
  r.details["total_gap"] = gap;
  const double tol = s.tolerance("exactness", 1e-7);
  c.require(gap <= tol, "path_independence", fmt(gap) + " > " + fmt(tol));
  check_sf(s, r0, c);
  check_sf(s, r1, c);
}

void run_doi(const Scenario& s, ScenarioResult& r, Checker& c) {
  const auto& p = s.path_spec;
  std::string name = "tanh";
  if (p.contains("function")) {
    if (!p.at("function").is_string()) config_error(s.id, "'function' must be a string");
    name = p.at("function").get<std::string>();
  }
  const auto f = functions::by_name(name);
  const int pairs = integer(p, "pairs", 5, s.id);
  const double scale = number(p, "scale", 2.0, s.id);
  const double tol = s.tolerance("doi", 1e-10);
  random::Engine rng(s.seed);
  double worst = 0.0;
  json residuals = json::array();
  for (int i = 0; i < pairs; ++i) {
    const FramedOperator a(random::hermitian(rng, s.dim, scale));
    const FramedOperator b(random::hermitian(rng, s.dim, scale));
    const double res = perturbation_residual(f, a, b);
    const double bound = 1.0 + (eigensystem(a).compose(f.value) - eigensystem(b).compose(f.value)).norm();
    residuals.push_back(res);
    worst = std::max(worst, res / bound);
  }
  r.details["function"] = name;
  r.details["residuals"] = residuals;
  r.details["max_scaled_residual"] = worst;
  c.require(worst < tol, "perturbation_identity", fmt(worst) + " >= " + fmt(tol));
}

void run_retract(const Scenario& s, ScenarioResult& r, Checker& c) {
  random::Engine rng(s.seed);
  const json spec = s.path_spec.contains("F") ? s.path_spec.at("F") : json{{"random", 2.0}};
  const FramedOperator f(parse_block(spec, s.dim, rng, s.base_dir, s.id + ".F"), s.essential_points);
  const int samples = std::max(2, integer(s.path_spec, "samples", 64, s.id));
  const FramedOperator start = retract(f, 0.0);
  const FramedOperator end = retract(f, 1.0);
  const auto data = essential_data(end);
  c.require(start.block() == f.block(), "retract_starts_at_identity", "retract(F, 0) != F");
  c.require(data.in_f_pm1, "retract_lands_in_target",
            "op_norm " + fmt(op_norm(end)) + ", essential points " + std::to_string(end.essential_points().size()));
  // The retraction keeps the operator Fredholm throughout.
  double min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= samples; ++i) {
    const auto g = retract(f, static_cast<double>(i) / samples);
    min_gap = std::min(min_gap, essential_data(g).delta_f);
  }
  r.details["min_essential_gap"] = min_gap;
  r.details["final_op_norm"] = op_norm(end);
  c.require(min_gap > 0.0, "retract_stays_fredholm", fmt(min_gap));
  if (op_norm(f) <= 1.0 && essential_data(f).in_f_pm1) {
    c.require(end.block() == f.block(), "retract_fixes_target", "retract(F, 1) != F for F in target");
  }
}

void run_selftest(const Scenario& s, ScenarioResult& r, Checker& c) {
  std::string filter;
  if (s.path_spec.contains("filter")) {
    if (!s.path_spec.at("filter").is_string()) config_error(s.id, "'filter' must be a string");
    filter = s.path_spec.at("filter").get<std::string>();
  }
  const auto results = run_acceptance(filter, 1);
  json lines = json::array();
  for (const auto& cr : results) {
    lines.push_back({{"id", cr.id}, {"name", cr.name}, {"pass", cr.pass}, {"detail", cr.detail}});
    c.require(cr.pass, cr.id, cr.detail);
  }
  r.details["criteria"] = lines;
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  for (const auto& [name, k] : kKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

double Scenario::tolerance(const std::string& name, double fallback) const {
  const auto it = tolerances.find(name);
  return it == tolerances.end() ? fallback : it->second;
}

WeightSpec parse_weight(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ConfigError("weight_spec must be an object with a string 'kind'");
  }
  const std::string kind = j.at("kind").get<std::string>();
  const std::string where = "weight_spec(" + kind + ")";
  WeightSpec spec;
  if (kind == "bump") {
    spec = BumpSpec{number(j, "delta", 0.5, where), integer(j, "m", 2, where)};
  } else if (kind == "gaussian") {
    spec = GaussianSpec{number(j, "epsilon", 1.0, where)};
  } else if (kind == "resolvent") {
    ResolventSpec r{number(j, "p", 1.0, where), ResolventVariant::half_shift};
    const std::string variant = j.value("variant", std::string("half_shift"));
    if (variant == "classic") {
      r.variant = ResolventVariant::classic;
    } else if (variant != "half_shift") {
      config_error(where, "unknown variant '" + variant + "'");
    }
    spec = r;
  } else {
    config_error(where, "unknown weight kind");
  }
  try {
    (void)make_weight(spec);
  } catch (const InvalidSpec& e) {
    config_error(where, e.what());
  }
  return spec;
}

Config parse_config(const json& doc, std::optional<std::uint64_t> seed_override,
                    const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  if (!doc.contains("scenarios")) throw ConfigError("config: missing 'scenarios' list");
  const auto& list = doc.at("scenarios");
  if (!list.is_array()) throw ConfigError("config: 'scenarios' must be a list");

  const std::uint64_t default_seed = doc.contains("seed") ? parse_seed(doc.at("seed"), "config") : 0;
  const double default_tol = number(doc, "quad_tol", 1e-9, "config");
  const int default_grid = integer(doc, "grid", 64, "config");

  Config out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& j = list[i];
    const std::string where = "scenarios[" + std::to_string(i) + "]";
    if (!j.is_object()) config_error(where, "scenario must be an object");
    Scenario s;
    if (!j.contains("id") || !j.at("id").is_string() || j.at("id").get<std::string>().empty()) {
      config_error(where, "'id' must be a nonempty string");
    }
    s.id = j.at("id").get<std::string>();
    if (!ids.insert(s.id).second) config_error(where, "duplicate id '" + s.id + "'");
    if (!j.contains("kind") || !j.at("kind").is_string()) config_error(s.id, "missing 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    const auto it = std::find_if(kKinds.begin(), kKinds.end(), [&](const auto& e) { return e.first == kind; });
    if (it == kKinds.end()) config_error(s.id, "unknown kind '" + kind + "'");
    s.kind = it->second;
    s.seed = j.contains("seed") ? parse_seed(j.at("seed"), s.id) : default_seed;
    if (seed_override) s.seed = *seed_override;
    s.dim = integer(j, "dim", 1, s.id);
    if (s.dim < 1) config_error(s.id, "dim must be >= 1");
    if (j.contains("essential_points")) s.essential_points = real_list(j.at("essential_points"), s.id, "essential_points");
    if (j.contains("path_spec")) {
      if (!j.at("path_spec").is_object()) config_error(s.id, "'path_spec' must be an object");
      s.path_spec = j.at("path_spec");
    }
    s.quad_tol = number(j, "quad_tol", default_tol, s.id);
    if (!(s.quad_tol > 0.0)) config_error(s.id, "quad_tol must be > 0");
    s.grid = integer(j, "grid", default_grid, s.id);
    if (s.grid < 2) config_error(s.id, "grid must be >= 2");
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      if (!t.is_object()) config_error(s.id, "'tolerances' must be an object");
      for (const auto& [key, value] : t.items()) {
        if (!value.is_number() || !(value.get<double>() > 0.0)) config_error(s.id, "tolerance '" + key + "' must be > 0");
        s.tolerances[key] = value.get<double>();
      }
    }
    if (j.contains("weight_spec")) {
      const auto& w = j.at("weight_spec");
      try {
        if (w.is_array()) {
          for (const auto& x : w) s.weights.push_back(parse_weight(x));
        } else {
          s.weights.push_back(parse_weight(w));
        }
      } catch (const ConfigError& e) {
        config_error(s.id, e.what());
      }
    }
    const bool needs_weight = s.kind == ScenarioKind::bounded_path || s.kind == ScenarioKind::unbounded_path ||
                              s.kind == ScenarioKind::loop_test || s.kind == ScenarioKind::exactness_test;
    if (needs_weight && s.weights.empty()) {
      s.weights.push_back(s.kind == ScenarioKind::unbounded_path ? WeightSpec{GaussianSpec{1.0}}
                                                                 : WeightSpec{BumpSpec{0.5, 2}});
    }
    s.base_dir = base_dir;
    out.scenarios.push_back(std::move(s));
  }
  return out;
}

Config load_config(const std::filesystem::path& file, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config '" + file.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + file.string() + "': " + e.what());
  }
  return parse_config(doc, seed_override, file.parent_path());
}

ScenarioResult run_scenario(const Scenario& s) {
  ScenarioResult r;
  r.id = s.id;
  r.kind = s.kind;
  r.dim = s.dim;
  Checker c{r};
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (s.kind) {
      case ScenarioKind::bounded_path: run_bounded(s, r, c); break;
      case ScenarioKind::unbounded_path: run_unbounded(s, r, c); break;
      case ScenarioKind::loop_test: run_loop(s, r, c); break;
      case ScenarioKind::exactness_test: run_exactness(s, r, c); break;
      case ScenarioKind::doi_check: run_doi(s, r, c); break;
      case ScenarioKind::retract_test: run_retract(s, r, c); break;
      case ScenarioKind::selftest: run_selftest(s, r, c); break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidSpec& e) {
    throw ConfigError(s.id + ": " + e.what());
  } catch (const Error& e) {
    r.failures.push_back(std::string("library_error (") + e.what() + ")");
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (r.sf) r.sf->wall_time = r.wall_ms;
  r.pass = r.failures.empty();
  return r;
}

std::vector<ScenarioResult> run_all(const std::vector<Scenario>& scenarios, int threads) {
  std::vector<ScenarioResult> results(scenarios.size());
  std::vector<std::exception_ptr> errors(scenarios.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) {
      try {
        results[i] = run_scenario(scenarios[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, threads));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < std::min(n, scenarios.size()); ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

json to_json(const SFReport& r, bool with_timing) {
  json j = {{"sf_partition", r.sf_partition},
            {"sf_crossing", r.sf_crossing},
            {"integral_value", r.integral_value},
            {"boundary_term", r.boundary_term},
            {"total", r.total},
            {"rounded_total", r.rounded_total},
            {"integer_defect", r.integer_defect},
            {"quadrature_error_estimate", r.quadrature_error_estimate}};
  if (with_timing) j["wall_time"] = r.wall_time;
  return j;
}

json report_json(const ScenarioResult& r) {
  json j = {{"scenario_id", r.id},
            {"kind", to_string(r.kind)},
            {"dim", r.dim},
            {"pass", r.pass},
            {"failures", r.failures},
            {"details", r.details}};
  j["report"] = r.sf ? to_json(*r.sf, false) : json(nullptr);
  return j;
}

json timing_json(const ScenarioResult& r) { return {{"scenario_id", r.id}, {"wall_ms", r.wall_ms}}; }

std::string csv_header() {
  return "scenario_id,kind,dim,sf_partition,sf_crossing,integral,boundary,total,rounded,defect,quad_err,wall_ms\r\n";
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string csv_row(const ScenarioResult& r) {
  const auto real = [](double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  std::vector<std::string> f{csv_escape(r.id), to_string(r.kind), std::to_string(r.dim)};
  if (r.sf) {
    const auto& s = *r.sf;
    f.insert(f.end(), {std::to_string(s.sf_partition), std::to_string(s.sf_crossing), real(s.integral_value),
                       real(s.boundary_term), real(s.total), std::to_string(s.rounded_total),
                       real(s.integer_defect), real(s.quadrature_error_estimate)});
  } else {
    f.insert(f.end(), 8, "");
  }
  char ms[32];
  std::snprintf(ms, sizeof ms, "%.3f", r.wall_ms);
  f.push_back(ms);
  std::string line;
  for (std::size_t i = 0; i < f.size(); ++i) line += (i ? "," : "") + f[i];
  return line + "\r\n";
}

void write_atomic(const std::filesystem::path& file, const std::string& content) {
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, file);
}

void write_outputs(const std::filesystem::path& dir, const std::vector<ScenarioResult>& results,
                   const std::string& csv_name) {
  std::filesystem::create_directories(dir);
  std::string csv = csv_header();
  for (const auto& r : results) {
    std::string name = r.id;
    std::replace_if(name.begin(), name.end(), [](char ch) { return ch == '/' || ch == '\\'; }, '_');
    write_atomic(dir / (name + ".json"), report_json(r).dump(2) + "\n");
    write_atomic(dir / (name + ".timing.json"), timing_json(r).dump(2) + "\n");
    csv += csv_row(r);
  }
  write_atomic(dir / csv_name, csv);
}

std::vector<double> parse_range(const std::string& text) {
  const auto to_double = [&](const std::string& s) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(x)) throw ConfigError("bad number '" + s + "' in range '" + text + "'");
    return x;
  };
  std::vector<std::string> parts;
  const char sep = text.find(':') != std::string::npos ? ':' : ',';
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);) parts.push_back(item);
  if (sep == ':') {
    if (parts.size() != 3) throw ConfigError("range '" + text + "' must be a:b:n");
    const double a = to_double(parts[0]);
    const double b = to_double(parts[1]);
    const double nd = to_double(parts[2]);
    const int n = static_cast<int>(nd);
    if (n < 1 || n != nd) throw ConfigError("range '" + text + "': n must be a positive integer");
    if (n == 1) return {a};
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(i == n - 1 ? b : a + (b - a) * i / (n - 1));
    return out;
  }
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(to_double(p));
  if (out.empty()) throw ConfigError("empty range");
  return out;
}

void apply_parameter(json& doc, const std::string& path, double value) {
  std::vector<std::string> keys;
  std::stringstream ss(path);
  for (std::string k; std::getline(ss, k, '.');) {
    if (k.empty()) throw ConfigError("bad parameter path '" + path + "'");
    keys.push_back(k);
  }
  if (keys.empty()) throw ConfigError("empty parameter path");
  const bool integral = value == std::floor(value) && std::abs(value) < 1e15;
  // Broadcast paths skip scenarios that lack the parent object.
  const auto has_parent = [&](const json& root) {
    const json* node = &root;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      if (!node->is_object() || !node->contains(keys[i])) return false;
      node = &node->at(keys[i]);
    }
    return node->is_object();
  };
  const auto set = [&](json& root, std::size_t from) {
    json* node = &root;
    for (std::size_t i = from; i < keys.size(); ++i) {
      const auto& k = keys[i];
      if (node->is_array()) {
        std::size_t idx = 0;
        try {
          idx = std::stoul(k);
        } catch (const std::exception&) {
          throw ConfigError("parameter path '" + path + "': '" + k + "' is not an index");
        }
        if (idx >= node->size()) throw ConfigError("parameter path '" + path + "': index out of range");
        node = &(*node)[idx];
      } else {
        if (node->is_null()) *node = json::object();
        if (!node->is_object()) throw ConfigError("parameter path '" + path + "' crosses a non-object");
        node = &(*node)[k];
      }
    }
    // Keep integer-valued fields (m, harmonics, grid, ...) integral.
    if (integral && (node->is_number_integer() || node->is_null())) {
      *node = static_cast<std::int64_t>(value);
    } else {
      *node = value;
    }
  };
  if (!doc.contains("scenarios") || !doc.at("scenarios").is_array()) throw ConfigError("config: missing 'scenarios' list");
  if (keys.front() == "scenarios") {
    set(doc, 0);
  } else {
    int applied = 0;
    for (auto& s : doc.at("scenarios")) {
      if (!has_parent(s)) continue;
      set(s, 0);
      ++applied;
    }
    if (applied == 0) throw ConfigError("parameter path '" + path + "' matches no scenario");
  }
}

}  // namespace specflow::cli
