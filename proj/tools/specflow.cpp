#include "scenario.hpp"

#include "specflow/acceptance.hpp"
#include "specflow/weights.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

using namespace specflow;
using nlohmann::json;

namespace {

constexpr int kPass = 0;
constexpr int kViolation = 1;
constexpr int kConfig = 2;

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("SPECFLOW_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long long s = std::stoull(v, &used, 10);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::exception&) {
    throw cli::ConfigError(std::string("SPECFLOW_SEED must be a nonnegative integer, got '") + v + "'");
  }
}

int default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

int report(const std::vector<cli::ScenarioResult>& results) {
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.id << " [" << cli::to_string(r.kind) << "]";
    if (r.sf) std::cout << " total=" << r.sf->total << " rounded=" << r.sf->rounded_total;
    std::cout << "\n";
    for (const auto& f : r.failures) std::cout << "  violated: " << f << "\n";
    failed += r.pass ? 0 : 1;
  }
  std::cout << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " scenarios passed\n";
  return failed == 0 ? kPass : kViolation;
}

int cmd_run(const std::string& config, const std::string& out, int threads) {
  const auto cfg = cli::load_config(config, env_seed());
  if (cfg.scenarios.empty()) {
    std::cerr << "warning: scenario list is empty; nothing to check\n";
    cli::write_outputs(out, {});
    return kPass;
  }
  const auto results = cli::run_all(cfg.scenarios, threads);
  cli::write_outputs(out, results);
  return report(results);
}

std::string label(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

int cmd_sweep(const std::string& config, const std::vector<std::string>& params, const std::string& out,
              int threads) {
  std::ifstream in(config);
  if (!in) throw cli::ConfigError("cannot open config '" + config + "'");
  json base;
  try {
    base = json::parse(in);
  } catch (const json::parse_error& e) {
    throw cli::ConfigError("config '" + config + "': " + e.what());
  }
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  for (const auto& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw cli::ConfigError("--param must be <path>=<range>, got '" + p + "'");
    axes.emplace_back(p.substr(0, eq), cli::parse_range(p.substr(eq + 1)));
  }
  // Cartesian product of all axes, last axis fastest.
  std::vector<cli::Scenario> all;
  std::vector<std::size_t> idx(axes.size(), 0);
  const auto base_dir = std::filesystem::path(config).parent_path();
  while (true) {
    json doc = base;
    std::string suffix;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double v = axes[a].second[idx[a]];
      cli::apply_parameter(doc, axes[a].first, v);
      suffix += "@" + axes[a].first + "=" + label(v);
    }
    auto cfg = cli::parse_config(doc, env_seed(), base_dir);
    for (auto& s : cfg.scenarios) {
      s.id += suffix;
      all.push_back(std::move(s));
    }
    std::size_t a = axes.size();
    while (a > 0 && ++idx[a - 1] == axes[a - 1].second.size()) idx[--a] = 0;
    if (a == 0) break;
  }
  if (all.empty()) {
    std::cerr << "warning: scenario list is empty; nothing to check\n";
    cli::write_outputs(out, {}, "sweep.csv");
    return kPass;
  }
  const auto results = cli::run_all(all, threads);
  cli::write_outputs(out, results, "sweep.csv");
  return report(results);
}

int cmd_selftest(const std::string& filter, bool flip_boundary, int threads) {
  fault::set_boundary_sign_flip(flip_boundary);
  const auto results = run_acceptance(filter, threads);
  if (results.empty()) {
    std::cerr << "warning: no acceptance criteria selected";
    if (!filter.empty()) std::cerr << " by filter '" << filter << "'";
    std::cerr << "\n";
    std::cout << "0/0 criteria passed\n";
    return kPass;
  }
  std::size_t passed = 0;
  for (const auto& r : results) {
    std::cout << format_result(r) << "\n";
    passed += r.pass ? 1 : 0;
  }
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  return passed == results.size() ? kPass : kViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral flow estimators: scenario runner and self-test"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "specflow_out";
  int threads = default_threads();
  std::string filter;
  bool flip_boundary = false;
  std::vector<std::string> params;

  auto* run = app.add_subcommand("run", "Run every scenario of a JSON config");
  run->add_option("config", config, "Config file")->required();
  run->add_option("--out", out, "Output directory")->capture_default_str();
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  auto* self = app.add_subcommand("selftest", "Run the acceptance criteria");
  self->add_option("--filter", filter, "Run only criteria whose id or name contains this");
  self->add_flag("--flip-boundary-sign", flip_boundary, "Fault injection: negate the boundary term");
  self->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Run a config over a parameter grid");
  sweep->add_option("config", config, "Config file")->required();
  sweep->add_option("--param", params, "<path>=<a:b:n | v1,v2,...>, repeatable")->required();
  sweep->add_option("--out", out, "Output directory")->capture_default_str();
  sweep->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }

  try {
    if (*run) return cmd_run(config, out, threads);
    if (*sweep) return cmd_sweep(config, params, out, threads);
    return cmd_selftest(filter, flip_boundary, threads);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kViolation;
  }
}
