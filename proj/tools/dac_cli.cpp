// Command-line front end: scenario runs, gain design, rate verification,
// prefilter design and parameter sweeps. Exit codes: 0 = requested checks
// pass, 1 = a bound/rate check failed, 2 = configuration or runtime error.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "dacs/scenario.hpp"

namespace fs = std::filesystem;
using dacs::scenario::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

dacs::scenario::ScenarioConfig load_with_seed(const std::string& path,
                                              std::optional<std::uint64_t> seed) {
  json j = load_json(path);
  if (seed) j["seed"] = *seed;
  return dacs::scenario::parse_config(j, fs::path(path).parent_path().string());
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed, bool check_bounds) {
  auto cfg = load_with_seed(config_path, seed);
  auto artifacts = dacs::scenario::run(cfg, out_dir, check_bounds);
  std::cout << "trajectory: " << artifacts.trajectory_csv << "\n"
            << "metrics:    " << artifacts.metrics_json << "\n";
  if (!artifacts.events_json.empty())
    std::cout << "events:     " << artifacts.events_json << "\n";
  std::cout << "tail sup error:     " << artifacts.metrics.tail_sup_error << "\n"
            << "time avg abs error: " << artifacts.metrics.time_avg_abs_error << "\n";
  for (const auto& b : artifacts.metrics.bounds)
    std::cout << b.name << ": measured " << b.measured << " vs bound " << b.bound
              << (b.satisfied ? "  [ok]" : "  [VIOLATED]") << "\n";
  return artifacts.bounds_ok ? 0 : 1;
}

int cmd_verify_rates(const std::string& graph_path, int random_count,
                     std::uint64_t seed, const std::string& out_dir) {
  std::vector<dacs::WeightedDigraph> graphs;
  if (!graph_path.empty())
    graphs.push_back(dacs::scenario::graph_from_json(load_json(graph_path)));
  else
    graphs.push_back(dacs::scenario::example_graph_b());
  if (random_count > 0) {
    auto extra = dacs::scenario::random_connected_graphs(random_count, 4, 12, seed);
    graphs.insert(graphs.end(), extra.begin(), extra.end());
  }
  auto report = dacs::scenario::verify_rates(graphs, out_dir);
  for (const auto& row : report.rows)
    std::cout << row.variant << ": rho " << row.rho_formula << " radius "
              << row.radius << (row.pass ? "  [ok]" : "  [FAIL]") << "\n";
  std::cout << "rate curves: " << report.sweep_csv << "\n";
  return report.all_pass ? 0 : 1;
}

int cmd_design_gains(const std::string& graph_path, const std::string& out_dir) {
  auto g = graph_path.empty()
               ? dacs::scenario::example_graph_b()
               : dacs::scenario::graph_from_json(load_json(graph_path));
  auto sp = dacs::spectrum(g);
  json rows = json::array();
  const std::pair<dacs::dt::RateVariant, std::string> variants[] = {
      {dacs::dt::RateVariant::P, "p"},
      {dacs::dt::RateVariant::AccelP, "accel_p"},
      {dacs::dt::RateVariant::PI, "pi"},
      {dacs::dt::RateVariant::AccelPI, "accel_pi"},
  };
  for (const auto& [variant, name] : variants) {
    auto gains = dacs::dt::optimal_params(variant, sp.lambda2, sp.lambdaN);
    json row{{"variant", name},
             {"lambda2", sp.lambda2},
             {"lambdaN", sp.lambdaN},
             {"rho", gains.rho},
             {"kI", gains.kI}};
    if (gains.kp) row["kp"] = *gains.kp;
    rows.push_back(std::move(row));
  }
  fs::create_directories(out_dir);
  const auto path = (fs::path(out_dir) / "gains.json").string();
  dacs::write_text_atomic(path, rows.dump(2) + "\n");
  std::cout << rows.dump(2) << "\ngain report: " << path << "\n";
  return 0;
}

int cmd_design_prefilter(int m, double theta_c, int q, const std::string& out_dir) {
  auto f = dacs::dt::design_prefilter(m, theta_c, q);
  double worst = 0.0;
  for (int j = 0; j <= 400; ++j)
    worst = std::max(worst, std::abs(f.response(theta_c * j / 400.0) - 1.0));
  json j{{"m", m},
         {"theta_c", theta_c},
         {"q", q},
         {"num", f.num},
         {"den", f.den},
         {"max_passband_deviation", worst}};
  fs::create_directories(out_dir);
  const auto path = (fs::path(out_dir) / "prefilter.json").string();
  dacs::write_text_atomic(path, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\nprefilter report: " << path << "\n";
  return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path,
                const std::string& metric, const std::string& out_dir,
                std::optional<std::uint64_t> seed) {
  auto a = load_with_seed(a_path, seed);
  auto b = load_with_seed(b_path, seed);
  auto report = dacs::scenario::compare(a, b, metric, out_dir);
  std::cout << report.metric << ": a = " << report.value_a
            << ", b = " << report.value_b << ", winner = " << report.winner << "\n";
  return 0;
}

json* navigate(json& root, const std::string& dotted) {
  json* node = &root;
  size_t pos = 0;
  while (true) {
    size_t dot = dotted.find('.', pos);
    std::string key = dotted.substr(pos, dot - pos);
    if (!node->contains(key)) return nullptr;
    node = &(*node)[key];
    if (dot == std::string::npos) return node;
    pos = dot + 1;
  }
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::vector<double>& values, const std::string& out_dir,
              std::optional<std::uint64_t> seed, int jobs) {
  json base = load_json(config_path);
  if (seed) base["seed"] = *seed;
  const std::string base_dir = fs::path(config_path).parent_path().string();

  // Each grid point is an isolated run writing its own artifact directory.
  std::vector<json> summaries(values.size());
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= static_cast<int>(values.size()) || failed) return;
      try {
        json point = base;
        json* slot = navigate(point, param);
        if (!slot) throw std::runtime_error("sweep parameter '" + param + "' not found");
        *slot = values[i];
        auto cfg = dacs::scenario::parse_config(point, base_dir);
        auto artifacts = dacs::scenario::run(
            cfg, (fs::path(out_dir) / ("point_" + std::to_string(i))).string());
        summaries[i] = json{{"value", values[i]},
                            {"tail_sup_error", artifacts.metrics.tail_sup_error},
                            {"time_avg_abs_error", artifacts.metrics.time_avg_abs_error}};
      } catch (const std::exception& e) {
        std::scoped_lock lock(error_mutex);
        failed = true;
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed) throw std::runtime_error(first_error);

  json summary{{"param", param}, {"points", summaries}};
  fs::create_directories(out_dir);
  const auto path = (fs::path(out_dir) / "sweep.json").string();
  dacs::write_text_atomic(path, summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\nsweep report: " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic average consensus simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", graph_path, metric = "time_avg_abs_error";
  std::string config_b, param;
  std::optional<std::uint64_t> seed;
  bool check_bounds = false;
  int random_count = 0, m = 1, q = 3, jobs = 1;
  double theta_c = 0.3;
  std::uint64_t suite_seed = 42;
  std::vector<double> values;

  auto* run = app.add_subcommand("run", "execute a scenario config");
  run->add_option("--config", config_path)->required();
  run->add_option("--out-dir", out_dir);
  run->add_option("--seed", seed);
  run->add_flag("--check-bounds", check_bounds);

  auto* verify = app.add_subcommand("verify-rates", "check closed-form gains against closed-loop spectra");
  verify->add_option("--graph", graph_path);
  verify->add_option("--random", random_count);
  verify->add_option("--suite-seed", suite_seed);
  verify->add_option("--out-dir", out_dir);

  auto* gains = app.add_subcommand("design-gains", "optimal gains for a graph");
  gains->add_option("--graph", graph_path);
  gains->add_option("--out-dir", out_dir);

  auto* prefilter = app.add_subcommand("design-prefilter", "bandlimited prefilter");
  prefilter->add_option("--m", m);
  prefilter->add_option("--theta-c", theta_c);
  prefilter->add_option("--q", q);
  prefilter->add_option("--out-dir", out_dir);

  auto* cmp = app.add_subcommand("compare", "run two configs and rank a metric");
  cmp->add_option("--config-a", config_path)->required();
  cmp->add_option("--config-b", config_b)->required();
  cmp->add_option("--metric", metric);
  cmp->add_option("--out-dir", out_dir);
  cmp->add_option("--seed", seed);

  auto* sweep = app.add_subcommand("sweep", "grid over one config parameter");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--param", param)->required();
  sweep->add_option("--values", values)->required()->delimiter(',');
  sweep->add_option("--out-dir", out_dir);
  sweep->add_option("--seed", seed);
  sweep->add_option("--jobs", jobs);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed, check_bounds);
    if (verify->parsed())
      return cmd_verify_rates(graph_path, random_count, suite_seed, out_dir);
    if (gains->parsed()) return cmd_design_gains(graph_path, out_dir);
    if (prefilter->parsed()) return cmd_design_prefilter(m, theta_c, q, out_dir);
    if (cmp->parsed()) return cmd_compare(config_path, config_b, metric, out_dir, seed);
    if (sweep->parsed())
      return cmd_sweep(config_path, param, values, out_dir, seed, jobs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
