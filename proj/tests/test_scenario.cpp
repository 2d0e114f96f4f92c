#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dacs/scenario.hpp"

using namespace dacs;
using namespace dacs::scenario;

namespace {

const std::string kGolden = DACS_GOLDEN_DIR;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string tmp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("dacs_test_" + tag);
  std::filesystem::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("graph json round-trips") {
  auto g = example_graph_a();
  auto back = graph_from_json(graph_to_json(g));
  CHECK((back.weights() - g.weights()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("config parsing is fail-closed") {
  json good = {
      {"schema_version", 1},
      {"graph", graph_to_json(example_graph_b())},
      {"signals", json::array({{{"kind", "constant"}, {"value", 1.0}},
                               {{"kind", "constant"}, {"value", 2.0}},
                               {{"kind", "constant"}, {"value", 3.0}},
                               {{"kind", "constant"}, {"value", 4.0}}})},
      {"algorithm", {{"type", "ct"}, {"variant", "basic_dac"}}},
      {"horizon", 1.0},
      {"dt", 0.01},
  };
  CHECK_NOTHROW(parse_config(good));

  json typo = good;
  typo["algorithm"]["beta"] = 2.0;  // basic_dac takes no gains
  CHECK_THROWS_WITH_AS(parse_config(typo), doctest::Contains("unknown field"),
                       std::runtime_error);

  json top_typo = good;
  top_typo["horizn"] = 1.0;
  CHECK_THROWS_WITH_AS(parse_config(top_typo), doctest::Contains("unknown field"),
                       std::runtime_error);

  json bad_version = good;
  bad_version["schema_version"] = 2;
  CHECK_THROWS(parse_config(bad_version));

  json bad_bundle = good;
  bad_bundle["signals"].erase(3);
  CHECK_THROWS(parse_config(bad_bundle));
}

TEST_CASE("canonical config form round-trips") {
  for (const auto& name :
       {"dynamic_3comm.json", "bound_integrator.json", "et_five_agents.json",
        "poly_zm_m2.json", "departure_arrival.json"}) {
    json parsed = json::parse(slurp(kGolden + "/" + name));
    std::string once = parsed.dump(2);
    std::string twice = json::parse(once).dump(2);
    CHECK(once == twice);
    // And the loaded config preserves the document it was built from.
    auto cfg = parse_config(parsed, kGolden);
    CHECK(cfg.raw.dump(2) == once);
  }
}

TEST_CASE("signal json round-trips through the parser") {
  json doc = {{"kind", "sum"},
              {"terms",
               json::array({{{"kind", "quadratic_drift"}, {"t_scale", 20.0}},
                            {{"kind", "sinusoid"}, {"amp", 0.5}, {"omega", 0.4},
                             {"phase", 1.0}, {"offset", 0.0}},
                            {{"kind", "zero_order_hold"},
                             {"inner", {{"kind", "arctan"}, {"scale", 0.5}}},
                             {"period", 2.0}}})}};
  auto sig = signal_from_json(doc, 7);
  auto back = signal_to_json(sig);
  auto again = signal_from_json(back, 7);
  for (double t : {0.0, 1.3, 8.7})
    CHECK(signals::evaluate(sig, t) == signals::evaluate(again, t));
}

TEST_CASE("same seed reruns are bit-identical") {
  auto cfg = load_config(kGolden + "/dynamic_3comm.json");
  auto a = run(cfg, tmp_dir("det_a"));
  auto b = run(cfg, tmp_dir("det_b"));
  CHECK(slurp(a.trajectory_csv) == slurp(b.trajectory_csv));
  CHECK(slurp(a.metrics_json) == slurp(b.metrics_json));
  CHECK(slurp(a.trajectory_csv).rfind("t,agent,x,u,u_avg,err\n", 0) == 0);

  auto et = load_config(kGolden + "/et_five_agents.json");
  auto ea = run(et, tmp_dir("det_ea"));
  auto eb = run(et, tmp_dir("det_eb"));
  CHECK(slurp(ea.trajectory_csv) == slurp(eb.trajectory_csv));
  CHECK(slurp(ea.events_json) == slurp(eb.events_json));
}

TEST_CASE("every golden scenario runs through the public entry point") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kGolden)) {
    if (entry.path().extension() != ".json") continue;
    auto cfg = load_config(entry.path().string());
    auto artifacts = run(cfg, tmp_dir("golden_" + entry.path().stem().string()));
    CHECK(std::filesystem::exists(artifacts.trajectory_csv));
    CHECK(std::filesystem::exists(artifacts.metrics_json));
    ++count;
  }
  CHECK(count == 26);
}

TEST_CASE("departure biases the integrator, the PI estimator recovers") {
  auto departure = run(load_config(kGolden + "/departure_arrival.json"),
                       tmp_dir("departure"));
  // After agent 3 leaves, sum p != 0 over the survivors: persistent offset.
  CHECK(departure.metrics.tail_sup_error > 0.05);

  // The PI estimator's tail after the same events matches its event-free
  // steady error: the arrival transient washes out.
  json base = json::parse(slurp(kGolden + "/departure_arrival_pi.json"));
  base.erase("events");
  auto clean = run(parse_config(base, kGolden), tmp_dir("departure_pi_base"));
  auto pi = run(load_config(kGolden + "/departure_arrival_pi.json"), tmp_dir("departure_pi"));
  CHECK(pi.metrics.tail_sup_error < 1.1 * clean.metrics.tail_sup_error + 1e-9);
  CHECK(pi.metrics.tail_sup_error < 0.5 * departure.metrics.tail_sup_error);
}

TEST_CASE("perturbation and switching runs recover the baseline error") {
  // Event-free reference: same estimator, same signals, fixed ring.
  json base = json::parse(slurp(kGolden + "/input_perturbation.json"));
  base.erase("events");
  auto clean = run(parse_config(base, kGolden), tmp_dir("events_base"));
  const double baseline = clean.metrics.tail_sup_error;
  CHECK(baseline > 0.0);

  auto perturb = run(load_config(kGolden + "/input_perturbation.json"), tmp_dir("perturb"));
  CHECK(perturb.metrics.tail_sup_error < 1.1 * baseline + 1e-9);

  auto switching =
      run(load_config(kGolden + "/switching_topology.json"), tmp_dir("switching"));
  CHECK(switching.metrics.tail_sup_error < 1.1 * baseline + 1e-9);
}

TEST_CASE("re-initialized static loses to the dynamic estimator") {
  for (const auto& tag : {std::string("3"), std::string("20")}) {
    auto report = compare(load_config(kGolden + "/static_reinit_" + tag + "comm.json"),
                          load_config(kGolden + "/dynamic_" + tag + "comm.json"),
                          "time_avg_abs_error", tmp_dir("cmp" + tag));
    CHECK(report.winner == "b");
  }
  auto tie = compare(load_config(kGolden + "/static_reinit_3comm.json"),
                     load_config(kGolden + "/static_reinit_3comm.json"),
                     "time_avg_abs_error", tmp_dir("cmp_tie"));
  CHECK(tie.winner == "tie");
}

TEST_CASE("rate verification report") {
  std::vector<WeightedDigraph> graphs = {example_graph_b()};
  auto report = verify_rates(graphs, tmp_dir("rates"));
  CHECK(report.all_pass);
  CHECK(report.rows.size() == 4);
  CHECK(std::filesystem::exists(report.sweep_csv));
  std::string csv = slurp(report.sweep_csv);
  CHECK(csv.rfind("lambda_r,p,accel_p,pi,accel_pi\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 201);
}

TEST_CASE("bound checking gates the run result") {
  auto cfg = load_config(kGolden + "/bound_integrator.json");
  auto artifacts = run(cfg, tmp_dir("bounds"), /*check_bounds=*/true);
  REQUIRE(artifacts.metrics.bounds.size() == 1);
  CHECK(artifacts.metrics.bounds[0].satisfied);
  CHECK(artifacts.bounds_ok);
}
