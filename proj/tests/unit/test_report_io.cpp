#include "doctest.h"

#include "hmpc/report_io.hpp"
#include "support/planning.hpp"
#include "support/scenarios.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace hmpc;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hmpc_report_io_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("KPI json round trip") {
  KpiReport k;
  k.hours = 120;
  k.energy_cost = 328.552;
  k.pm_cost = 1000;
  k.total_cost = 1328.552;
  k.units_delivered = 750;
  k.cost_per_unit = 1328.552 / 750;
  k.avg_health = 0.879;
  k.pm_hours = 10;
  const KpiFile back = parse_kpi_json(kpi_to_json(k, "battery_line", "baseline"));
  CHECK(back.scenario == "battery_line");
  CHECK(back.controller == "baseline");
  CHECK(back.kpis.hours == 120);
  CHECK(back.kpis.total_cost == k.total_cost);
  CHECK(*back.kpis.cost_per_unit == *k.cost_per_unit);
  CHECK(back.kpis.pm_hours == 10);

  KpiReport idle;
  const std::string text = kpi_to_json(idle, "s", "c");
  CHECK(text.find("\"cost_per_unit\": null") != std::string::npos);
  CHECK_FALSE(parse_kpi_json(text).kpis.cost_per_unit.has_value());
}

TEST_CASE("KPI json errors") {
  CHECK_THROWS_AS(parse_kpi_json("{"), std::runtime_error);
  CHECK_THROWS_AS(parse_kpi_json("{\"schema_version\": 9}"), std::runtime_error);
  CHECK_THROWS_AS(parse_kpi_json("{\"schema_version\": 1, \"hours\": 3}"), std::runtime_error);
  CHECK_THROWS_AS(load_kpi_json("/nonexistent/kpi.json"), std::runtime_error);
}

TEST_CASE("plan json is hour-major and carries the trace") {
  const auto c = testing::tiny_planning_case();
  const PmPlanResult r =
      plan_pm(c.state0, c.prices, c.target, c.lmpc, c.planning, GbdConfig{}, c.model);
  const auto j = nlohmann::json::parse(plan_to_json(r, "tiny"));
  CHECK(j["schema_version"] == 1);
  CHECK(j["hours"] == 4);
  CHECK(j["machines"] == 2);
  REQUIRE(j["plan"].size() == 4);
  CHECK(j["plan"][0].size() == 2);
  for (int t = 0; t < 4; ++t) {
    for (int m = 0; m < 2; ++m) CHECK(j["plan"][t][m] == static_cast<int>(r.plan(m, t)));
  }
  CHECK(j["trace"]["iterations"].size() == r.trace.iterations.size());
  CHECK(j["trace"]["cuts"].size() == r.trace.cuts.size());
  CHECK(j["converged"] == r.trace.converged());
  for (const auto& slot : j["pm"]) CHECK(slot["machine"].get<int>() >= 1);
  CHECK(plan_to_json(r, "tiny") == plan_to_json(r, "tiny"));
}

TEST_CASE("schedule dump has every trajectory") {
  const auto c = testing::tiny_planning_case();
  const ScheduleSolution sol =
      solve_lmpc(c.state0, MatrixXd::Zero(2, 4), c.prices.prices(), c.target, c.lmpc, c.model);
  const auto j = nlohmann::json::parse(schedule_to_json(sol));
  CHECK(j["status"] == "optimal");
  for (const char* key : {"u", "d", "x", "h", "w", "target_slack", "capacity_duals", "health_duals"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["x"][0].size() == 5);
}

TEST_CASE("simulation bundle") {
  const ScenarioConfig s = testing::tiny_scenario();
  const SimResult r = run_closed_loop(s);
  const auto dir = scratch("bundle");
  const auto files = write_sim_bundle(r, dir);
  for (const auto& f : files) CHECK(std::filesystem::exists(dir / f));

  const auto states = lines(read_file(dir / "states.csv"));
  CHECK(states.size() == 14);
  CHECK(states[0] == "hour,x_1,x_2,h_1,h_2");
  const auto inputs = lines(read_file(dir / "inputs.csv"));
  CHECK(inputs.size() == 13);
  CHECK(inputs[0] == "hour,u_1,u_2,d_1,m_1,m_2");
  const auto energy = lines(read_file(dir / "energy.csv"));
  CHECK(energy.size() == 13);
  CHECK(lines(read_file(dir / "days.csv")).size() == 3);

  // Values are written losslessly.
  std::istringstream row(states[5]);
  std::string cell;
  std::getline(row, cell, ',');
  std::getline(row, cell, ',');
  CHECK(std::stod(cell) == r.x(0, 4));

  const KpiFile k = load_kpi_json(dir / "kpi.json");
  CHECK(k.kpis.total_cost == compute_kpis(r).total_cost);
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  CHECK(manifest["hours"] == 12);
  CHECK(manifest["files"].size() == files.size() - 1);

  // Everything but the timing file is reproducible byte for byte.
  const auto again = scratch("bundle_again");
  write_sim_bundle(run_closed_loop(s), again);
  for (const auto& f : files) {
    if (f == "timing.csv") continue;
    CHECK_MESSAGE(read_file(dir / f) == read_file(again / f), f);
  }
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(again);
}
