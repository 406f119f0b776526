// hmpc: plan, simulate, compare and synth-prices commands.
//
// Exit codes: 0 success, 1 invalid input or failure, 2 a GBD run stopped
// without closing its gap (the incumbent is still written).

#include "hmpc/report_io.hpp"
#include "hmpc/scenario.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace {

using namespace hmpc;

struct PriceOverrides {
  std::string csv;
  std::string unit = "mwh";
  std::optional<std::uint64_t> seed;
};

PriceUnit parse_unit(const std::string& text) {
  if (text == "kwh") return PriceUnit::per_kWh;
  if (text == "mwh") return PriceUnit::per_MWh;
  throw std::invalid_argument("price unit must be 'kwh' or 'mwh'");
}

// Scenario plus the directory its relative paths resolve against.
struct LoadedScenario {
  ScenarioConfig config;
  std::filesystem::path base_dir;
};

LoadedScenario load(const std::string& path, const PriceOverrides& ov) {
  LoadedScenario s{load_scenario(path), std::filesystem::path(path).parent_path()};
  if (!ov.csv.empty()) {
    s.config.prices.source = PriceSpec::Source::csv;
    s.config.prices.csv_path = std::filesystem::absolute(ov.csv).string();
    s.config.prices.csv_unit = parse_unit(ov.unit);
  }
  if (ov.seed) {
    s.config.prices.profile.noise_seed = *ov.seed;
    s.config.prices.deviation_seed = *ov.seed;
  }
  return s;
}

int cmd_plan(const std::string& scenario_path, const std::string& out_path,
             const PriceOverrides& ov, std::optional<double> tolerance) {
  LoadedScenario s = load(scenario_path, ov);
  ScenarioConfig& sc = s.config;
  if (tolerance) sc.gbd.tolerance = *tolerance;
  sc.validate();
  const int T = sc.hours_per_day;
  const PricePair prices = materialize_prices(sc.prices, static_cast<std::size_t>(T), s.base_dir);
  LmpcConfig cfg = sc.lmpc;
  cfg.horizon = T;
  cfg.terminal_health_floor = sc.health_floor;
  cfg.previous_input = Eigen::VectorXd::Zero(sc.plant.n_machines());
  const PmPlanResult result = plan_pm(sc.initial, prices.estimate, sc.daily_target(T), cfg,
                                      sc.planning(), sc.gbd, sc.plant);
  write_text_file(out_path, plan_to_json(result, sc.name));
  std::cout << "plan: " << result.plan.sum() << " PM hours, objective " << result.objective
            << ", " << result.trace.iterations.size() << " GBD iterations ("
            << to_string(result.trace.stop) << ")\n";
  return result.trace.converged() ? 0 : 2;
}

int simulate_one(const LoadedScenario& s, const std::filesystem::path& out_dir,
                 std::ostream& log) {
  const ScenarioConfig& sc = s.config;
  sc.validate();
  const PricePair prices =
      materialize_prices(sc.prices, static_cast<std::size_t>(sc.total_hours()), s.base_dir);
  const SimResult result = run_closed_loop(sc, prices);
  write_sim_bundle(result, out_dir);
  const KpiReport k = compute_kpis(result);
  log << sc.name << " [" << to_string(sc.controller) << "]: total $" << k.total_cost
      << " (energy $" << k.energy_cost << ", PM $" << k.pm_cost << "), " << k.units_delivered
      << " units, avg health " << k.avg_health << " -> " << out_dir.string() << '\n';
  for (const DayRecord& d : result.days) {
    if (d.trace && !d.trace->converged()) return 2;
  }
  return 0;
}

int cmd_simulate(const std::vector<std::string>& scenarios, const std::string& controller,
                 const std::string& out, const PriceOverrides& ov, int jobs) {
  std::vector<LoadedScenario> runs;
  for (const std::string& path : scenarios) {
    runs.push_back(load(path, ov));
    if (!controller.empty()) runs.back().config.controller = parse_controller(controller);
    runs.back().config.validate();
  }
  auto out_dir = [&](std::size_t i) {
    if (runs.size() == 1) return std::filesystem::path(out);
    return std::filesystem::path(out) / std::filesystem::path(scenarios[i]).stem();
  };
  if (runs.size() == 1) return simulate_one(runs[0], out_dir(0), std::cout);

  std::vector<int> codes(runs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      std::ostringstream log;
      try {
        codes[i] = simulate_one(runs[i], out_dir(i), log);
      } catch (const std::exception& e) {
        log << scenarios[i] << ": " << e.what() << '\n';
        codes[i] = 1;
      }
      std::lock_guard<std::mutex> lock(io);
      std::cout << log.str();
    }
  };
  std::vector<std::thread> pool;
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(runs.size())));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  int worst = 0;
  for (int c : codes) {
    if (c == 1) return 1;
    worst = std::max(worst, c);
  }
  return worst;
}

int cmd_compare(const std::string& a_path, const std::string& b_path) {
  const KpiFile a = load_kpi_json(a_path);
  const KpiFile b = load_kpi_json(b_path);
  const auto rows = compare_reports(a.kpis, b.kpis);
  const std::string la = a.controller.empty() ? "A" : a.controller;
  const std::string lb = b.controller.empty() ? "B" : b.controller;
  std::cout << format_comparison(rows, la, lb);
  return 0;
}

int cmd_synth(const std::string& scenario_path, const std::string& out, SynthProfile profile,
              bool have_hours, const PriceOverrides& ov) {
  if (!scenario_path.empty()) {
    const ScenarioConfig sc = load(scenario_path, ov).config;
    if (sc.prices.source != PriceSpec::Source::synthetic) {
      throw std::invalid_argument("scenario does not use synthetic prices");
    }
    const std::size_t hours = have_hours ? profile.hours : static_cast<std::size_t>(sc.total_hours());
    profile = sc.prices.profile;
    profile.hours = hours;
  } else if (ov.seed) {
    profile.noise_seed = *ov.seed;
  }
  if (profile.base > profile.peak) throw std::invalid_argument("need base <= peak");
  const PriceSeries series = synth_profile(profile, PriceKind::day_ahead);
  if (out.empty() || out == "-") {
    write_price_csv(series, std::cout);
  } else {
    write_price_csv(series, std::filesystem::path(out));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical PM planning and production scheduling"};
  app.require_subcommand(1);

  PriceOverrides ov;
  std::uint64_t seed = 0;
  auto add_price_flags = [&](CLI::App* cmd) {
    cmd->add_option("--prices-csv", ov.csv, "Actual prices as timestamp,price CSV");
    cmd->add_option("--price-unit", ov.unit, "Unit of the price CSV")
        ->check(CLI::IsMember({"kwh", "mwh"}));
    cmd->add_option("--seed", seed, "Replaces the scenario's price seeds");
  };

  std::vector<std::string> scenarios;
  std::string out;
  std::string controller;
  int jobs = 1;
  double tolerance = 0.0;

  auto* plan = app.add_subcommand("plan", "Plan the first day's PM with GBD");
  plan->add_option("--scenario", scenarios, "Scenario file")->required()->expected(1);
  plan->add_option("--out", out, "Plan JSON to write")->required();
  auto* tol_opt = plan->add_option("--tolerance", tolerance, "Relative GBD tolerance");
  add_price_flags(plan);

  auto* sim = app.add_subcommand("simulate", "Run the closed loop and write the CSV bundle");
  sim->add_option("--scenario", scenarios, "Scenario file (repeat for a sweep)")->required();
  sim->add_option("--controller", controller, "Overrides the scenario's controller")
      ->check(CLI::IsMember({"hierarchical", "baseline"}));
  sim->add_option("--out", out, "Output directory")->required();
  sim->add_option("--jobs", jobs, "Scenarios simulated in parallel")->check(CLI::PositiveNumber);
  add_price_flags(sim);

  std::vector<std::string> kpi_files;
  auto* cmp = app.add_subcommand("compare", "Compare two KPI files");
  cmp->add_option("kpi", kpi_files, "KPI JSON files A and B")->required()->expected(2);

  SynthProfile profile;
  std::vector<int> peak_hours{17, 18, 19};
  auto* synth = app.add_subcommand("synth-prices", "Write a synthetic price CSV ($/kWh)");
  synth->add_option("--scenario", scenarios, "Take the profile from a scenario")->expected(1);
  auto* hours_opt = synth->add_option("--hours", profile.hours, "Length in hours");
  synth->add_option("--base", profile.base, "Off-peak price ($/kWh)");
  synth->add_option("--peak", profile.peak, "Peak price ($/kWh)");
  synth->add_option("--peak-hours", peak_hours, "Peak hours of the day")->delimiter(',');
  synth->add_option("--noise", profile.noise_amplitude, "Noise as a fraction of base")
      ->check(CLI::Range(0.0, 0.1));
  synth->add_option("--seed", seed, "Noise seed");
  synth->add_option("--out", out, "CSV path, '-' for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*plan || *sim) {
      if (plan->count("--seed") || sim->count("--seed")) ov.seed = seed;
    }
    if (*plan) {
      std::optional<double> tol;
      if (tol_opt->count()) tol = tolerance;
      return cmd_plan(scenarios.front(), out, ov, tol);
    }
    if (*sim) return cmd_simulate(scenarios, controller, out, ov, jobs);
    if (*cmp) return cmd_compare(kpi_files[0], kpi_files[1]);
    if (*synth) {
      profile.peak_hours = std::set<int>(peak_hours.begin(), peak_hours.end());
      for (int h : profile.peak_hours) {
        if (h < 0 || h > 23) throw std::invalid_argument("peak hours must lie in 0..23");
      }
      if (synth->count("--seed")) ov.seed = seed;
      return cmd_synth(scenarios.empty() ? std::string() : scenarios.front(), out, profile,
                       hours_opt->count() > 0, ov);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
