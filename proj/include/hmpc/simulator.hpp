#pragma once

#include "hmpc/gbd.hpp"
#include "hmpc/lmpc.hpp"
#include "hmpc/price.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmpc {

enum class Controller { hierarchical, baseline };
const char* to_string(Controller controller);
Controller parse_controller(const std::string& text);

enum class TargetShape { end_of_day, linear_ramp };
const char* to_string(TargetShape shape);
TargetShape parse_target_shape(const std::string& text);

struct PmSlot {
  int machine = 0;  // 0-based
  int hour = 9;     // hour of day
};

/// Where the price series come from. Synthetic day-ahead prices are drawn
/// from `profile`; the actual series is the forecast perturbed by
/// `actual_deviation`. A CSV source supplies the actual prices and the
/// forecast is derived from them the same way.
struct PriceSpec {
  enum class Source { synthetic, csv };
  Source source = Source::synthetic;
  SynthProfile profile;
  std::string csv_path;
  PriceUnit csv_unit = PriceUnit::per_MWh;
  double actual_deviation = 0.0;
  std::uint64_t deviation_seed = 1;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string description;
  PlantModel plant;
  int days = 1;
  int hours_per_day = 24;
  Eigen::VectorXd daily_demand;   // n_p
  int window_start = 9;           // PM allowed in [window_start, window_end)
  int window_end = 18;
  int crew_limit = 2;
  Eigen::VectorXd health_floor;   // n_u
  PlantState initial;
  PriceSpec prices;
  Controller controller = Controller::hierarchical;
  std::vector<PmSlot> baseline_pm;
  TargetShape target_shape = TargetShape::end_of_day;
  LmpcConfig lmpc;  // weights; horizon and previous input are set per solve
  double price_weight = 1.5;
  double cost_weight = 10.0;
  bool health_pruning = false;
  GbdConfig gbd;

  int total_hours() const { return days * hours_per_day; }
  PlanningConfig planning() const;
  /// Fixed daily plan used by the baseline controller.
  MatrixXd baseline_plan() const;
  ProductionTarget daily_target(int horizon) const;
  void validate() const;
};

struct PricePair {
  PriceSeries estimate;
  PriceSeries actual;
};

/// Builds both price series for `hours` hours; relative CSV paths resolve
/// against `base_dir`.
PricePair materialize_prices(const PriceSpec& spec, std::size_t hours,
                             const std::filesystem::path& base_dir = {});

struct DayRecord {
  int day = 0;
  MatrixXd plan;  // committed PM plan, n_u x hours_per_day
  std::optional<GbdTrace> trace;
  double planned_objective = 0.0;
  Eigen::VectorXd planned_end_health;  // from the planning subproblem
  Eigen::VectorXd shipped;             // n_p
  Eigen::VectorXd shortfall;           // max(0, demand - shipped)
  double planning_seconds = 0.0;
};

/// Hourly closed-loop record. Column k of the input matrices is the input
/// applied during hour k; state matrices have one extra column for the
/// final state.
struct SimResult {
  std::string scenario;
  Controller controller = Controller::hierarchical;
  int hours_per_day = 24;
  double step_hours = 1.0;
  double pm_cost_per_hour = 0.0;
  Eigen::VectorXd daily_demand;
  MatrixXd x;  // n_x x (K+1)
  MatrixXd h;  // n_u x (K+1)
  MatrixXd u;  // n_u x K
  MatrixXd d;  // n_p x K
  MatrixXd m;  // n_u x K
  std::vector<double> price_est;
  std::vector<double> price_act;
  std::vector<double> energy;     // kWh per hour, true intensity
  std::vector<double> solve_seconds;
  std::vector<double> mccormick_gap;
  std::vector<DayRecord> days;

  int hours() const { return static_cast<int>(u.cols()); }
};

struct KpiReport {
  int hours = 0;
  double energy_cost = 0.0;
  double pm_cost = 0.0;
  double total_cost = 0.0;
  double units_delivered = 0.0;
  std::optional<double> cost_per_unit;  // empty when nothing was delivered
  double avg_health = 0.0;  // mean over machines and hourly states
  double pm_hours = 0.0;
};

/// Raised when an hourly L-MPC solve fails; the message carries the hour,
/// the plant state and the solver status.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SimResult run_closed_loop(const ScenarioConfig& scenario, const PricePair& prices);
SimResult run_closed_loop(const ScenarioConfig& scenario);

KpiReport compute_kpis(const SimResult& result);

/// I_s(k) = dt * sum_j u_j(k).
std::vector<double> system_intensity(const SimResult& result);

struct MetricDiff {
  std::string metric;
  double a = 0.0;
  double b = 0.0;
  std::optional<double> percent;  // (b - a) / a * 100, empty when a == 0
};

/// Six rows in the order energy, PM, total, cost per unit, health, PM hours.
/// Throws std::invalid_argument when the reports cover different horizons.
std::vector<MetricDiff> compare_reports(const KpiReport& a, const KpiReport& b);

/// Fixed-width table with percentages to two decimals; "n/a" for undefined.
std::string format_comparison(const std::vector<MetricDiff>& rows, const std::string& a_label,
                              const std::string& b_label);

/// Largest deviation between the logged states and a replay of the logged
/// inputs through the plant model (0 when the log is consistent).
double replay_deviation(const SimResult& result, const PlantModel& model);

}  // namespace hmpc
