#pragma once

#include "hmpc/gbd.hpp"
#include "hmpc/simulator.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hmpc {

inline constexpr int kReportSchemaVersion = 1;

/// KPI summary as written by `simulate` and read back by `compare`.
struct KpiFile {
  std::string scenario;
  std::string controller;
  KpiReport kpis;
};

std::string kpi_to_json(const KpiReport& kpis, const std::string& scenario,
                        const std::string& controller);
/// Throws std::runtime_error naming the file and the offending field.
KpiFile parse_kpi_json(const std::string& text, const std::string& source = "<kpi>");
KpiFile load_kpi_json(const std::filesystem::path& path);

/// PM plan of one day with its GBD trace. The plan is written hour-major:
/// `plan[hour][machine]`.
/// Wall-clock fields are left out so the output is reproducible.
std::string plan_to_json(const PmPlanResult& result, const std::string& scenario, int day = 0);

std::string trace_to_json(const GbdTrace& trace);

/// Full subproblem solution, used for failure diagnostics.
std::string schedule_to_json(const ScheduleSolution& sol);

/// Writes the CSV bundle and JSON summaries of a closed-loop run into `dir`
/// (created if missing) and returns the file names written:
///   states.csv   hour, x_1..x_nx, h_1..h_nu            (K+1 rows)
///   inputs.csv   hour, u_*, d_*, m_*                    (K rows)
///   energy.csv   hour, price_est, price_act, energy_kwh, energy_cost,
///                system_intensity, mccormick_gap
///   days.csv     day, pm_hours, shipped_*, shortfall_*, planned_objective,
///                planned_end_health_*, gbd_iterations, gbd_stop
///   plans.json   committed plan and GBD trace per day
///   kpi.json     KpiReport
///   timing.csv   kind (lmpc|plan), index, seconds
///   manifest.json  schema version and the file list
/// Everything except timing.csv is a deterministic function of the inputs.
std::vector<std::string> write_sim_bundle(const SimResult& result,
                                          const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hmpc
