#include "hmpc/report_io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace hmpc {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Shortest representation that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ordered_json hour_major(const MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index t = 0; t < m.cols(); ++t) {
    std::vector<int> row(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index j = 0; j < m.rows(); ++j) row[static_cast<std::size_t>(j)] = m(j, t) > 0.5;
    rows.push_back(row);
  }
  return rows;
}

ordered_json dense(const MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// PM slots as 1-based (machine, hour) pairs.
ordered_json pm_slots(const MatrixXd& plan) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index t = 0; t < plan.cols(); ++t) {
    for (Eigen::Index j = 0; j < plan.rows(); ++j) {
      if (plan(j, t) > 0.5) out.push_back({{"machine", j + 1}, {"hour", t}});
    }
  }
  return out;
}

ordered_json trace_json(const GbdTrace& trace) {
  ordered_json j;
  j["stop"] = to_string(trace.stop);
  j["iterations"] = ordered_json::array();
  for (const GbdIteration& it : trace.iterations) {
    ordered_json rec;
    rec["iteration"] = it.iteration;
    rec["lower_bound"] = it.lower_bound;
    rec["upper_bound"] = it.upper_bound;
    rec["theta"] = it.theta;
    rec["subproblem_value"] = it.subproblem_value;
    rec["master_nodes"] = it.master_nodes;
    rec["pm"] = pm_slots(it.plan);
    j["iterations"].push_back(rec);
  }
  j["cuts"] = ordered_json::array();
  for (const Cut& cut : trace.cuts) {
    ordered_json c;
    c["anchor_value"] = cut.anchor_value;
    c["anchor_pm"] = pm_slots(cut.anchor_plan);
    c["slope"] = dense(cut.slope);
    j["cuts"].push_back(c);
  }
  return j;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void header(std::ostream& out, const std::string& prefix, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) out << ',' << prefix << (i + 1);
}

void values(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << num(v[i]);
}

double required_number(const json& j, const char* key, const std::string& source) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw std::runtime_error(source + ": field '" + key + "' missing or not a number");
  }
  return j.at(key).get<double>();
}

}  // namespace

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

std::string kpi_to_json(const KpiReport& k, const std::string& scenario,
                        const std::string& controller) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["scenario"] = scenario;
  j["controller"] = controller;
  j["hours"] = k.hours;
  j["energy_cost"] = k.energy_cost;
  j["pm_cost"] = k.pm_cost;
  j["total_cost"] = k.total_cost;
  j["units_delivered"] = k.units_delivered;
  j["cost_per_unit"] = k.cost_per_unit ? json(*k.cost_per_unit) : json(nullptr);
  j["avg_health"] = k.avg_health;
  j["pm_hours"] = k.pm_hours;
  return j.dump(2) + "\n";
}

KpiFile parse_kpi_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(source + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error(source + ": expected a JSON object");
  if (!j.contains("schema_version") || j["schema_version"] != kReportSchemaVersion) {
    throw std::runtime_error(source + ": unsupported or missing schema_version");
  }
  KpiFile f;
  f.scenario = j.value("scenario", "");
  f.controller = j.value("controller", "");
  if (!j.contains("hours") || !j["hours"].is_number_integer()) {
    throw std::runtime_error(source + ": field 'hours' missing or not an integer");
  }
  f.kpis.hours = j["hours"].get<int>();
  f.kpis.energy_cost = required_number(j, "energy_cost", source);
  f.kpis.pm_cost = required_number(j, "pm_cost", source);
  f.kpis.total_cost = required_number(j, "total_cost", source);
  f.kpis.units_delivered = required_number(j, "units_delivered", source);
  if (j.contains("cost_per_unit") && !j["cost_per_unit"].is_null()) {
    f.kpis.cost_per_unit = required_number(j, "cost_per_unit", source);
  }
  f.kpis.avg_health = required_number(j, "avg_health", source);
  f.kpis.pm_hours = required_number(j, "pm_hours", source);
  return f;
}

KpiFile load_kpi_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open KPI file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_kpi_json(buffer.str(), path.string());
}

std::string plan_to_json(const PmPlanResult& result, const std::string& scenario, int day) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["scenario"] = scenario;
  j["day"] = day;
  j["machines"] = result.plan.rows();
  j["hours"] = result.plan.cols();
  j["objective"] = result.objective;
  j["subproblem_value"] = result.subproblem_value;
  j["converged"] = result.trace.converged();
  j["pm"] = pm_slots(result.plan);
  j["plan"] = hour_major(result.plan);
  j["trace"] = trace_json(result.trace);
  return j.dump(2) + "\n";
}

std::string trace_to_json(const GbdTrace& trace) { return trace_json(trace).dump(2) + "\n"; }

std::string schedule_to_json(const ScheduleSolution& sol) {
  ordered_json j;
  j["status"] = qp::to_string(sol.status);
  j["objective"] = sol.objective;
  j["relaxed_energy_cost"] = sol.relaxed_energy_cost;
  j["iterations"] = sol.iterations;
  j["u"] = dense(sol.u);
  j["d"] = dense(sol.d);
  j["x"] = dense(sol.x);
  j["h"] = dense(sol.h);
  j["w"] = dense(sol.w);
  j["target_slack"] = dense(sol.xi);
  j["disposal"] = dense(sol.disposal);
  j["terminal_slack"] = to_std(sol.terminal_slack);
  j["pm"] = dense(sol.pm);
  j["capacity_duals"] = dense(sol.capacity_duals);
  j["health_duals"] = dense(sol.health_duals);
  return j.dump(2) + "\n";
}

std::vector<std::string> write_sim_bundle(const SimResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const int K = r.hours();
  const Eigen::Index nx = r.x.rows();
  const Eigen::Index nu = r.h.rows();
  const Eigen::Index np = r.d.rows();
  std::vector<std::string> files;

  {
    auto out = open_out(dir / "states.csv");
    out << "hour";
    header(out, "x_", nx);
    header(out, "h_", nu);
    out << '\n';
    for (int k = 0; k <= K; ++k) {
      out << k;
      values(out, r.x.col(k));
      values(out, r.h.col(k));
      out << '\n';
    }
    files.push_back("states.csv");
  }
  {
    auto out = open_out(dir / "inputs.csv");
    out << "hour";
    header(out, "u_", nu);
    header(out, "d_", np);
    header(out, "m_", nu);
    out << '\n';
    for (int k = 0; k < K; ++k) {
      out << k;
      values(out, r.u.col(k));
      values(out, r.d.col(k));
      values(out, r.m.col(k));
      out << '\n';
    }
    files.push_back("inputs.csv");
  }
  {
    const std::vector<double> intensity = system_intensity(r);
    auto out = open_out(dir / "energy.csv");
    out << "hour,price_est,price_act,energy_kwh,energy_cost,system_intensity,mccormick_gap\n";
    for (int k = 0; k < K; ++k) {
      const auto i = static_cast<std::size_t>(k);
      out << k << ',' << num(r.price_est[i]) << ',' << num(r.price_act[i]) << ','
          << num(r.energy[i]) << ',' << num(energy_cost(r.price_act[i], r.energy[i])) << ','
          << num(intensity[i]) << ',' << num(r.mccormick_gap[i]) << '\n';
    }
    files.push_back("energy.csv");
  }
  {
    auto out = open_out(dir / "days.csv");
    out << "day,pm_hours";
    header(out, "shipped_", np);
    header(out, "shortfall_", np);
    out << ",planned_objective";
    header(out, "planned_end_health_", nu);
    out << ",gbd_iterations,gbd_stop\n";
    for (const DayRecord& d : r.days) {
      out << d.day << ',' << num(d.plan.sum());
      values(out, d.shipped);
      values(out, d.shortfall);
      out << ',' << num(d.planned_objective);
      values(out, d.planned_end_health);
      if (d.trace) {
        out << ',' << d.trace->iterations.size() << ',' << to_string(d.trace->stop);
      } else {
        out << ",0,fixed";
      }
      out << '\n';
    }
    files.push_back("days.csv");
  }
  {
    ordered_json plans = ordered_json::array();
    for (const DayRecord& d : r.days) {
      ordered_json day;
      day["day"] = d.day;
      day["pm"] = pm_slots(d.plan);
      day["plan"] = hour_major(d.plan);
      day["planned_objective"] = d.planned_objective;
      day["trace"] = d.trace ? trace_json(*d.trace) : ordered_json(nullptr);
      plans.push_back(day);
    }
    ordered_json j;
    j["schema_version"] = kReportSchemaVersion;
    j["scenario"] = r.scenario;
    j["controller"] = to_string(r.controller);
    j["days"] = plans;
    write_text_file(dir / "plans.json", j.dump(2) + "\n");
    files.push_back("plans.json");
  }
  write_text_file(dir / "kpi.json", kpi_to_json(compute_kpis(r), r.scenario, to_string(r.controller)));
  files.push_back("kpi.json");
  {
    auto out = open_out(dir / "timing.csv");
    out << "kind,index,seconds\n";
    for (std::size_t k = 0; k < r.solve_seconds.size(); ++k) {
      out << "lmpc," << k << ',' << num(r.solve_seconds[k]) << '\n';
    }
    for (const DayRecord& d : r.days) out << "plan," << d.day << ',' << num(d.planning_seconds) << '\n';
    files.push_back("timing.csv");
  }
  {
    ordered_json m;
    m["schema_version"] = kReportSchemaVersion;
    m["scenario"] = r.scenario;
    m["controller"] = to_string(r.controller);
    m["hours"] = K;
    m["files"] = files;
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
    files.push_back("manifest.json");
  }
  return files;
}

}  // namespace hmpc
