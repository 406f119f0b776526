#include "hmpc/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace hmpc {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// --- locating a JSON pointer in the raw text -------------------------------

class Scanner {
 public:
  explicit Scanner(const std::string& text) : s_(text) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

  std::string read_string() {
    std::string out;
    ++pos_;  // opening quote
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
        out += s_[pos_ + 1];
        pos_ += 2;
      } else {
        out += s_[pos_++];
      }
    }
    ++pos_;
    return out;
  }

  void skip_value() {
    skip_ws();
    const char c = peek();
    if (c == '"') {
      read_string();
    } else if (c == '{' || c == '[') {
      int depth = 0;
      while (!at_end()) {
        const char d = peek();
        if (d == '"') {
          read_string();
          continue;
        }
        if (d == '{' || d == '[') ++depth;
        if (d == '}' || d == ']') {
          --depth;
          if (depth == 0) {
            ++pos_;
            return;
          }
        }
        ++pos_;
      }
    } else {
      while (!at_end() && peek() != ',' && peek() != '}' && peek() != ']') ++pos_;
    }
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_pointer(const std::string& pointer) {
  std::vector<std::string> parts;
  if (pointer.empty()) return parts;
  std::size_t start = 1;
  while (start <= pointer.size()) {
    const std::size_t end = pointer.find('/', start);
    std::string token = pointer.substr(start, end == std::string::npos ? std::string::npos : end - start);
    std::string decoded;
    for (std::size_t i = 0; i < token.size(); ++i) {
      if (token[i] == '~' && i + 1 < token.size()) {
        decoded += token[i + 1] == '1' ? '/' : '~';
        ++i;
      } else {
        decoded += token[i];
      }
    }
    parts.push_back(decoded);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return parts;
}

int line_of(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// --- strict reading ---------------------------------------------------------

struct Context {
  const std::string& text;
  const std::string& source;

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    int line = locate_json_pointer(text, path);
    // Missing keys point at their parent object.
    std::string parent = path;
    while (line == 0 && !parent.empty()) {
      parent = parent.substr(0, parent.rfind('/'));
      line = locate_json_pointer(text, parent);
    }
    throw ScenarioError(source, line, path.empty() ? "/" : path, message);
  }
};

// Reads the keys of one object and rejects any it did not consume.
class ObjectReader {
 public:
  ObjectReader(const Context& ctx, const json& j, std::string path)
      : ctx_(ctx), j_(j), path_(std::move(path)) {
    if (!j_.is_object()) ctx_.fail(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string child(const std::string& key) const { return path_ + "/" + key; }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) ctx_.fail(child(key), "missing required key '" + key + "'");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) ctx_.fail(child(key), "expected a number");
    return v.get<double>();
  }
  double number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : (seen_.insert(key), fallback);
  }

  long long integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) ctx_.fail(child(key), "expected an integer");
    return v.get<long long>();
  }
  long long integer_or(const std::string& key, long long fallback) {
    return has(key) ? integer(key) : (seen_.insert(key), fallback);
  }

  bool boolean_or(const std::string& key, bool fallback) {
    if (!has(key)) return seen_.insert(key), fallback;
    const json& v = at(key);
    if (!v.is_boolean()) ctx_.fail(child(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) ctx_.fail(child(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string_or(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : (seen_.insert(key), fallback);
  }

  Eigen::VectorXd vector(const std::string& key, Eigen::Index expected = -1) {
    const json& v = at(key);
    if (!v.is_array()) ctx_.fail(child(key), "expected an array of numbers");
    if (expected >= 0 && static_cast<Eigen::Index>(v.size()) != expected) {
      ctx_.fail(child(key), "expected " + std::to_string(expected) + " entries, found " +
                                std::to_string(v.size()));
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) ctx_.fail(child(key) + "/" + std::to_string(i), "expected a number");
      out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
  }

  Eigen::MatrixXd matrix(const std::string& key) {
    const json& v = at(key);
    if (!v.is_array() || v.empty()) ctx_.fail(child(key), "expected a nonempty array of rows");
    const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < v.size(); ++r) {
      const std::string row_path = child(key) + "/" + std::to_string(r);
      if (!v[r].is_array() || v[r].size() != cols) {
        ctx_.fail(row_path, "expected a row of " + std::to_string(cols) + " numbers");
      }
      for (std::size_t c = 0; c < cols; ++c) {
        if (!v[r][c].is_number()) ctx_.fail(row_path + "/" + std::to_string(c), "expected a number");
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r][c].get<double>();
      }
    }
    return out;
  }

  ObjectReader object(const std::string& key) { return ObjectReader(ctx_, at(key), child(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) ctx_.fail(child(it.key()), "unknown key '" + it.key() + "'");
    }
  }

 private:
  const Context& ctx_;
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::VectorXd row = m.row(r).transpose();
    rows.push_back(to_std(row));
  }
  return rows;
}

// Puts arrays of scalars on one line so matrices read row by row.
std::string compact_arrays(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out += c;
      if (c == '\\') {
        out += text[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
      continue;
    }
    if (c == '[') {
      const std::size_t close = text.find(']', i);
      const std::size_t nested = text.find_first_of("[{\"", i + 1);
      if (close != std::string::npos && (nested == std::string::npos || nested > close)) {
        out += '[';
        bool pending_space = false;
        for (std::size_t k = i + 1; k < close; ++k) {
          const char d = text[k];
          if (std::isspace(static_cast<unsigned char>(d))) continue;
          if (pending_space) out += ' ';
          out += d;
          pending_space = d == ',';
        }
        out += ']';
        i = close;
        continue;
      }
    }
    out += c;
  }
  return out;
}

const char* unit_name(PriceUnit unit) { return unit == PriceUnit::per_kWh ? "kwh" : "mwh"; }

const char* coupling_name(CapacityCoupling c) {
  return c == CapacityCoupling::split ? "split" : "combined";
}

PlantModel read_plant(ObjectReader& r) {
  const Eigen::MatrixXd inflow = r.matrix("inflow_matrix");
  const Eigen::MatrixXd demand = r.matrix("demand_matrix");
  const Eigen::Index nu = inflow.cols();
  const Eigen::Index nx = inflow.rows();
  PlantModel m;
  m.inflow_matrix = inflow;
  m.demand_matrix = demand;
  m.outflow_matrix = derive_outflow_matrix(inflow);
  m.degradation_rates = r.vector("degradation_rates", nu);
  m.restoration_rates = r.vector("restoration_rates", nu);
  m.capacity_loss_fraction = r.vector("capacity_loss_fraction", nu);
  m.as_new_capacity = r.vector("as_new_capacity", nu);
  m.as_new_energy_intensity = r.vector("as_new_energy_intensity", nu);
  m.energy_degradation_penalty = r.vector("energy_degradation_penalty", nu);
  m.buffer_min = r.vector("buffer_min", nx);
  m.buffer_max = r.vector("buffer_max", nx);
  m.pm_cost_per_hour = r.number("pm_cost_per_hour");
  m.step_hours = r.number("step_hours");
  r.finish();
  return m;
}

ScenarioConfig read_scenario(const Context& ctx, const json& doc) {
  ObjectReader top(ctx, doc, "");
  const long long version = top.integer("schema_version");
  if (version != kScenarioSchemaVersion) {
    ctx.fail("/schema_version", "unsupported schema version " + std::to_string(version) +
                                    " (expected " + std::to_string(kScenarioSchemaVersion) + ")");
  }
  ScenarioConfig s;
  s.name = top.string("name");
  s.description = top.string_or("description", "");

  {
    ObjectReader plant = top.object("plant");
    try {
      s.plant = read_plant(plant);
      s.plant.validate();
    } catch (const std::invalid_argument& e) {
      ctx.fail("/plant", e.what());
    }
  }
  const Eigen::Index nx = s.plant.n_buffers();
  const Eigen::Index nu = s.plant.n_machines();
  const Eigen::Index np = s.plant.n_products();
  if (s.plant.demand_matrix.rows() != nx) {
    ctx.fail("/plant/demand_matrix", "needs one row per buffer");
  }

  {
    ObjectReader h = top.object("horizon");
    s.days = static_cast<int>(h.integer("days"));
    s.hours_per_day = static_cast<int>(h.integer_or("hours_per_day", 24));
    if (s.days < 1) ctx.fail("/horizon/days", "days must be at least 1");
    if (s.hours_per_day < 1) ctx.fail("/horizon/hours_per_day", "hours_per_day must be at least 1");
    h.finish();
  }
  {
    ObjectReader d = top.object("demand");
    s.daily_demand = d.vector("daily", np);
    if ((s.daily_demand.array() < 0.0).any()) ctx.fail("/demand/daily", "demand must be nonnegative");
    const std::string shape = d.string_or("target_shape", "end_of_day");
    try {
      s.target_shape = parse_target_shape(shape);
    } catch (const std::invalid_argument& e) {
      ctx.fail("/demand/target_shape", e.what());
    }
    d.finish();
  }
  {
    ObjectReader m = top.object("maintenance");
    s.window_start = static_cast<int>(m.integer("window_start"));
    s.window_end = static_cast<int>(m.integer("window_end"));
    s.crew_limit = static_cast<int>(m.integer("crew_limit"));
    s.health_floor = m.vector("health_floor", nu);
    s.health_pruning = m.boolean_or("health_pruning", false);
    const json& base = m.at("baseline");
    const std::string base_path = m.child("baseline");
    if (!base.is_array()) ctx.fail(base_path, "expected an array of {machine, hour} entries");
    for (std::size_t i = 0; i < base.size(); ++i) {
      const std::string item = base_path + "/" + std::to_string(i);
      ObjectReader e(ctx, base[i], item);
      PmSlot slot;
      const long long machine = e.integer("machine");
      if (machine < 1 || machine > nu) {
        ctx.fail(item + "/machine", "machine numbers run from 1 to " + std::to_string(nu));
      }
      slot.machine = static_cast<int>(machine - 1);
      slot.hour = static_cast<int>(e.integer("hour"));
      if (slot.hour < s.window_start || slot.hour >= s.window_end) {
        ctx.fail(item + "/hour", "baseline PM hour lies outside the maintenance window");
      }
      e.finish();
      s.baseline_pm.push_back(slot);
    }
    m.finish();
  }
  {
    ObjectReader i = top.object("initial");
    s.initial.inventory = i.vector("inventory", nx);
    s.initial.health = i.vector("health", nu);
    i.finish();
  }
  {
    ObjectReader p = top.object("prices");
    const std::string source = p.string("source");
    if (source == "synthetic") {
      s.prices.source = PriceSpec::Source::synthetic;
      s.prices.profile.base = p.number("base");
      s.prices.profile.peak = p.number("peak");
      const json& hours = p.at("peak_hours");
      if (!hours.is_array()) ctx.fail("/prices/peak_hours", "expected an array of hours");
      for (std::size_t k = 0; k < hours.size(); ++k) {
        if (!hours[k].is_number_integer() || hours[k].get<int>() < 0 || hours[k].get<int>() > 23) {
          ctx.fail("/prices/peak_hours/" + std::to_string(k), "expected an hour in 0..23");
        }
        s.prices.profile.peak_hours.insert(hours[k].get<int>());
      }
      const long long seed = p.integer("seed");
      if (seed < 0) ctx.fail("/prices/seed", "seed must be nonnegative");
      s.prices.profile.noise_seed = static_cast<std::uint64_t>(seed);
      s.prices.profile.noise_amplitude = p.number_or("noise_amplitude", 0.1);
      s.prices.profile.start = p.string_or("start", s.prices.profile.start);
      if (s.prices.profile.base < 0.0 || s.prices.profile.base > s.prices.profile.peak) {
        ctx.fail("/prices/base", "need 0 <= base <= peak");
      }
      if (s.prices.profile.noise_amplitude < 0.0 || s.prices.profile.noise_amplitude > 0.1) {
        ctx.fail("/prices/noise_amplitude", "noise amplitude must lie in [0, 0.1]");
      }
    } else if (source == "csv") {
      s.prices.source = PriceSpec::Source::csv;
      s.prices.csv_path = p.string("path");
      const std::string unit = p.string_or("unit", "mwh");
      if (unit == "kwh") {
        s.prices.csv_unit = PriceUnit::per_kWh;
      } else if (unit == "mwh") {
        s.prices.csv_unit = PriceUnit::per_MWh;
      } else {
        ctx.fail("/prices/unit", "unit must be 'kwh' or 'mwh'");
      }
    } else {
      ctx.fail("/prices/source", "source must be 'synthetic' or 'csv'");
    }
    s.prices.actual_deviation = p.number_or("actual_deviation", 0.0);
    if (s.prices.actual_deviation < 0.0 || s.prices.actual_deviation >= 1.0) {
      ctx.fail("/prices/actual_deviation", "actual_deviation must lie in [0, 1)");
    }
    const long long dseed = p.integer_or("deviation_seed", 1);
    if (dseed < 0) ctx.fail("/prices/deviation_seed", "seed must be nonnegative");
    s.prices.deviation_seed = static_cast<std::uint64_t>(dseed);
    p.finish();
  }
  {
    const std::string controller = top.string_or("controller", "hierarchical");
    try {
      s.controller = parse_controller(controller);
    } catch (const std::invalid_argument& e) {
      ctx.fail("/controller", e.what());
    }
  }
  {
    ObjectReader w = top.object("weights");
    s.lmpc = LmpcConfig::defaults_for(s.plant, s.hours_per_day);
    s.lmpc.inventory_weight = w.vector("inventory", nx);
    s.lmpc.safe_inventory = w.has("safe_inventory") ? w.vector("safe_inventory", nx)
                                                     : Eigen::VectorXd::Zero(nx);
    s.lmpc.energy_weight = w.number("energy");
    s.lmpc.smoothing_weight = w.number("smoothing");
    s.lmpc.slack_weight = w.number("target_slack");
    s.lmpc.terminal_slack_penalty = w.number_or("terminal_slack", s.lmpc.terminal_slack_penalty);
    s.lmpc.health_disposal_penalty = w.number_or("health_disposal", s.lmpc.health_disposal_penalty);
    s.price_weight = w.number("pm_price");
    s.cost_weight = w.number("pm_cost");
    w.finish();
  }
  if (top.has("solver")) {
    ObjectReader q = top.object("solver");
    s.lmpc.tol = q.number_or("lmpc_tolerance", s.lmpc.tol);
    s.lmpc.max_iter = static_cast<int>(q.integer_or("lmpc_max_iterations", s.lmpc.max_iter));
    const std::string coupling = q.string_or("capacity_coupling", "split");
    if (coupling == "split") {
      s.lmpc.coupling = CapacityCoupling::split;
    } else if (coupling == "combined") {
      s.lmpc.coupling = CapacityCoupling::combined;
    } else {
      ctx.fail("/solver/capacity_coupling", "capacity_coupling must be 'split' or 'combined'");
    }
    q.finish();
  }
  if (top.has("gbd")) {
    ObjectReader g = top.object("gbd");
    s.gbd.tolerance = g.number_or("tolerance", s.gbd.tolerance);
    s.gbd.max_iterations = static_cast<int>(g.integer_or("max_iterations", s.gbd.max_iterations));
    s.gbd.master_gap = g.number_or("master_gap", s.gbd.master_gap);
    g.finish();
  }
  top.finish();

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    ctx.fail("", e.what());
  }
  return s;
}

}  // namespace

ScenarioError::ScenarioError(std::string source, int line, std::string path,
                             const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + path + ": " + message),
      source_(std::move(source)),
      line_(line),
      path_(std::move(path)),
      message_(message) {}

int locate_json_pointer(const std::string& text, const std::string& pointer) {
  Scanner sc(text);
  sc.skip_ws();
  for (const std::string& token : split_pointer(pointer)) {
    sc.skip_ws();
    if (sc.peek() == '{') {
      sc.advance();
      bool found = false;
      while (true) {
        sc.skip_ws();
        if (sc.peek() != '"') return 0;
        const std::string key = sc.read_string();
        sc.skip_ws();
        if (sc.peek() != ':') return 0;
        sc.advance();
        sc.skip_ws();
        if (key == token) {
          found = true;
          break;
        }
        sc.skip_value();
        sc.skip_ws();
        if (sc.peek() != ',') return 0;
        sc.advance();
      }
      if (!found) return 0;
    } else if (sc.peek() == '[') {
      std::size_t index = 0;
      try {
        index = std::stoul(token);
      } catch (const std::exception&) {
        return 0;
      }
      sc.advance();
      for (std::size_t i = 0; i < index; ++i) {
        sc.skip_value();
        sc.skip_ws();
        if (sc.peek() != ',') return 0;
        sc.advance();
      }
      sc.skip_ws();
      if (sc.peek() == ']') return 0;
    } else {
      return 0;
    }
  }
  sc.skip_ws();
  if (sc.at_end()) return 0;
  return line_of(text, sc.pos());
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(source, line_of(text, e.byte > 0 ? e.byte - 1 : 0), "/",
                        "malformed JSON: " + std::string(e.what()));
  }
  const Context ctx{text, source};
  return read_scenario(ctx, doc);
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), 0, "/", "cannot open scenario file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path.string());
}

std::string scenario_to_json(const ScenarioConfig& s) {
  ordered_json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["name"] = s.name;
  j["description"] = s.description;

  ordered_json plant;
  plant["inflow_matrix"] = matrix_json(s.plant.inflow_matrix);
  plant["demand_matrix"] = matrix_json(s.plant.demand_matrix);
  plant["degradation_rates"] = to_std(s.plant.degradation_rates);
  plant["restoration_rates"] = to_std(s.plant.restoration_rates);
  plant["capacity_loss_fraction"] = to_std(s.plant.capacity_loss_fraction);
  plant["as_new_capacity"] = to_std(s.plant.as_new_capacity);
  plant["as_new_energy_intensity"] = to_std(s.plant.as_new_energy_intensity);
  plant["energy_degradation_penalty"] = to_std(s.plant.energy_degradation_penalty);
  plant["buffer_min"] = to_std(s.plant.buffer_min);
  plant["buffer_max"] = to_std(s.plant.buffer_max);
  plant["pm_cost_per_hour"] = s.plant.pm_cost_per_hour;
  plant["step_hours"] = s.plant.step_hours;
  j["plant"] = plant;

  j["horizon"] = {{"days", s.days}, {"hours_per_day", s.hours_per_day}};
  j["demand"] = {{"daily", to_std(s.daily_demand)}, {"target_shape", to_string(s.target_shape)}};

  ordered_json maint;
  maint["window_start"] = s.window_start;
  maint["window_end"] = s.window_end;
  maint["crew_limit"] = s.crew_limit;
  maint["health_floor"] = to_std(s.health_floor);
  maint["health_pruning"] = s.health_pruning;
  maint["baseline"] = ordered_json::array();
  for (const PmSlot& slot : s.baseline_pm) {
    maint["baseline"].push_back({{"machine", slot.machine + 1}, {"hour", slot.hour}});
  }
  j["maintenance"] = maint;

  j["initial"] = {{"inventory", to_std(s.initial.inventory)}, {"health", to_std(s.initial.health)}};

  ordered_json prices;
  if (s.prices.source == PriceSpec::Source::synthetic) {
    prices["source"] = "synthetic";
    prices["base"] = s.prices.profile.base;
    prices["peak"] = s.prices.profile.peak;
    prices["peak_hours"] = std::vector<int>(s.prices.profile.peak_hours.begin(),
                                            s.prices.profile.peak_hours.end());
    prices["seed"] = s.prices.profile.noise_seed;
    prices["noise_amplitude"] = s.prices.profile.noise_amplitude;
    prices["start"] = s.prices.profile.start;
  } else {
    prices["source"] = "csv";
    prices["path"] = s.prices.csv_path;
    prices["unit"] = unit_name(s.prices.csv_unit);
  }
  prices["actual_deviation"] = s.prices.actual_deviation;
  prices["deviation_seed"] = s.prices.deviation_seed;
  j["prices"] = prices;

  j["controller"] = to_string(s.controller);

  ordered_json w;
  w["inventory"] = to_std(s.lmpc.inventory_weight);
  w["safe_inventory"] = to_std(s.lmpc.safe_inventory);
  w["energy"] = s.lmpc.energy_weight;
  w["smoothing"] = s.lmpc.smoothing_weight;
  w["target_slack"] = s.lmpc.slack_weight;
  w["terminal_slack"] = s.lmpc.terminal_slack_penalty;
  w["health_disposal"] = s.lmpc.health_disposal_penalty;
  w["pm_price"] = s.price_weight;
  w["pm_cost"] = s.cost_weight;
  j["weights"] = w;

  j["solver"] = {{"lmpc_tolerance", s.lmpc.tol},
                 {"lmpc_max_iterations", s.lmpc.max_iter},
                 {"capacity_coupling", coupling_name(s.lmpc.coupling)}};
  j["gbd"] = {{"tolerance", s.gbd.tolerance},
              {"max_iterations", s.gbd.max_iterations},
              {"master_gap", s.gbd.master_gap}};
  return compact_arrays(j.dump(2)) + "\n";
}

void save_scenario(const ScenarioConfig& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file " + path.string());
  out << scenario_to_json(scenario);
}

ScenarioConfig battery_line_scenario() {
  // Buffers: raw cells, prepared cells, modules, tested modules, packs,
  // finished packs. Machines 3 and 4 assemble modules in parallel.
  MatrixXd inflow = MatrixXd::Zero(6, 7);
  inflow(0, 0) = 1;
  inflow(0, 1) = -1;
  inflow(1, 1) = 1;
  inflow(1, 2) = -1;
  inflow(1, 3) = -1;
  inflow(2, 2) = 1;
  inflow(2, 3) = 1;
  inflow(2, 4) = -1;
  inflow(3, 4) = 1;
  inflow(3, 5) = -1;
  inflow(4, 5) = 1;
  inflow(4, 6) = -1;
  inflow(5, 6) = 1;
  MatrixXd demand = MatrixXd::Zero(6, 1);
  demand(5, 0) = -1;

  Eigen::VectorXd capacity(7), intensity(7), gamma(7), restoration(7), xmax(6), q(6);
  capacity << 40, 25, 20, 20, 20, 25, 30;
  intensity << 0.5, 0.9, 1.8, 1.8, 2.6, 1.0, 0.4;
  gamma << 0.1, 0.3, 0.8, 0.8, 1.0, 0.4, 0.2;
  restoration << 0.15, 0.15, 0.20, 0.20, 0.20, 0.15, 0.15;
  xmax << 300, 250, 200, 180, 180, 400;
  q << 0.04, 0.06, 0.08, 0.10, 0.10, 1.00;

  ScenarioConfig s;
  s.name = "battery_line";
  s.description =
      "Seven-machine Li-ion pack assembly line, five days, synthetic peak/off-peak prices";
  s.plant = make_plant_model(inflow, demand, Eigen::VectorXd::Constant(7, 5e-4), restoration,
                             Eigen::VectorXd::Ones(7), capacity, intensity, gamma,
                             Eigen::VectorXd::Zero(6), xmax, 100.0, 1.0);
  s.days = 5;
  s.hours_per_day = 24;
  s.daily_demand = Eigen::VectorXd::Constant(1, 150.0);
  s.window_start = 9;
  s.window_end = 18;
  s.crew_limit = 2;
  s.health_floor = Eigen::VectorXd::Constant(7, 0.6);
  s.initial = {Eigen::VectorXd::Zero(6), Eigen::VectorXd::Ones(7)};
  s.prices.source = PriceSpec::Source::synthetic;
  s.prices.profile.base = 0.03;
  s.prices.profile.peak = 0.12;
  s.prices.profile.peak_hours = {7, 8, 17, 18, 19, 20};
  s.prices.profile.noise_seed = 7;
  s.prices.profile.noise_amplitude = 0.1;
  s.prices.actual_deviation = 0.1;
  s.prices.deviation_seed = 11;
  s.controller = Controller::hierarchical;
  s.baseline_pm = {{0, 9}, {6, 9}};
  s.target_shape = TargetShape::end_of_day;
  s.lmpc = LmpcConfig::defaults_for(s.plant, 24);
  s.lmpc.inventory_weight = q;
  s.lmpc.safe_inventory = Eigen::VectorXd::Zero(6);
  s.lmpc.energy_weight = 1.0;
  s.lmpc.smoothing_weight = 1.5;
  s.lmpc.slack_weight = 1e5;
  s.price_weight = 1.5;
  s.cost_weight = 10.0;
  return s;
}

}  // namespace hmpc
