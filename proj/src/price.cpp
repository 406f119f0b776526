#include "hmpc/price.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace hmpc {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2));
}

std::int64_t parse_timestamp_minutes(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int consumed = 0;
  const int fields = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep,
                                 &h, &mi, &consumed);
  if (fields < 6 || (sep != 'T' && sep != ' ')) {
    throw std::invalid_argument("bad timestamp '" + text + "'");
  }
  std::string rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty()) {
    int extra = 0;
    if (std::sscanf(rest.c_str(), ":%2d%n", &s, &extra) != 1 ||
        static_cast<std::size_t>(extra) != rest.size()) {
      throw std::invalid_argument("bad timestamp '" + text + "'");
    }
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 ||
      s > 59) {
    throw std::invalid_argument("timestamp out of range '" + text + "'");
  }
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 1440 +
         h * 60 + mi;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Uniform double in [0,1) from the standardized mt19937_64 bit stream.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

const char* to_string(PriceKind kind) {
  return kind == PriceKind::day_ahead ? "day_ahead" : "actual";
}

PriceSeries::PriceSeries(std::string start, std::vector<double> prices, PriceKind kind)
    : start_(std::move(start)), prices_(std::move(prices)), kind_(kind) {
  if (prices_.empty()) {
    throw std::invalid_argument("price series must contain at least one hour");
  }
  for (std::size_t i = 0; i < prices_.size(); ++i) {
    if (!(prices_[i] >= 0.0) || !std::isfinite(prices_[i])) {
      throw std::invalid_argument("price at hour " + std::to_string(i) +
                                  " must be finite and nonnegative");
    }
  }
}

std::span<const double> PriceSeries::window(std::size_t first, std::size_t count) const {
  if (first + count > prices_.size()) {
    throw std::out_of_range("price window [" + std::to_string(first) + ", " +
                            std::to_string(first + count) + ") exceeds series length " +
                            std::to_string(prices_.size()));
  }
  return std::span<const double>(prices_).subspan(first, count);
}

PriceSeries PriceSeries::as(PriceKind kind) const { return PriceSeries(start_, prices_, kind); }

void PriceSeries::require_kind(PriceKind expected, const char* consumer) const {
  if (kind_ != expected) {
    throw std::invalid_argument(std::string(consumer) + " requires a " + to_string(expected) +
                                " price series, got " + to_string(kind_));
  }
}

PriceFormatError::PriceFormatError(std::size_t row, const std::string& what)
    : std::runtime_error(row == 0 ? what : "row " + std::to_string(row) + ": " + what),
      row_(row) {}

std::int64_t parse_timestamp_hours(const std::string& text) {
  const std::int64_t minutes = parse_timestamp_minutes(text);
  return minutes >= 0 ? minutes / 60 : -((-minutes + 59) / 60);
}

std::string format_timestamp_hours(std::int64_t hours) {
  const std::int64_t days = hours >= 0 ? hours / 24 : -((-hours + 23) / 24);
  const auto hour = static_cast<int>(hours - days * 24);
  int y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00", y, m, d, hour);
  return buf;
}

PriceSeries parse_price_csv(std::istream& in, PriceUnit unit, PriceKind kind) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<double> prices;
  std::string first_stamp;
  std::int64_t previous = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      std::string h = line;
      h.erase(std::remove(h.begin(), h.end(), ' '), h.end());
      if (h != "timestamp,price") {
        throw PriceFormatError(0, "expected header 'timestamp,price', got '" + line + "'");
      }
      continue;
    }
    ++row;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw PriceFormatError(row, "expected two comma-separated fields");
    }
    const std::string stamp = trim(line.substr(0, comma));
    const std::string value = trim(line.substr(comma + 1));
    std::int64_t minutes = 0;
    try {
      minutes = parse_timestamp_minutes(stamp);
    } catch (const std::invalid_argument& e) {
      throw PriceFormatError(row, e.what());
    }
    double price = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), price);
    if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(price)) {
      throw PriceFormatError(row, "malformed price '" + value + "'");
    }
    if (price < 0.0) {
      throw PriceFormatError(row, "negative price " + value);
    }
    if (row == 1) {
      first_stamp = stamp;
    } else if (minutes <= previous) {
      throw PriceFormatError(row, "timestamps are not increasing");
    } else if (minutes - previous != 60) {
      throw PriceFormatError(row, "timestamps are not hourly");
    }
    previous = minutes;
    prices.push_back(unit == PriceUnit::per_MWh ? price / 1000.0 : price);
  }
  if (prices.empty()) {
    throw PriceFormatError(0, "price file contains no data rows");
  }
  return PriceSeries(first_stamp, std::move(prices), kind);
}

PriceSeries load_price_csv(const std::filesystem::path& path, PriceUnit unit, PriceKind kind) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open price file " + path.string());
  }
  return parse_price_csv(in, unit, kind);
}

void write_price_csv(const PriceSeries& series, std::ostream& out) {
  const std::int64_t start = parse_timestamp_hours(series.start());
  out << "timestamp,price\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g", series[i]);
    out << format_timestamp_hours(start + static_cast<std::int64_t>(i)) << ',' << buf << '\n';
  }
}

void write_price_csv(const PriceSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write price file " + path.string());
  }
  write_price_csv(series, out);
}

PriceSeries synth_profile(const SynthProfile& p, PriceKind kind) {
  if (p.hours == 0) throw std::invalid_argument("synthetic profile needs at least one hour");
  if (!(p.base >= 0.0) || !(p.peak >= p.base)) {
    throw std::invalid_argument("synthetic profile requires 0 <= base <= peak");
  }
  if (!(p.noise_amplitude >= 0.0) || p.noise_amplitude > 0.1) {
    throw std::invalid_argument("noise amplitude must lie in [0, 0.1]");
  }
  for (int h : p.peak_hours) {
    if (h < 0 || h > 23) throw std::invalid_argument("peak hour outside [0, 23]");
  }
  const std::int64_t start = parse_timestamp_hours(p.start);
  std::mt19937_64 rng(p.noise_seed);
  std::vector<double> prices(p.hours);
  for (std::size_t i = 0; i < p.hours; ++i) {
    const auto hour_of_day = static_cast<int>(((start + static_cast<std::int64_t>(i)) % 24 + 24) % 24);
    const double level = p.peak_hours.count(hour_of_day) ? p.peak : p.base;
    const double noise = (2.0 * unit_uniform(rng) - 1.0) * p.noise_amplitude * p.base;
    prices[i] = std::max(0.0, level + noise);
  }
  return PriceSeries(format_timestamp_hours(start), std::move(prices), kind);
}

PriceSeries synth_profile(std::size_t hours, double base, double peak,
                          const std::set<int>& peak_hours, std::uint64_t noise_seed) {
  SynthProfile p;
  p.hours = hours;
  p.base = base;
  p.peak = peak;
  p.peak_hours = peak_hours;
  p.noise_seed = noise_seed;
  return synth_profile(p);
}

PriceSeries perturb_prices(const PriceSeries& forecast, double relative_deviation,
                           std::uint64_t seed, PriceKind kind) {
  if (!(relative_deviation >= 0.0) || relative_deviation >= 1.0) {
    throw std::invalid_argument("relative deviation must lie in [0, 1)");
  }
  std::mt19937_64 rng(seed);
  std::vector<double> prices(forecast.prices());
  for (double& p : prices) {
    p *= 1.0 + (2.0 * unit_uniform(rng) - 1.0) * relative_deviation;
  }
  return PriceSeries(forecast.start(), std::move(prices), kind);
}

}  // namespace hmpc
