#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmpc {

enum class PriceKind { day_ahead, actual };
enum class PriceUnit { per_kWh, per_MWh };

const char* to_string(PriceKind kind);

/// Hourly electricity prices in $/kWh.
///
/// Day-ahead and actual series are kept apart: planning code accepts only
/// `day_ahead` series and cost accounting only `actual` ones (see
/// `require_kind`).
class PriceSeries {
 public:
  PriceSeries(std::string start, std::vector<double> prices, PriceKind kind);

  const std::string& start() const { return start_; }
  const std::vector<double>& prices() const { return prices_; }
  PriceKind kind() const { return kind_; }
  std::size_t size() const { return prices_.size(); }
  double operator[](std::size_t hour) const { return prices_.at(hour); }

  /// Window of `count` hours starting at `first`.
  std::span<const double> window(std::size_t first, std::size_t count) const;

  /// Same values relabelled with another kind (e.g. a perfect forecast).
  PriceSeries as(PriceKind kind) const;

  void require_kind(PriceKind expected, const char* consumer) const;

 private:
  std::string start_;
  std::vector<double> prices_;
  PriceKind kind_;
};

/// Raised for malformed price files; `row` is the 1-based data row (0 for
/// whole-file problems such as an empty file).
class PriceFormatError : public std::runtime_error {
 public:
  PriceFormatError(std::size_t row, const std::string& what);
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Parses `timestamp,price` CSV with strictly hourly, increasing timestamps
/// (`YYYY-MM-DDTHH:MM[:SS]`). $/MWh input is converted to $/kWh.
PriceSeries load_price_csv(const std::filesystem::path& path, PriceUnit unit,
                           PriceKind kind = PriceKind::actual);
PriceSeries parse_price_csv(std::istream& in, PriceUnit unit,
                            PriceKind kind = PriceKind::actual);

void write_price_csv(const PriceSeries& series, std::ostream& out);
void write_price_csv(const PriceSeries& series, const std::filesystem::path& path);

struct SynthProfile {
  std::size_t hours = 24;
  double base = 0.03;
  double peak = 0.09;
  std::set<int> peak_hours;  // hour-of-day values in [0, 23]
  std::uint64_t noise_seed = 0;
  double noise_amplitude = 0.1;  // fraction of `base`, at most 0.1
  std::string start = "2024-05-01T00:00";
};

/// Peak/off-peak profile with seeded uniform noise bounded by
/// noise_amplitude * base.
PriceSeries synth_profile(const SynthProfile& profile, PriceKind kind = PriceKind::day_ahead);

PriceSeries synth_profile(std::size_t hours, double base, double peak,
                          const std::set<int>& peak_hours, std::uint64_t noise_seed);

/// Realized series from a forecast: each hour scaled by an independent
/// factor drawn uniformly from [1 - relative_deviation, 1 + relative_deviation].
PriceSeries perturb_prices(const PriceSeries& forecast, double relative_deviation,
                           std::uint64_t seed, PriceKind kind = PriceKind::actual);

inline double energy_cost(double price, double energy_kwh) { return price * energy_kwh; }

/// Hours since 1970-01-01T00:00 for an ISO-like timestamp; throws on bad input.
std::int64_t parse_timestamp_hours(const std::string& text);
std::string format_timestamp_hours(std::int64_t hours);

}  // namespace hmpc
