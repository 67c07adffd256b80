#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gcrl/error.hpp"
#include "gcrl/random.hpp"

namespace gcrl {

/// Shortest decimal text that parses back to exactly `x`.
inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

/// A point in an observation space: a discrete state index or a real vector.
/// Goals are made of the same points.
class Observation {
 public:
  Observation() = default;

  static Observation discrete(std::size_t index) { return Observation(index); }
  static Observation box(std::vector<double> values) { return Observation(std::move(values)); }

  bool is_discrete() const noexcept { return std::holds_alternative<std::size_t>(value_); }

  std::size_t index() const {
    require(is_discrete(), "Observation::index on a box observation");
    return std::get<std::size_t>(value_);
  }

  const std::vector<double>& values() const {
    require(!is_discrete(), "Observation::values on a discrete observation");
    return std::get<std::vector<double>>(value_);
  }

  std::string to_string() const {
    if (is_discrete()) return std::to_string(index());
    std::string out;
    for (double x : values()) out += (out.empty() ? "" : " ") + format_double(x);
    return out;
  }

  friend bool operator==(const Observation&, const Observation&) = default;

 private:
  explicit Observation(std::size_t index) : value_(index) {}
  explicit Observation(std::vector<double> values) : value_(std::move(values)) {}

  std::variant<std::size_t, std::vector<double>> value_{std::size_t{0}};
};

/// Describes an observation space and how its points are encoded for the
/// network: one-hot for discrete spaces, per-dimension min-max normalization
/// to [0,1] for boxes.
class SpaceDescriptor {
 public:
  SpaceDescriptor() = default;

  static SpaceDescriptor discrete(std::size_t n_states) {
    require(n_states >= 1, "discrete space needs at least one state");
    SpaceDescriptor s;
    s.n_states_ = n_states;
    return s;
  }

  static SpaceDescriptor box(std::vector<double> low, std::vector<double> high) {
    require(!low.empty() && low.size() == high.size(), "box bounds must be non-empty and equal length");
    for (std::size_t i = 0; i < low.size(); ++i)
      require(low[i] < high[i], "box bounds must satisfy low < high");
    SpaceDescriptor s;
    s.low_ = std::move(low);
    s.high_ = std::move(high);
    return s;
  }

  bool is_discrete() const noexcept { return n_states_ > 0; }
  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t dimension() const noexcept { return is_discrete() ? 1 : low_.size(); }
  const std::vector<double>& low() const noexcept { return low_; }
  const std::vector<double>& high() const noexcept { return high_; }

  std::size_t encoding_width() const noexcept { return is_discrete() ? n_states_ : low_.size(); }

  bool contains(const Observation& obs) const {
    if (is_discrete()) return obs.is_discrete() && obs.index() < n_states_;
    if (obs.is_discrete() || obs.values().size() != low_.size()) return false;
    const auto& v = obs.values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!(v[i] >= low_[i] && v[i] <= high_[i])) return false;
    return true;
  }

  bool same_kind(const Observation& obs) const {
    if (is_discrete()) return obs.is_discrete();
    return !obs.is_discrete() && obs.values().size() == low_.size();
  }

  double normalize(std::size_t dim, double value) const {
    return (value - low_[dim]) / (high_[dim] - low_[dim]);
  }

  /// Writes the encoding of `obs` into `out` (length encoding_width()).
  void encode(const Observation& obs, std::span<float> out) const {
    require(out.size() == encoding_width(), "encode: output width mismatch");
    require(same_kind(obs), "encode: observation does not belong to this space");
    if (is_discrete()) {
      require(obs.index() < n_states_, "encode: discrete index out of range");
      std::fill(out.begin(), out.end(), 0.0f);
      out[obs.index()] = 1.0f;
      return;
    }
    const auto& v = obs.values();
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(normalize(i, v[i]));
  }

  std::vector<float> encode(const Observation& obs) const {
    std::vector<float> out(encoding_width());
    encode(obs, out);
    return out;
  }

  /// Inverse of encode(); exact for discrete spaces, float rounding for boxes.
  Observation decode(std::span<const float> code) const {
    require(code.size() == encoding_width(), "decode: width mismatch");
    if (is_discrete()) {
      auto it = std::max_element(code.begin(), code.end());
      return Observation::discrete(static_cast<std::size_t>(it - code.begin()));
    }
    std::vector<double> v(code.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = low_[i] + static_cast<double>(code[i]) * (high_[i] - low_[i]);
    return Observation::box(std::move(v));
  }

  Observation sample_uniform(Rng& rng) const {
    if (is_discrete()) return Observation::discrete(uniform_index(rng, n_states_));
    std::vector<double> v(low_.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = std::uniform_real_distribution<double>(low_[i], high_[i])(rng);
    return Observation::box(std::move(v));
  }

  /// Number of doubles needed to store a raw point (1 for a discrete index).
  std::size_t raw_width() const noexcept { return dimension(); }

  void store_raw(const Observation& obs, std::span<double> out) const {
    if (is_discrete()) {
      out[0] = static_cast<double>(obs.index());
    } else {
      std::copy(obs.values().begin(), obs.values().end(), out.begin());
    }
  }

  Observation load_raw(std::span<const double> raw) const {
    if (is_discrete()) return Observation::discrete(static_cast<std::size_t>(raw[0]));
    return Observation::box(std::vector<double>(raw.begin(), raw.end()));
  }

  /// Parses "15" (discrete) or "-1.6 0.0" / "-1.6,0.0" (box).
  Observation parse(const std::string& text) const {
    std::string cleaned = text;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream in(cleaned);
    if (is_discrete()) {
      long long idx = -1;
      require(static_cast<bool>(in >> idx) && idx >= 0, "cannot parse discrete observation '" + text + "'");
      Observation o = Observation::discrete(static_cast<std::size_t>(idx));
      require(contains(o), "observation '" + text + "' out of range");
      return o;
    }
    std::vector<double> v;
    double x = 0;
    while (in >> x) v.push_back(x);
    Observation o = Observation::box(std::move(v));
    require(contains(o), "observation '" + text + "' not inside the box space");
    return o;
  }

 private:
  std::size_t n_states_ = 0;
  std::vector<double> low_;
  std::vector<double> high_;
};

}  // namespace gcrl
