#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qtd/binary_state.hpp"
#include "qtd/error.hpp"
#include "qtd/hypercube_chain.hpp"
#include "qtd/quantizer.hpp"
#include "qtd/reverse_sampler.hpp"
#include "qtd/score_oracle.hpp"

namespace qtd::io {

/// Shortest round-trip decimal form of x.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Parses the whole of s as a finite double; false otherwise.
inline bool parse_double(std::string_view s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size() && std::isfinite(out);
}

inline bool parse_uint(std::string_view s, std::uint64_t& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = kDigits[h & 0xF];
  return s;
}

/// Flat `key = value` configuration. Blank lines and text after '#' are
/// ignored; later assignments override earlier ones.
class Config {
 public:
  static Config parse(std::istream& in) {
    Config c;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ParseError("config: expected key = value", no);
      const std::string key = trim(std::string_view(body).substr(0, eq));
      if (key.empty()) throw ParseError("config: empty key", no);
      c.values_[key] = trim(std::string_view(body).substr(eq + 1));
    }
    return c;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InvalidArgument("config: missing key '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const {
    double v = 0.0;
    if (!parse_double(get_string(key), v)) throw InvalidArgument("config: key '" + key + "' is not a number");
    return v;
  }
  double get_double(const std::string& key, double fallback) const { return has(key) ? get_double(key) : fallback; }

  std::uint64_t get_uint(const std::string& key) const {
    std::uint64_t v = 0;
    if (!parse_uint(get_string(key), v))
      throw InvalidArgument("config: key '" + key + "' is not a nonnegative integer");
    return v;
  }
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_uint(key) : fallback;
  }

  /// Comma-separated list of numbers.
  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : split(get_string(key), ',')) {
      double v = 0.0;
      if (!parse_double(tok, v)) throw InvalidArgument("config: key '" + key + "' has a non-numeric entry");
      out.push_back(v);
    }
    return out;
  }

  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : values_)
      if (!allowed.count(k)) throw InvalidArgument("config: unknown key '" + k + "'");
  }

  /// Hash of the canonical (sorted, trimmed) key=value listing.
  std::uint64_t hash() const {
    std::string canon;
    for (const auto& [k, v] : values_) canon += k + "=" + v + "\n";
    return fnv1a(canon);
  }

 private:
  std::map<std::string, std::string> values_;
};

inline void write_hash_line(std::ostream& out, std::uint64_t config_hash) {
  out << "# config_hash=" << hex64(config_hash) << '\n';
}

/// One point per row, d numeric columns. A first row that is not entirely
/// numeric is taken as a header. Lines starting with '#' are skipped.
inline std::vector<Point> read_points_csv(std::istream& in) {
  std::vector<Point> points;
  std::string line;
  std::size_t no = 0;
  bool first_row = true;
  std::size_t d = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto cells = split(body, ',');
    Point p;
    bool numeric = true;
    for (const auto& c : cells) {
      double v = 0.0;
      if (!parse_double(c, v)) {
        numeric = false;
        break;
      }
      p.push_back(v);
    }
    if (!numeric) {
      if (first_row) {
        first_row = false;
        continue;
      }
      throw ParseError("points: non-numeric value in row " + std::to_string(no), no);
    }
    first_row = false;
    if (d == 0) d = p.size();
    if (p.size() != d)
      throw ParseError("points: row " + std::to_string(no) + " has " + std::to_string(p.size()) + " columns, expected " +
                           std::to_string(d),
                       no);
    points.push_back(std::move(p));
  }
  if (points.empty()) throw ParseError("points: no data rows", 0);
  return points;
}

inline std::vector<Point> read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open points file: " + path.string());
  return read_points_csv(in);
}

/// One state per row, D columns of 0/1, header b0..b{D-1}.
inline void write_states_csv(std::ostream& out, std::span<const BinaryState> states, std::uint64_t config_hash) {
  write_hash_line(out, config_hash);
  const std::size_t D = states.empty() ? 0 : states.front().size();
  for (std::size_t i = 0; i < D; ++i) out << (i ? "," : "") << 'b' << i;
  out << '\n';
  for (const auto& s : states) {
    for (std::size_t i = 0; i < D; ++i) out << (i ? "," : "") << (s.get(i) ? '1' : '0');
    out << '\n';
  }
}

inline std::vector<BinaryState> read_states_csv(std::istream& in) {
  std::vector<BinaryState> states;
  std::string line;
  std::size_t no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++no;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    if (!header_seen && body[0] == 'b') {
      header_seen = true;
      continue;
    }
    header_seen = true;
    std::vector<std::uint8_t> bits;
    for (const auto& c : split(body, ',')) {
      if (c != "0" && c != "1") throw ParseError("states: entries must be 0 or 1 in row " + std::to_string(no), no);
      bits.push_back(c == "1" ? 1 : 0);
    }
    if (!states.empty() && bits.size() != states.front().size())
      throw ParseError("states: inconsistent column count in row " + std::to_string(no), no);
    states.push_back(BinaryState::from_bits(bits));
  }
  return states;
}

/// Spec as flat key = value lines (keys d, sigma, H, m0, eps, L, l, K).
inline void write_spec(std::ostream& out, const QuantizerSpec& spec, std::uint64_t config_hash) {
  write_hash_line(out, config_hash);
  out << "d = " << spec.d << '\n';
  if (spec.sigma) out << "sigma = " << format_double(*spec.sigma) << '\n';
  if (spec.H) out << "H = " << format_double(*spec.H) << '\n';
  if (spec.m0) out << "m0 = " << format_double(*spec.m0) << '\n';
  if (spec.eps) out << "eps = " << format_double(*spec.eps) << '\n';
  out << "L = " << format_double(spec.L) << '\n';
  out << "l = " << format_double(spec.l) << '\n';
  out << "K = " << spec.K << '\n';
}

/// Explicit (L, K) wins; otherwise the grid is derived from the smoothness
/// constants. When d is absent it is taken from `default_d`.
inline QuantizerSpec spec_from_config(const Config& c, std::size_t default_d = 0) {
  const std::size_t d = c.has("d") ? c.get_uint("d") : default_d;
  if (d == 0) throw InvalidArgument("config: dimension d is required");
  if (c.has("L") && c.has("K")) {
    QuantizerSpec s = spec_from_bounds(d, c.get_double("L"), c.get_uint("K"));
    if (c.has("eps")) s.eps = c.get_double("eps");
    if (c.has("l") && std::abs(c.get_double("l") - s.l) > 1e-9 * s.l)
      throw InvalidArgument("config: l is inconsistent with 2L/K");
    return s;
  }
  if (c.has("sigma") && c.has("H") && c.has("m0") && c.has("eps"))
    return derive_spec(d, c.get_double("sigma"), c.get_double("H"), c.get_double("m0"), c.get_double("eps"));
  throw InvalidArgument("config: need either (L, K) or (sigma, H, m0, eps) for the quantizer");
}

inline void write_distribution_csv(std::ostream& out, const DiscreteDistribution& dist, std::uint64_t config_hash) {
  write_hash_line(out, config_hash);
  out << "state_index,bitstring,prob\n";
  for (std::uint64_t i = 0; i < dist.size(); ++i)
    out << i << ',' << BinaryState::from_index(dist.num_bits(), i).to_string() << ',' << format_double(dist[i])
        << '\n';
}

inline void write_tabular_oracle_csv(std::ostream& out, const TabularOracle& oracle, std::uint64_t config_hash) {
  write_hash_line(out, config_hash);
  out << "t_bucket,state_index,flip_index,ratio\n";
  const std::uint64_t n = std::uint64_t{1} << oracle.num_bits();
  for (std::size_t b = 0; b < oracle.buckets(); ++b)
    for (std::uint64_t s = 0; s < n; ++s)
      for (std::size_t i = 0; i < oracle.num_bits(); ++i)
        out << b << ',' << s << ',' << i << ',' << format_double(oracle.at(b, s, i)) << '\n';
}

/// Reads a table written by write_tabular_oracle_csv. Every
/// (bucket, state, flip) cell must appear exactly once.
inline TabularOracle read_tabular_oracle_csv(std::istream& in, std::size_t num_bits, double T) {
  std::map<std::uint64_t, double> cells;
  std::uint64_t max_bucket = 0;
  const std::uint64_t n = ChainSpec(num_bits).num_states();
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#' || body.rfind("t_bucket", 0) == 0) continue;
    const auto c = split(body, ',');
    std::uint64_t b = 0, s = 0, i = 0;
    double v = 0.0;
    if (c.size() != 4 || !parse_uint(c[0], b) || !parse_uint(c[1], s) || !parse_uint(c[2], i) ||
        !parse_double(c[3], v))
      throw ParseError("tabular oracle: malformed row " + std::to_string(no), no);
    if (s >= n || i >= num_bits) throw ParseError("tabular oracle: index out of range in row " + std::to_string(no), no);
    if (b > (std::uint64_t{1} << 20)) throw ParseError("tabular oracle: bucket too large", no);
    max_bucket = std::max(max_bucket, b);
    if (!cells.emplace((b * n + s) * num_bits + i, v).second)
      throw ParseError("tabular oracle: duplicate cell in row " + std::to_string(no), no);
  }
  const std::size_t buckets = static_cast<std::size_t>(max_bucket) + 1;
  if (cells.size() != buckets * n * num_bits) throw ParseError("tabular oracle: table is incomplete", 0);
  std::vector<double> table;
  table.reserve(cells.size());
  for (const auto& [k, v] : cells) table.push_back(v);
  return {num_bits, T, buckets, std::move(table)};
}

/// Columns replica, state_index, bitstring, x_0..x_{d-1}. state_index is
/// left empty when D > 63.
inline void write_samples_csv(std::ostream& out, const SampleResult& result, std::uint64_t config_hash) {
  write_hash_line(out, config_hash);
  const std::size_t d = result.points.empty() ? 0 : result.points.front().size();
  out << "replica,state_index,bitstring";
  for (std::size_t j = 0; j < d; ++j) out << ",x_" << j;
  out << '\n';
  for (std::size_t r = 0; r < result.states.size(); ++r) {
    const auto& s = result.states[r];
    out << r << ',';
    if (s.size() <= BinaryState::kMaxIndexedBits) out << s.index();
    out << ',' << s.to_string();
    for (double x : result.points[r]) out << ',' << format_double(x);
    out << '\n';
  }
}

/// Per-segment schedule and counters: segment, beta, dt, events_mean,
/// score_evals (total over replicas).
inline void write_stats_csv(std::ostream& out, const TimePartition& part, const RunStats& stats,
                            std::uint64_t config_hash) {
  write_hash_line(out, config_hash);
  out << "segment,beta,dt,events_mean,score_evals\n";
  const double reps = stats.replicas ? static_cast<double>(stats.replicas) : 1.0;
  for (std::size_t w = 0; w < part.num_segments(); ++w) {
    const std::uint64_t ev = w < stats.poisson_events.size() ? stats.poisson_events[w] : 0;
    out << w << ',' << format_double(part.betas[w]) << ',' << format_double(part.dt(w)) << ','
        << format_double(static_cast<double>(ev) / reps) << ',' << ev * part.D << '\n';
  }
}

/// Long-format heatmap rows t, row, col, prob.
inline void write_heatmap_rows(std::ostream& out, double t, const Eigen::MatrixXd& P) {
  for (Eigen::Index r = 0; r < P.rows(); ++r)
    for (Eigen::Index c = 0; c < P.cols(); ++c)
      out << format_double(t) << ',' << r << ',' << c << ',' << format_double(P(r, c)) << '\n';
}

struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

inline void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows, std::uint64_t config_hash) {
  write_hash_line(out, config_hash);
  out << "metric,value,n,seed,config_hash\n";
  for (const auto& r : rows)
    out << r.metric << ',' << format_double(r.value) << ',' << r.n << ',' << r.seed << ',' << hex64(r.config_hash)
        << '\n';
}

}  // namespace qtd::io
