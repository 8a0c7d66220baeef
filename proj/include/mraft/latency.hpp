#pragma once

// Link delay models: the five-region Azure matrix, a uniform delay, or an
// explicit n x n matrix. Delays are one-way, in simulated milliseconds.

#include "mraft/core.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace mraft {

inline constexpr std::array<std::string_view, 5> kRegions = {"East US", "Canada Central", "UK South", "West Europe",
                                                             "Southeast Asia"};

/// Measured inter-region latency in ms; the diagonal is intra-region.
inline constexpr double kTable1[5][5] = {
    {1.71, 27.89, 75.34, 82.82, 219.86},
    {27.89, 3.50, 90.0, 93.94, 218.11},
    {75.34, 90.0, 1.27, 8.95, 156.12},
    {82.82, 93.94, 8.95, 2.35, 160.39},
    {219.86, 218.11, 156.12, 160.39, 2.12},
};

/// How table values map to one-way delay: `Rtt` halves them, `OneWay` uses them as is.
enum class Table1Mode { Rtt, OneWay };

inline std::size_t region_of(NodeId id) { return id % kRegions.size(); }

class LatencyModel {
public:
  LatencyModel() = default;

  static LatencyModel table1(std::size_t n, Table1Mode mode = Table1Mode::Rtt) {
    LatencyModel m;
    m.kind_ = "table1";
    m.delay_.assign(n, std::vector<double>(n, 0.0));
    const double scale = mode == Table1Mode::Rtt ? 0.5 : 1.0;
    for (NodeId a = 0; a < n; ++a)
      for (NodeId b = 0; b < n; ++b)
        m.delay_[a][b] = a == b ? 0.0 : kTable1[region_of(a)][region_of(b)] * scale;
    return m;
  }

  static LatencyModel uniform(std::size_t n, double ms) {
    if (ms < 0) throw ConfigError("latency: negative delay");
    LatencyModel m;
    m.kind_ = "uniform";
    m.delay_.assign(n, std::vector<double>(n, ms));
    for (std::size_t i = 0; i < n; ++i) m.delay_[i][i] = 0.0;
    return m;
  }

  static LatencyModel matrix(std::vector<std::vector<double>> d) {
    for (const auto &row : d) {
      if (row.size() != d.size()) throw ConfigError("latency: matrix must be square");
      for (double x : row)
        if (x < 0) throw ConfigError("latency: negative delay");
    }
    LatencyModel m;
    m.kind_ = "matrix";
    m.delay_ = std::move(d);
    return m;
  }

  std::size_t size() const { return delay_.size(); }
  double delay(NodeId from, NodeId to) const { return delay_.at(from).at(to); }
  const std::string &kind() const { return kind_; }
  const std::vector<std::vector<double>> &delays() const { return delay_; }

private:
  std::string kind_ = "uniform";
  std::vector<std::vector<double>> delay_;
};

} // namespace mraft
