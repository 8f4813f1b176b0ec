#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pqla/grid.hpp"
#include "pqla/process_sim.hpp"

namespace pqla {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);
/// Throws std::invalid_argument if `text` is not a complete decimal number.
double parse_double(std::string_view text);

/// Column-oriented view of one or more paths sharing a grid.  Serialized as
///   # seed=<u64> model=<name> T=<f> n=<int>
///   t,<label_0>,...,<label_k>
///   ...
struct PathTable {
  TimeGrid grid;
  std::uint64_t seed = 0;
  std::string model;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> columns;

  /// Throws std::out_of_range for an unknown label.
  const std::vector<double>& column(const std::string& label) const;
};

void write_path_csv(std::ostream& out, const PathTable& table);
/// Throws std::runtime_error with a line number on malformed input.
PathTable read_path_csv(std::istream& in);

PathTable to_table(const RegressionPaths& paths, const std::string& model);
PathTable to_table(const VolEnvPaths& paths, const std::string& model);
RegressionPaths regression_from_table(const PathTable& table);
VolEnvPaths volatility_from_table(const PathTable& table);

}  // namespace pqla
