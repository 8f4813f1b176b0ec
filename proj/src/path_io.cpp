#include "pqla/path_io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pqla {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || text.empty()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return value;
}

const std::vector<double>& PathTable::column(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return columns[i];
  }
  throw std::out_of_range("path table has no column '" + label + "'");
}

void write_path_csv(std::ostream& out, const PathTable& table) {
  out << "# seed=" << table.seed << " model=" << table.model << " T=" << format_double(table.grid.horizon())
      << " n=" << table.grid.n_steps() << "\n";
  out << "t";
  for (const auto& l : table.labels) out << ',' << l;
  out << "\n";
  for (std::size_t k = 0; k < table.grid.n_points(); ++k) {
    out << format_double(table.grid.time(k));
    for (const auto& c : table.columns) out << ',' << format_double(c[k]);
    out << "\n";
  }
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

PathTable read_path_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("path csv line " + std::to_string(line_no) + ": " + what);
  };

  PathTable table;
  double horizon = 0.0;
  std::size_t n = 0;
  bool have_meta = false;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail("bad metadata token '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        try {
          if (key == "seed") table.seed = std::stoull(val);
          else if (key == "model") table.model = val;
          else if (key == "T") horizon = parse_double(val);
          else if (key == "n") n = std::stoull(val);
          else fail("unknown metadata key '" + key + "'");
        } catch (const std::invalid_argument&) {
          fail("bad metadata value '" + kv + "'");
        }
      }
      have_meta = true;
      continue;
    }
    if (header.empty()) {
      header = split(line, ',');
      if (header.empty() || header[0] != "t") fail("header must start with 't'");
      table.labels.assign(header.begin() + 1, header.end());
      table.columns.resize(table.labels.size());
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) fail("expected " + std::to_string(header.size()) + " fields");
    try {
      for (std::size_t i = 1; i < cells.size(); ++i) table.columns[i - 1].push_back(parse_double(cells[i]));
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (!have_meta) throw std::runtime_error("path csv: missing '# seed=... model=... T=... n=...' line");
  if (header.empty()) throw std::runtime_error("path csv: missing header row");
  try {
    table.grid = TimeGrid(horizon, n);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("path csv: ") + e.what());
  }
  for (const auto& c : table.columns) {
    if (c.size() != table.grid.n_points()) {
      throw std::runtime_error("path csv: expected " + std::to_string(table.grid.n_points()) + " rows, got " +
                               std::to_string(c.size()));
    }
  }
  return table;
}

PathTable to_table(const RegressionPaths& paths, const std::string& model) {
  return PathTable{paths.grid(), paths.seed, model, {"L", "U", "Y"},
                   {paths.L.values, paths.U.values, paths.Y.values}};
}

PathTable to_table(const VolEnvPaths& paths, const std::string& model) {
  return PathTable{paths.grid(), paths.seed, model, {"B", "X", "Y"},
                   {paths.env.values, paths.X.values, paths.Y.values}};
}

RegressionPaths regression_from_table(const PathTable& table) {
  RegressionPaths p;
  p.seed = table.seed;
  p.L = SamplePath{table.grid, 1, table.column("L"), table.seed, "L"};
  p.U = SamplePath{table.grid, 1, table.column("U"), table.seed, "U"};
  p.Y = SamplePath{table.grid, 1, table.column("Y"), table.seed, "Y"};
  p.L.validate();
  p.U.validate();
  p.Y.validate();
  return p;
}

VolEnvPaths volatility_from_table(const PathTable& table) {
  VolEnvPaths p;
  p.seed = table.seed;
  p.env = SamplePath{table.grid, 1, table.column("B"), table.seed, "B"};
  p.X = SamplePath{table.grid, 1, table.column("X"), table.seed, "X"};
  p.Y = SamplePath{table.grid, 1, table.column("Y"), table.seed, "Y"};
  p.env.validate();
  p.X.validate();
  p.Y.validate();
  return p;
}

}  // namespace pqla
