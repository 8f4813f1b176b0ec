#include "pqla/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "pqla/error.hpp"

namespace pqla {

namespace {

using nlohmann::json;

// Reads typed fields from one JSON object and rejects anything it did not read.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      node_ = &root.at(name_);
      if (!node_->is_object()) fail(name_, "must be an object");
    }
  }
  Section(const json* node, std::string name) : node_(node), name_(std::move(name)) {
    if (node_ && !node_->is_object()) fail(name_, "must be an object");
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    const json& v = node_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      target = v.get<T>();
    } catch (const std::exception& e) {
      fail(name_ + "." + key, e.what());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return node_ && node_->contains(key) ? &node_->at(key) : nullptr;
  }

  bool has(const std::string& key) const { return node_ && node_->contains(key); }

  void finish() const {
    if (!node_) return;
    for (const auto& item : node_->items()) {
      if (!seen_.count(item.key())) fail(name_ + "." + item.key(), "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: " + where + ": " + what);
  }

 private:
  const json* node_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

template <typename Fn>
auto convert(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    Section::fail(where, e.what());
  }
}

}  // namespace

CliConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ":" + line_column(text, e.byte) + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(source + ": top level must be an object");
  for (const auto& item : root.items()) {
    static const std::set<std::string> known{"model", "grid", "estimators", "experiment", "output"};
    if (!known.count(item.key())) Section::fail(item.key(), "unknown section");
  }

  CliConfig cfg;
  ExperimentConfig& e = cfg.experiment;

  Section model(root, "model");
  std::string kind = "regression";
  model.read("kind", kind);
  e.model.kind = convert("model.kind", [&] { return model_kind_from_string(kind); });
  model.read("dim", e.model.dim);
  model.read("theta_star", e.model.theta_star);
  model.read("ou_kappa", e.model.ou_kappa);
  model.read("ou_s", e.model.ou_s);
  model.read("slow_a", e.model.slow_a);
  model.read("x0", e.model.x0);
  model.read("explosion_guard", e.model.explosion_guard);
  model.finish();

  if (e.model.kind == ModelKind::kVolatility) {
    e.horizon = 1.0;
    e.estimators = {EstimatorKind::kQmle, EstimatorKind::kQbe};
  }

  Section grid(root, "grid");
  grid.read("horizon", e.horizon);
  grid.read("step", e.step);
  grid.read("n_obs", e.n_obs);
  grid.read("refine", e.refine);
  grid.read("qmle_points", e.qmle.grid_points);
  grid.read("qbe_points", e.qbe.grid_points);
  grid.finish();

  Section est(root, "estimators");
  if (est.has("kinds")) {
    std::vector<std::string> kinds;
    est.read("kinds", kinds);
    e.estimators.clear();
    for (const auto& k : kinds) {
      e.estimators.push_back(convert("estimators.kinds", [&] { return estimator_kind_from_string(k); }));
    }
  } else {
    est.child("kinds");
  }
  est.read("qmle_max_iterations", e.qmle.max_iterations);
  est.read("qbe_tolerance", e.qbe.relative_tolerance);
  est.read("qbe_max_refinements", e.qbe.max_refinements);
  est.read("linear_fast_path", e.linear_fast_path);
  est.finish();

  Section exp(root, "experiment");
  exp.read("reps", e.reps);
  exp.read("seed", e.seed);
  std::string conditioning = to_string(e.conditioning);
  exp.read("conditioning", conditioning);
  e.conditioning = convert("experiment.conditioning", [&] { return conditioning_from_string(conditioning); });
  if (exp.has("studentize")) {
    std::string s;
    exp.read("studentize", s);
    e.studentize = convert("experiment.studentize", [&] { return studentization_from_string(s); });
  } else {
    exp.child("studentize");
  }
  unsigned jobs = e.jobs;
  exp.read("jobs", jobs);
  e.jobs = jobs;
  exp.read("limit_mc", e.limit_mc);
  Section psi(exp.child("psi"), "experiment.psi");
  psi.read("enabled", e.compute_psi);
  psi.read("r_star", e.psi.r_star);
  psi.read("eps_star", e.psi.eps_star);
  psi.read("n_inner", e.psi.n_inner);
  psi.read("inner_step", e.psi.inner_step);
  psi.read("level", e.psi.level);
  psi.read("stationary_level", e.psi_stationary_level);
  psi.finish();
  exp.finish();

  Section out(root, "output");
  out.read("dir", cfg.output.dir);
  out.read("svg", cfg.output.svg);
  out.finish();

  try {
    e.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }
  return cfg;
}

CliConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

nlohmann::json to_json(const CliConfig& c) {
  const ExperimentConfig& e = c.experiment;
  json j;
  j["model"] = {{"kind", to_string(e.model.kind)},
                {"dim", e.model.dim},
                {"theta_star", e.model.theta_star},
                {"ou_kappa", e.model.ou_kappa},
                {"ou_s", e.model.ou_s},
                {"slow_a", e.model.slow_a},
                {"x0", e.model.x0},
                {"explosion_guard", e.model.explosion_guard}};
  j["grid"] = {{"horizon", e.horizon},
               {"step", e.step},
               {"n_obs", e.n_obs},
               {"refine", e.refine},
               {"qmle_points", e.qmle.grid_points},
               {"qbe_points", e.qbe.grid_points}};
  json kinds = json::array();
  for (auto k : e.estimators) kinds.push_back(to_string(k));
  j["estimators"] = {{"kinds", kinds},
                     {"qmle_max_iterations", e.qmle.max_iterations},
                     {"qbe_tolerance", e.qbe.relative_tolerance},
                     {"qbe_max_refinements", e.qbe.max_refinements},
                     {"linear_fast_path", e.linear_fast_path}};
  j["experiment"] = {{"reps", e.reps},
                     {"seed", e.seed},
                     {"conditioning", to_string(e.conditioning)},
                     {"studentize", to_string(e.studentization())},
                     {"limit_mc", e.limit_mc},
                     {"psi",
                      {{"enabled", e.compute_psi},
                       {"r_star", e.psi.r_star},
                       {"eps_star", e.psi.eps_star},
                       {"n_inner", e.psi.n_inner},
                       {"inner_step", e.psi.inner_step},
                       {"level", e.psi.level},
                       {"stationary_level", e.psi_stationary_level}}}};
  j["output"] = {{"dir", c.output.dir}, {"svg", c.output.svg}};
  return j;
}

}  // namespace pqla
