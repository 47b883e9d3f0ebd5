#include "pmefb/scenario.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pmefb {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Reads the members of one JSON object and rejects whatever was not read.
class Reader {
public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    read(j_.at(key), join(path_, key), out);
  }

  Reader child(const char* key) {
    seen_.insert(key);
    return Reader(j_.at(key), join(path_, key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
  }

  static void read(const json& v, const std::string& key, double& out) {
    if (!v.is_number()) throw ConfigError(key, "expected a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& key, int& out) {
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, const std::string& key, std::uint64_t& out) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(key, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, const std::string& key, bool& out) {
    if (!v.is_boolean()) throw ConfigError(key, "expected true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& key, std::string& out) {
    if (!v.is_string()) throw ConfigError(key, "expected a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, const std::string& key, std::vector<double>& out) {
    if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }
  static void read(const json& v, const std::string& key, std::vector<std::string>& out) {
    if (!v.is_array()) throw ConfigError(key, "expected an array of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(key, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
  }
  static void read(const json& v, const std::string& key, Vec& out) {
    std::vector<double> xs;
    read(v, key, xs);
    if (xs.empty() || xs.size() > 2) throw ConfigError(key, "expected 1 or 2 coordinates");
    out = Vec::Map(xs.data(), Index(xs.size()));
  }
  static void read(const json& v, const std::string& key, std::optional<double>& out) {
    if (v.is_null()) {
      out.reset();
      return;
    }
    double x = 0.0;
    read(v, key, x);
    out = x;
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

const EnumName<DriftKind> kDriftKinds[] = {{DriftKind::constant, "constant"},
                                           {DriftKind::rotation, "rotation"},
                                           {DriftKind::shear, "shear"},
                                           {DriftKind::gradient_potential, "gradient_potential"}};
const EnumName<SourceKind> kSourceKinds[] = {
    {SourceKind::constant, "constant"}, {SourceKind::logistic, "logistic"}, {SourceKind::polynomial, "polynomial"}};
const EnumName<InitKind> kInitKinds[] = {{InitKind::barenblatt, "barenblatt"},
                                         {InitKind::smooth_bump, "smooth_bump"},
                                         {InitKind::patch, "patch"},
                                         {InitKind::annulus_plus_core, "annulus_plus_core"},
                                         {InitKind::custom_grid, "custom_grid"}};

template <typename E, std::size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <typename E, std::size_t N>
E enum_value(const EnumName<E> (&table)[N], const std::string& name, const std::string& key) {
  for (const auto& e : table)
    if (name == e.name) return e.value;
  std::string allowed;
  for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
  throw ConfigError(key, "unknown kind \"" + name + "\" (expected one of " + allowed + ")");
}

void require_dim(const Vec& v, int d, const std::string& key) {
  if (v.size() != d) throw ConfigError(key, "expected " + std::to_string(d) + " coordinates to match the domain");
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& diagnostic_names() {
  static const std::vector<std::string> names{"ab",          "monotonicity", "decay",       "avg_pressure",
                                              "expansion",   "convergence",  "covering",    "oscillation",
                                              "ordering"};
  return names;
}

bool DiagnosticSettings::has(const std::string& name) const {
  return std::find(selected.begin(), selected.end(), name) != selected.end();
}

Grid Scenario::grid() const { return Grid::over(model.domain, cells); }

ModelSpec Scenario::spec_for(const Exponent& m) const {
  ModelSpec s = model;
  s.m = m;
  return s;
}

std::vector<double> Scenario::save_times() const {
  std::vector<double> out;
  const double T = model.horizon;
  const double h = solver.frame_spacing;
  for (long k = 0;; ++k) {
    const double t = double(k) * h;
    if (t >= T - 1e-9 * h) break;
    out.push_back(t);
  }
  out.push_back(T);
  return out;
}

SolveConfig Scenario::solve_config() const {
  SolveConfig c;
  c.cfl_fraction = solver.cfl_fraction;
  c.max_dt = solver.max_dt;
  c.save_times = save_times();
  c.positivity_floor = solver.positivity_floor;
  c.margin_cells = solver.margin_cells;
  return c;
}

LimitConfig Scenario::limit_config() const {
  LimitConfig c;
  c.solve = solve_config();
  c.solve.max_dt = limit.max_dt;
  c.psor.omega = limit.omega;
  c.psor.tol_residual = limit.tol_residual;
  c.psor.max_sweeps = limit.max_sweeps;
  c.average_steps = limit.average_steps;
  return c;
}

double Scenario::eta0() const { return diagnostics.eta0 < 0.0 ? 0.1 * model.horizon : diagnostics.eta0; }

void Scenario::validate() {
  if (name.empty()) throw ConfigError("name", "must not be empty");
  std::sort(m_values.begin(), m_values.end());
  for (double m : m_values)
    if (!(m > 1.0) || !std::isfinite(m)) throw ConfigError("m_values", "every exponent must be finite and exceed 1");
  if (std::adjacent_find(m_values.begin(), m_values.end()) != m_values.end())
    throw ConfigError("m_values", "exponents must be distinct");
  if (m_values.empty() && !include_limit) throw ConfigError("m_values", "no runs requested");
  if (cells < 16) throw ConfigError("grid.cells", "need at least 16 cells per axis");
  const int d = model.dim();
  if (d != 1 && d != 2) throw ConfigError("domain", "dimension must be 1 or 2");
  require_dim(model.domain.upper, d, "domain.upper");
  for (int a = 0; a < d; ++a)
    if (std::abs(model.domain.extent(a) - model.domain.extent(0)) > 1e-12 * model.domain.extent(0))
      throw ConfigError("domain", "the domain must be a cube");
  require_dim(model.drift.center, d, "drift.center");
  require_dim(model.drift.vector, d, "drift.vector");
  require_dim(model.source.cx, d, "source.cx");
  require_dim(model.source.cxx, d, "source.cxx");
  require_dim(model.init.center, d, "init.center");
  const Source& f = model.source;
  if (f.kind == SourceKind::constant && (f.cp != 0.0 || f.ct != 0.0 || !f.cx.isZero() || !f.cxx.isZero()))
    throw ConfigError("source", "a constant source uses c0 only");
  if (f.kind == SourceKind::logistic && (f.cp != 1.0 || f.ct != 0.0 || !f.cx.isZero() || !f.cxx.isZero()))
    throw ConfigError("source", "a logistic source is c0 - p");
  if (model.init.kind == InitKind::custom_grid && model.init.values.size() != std::size_t(grid().size()))
    throw ConfigError("init.values", "custom data must have one value per cell");
  try {
    spec_for(Exponent(2.0)).validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("", e.what());
  }
  if (!(solver.frame_spacing > 0.0)) throw ConfigError("solver.frame_spacing", "must be positive");
  try {
    solve_config().validate(model.horizon);
  } catch (const InvalidArgument& e) {
    throw ConfigError("solver", e.what());
  }
  if (!(limit.omega > 0.0 && limit.omega < 2.0)) throw ConfigError("limit.omega", "must lie in (0, 2)");
  if (!(limit.tol_residual > 0.0)) throw ConfigError("limit.tol_residual", "must be positive");
  if (limit.max_sweeps < 1) throw ConfigError("limit.max_sweeps", "must be at least 1");
  if (!(limit.max_dt > 0.0)) throw ConfigError("limit.max_dt", "must be positive");
  if (limit.average_steps < 0) throw ConfigError("limit.average_steps", "must be non-negative");
  for (const auto& n : diagnostics.selected)
    if (std::find(diagnostic_names().begin(), diagnostic_names().end(), n) == diagnostic_names().end())
      throw ConfigError("diagnostics.selected", "unknown diagnostic \"" + n + "\"");
  auto positive_ladder = [](const std::vector<double>& v, const char* key) {
    for (double x : v)
      if (!(x > 0.0)) throw ConfigError(key, "entries must be positive");
  };
  positive_ladder(diagnostics.probe_radii_cells, "diagnostics.probe_radii_cells");
  positive_ladder(diagnostics.s_ladder, "diagnostics.s_ladder");
  positive_ladder(diagnostics.tau_ladder, "diagnostics.tau_ladder");
  positive_ladder(diagnostics.covering_radii_cells, "diagnostics.covering_radii_cells");
  positive_ladder(diagnostics.oscillation_radii_cells, "diagnostics.oscillation_radii_cells");
  if (diagnostics.c_max < 1.0) throw ConfigError("diagnostics.c_max", "must be at least 1");
  if (diagnostics.ordering_checks < 1) throw ConfigError("diagnostics.ordering_checks", "must be at least 1");
  if (output.snapshot_stride < 0) throw ConfigError("output.snapshot_stride", "must be non-negative");
}

Scenario default_scenario(int dim) {
  if (dim != 1 && dim != 2) throw ConfigError("domain", "dimension must be 1 or 2");
  Scenario s;
  s.cells = dim == 1 ? 256 : 128;
  ModelSpec& m = s.model;
  m.domain = dim == 1 ? Box{make_vec(-2.0), make_vec(2.0)} : Box{make_vec(-2.0, -2.0), make_vec(2.0, 2.0)};
  m.drift = Drift::zero(dim);
  m.source = Source::constant(dim, 0.0);
  m.init.center = Vec::Zero(dim);
  m.horizon = 1.0;
  return s;
}

// ---------------------------------------------------------------------------

json scenario_to_json(const Scenario& s) {
  const ModelSpec& m = s.model;
  json j;
  j["name"] = s.name;
  j["m_values"] = s.m_values;
  j["include_limit"] = s.include_limit;
  j["horizon"] = m.horizon;
  j["domain"] = {{"lower", vec_json(m.domain.lower)}, {"upper", vec_json(m.domain.upper)}};
  j["drift"] = {{"kind", enum_name(kDriftKinds, m.drift.kind)},
                {"vector", vec_json(m.drift.vector)},
                {"center", vec_json(m.drift.center)},
                {"rate", m.drift.rate}};
  j["source"] = {{"kind", enum_name(kSourceKinds, m.source.kind)},
                 {"c0", m.source.c0},
                 {"cx", vec_json(m.source.cx)},
                 {"cxx", vec_json(m.source.cxx)},
                 {"ct", m.source.ct},
                 {"cp", m.source.cp}};
  j["init"] = {{"kind", enum_name(kInitKinds, m.init.kind)},
               {"center", vec_json(m.init.center)},
               {"radius", m.init.radius},
               {"gamma0", m.init.gamma0},
               {"varsigma0", m.init.varsigma0},
               {"barenblatt_time", m.init.barenblatt_time},
               {"barenblatt_constant", m.init.barenblatt_constant},
               {"barenblatt_front", m.init.barenblatt_front},
               {"mollify_cells", m.init.mollify_cells},
               {"values", m.init.values}};
  j["c_d"] = m.c_d;
  j["p_max_bound"] = m.p_max_bound ? json(*m.p_max_bound) : json(nullptr);
  j["grid"] = {{"cells", s.cells}};
  j["solver"] = {{"cfl_fraction", s.solver.cfl_fraction},
                 {"max_dt", s.solver.max_dt},
                 {"frame_spacing", s.solver.frame_spacing},
                 {"positivity_floor", s.solver.positivity_floor},
                 {"margin_cells", s.solver.margin_cells}};
  j["limit"] = {{"omega", s.limit.omega},
                {"tol_residual", s.limit.tol_residual},
                {"max_sweeps", s.limit.max_sweeps},
                {"max_dt", s.limit.max_dt},
                {"average_steps", s.limit.average_steps}};
  const DiagnosticSettings& d = s.diagnostics;
  j["diagnostics"] = {{"selected", d.selected},
                      {"eta0", d.eta0},
                      {"support_threshold", d.support_threshold},
                      {"ab_improved_floor", d.ab_improved_floor},
                      {"probe_radii_cells", d.probe_radii_cells},
                      {"probe_time", d.probe_time},
                      {"probe_slope_max", d.probe_slope_max},
                      {"s_ladder", d.s_ladder},
                      {"tau_ladder", d.tau_ladder},
                      {"expansion_constant", d.expansion_constant},
                      {"time_weight", d.time_weight},
                      {"proximity_radius_cells", d.proximity_radius_cells},
                      {"limit_distance_cells", d.limit_distance_cells},
                      {"covering_radii_cells", d.covering_radii_cells},
                      {"covering_time", d.covering_time},
                      {"dimension_slack", d.dimension_slack},
                      {"oscillation_radii_cells", d.oscillation_radii_cells},
                      {"c_max", d.c_max},
                      {"ordering_r0_cells", d.ordering_r0_cells},
                      {"ordering_checks", d.ordering_checks}};
  j["output"] = {{"dir", s.output.dir}, {"snapshot_stride", s.output.snapshot_stride}};
  j["seed"] = s.seed;
  return j;
}

Scenario scenario_from_json(const json& j) {
  Reader root(j, "");
  // The domain fixes the dimension that the remaining defaults take.
  int dim = 2;
  Box domain;
  if (root.has("domain")) {
    Reader r = root.child("domain");
    if (!j.at("domain").contains("lower")) throw ConfigError("domain.lower", "missing");
    if (!j.at("domain").contains("upper")) throw ConfigError("domain.upper", "missing");
    r.get("lower", domain.lower);
    r.get("upper", domain.upper);
    r.finish();
    dim = static_cast<int>(domain.lower.size());
  }
  Scenario s = default_scenario(dim);
  if (root.has("domain")) s.model.domain = domain;
  ModelSpec& m = s.model;

  root.get("name", s.name);
  root.get("m_values", s.m_values);
  root.get("include_limit", s.include_limit);
  root.get("horizon", m.horizon);
  root.get("c_d", m.c_d);
  root.get("p_max_bound", m.p_max_bound);
  root.get("seed", s.seed);

  if (root.has("drift")) {
    Reader r = root.child("drift");
    std::string kind = enum_name(kDriftKinds, m.drift.kind);
    r.get("kind", kind);
    m.drift.kind = enum_value(kDriftKinds, kind, "drift.kind");
    r.get("vector", m.drift.vector);
    r.get("center", m.drift.center);
    r.get("rate", m.drift.rate);
    r.finish();
  }
  if (root.has("source")) {
    Reader r = root.child("source");
    std::string kind = enum_name(kSourceKinds, m.source.kind);
    r.get("kind", kind);
    m.source.kind = enum_value(kSourceKinds, kind, "source.kind");
    if (m.source.kind == SourceKind::logistic) m.source.cp = 1.0;
    r.get("c0", m.source.c0);
    r.get("cx", m.source.cx);
    r.get("cxx", m.source.cxx);
    r.get("ct", m.source.ct);
    r.get("cp", m.source.cp);
    r.finish();
  }
  if (root.has("init")) {
    Reader r = root.child("init");
    std::string kind = enum_name(kInitKinds, m.init.kind);
    r.get("kind", kind);
    m.init.kind = enum_value(kInitKinds, kind, "init.kind");
    r.get("center", m.init.center);
    r.get("radius", m.init.radius);
    r.get("gamma0", m.init.gamma0);
    r.get("varsigma0", m.init.varsigma0);
    r.get("barenblatt_time", m.init.barenblatt_time);
    r.get("barenblatt_constant", m.init.barenblatt_constant);
    r.get("barenblatt_front", m.init.barenblatt_front);
    r.get("mollify_cells", m.init.mollify_cells);
    r.get("values", m.init.values);
    r.finish();
  }
  if (root.has("grid")) {
    Reader r = root.child("grid");
    r.get("cells", s.cells);
    r.finish();
  }
  if (root.has("solver")) {
    Reader r = root.child("solver");
    r.get("cfl_fraction", s.solver.cfl_fraction);
    r.get("max_dt", s.solver.max_dt);
    r.get("frame_spacing", s.solver.frame_spacing);
    r.get("positivity_floor", s.solver.positivity_floor);
    r.get("margin_cells", s.solver.margin_cells);
    r.finish();
  }
  if (root.has("limit")) {
    Reader r = root.child("limit");
    r.get("omega", s.limit.omega);
    r.get("tol_residual", s.limit.tol_residual);
    r.get("max_sweeps", s.limit.max_sweeps);
    r.get("max_dt", s.limit.max_dt);
    r.get("average_steps", s.limit.average_steps);
    r.finish();
  }
  if (root.has("diagnostics")) {
    Reader r = root.child("diagnostics");
    DiagnosticSettings& d = s.diagnostics;
    r.get("selected", d.selected);
    r.get("eta0", d.eta0);
    r.get("support_threshold", d.support_threshold);
    r.get("ab_improved_floor", d.ab_improved_floor);
    r.get("probe_radii_cells", d.probe_radii_cells);
    r.get("probe_time", d.probe_time);
    r.get("probe_slope_max", d.probe_slope_max);
    r.get("s_ladder", d.s_ladder);
    r.get("tau_ladder", d.tau_ladder);
    r.get("expansion_constant", d.expansion_constant);
    r.get("time_weight", d.time_weight);
    r.get("proximity_radius_cells", d.proximity_radius_cells);
    r.get("limit_distance_cells", d.limit_distance_cells);
    r.get("covering_radii_cells", d.covering_radii_cells);
    r.get("covering_time", d.covering_time);
    r.get("dimension_slack", d.dimension_slack);
    r.get("oscillation_radii_cells", d.oscillation_radii_cells);
    r.get("c_max", d.c_max);
    r.get("ordering_r0_cells", d.ordering_r0_cells);
    r.get("ordering_checks", d.ordering_checks);
    r.finish();
  }
  if (root.has("output")) {
    Reader r = root.child("output");
    r.get("dir", s.output.dir);
    r.get("snapshot_stride", s.output.snapshot_stride);
    r.finish();
  }
  root.finish();
  s.validate();
  return s;
}

std::string serialize(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(e.key(), path + ": " + (e.key().empty() ? std::string(e.what()) : std::string(e.what()).substr(e.key().size() + 2)));
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string scenario_hash(const Scenario& s) {
  json j = scenario_to_json(s);
  j["output"].erase("dir");
  return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Presets.

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"barenblatt",        "rotation_drift",      "r11_compatible",
                                              "subquadratic_bump", "interior_ball_patch", "annulus_core"};
  return names;
}

Scenario preset(const std::string& name) {
  if (name == "barenblatt") {
    Scenario s = default_scenario(1);
    s.name = name;
    s.m_values = {2, 5, 10, 20, 40, 80};
    s.model.horizon = 0.5;
    s.model.init.kind = InitKind::barenblatt;
    s.model.init.barenblatt_time = 0.5;
    s.model.init.barenblatt_front = 0.8;
    s.diagnostics.selected = {"ab", "monotonicity", "decay", "avg_pressure", "expansion", "oscillation"};
    // Cell quadrature of a ball a few cells wide biases the average upward by O(dx / r).
    s.diagnostics.probe_radii_cells = {4, 6, 8, 12, 16};
    s.validate();
    return s;
  }
  if (name == "rotation_drift") {
    Scenario s = default_scenario(2);
    s.name = name;
    s.m_values = {10, 20, 40, 80};
    s.include_limit = true;
    s.model.horizon = 0.5;
    s.model.drift = Drift::rotation(1.0, make_vec(0.0, 0.0));
    s.model.source = Source::constant(2, 1.0);
    s.model.init.kind = InitKind::smooth_bump;
    s.model.init.center = make_vec(0.5, 0.0);
    s.model.init.radius = 0.5;
    s.model.init.gamma0 = 0.125;
    s.model.init.varsigma0 = 1.0;
    s.diagnostics.selected = {"ab",          "monotonicity", "decay",    "avg_pressure",
                              "expansion",   "convergence",  "covering", "oscillation"};
    // The support is about one unit across, so the ladder stays below a quarter of it at 128^2.
    s.diagnostics.covering_radii_cells = {3, 4, 5, 6, 7};
    s.validate();
    return s;
  }
  if (name == "r11_compatible") {
    Scenario s = default_scenario(2);
    s.name = name;
    s.m_values = {10, 20, 40, 80};
    s.model.horizon = 0.5;
    s.model.domain = Box{make_vec(-1.5, -1.5), make_vec(1.5, 1.5)};
    s.model.source = Source::logistic(2, 2.0);
    s.model.init.kind = InitKind::smooth_bump;
    s.model.init.radius = 0.5;
    s.model.init.gamma0 = 0.2;
    s.model.init.varsigma0 = 1.0;
    s.diagnostics.selected = {"ab", "monotonicity", "decay", "expansion", "oscillation"};
    s.diagnostics.ab_improved_floor = true;
    s.diagnostics.eta0 = 0.0;
    s.diagnostics.tau_ladder = {0.2, 0.3, 0.4, 0.5};
    s.validate();
    return s;
  }
  if (name == "subquadratic_bump") {
    Scenario s = default_scenario(2);
    s.name = name;
    s.m_values = {10, 20, 40, 80};
    s.model.horizon = 0.5;
    s.model.source = Source::constant(2, 1.0);
    s.model.init.kind = InitKind::smooth_bump;
    s.model.init.radius = 0.5;
    s.model.init.gamma0 = 1.0;
    s.model.init.varsigma0 = 0.5;
    s.diagnostics.selected = {"ab", "monotonicity", "expansion", "oscillation"};
    s.diagnostics.tau_ladder = {0.2, 0.3, 0.4, 0.5};
    s.validate();
    return s;
  }
  if (name == "interior_ball_patch") {
    Scenario s = default_scenario(2);
    s.name = name;
    s.m_values = {10, 20, 40};
    s.model.horizon = 0.2;
    s.model.domain = Box{make_vec(-1.0, -1.0), make_vec(1.0, 1.0)};
    s.model.source = Source::constant(2, 1.0);
    s.model.init.kind = InitKind::patch;
    s.model.init.radius = 0.5;
    s.diagnostics.selected = {"ab", "monotonicity", "oscillation", "ordering"};
    s.validate();
    return s;
  }
  if (name == "annulus_core") {
    Scenario s = default_scenario(2);
    s.name = name;
    s.m_values = {80};
    s.include_limit = true;
    s.model.horizon = 0.05;
    s.model.domain = Box{make_vec(-3.0, -3.0), make_vec(3.0, 3.0)};
    s.model.source = Source::logistic(2, 2.0);
    s.model.init.kind = InitKind::annulus_plus_core;
    s.model.init.radius = 1.0;
    s.solver.frame_spacing = 0.005;
    s.diagnostics.selected = {"convergence"};
    s.diagnostics.eta0 = 0.01;
    s.diagnostics.support_threshold = 1e-100;
    s.diagnostics.limit_distance_cells = -1.0;
    s.validate();
    return s;
  }
  throw ConfigError("", "unknown preset \"" + name + "\"");
}

}  // namespace pmefb
