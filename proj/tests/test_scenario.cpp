#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "pmefb/geometry.hpp"
#include "pmefb/harness.hpp"
#include "pmefb/scenario.hpp"

using namespace pmefb;
namespace fs = std::filesystem;

namespace {

std::string config_key(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pmefb_test_" + name);
  fs::remove_all(p);
  return p;
}

Scenario tiny(const std::string& out) {
  Scenario s = default_scenario(2);
  s.name = "tiny";
  s.cells = 32;
  s.m_values = {3.0, 5.0};
  s.model.horizon = 0.04;
  s.solver.frame_spacing = 0.01;
  s.output.dir = out;
  s.output.snapshot_stride = 2;
  s.validate();
  return s;
}

// scenario.json records the output directory, so it is left out.
std::map<std::string, std::string> digests(const RunManifest& m) {
  std::map<std::string, std::string> out;
  for (const auto& f : m.files)
    if (f.path != "scenario.json") out[f.path] = f.sha256;
  return out;
}

}  // namespace

TEST_CASE("minimal file takes the defaults") {
  const Scenario s = parse_scenario(R"({"name": "tiny"})");
  Scenario expect = default_scenario(2);
  expect.name = "tiny";
  expect.validate();
  CHECK(s == expect);
  CHECK(s.cells == 128);
  CHECK(s.eta0() == doctest::Approx(0.1 * s.model.horizon));
  const auto times = s.save_times();
  CHECK(times.front() == 0.0);
  CHECK(times.back() == s.model.horizon);
  CHECK(times.size() == 101);
}

TEST_CASE("exponents are sorted and checked") {
  const Scenario s = parse_scenario(R"({"m_values": [80, 10]})");
  CHECK(s.m_values == std::vector<double>{10.0, 80.0});
  CHECK(config_key(R"({"m_values": [10, 10]})") == "m_values");
  CHECK(config_key(R"({"m_values": [1]})") == "m_values");
}

TEST_CASE("errors name the offending key") {
  CHECK(config_key(R"({"drift": {"kindd": "rotation"}})") == "drift.kindd");
  CHECK(config_key(R"({"drift": {"kind": "swirl"}})") == "drift.kind");
  CHECK(config_key(R"({"grid": {"cells": "many"}})") == "grid.cells");
  CHECK(config_key(R"({"grid": {"cells": 8}})") == "grid.cells");
  CHECK(config_key(R"({"diagnostics": {"selected": ["ab", "nope"]}})") == "diagnostics.selected");
  CHECK(config_key(R"({"limit": {"omega": 2.5}})") == "limit.omega");
  CHECK_THROWS_WITH_AS(parse_scenario("{\"name\": "), doctest::Contains("malformed JSON"), ConfigError);
}

TEST_CASE("serialization round-trips") {
  for (const auto& name : preset_names()) {
    const Scenario s = preset(name);
    CHECK(parse_scenario(serialize(s)) == s);
    CHECK(serialize(parse_scenario(serialize(s))) == serialize(s));
  }
  const fs::path dir = scratch("load");
  fs::create_directories(dir);
  const fs::path file = dir / "s.json";
  std::ofstream(file) << serialize(preset("rotation_drift"));
  CHECK(load_scenario(file.string()) == preset("rotation_drift"));
  CHECK_THROWS_AS(load_scenario((dir / "missing.json").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("the hash ignores the output directory") {
  Scenario a = preset("barenblatt");
  Scenario b = a;
  b.output.dir = "/elsewhere";
  CHECK(scenario_hash(a) == scenario_hash(b));
  CHECK(scenario_hash(a).size() == 64);
  b.model.horizon = 0.25;
  CHECK(scenario_hash(a) != scenario_hash(b));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("presets") {
  CHECK(preset_names().size() == 6);
  CHECK_THROWS_AS(preset("nothing"), ConfigError);
  for (const auto& name : preset_names()) {
    Scenario s = preset(name);
    CHECK_NOTHROW(s.validate());
    for (const auto& row : audit_scenario(s)) CHECK_MESSAGE(row.supported, name << " " << row.label);
  }

  // Barenblatt: b = 0, f = 0 is accepted through the autonomous waiver.
  for (const auto& row : audit_scenario(preset("barenblatt"))) {
    CHECK(row.report.sigma == 0.0);
    CHECK(std::isfinite(row.c0));
  }

  const Scenario ann = preset("annulus_core");
  const Grid g = ann.grid();
  const Field rho = initial_density(ann.spec_for(Exponent::infinite()), g);
  for (Index k = 0; k < g.size(); ++k) {
    const double r = g.center(k).norm();
    const double expect = r <= 1.0 ? 0.5 + 0.5 * r * r : (r < 2.0 ? 1.0 : 0.0);
    CHECK(rho[k] == doctest::Approx(expect));
  }

  const Scenario sub = preset("subquadratic_bump");
  const ModelSpec spec = sub.spec_for(Exponent(sub.m_values.front()));
  CHECK(satisfies_subquadratic_growth(initial_pressure(spec, sub.grid()), 1.0, 0.5));

  const Scenario r11 = preset("r11_compatible");
  for (const auto& row : audit_scenario(r11)) CHECK(row.report.r11_margin >= 0.0);
}

TEST_CASE("a small sweep writes a complete, reproducible directory") {
  const fs::path out_a = scratch("run_a"), out_b = scratch("run_b");
  const Scenario a = tiny(out_a.string());
  const RunManifest ma = run_scenario(a, RunOptions{1, nullptr});
  CHECK(ma.pass());
  CHECK(ma.runs.size() == 2);
  CHECK(ma.scenario_hash == scenario_hash(a));
  const fs::path dir = out_a / scenario_hash(a).substr(0, 16);
  CHECK(fs::path(ma.directory) == dir);
  for (const char* f : {"manifest.json", "scenario.json", "reports/audit.json", "runs/m3/supports.json",
                        "runs/m3/frontier.csv", "runs/m5/rho_0000.bin", "runs/m5/p_0004.bin"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK(verify_inventory(dir.string(), ma).empty());
  CHECK(read_manifest(dir.string()).to_json() == ma.to_json());
  CHECK(load_scenario((dir / "scenario.json").string()) == a);

  // Tampering is reported.
  std::ofstream(dir / "runs/m3/frontier.csv", std::ios::app) << "x\n";
  std::ofstream(dir / "stray.txt") << "y\n";
  CHECK(verify_inventory(dir.string(), ma).size() == 2);

  Scenario b = a;
  b.output.dir = out_b.string();
  const RunManifest mb = run_scenario(b, RunOptions{2, nullptr});
  CHECK(digests(ma) == digests(mb));
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("unsupported regimes are refused before running") {
  Scenario s = tiny(scratch("refused").string());
  s.model.source = Source::constant(2, -1.0);
  CHECK_THROWS_AS(run_scenario(s), UnsupportedRegime);
  CHECK_FALSE(fs::exists(scratch("refused")));
}
