// Command-line front end: audit, run, preset and report verbs over scenario files.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "pmefb/harness.hpp"

using namespace pmefb;

namespace {

struct Overrides {
  int grid = 0;
  double horizon = -1.0;
  std::string out;
  int jobs = 0;
  long long seed = -1;
};

// A scenario argument is a file path, or a preset name when no such file exists.
Scenario resolve(const std::string& arg, const Overrides& o) {
  Scenario s;
  if (std::filesystem::exists(arg)) {
    s = load_scenario(arg);
  } else {
    const auto& names = preset_names();
    if (std::find(names.begin(), names.end(), arg) == names.end())
      throw ConfigError("", "no scenario file or preset named \"" + arg + "\"");
    s = preset(arg);
  }
  if (o.grid > 0) s.cells = o.grid;
  if (o.horizon > 0.0) s.model.horizon = o.horizon;
  if (!o.out.empty()) s.output.dir = o.out;
  if (o.seed >= 0) s.seed = std::uint64_t(o.seed);
  s.validate();
  return s;
}

int do_audit(const Scenario& s) {
  const auto rows = audit_scenario(s);
  bool ok = true;
  std::printf("%-8s %-10s %12s %12s %12s %12s  %s\n", "run", "status", "sigma", "sigma_t", "p_max", "C0", "note");
  for (const auto& r : rows) {
    std::printf("%-8s %-10s %12.5g %12.5g %12.5g %12.5g  %s\n", r.label.c_str(), r.supported ? "ok" : "UNSUPPORTED",
                r.report.sigma, r.report.sigma_tilde, r.report.p_max, r.c0, r.note.c_str());
    ok = ok && r.supported;
  }
  if (s.include_limit) std::printf("%-8s %-10s\n", "inf", "n/a");
  return ok ? 0 : 1;
}

int do_run(const Scenario& s, int jobs) {
  RunOptions opts;
  opts.jobs = jobs;
  opts.log = &std::cerr;
  const RunManifest man = run_scenario(s, opts);
  std::cout << man.directory << "\n";
  for (const auto& d : man.diagnostics) std::cout << (d.pass ? "PASS " : "FAIL ") << d.name << ": " << d.summary << "\n";
  for (const auto& r : man.runs)
    if (!r.ok) std::cout << "FAIL run " << r.label << ": " << r.error << "\n";
  return man.pass() ? 0 : 1;
}

int do_report(const std::string& dir) {
  const RunManifest man = read_manifest(dir);
  const auto bad = verify_inventory(dir, man);
  std::cout << "scenario " << man.scenario_name << " (" << man.scenario_hash.substr(0, 16) << "), version "
            << man.version << "\n";
  for (const auto& r : man.runs)
    std::cout << "  run " << r.label << ": " << (r.ok ? "ok" : "failed: " + r.error) << ", " << r.snapshots
              << " snapshots, " << r.seconds << " s\n";
  for (const auto& d : man.diagnostics) std::cout << "  " << (d.pass ? "PASS " : "FAIL ") << d.name << ": " << d.summary << "\n";
  std::cout << "  " << man.files.size() << " files listed";
  if (bad.empty()) {
    std::cout << ", all digests match\n";
  } else {
    std::cout << ", " << bad.size() << " problems:\n";
    for (const auto& b : bad) std::cout << "    " << b << "\n";
  }
  return bad.empty() && man.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Porous-medium free-boundary experiments"};
  app.require_subcommand(1);
  Overrides o;
  auto add_overrides = [&o](CLI::App* cmd) {
    cmd->add_option("--grid", o.grid, "Cells per axis")->check(CLI::PositiveNumber);
    cmd->add_option("--horizon", o.horizon, "Final time")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--jobs", o.jobs, "Concurrent runs (0: one per hardware thread)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", o.seed, "Seed recorded with the scenario")->check(CLI::NonNegativeNumber);
  };

  std::string scenario_arg;
  auto* audit = app.add_subcommand("audit", "Check the structural assumptions of a scenario");
  audit->add_option("scenario", scenario_arg, "Scenario file or preset name")->required();
  add_overrides(audit);

  auto* run = app.add_subcommand("run", "Run a scenario and its diagnostics");
  run->add_option("scenario", scenario_arg, "Scenario file or preset name")->required();
  add_overrides(run);

  auto* pre = app.add_subcommand("preset", "List or print presets");
  pre->require_subcommand(1);
  pre->add_subcommand("list", "Preset names");
  std::string preset_name;
  auto* show = pre->add_subcommand("show", "Print a preset as a scenario file");
  show->add_option("name", preset_name)->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize an output directory and verify its digests");
  report->add_option("dir", report_dir)->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (audit->parsed()) return do_audit(resolve(scenario_arg, o));
    if (run->parsed()) return do_run(resolve(scenario_arg, o), o.jobs);
    if (pre->parsed()) {
      if (show->parsed()) {
        std::cout << serialize(preset(preset_name));
      } else {
        for (const auto& n : preset_names()) std::cout << n << "\n";
      }
      return 0;
    }
    if (report->parsed()) return do_report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
