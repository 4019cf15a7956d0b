// mslab: matched Maxwell-Schroedinger / Pauli-Fierz runs from a JSON scenario.
//
//   mslab ms-run | pf-run | sweep | check  (--config PATH | --preset NAME) [--out DIR]
//         [--oracle none|dense] [--threads INT]
//   mslab preset NAME        print a built-in scenario as JSON
//
// Exit codes: 0 success, 1 invariant failure, 2 config error, 3 resource refusal.

#include <chrono>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "mslab/harness.hpp"

using namespace mslab;

namespace {

struct Common {
  std::string config_path;
  std::string preset;
  std::string out;
  std::string oracle = "none";
  int threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  auto* cfg = cmd->add_option("--config", c.config_path, "scenario JSON");
  auto* pre = cmd->add_option("--preset", c.preset, "built-in scenario");
  cfg->excludes(pre);
  cmd->add_option("--out", c.out, "output directory (default: the config's output)");
  cmd->add_option("--oracle", c.oracle, "dense expm cross-check")->check(CLI::IsMember({"none", "dense"}));
  cmd->add_option("--threads", c.threads, "sweep worker count")->check(CLI::PositiveNumber);
}

ScenarioConfig resolve(const Common& c) {
  if (c.config_path.empty() && c.preset.empty()) throw ConfigError("--config", "one of --config or --preset is required");
  ScenarioConfig cfg = c.config_path.empty() ? builtin_preset(c.preset) : load_config(c.config_path);
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

int report_failures(const std::vector<std::string>& failures, const std::string& label) {
  for (const auto& f : failures) std::cerr << label << ": " << f << '\n';
  return failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maxwell-Schroedinger / Pauli-Fierz mean-field comparison"};
  app.require_subcommand(1);
  Common common;
  auto* ms = app.add_subcommand("ms-run", "effective dynamics alone, with the conservation ledger");
  auto* pf = app.add_subcommand("pf-run", "many-body run against the co-integrated effective trajectory");
  auto* sweep = app.add_subcommand("sweep", "pf-run over the N list and log-log slopes at t_star");
  auto* check = app.add_subcommand("check", "invariant suite");
  for (auto* cmd : {ms, pf, sweep, check}) add_common(cmd, common);
  std::string preset_name;
  auto* preset = app.add_subcommand("preset", "print a built-in scenario");
  preset->add_option("name", preset_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (preset->parsed()) {
      std::cout << to_json_text(builtin_preset(preset_name));
      return 0;
    }
    const ScenarioConfig cfg = resolve(common);
    const Scenario scenario(cfg);
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    RunOptions opt;
    opt.dense_oracle = common.oracle == "dense";
    opt.threads = common.threads;
    opt.out_dir = cfg.output;

    if (ms->parsed()) {
      const auto r = run_ms(scenario, cfg.output);
      write_manifest(cfg.output, cfg, elapsed(), {"trajectory.csv", "alpha.csv", "ms_final.bin"});
      std::cout << "max relative energy drift " << format_double(r.max_energy_drift) << "\nmax norm drift "
                << format_double(r.max_norm_drift) << '\n';
      return 0;
    }
    if (pf->parsed()) {
      std::vector<std::string> files, failures;
      for (int n : cfg.n_values) {
        const std::string sub = "N" + std::to_string(n);
        RunOptions o = opt;
        o.out_dir = (std::filesystem::path(cfg.output) / sub).string();
        const auto r = run_pf(scenario, n, o);
        for (const char* f : {"trajectory.csv", "summary.csv", "pf_final.bin", "ms_final.bin"})
          files.push_back(sub + "/" + f);
        for (const auto& f : r.failures) failures.push_back(sub + ": " + f);
        std::cout << sub << ": dimension " << r.dimension << ", max beta_c drift " << format_double(r.max_beta_c_drift);
        if (r.oracle_discrepancy >= 0) std::cout << ", oracle discrepancy " << format_double(r.oracle_discrepancy);
        else if (opt.dense_oracle) std::cout << ", oracle skipped (dimension > 2000)";
        std::cout << '\n';
      }
      write_manifest(cfg.output, cfg, elapsed(), files);
      return report_failures(failures, "pf-run");
    }
    if (sweep->parsed()) {
      const auto r = run_sweep(scenario, opt);
      std::vector<std::string> files{"sweep.csv", "slopes.csv"}, failures;
      for (const auto& run : r.runs) {
        const std::string sub = "N" + std::to_string(run.n_particles);
        for (const char* f : {"trajectory.csv", "summary.csv", "pf_final.bin", "ms_final.bin"})
          files.push_back(sub + "/" + f);
        for (const auto& f : run.failures) failures.push_back(sub + ": " + f);
      }
      write_manifest(cfg.output, cfg, elapsed(), files);
      for (const auto& s : r.slopes)
        std::cout << s.quantity << ": "
                  << (s.defined ? format_double(s.slope) + " +- " + format_double(s.uncertainty) : s.status) << '\n';
      return report_failures(failures, "sweep");
    }
    const auto lines = run_check(scenario);
    std::cout << format_check_table(lines);
    for (const auto& l : lines)
      if (!l.pass) return 1;
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "resource refusal: " << e.what() << '\n';
    return 3;
  } catch (const TruncationError& e) {
    std::cerr << "truncation refusal: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
