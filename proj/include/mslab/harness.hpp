#pragma once

// Scenario configuration, matched MS/PF runs, N-sweeps, the invariant suite
// and run manifests. Every run owns its output directory; nothing mutable is
// shared between runs of a sweep.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mslab/beta_diagnostics.hpp"
#include "mslab/ms_solver.hpp"
#include "mslab/pauli_fierz.hpp"

namespace mslab {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct PhiSpec {
  std::string preset = "gaussian_packet";  ///< gaussian_packet | plane_wave | ground_state_iterate
  Vec3 center{0.0, 0.0, 0.0};
  double width = 1.0;
  Vec3 momentum{0.0, 0.0, 0.0};
};

struct AlphaSpec {
  std::string preset = "zero";  ///< zero | constant | list
  Complex value{0.0, 0.0};
  std::vector<Complex> values;
};

struct Tolerances {
  double coherent_tail = 1e-8;
  double krylov = 1e-12;
  double weyl_tail = 1e-10;
  double beta_c_drift = 1e-9;
  double oracle = 1e-9;
};

struct ScenarioConfig {
  std::string name = "scenario";
  DiscretizationConfig grid;
  ChargeKind charge_kind = ChargeKind::none;
  ChargeParams charge;
  PotentialKind potential_kind = PotentialKind::zero;
  PotentialParams potential;
  PhiSpec phi;
  AlphaSpec alpha;
  std::vector<int> n_values{1};
  int n_max = 2;
  double t_final = 1.0;
  double dt = 0.01;
  int sample_stride = 10;
  double t_star = 0.5;
  Tolerances tolerances;
  std::size_t max_dimension = 4000000;
  std::string output = "out";
  std::uint64_t seed = 1;

  std::size_t n_steps() const;
};

/// Parses and validates a JSON document. Unknown keys, wrong types and
/// out-of-range values throw ConfigError naming the key.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);
/// Fully resolved document; parse_config(to_json_text(c)) reproduces c.
std::string to_json_text(const ScenarioConfig& config);

/// decoupled | toy-1d | tiny-3d | sweep-1d | sweep-decoupled | free-field | regression-3d
ScenarioConfig builtin_preset(const std::string& name);
std::vector<std::string> builtin_preset_names();

std::uint64_t fnv1a(std::string_view bytes);

/// The single grid, charge and potential shared by every solver of a run.
class Scenario {
 public:
  explicit Scenario(const ScenarioConfig& config);
  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;

  const ScenarioConfig& config() const { return config_; }
  const ModelGrid& grid() const { return grid_; }
  const ChargeDistribution& kappa() const { return kappa_; }
  const PairPotential& potential() const { return potential_; }
  const EffectiveState& initial() const { return initial_; }
  MsContext context() const { return {&grid_, &kappa_, &potential_}; }

  /// Throws ResourceError before allocating anything above the budget.
  std::unique_ptr<PauliFierzSystem> make_system(int n_particles) const;
  std::size_t system_dimension(int n_particles) const;

 private:
  ScenarioConfig config_;
  ModelGrid grid_;
  ChargeDistribution kappa_;
  PairPotential potential_;
  EffectiveState initial_;
};

struct MsRunResult {
  std::vector<ConservationLedger> ledger;
  std::vector<EffectiveState> samples;
  double max_energy_drift = 0.0;  ///< relative
  double max_norm_drift = 0.0;
};

/// Writes trajectory.csv, alpha.csv and ms_final.bin when `out_dir` is non-empty.
/// Throws StabilityError on a non-finite state.
MsRunResult run_ms(const Scenario& scenario, const std::string& out_dir);

struct RunOptions {
  bool dense_oracle = false;
  std::string out_dir;  ///< empty: no files
  int threads = 1;
};

struct PfRunResult {
  int n_particles = 0;
  std::size_t dimension = 0;
  std::vector<BetaReport> reports;
  std::vector<double> db_residual_a, db_residual_b;
  double max_beta_c_drift = 0.0;
  double max_sandwich_violation = 0.0;  ///< > 0 means the inequality failed somewhere
  double oracle_discrepancy = -1.0;     ///< -1 when no dense oracle ran
  GronwallFit gronwall;                 ///< on beta_a + beta_b + beta_c
  SqrtEnvelopeFit photon_envelope;      ///< on |N^1/2 Psi_t| - |N^1/2 Psi_0|
  std::vector<std::string> failures;
};

/// Evolves phi^{(x)N} (x) W(sqrt(N) alpha) Omega by Krylov steps of sample_stride * dt
/// next to the MS trajectory. Writes trajectory.csv, summary.csv, pf_final.bin, ms_final.bin.
PfRunResult run_pf(const Scenario& scenario, int n_particles, const RunOptions& options);

struct SlopeFit {
  std::string quantity;
  double slope = 0.0;
  double uncertainty = 0.0;
  bool defined = false;
  std::string status;
};

struct SweepResult {
  std::vector<PfRunResult> runs;  ///< in the order of n_values
  std::size_t star_index = 0;     ///< sample index of t*
  std::vector<SlopeFit> slopes;   ///< beta_b, trace_dist_particle, beta_a, trace_dist_photon
};

/// Least-squares slope of log y against log x with its standard error.
/// Undefined if any y is at or below `floor`.
SlopeFit loglog_slope(const std::string& quantity, const std::vector<double>& x, const std::vector<double>& y,
                      double floor = 1e-9);

/// Runs every N with a bounded worker pool (N-directories under out_dir) and
/// writes sweep.csv and slopes.csv. Refuses (ConfigError) with fewer than 3 N values.
SweepResult run_sweep(const Scenario& scenario, const RunOptions& options);

struct CheckLine {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// CCR, hermiticity, sandwich, Parseval, auxiliary identity, derivative residuals,
/// dual-path beta_b and beta_c invariance on the first N of the scenario.
std::vector<CheckLine> run_check(const Scenario& scenario);
std::string format_check_table(const std::vector<CheckLine>& lines);

/// Writes resolved_config.json and manifest.json (hash of the resolved config,
/// version, wall-clock seconds, FNV-1a of every listed file).
void write_manifest(const std::string& out_dir, const ScenarioConfig& config, double wall_seconds,
                    const std::vector<std::string>& files);

}  // namespace mslab
