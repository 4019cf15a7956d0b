#include "mslab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mslab/krylov.hpp"

namespace mslab {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so that the rest
// can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }
  bool has(const std::string& name) {
    seen_.insert(name);
    return j_.contains(name);
  }
  const json& at(const std::string& name) {
    seen_.insert(name);
    return j_.at(name);
  }

  double number(const std::string& name, double fallback) {
    if (!has(name)) return fallback;
    const json& v = j_.at(name);
    if (!v.is_number()) throw ConfigError(key(name), "expected a number");
    return v.get<double>();
  }
  long long integer(const std::string& name, long long fallback) {
    if (!has(name)) return fallback;
    const json& v = j_.at(name);
    if (!v.is_number_integer()) throw ConfigError(key(name), "expected an integer");
    return v.get<long long>();
  }
  std::string text(const std::string& name, const std::string& fallback) {
    if (!has(name)) return fallback;
    const json& v = j_.at(name);
    if (!v.is_string()) throw ConfigError(key(name), "expected a string");
    return v.get<std::string>();
  }
  Vec3 vec3(const std::string& name, Vec3 fallback) {
    if (!has(name)) return fallback;
    const json& v = j_.at(name);
    if (!v.is_array() || v.empty() || v.size() > 3) throw ConfigError(key(name), "expected an array of 1 to 3 numbers");
    Vec3 out{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(key(name), "expected an array of 1 to 3 numbers");
      out[i] = v[i].get<double>();
    }
    return out;
  }
  std::vector<double> numbers(const std::string& name) {
    std::vector<double> out;
    if (!has(name)) return out;
    const json& v = j_.at(name);
    if (!v.is_array()) throw ConfigError(key(name), "expected an array of numbers");
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(key(name), "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Complex parse_complex(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(key, "expected [re, im]");
  return {v[0].get<double>(), v[1].get<double>()};
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

json vec3_json(const Vec3& v, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(v[i]);
  return a;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void csv_row(std::ostream& out, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) out << ',';
    out << format_double(v);
    first = false;
  }
  out << '\n';
}

double sandwich_violation(double beta_a, double trace_dist) {
  return std::max(beta_a - trace_dist, trace_dist - std::sqrt(8.0 * beta_a) - 1e-10);
}

// Central differences at interior samples, second-order one-sided at the ends.
std::vector<double> sample_derivative(const std::vector<double>& b, double h) {
  const std::size_t n = b.size();
  std::vector<double> d(n, std::nan(""));
  if (n < 3) return d;
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (b[k + 1] - b[k - 1]) / (2 * h);
  d[0] = (-3 * b[0] + 4 * b[1] - b[2]) / (2 * h);
  d[n - 1] = (3 * b[n - 1] - 4 * b[n - 2] + b[n - 3]) / (2 * h);
  return d;
}

ManyBodyState wrap(const PauliFierzSystem& sys, const Eigen::VectorXcd& psi, double t = 0.0) {
  ManyBodyState st;
  st.n_particles = sys.n_particles();
  st.particle_dim = sys.particle_dim();
  st.fock_dim = sys.fock_dim();
  st.amplitudes = psi;
  st.time = t;
  return st;
}

}  // namespace

std::size_t ScenarioConfig::n_steps() const { return static_cast<std::size_t>(std::llround(t_final / dt)); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ScenarioConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  ScenarioConfig c;
  Section root(doc, "");
  c.name = root.text("name", c.name);

  require(root.has("grid"), "grid", "missing");
  {
    Section g(root.at("grid"), "grid");
    c.grid.dim = static_cast<int>(g.integer("dim", c.grid.dim));
    c.grid.sites_per_dim = static_cast<int>(g.integer("sites", c.grid.sites_per_dim));
    c.grid.box_length = g.number("box", c.grid.box_length);
    c.grid.k_max = g.number("k_max", c.grid.k_max);
    g.finish();
    require(c.grid.dim == 1 || c.grid.dim == 3, "grid.dim", "must be 1 or 3");
    require(c.grid.sites_per_dim >= 2, "grid.sites", "must be at least 2");
    require(c.grid.box_length > 0, "grid.box", "must be positive");
    require(c.grid.k_max > 0, "grid.k_max", "must be positive");
  }
  if (root.has("charge")) {
    Section s(root.at("charge"), "charge");
    const std::string kind = s.text("kind", to_string(c.charge_kind));
    try {
      c.charge_kind = charge_kind_from_string(kind);
    } catch (const std::invalid_argument&) {
      throw ConfigError("charge.kind", "unknown kind '" + kind + "'");
    }
    c.charge.sigma = s.number("sigma", c.charge.sigma);
    c.charge.cutoff = s.number("cutoff", c.charge.cutoff);
    c.charge.charge = s.number("charge", c.charge.charge);
    c.charge.custom_values = s.numbers("values");
    s.finish();
    require(c.charge.sigma > 0, "charge.sigma", "must be positive");
    require(c.charge.cutoff > 0, "charge.cutoff", "must be positive");
    require(c.charge_kind != ChargeKind::custom || !c.charge.custom_values.empty(), "charge.values",
            "required for a custom charge");
  }
  if (root.has("potential")) {
    Section s(root.at("potential"), "potential");
    const std::string kind = s.text("kind", to_string(c.potential_kind));
    try {
      c.potential_kind = potential_kind_from_string(kind);
    } catch (const std::invalid_argument&) {
      throw ConfigError("potential.kind", "unknown kind '" + kind + "'");
    }
    c.potential.charge = s.number("charge", c.potential.charge);
    c.potential.softening = s.number("softening", c.potential.softening);
    c.potential.strength = s.number("strength", c.potential.strength);
    c.potential.width = s.number("width", c.potential.width);
    c.potential.custom_values = s.numbers("values");
    s.finish();
    require(c.potential.softening > 0, "potential.softening", "must be positive");
    require(c.potential.width > 0, "potential.width", "must be positive");
    require(c.potential_kind != PotentialKind::custom || !c.potential.custom_values.empty(), "potential.values",
            "required for a custom potential");
  }
  if (root.has("initial")) {
    Section init(root.at("initial"), "initial");
    if (init.has("phi")) {
      Section p(init.at("phi"), "initial.phi");
      c.phi.preset = p.text("preset", c.phi.preset);
      c.phi.center = p.vec3("center", c.phi.center);
      c.phi.width = p.number("width", c.phi.width);
      c.phi.momentum = p.vec3("momentum", c.phi.momentum);
      p.finish();
      require(c.phi.preset == "gaussian_packet" || c.phi.preset == "plane_wave" ||
                  c.phi.preset == "ground_state_iterate",
              "initial.phi.preset", "unknown preset '" + c.phi.preset + "'");
      require(c.phi.width > 0, "initial.phi.width", "must be positive");
    }
    if (init.has("alpha")) {
      Section a(init.at("alpha"), "initial.alpha");
      c.alpha.preset = a.text("preset", c.alpha.preset);
      if (a.has("value")) c.alpha.value = parse_complex(a.at("value"), "initial.alpha.value");
      if (a.has("values")) {
        const json& v = a.at("values");
        require(v.is_array(), "initial.alpha.values", "expected an array of [re, im]");
        for (const auto& z : v) c.alpha.values.push_back(parse_complex(z, "initial.alpha.values"));
      }
      a.finish();
      require(c.alpha.preset == "zero" || c.alpha.preset == "constant" || c.alpha.preset == "list",
              "initial.alpha.preset", "unknown preset '" + c.alpha.preset + "'");
      require(c.alpha.preset != "list" || !c.alpha.values.empty(), "initial.alpha.values", "required for 'list'");
    }
    init.finish();
  }
  if (root.has("N")) {
    const json& v = root.at("N");
    require(v.is_array() && !v.empty(), "N", "expected a non-empty array of integers");
    c.n_values.clear();
    for (const auto& n : v) {
      require(n.is_number_integer() && n.get<long long>() >= 1, "N", "entries must be integers >= 1");
      c.n_values.push_back(static_cast<int>(n.get<long long>()));
    }
  }
  c.n_max = static_cast<int>(root.integer("n_max", c.n_max));
  require(c.n_max >= 1 && c.n_max <= 200, "n_max", "must be in [1, 200]");
  c.t_final = root.number("t_final", c.t_final);
  c.dt = root.number("dt", c.dt);
  c.sample_stride = static_cast<int>(root.integer("sample_stride", c.sample_stride));
  c.t_star = root.number("t_star", c.t_star);
  require(c.t_final > 0, "t_final", "must be positive");
  require(c.dt > 0, "dt", "must be positive");
  require(std::abs(static_cast<double>(c.n_steps()) * c.dt - c.t_final) <= 1e-9 * c.t_final && c.n_steps() >= 1,
          "t_final", "must be a whole number of dt steps");
  require(c.sample_stride >= 1, "sample_stride", "must be at least 1");
  require(c.n_steps() % static_cast<std::size_t>(c.sample_stride) == 0, "sample_stride",
          "must divide the number of steps");
  require(c.t_star >= 0 && c.t_star <= c.t_final, "t_star", "must lie in [0, t_final]");
  if (root.has("tolerances")) {
    Section s(root.at("tolerances"), "tolerances");
    auto& t = c.tolerances;
    t.coherent_tail = s.number("coherent_tail", t.coherent_tail);
    t.krylov = s.number("krylov", t.krylov);
    t.weyl_tail = s.number("weyl_tail", t.weyl_tail);
    t.beta_c_drift = s.number("beta_c_drift", t.beta_c_drift);
    t.oracle = s.number("oracle", t.oracle);
    s.finish();
    for (auto [name, v] : {std::pair{"coherent_tail", t.coherent_tail}, {"krylov", t.krylov},
                           {"weyl_tail", t.weyl_tail}, {"beta_c_drift", t.beta_c_drift}, {"oracle", t.oracle}})
      require(v > 0, std::string("tolerances.") + name, "must be positive");
  }
  const long long budget = root.integer("max_dimension", static_cast<long long>(c.max_dimension));
  require(budget >= 1, "max_dimension", "must be positive");
  c.max_dimension = static_cast<std::size_t>(budget);
  c.output = root.text("output", c.output);
  const long long seed = root.integer("seed", static_cast<long long>(c.seed));
  require(seed >= 0, "seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  root.finish();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config(s.str());
}

std::string to_json_text(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["grid"] = {{"dim", c.grid.dim}, {"sites", c.grid.sites_per_dim}, {"box", c.grid.box_length}, {"k_max", c.grid.k_max}};
  j["charge"] = {{"kind", to_string(c.charge_kind)},
                 {"sigma", c.charge.sigma},
                 {"cutoff", c.charge.cutoff},
                 {"charge", c.charge.charge},
                 {"values", c.charge.custom_values}};
  j["potential"] = {{"kind", to_string(c.potential_kind)}, {"charge", c.potential.charge},
                    {"softening", c.potential.softening}, {"strength", c.potential.strength},
                    {"width", c.potential.width},         {"values", c.potential.custom_values}};
  json alpha = {{"preset", c.alpha.preset}, {"value", {c.alpha.value.real(), c.alpha.value.imag()}}};
  alpha["values"] = json::array();
  for (const auto& z : c.alpha.values) alpha["values"].push_back({z.real(), z.imag()});
  j["initial"] = {{"phi",
                   {{"preset", c.phi.preset},
                    {"center", vec3_json(c.phi.center, c.grid.dim)},
                    {"width", c.phi.width},
                    {"momentum", vec3_json(c.phi.momentum, c.grid.dim)}}},
                  {"alpha", alpha}};
  j["N"] = c.n_values;
  j["n_max"] = c.n_max;
  j["t_final"] = c.t_final;
  j["dt"] = c.dt;
  j["sample_stride"] = c.sample_stride;
  j["t_star"] = c.t_star;
  j["tolerances"] = {{"coherent_tail", c.tolerances.coherent_tail}, {"krylov", c.tolerances.krylov},
                     {"weyl_tail", c.tolerances.weyl_tail},         {"beta_c_drift", c.tolerances.beta_c_drift},
                     {"oracle", c.tolerances.oracle}};
  j["max_dimension"] = c.max_dimension;
  j["output"] = c.output;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

std::vector<std::string> builtin_preset_names() {
  return {"decoupled", "toy-1d", "tiny-3d", "sweep-1d", "sweep-decoupled", "free-field", "regression-3d"};
}

ScenarioConfig builtin_preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  auto toy_grid = [&] {
    c.grid = {1, 4, 2 * kPi, 1.0};
    c.charge_kind = ChargeKind::gaussian;
    c.charge.sigma = 0.5;
    c.charge.charge = 3.0;
    c.potential_kind = PotentialKind::softened_coulomb;
    c.potential.charge = 1.0;
    c.potential.softening = 0.7;
    c.phi = {"gaussian_packet", {2.0, 0, 0}, 0.9, {1.0, 0, 0}};
  };
  if (name == "decoupled") {
    c.grid = {1, 4, 2 * kPi, 1.0};
    c.phi = {"gaussian_packet", {2.0, 0, 0}, 0.9, {1.0, 0, 0}};
    c.alpha = {"constant", {0.05, 0.02}, {}};
    c.n_values = {1};
    c.n_max = 3;
    c.t_final = 0.5;
    c.dt = 0.001;
    c.sample_stride = 50;
    c.tolerances.coherent_tail = 1e-6;
  } else if (name == "toy-1d") {
    toy_grid();
    c.n_values = {2};
    c.n_max = 3;
    c.t_final = 1.0;
    c.dt = 0.001;
    c.sample_stride = 50;
  } else if (name == "sweep-1d") {
    toy_grid();
    c.n_values = {2, 4, 8};
    c.n_max = 8;
    c.t_final = 0.5;
    c.dt = 0.001;
    c.sample_stride = 50;
  } else if (name == "sweep-decoupled") {
    c.grid = {1, 4, 2 * kPi, 1.0};
    c.phi = {"gaussian_packet", {2.0, 0, 0}, 0.9, {1.0, 0, 0}};
    c.n_values = {2, 4, 8};
    c.n_max = 2;
    c.t_final = 0.5;
    c.dt = 0.001;
    c.sample_stride = 50;
  } else if (name == "tiny-3d") {
    c.grid = {3, 3, 2 * kPi, 1.0};
    c.charge_kind = ChargeKind::gaussian;
    c.charge.sigma = 0.7;
    c.charge.charge = 1.0;
    c.phi = {"gaussian_packet", {2.0, 2.0, 2.0}, 1.2, {1.0, 0.0, 0.0}};
    c.n_values = {1};
    c.n_max = 1;
    c.t_final = 0.2;
    c.dt = 0.005;
    c.sample_stride = 8;
  } else if (name == "free-field") {
    c.grid = {1, 8, 2 * kPi, 3.0};
    c.phi = {"plane_wave", {0, 0, 0}, 1.0, {1.0, 0, 0}};
    c.alpha = {"constant", {0.3, -0.2}, {}};
    c.t_final = 1.0;
    c.dt = 1e-3;
    c.sample_stride = 100;
  } else if (name == "regression-3d") {
    c.grid = {3, 4, 2 * kPi, 1.5};
    c.charge_kind = ChargeKind::gaussian;
    c.charge.sigma = 0.6;
    c.charge.charge = 1.0;
    c.potential_kind = PotentialKind::softened_coulomb;
    c.potential.charge = 1.0;
    c.potential.softening = 0.8;
    c.phi = {"gaussian_packet", {3.0, 3.0, 3.0}, 1.3, {1.0, 0.0, 0.0}};
    c.alpha = {"constant", {0.05, 0.02}, {}};
    c.t_final = 1.0;
    c.dt = 1e-3;
    c.sample_stride = 50;
  } else {
    throw ConfigError("--preset", "unknown preset '" + name + "'");
  }
  c.output = "out/" + name;
  c.t_star = std::min(0.5, c.t_final);
  return c;
}

Scenario::Scenario(const ScenarioConfig& config) : config_(config) {
  try {
    grid_ = build_grid(config.grid);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("grid", e.what());
  }
  if (grid_.n_modes() == 0) throw ConfigError("grid.k_max", "retains no photon modes");
  try {
    kappa_ = charge_preset(config.charge_kind, config.charge, grid_);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("charge", e.what());
  }
  try {
    potential_ = potential_preset(config.potential_kind, config.potential, grid_);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("potential", e.what());
  }

  const PhiSpec& p = config.phi;
  if (p.preset == "gaussian_packet")
    initial_.phi = normalized(gaussian_packet(grid_, p.center, p.width, p.momentum), grid_);
  else if (p.preset == "plane_wave")
    initial_.phi = plane_wave(grid_, p.momentum);
  else
    initial_.phi = ground_state_iterate(gaussian_packet(grid_, p.center, p.width, {0, 0, 0}), grid_, potential_);

  const std::size_t M = grid_.n_modes();
  const AlphaSpec& a = config.alpha;
  if (a.preset == "zero") {
    initial_.alpha = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(M));
  } else if (a.preset == "constant") {
    initial_.alpha = Eigen::VectorXcd::Constant(static_cast<Eigen::Index>(M), a.value);
  } else {
    if (a.values.size() != M)
      throw ConfigError("initial.alpha.values", "expected " + std::to_string(M) + " entries, got " +
                                                    std::to_string(a.values.size()));
    initial_.alpha = Eigen::Map<const Eigen::VectorXcd>(a.values.data(), static_cast<Eigen::Index>(M));
  }
}

std::size_t Scenario::system_dimension(int n_particles) const {
  const std::size_t P = ParticleBasis::count(n_particles, grid_.n_sites());
  const std::size_t F = FockTruncation{config_.n_max, grid_.n_modes()}.dimension();
  if (P == 0 || F == 0 || P > std::numeric_limits<std::size_t>::max() / F) return 0;
  return P * F;
}

std::unique_ptr<PauliFierzSystem> Scenario::make_system(int n_particles) const {
  const std::size_t dim = system_dimension(n_particles);
  if (dim == 0 || dim > config_.max_dimension)
    throw ResourceError("N = " + std::to_string(n_particles) + ": state dimension " +
                        (dim ? std::to_string(dim) : std::string("overflows")) + " exceeds max_dimension " +
                        std::to_string(config_.max_dimension));
  return std::make_unique<PauliFierzSystem>(grid_, kappa_, potential_, n_particles,
                                            FockTruncation{config_.n_max, grid_.n_modes()}, config_.max_dimension);
}

MsRunResult run_ms(const Scenario& scenario, const std::string& out_dir) {
  const auto& cfg = scenario.config();
  const auto ctx = scenario.context();
  MsRunResult r;
  const auto first = conservation_entry(scenario.initial(), ctx);
  auto on_sample = [&](const EffectiveState& s) {
    if (!s.phi.allFinite() || !s.alpha.allFinite())
      throw StabilityError("ms-run: non-finite state at t = " + format_double(s.time));
    auto e = conservation_entry(s, ctx);
    const double scale = std::abs(first.energy) > 0 ? std::abs(first.energy) : 1.0;
    r.max_energy_drift = std::max(r.max_energy_drift, std::abs(e.energy - first.energy) / scale);
    r.max_norm_drift = std::max(r.max_norm_drift, std::abs(e.l2_norm - first.l2_norm));
    r.ledger.push_back(e);
    r.samples.push_back(s);
  };
  const EffectiveState last =
      integrate(scenario.initial(), cfg.dt, cfg.n_steps(), static_cast<std::size_t>(cfg.sample_stride), ctx, on_sample);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto traj = open_out(fs::path(out_dir) / "trajectory.csv");
    traj << "t,energy,l2_norm,divA_residual,alpha_h_norm,alpha_h32_norm\n";
    for (const auto& e : r.ledger)
      csv_row(traj, {e.time, e.energy, e.l2_norm, e.divA_residual, e.alpha_h_norm, e.alpha_h32_norm});
    auto alpha = open_out(fs::path(out_dir) / "alpha.csv");
    alpha << "t,mode,re,im\n";
    for (const auto& s : r.samples)
      for (Eigen::Index m = 0; m < s.alpha.size(); ++m)
        alpha << format_double(s.time) << ',' << m << ',' << format_double(s.alpha(m).real()) << ','
              << format_double(s.alpha(m).imag()) << '\n';
    auto snap = open_out(fs::path(out_dir) / "ms_final.bin", std::ios::out | std::ios::binary);
    write_ms_snapshot(snap, last, scenario.grid());
  }
  return r;
}

PfRunResult run_pf(const Scenario& scenario, int n_particles, const RunOptions& options) {
  const auto& cfg = scenario.config();
  const auto ctx = scenario.context();
  const auto sys = scenario.make_system(n_particles);
  const auto H = sys->hamiltonian();

  PfRunResult r;
  r.n_particles = n_particles;
  r.dimension = sys->dimension();

  ManyBodyState st = product_initial_state(scenario.initial().phi, scenario.initial().alpha, *sys,
                                           cfg.tolerances.coherent_tail);
  const Eigen::VectorXcd psi0 = st.amplitudes;
  EffectiveState eff = scenario.initial();

  std::unique_ptr<DensePropagator> dense;
  if (options.dense_oracle && r.dimension <= 2000) {
    dense = std::make_unique<DensePropagator>(dense_matrix(H));
    r.oracle_discrepancy = 0.0;
  }

  const std::size_t stride = static_cast<std::size_t>(cfg.sample_stride);
  const std::size_t n_samples = cfg.n_steps() / stride + 1;
  const double spacing = cfg.dt * static_cast<double>(stride);
  KrylovOptions kopt;
  kopt.tolerance = cfg.tolerances.krylov;
  std::vector<double> integrand_a, integrand_b;

  for (std::size_t k = 0; k < n_samples; ++k) {
    const double t = static_cast<double>(k) * spacing;
    st.time = t;
    eff.time = t;
    if (!st.amplitudes.allFinite() || !eff.phi.allFinite())
      throw StabilityError("pf-run: non-finite state at t = " + format_double(t));
    BetaReport rep = beta_report(st, *sys, eff, ctx);
    r.reports.push_back(rep);
    integrand_a.push_back(beta_a_integrand(st.amplitudes, *sys, eff, ctx));
    integrand_b.push_back(beta_b_integrand(st.amplitudes, *sys, eff, ctx));
    if (dense)
      r.oracle_discrepancy =
          std::max(r.oracle_discrepancy, (dense->apply(psi0, t) - st.amplitudes).cwiseAbs().maxCoeff());
    if (k + 1 < n_samples) {
      st.amplitudes = evolve(st.amplitudes, H, spacing, kopt);
      eff = integrate(eff, cfg.dt, stride, 0, ctx);
    }
  }

  const BetaReport& r0 = r.reports.front();
  std::vector<double> times, ba, bb, total, growth, growth_times;
  for (auto& rep : r.reports) {
    rep.a_N = r0.beta_a;
    rep.b_N = r0.beta_b;
    rep.c_N = r0.beta_c;
    times.push_back(rep.time);
    ba.push_back(rep.beta_a);
    bb.push_back(rep.beta_b);
    total.push_back(rep.beta_a + rep.beta_b + rep.beta_c);
    r.max_beta_c_drift = std::max(r.max_beta_c_drift, std::abs(rep.beta_c - r0.beta_c));
    const double v = sandwich_violation(rep.beta_a, rep.trace_dist_particle);
    r.max_sandwich_violation = rep.time == r0.time ? v : std::max(r.max_sandwich_violation, v);
    if (rep.time <= 1.0 + 1e-12) {
      growth_times.push_back(rep.time);
      growth.push_back(rep.photon_number_root - r0.photon_number_root);
    }
  }
  const auto da = sample_derivative(ba, spacing), db = sample_derivative(bb, spacing);
  for (std::size_t k = 0; k < n_samples; ++k) {
    r.db_residual_a.push_back(std::abs(da[k] - integrand_a[k]));
    r.db_residual_b.push_back(std::abs(db[k] - integrand_b[k]));
  }
  r.gronwall = gronwall_envelope_check(times, total, n_particles);
  if (growth.size() >= 2) r.photon_envelope = sqrt_envelope_fit(growth_times, growth);

  if (r.max_beta_c_drift > cfg.tolerances.beta_c_drift)
    r.failures.push_back("beta_c drift " + format_double(r.max_beta_c_drift));
  if (r.max_sandwich_violation > 0)
    r.failures.push_back("sandwich inequality violated by " + format_double(r.max_sandwich_violation));
  if (r.oracle_discrepancy > cfg.tolerances.oracle)
    r.failures.push_back("dense oracle discrepancy " + format_double(r.oracle_discrepancy));

  if (!options.out_dir.empty()) {
    const fs::path dir(options.out_dir);
    fs::create_directories(dir);
    auto out = open_out(dir / "trajectory.csv");
    out << "t,beta_a,beta_b,beta_c,trace_dist_particle,trace_dist_photon,energy_mb,energy_ms,photon_number,"
           "source_norm,db_residual_a,db_residual_b,parseval_residual\n";
    for (std::size_t k = 0; k < n_samples; ++k) {
      const auto& e = r.reports[k];
      csv_row(out, {e.time, e.beta_a, e.beta_b, e.beta_c, e.trace_dist_particle, e.trace_dist_photon,
                    e.energy_many_body, e.energy_effective, e.photon_number, e.source_norm, r.db_residual_a[k],
                    r.db_residual_b[k], e.parseval_residual});
    }
    auto sum = open_out(dir / "summary.csv");
    sum << "key,value\n";
    sum << "N," << n_particles << '\n';
    sum << "dimension," << r.dimension << '\n';
    sum << "a_N," << format_double(r0.beta_a) << "\nb_N," << format_double(r0.beta_b) << "\nc_N,"
        << format_double(r0.beta_c) << '\n';
    sum << "max_beta_c_drift," << format_double(r.max_beta_c_drift) << '\n';
    sum << "max_sandwich_violation," << format_double(r.max_sandwich_violation) << '\n';
    sum << "oracle_discrepancy," << format_double(r.oracle_discrepancy) << '\n';
    sum << "gronwall_rate," << format_double(r.gronwall.rate) << '\n';
    sum << "gronwall_slope," << format_double(r.gronwall.slope) << '\n';
    sum << "gronwall_slope_uncertainty," << format_double(r.gronwall.slope_uncertainty) << '\n';
    sum << "photon_sqrt_coefficient," << format_double(r.photon_envelope.coefficient) << '\n';
    sum << "photon_sqrt_rms_residual," << format_double(r.photon_envelope.rms_residual) << '\n';
    auto snap = open_out(dir / "pf_final.bin", std::ios::out | std::ios::binary);
    write_pf_snapshot(snap, st, *sys);
    auto ms = open_out(dir / "ms_final.bin", std::ios::out | std::ios::binary);
    write_ms_snapshot(ms, eff, scenario.grid());
  }
  return r;
}

SlopeFit loglog_slope(const std::string& quantity, const std::vector<double>& x, const std::vector<double>& y,
                      double floor) {
  SlopeFit f;
  f.quantity = quantity;
  const std::size_t n = x.size();
  if (n < 3) {
    f.status = "refused: fewer than 3 points";
    return f;
  }
  for (double v : y)
    if (!(v > floor)) {
      f.status = "undefined: values at floor";
      return f;
    }
  double mx = 0, my = 0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  f.slope = sxy / sxx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double res = ly[i] - my - f.slope * (lx[i] - mx);
    ss += res * res;
  }
  f.uncertainty = std::sqrt(ss / static_cast<double>(n - 2) / sxx);
  f.defined = true;
  f.status = "ok";
  return f;
}

SweepResult run_sweep(const Scenario& scenario, const RunOptions& options) {
  const auto& cfg = scenario.config();
  const std::vector<int>& ns = cfg.n_values;
  if (ns.size() < 3) throw ConfigError("N", "a sweep needs at least 3 values for a slope fit");
  const std::size_t stride = static_cast<std::size_t>(cfg.sample_stride);
  const double spacing = cfg.dt * static_cast<double>(stride);
  const double k_star = cfg.t_star / spacing;
  if (std::abs(k_star - std::round(k_star)) > 1e-9) throw ConfigError("t_star", "must fall on a sample time");
  // refuse before running anything
  for (int n : ns) {
    const std::size_t dim = scenario.system_dimension(n);
    if (dim == 0 || dim > cfg.max_dimension)
      throw ResourceError("N = " + std::to_string(n) + " exceeds max_dimension " + std::to_string(cfg.max_dimension));
  }

  SweepResult out;
  out.star_index = static_cast<std::size_t>(std::llround(k_star));
  out.runs.resize(ns.size());
  std::vector<std::exception_ptr> errors(ns.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < ns.size();) {
      try {
        RunOptions o = options;
        if (!options.out_dir.empty()) o.out_dir = (fs::path(options.out_dir) / ("N" + std::to_string(ns[i]))).string();
        out.runs[i] = run_pf(scenario, ns[i], o);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.threads)), 1, ns.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> x, b_a, b_b, td, tdph;
  for (const auto& run : out.runs) {
    const auto& rep = run.reports[out.star_index];
    x.push_back(run.n_particles);
    b_a.push_back(rep.beta_a);
    b_b.push_back(rep.beta_b);
    td.push_back(rep.trace_dist_particle);
    tdph.push_back(rep.trace_dist_photon);
  }
  out.slopes = {loglog_slope("beta_b", x, b_b), loglog_slope("trace_dist_particle", x, td),
                loglog_slope("beta_a", x, b_a), loglog_slope("trace_dist_photon", x, tdph)};

  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    auto s = open_out(fs::path(options.out_dir) / "sweep.csv");
    s << "N,dimension,t_star,beta_a,beta_b,beta_c,trace_dist_particle,trace_dist_photon,gronwall_rate,gronwall_"
         "dominated\n";
    for (const auto& run : out.runs) {
      const auto& rep = run.reports[out.star_index];
      s << run.n_particles << ',' << run.dimension << ',';
      csv_row(s, {rep.time, rep.beta_a, rep.beta_b, rep.beta_c, rep.trace_dist_particle, rep.trace_dist_photon,
                  run.gronwall.rate, run.gronwall.dominated ? 1.0 : 0.0});
    }
    auto f = open_out(fs::path(options.out_dir) / "slopes.csv");
    f << "quantity,slope,uncertainty,status\n";
    for (const auto& sl : out.slopes) {
      f << sl.quantity << ',';
      if (sl.defined)
        f << format_double(sl.slope) << ',' << format_double(sl.uncertainty);
      else
        f << "nan,nan";
      f << ',' << sl.status << '\n';
    }
  }
  return out;
}

std::vector<CheckLine> run_check(const Scenario& scenario) {
  const auto& cfg = scenario.config();
  const auto ctx = scenario.context();
  const int N = cfg.n_values.front();
  const auto sys = scenario.make_system(N);
  const auto H = sys->hamiltonian();
  const std::size_t M = scenario.grid().n_modes();
  std::vector<CheckLine> lines;
  auto add = [&](std::string name, double value, double threshold) {
    lines.push_back({std::move(name), value, threshold, value <= threshold});
  };

  {
    // [a, a*] = 1 on states with room in the mode
    double worst = 0;
    for (std::size_t m = 0; m < M; ++m) {
      Eigen::VectorXcd psi = random_unit_vector(sys->dimension(), cfg.seed + m);
      auto X = fock_view(psi, sys->fock_dim());
      for (std::size_t f = 0; f < sys->fock_dim(); ++f)
        if (sys->fock().occupation(f, m) == cfg.n_max) X.row(static_cast<Eigen::Index>(f)).setZero();
      const auto a = sys->annihilation(m), ad = sys->creation(m);
      worst = std::max(worst, (a(ad(psi)) - ad(a(psi)) - psi).norm());
    }
    add("ccr", worst, 1e-12);
  }
  {
    double worst = H.hermiticity_defect(cfg.seed);
    worst = std::max(worst, sys->photon_number().hermiticity_defect(cfg.seed));
    worst = std::max(worst, sys->field_energy().hermiticity_defect(cfg.seed));
    for (int i = 0; i < scenario.grid().dim; ++i) worst = std::max(worst, sys->field(i, 0).hermiticity_defect(cfg.seed));
    add("hermiticity", worst, 1e-12);
  }
  {
    double worst = 0;
    for (int r = 0; r < 3; ++r) {
      const auto st = wrap(*sys, random_unit_vector(sys->dimension(), cfg.seed + 100 + r));
      worst = std::max(worst, parseval_beta_b_check(st, *sys, scenario.initial().alpha).residual);
    }
    add("parseval", worst, 1e-10);
  }
  add("auxiliary_field", auxiliary_field_residual(random_unit_vector(sys->dimension(), cfg.seed + 200), *sys), 1e-12);

  // trajectory sampled at half the configured spacing; every other sample is the coarse set
  const std::size_t stride = static_cast<std::size_t>(cfg.sample_stride);
  const double spacing = cfg.dt * static_cast<double>(stride);
  const std::size_t n_coarse = cfg.n_steps() / stride + 1;
  const std::size_t n_fine = 2 * n_coarse - 1;
  KrylovOptions kopt;
  kopt.tolerance = cfg.tolerances.krylov;
  std::vector<TrajectorySample> fine, coarse;
  {
    Eigen::VectorXcd psi = product_initial_state(scenario.initial().phi, scenario.initial().alpha, *sys,
                                                 cfg.tolerances.coherent_tail)
                               .amplitudes;
    EffectiveState eff = scenario.initial();
    for (std::size_t k = 0; k < n_fine; ++k) {
      const double t = 0.5 * spacing * static_cast<double>(k);
      eff.time = t;
      fine.push_back({t, psi, eff});
      if (k % 2 == 0) coarse.push_back(fine.back());
      if (k + 1 < n_fine) {
        psi = evolve(psi, H, 0.5 * spacing, kopt);
        eff = integrate(eff, 0.5 * cfg.dt, stride, 0, ctx);
      }
    }
  }
  {
    double violation = -1e300, drift = 0;
    const double c0 = beta_c(wrap(*sys, fine.front().psi), *sys, fine.front().effective, ctx);
    for (const auto& s : fine) {
      const auto st = wrap(*sys, s.psi, s.time);
      const double ba = beta_a(st, *sys, s.effective.phi);
      const Eigen::VectorXcd c = scaled_orbital(s.effective.phi, scenario.grid());
      violation = std::max(violation, sandwich_violation(ba, trace_distance(reduced_density_particle(st, *sys), c * c.adjoint())));
      drift = std::max(drift, std::abs(beta_c(st, *sys, s.effective, ctx) - c0));
    }
    add("sandwich", violation, 0.0);
    add("beta_c_invariance", drift, cfg.tolerances.beta_c_drift);
  }
  if (n_coarse >= 5) {
    for (int which = 0; which < 2; ++which) {
      const auto check = which == 0 ? beta_a_derivative_check : beta_b_derivative_check;
      const std::string name = which == 0 ? "derivative_beta_a" : "derivative_beta_b";
      const auto rf = check(fine, *sys, ctx);
      const auto rc = check(coarse, *sys, ctx);
      add(name, rf.max_residual, std::max(1e-6, 4 * rf.differencing_bound));
      // the residual should shrink about fourfold when the sample rate doubles
      const double ratio = rf.max_residual > 1e-10 ? rc.max_residual / rf.max_residual : 4.0;
      add(name + "_ratio_error", std::abs(ratio - 4.0), 1.0);
    }
  } else {
    lines.push_back({"derivative_samples", static_cast<double>(n_coarse), 5.0, false});
  }
  {
    double worst = 0, tail = 0;
    bool ok = true;
    std::vector<Eigen::VectorXcd> states{fine.front().psi, fine.back().psi,
                                         random_unit_vector(sys->dimension(), cfg.seed + 300)};
    std::vector<Eigen::VectorXcd> alphas{fine.front().effective.alpha, fine.back().effective.alpha,
                                         scenario.initial().alpha};
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto st = wrap(*sys, states[i]);
      try {
        const auto w = beta_b_weyl(st, *sys, alphas[i], cfg.tolerances.weyl_tail, 50 * cfg.max_dimension);
        worst = std::max(worst, std::abs(w.value - beta_b(st, *sys, alphas[i])));
        tail = std::max(tail, w.tail_mass);
      } catch (const TruncationError&) {
        ok = false;
      }
    }
    add("dual_path_beta_b", ok ? worst : std::numeric_limits<double>::infinity(), 1e-8);
    add("weyl_tail_mass", ok ? tail : std::numeric_limits<double>::infinity(), cfg.tolerances.weyl_tail);
  }
  return lines;
}

std::string format_check_table(const std::vector<CheckLine>& lines) {
  std::ostringstream s;
  s << std::left << std::setw(32) << "invariant" << std::setw(26) << "value" << std::setw(26) << "threshold"
    << "result\n";
  for (const auto& l : lines)
    s << std::left << std::setw(32) << l.name << std::setw(26) << format_double(l.value) << std::setw(26)
      << format_double(l.threshold) << (l.pass ? "PASS" : "FAIL") << '\n';
  return s.str();
}

void write_manifest(const std::string& out_dir, const ScenarioConfig& config, double wall_seconds,
                    const std::vector<std::string>& files) {
  fs::create_directories(out_dir);
  const std::string resolved = to_json_text(config);
  {
    auto out = open_out(fs::path(out_dir) / "resolved_config.json", std::ios::out | std::ios::binary);
    out << resolved;
  }
  json m;
  m["artifact_version"] = kArtifactVersion;
  m["config_hash"] = hex64(fnv1a(resolved));
  m["wall_clock_seconds"] = wall_seconds;
  json sums = json::object();
  for (const auto& f : files) sums[f] = hex64(fnv1a(read_file((fs::path(out_dir) / f).string())));
  sums["resolved_config.json"] = hex64(fnv1a(resolved));
  m["checksums"] = sums;
  auto out = open_out(fs::path(out_dir) / "manifest.json");
  out << m.dump(2) << '\n';
}

}  // namespace mslab
