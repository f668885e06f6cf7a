#pragma once

// Experiment configs and the drivers behind the command-line subcommands.
// Every driver writes its outputs under cfg.output and returns a summary.
// All randomness derives from cfg.seed; outputs do not depend on cfg.workers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plb/bounds.hpp"
#include "plb/csv.hpp"
#include "plb/error.hpp"
#include "plb/estimator.hpp"
#include "plb/fisher.hpp"
#include "plb/forward.hpp"
#include "plb/pfm.hpp"
#include "plb/render_error.hpp"
#include "plb/renderer.hpp"
#include "plb/scene_io.hpp"
#include "plb/stack.hpp"

namespace plb {

struct AnalyticSpec {
  std::string model = "constant";  // every pixel equals theta[0]
  int pixels = 100;
  int channels = 1;
};

struct ExperimentConfig {
  std::filesystem::path source;  // config file, for messages
  std::optional<std::filesystem::path> scene_path;
  std::optional<AnalyticSpec> analytic;
  SceneDescription scene;
  ParameterSpace space;

  std::size_t component = 0;
  std::vector<double> base_theta;  // other components of every sweep point
  std::vector<double> sweep;       // values of theta[component]
  long long delta_max_multiple = 10;
  long long delta_stride = 1;
  std::vector<NoiseModel> noises{NoiseModel::poisson()};
  RenderConfig render;

  struct Fisher {
    double xi = 0.01;
    int rounds = 16;
    std::uint32_t spp = 0;  // 0: render.spp
  } fisher;

  struct Viewgrid {
    std::vector<double> offsets_u{0.0};
    std::vector<double> offsets_v{0.0};
  } viewgrid;

  struct Intervals {
    std::vector<std::uint32_t> schedule{2048, 3072, 4096, 5120, 6144, 7168, 8192, 9216, 10240, 11264};
    std::uint32_t n_eff = 65536;
  } intervals;
  bool has_intervals = false;

  struct Variance {
    std::vector<std::uint32_t> schedule{256, 512, 1024, 2048};
    std::size_t replicates = 20;
    std::size_t draws = 1000;
    double l_max = 12.0;
  } variance;

  struct Mle {
    std::size_t runs = 30;
    double sigma = 0.1;
    std::uint32_t truth_spp = 0;  // 0: intervals.n_eff
    MleConfig optimizer;
  } mle;
  bool has_mle = false;

  double length_scale_cm = 100.0;  // theta units to centimetres
  std::filesystem::path output = "out";
  std::uint64_t seed = 0;
  unsigned workers = 0;
};

namespace exp_detail {

using nlohmann::json;
using json_detail::check_keys;
using json_detail::number;
using json_detail::numbers;

inline std::uint64_t u64(const json& v, const std::string& path) {
  if (!v.is_number_unsigned()) throw SchemaError(path + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

inline std::uint32_t spp_value(const json& v, const std::string& path) {
  const std::uint64_t n = u64(v, path);
  if (n < 1 || n > UINT32_MAX) throw ConfigError(path + ": spp must be in [1, 2^32)");
  return static_cast<std::uint32_t>(n);
}

inline std::vector<std::uint32_t> spp_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path + ": expected an array of integers");
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(spp_value(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline NoiseModel noise(const json& v, const std::string& path) {
  const json& m = json_detail::required(v, path, "model");
  if (m == "poisson") {
    check_keys(v, path, {"model"});
    return NoiseModel::poisson();
  }
  if (m == "awgn") {
    check_keys(v, path, {"model", "sigma"});
    const double s = number(json_detail::required(v, path, "sigma"), path + ".sigma");
    if (!(s > 0.0)) throw ConfigError(path + ".sigma: must be > 0");
    return NoiseModel::awgn(s);
  }
  throw SchemaError(path + ".model: expected \"poisson\" or \"awgn\"");
}

}  // namespace exp_detail

/// Parses an experiment document. Relative paths resolve against `dir`.
inline ExperimentConfig parse_experiment(const nlohmann::json& doc, const std::filesystem::path& dir) {
  using namespace exp_detail;
  using json_detail::required;
  const std::string root = "$";
  check_keys(doc, root,
             {"scene", "analytic", "parameter_space", "component", "theta", "sweep", "delta", "noise", "render", "fisher",
              "viewgrid", "intervals", "variance", "mle", "length_scale_cm", "output", "seed", "workers"});
  ExperimentConfig cfg;

  if (doc.contains("scene") == doc.contains("analytic"))
    throw ConfigError(root + ": exactly one of \"scene\" or \"analytic\" is required");
  if (doc.contains("scene")) {
    if (!doc["scene"].is_string()) throw SchemaError(root + ".scene: expected a path string");
    cfg.scene_path = dir / doc["scene"].get<std::string>();
    if (!std::filesystem::exists(*cfg.scene_path)) throw ConfigError(root + ".scene: file not found: " + cfg.scene_path->string());
    try {
      cfg.scene = load_scene(*cfg.scene_path);
    } catch (const Error& e) {
      throw ConfigError(root + ".scene: " + cfg.scene_path->string() + ": " + e.what());
    }
    cfg.space = cfg.scene.parameter_space;
    if (doc.contains("parameter_space")) throw ConfigError(root + ".parameter_space: only allowed with \"analytic\"");
  } else {
    const json& a = doc["analytic"];
    const std::string p = root + ".analytic";
    check_keys(a, p, {"model", "pixels", "channels"});
    AnalyticSpec spec;
    if (a.contains("model")) {
      if (a["model"] != "constant") throw ConfigError(p + ".model: only \"constant\" is supported");
    }
    if (a.contains("pixels")) spec.pixels = static_cast<int>(u64(a["pixels"], p + ".pixels"));
    if (a.contains("channels")) spec.channels = static_cast<int>(u64(a["channels"], p + ".channels"));
    if (spec.pixels < 1 || spec.channels < 1) throw ConfigError(p + ": pixels and channels must be >= 1");
    cfg.analytic = spec;
    if (!doc.contains("parameter_space")) throw ConfigError(root + ".parameter_space: required with \"analytic\"");
    cfg.space = parse_parameter_space(doc["parameter_space"], root + ".parameter_space");
    try {
      validate_parameter_space(cfg.space);
    } catch (const Error& e) {
      throw ConfigError(root + ".parameter_space: " + e.what());
    }
  }
  const std::size_t dim = cfg.space.dim();

  if (doc.contains("component")) cfg.component = u64(doc["component"], root + ".component");
  if (cfg.component >= dim) throw ConfigError(root + ".component: out of range for a " + std::to_string(dim) + "-parameter space");

  cfg.base_theta = cfg.space.lower;
  if (doc.contains("theta")) {
    cfg.base_theta = numbers(doc["theta"], root + ".theta");
    if (cfg.base_theta.size() != dim) throw ConfigError(root + ".theta: expected " + std::to_string(dim) + " components");
  }

  if (!doc.contains("sweep")) throw ConfigError(root + ".sweep: missing required key");
  {
    const json& s = doc["sweep"];
    const std::string p = root + ".sweep";
    check_keys(s, p, {"values", "range", "step"});
    if (s.contains("values") == s.contains("range")) throw ConfigError(p + ": give either \"values\" or \"range\" with \"step\"");
    if (s.contains("values")) {
      cfg.sweep = numbers(s["values"], p + ".values");
    } else {
      const auto r = numbers(s["range"], p + ".range");
      if (r.size() != 2) throw ConfigError(p + ".range: expected [lo, hi]");
      const double step = number(required(s, p, "step"), p + ".step");
      if (!(step > 0.0)) throw ConfigError(p + ".step: must be > 0");
      for (long long k = 0;; ++k) {
        const double v = r[0] + static_cast<double>(k) * step;
        if (v > r[1] + 1e-9 * std::max(1.0, std::abs(r[1]))) break;
        cfg.sweep.push_back(v);
      }
    }
    if (cfg.sweep.empty()) throw ConfigError(p + ": sweep has no points");
    for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
      std::vector<double> t = cfg.base_theta;
      t[cfg.component] = cfg.sweep[i];
      const std::string where = p + " point " + std::to_string(i) + " (" + format_double(cfg.sweep[i]) + ")";
      if (!cfg.space.contains(t)) throw ConfigError(where + ": outside the parameter space");
      for (std::size_t j = 0; j < dim; ++j) {
        try {
          cfg.space.lattice_index(j, t[j]);
        } catch (const DomainError&) {
          throw ConfigError(where + ": not on the parameter lattice");
        }
      }
    }
  }

  if (doc.contains("delta")) {
    const json& d = doc["delta"];
    const std::string p = root + ".delta";
    check_keys(d, p, {"max_multiple", "stride"});
    if (d.contains("max_multiple")) cfg.delta_max_multiple = static_cast<long long>(u64(d["max_multiple"], p + ".max_multiple"));
    if (d.contains("stride")) cfg.delta_stride = static_cast<long long>(u64(d["stride"], p + ".stride"));
    if (cfg.delta_max_multiple < 1 || cfg.delta_stride < 1) throw ConfigError(p + ": max_multiple and stride must be >= 1");
  }

  if (doc.contains("noise")) {
    const json& n = doc["noise"];
    if (!n.is_array() || n.empty()) throw ConfigError(root + ".noise: expected a nonempty array");
    cfg.noises.clear();
    for (std::size_t i = 0; i < n.size(); ++i) cfg.noises.push_back(noise(n[i], root + ".noise[" + std::to_string(i) + "]"));
  }

  if (doc.contains("render")) {
    const json& r = doc["render"];
    const std::string p = root + ".render";
    check_keys(r, p, {"spp", "depth", "tile", "resolution"});
    if (r.contains("spp")) cfg.render.spp = spp_value(r["spp"], p + ".spp");
    if (r.contains("depth")) cfg.render.depth = static_cast<int>(u64(r["depth"], p + ".depth"));
    if (r.contains("tile")) cfg.render.tile = static_cast<int>(u64(r["tile"], p + ".tile"));
    if (cfg.render.depth < 1 || cfg.render.tile < 1) throw ConfigError(p + ": depth and tile must be >= 1");
    if (r.contains("resolution")) {
      // Overrides the scene camera, so one fixture serves cheap and full-size runs.
      if (cfg.analytic) throw ConfigError(p + ".resolution: only allowed with \"scene\"");
      const auto res = numbers(r["resolution"], p + ".resolution");
      if (res.size() != 2 || res[0] < 1 || res[1] < 1 || res[0] != std::floor(res[0]) || res[1] != std::floor(res[1]))
        throw ConfigError(p + ".resolution: expected [width, height] with positive integers");
      cfg.scene.camera.width = static_cast<int>(res[0]);
      cfg.scene.camera.height = static_cast<int>(res[1]);
    }
  }

  if (doc.contains("fisher")) {
    const json& f = doc["fisher"];
    const std::string p = root + ".fisher";
    check_keys(f, p, {"xi", "rounds", "spp"});
    if (f.contains("xi")) cfg.fisher.xi = number(f["xi"], p + ".xi");
    if (f.contains("rounds")) cfg.fisher.rounds = static_cast<int>(u64(f["rounds"], p + ".rounds"));
    if (f.contains("spp")) cfg.fisher.spp = spp_value(f["spp"], p + ".spp");
    if (!(cfg.fisher.xi > 0.0) || cfg.fisher.rounds < 1) throw ConfigError(p + ": xi must be > 0 and rounds >= 1");
  }

  if (doc.contains("viewgrid")) {
    const json& v = doc["viewgrid"];
    const std::string p = root + ".viewgrid";
    check_keys(v, p, {"offsets_u", "offsets_v"});
    if (v.contains("offsets_u")) cfg.viewgrid.offsets_u = numbers(v["offsets_u"], p + ".offsets_u");
    if (v.contains("offsets_v")) cfg.viewgrid.offsets_v = numbers(v["offsets_v"], p + ".offsets_v");
    if (cfg.viewgrid.offsets_u.empty() || cfg.viewgrid.offsets_v.empty()) throw ConfigError(p + ": offset lists must be nonempty");
  }

  if (doc.contains("intervals")) {
    const json& iv = doc["intervals"];
    const std::string p = root + ".intervals";
    check_keys(iv, p, {"spp_schedule", "n_eff"});
    if (iv.contains("spp_schedule")) cfg.intervals.schedule = spp_list(iv["spp_schedule"], p + ".spp_schedule");
    if (iv.contains("n_eff")) cfg.intervals.n_eff = spp_value(iv["n_eff"], p + ".n_eff");
    try {
      validate_schedule(cfg.intervals.schedule);
    } catch (const DomainError& e) {
      throw ConfigError(p + ".spp_schedule: " + e.what());
    }
    if (std::find(cfg.intervals.schedule.begin(), cfg.intervals.schedule.end(), cfg.intervals.n_eff) != cfg.intervals.schedule.end())
      throw ConfigError(p + ".n_eff: must differ from every schedule entry");
    cfg.has_intervals = true;
  }

  if (doc.contains("variance")) {
    const json& v = doc["variance"];
    const std::string p = root + ".variance";
    check_keys(v, p, {"spp", "replicates", "draws", "l_max"});
    if (v.contains("spp")) cfg.variance.schedule = spp_list(v["spp"], p + ".spp");
    if (v.contains("replicates")) cfg.variance.replicates = u64(v["replicates"], p + ".replicates");
    if (v.contains("draws")) cfg.variance.draws = u64(v["draws"], p + ".draws");
    if (v.contains("l_max")) cfg.variance.l_max = number(v["l_max"], p + ".l_max");
    if (cfg.variance.replicates < 2) throw ConfigError(p + ".replicates: need at least 2");
    if (cfg.variance.draws < 1 || !(cfg.variance.l_max > 0.0)) throw ConfigError(p + ": draws must be >= 1 and l_max > 0");
    try {
      validate_schedule(cfg.variance.schedule);
    } catch (const DomainError& e) {
      throw ConfigError(p + ".spp: " + e.what());
    }
  }

  if (doc.contains("mle")) {
    const json& m = doc["mle"];
    const std::string p = root + ".mle";
    check_keys(m, p,
               {"runs", "sigma", "truth_spp", "init_lo", "init_hi", "step", "step_decay", "beta1", "beta2", "max_iterations",
                "xi", "spp_coarse", "spp_fine", "switch_iteration", "tolerance", "patience"});
    auto& o = cfg.mle.optimizer;
    if (m.contains("runs")) cfg.mle.runs = u64(m["runs"], p + ".runs");
    if (m.contains("sigma")) cfg.mle.sigma = number(m["sigma"], p + ".sigma");
    if (m.contains("truth_spp")) cfg.mle.truth_spp = spp_value(m["truth_spp"], p + ".truth_spp");
    o.init_lo = numbers(required(m, p, "init_lo"), p + ".init_lo");
    o.init_hi = numbers(required(m, p, "init_hi"), p + ".init_hi");
    if (m.contains("step")) o.step = number(m["step"], p + ".step");
    if (m.contains("step_decay")) o.step_decay = number(m["step_decay"], p + ".step_decay");
    if (m.contains("beta1")) o.beta1 = number(m["beta1"], p + ".beta1");
    if (m.contains("beta2")) o.beta2 = number(m["beta2"], p + ".beta2");
    if (m.contains("max_iterations")) o.max_iterations = static_cast<int>(u64(m["max_iterations"], p + ".max_iterations"));
    if (m.contains("xi")) o.xi = number(m["xi"], p + ".xi");
    if (m.contains("spp_coarse")) o.spp_coarse = spp_value(m["spp_coarse"], p + ".spp_coarse");
    if (m.contains("spp_fine")) o.spp_fine = spp_value(m["spp_fine"], p + ".spp_fine");
    if (m.contains("switch_iteration")) o.switch_iteration = static_cast<int>(u64(m["switch_iteration"], p + ".switch_iteration"));
    if (m.contains("tolerance")) o.tolerance = number(m["tolerance"], p + ".tolerance");
    if (m.contains("patience")) o.patience = static_cast<int>(u64(m["patience"], p + ".patience"));
    if (cfg.mle.runs < 2) throw ConfigError(p + ".runs: need at least 2");
    if (!(cfg.mle.sigma > 0.0)) throw ConfigError(p + ".sigma: must be > 0");
    try {
      o.validate(cfg.space);
    } catch (const DomainError& e) {
      throw ConfigError(p + ": " + e.what());
    }
    cfg.has_mle = true;
  }

  if (doc.contains("length_scale_cm")) cfg.length_scale_cm = number(doc["length_scale_cm"], root + ".length_scale_cm");
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) throw SchemaError(root + ".output: expected a path string");
    cfg.output = (dir / doc["output"].get<std::string>()).lexically_normal();
  } else {
    cfg.output = (dir / "out").lexically_normal();
  }
  if (doc.contains("seed")) cfg.seed = u64(doc["seed"], root + ".seed");
  if (doc.contains("workers")) cfg.workers = static_cast<unsigned>(u64(doc["workers"], root + ".workers"));
  cfg.render.seed = cfg.seed;
  cfg.render.workers = cfg.workers;
  return cfg;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  try {
    ExperimentConfig cfg = parse_experiment(doc, path.parent_path());
    cfg.source = path;
    return cfg;
  } catch (const SchemaError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Command-line overrides.
inline void set_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.render.seed = seed;
}
inline void set_workers(ExperimentConfig& cfg, unsigned workers) {
  cfg.workers = workers;
  cfg.render.workers = workers;
}

// ---- lattice bookkeeping -------------------------------------------------------

using LatticeKey = std::vector<long long>;

inline LatticeKey lattice_key(const ParameterSpace& space, std::span<const double> theta) {
  LatticeKey k(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) k[j] = space.lattice_index(j, theta[j]);
  return k;
}

inline std::vector<double> key_theta(const ParameterSpace& space, const LatticeKey& key) {
  std::vector<double> t(key.size());
  for (std::size_t j = 0; j < key.size(); ++j) t[j] = space.lattice_value(j, key[j]);
  return t;
}

inline std::string theta_label(std::span<const double> theta) {
  return join_doubles(std::vector<double>(theta.begin(), theta.end()), ';');
}

/// Sweep points and their perturbation keys along the swept component.
struct BoundsPlan {
  std::vector<LatticeKey> sweep;
  std::vector<std::vector<LatticeKey>> perturbed;  // per sweep point, ordered by offset
  std::vector<LatticeKey> all;                     // sorted union; index = theta index in the stack
};

inline BoundsPlan plan_bounds(const ExperimentConfig& cfg) {
  BoundsPlan plan;
  const std::size_t j = cfg.component;
  const long long kmax = cfg.space.lattice_max(j);
  for (double v : cfg.sweep) {
    std::vector<double> t = cfg.base_theta;
    t[j] = v;
    LatticeKey key = lattice_key(cfg.space, t);
    std::vector<LatticeKey> ks;
    for (long long m = -cfg.delta_max_multiple; m <= cfg.delta_max_multiple; ++m) {
      if (m == 0) continue;
      LatticeKey k = key;
      k[j] += m * cfg.delta_stride;
      if (k[j] >= 0 && k[j] <= kmax) ks.push_back(std::move(k));
    }
    if (ks.empty()) throw ConfigError("sweep point " + format_double(v) + ": no perturbation stays inside the parameter space");
    plan.sweep.push_back(key);
    plan.perturbed.push_back(std::move(ks));
  }
  for (std::size_t i = 0; i < plan.sweep.size(); ++i) {
    plan.all.push_back(plan.sweep[i]);
    for (const auto& k : plan.perturbed[i]) plan.all.push_back(k);
  }
  std::sort(plan.all.begin(), plan.all.end());
  plan.all.erase(std::unique(plan.all.begin(), plan.all.end()), plan.all.end());
  return plan;
}

/// Images keyed by (lattice point, spp).
using ImageTable = std::map<std::pair<LatticeKey, std::uint32_t>, Image<double>>;

inline Image<double> analytic_image(const AnalyticSpec& spec, std::span<const double> theta) {
  Image<double> img(spec.pixels, 1, spec.channels, theta[0]);
  img.meta.theta.assign(theta.begin(), theta.end());
  return img;
}

/// Renders (or evaluates) every plan point at every spp in `spps` with
/// render_stack seeding: theta index = position in plan.all, cfg index =
/// position in spps.
inline ImageTable evaluate_plan(const ExperimentConfig& cfg, const std::vector<LatticeKey>& keys,
                                const std::vector<std::uint32_t>& spps) {
  ImageTable table;
  if (cfg.analytic) {
    for (const auto& k : keys)
      for (auto n : spps) table[{k, n}] = analytic_image(*cfg.analytic, key_theta(cfg.space, k));
    return table;
  }
  std::vector<std::vector<double>> thetas;
  for (const auto& k : keys) thetas.push_back(key_theta(cfg.space, k));
  std::vector<RenderConfig> rcs;
  for (auto n : spps) {
    RenderConfig rc = cfg.render;
    rc.spp = n;
    rcs.push_back(rc);
  }
  auto images = render_stack(cfg.scene, thetas, rcs);
  for (std::size_t i = 0; i < keys.size(); ++i)
    for (std::size_t c = 0; c < spps.size(); ++c) table[{keys[i], spps[c]}] = image_cast<double>(images[i * spps.size() + c]);
  return table;
}

/// Indexes a persisted stack by (lattice point, spp).
inline ImageTable table_from_stack(const ExperimentConfig& cfg, const std::filesystem::path& manifest) {
  ImageTable table;
  for (auto& e : load_stack(manifest)) {
    if (e.row.theta.size() != cfg.space.dim())
      throw ConfigError(manifest.string() + ": theta dimensionality does not match the parameter space");
    LatticeKey key;
    try {
      key = lattice_key(cfg.space, e.row.theta);
    } catch (const DomainError&) {
      throw ConfigError(manifest.string() + ": " + e.row.path + ": theta " + theta_label(e.row.theta) + " is off the lattice");
    }
    if (!table.emplace(std::make_pair(key, e.row.spp), image_cast<double>(e.image)).second)
      throw ConfigError(manifest.string() + ": several images for theta " + theta_label(e.row.theta) + " at spp " +
                        std::to_string(e.row.spp));
  }
  return table;
}

inline const Image<double>& lookup(const ImageTable& table, const ExperimentConfig& cfg, const LatticeKey& key, std::uint32_t spp) {
  auto it = table.find({key, spp});
  if (it == table.end())
    throw ConfigError("no image for theta " + theta_label(key_theta(cfg.space, key)) + " at spp " + std::to_string(spp));
  return it->second;
}

/// Trace for sweep point i with lambdas from the table at `spp`.
inline std::vector<TraceEntry> plan_trace(const ExperimentConfig& cfg, const BoundsPlan& plan, std::size_t i,
                                          const ImageTable& table, std::uint32_t spp, const NoiseModel& noise) {
  const std::size_t j = cfg.component;
  const auto theta = key_theta(cfg.space, plan.sweep[i]);
  const Image<double>& base = lookup(table, cfg, plan.sweep[i], spp);
  std::vector<TraceEntry> trace;
  for (const auto& k : plan.perturbed[i]) {
    TraceEntry e;
    e.delta.assign(theta.size(), 0.0);
    for (std::size_t c = 0; c < theta.size(); ++c) {
      // Lattice offset times step: equal to the realized difference up to
      // rounding, and prints as the nominal value.
      e.delta[c] = static_cast<double>(k[c] - plan.sweep[i][c]) * cfg.space.step[c];
      e.delta_sq += e.delta[c] * e.delta[c];
    }
    e.delta_j = e.delta[j];
    try {
      e.lambda = lambda_for(base, lookup(table, cfg, k, spp), noise);
    } catch (const NumericError& err) {
      throw NumericError("theta " + theta_label(theta) + ", delta " + format_double(e.delta_j) + ", spp " + std::to_string(spp) +
                         ": " + err.what());
    }
    trace.push_back(std::move(e));
  }
  return trace;
}

inline void ensure_output(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output, ec);
  if (ec || !std::filesystem::is_directory(cfg.output)) throw ConfigError("output directory not writable: " + cfg.output.string());
}

inline std::string noise_slug(const NoiseModel& n) {
  if (n.kind == NoiseKind::poisson) return "poisson";
  return "awgn_" + format_double(n.sigma);
}

// ---- render ----------------------------------------------------------------------

struct RenderSummary {
  std::filesystem::path manifest;
  std::size_t images = 0;
};

/// Renders every lattice point the bounds command needs and writes PFMs plus
/// manifest.csv.
inline RenderSummary cmd_render(const ExperimentConfig& cfg) {
  if (cfg.analytic) throw ConfigError("render: needs a scene (analytic models are not rendered)");
  ensure_output(cfg);
  const BoundsPlan plan = plan_bounds(cfg);
  const ImageTable table = evaluate_plan(cfg, plan.all, {cfg.render.spp});
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < plan.all.size(); ++i) {
    const auto& key = plan.all[i];
    char name[32];
    std::snprintf(name, sizeof name, "img_%05zu.pfm", i);
    const bool primary = std::find(plan.sweep.begin(), plan.sweep.end(), key) != plan.sweep.end();
    write_pfm(image_cast<float>(lookup(table, cfg, key, cfg.render.spp)), cfg.output / name);
    rows.push_back({name, key_theta(cfg.space, key), cfg.render.spp, stack_seed(cfg.render.seed, i, 0),
                    primary ? StackRole::primary : StackRole::perturbed});
  }
  RenderSummary s{cfg.output / "manifest.csv", rows.size()};
  write_manifest(rows, s.manifest);
  return s;
}

// ---- bounds ----------------------------------------------------------------------

struct BoundsRow {
  std::vector<double> theta;
  std::size_t component = 0;
  NoiseModel noise;
  HcrResult hcr;
  std::optional<double> cr;
  bool cr_unbounded = false;
};

inline std::string bounds_flags(const BoundsRow& r) {
  std::vector<std::string> f;
  if (r.hcr.unbounded) f.push_back("unbounded");
  if (r.hcr.ties.size() > 1) f.push_back("ties");
  if (!r.cr) f.push_back("cr_out_of_bounds");
  if (r.cr_unbounded) f.push_back("cr_unbounded");
  std::string s;
  for (std::size_t i = 0; i < f.size(); ++i) s += (i ? ";" : "") + f[i];
  return s;
}

/// HCR and CR bounds over the sweep; writes bounds.csv and bounds_trace.csv.
inline std::vector<BoundsRow> cmd_bounds(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& from_stack = {}) {
  const BoundsPlan plan = plan_bounds(cfg);
  ensure_output(cfg);
  const ImageTable table = from_stack ? table_from_stack(cfg, *from_stack) : evaluate_plan(cfg, plan.all, {cfg.render.spp});
  const std::uint32_t spp = cfg.render.spp;
  std::vector<BoundsRow> rows;
  CsvWriter csv("theta,j,noise,hcr,cr,argmax_delta,flags");
  CsvWriter trace_csv("theta,j,noise,delta,lambda,value,unbounded");
  for (std::size_t i = 0; i < plan.sweep.size(); ++i) {
    const auto theta = key_theta(cfg.space, plan.sweep[i]);
    for (const auto& noise : cfg.noises) {
      BoundsRow row;
      row.theta = theta;
      row.component = cfg.component;
      row.noise = noise;
      auto trace = plan_trace(cfg, plan, i, table, spp, noise);
      // CR from the one-step perturbation, when theta* +- one step both exist.
      const auto& ks = plan.perturbed[i];
      LatticeKey up = plan.sweep[i], down = plan.sweep[i];
      up[cfg.component] += cfg.delta_stride;
      down[cfg.component] -= cfg.delta_stride;
      const bool have_up = std::find(ks.begin(), ks.end(), up) != ks.end();
      const bool have_down = std::find(ks.begin(), ks.end(), down) != ks.end();
      if (have_up && have_down) {
        const auto idx = static_cast<std::size_t>(std::find(ks.begin(), ks.end(), up) - ks.begin());
        const TraceEntry& e = trace[idx];
        if (e.lambda == 0.0) {
          row.cr_unbounded = true;
          row.cr = std::numeric_limits<double>::infinity();
        } else {
          row.cr = e.delta_j * e.delta_j / e.lambda;
        }
      }
      row.hcr = hcr_from_trace(std::move(trace), theta, cfg.component, noise);
      for (const auto& e : row.hcr.trace)
        trace_csv.row(theta_label(theta), cfg.component, noise.name(), e.delta_j, e.lambda, e.value, e.unbounded ? 1 : 0);
      csv.row(theta_label(theta), cfg.component, noise.name(), row.hcr.bound, row.cr ? format_double(*row.cr) : std::string(),
              row.hcr.argmax_delta.empty() ? std::string() : format_double(row.hcr.argmax_delta[cfg.component]), bounds_flags(row));
      rows.push_back(std::move(row));
    }
  }
  csv.save(cfg.output / "bounds.csv");
  trace_csv.save(cfg.output / "bounds_trace.csv");
  return rows;
}

// ---- fisher ----------------------------------------------------------------------

struct FisherRow {
  std::vector<double> theta;
  NoiseModel noise;
  double total = 0.0;
  double mean = 0.0;
  double fi_min = 0.0, fi_max = 0.0;
  double log_min = 0.0, log_max = 0.0;
};

inline std::uint32_t fisher_spp(const ExperimentConfig& cfg) { return cfg.fisher.spp ? cfg.fisher.spp : cfg.render.spp; }

/// Gradient for sweep point i: in-process rendering or a persisted stack.
inline GradientImage sweep_gradient(const ExperimentConfig& cfg, std::size_t i, std::span<const double> theta) {
  if (cfg.analytic) {
    const AnalyticSpec spec = *cfg.analytic;
    const AnalyticForward fwd{[spec](std::span<const double> t) { return analytic_image(spec, t); }};
    return fd_gradient(fwd, theta, cfg.component, cfg.fisher.xi, cfg.fisher.rounds, cfg.space);
  }
  RenderConfig rc = cfg.render;
  rc.spp = fisher_spp(cfg);
  rc.seed = derive_seed(cfg.seed, {0xF15ull, i});
  const RenderedForward fwd{cfg.scene, rc};
  return fd_gradient(fwd, theta, cfg.component, cfg.fisher.xi, cfg.fisher.rounds, cfg.space);
}

/// Groups gradient-plus / gradient-minus rows (paired in manifest order) by
/// the midpoint theta.
inline std::map<LatticeKey, GradientImage> gradients_from_stack(const ExperimentConfig& cfg, const std::filesystem::path& manifest) {
  const auto entries = load_stack(manifest);
  std::vector<const StackEntry*> plus, minus;
  for (const auto& e : entries) {
    if (e.row.role == StackRole::gradient_plus) plus.push_back(&e);
    if (e.row.role == StackRole::gradient_minus) minus.push_back(&e);
  }
  if (plus.size() != minus.size()) throw ConfigError(manifest.string() + ": unequal numbers of gradient-plus and gradient-minus rows");
  std::map<LatticeKey, GradientImage> out;
  const std::size_t j = cfg.component;
  for (std::size_t r = 0; r < plus.size(); ++r) {
    const auto& p = plus[r]->row;
    const auto& m = minus[r]->row;
    if (p.theta.size() != cfg.space.dim() || m.theta.size() != cfg.space.dim())
      throw ConfigError(manifest.string() + ": theta dimensionality does not match the parameter space");
    std::vector<double> mid(p.theta.size());
    for (std::size_t c = 0; c < mid.size(); ++c) mid[c] = 0.5 * (p.theta[c] + m.theta[c]);
    const double xi = 0.5 * (p.theta[j] - m.theta[j]);
    if (!(xi > 0.0)) throw ConfigError(manifest.string() + ": gradient pair " + p.path + " / " + m.path + " has no positive step");
    LatticeKey key;
    try {
      key = lattice_key(cfg.space, mid);
    } catch (const DomainError&) {
      throw ConfigError(manifest.string() + ": gradient pair " + p.path + " midpoint is off the lattice");
    }
    const auto lp = image_cast<double>(plus[r]->image);
    const auto lm = image_cast<double>(minus[r]->image);
    auto [it, fresh] = out.try_emplace(key);
    GradientImage& g = it->second;
    if (fresh) {
      g.grad = Image<double>(lp.width, lp.height, lp.channels);
      g.mean = Image<double>(lp.width, lp.height, lp.channels);
      g.xi = xi;
      g.component = j;
      g.grad.meta.theta = key_theta(cfg.space, key);
    } else if (g.xi != xi) {
      throw ConfigError(manifest.string() + ": gradient pairs for one theta use different steps");
    }
    ++g.rounds;
    for (std::size_t k = 0; k < lp.data.size(); ++k) {
      g.grad.data[k] += (lp.data[k] - lm.data[k]) / (2.0 * xi);
      g.mean.data[k] += 0.5 * (lp.data[k] + lm.data[k]);
    }
  }
  for (auto& [key, g] : out) {
    for (auto& v : g.grad.data) v /= g.rounds;
    for (auto& v : g.mean.data) v /= g.rounds;
  }
  return out;
}

inline Image<float> three_channel(const Image<double>& img) {
  Image<float> out(img.width, img.height, 3);
  for (std::size_t p = 0; p < img.pixels(); ++p)
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = static_cast<float>(img.data[p * img.channels + (img.channels == 3 ? c : 0)]);
  return out;
}

/// Pixel-wise FI maps (PFM, linear and log) and totals (fisher.csv).
inline std::vector<FisherRow> cmd_fisher(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& from_stack = {}) {
  ensure_output(cfg);
  std::map<LatticeKey, GradientImage> stacked;
  if (from_stack) stacked = gradients_from_stack(cfg, *from_stack);
  std::vector<FisherRow> rows;
  CsvWriter csv("theta,j,noise,total_fi,mean_fi,fi_min,fi_max,log_fi_min,log_fi_max");
  for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
    std::vector<double> theta = cfg.base_theta;
    theta[cfg.component] = cfg.sweep[i];
    const LatticeKey key = lattice_key(cfg.space, theta);
    theta = key_theta(cfg.space, key);
    GradientImage g;
    if (from_stack) {
      auto it = stacked.find(key);
      if (it == stacked.end()) throw ConfigError("no gradient pair in the stack for theta " + theta_label(theta));
      g = it->second;
    } else {
      g = sweep_gradient(cfg, i, theta);
    }
    for (std::size_t n = 0; n < cfg.noises.size(); ++n) {
      const NoiseModel& noise = cfg.noises[n];
      FiMap map;
      try {
        map = pixelwise_fi(g, g.mean, noise);
      } catch (const NumericError& e) {
        throw NumericError("theta " + theta_label(theta) + ": " + e.what());
      }
      const Image<double> mean_map = channel_mean(map.fi);
      const Image<double> log_mean = log_map(mean_map);
      FisherRow row{theta, noise, total_fi(map), mean_fi(map), 0.0, 0.0, 0.0, 0.0};
      const auto [lo, hi] = std::minmax_element(mean_map.data.begin(), mean_map.data.end());
      row.fi_min = *lo;
      row.fi_max = *hi;
      const auto [llo, lhi] = std::minmax_element(log_mean.data.begin(), log_mean.data.end());
      row.log_min = *llo;
      row.log_max = *lhi;
      char stem[64];
      std::snprintf(stem, sizeof stem, "fi_%03zu_%s", i, noise_slug(noise).c_str());
      write_pfm(three_channel(map.fi), cfg.output / (std::string(stem) + ".pfm"));
      write_pfm(three_channel(log_mean), cfg.output / (std::string(stem) + "_log.pfm"));
      csv.row(theta_label(theta), cfg.component, noise.name(), row.total, row.mean, row.fi_min, row.fi_max, row.log_min, row.log_max);
      rows.push_back(row);
    }
  }
  csv.save(cfg.output / "fisher.csv");
  return rows;
}

// ---- viewgrid --------------------------------------------------------------------

struct ViewgridPoint {
  std::vector<double> theta;
  double u = 0.0, v = 0.0;
  double mean_fi = 0.0;
  std::size_t visible_pixels = 0;  // pixels whose centre ray hits the bound surface
};

/// Surface driven by parameter component j, if the binding targets a surface.
inline std::optional<std::size_t> bound_surface(const SceneDescription& scene, std::size_t j) {
  for (const auto& b : scene.bindings) {
    if (b.index != j || !b.target.starts_with("surfaces[")) continue;
    const auto close = b.target.find(']');
    return static_cast<std::size_t>(std::stoull(b.target.substr(9, close - 9)));
  }
  return std::nullopt;
}

/// Mean FI for every camera offset; writes viewgrid_<i>.csv (matrix, rows = v
/// offsets) and viewgrid_points.csv (long form with visibility counts).
inline std::vector<ViewgridPoint> cmd_viewgrid(const ExperimentConfig& cfg) {
  if (cfg.analytic) throw ConfigError("viewgrid: needs a scene");
  ensure_output(cfg);
  const auto surface = bound_surface(cfg.scene, cfg.component);
  std::vector<ViewgridPoint> points;
  CsvWriter long_csv("theta,u,v,mean_fi,visible_pixels");
  for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
    std::vector<double> theta = cfg.base_theta;
    theta[cfg.component] = cfg.sweep[i];
    theta = key_theta(cfg.space, lattice_key(cfg.space, theta));
    ViewpointOptions opt;
    opt.offsets_u = cfg.viewgrid.offsets_u;
    opt.offsets_v = cfg.viewgrid.offsets_v;
    opt.component = cfg.component;
    opt.xi = cfg.fisher.xi;
    opt.rounds = cfg.fisher.rounds;
    opt.render = cfg.render;
    opt.render.spp = fisher_spp(cfg);
    opt.render.seed = derive_seed(cfg.seed, {0x1E3ull, i});
    const auto grid = viewpoint_grid(cfg.scene, theta, cfg.noises.front(), opt);
    std::string header = "v\\u";
    for (double u : opt.offsets_u) header += "," + format_double(u);
    CsvWriter matrix(header);
    const SceneDescription posed = apply_parameters(cfg.scene, theta);
    for (std::size_t a = 0; a < opt.offsets_v.size(); ++a) {
      std::string line = format_double(opt.offsets_v[a]);
      for (std::size_t b = 0; b < opt.offsets_u.size(); ++b) {
        line += "," + format_double(grid[a][b]);
        SceneDescription s = posed;
        s.camera = displaced_camera(posed.camera, opt.offsets_u[b], opt.offsets_v[a]);
        ViewgridPoint p{theta, opt.offsets_u[b], opt.offsets_v[a], grid[a][b], surface ? primary_visibility(s, *surface) : 0};
        long_csv.row(theta_label(theta), p.u, p.v, p.mean_fi, p.visible_pixels);
        points.push_back(std::move(p));
      }
      matrix.row(line);
    }
    char name[32];
    std::snprintf(name, sizeof name, "viewgrid_%03zu.csv", i);
    matrix.save(cfg.output / name);
  }
  long_csv.save(cfg.output / "viewgrid_points.csv");
  return points;
}

// ---- intervals -------------------------------------------------------------------

struct IntervalRow {
  HcrInterval interval;
  HcrResult direct;
  HcrHatResult corrected;
};

inline std::string interval_flags(const HcrInterval& iv) {
  std::vector<std::string> f;
  if (iv.inverted) f.push_back("inverted");
  if (iv.lower_unbounded) f.push_back("lower_unbounded");
  if (iv.upper_unbounded) f.push_back("upper_unbounded");
  if (iv.clamped) f.push_back("clamped=" + std::to_string(iv.clamped));
  std::string s;
  for (std::size_t i = 0; i < f.size(); ++i) s += (i ? ";" : "") + f[i];
  return s;
}

inline std::vector<std::uint32_t> interval_spps(const ExperimentConfig& cfg) {
  std::vector<std::uint32_t> spps = cfg.intervals.schedule;
  spps.push_back(cfg.intervals.n_eff);
  return spps;
}

/// Interval rows for every sweep point and noise model, from a prepared table.
inline std::vector<IntervalRow> intervals_from_table(const ExperimentConfig& cfg, const BoundsPlan& plan, const ImageTable& table,
                                                     const std::vector<NoiseModel>& noises) {
  std::vector<IntervalRow> rows;
  for (std::size_t i = 0; i < plan.sweep.size(); ++i) {
    const auto theta = key_theta(cfg.space, plan.sweep[i]);
    for (const auto& noise : noises) {
      IntervalRow row;
      row.direct = hcr_from_trace(plan_trace(cfg, plan, i, table, cfg.intervals.n_eff, noise), theta, cfg.component, noise);
      std::vector<std::vector<double>> lt(plan.perturbed[i].size(), std::vector<double>(cfg.intervals.schedule.size()));
      for (std::size_t k = 0; k < cfg.intervals.schedule.size(); ++k) {
        const auto tr = plan_trace(cfg, plan, i, table, cfg.intervals.schedule[k], noise);
        for (std::size_t d = 0; d < tr.size(); ++d) lt[d][k] = tr[d].lambda;
      }
      auto skeleton = plan_trace(cfg, plan, i, table, cfg.intervals.n_eff, noise);
      for (auto& e : skeleton) e.lambda = 0.0;
      row.corrected = hcr_hat_from_lambdas(std::move(skeleton), cfg.intervals.schedule, std::move(lt), theta, cfg.component, noise);
      row.interval = hcr_interval(row.direct, row.corrected);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Direct (n_eff) and bias-corrected (schedule) bounds; writes
/// intervals_<noise>.csv and per-point lambda traces.
inline std::vector<IntervalRow> cmd_intervals(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& from_stack = {}) {
  if (!cfg.has_intervals) throw ConfigError("intervals: config has no \"intervals\" section");
  const BoundsPlan plan = plan_bounds(cfg);
  ensure_output(cfg);
  const ImageTable table = from_stack ? table_from_stack(cfg, *from_stack) : evaluate_plan(cfg, plan.all, interval_spps(cfg));
  auto rows = intervals_from_table(cfg, plan, table, cfg.noises);
  for (const auto& noise : cfg.noises) {
    CsvWriter csv("theta,j,lower,upper,flags");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (!(row.interval.noise == noise)) continue;
      const auto& iv = row.interval;
      csv.row(theta_label(iv.theta_star), iv.component, iv.lower, iv.upper, interval_flags(iv));
      std::string header = "delta";
      for (auto n : row.corrected.schedule) header += ",lambda_tilde_" + std::to_string(n);
      header += ",lambda_hat,C_hat";
      CsvWriter trace(header);
      for (std::size_t d = 0; d < row.corrected.result.trace.size(); ++d) {
        std::string line = format_double(row.corrected.result.trace[d].delta_j);
        for (double l : row.corrected.lambda_tilde[d]) line += "," + format_double(l);
        line += "," + format_double(row.corrected.estimates[d].lambda_hat) + "," + format_double(row.corrected.estimates[d].c_hat);
        trace.row(line);
      }
      char name[96];
      std::snprintf(name, sizeof name, "lambda_trace_%03zu_%s.csv", r / cfg.noises.size(), noise_slug(noise).c_str());
      trace.save(cfg.output / name);
    }
    csv.save(cfg.output / ("intervals_" + noise_slug(noise) + ".csv"));
  }
  return rows;
}

// ---- variance decay --------------------------------------------------------------

/// Renders `replicates` independent images per spp at the first sweep point and
/// runs the weighted-variance decay fit; writes decay_histogram.csv and
/// decay_summary.csv.
inline DecayFit cmd_validate_variance(const ExperimentConfig& cfg) {
  if (cfg.analytic) throw ConfigError("validate-variance: needs a scene");
  ensure_output(cfg);
  std::vector<double> theta = cfg.base_theta;
  theta[cfg.component] = cfg.sweep.front();
  theta = key_theta(cfg.space, lattice_key(cfg.space, theta));
  const auto& v = cfg.variance;
  std::vector<RenderConfig> rcs;
  for (auto n : v.schedule) {
    for (std::size_t k = 0; k < v.replicates; ++k) {
      RenderConfig rc = cfg.render;
      rc.spp = n;
      rcs.push_back(rc);
    }
  }
  const auto images = render_stack(cfg.scene, {theta}, rcs);
  std::vector<std::vector<RadianceImage>> grouped(v.schedule.size());
  for (std::size_t s = 0; s < v.schedule.size(); ++s)
    for (std::size_t k = 0; k < v.replicates; ++k) grouped[s].push_back(images[s * v.replicates + k]);
  const DecayFit fit = variance_decay_fit(grouped, v.schedule, v.draws, v.l_max, derive_seed(cfg.seed, {0xDECAull}));
  CsvWriter hist("p_opt,count");
  for (const auto& [p, c] : fit.histogram) hist.row(p, c);
  hist.save(cfg.output / "decay_histogram.csv");
  CsvWriter summary("draws,median_p,mean_p");
  summary.row(fit.fits.size(), fit.median_p(), fit.mean_p());
  summary.save(cfg.output / "decay_summary.csv");
  return fit;
}

// ---- mle -------------------------------------------------------------------------

struct MleRow {
  std::vector<double> theta;
  std::optional<HcrInterval> interval;
  TrialReport report;
};

/// MLE trials at every sweep point under AWGN(mle.sigma); writes mle.csv in the
/// table layout theta_star_cm,hcr_lower_cm2,hcr_upper_cm2,mse_cm2,var_cm2,diverged_runs.
/// HCR columns are filled when the config has an "intervals" section.
/// mle_runs.csv lists every run (init, estimate, iterations, flags).
inline std::vector<MleRow> cmd_mle(const ExperimentConfig& cfg) {
  if (!cfg.has_mle) throw ConfigError("mle: config has no \"mle\" section");
  ensure_output(cfg);
  const NoiseModel noise = NoiseModel::awgn(cfg.mle.sigma);
  std::optional<BoundsPlan> plan;
  std::optional<ImageTable> table;
  if (cfg.has_intervals) {
    plan = plan_bounds(cfg);
    table = evaluate_plan(cfg, plan->all, interval_spps(cfg));
  }
  const double s = cfg.length_scale_cm;
  CsvWriter csv("theta_star_cm,hcr_lower_cm2,hcr_upper_cm2,mse_cm2,var_cm2,diverged_runs");
  CsvWriter runs_csv("theta,run,seed,init,theta_hat,iterations,converged,diverged,final_loss");
  std::vector<MleRow> rows;
  const unsigned trial_workers = resolve_workers(cfg.workers);
  for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
    std::vector<double> theta = cfg.base_theta;
    theta[cfg.component] = cfg.sweep[i];
    theta = key_theta(cfg.space, lattice_key(cfg.space, theta));
    MleRow row;
    row.theta = theta;
    const std::uint64_t seed = derive_seed(cfg.seed, {0x31Eull, i});
    if (cfg.analytic) {
      const AnalyticSpec spec = *cfg.analytic;
      const AnalyticForward fwd{[spec](std::span<const double> t) { return analytic_image(spec, t); }};
      row.report = run_trials(fwd(theta), fwd, theta, noise, cfg.mle.optimizer, cfg.space, cfg.mle.runs, seed, trial_workers);
    } else {
      RenderConfig truth_cfg = cfg.render;
      truth_cfg.spp = cfg.mle.truth_spp ? cfg.mle.truth_spp : cfg.intervals.n_eff;
      truth_cfg.seed = derive_seed(seed, {0x7287ull});
      RadianceImage truth = render(apply_parameters(cfg.scene, theta), truth_cfg);
      truth.meta.theta = theta;
      RenderConfig rc = cfg.render;
      rc.workers = 1;  // parallelism comes from concurrent runs
      rc.seed = derive_seed(seed, {0xF0ull});
      const RenderedForward fwd{cfg.scene, rc};
      row.report = run_trials(truth, fwd, theta, noise, cfg.mle.optimizer, cfg.space, cfg.mle.runs, seed, trial_workers);
    }
    if (plan) row.interval = intervals_from_table(cfg, BoundsPlan{{plan->sweep[i]}, {plan->perturbed[i]}, plan->all}, *table, {noise})
                                 .front()
                                 .interval;
    csv.row(theta[cfg.component] * s, row.interval ? format_double(row.interval->lower * s * s) : std::string(),
            row.interval ? format_double(row.interval->upper * s * s) : std::string(), row.report.mse * s * s,
            row.report.variance * s * s, row.report.diverged);
    for (std::size_t k = 0; k < row.report.runs.size(); ++k) {
      const MleRun& r = row.report.runs[k];
      runs_csv.row(theta_label(theta), k, r.seed, theta_label(r.init), theta_label(r.theta_hat), r.iterations, int(r.converged),
                   int(r.diverged), r.loss.empty() ? std::string() : format_double(r.loss.back()));
    }
    rows.push_back(std::move(row));
  }
  csv.save(cfg.output / "mle.csv");
  runs_csv.save(cfg.output / "mle_runs.csv");
  return rows;
}

}  // namespace plb
