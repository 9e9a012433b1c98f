#pragma once

// JSON run configuration: parsing with strict key checking, defaults, and
// translation into the library's phantom/geometry/solver settings.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spectre/projector.hpp"
#include "spectre/regularizers.hpp"
#include "spectre/solver.hpp"
#include "spectre/spectral_model.hpp"

namespace spectre {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PhantomConfig {
  std::string type = "phantom1";
  Index n1 = 128, n2 = 128;
  std::vector<double> energies = uniform_energies(12);
  std::uint64_t seed = 7;          // texture seed (phantom2)
  double pixel_size_cm = 0.00025;  // physical pixel pitch
  double length_unit_cm = 8.0;     // reconstruction length unit; mu is stored per unit
  double texture_amplitude = 0.05;
  double background_ramp = 0.02;
};

struct RunConfig {
  PhantomConfig phantom;
  Index n_angles = 16;
  Index n_det = 0;
  double det_spacing = 0.0;        // length units, 0 = pixel size
  double photons_per_bin = 1e6;
  SolverConfig solver;
  std::vector<Method> compare_methods = all_methods();
  std::uint64_t seed = 1;          // noise seed
  std::string output_dir = "out";

  [[nodiscard]] Geometry geometry() const {
    Geometry g;
    g.n1 = phantom.n1;
    g.n2 = phantom.n2;
    g.n_angles = n_angles;
    g.n_det = n_det;
    g.pixel_size = phantom.pixel_size_cm / phantom.length_unit_cm;
    g.det_spacing = det_spacing;
    return g;
  }

  [[nodiscard]] Phantom build_phantom() const {
    if (phantom.type == "phantom1") return build_phantom1(phantom.n1, phantom.n2, phantom.energies, phantom.length_unit_cm);
    TextureOptions t;
    t.amplitude = phantom.texture_amplitude;
    t.ramp = phantom.background_ramp;
    return build_phantom2(phantom.n1, phantom.n2, phantom.energies, phantom.seed, phantom.length_unit_cm, t);
  }

  [[nodiscard]] Vector source() const {
    return Vector::Constant(static_cast<Index>(phantom.energies.size()), photons_per_bin);
  }
};

namespace detail {

using json = nlohmann::json;

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline double get_number(const json& j, const char* key, const std::string& where, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + "." + key + ": must be finite");
  return v;
}

inline Index get_index(const json& j, const char* key, const std::string& where, Index fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return static_cast<Index>(j.at(key).get<long long>());
}

inline std::vector<double> get_energies(const json& j) {
  const std::string where = "phantom.energies";
  if (j.is_array()) {
    std::vector<double> e;
    for (const auto& v : j) {
      if (!v.is_number()) throw ConfigError(where + ": entries must be numbers");
      e.push_back(v.get<double>());
    }
    if (e.empty()) throw ConfigError(where + ": empty list");
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!(e[i] >= 1.0)) throw ConfigError(where + ": energies must be >= 1 keV");
      if (i > 0 && !(e[i] > e[i - 1])) throw ConfigError(where + ": energies must be strictly increasing");
    }
    return e;
  }
  allow_keys(j, where, {"count", "min_kev", "max_kev"});
  const Index n = get_index(j, "count", where, 12);
  const double lo = get_number(j, "min_kev", where, 25.0);
  const double hi = get_number(j, "max_kev", where, 85.0);
  if (n < 1) throw ConfigError(where + ".count: must be >= 1");
  if (!(lo >= 1.0) || !(hi > lo || (n == 1 && hi >= lo))) throw ConfigError(where + ": need 1 <= min_kev < max_kev");
  return uniform_energies(n, lo, hi);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using detail::allow_keys;
  using detail::get_index;
  using detail::get_number;
  RunConfig rc;
  allow_keys(j, "config", {"phantom", "geometry", "spectrum", "solver", "compare_methods", "seed", "output_dir"});

  if (j.contains("phantom")) {
    const auto& p = j.at("phantom");
    allow_keys(p, "phantom", {"type", "dims", "energies", "seed", "pixel_size_cm", "length_unit_cm", "texture_amplitude",
                              "background_ramp"});
    rc.phantom.type = detail::get<std::string>(p, "type", "phantom", rc.phantom.type);
    if (rc.phantom.type != "phantom1" && rc.phantom.type != "phantom2")
      throw ConfigError("phantom.type: expected 'phantom1' or 'phantom2'");
    if (p.contains("dims")) {
      const auto& d = p.at("dims");
      if (!d.is_array() || d.size() != 2 || !d[0].is_number_integer() || !d[1].is_number_integer())
        throw ConfigError("phantom.dims: expected [N1, N2]");
      rc.phantom.n1 = d[0].get<Index>();
      rc.phantom.n2 = d[1].get<Index>();
    }
    if (p.contains("energies")) rc.phantom.energies = detail::get_energies(p.at("energies"));
    if (p.contains("seed") && !p.at("seed").is_number_unsigned()) throw ConfigError("phantom.seed: expected a non-negative integer");
    rc.phantom.seed = detail::get<std::uint64_t>(p, "seed", "phantom", rc.phantom.seed);
    rc.phantom.pixel_size_cm = get_number(p, "pixel_size_cm", "phantom", rc.phantom.pixel_size_cm);
    rc.phantom.length_unit_cm = get_number(p, "length_unit_cm", "phantom", rc.phantom.length_unit_cm);
    rc.phantom.texture_amplitude = get_number(p, "texture_amplitude", "phantom", rc.phantom.texture_amplitude);
    rc.phantom.background_ramp = get_number(p, "background_ramp", "phantom", rc.phantom.background_ramp);
  }
  if (rc.phantom.n1 < 32 || rc.phantom.n2 < 32) throw ConfigError("phantom.dims: N1 and N2 must be >= 32");
  if (!(rc.phantom.pixel_size_cm > 0.0)) throw ConfigError("phantom.pixel_size_cm: must be > 0");
  if (!(rc.phantom.length_unit_cm > 0.0)) throw ConfigError("phantom.length_unit_cm: must be > 0");
  if (rc.phantom.texture_amplitude < 0.0) throw ConfigError("phantom.texture_amplitude: must be >= 0");
  if (rc.phantom.background_ramp < 0.0 || rc.phantom.background_ramp >= 2.0) throw ConfigError("phantom.background_ramp: must be in [0, 2)");

  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    allow_keys(g, "geometry", {"angles", "n_det", "det_spacing"});
    rc.n_angles = get_index(g, "angles", "geometry", rc.n_angles);
    rc.n_det = get_index(g, "n_det", "geometry", rc.n_det);
    rc.det_spacing = get_number(g, "det_spacing", "geometry", rc.det_spacing);
  }
  if (rc.n_angles < 1) throw ConfigError("geometry.angles: must be >= 1");
  if (rc.n_det < 0) throw ConfigError("geometry.n_det: must be >= 1 (0 selects the default)");
  if (rc.det_spacing < 0.0) throw ConfigError("geometry.det_spacing: must be >= 0");

  if (j.contains("spectrum")) {
    const auto& s = j.at("spectrum");
    allow_keys(s, "spectrum", {"photons_per_bin"});
    rc.photons_per_bin = get_number(s, "photons_per_bin", "spectrum", rc.photons_per_bin);
  }
  if (!(rc.photons_per_bin > 0.0)) throw ConfigError("spectrum.photons_per_bin: must be > 0");

  const auto n3 = static_cast<Index>(rc.phantom.energies.size());
  SolverConfig& sc = rc.solver;
  sc.weights.alpha = alpha_schedule(n3);
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    allow_keys(s, "solver", {"method", "eta", "gamma_unfold", "gamma_tsvd", "alpha", "alpha_3d", "energy_weight_3d", "outer_iters",
                             "fista_iters", "tv_prox_iters", "lipschitz", "fbp_warm_start", "clip_nonnegative", "early_stop",
                             "randomized_svd", "svd_rank_hint"});
    if (s.contains("method")) {
      try {
        sc.method = parse_method(detail::get<std::string>(s, "method", "solver", ""));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("solver.method: ") + e.what());
      }
    }
    sc.eta = get_number(s, "eta", "solver", sc.eta);
    if (s.contains("gamma_unfold")) {
      const auto& g = s.at("gamma_unfold");
      if (!g.is_array() || g.size() != 3) throw ConfigError("solver.gamma_unfold: expected three numbers");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!g[i].is_number()) throw ConfigError("solver.gamma_unfold: expected three numbers");
        sc.weights.gamma_unfold[i] = g[i].get<double>();
      }
    }
    sc.weights.gamma_tsvd = get_number(s, "gamma_tsvd", "solver", sc.weights.gamma_tsvd);
    if (s.contains("alpha")) {
      const auto& a = s.at("alpha");
      if (a.is_array()) {
        sc.weights.alpha.clear();
        for (const auto& v : a) {
          if (!v.is_number()) throw ConfigError("solver.alpha: entries must be numbers");
          sc.weights.alpha.push_back(v.get<double>());
        }
        if (static_cast<Index>(sc.weights.alpha.size()) != n3)
          throw ConfigError("solver.alpha: need one entry per energy bin (" + std::to_string(n3) + ")");
      } else {
        allow_keys(a, "solver.alpha", {"high", "low"});
        sc.weights.alpha = alpha_schedule(n3, get_number(a, "high", "solver.alpha", 0.05), get_number(a, "low", "solver.alpha", 0.03));
      }
    }
    sc.weights.alpha_3d = get_number(s, "alpha_3d", "solver", sc.weights.alpha_3d);
    sc.weights.energy_weight_3d = get_number(s, "energy_weight_3d", "solver", sc.weights.energy_weight_3d);
    sc.outer_iters = static_cast<int>(get_index(s, "outer_iters", "solver", sc.outer_iters));
    sc.fista_iters = static_cast<int>(get_index(s, "fista_iters", "solver", sc.fista_iters));
    sc.tv_prox_iters = static_cast<int>(get_index(s, "tv_prox_iters", "solver", sc.tv_prox_iters));
    if (s.contains("lipschitz") && !s.at("lipschitz").is_null()) sc.lipschitz = get_number(s, "lipschitz", "solver", 1.0);
    sc.fbp_warm_start = detail::get<bool>(s, "fbp_warm_start", "solver", sc.fbp_warm_start);
    sc.clip_nonnegative = detail::get<bool>(s, "clip_nonnegative", "solver", sc.clip_nonnegative);
    sc.early_stop = detail::get<bool>(s, "early_stop", "solver", sc.early_stop);
    sc.randomized_svd = detail::get<bool>(s, "randomized_svd", "solver", sc.randomized_svd);
    sc.svd_rank_hint = get_index(s, "svd_rank_hint", "solver", sc.svd_rank_hint);
  }
  try {
    sc.validate(n3);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (j.contains("compare_methods")) {
    const auto& m = j.at("compare_methods");
    if (!m.is_array() || m.empty()) throw ConfigError("compare_methods: expected a non-empty list");
    rc.compare_methods.clear();
    for (const auto& v : m) {
      if (!v.is_string()) throw ConfigError("compare_methods: entries must be strings");
      try {
        rc.compare_methods.push_back(parse_method(v.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("compare_methods: ") + e.what());
      }
    }
  }
  if (j.contains("seed") && !j.at("seed").is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
  rc.seed = detail::get<std::uint64_t>(j, "seed", "config", rc.seed);
  rc.output_dir = detail::get<std::string>(j, "output_dir", "config", rc.output_dir);
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

/// Fully resolved configuration, suitable for echoing next to outputs.
inline nlohmann::json to_json(const RunConfig& rc) {
  const auto& s = rc.solver;
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : rc.compare_methods) methods.push_back(to_string(m));
  const Geometry g = rc.geometry();
  nlohmann::json j = {
      {"phantom",
       {{"type", rc.phantom.type},
        {"dims", {rc.phantom.n1, rc.phantom.n2}},
        {"energies", rc.phantom.energies},
        {"seed", rc.phantom.seed},
        {"pixel_size_cm", rc.phantom.pixel_size_cm},
        {"length_unit_cm", rc.phantom.length_unit_cm},
        {"texture_amplitude", rc.phantom.texture_amplitude},
        {"background_ramp", rc.phantom.background_ramp}}},
      {"geometry", {{"angles", rc.n_angles}, {"n_det", g.detectors()}, {"det_spacing", g.spacing()}}},
      {"spectrum", {{"photons_per_bin", rc.photons_per_bin}}},
      {"solver",
       {{"method", to_string(s.method)},
        {"eta", s.eta},
        {"gamma_unfold", s.weights.gamma_unfold},
        {"gamma_tsvd", s.weights.gamma_tsvd},
        {"alpha", s.weights.alpha},
        {"alpha_3d", s.weights.alpha_3d},
        {"energy_weight_3d", s.weights.energy_weight_3d},
        {"outer_iters", s.outer_iters},
        {"fista_iters", s.fista_iters},
        {"tv_prox_iters", s.tv_prox_iters},
        {"lipschitz", s.lipschitz ? nlohmann::json(*s.lipschitz) : nlohmann::json(nullptr)},
        {"fbp_warm_start", s.fbp_warm_start},
        {"clip_nonnegative", s.clip_nonnegative},
        {"early_stop", s.early_stop},
        {"randomized_svd", s.randomized_svd},
        {"svd_rank_hint", s.svd_rank_hint}}},
      {"compare_methods", methods},
      {"seed", rc.seed},
      {"output_dir", rc.output_dir},
  };
  return j;
}

}  // namespace spectre
