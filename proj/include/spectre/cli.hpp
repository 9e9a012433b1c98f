#pragma once

// Command-line front end: simulate, reconstruct, compare, evaluate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spectre/common.hpp"
#include "spectre/projector.hpp"
#include "spectre/run_config.hpp"
#include "spectre/solver.hpp"
#include "spectre/spectral_model.hpp"
#include "spectre/t3d_io.hpp"

namespace spectre {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitNumeric = 3 };

/// Index of the energy bin closest to kev.
inline Index nearest_bin(const std::vector<double>& energies, double kev) {
  Index best = 0;
  for (Index k = 1; k < static_cast<Index>(energies.size()); ++k)
    if (std::abs(energies[static_cast<std::size_t>(k)] - kev) < std::abs(energies[static_cast<std::size_t>(best)] - kev)) best = k;
  return best;
}

/// 8-bit binary PGM of a min/max-normalized slice; i1 runs left to right and
/// i2 bottom to top.
inline void write_pgm(const std::filesystem::path& path, const Eigen::Ref<const Matrix>& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const double lo = img.minCoeff(), hi = img.maxCoeff();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  os << "P5\n" << img.rows() << ' ' << img.cols() << "\n255\n";
  for (Index i2 = img.cols() - 1; i2 >= 0; --i2)
    for (Index i1 = 0; i1 < img.rows(); ++i1) {
      const auto v = static_cast<unsigned char>(std::lround(std::clamp((img(i1, i2) - lo) * scale, 0.0, 255.0)));
      os.put(static_cast<char>(v));
    }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

namespace detail {

struct CliOptions {
  std::string verb;
  std::string config;
  std::string out;
  std::string in;
  std::string truth;
  std::string recon;
  std::vector<std::string> methods;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline RunConfig resolve_config(const CliOptions& o, const std::filesystem::path& in_dir) {
  RunConfig rc;
  if (!o.config.empty()) {
    rc = load_run_config(o.config);
  } else if (!in_dir.empty() && std::filesystem::exists(in_dir / "geometry.json")) {
    rc = load_run_config(in_dir / "geometry.json");
  }
  if (o.seed) rc.seed = *o.seed;
  if (!o.out.empty()) rc.output_dir = o.out;
  return rc;
}

struct Simulation {
  Phantom phantom;
  Geometry geometry;
  SystemMatrix A;
  MeasurementSet counts;
};

inline Simulation simulate(const RunConfig& rc) {
  Simulation s;
  s.phantom = rc.build_phantom();
  s.geometry = rc.geometry();
  s.A = build_system_matrix(s.geometry);
  s.counts = simulate_counts(s.phantom.truth, s.A, rc.source(), rc.seed);
  return s;
}

inline Tensor3 counts_tensor(const MeasurementSet& ms, const Geometry& g) {
  const Index n3 = ms.counts.cols();
  std::vector<double> v(ms.counts.data(), ms.counts.data() + ms.counts.size());
  return Tensor3({g.n_angles, g.detectors(), n3}, std::move(v));
}

inline MeasurementSet counts_from_tensor(const Tensor3& t, const RunConfig& rc) {
  const Geometry g = rc.geometry();
  const auto n3 = static_cast<Index>(rc.phantom.energies.size());
  if (t.n1() != g.n_angles || t.n2() != g.detectors() || t.n3() != n3)
    throw std::invalid_argument("counts.t3d dims do not match the configured geometry and energies");
  MeasurementSet ms;
  ms.counts = Eigen::Map<const Matrix>(t.data(), g.rays(), n3);
  ms.source = rc.source();
  ms.seed = rc.seed;
  return ms;
}

inline void write_outputs_for_simulation(const std::filesystem::path& dir, const RunConfig& rc, const Simulation& s) {
  std::filesystem::create_directories(dir);
  save_t3d(dir / "truth.t3d", s.phantom.truth);
  save_t3d(dir / "counts.t3d", counts_tensor(s.counts, s.geometry));
  std::ofstream os(dir / "geometry.json");
  os << to_json(rc).dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write geometry.json");
}

inline void write_history(const std::filesystem::path& path, const ReconResult& r, const std::vector<double>& energies) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "iter,objective,residual";
  const bool errs = !r.history.empty() && !r.history.front().errors.empty();
  if (errs)
    for (double e : energies) os << ",E_" << format_double(e) << "keV";
  os << '\n';
  for (const auto& h : r.history) {
    os << h.iter << ',' << format_double(h.objective) << ',' << format_double(h.residual);
    for (double e : h.errors) os << ',' << format_double(e);
    os << '\n';
  }
}

inline void log_progress(const IterationRecord& r) {
  std::cerr << "  iter " << r.iter << "  objective " << r.objective << "  residual " << r.residual;
  if (!r.errors.empty()) std::cerr << "  E[0] " << r.errors.front() << "  E[last] " << r.errors.back();
  std::cerr << '\n';
}

inline Problem make_problem(const RunConfig& rc, const SystemMatrix& A, const MeasurementSet& ms, std::optional<Tensor3> truth) {
  Problem p;
  p.A = &A;
  p.geometry = rc.geometry();
  p.data = pwls_transform(ms);
  p.truth = std::move(truth);
  return p;
}

inline int cmd_simulate(const CliOptions& o) {
  const RunConfig rc = resolve_config(o, {});
  const Simulation s = simulate(rc);
  write_outputs_for_simulation(rc.output_dir, rc, s);
  std::cout << "wrote truth.t3d, counts.t3d, geometry.json to " << rc.output_dir << '\n';
  return kExitOk;
}

inline int cmd_reconstruct(const CliOptions& o) {
  const std::filesystem::path in_dir = o.in.empty() ? (o.out.empty() ? std::filesystem::path() : std::filesystem::path(o.out)) : std::filesystem::path(o.in);
  const RunConfig rc = resolve_config(o, in_dir);
  const std::filesystem::path src = in_dir.empty() ? std::filesystem::path(rc.output_dir) : in_dir;
  if (!std::filesystem::exists(src / "counts.t3d"))
    throw std::invalid_argument("missing input " + (src / "counts.t3d").string() + " (run 'simulate' first)");
  const MeasurementSet ms = counts_from_tensor(load_t3d(src / "counts.t3d"), rc);
  std::optional<Tensor3> truth;
  if (std::filesystem::exists(src / "truth.t3d")) truth = load_t3d(src / "truth.t3d");
  const SystemMatrix A = build_system_matrix(rc.geometry());
  const Problem p = make_problem(rc, A, ms, std::move(truth));
  const ReconResult r = reconstruct(rc.solver, p, log_progress);

  const std::filesystem::path out = rc.output_dir;
  std::filesystem::create_directories(out);
  save_t3d(out / "recon.t3d", r.chi);
  write_history(out / "history.csv", r, rc.phantom.energies);
  for (double kev : {25.0, 85.0}) {
    const Index k = nearest_bin(rc.phantom.energies, kev);
    write_pgm(out / ("recon_" + format_double(rc.phantom.energies[static_cast<std::size_t>(k)]) + "keV.pgm"), r.chi.slice(k));
  }
  std::cout << to_string(rc.solver.method) << " finished in " << r.wall_seconds << " s; wrote recon.t3d, history.csv to "
            << out.string() << '\n';
  return kExitOk;
}

inline int cmd_compare(const CliOptions& o) {
  const std::filesystem::path in_dir = o.in;
  RunConfig rc = resolve_config(o, in_dir);
  if (!o.methods.empty()) {
    rc.compare_methods.clear();
    for (const auto& m : o.methods) rc.compare_methods.push_back(parse_method(m));
  }
  const std::filesystem::path out = rc.output_dir;
  std::filesystem::create_directories(out);

  SystemMatrix A;
  MeasurementSet ms;
  Tensor3 truth;
  if (!in_dir.empty()) {
    if (!std::filesystem::exists(in_dir / "counts.t3d") || !std::filesystem::exists(in_dir / "truth.t3d"))
      throw std::invalid_argument("compare needs counts.t3d and truth.t3d in " + in_dir.string());
    ms = counts_from_tensor(load_t3d(in_dir / "counts.t3d"), rc);
    truth = load_t3d(in_dir / "truth.t3d");
    A = build_system_matrix(rc.geometry());
  } else {
    Simulation s = simulate(rc);
    write_outputs_for_simulation(out, rc, s);
    A = std::move(s.A);
    ms = std::move(s.counts);
    truth = std::move(s.phantom.truth);
  }
  const Problem p = make_problem(rc, A, ms, truth);
  const Index k25 = nearest_bin(rc.phantom.energies, 25.0), k85 = nearest_bin(rc.phantom.energies, 85.0);

  std::ofstream csv(out / "compare.csv");
  if (!csv) throw std::runtime_error("cannot write compare.csv");
  csv << "method,E_l2_" << format_double(rc.phantom.energies[static_cast<std::size_t>(k25)]) << "keV,E_l2_"
      << format_double(rc.phantom.energies[static_cast<std::size_t>(k85)]) << "keV,wall_time_s\n";
  for (Method m : rc.compare_methods) {
    SolverConfig sc = rc.solver;
    sc.method = m;
    std::cerr << "running " << to_string(m) << '\n';
    const ReconResult r = reconstruct(sc, p, log_progress);
    const auto e = per_energy_errors(r.chi, truth);
    csv << to_string(m) << ',' << format_double(e[static_cast<std::size_t>(k25)]) << ','
        << format_double(e[static_cast<std::size_t>(k85)]) << ',' << format_double(r.wall_seconds) << '\n';
    std::cout << std::left << std::setw(9) << to_string(m) << "  E25 " << std::setw(12) << e[static_cast<std::size_t>(k25)]
              << "  E85 " << std::setw(12) << e[static_cast<std::size_t>(k85)] << "  " << r.wall_seconds << " s\n";
  }
  return kExitOk;
}

inline int cmd_evaluate(const CliOptions& o) {
  const std::filesystem::path dir = o.in.empty() ? std::filesystem::path(o.out.empty() ? "out" : o.out) : std::filesystem::path(o.in);
  const std::filesystem::path truth_path = o.truth.empty() ? dir / "truth.t3d" : std::filesystem::path(o.truth);
  const std::filesystem::path recon_path = o.recon.empty() ? dir / "recon.t3d" : std::filesystem::path(o.recon);
  for (const auto& pth : {truth_path, recon_path})
    if (!std::filesystem::exists(pth)) throw std::invalid_argument("missing input " + pth.string());
  const Tensor3 truth = load_t3d(truth_path);
  const Tensor3 recon = load_t3d(recon_path);
  if (truth.dims() != recon.dims()) throw std::invalid_argument("truth and recon dims differ");
  std::vector<double> energies;
  const RunConfig rc = resolve_config(o, dir);
  if (static_cast<Index>(rc.phantom.energies.size()) == truth.n3()) energies = rc.phantom.energies;
  const auto e = per_energy_errors(recon, truth);
  std::cout << "bin,energy_kev,E_l2\n";
  for (Index k = 0; k < truth.n3(); ++k)
    std::cout << k << ',' << (energies.empty() ? std::string("") : format_double(energies[static_cast<std::size_t>(k)])) << ','
              << format_double(e[static_cast<std::size_t>(k)]) << '\n';
  return kExitOk;
}

}  // namespace detail

/// Entry point shared by the spectre executable and the tests.
inline int run_cli(int argc, char** argv) {
  detail::CliOptions o;
  CLI::App app{"Spectral CT reconstruction with tensor nuclear norms"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration (JSON)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", seed, "noise seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  };
  auto* sim = app.add_subcommand("simulate", "simulate phantom and photon counts");
  add_common(sim);
  auto* rec = app.add_subcommand("reconstruct", "reconstruct from simulated counts");
  add_common(rec);
  rec->add_option("--in", o.in, "directory with counts.t3d (default: output directory)");
  auto* cmp = app.add_subcommand("compare", "run several methods on the same counts");
  add_common(cmp);
  cmp->add_option("--in", o.in, "directory with counts.t3d and truth.t3d (default: simulate)");
  cmp->add_option("--methods", o.methods, "methods to run (default: all)");
  auto* ev = app.add_subcommand("evaluate", "relative l2 error per energy bin");
  add_common(ev);
  ev->add_option("--in", o.in, "directory with truth.t3d and recon.t3d");
  ev->add_option("--truth", o.truth, "truth tensor");
  ev->add_option("--recon", o.recon, "reconstructed tensor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }
  for (auto* sub : {sim, rec, cmp, ev})
    if (sub->parsed()) {
      o.verb = sub->get_name();
      if (sub->count("--seed")) o.seed = seed;
      if (sub->count("--threads")) o.threads = threads;
    }

  int nthreads = 0;
  if (o.threads) {
    nthreads = *o.threads;
  } else if (const char* env = std::getenv("SPECTRE_THREADS")) {
    try {
      nthreads = std::max(0, std::stoi(env));
    } catch (const std::exception&) {
      std::cerr << "error: SPECTRE_THREADS must be a non-negative integer\n";
      return kExitInput;
    }
  }
  set_num_threads(nthreads);

  try {
    if (o.verb == "simulate") return detail::cmd_simulate(o);
    if (o.verb == "reconstruct") return detail::cmd_reconstruct(o);
    if (o.verb == "compare") return detail::cmd_compare(o);
    return detail::cmd_evaluate(o);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace spectre
