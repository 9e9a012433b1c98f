#pragma once

// Parametric attenuation curves, multi-energy phantoms, Poisson count
// simulation and the PWLS log transform.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "spectre/common.hpp"
#include "spectre/projector.hpp"
#include "spectre/random.hpp"
#include "spectre/tensor3.hpp"

namespace spectre {

inline constexpr double kReferenceEnergy = 25.0;  // keV
inline constexpr double kElectronRestEnergy = 510.99895;  // keV

/// Klein-Nishina total cross section per electron, in units of the classical
/// electron radius squared times 2 pi.
inline double klein_nishina(double energy_kev) {
  if (!(energy_kev > 0.0)) throw std::invalid_argument("klein_nishina: energy must be positive");
  const double e = energy_kev / kElectronRestEnergy;
  const double l = std::log1p(2.0 * e);
  const double q = 1.0 + 2.0 * e;
  return (1.0 + e) / (e * e) * (2.0 * (1.0 + e) / q - l / e) + l / (2.0 * e) - (1.0 + 3.0 * e) / (q * q);
}

struct MaterialModel {
  std::string name;
  double a_pe = 0.0;  // photoelectric part at the reference energy, 1/cm
  double a_c = 0.0;   // Compton part at the reference energy, 1/cm
};

/// mu(E) = a_pe (E0/E)^3 + a_c f_KN(E) / f_KN(E0), in 1/cm.
inline double attenuation(const MaterialModel& m, double energy_kev) {
  if (!(energy_kev > 0.0)) throw std::invalid_argument("attenuation: energy must be positive");
  const double r = kReferenceEnergy / energy_kev;
  return m.a_pe * r * r * r + m.a_c * klein_nishina(energy_kev) / klein_nishina(kReferenceEnergy);
}

inline std::vector<MaterialModel> material_presets() {
  return {
      {"air", 0.0, 0.0},
      {"water", 0.30, 0.20},
      {"aluminum", 1.65, 0.35},
      {"teflon", 0.95, 0.30},
      {"nylon", 0.45, 0.22},
      {"soft_plastic", 0.10, 0.12},
  };
}

inline std::vector<double> uniform_energies(Index n, double lo = 25.0, double hi = 85.0) {
  if (n < 1) throw std::invalid_argument("uniform_energies: need at least one bin");
  std::vector<double> e(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k)
    e[static_cast<std::size_t>(k)] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return e;
}

struct Phantom {
  Eigen::MatrixXi labels;                 // N1 x N2 indices into materials
  std::vector<MaterialModel> materials;
  std::vector<double> energies;           // keV, one per frontal slice
  double mu_scale = 1.0;                  // length unit in cm; truth is mu [1/cm] * mu_scale
  Matrix texture;                         // N1 x N2 multiplicative texture field in [-1, 1] (zero for Phantom-1)
  Matrix ramp;                            // N1 x N2 background gain (ones for Phantom-1)
  Tensor3 truth;
};

struct TextureOptions {
  double amplitude = 0.05;  // peak relative modulation at the reference energy
  double ramp = 0.02;       // background gain spans 1 - ramp/2 .. 1 + ramp/2 along i1
  int waves = 24;
  double min_frequency = 3.0;  // cycles per unit of normalized coordinate
  double max_frequency = 7.0;
};

namespace detail {

inline double normalized_coord(Index i, Index n) {
  return (static_cast<double>(i) + 0.5 - 0.5 * static_cast<double>(n)) / (0.5 * static_cast<double>(n));
}

inline bool inside_ellipse(double u, double v, double cu, double cv, double au, double av) {
  const double du = (u - cu) / au, dv = (v - cv) / av;
  return du * du + dv * dv <= 1.0;
}

// Container disk of water with four inclusions, in normalized coordinates
// (u, v) in [-1, 1]^2. Labels index material_presets().
inline int phantom1_label(double u, double v) {
  if (u * u + v * v > 0.81) return 0;
  if (inside_ellipse(u, v, -0.40, -0.35, 0.20, 0.20)) return 2;
  if (inside_ellipse(u, v, 0.40, -0.30, 0.25, 0.15)) return 3;
  if (inside_ellipse(u, v, -0.35, 0.40, 0.18, 0.18)) return 4;
  if (inside_ellipse(u, v, 0.35, 0.40, 0.15, 0.25)) return 5;
  return 1;
}

inline void fill_truth(Phantom& ph) {
  const Index n1 = ph.labels.rows(), n2 = ph.labels.cols();
  const auto n3 = static_cast<Index>(ph.energies.size());
  ph.truth = Tensor3(n1, n2, n3);
  for (Index k = 0; k < n3; ++k) {
    const double e = ph.energies[static_cast<std::size_t>(k)];
    const double g = std::sqrt(kReferenceEnergy / e);
    std::vector<double> mu(ph.materials.size());
    for (std::size_t m = 0; m < mu.size(); ++m) mu[m] = attenuation(ph.materials[m], e) * ph.mu_scale;
    for (Index i2 = 0; i2 < n2; ++i2)
      for (Index i1 = 0; i1 < n1; ++i1) {
        const int lab = ph.labels(i1, i2);
        double v = mu[static_cast<std::size_t>(lab)];
        if (lab == 1) v *= ph.ramp(i1, i2);
        else if (lab > 1) v *= 1.0 + ph.texture(i1, i2) * g;
        ph.truth(i1, i2, k) = v;
      }
  }
}

inline void check_phantom_args(Index n1, Index n2, const std::vector<double>& energies, double mu_scale) {
  if (n1 < 32 || n2 < 32) throw std::invalid_argument("phantom: N1 and N2 must be >= 32");
  if (energies.empty()) throw std::invalid_argument("phantom: need at least one energy");
  for (double e : energies)
    if (!(e >= 1.0)) throw std::invalid_argument("phantom: energies must be >= 1 keV");
  if (!(mu_scale > 0.0)) throw std::invalid_argument("phantom: mu_scale must be positive");
}

}  // namespace detail

/// Piecewise-constant phantom: water container with aluminum, teflon, nylon
/// and soft-plastic inclusions. Labels are sampled at pixel centers.
inline Phantom build_phantom1(Index n1, Index n2, const std::vector<double>& energies, double mu_scale = 1.0) {
  detail::check_phantom_args(n1, n2, energies, mu_scale);
  Phantom ph;
  ph.materials = material_presets();
  ph.energies = energies;
  ph.mu_scale = mu_scale;
  ph.labels.resize(n1, n2);
  for (Index i2 = 0; i2 < n2; ++i2)
    for (Index i1 = 0; i1 < n1; ++i1)
      ph.labels(i1, i2) = detail::phantom1_label(detail::normalized_coord(i1, n1), detail::normalized_coord(i2, n2));
  ph.texture = Matrix::Zero(n1, n2);
  ph.ramp = Matrix::Ones(n1, n2);
  detail::fill_truth(ph);
  return ph;
}

/// Phantom-1 layout with a seeded isotropic band-limited texture on the
/// inclusions and a linear gain ramp on the water background. The texture
/// strength decays as sqrt(E0/E), so it adds spectral components beyond the
/// two-term attenuation model.
inline Phantom build_phantom2(Index n1, Index n2, const std::vector<double>& energies, std::uint64_t texture_seed,
                              double mu_scale = 1.0, const TextureOptions& opt = {}) {
  Phantom ph = build_phantom1(n1, n2, energies, mu_scale);
  if (opt.amplitude < 0.0 || opt.ramp < 0.0 || opt.ramp >= 2.0)
    throw std::invalid_argument("phantom2: amplitude must be >= 0 and ramp in [0, 2)");
  if (opt.amplitude > 0.0) {
    SplitMix64 rng = SplitMix64::stream(texture_seed, 0x7E47u, 0);
    Matrix field = Matrix::Zero(n1, n2);
    for (int w = 0; w < opt.waves; ++w) {
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      const double f = opt.min_frequency + (opt.max_frequency - opt.min_frequency) * rng.uniform();
      const double psi = 2.0 * std::numbers::pi * rng.uniform();
      const double cu = std::cos(theta), cv = std::sin(theta);
      for (Index i2 = 0; i2 < n2; ++i2)
        for (Index i1 = 0; i1 < n1; ++i1) {
          const double u = detail::normalized_coord(i1, n1), v = detail::normalized_coord(i2, n2);
          field(i1, i2) += std::cos(2.0 * std::numbers::pi * f * (u * cu + v * cv) + psi);
        }
    }
    const double peak = field.cwiseAbs().maxCoeff();
    if (peak > 0.0) ph.texture = field * (opt.amplitude / peak);
  }
  for (Index i1 = 0; i1 < n1; ++i1)
    ph.ramp.row(i1).setConstant(1.0 - 0.5 * opt.ramp + opt.ramp * static_cast<double>(i1) / static_cast<double>(n1 - 1));
  detail::fill_truth(ph);
  return ph;
}

struct MeasurementSet {
  Matrix counts;     // Nm x N3, nonnegative integers stored as doubles
  Vector source;     // s_k, one per energy
  std::uint64_t seed = 0;
};

struct PWLSData {
  Matrix m;  // Nm x N3 log-transformed sinograms
  Matrix w;  // Nm x N3 weights (the counts)

  [[nodiscard]] Index rays() const { return m.rows(); }
  [[nodiscard]] Index bins() const { return m.cols(); }
};

/// Projections A x_k of every frontal slice, as an Nm x N3 matrix.
inline Matrix project_tensor(const SystemMatrix& A, const Tensor3& x) {
  if (A.cols() != x.slice_size()) throw std::invalid_argument("project_tensor: grid does not match system matrix");
  Matrix out(A.rows(), x.n3());
  parallel_for(0, x.n3(), [&](std::ptrdiff_t k) { out.col(k) = A * x.slice_vec(k); });
  return out;
}

/// y_kj ~ Poisson(s_k exp(-[A x_k]_j)), one independent stream per (k, j).
inline MeasurementSet simulate_counts(const Tensor3& truth, const SystemMatrix& A, const Vector& source, std::uint64_t seed) {
  if (source.size() != truth.n3()) throw std::invalid_argument("simulate_counts: need one source intensity per energy");
  for (Index k = 0; k < source.size(); ++k)
    if (!(source(k) > 0.0) || !std::isfinite(source(k))) throw std::invalid_argument("simulate_counts: source intensities must be positive");
  const Matrix li = project_tensor(A, truth);
  MeasurementSet ms;
  ms.source = source;
  ms.seed = seed;
  ms.counts.resize(li.rows(), li.cols());
  const Index nm = li.rows();
  parallel_for(0, li.cols(), [&](std::ptrdiff_t k) {
    for (Index j = 0; j < nm; ++j) {
      auto rng = SplitMix64::stream(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(j));
      ms.counts(j, k) = static_cast<double>(poisson_sample(source(k) * std::exp(-li(j, k)), rng));
    }
  });
  return ms;
}

/// m = log(s_k / y), w = y; rays with zero counts get m = w = 0.
inline PWLSData pwls_transform(const MeasurementSet& ms) {
  if (ms.source.size() != ms.counts.cols()) throw std::invalid_argument("pwls_transform: source length does not match counts");
  PWLSData d;
  d.m = Matrix::Zero(ms.counts.rows(), ms.counts.cols());
  d.w = Matrix::Zero(ms.counts.rows(), ms.counts.cols());
  for (Index k = 0; k < ms.counts.cols(); ++k)
    for (Index j = 0; j < ms.counts.rows(); ++j) {
      const double y = ms.counts(j, k);
      if (y < 0.0) throw std::invalid_argument("pwls_transform: negative count");
      if (y > 0.0) {
        d.m(j, k) = std::log(ms.source(k) / y);
        d.w(j, k) = y;
      }
    }
  return d;
}

}  // namespace spectre
