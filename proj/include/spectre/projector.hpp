#pragma once

// Parallel-beam geometry, Siddon ray tracing into a sparse system matrix,
// forward/back projection and filtered back projection.
//
// Pixel (i1, i2) has its center at ((i1 + 0.5) p - N1 p / 2, (i2 + 0.5) p - N2 p / 2)
// and lexicographic index i1 + N1 i2, matching a frontal slice of Tensor3.
// Ray (a, d) is the line x cos(phi_a) + y sin(phi_a) = t_d with
// phi_a = a pi / n_angles and t_d = (d - (n_det - 1) / 2) det_spacing; its row
// index is a + n_angles d, so a sinogram vector viewed as an
// n_angles x n_det column-major matrix has views along rows.

#include <Eigen/Sparse>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "spectre/common.hpp"
#include "spectre/tensor3.hpp"

namespace spectre {

using SystemMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Geometry {
  Index n1 = 128;
  Index n2 = 128;
  Index n_angles = 16;
  Index n_det = 0;            // 0 selects ceil(sqrt(2) max(n1, n2))
  double pixel_size = 1.0;    // length units
  double det_spacing = 0.0;   // 0 selects pixel_size

  [[nodiscard]] Index detectors() const {
    return n_det > 0 ? n_det
                     : static_cast<Index>(std::ceil(std::numbers::sqrt2 * static_cast<double>(std::max(n1, n2)) - 1e-9));
  }
  [[nodiscard]] double spacing() const { return det_spacing > 0.0 ? det_spacing : pixel_size; }
  [[nodiscard]] Index rays() const { return n_angles * detectors(); }
  [[nodiscard]] Index pixels() const { return n1 * n2; }

  [[nodiscard]] double angle(Index a) const {
    return std::numbers::pi * static_cast<double>(a) / static_cast<double>(n_angles);
  }
  [[nodiscard]] double offset(Index d) const {
    return (static_cast<double>(d) - 0.5 * static_cast<double>(detectors() - 1)) * spacing();
  }

  void validate() const {
    if (n1 <= 0 || n2 <= 0) throw std::invalid_argument("geometry: grid dimensions must be positive");
    if (n_angles < 1) throw std::invalid_argument("geometry: n_angles must be >= 1");
    if (n_det < 0) throw std::invalid_argument("geometry: n_det must be >= 1 (or 0 for the default)");
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) throw std::invalid_argument("geometry: pixel_size must be positive");
    if (det_spacing < 0.0 || !std::isfinite(det_spacing)) throw std::invalid_argument("geometry: det_spacing must be >= 0");
  }
};

struct Ray {
  double c, s, t;  // line: x c + y s = t, direction (-s, c)
};

inline Ray ray_of(const Geometry& g, Index a, Index d) {
  const double phi = g.angle(a);
  double c = std::cos(phi), s = std::sin(phi);
  if (std::abs(c) < 1e-12) c = 0.0;
  if (std::abs(s) < 1e-12) s = 0.0;
  return {c, s, g.offset(d)};
}

struct RaySegment {
  Index pixel;
  double length;
};

// Exact intersection of one ray with the pixel grid. Pixels are half-open
// boxes [low, high) in both coordinates, so a ray running exactly along a
// grid line belongs to the pixel row or column on its high side, and a ray
// on the outer high edge misses the grid.
inline std::vector<RaySegment> trace_ray(const Geometry& g, const Ray& r) {
  const double p = g.pixel_size;
  const double x0 = -0.5 * static_cast<double>(g.n1) * p, x1 = -x0;
  const double y0 = -0.5 * static_cast<double>(g.n2) * p, y1 = -y0;
  const double bx = r.t * r.c, by = r.t * r.s;  // foot point on the line
  const double ux = -r.s, uy = r.c;             // unit direction

  double smin = -std::numeric_limits<double>::infinity();
  double smax = std::numeric_limits<double>::infinity();
  auto clip = [&](double base, double u, double lo, double hi) {
    if (u == 0.0) {
      if (!(base >= lo && base < hi)) smin = std::numeric_limits<double>::infinity();
      return;
    }
    double a = (lo - base) / u, b = (hi - base) / u;
    if (a > b) std::swap(a, b);
    smin = std::max(smin, a);
    smax = std::min(smax, b);
  };
  clip(bx, ux, x0, x1);
  clip(by, uy, y0, y1);
  std::vector<RaySegment> out;
  if (!(smax > smin)) return out;

  std::vector<double> cuts{smin, smax};
  auto add_planes = [&](double base, double u, double lo, Index n) {
    if (u == 0.0) return;
    for (Index i = 1; i < n; ++i) {
      const double s = (lo + static_cast<double>(i) * p - base) / u;
      if (s > smin && s < smax) cuts.push_back(s);
    }
  };
  add_planes(bx, ux, x0, g.n1);
  add_planes(by, uy, y0, g.n2);
  std::sort(cuts.begin(), cuts.end());

  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = cuts[i + 1] - cuts[i];
    if (!(len > 0.0)) continue;
    const double sm = 0.5 * (cuts[i] + cuts[i + 1]);
    const double xm = bx + sm * ux, ym = by + sm * uy;
    const auto i1 = std::clamp<Index>(static_cast<Index>(std::floor((xm - x0) / p)), 0, g.n1 - 1);
    const auto i2 = std::clamp<Index>(static_cast<Index>(std::floor((ym - y0) / p)), 0, g.n2 - 1);
    const Index pix = i1 + g.n1 * i2;
    if (!out.empty() && out.back().pixel == pix)
      out.back().length += len;
    else
      out.push_back({pix, len});
  }
  return out;
}

inline SystemMatrix build_system_matrix(const Geometry& g) {
  g.validate();
  const Index na = g.n_angles, nd = g.detectors();
  std::vector<std::vector<RaySegment>> rows(static_cast<std::size_t>(na * nd));
  parallel_for(0, na, [&](std::ptrdiff_t a) {
    for (Index d = 0; d < nd; ++d) rows[static_cast<std::size_t>(a + na * d)] = trace_ray(g, ray_of(g, a, d));
  });
  std::vector<Eigen::Triplet<double>> triplets;
  std::size_t nnz = 0;
  for (const auto& r : rows) nnz += r.size();
  triplets.reserve(nnz);
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (const auto& seg : rows[j]) triplets.emplace_back(static_cast<Index>(j), seg.pixel, seg.length);
  SystemMatrix A(na * nd, g.pixels());
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();
  return A;
}

inline Vector forward_project(const SystemMatrix& A, const Eigen::Ref<const Vector>& image) {
  if (image.size() != A.cols()) throw std::invalid_argument("forward_project: image length does not match system matrix");
  return A * image;
}

inline Vector back_project(const SystemMatrix& A, const Eigen::Ref<const Vector>& sino) {
  if (sino.size() != A.rows()) throw std::invalid_argument("back_project: sinogram length does not match system matrix");
  return A.transpose() * sino;
}

namespace detail {

inline Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Frequency response of the band-limited Ram-Lak kernel (sampled in space so
// the DC term is correct) times a Hamming window, for zero-padded length n.
inline std::vector<double> ramp_hamming_response(Index n, double spacing) {
  std::vector<double> h(static_cast<std::size_t>(n), 0.0);
  h[0] = 1.0 / (4.0 * spacing * spacing);
  for (Index k = 1; k <= n / 2; ++k) {
    if (k % 2 == 0) continue;
    const double v = -1.0 / std::pow(std::numbers::pi * static_cast<double>(k) * spacing, 2);
    h[static_cast<std::size_t>(k)] = v;
    if (k != n - k) h[static_cast<std::size_t>(n - k)] = v;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> H;
  fft.fwd(H, h);
  std::vector<double> resp(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    const Index kk = std::min(k, n - k);
    const double window = 0.54 + 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(kk) / static_cast<double>(n));
    resp[static_cast<std::size_t>(k)] = H[static_cast<std::size_t>(k)].real() * spacing * window;
  }
  return resp;
}

}  // namespace detail

/// Filtered back projection of one sinogram (length n_angles * n_det) to an
/// image vector of length n1 * n2.
inline Vector fbp_reconstruct(const Eigen::Ref<const Vector>& sino, const Geometry& g) {
  g.validate();
  const Index na = g.n_angles, nd = g.detectors();
  if (sino.size() != na * nd) throw std::invalid_argument("fbp_reconstruct: sinogram length does not match geometry");
  const double du = g.spacing();
  const Index npad = detail::next_pow2(2 * nd);
  const auto resp = detail::ramp_hamming_response(npad, du);

  Matrix filtered(na, nd);
  parallel_for(0, na, [&](std::ptrdiff_t a) {
    Eigen::FFT<double> fft;
    std::vector<double> row(static_cast<std::size_t>(npad), 0.0);
    for (Index d = 0; d < nd; ++d) row[static_cast<std::size_t>(d)] = sino(a + na * d);
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, row);
    for (Index k = 0; k < npad; ++k) spec[static_cast<std::size_t>(k)] *= resp[static_cast<std::size_t>(k)];
    fft.inv(row, spec);
    for (Index d = 0; d < nd; ++d) filtered(a, d) = row[static_cast<std::size_t>(d)];
  });

  std::vector<double> cs(static_cast<std::size_t>(na)), sn(static_cast<std::size_t>(na));
  for (Index a = 0; a < na; ++a) {
    const Ray r = ray_of(g, a, 0);
    cs[static_cast<std::size_t>(a)] = r.c;
    sn[static_cast<std::size_t>(a)] = r.s;
  }
  const double p = g.pixel_size;
  const double center = 0.5 * static_cast<double>(nd - 1);
  Vector image(g.pixels());
  parallel_for(0, g.n2, [&](std::ptrdiff_t i2) {
    const double y = (static_cast<double>(i2) + 0.5) * p - 0.5 * static_cast<double>(g.n2) * p;
    for (Index i1 = 0; i1 < g.n1; ++i1) {
      const double x = (static_cast<double>(i1) + 0.5) * p - 0.5 * static_cast<double>(g.n1) * p;
      double acc = 0.0;
      for (Index a = 0; a < na; ++a) {
        const double u = (x * cs[static_cast<std::size_t>(a)] + y * sn[static_cast<std::size_t>(a)]) / du + center;
        if (u < 0.0 || u > static_cast<double>(nd - 1)) continue;
        const auto lo = std::min<Index>(static_cast<Index>(u), nd - 2 < 0 ? 0 : nd - 2);
        const double f = u - static_cast<double>(lo);
        acc += (nd == 1) ? filtered(a, 0) : (1.0 - f) * filtered(a, lo) + f * filtered(a, lo + 1);
      }
      image(i1 + g.n1 * i2) = acc * std::numbers::pi / static_cast<double>(na);
    }
  });
  return image;
}

}  // namespace spectre
