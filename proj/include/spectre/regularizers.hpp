#pragma once

// Nuclear norms and their proximal maps (matrix, unfolding-based TNN-1 and
// t-SVD based TNN-2), and isotropic total variation with an FGP dual solver.

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "spectre/common.hpp"
#include "spectre/random.hpp"
#include "spectre/tensor3.hpp"

namespace spectre {

struct RegWeights {
  std::array<double, 3> gamma_unfold{0.4, 0.4, 0.4};
  double gamma_tsvd = 0.1;
  std::vector<double> alpha;  // one per energy bin
  double alpha_3d = 0.1;
  double energy_weight_3d = 1.0;  // weight of the mode-3 difference in 3D TV

  void validate() const {
    for (double g : gamma_unfold)
      if (!(g >= 0.0)) throw std::invalid_argument("weights: gamma_unfold entries must be >= 0");
    if (!(gamma_tsvd >= 0.0)) throw std::invalid_argument("weights: gamma_tsvd must be >= 0");
    for (double a : alpha)
      if (!(a >= 0.0)) throw std::invalid_argument("weights: alpha entries must be >= 0");
    if (!(alpha_3d >= 0.0)) throw std::invalid_argument("weights: alpha_3d must be >= 0");
    if (!(energy_weight_3d >= 0.0)) throw std::invalid_argument("weights: energy_weight_3d must be >= 0");
  }
};

/// alpha_k = lo + (hi - lo) ((N3 - k) / (N3 - 1))^2 for k = 1..N3, so the
/// lowest energy bin gets hi and the highest gets lo.
inline std::vector<double> alpha_schedule(Index n3, double hi = 0.05, double lo = 0.03) {
  std::vector<double> a(static_cast<std::size_t>(n3), hi);
  if (n3 == 1) return a;
  for (Index k = 1; k <= n3; ++k) {
    const double r = static_cast<double>(n3 - k) / static_cast<double>(n3 - 1);
    a[static_cast<std::size_t>(k - 1)] = lo + (hi - lo) * r * r;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Matrix nuclear norm

template <class M>
double nuclear_norm(const M& z) {
  using Plain = typename M::PlainObject;
  if (z.size() == 0) return 0.0;
  Eigen::BDCSVD<Plain> svd(z);
  if (svd.info() != Eigen::Success) throw NumericError("nuclear_norm: SVD failed");
  return svd.singularValues().sum();
}

/// Singular value shrinkage U max(S - tau, 0) V^H, the prox of tau ||.||_*.
template <class M>
typename M::PlainObject sv_shrink(const M& z, double tau) {
  using Plain = typename M::PlainObject;
  if (!(tau >= 0.0)) throw std::invalid_argument("sv_shrink: tau must be >= 0");
  if (tau == 0.0 || z.size() == 0) return z;
  Eigen::BDCSVD<Plain> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericError("sv_shrink: SVD failed");
  const Vector& s = svd.singularValues();
  Index keep = 0;
  while (keep < s.size() && s(keep) > tau) ++keep;
  if (keep == 0) return Plain::Zero(z.rows(), z.cols());
  using Scalar = typename Plain::Scalar;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> shrunk = (s.head(keep).array() - tau).matrix().template cast<Scalar>();
  return svd.matrixU().leftCols(keep) * shrunk.asDiagonal() * svd.matrixV().leftCols(keep).adjoint();
}

struct RandomizedShrinkOptions {
  Index rank_hint = 16;
  Index oversample = 10;
  int max_power_iters = 30;
  double tolerance = 1e-9;
  std::uint64_t seed = 0x5EED;
};

/// Randomized range-finder variant of sv_shrink for real matrices. The sketch
/// grows until its smallest captured singular value falls below tau, and
/// subspace iterations continue until the shrunk result stops changing; when
/// the sketch would cover the full rank the exact shrink is used instead.
inline Matrix sv_shrink_randomized(const Matrix& z, double tau, const RandomizedShrinkOptions& opt = {}) {
  if (!(tau >= 0.0)) throw std::invalid_argument("sv_shrink_randomized: tau must be >= 0");
  const Index full = std::min(z.rows(), z.cols());
  Index l = std::min(full, opt.rank_hint + opt.oversample);
  auto rng = SplitMix64::stream(opt.seed, static_cast<std::uint64_t>(z.rows()), static_cast<std::uint64_t>(z.cols()));
  while (l < full) {
    Matrix omega(z.cols(), l);
    for (Index j = 0; j < omega.cols(); ++j)
      for (Index i = 0; i < omega.rows(); ++i) {
        // Box-Muller from two open-interval uniforms.
        const double u1 = rng.uniform(), u2 = rng.uniform();
        omega(i, j) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      }
    Matrix q = Eigen::HouseholderQR<Matrix>(z * omega).householderQ() * Matrix::Identity(z.rows(), l);
    Matrix prev;
    bool captured = true;
    for (int it = 0; it <= opt.max_power_iters; ++it) {
      const Matrix b = q.transpose() * z;
      Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (svd.info() != Eigen::Success) throw NumericError("sv_shrink_randomized: SVD failed");
      const Vector& s = svd.singularValues();
      if (s(s.size() - 1) > tau) {
        captured = false;
        break;
      }
      Index keep = 0;
      while (keep < s.size() && s(keep) > tau) ++keep;
      Matrix cur = keep == 0 ? Matrix::Zero(z.rows(), z.cols())
                             : Matrix((q * svd.matrixU().leftCols(keep)) * (s.head(keep).array() - tau).matrix().asDiagonal() *
                                      svd.matrixV().leftCols(keep).transpose());
      if (it > 0 && (cur - prev).norm() <= opt.tolerance * std::max(cur.norm(), 1e-300)) return cur;
      prev = std::move(cur);
      const Matrix y = z * (z.transpose() * q);
      q = Eigen::HouseholderQR<Matrix>(y).householderQ() * Matrix::Identity(z.rows(), l);
    }
    if (captured) break;
    l = std::min(full, 2 * l);
  }
  return sv_shrink(z, tau);
}

// ---------------------------------------------------------------------------
// Tensor nuclear norms

/// sum_l gamma_l ||x_(l)||_*; unfoldings with zero weight are skipped.
inline double tnn1_value(const Tensor3& x, const std::array<double, 3>& gamma) {
  double total = 0.0;
  for (int l = 1; l <= 3; ++l) {
    const double g = gamma[static_cast<std::size_t>(l - 1)];
    if (g == 0.0) continue;
    total += g * nuclear_norm(unfold(x, l));
  }
  return total;
}

/// ||x||_circledast = ||bcirc(x)||_*, the sum of nuclear norms of the Fourier blocks.
inline double tnn2_value(const Tensor3& x) {
  const Index n3 = x.n3();
  const auto xh = mode3_dft(x);
  std::vector<double> norms(static_cast<std::size_t>(n3 / 2 + 1));
  parallel_for(0, n3 / 2 + 1, [&](std::ptrdiff_t k) {
    norms[static_cast<std::size_t>(k)] = nuclear_norm(xh.blocks[static_cast<std::size_t>(k)]);
  });
  double total = 0.0;
  for (Index k = 0; k <= n3 / 2; ++k) {
    const bool mirrored = k != 0 && 2 * k != n3;
    total += (mirrored ? 2.0 : 1.0) * norms[static_cast<std::size_t>(k)];
  }
  return total;
}

/// Prox of tau ||.||_circledast in the tensor Frobenius metric: every Fourier
/// block is shrunk with threshold N3 tau.
inline Tensor3 tnn2_prox(const Tensor3& x, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("tnn2_prox: tau must be >= 0");
  if (tau == 0.0) return x;
  const Index n3 = x.n3();
  auto xh = mode3_dft(x);
  const double thr = static_cast<double>(n3) * tau;
  parallel_for(0, n3 / 2 + 1, [&](std::ptrdiff_t k) {
    auto& b = xh.blocks[static_cast<std::size_t>(k)];
    if (k == 0 || 2 * k == n3)
      b = sv_shrink(Matrix(b.real()), thr).cast<std::complex<double>>();
    else
      b = sv_shrink(b, thr);
  });
  for (Index k = n3 / 2 + 1; k < n3; ++k)
    xh.blocks[static_cast<std::size_t>(k)] = xh.blocks[static_cast<std::size_t>(n3 - k)].conjugate();
  return mode3_idft(xh);
}

// ---------------------------------------------------------------------------
// Total variation
//
// Forward differences are taken only over the index ranges i < N1-1,
// j < N2-1 (and k < N3-1 in 3D): the last row and column carry no term.

namespace detail {

// Isotropic TV over a stack of n3 images. With volumetric = false every slice
// is treated independently (2D TV); otherwise a weighted mode-3 difference is
// added and the k range also stops one short of the end.
struct TVGrid {
  Index n1, n2, n3;
  bool volumetric;
  double wz;

  [[nodiscard]] Index kmax() const { return volumetric ? n3 - 1 : n3; }
  [[nodiscard]] Index comps() const { return volumetric ? 3 : 2; }
  [[nodiscard]] Index cells() const { return (n1 - 1) * (n2 - 1) * std::max<Index>(kmax(), 0); }
  [[nodiscard]] double norm_bound() const { return volumetric ? 4.0 * (2.0 + wz * wz) : 8.0; }
  [[nodiscard]] Index cell(Index i, Index j, Index k) const { return i + (n1 - 1) * (j + (n2 - 1) * k); }
  [[nodiscard]] Index at(Index i, Index j, Index k) const { return i + n1 * (j + n2 * k); }
};

// p = D x for every cell; p holds comps() entries per cell.
inline void tv_forward(const TVGrid& g, const double* x, double* p) {
  const Index nc = g.comps();
  parallel_for(0, std::max<Index>(g.kmax(), 0), [&](std::ptrdiff_t k) {
    for (Index j = 0; j + 1 < g.n2; ++j)
      for (Index i = 0; i + 1 < g.n1; ++i) {
        const double c = x[g.at(i, j, k)];
        double* q = p + nc * g.cell(i, j, k);
        q[0] = x[g.at(i + 1, j, k)] - c;
        q[1] = x[g.at(i, j + 1, k)] - c;
        if (g.volumetric) q[2] = g.wz * (x[g.at(i, j, k + 1)] - c);
      }
  });
}

// x = D^T p (overwrites x). Gathers per output pixel so slices can run in parallel.
inline void tv_adjoint(const TVGrid& g, const double* p, double* x) {
  const Index nc = g.comps();
  const Index km = g.kmax();
  parallel_for(0, g.n3, [&](std::ptrdiff_t k) {
    for (Index j = 0; j < g.n2; ++j)
      for (Index i = 0; i < g.n1; ++i) {
        double acc = 0.0;
        const bool ink = k < km;
        if (ink && i + 1 < g.n1 && j + 1 < g.n2) {
          const double* q = p + nc * g.cell(i, j, k);
          acc -= q[0] + q[1];
          if (g.volumetric) acc -= g.wz * q[2];
        }
        if (ink && i >= 1 && j + 1 < g.n2) acc += p[nc * g.cell(i - 1, j, k) + 0];
        if (ink && j >= 1 && i + 1 < g.n1) acc += p[nc * g.cell(i, j - 1, k) + 1];
        if (g.volumetric && k >= 1 && k - 1 < km && i + 1 < g.n1 && j + 1 < g.n2) acc += g.wz * p[nc * g.cell(i, j, k - 1) + 2];
        x[g.at(i, j, k)] = acc;
      }
  });
}

inline double tv_sum(const TVGrid& g, const double* x) {
  const Index km = std::max<Index>(g.kmax(), 0);
  std::vector<double> partial(static_cast<std::size_t>(std::max<Index>(km, 1)), 0.0);
  parallel_for(0, km, [&](std::ptrdiff_t k) {
    double acc = 0.0;
    for (Index j = 0; j + 1 < g.n2; ++j)
      for (Index i = 0; i + 1 < g.n1; ++i) {
        const double c = x[g.at(i, j, k)];
        const double dx = x[g.at(i + 1, j, k)] - c;
        const double dy = x[g.at(i, j + 1, k)] - c;
        double s = dx * dx + dy * dy;
        if (g.volumetric) {
          const double dz = g.wz * (x[g.at(i, j, k + 1)] - c);
          s += dz * dz;
        }
        acc += std::sqrt(s);
      }
    partial[static_cast<std::size_t>(k)] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

// FGP dual iteration for argmin_u tau TV(u) + 1/2 ||u - v||^2. Returns the
// best primal iterate seen, so the objective is monotone in the iteration
// count; trace (if given) receives the running best objective.
inline void tv_fgp(const TVGrid& g, const double* v, double tau, int iters, double* out, std::vector<double>* trace) {
  const Index n = g.n1 * g.n2 * g.n3;
  Eigen::Map<const Vector> vv(v, n);
  Eigen::Map<Vector> best(out, n);
  best = vv;
  double best_obj = tau * tv_sum(g, v);
  if (trace) trace->assign(1, best_obj);
  if (tau == 0.0 || g.cells() == 0 || iters <= 0) return;

  const Index np = g.comps() * g.cells();
  Vector p = Vector::Zero(np), p_old = Vector::Zero(np), r = Vector::Zero(np), grad(np);
  Vector x(n), dtp(n);
  const double step = 1.0 / (g.norm_bound() * tau);
  const Index nc = g.comps();
  double t = 1.0;
  for (int it = 0; it < iters; ++it) {
    tv_adjoint(g, r.data(), dtp.data());
    x = vv - tau * dtp;
    tv_forward(g, x.data(), grad.data());
    p_old = p;
    p = r + step * grad;
    for (Index c = 0; c < g.cells(); ++c) {
      double* q = p.data() + nc * c;
      double s = q[0] * q[0] + q[1] * q[1];
      if (nc == 3) s += q[2] * q[2];
      if (s > 1.0) {
        const double inv = 1.0 / std::sqrt(s);
        for (Index m = 0; m < nc; ++m) q[m] *= inv;
      }
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    r = p + ((t - 1.0) / t_new) * (p - p_old);
    t = t_new;

    tv_adjoint(g, p.data(), dtp.data());
    x = vv - tau * dtp;
    const double obj = tau * tv_sum(g, x.data()) + 0.5 * (x - vv).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
    if (trace) trace->push_back(best_obj);
  }
}

}  // namespace detail

/// alpha * sum_{i<N1-1, j<N2-1} sqrt(dx^2 + dy^2).
inline double tv2d_value(const Matrix& slice, double alpha) {
  const detail::TVGrid g{slice.rows(), slice.cols(), 1, false, 0.0};
  return alpha * detail::tv_sum(g, slice.data());
}

/// alpha * sum_{i<N1-1, j<N2-1, k<N3-1} sqrt(dx^2 + dy^2 + (w dz)^2).
inline double tv3d_value(const Tensor3& x, double alpha, double energy_weight = 1.0) {
  const detail::TVGrid g{x.n1(), x.n2(), x.n3(), true, energy_weight};
  return alpha * detail::tv_sum(g, x.data());
}

/// sum_k alpha_k TV(X^(k)).
inline double tv_stack_value(const Tensor3& x, const std::vector<double>& alpha) {
  if (static_cast<Index>(alpha.size()) != x.n3()) throw std::invalid_argument("tv_stack_value: need one alpha per slice");
  double total = 0.0;
  for (Index k = 0; k < x.n3(); ++k) total += tv2d_value(x.slice(k), alpha[static_cast<std::size_t>(k)]);
  return total;
}

/// Approximate argmin_u tau TV(u) + 1/2 ||u - v||_F^2 with inner_iters FGP steps.
inline Matrix tv_prox(const Matrix& v, double tau, int inner_iters, std::vector<double>* trace = nullptr) {
  if (!(tau >= 0.0)) throw std::invalid_argument("tv_prox: tau must be >= 0");
  Matrix out(v.rows(), v.cols());
  const detail::TVGrid g{v.rows(), v.cols(), 1, false, 0.0};
  detail::tv_fgp(g, v.data(), tau, inner_iters, out.data(), trace);
  return out;
}

/// 3D analogue of tv_prox using the volumetric TV with mode-3 weight w.
inline Tensor3 tv3d_prox(const Tensor3& v, double tau, int inner_iters, double energy_weight = 1.0,
                         std::vector<double>* trace = nullptr) {
  if (!(tau >= 0.0)) throw std::invalid_argument("tv3d_prox: tau must be >= 0");
  Tensor3 out(v.dims());
  const detail::TVGrid g{v.n1(), v.n2(), v.n3(), true, energy_weight};
  detail::tv_fgp(g, v.data(), tau, inner_iters, out.data(), trace);
  return out;
}

}  // namespace spectre
