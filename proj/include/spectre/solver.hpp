#pragma once

// PWLS reconstruction: per-energy FISTA with a TV prox, the ADMM outer loop
// for the tensor nuclear norm regularizers, TV-only and 3D-TV solvers, and the
// FBP baseline.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spectre/common.hpp"
#include "spectre/projector.hpp"
#include "spectre/regularizers.hpp"
#include "spectre/spectral_model.hpp"
#include "spectre/tensor3.hpp"

namespace spectre {

enum class Method { FBP, TV, TV3D, TNN1, TNN2, TNN1_TV, TNN2_TV };

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::FBP, Method::TV, Method::TV3D, Method::TNN1,
                                     Method::TNN2, Method::TNN1_TV, Method::TNN2_TV};
  return m;
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::FBP: return "FBP";
    case Method::TV: return "TV";
    case Method::TV3D: return "TV3D";
    case Method::TNN1: return "TNN1";
    case Method::TNN2: return "TNN2";
    case Method::TNN1_TV: return "TNN1+TV";
    case Method::TNN2_TV: return "TNN2+TV";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : all_methods())
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown method '" + s + "' (expected FBP, TV, TV3D, TNN1, TNN2, TNN1+TV or TNN2+TV)");
}

inline bool uses_tnn1(Method m) { return m == Method::TNN1 || m == Method::TNN1_TV; }
inline bool uses_tnn2(Method m) { return m == Method::TNN2 || m == Method::TNN2_TV; }
inline bool uses_tv2d(Method m) { return m == Method::TV || m == Method::TNN1_TV || m == Method::TNN2_TV; }

struct SolverConfig {
  Method method = Method::TNN1_TV;
  double eta = 0.4;
  RegWeights weights;
  int outer_iters = 50;
  int fista_iters = 20;
  int tv_prox_iters = 20;
  std::optional<double> lipschitz;  // overrides the power-iteration estimate
  bool fbp_warm_start = false;
  bool clip_nonnegative = false;    // applied to the returned image only
  bool early_stop = false;          // stop once the primal residual < 1e-4 ||chi||_F
  bool randomized_svd = false;      // TNN-1 shrinkage through sv_shrink_randomized
  Index svd_rank_hint = 16;

  void validate(Index n3) const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("solver: eta must be > 0");
    if (outer_iters < 1 || fista_iters < 1 || tv_prox_iters < 1)
      throw std::invalid_argument("solver: iteration counts must be >= 1");
    if (lipschitz && !(*lipschitz > 0.0)) throw std::invalid_argument("solver: lipschitz override must be > 0");
    weights.validate();
    if (uses_tv2d(method) && static_cast<Index>(weights.alpha.size()) != n3)
      throw std::invalid_argument("solver: alpha needs one entry per energy bin (" + std::to_string(n3) + ")");
  }
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double residual = 0.0;
  std::vector<double> errors;  // per-energy relative l2 error, empty without truth
};

struct ReconResult {
  Tensor3 chi;
  std::vector<IterationRecord> history;
  SolverConfig config;
  double initial_objective = 0.0;
  double wall_seconds = 0.0;
};

/// Everything a reconstruction needs besides the solver settings.
struct Problem {
  const SystemMatrix* A = nullptr;
  Geometry geometry;
  PWLSData data;
  std::optional<Tensor3> truth;

  [[nodiscard]] Dims3 dims() const { return {geometry.n1, geometry.n2, data.bins()}; }
};

/// ||xhat - x*||^2 / ||x*||^2.
inline double relative_l2_error(const Eigen::Ref<const Vector>& xhat, const Eigen::Ref<const Vector>& xtrue) {
  if (xhat.size() != xtrue.size()) throw std::invalid_argument("relative_l2_error: length mismatch");
  const double den = xtrue.squaredNorm();
  if (!(den > 0.0)) throw std::invalid_argument("relative_l2_error: truth has zero norm");
  return (xhat - xtrue).squaredNorm() / den;
}

inline std::vector<double> per_energy_errors(const Tensor3& xhat, const Tensor3& truth) {
  if (xhat.dims() != truth.dims()) throw std::invalid_argument("per_energy_errors: dims differ");
  std::vector<double> e(static_cast<std::size_t>(truth.n3()));
  for (Index k = 0; k < truth.n3(); ++k) e[static_cast<std::size_t>(k)] = relative_l2_error(xhat.slice_vec(k), truth.slice_vec(k));
  return e;
}

/// L_k(x) = (Ax - m)^T W (Ax - m) and its gradient 2 A^T W (Ax - m).
inline std::pair<double, Vector> pwls_misfit(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& m,
                                             const Eigen::Ref<const Vector>& w, const SystemMatrix& A) {
  if (x.size() != A.cols() || m.size() != A.rows() || w.size() != A.rows())
    throw std::invalid_argument("pwls_misfit: shapes inconsistent with system matrix");
  const Vector r = A * x - m;
  const Vector wr = w.cwiseProduct(r);
  return {r.dot(wr), 2.0 * (A.transpose() * wr)};
}

/// Power iteration (50 steps from the ones vector) for the largest eigenvalue of
/// x -> 2 A^T W A x + n_coupling eta x, inflated by 5%. The optional trace
/// receives the Rayleigh quotient after every step.
inline double lipschitz_estimate(const SystemMatrix& A, const Eigen::Ref<const Vector>& w, double eta, int n_coupling,
                                 std::vector<double>* trace = nullptr, int steps = 50) {
  if (w.size() != A.rows()) throw std::invalid_argument("lipschitz_estimate: weight length mismatch");
  const double shift = static_cast<double>(n_coupling) * eta;
  Vector v = Vector::Ones(A.cols());
  v.normalize();
  double est = shift;
  if (trace) trace->clear();
  for (int s = 0; s < steps; ++s) {
    const Vector av = A * v;
    const Vector hv = 2.0 * (A.transpose() * w.cwiseProduct(av)) + shift * v;
    est = std::max(est, v.dot(hv));
    if (trace) trace->push_back(v.dot(hv));
    const double n = hv.norm();
    if (!(n > 0.0)) break;
    v = hv / n;
  }
  return 1.05 * est;
}

/// Augmented-Lagrangian terms seen by one energy bin: sum of the dual slices,
/// sum of the splitting slices and the count of coupled copies.
struct Coupling {
  int count = 0;
  double eta = 0.0;
  Vector y_sum;
  Vector z_sum;
  double z_sq_sum = 0.0;

  [[nodiscard]] bool active() const { return count > 0; }
};

/// Smooth part f(x) = 1/2 L_k(x) + <y_sum, x> + eta/2 sum_l ||x - z_l||^2.
struct XSmooth {
  const SystemMatrix& A;
  Eigen::Ref<const Vector> m;
  Eigen::Ref<const Vector> w;
  const Coupling& c;

  // Value from a precomputed A x.
  [[nodiscard]] double value(const Vector& x, const Vector& ax) const {
    const Vector r = ax - m;
    double f = 0.5 * r.dot(w.cwiseProduct(r));
    if (c.active())
      f += c.y_sum.dot(x) + 0.5 * c.eta * (static_cast<double>(c.count) * x.squaredNorm() - 2.0 * x.dot(c.z_sum) + c.z_sq_sum);
    return f;
  }
  [[nodiscard]] Vector gradient(const Vector& x, const Vector& ax) const {
    Vector g = A.transpose() * w.cwiseProduct(ax - m);
    if (c.active()) g += c.y_sum + c.eta * (static_cast<double>(c.count) * x - c.z_sum);
    return g;
  }
  [[nodiscard]] double value(const Vector& x) const { return value(x, A * x); }
  [[nodiscard]] Vector gradient(const Vector& x) const { return gradient(x, A * x); }
};

/// Lipschitz constant of grad f for the x-subproblem: half the data part of
/// lipschitz_estimate (f carries 1/2 L_k) plus n eta.
inline double smooth_lipschitz(const SystemMatrix& A, const Eigen::Ref<const Vector>& w, double eta, int n_coupling) {
  return 0.5 * lipschitz_estimate(A, w, 0.0, 0) + 1.05 * static_cast<double>(n_coupling) * eta;
}

struct XSubproblemOptions {
  double alpha = 0.0;  // TV weight of this bin
  int fista_iters = 20;
  int tv_prox_iters = 20;
  double lipschitz = 1.0;
};

/// Monotone FISTA on f + alpha TV, with tv_prox(., alpha / L) as the proximal
/// step. Keeps A x alongside every iterate so each step costs one forward and
/// one back projection. The optional trace receives F(x) after each step.
inline Vector x_subproblem(const Vector& x0, const XSmooth& f, const XSubproblemOptions& opt, std::vector<double>* trace = nullptr,
                           Index n1 = 0, Index n2 = 0) {
  const Index np = x0.size();
  if (opt.alpha > 0.0 && (n1 * n2 != np)) throw std::invalid_argument("x_subproblem: TV needs the image shape");
  if (!(opt.lipschitz > 0.0)) throw std::invalid_argument("x_subproblem: Lipschitz constant must be > 0");
  const double L = opt.lipschitz;
  auto tv = [&](const Vector& v) {
    return opt.alpha > 0.0 ? tv2d_value(Eigen::Map<const Matrix>(v.data(), n1, n2), opt.alpha) : 0.0;
  };
  auto prox = [&](const Vector& v) -> Vector {
    if (opt.alpha <= 0.0) return v;
    const Matrix u = tv_prox(Eigen::Map<const Matrix>(v.data(), n1, n2), opt.alpha / L, opt.tv_prox_iters);
    return Eigen::Map<const Vector>(u.data(), np);
  };

  Vector x = x0, ax = f.A * x0;
  Vector y = x, ay = ax;
  double fx = f.value(x, ax) + tv(x);
  if (trace) trace->assign(1, fx);
  double t = 1.0;
  for (int it = 0; it < opt.fista_iters; ++it) {
    const Vector z = prox(y - f.gradient(y, ay) / L);
    const Vector az = f.A * z;
    const double fz = f.value(z, az) + tv(z);
    if (!std::isfinite(fz) || !z.allFinite()) throw NumericError("x_subproblem: non-finite iterate at FISTA step " + std::to_string(it));
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const bool accept = fz <= fx;
    // y = x_new + (t / t_new)(z - x_new) + ((t - 1) / t_new)(x_new - x)
    if (accept) {
      const double b = (t - 1.0) / t_new;
      y = z + b * (z - x);
      ay = az + b * (az - ax);
      x = z;
      ax = az;
      fx = fz;
    } else {
      const double a = t / t_new;
      y = x + a * (z - x);
      ay = ax + a * (az - ax);
    }
    t = t_new;
    if (trace) trace->push_back(fx);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Whole-run objective and helpers

namespace detail {

inline double data_term(const SystemMatrix& A, const PWLSData& d, const Tensor3& chi) {
  std::vector<double> parts(static_cast<std::size_t>(chi.n3()));
  parallel_for(0, chi.n3(), [&](std::ptrdiff_t k) {
    const Vector r = A * chi.slice_vec(k) - d.m.col(k);
    parts[static_cast<std::size_t>(k)] = 0.5 * r.dot(d.w.col(k).cwiseProduct(r));
  });
  double s = 0.0;
  for (double p : parts) s += p;
  return s;
}

inline Tensor3 fbp_tensor(const Problem& p) {
  const auto d = p.dims();
  Tensor3 chi(d);
  parallel_for(0, d[2], [&](std::ptrdiff_t k) { chi.slice_vec(k) = fbp_reconstruct(p.data.m.col(k), p.geometry); });
  return chi;
}

inline void check_problem(const Problem& p) {
  if (!p.A) throw std::invalid_argument("reconstruct: system matrix missing");
  p.geometry.validate();
  if (p.A->rows() != p.geometry.rays() || p.A->cols() != p.geometry.pixels())
    throw std::invalid_argument("reconstruct: system matrix does not match geometry");
  if (p.data.m.rows() != p.A->rows() || p.data.w.rows() != p.A->rows() || p.data.m.cols() != p.data.w.cols() || p.data.bins() < 1)
    throw std::invalid_argument("reconstruct: PWLS data shape does not match geometry");
  if (p.truth && p.truth->dims() != p.dims()) throw std::invalid_argument("reconstruct: truth dims do not match data");
}

inline void check_finite(const Tensor3& x, const char* what, int iter) {
  if (!x.is_finite()) throw NumericError(std::string(what) + ": non-finite state at iteration " + std::to_string(iter));
}

inline double objective(const SolverConfig& cfg, const SystemMatrix& A, const PWLSData& d, const Tensor3& chi) {
  double obj = data_term(A, d, chi);
  const auto& w = cfg.weights;
  if (uses_tv2d(cfg.method)) obj += tv_stack_value(chi, w.alpha);
  if (cfg.method == Method::TV3D) obj += tv3d_value(chi, w.alpha_3d, w.energy_weight_3d);
  if (uses_tnn1(cfg.method)) obj += tnn1_value(chi, w.gamma_unfold);
  if (uses_tnn2(cfg.method)) obj += w.gamma_tsvd * tnn2_value(chi);
  return obj;
}

inline Tensor3 initial_state(const SolverConfig& cfg, const Problem& p) {
  return cfg.fbp_warm_start ? fbp_tensor(p) : Tensor3(p.dims());
}

inline std::vector<double> bin_lipschitz(const SolverConfig& cfg, const Problem& p, int n_coupling) {
  const Index n3 = p.data.bins();
  std::vector<double> L(static_cast<std::size_t>(n3));
  parallel_for(0, n3, [&](std::ptrdiff_t k) {
    L[static_cast<std::size_t>(k)] = cfg.lipschitz ? *cfg.lipschitz : smooth_lipschitz(*p.A, p.data.w.col(k), cfg.eta, n_coupling);
  });
  return L;
}

inline IterationRecord make_record(int iter, double obj, double residual, const Problem& p, const Tensor3& chi) {
  IterationRecord r;
  r.iter = iter;
  r.objective = obj;
  r.residual = residual;
  if (p.truth) r.errors = per_energy_errors(chi, *p.truth);
  return r;
}

inline void finish(ReconResult& res, const SolverConfig& cfg, std::chrono::steady_clock::time_point t0) {
  if (cfg.clip_nonnegative) res.chi.vec() = res.chi.vec().cwiseMax(0.0);
  res.config = cfg;
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

using ProgressFn = std::function<void(const IterationRecord&)>;

/// ADMM for TNN1, TNN2, TNN1+TV and TNN2+TV. TNN-1 keeps one splitting tensor
/// per unfolding with positive weight (Z_l and Y_l are stored folded, so
/// ||chi_(l) - Z_l||_F is a tensor norm); TNN-2 keeps one tensor Z with
/// coupling eta/2 ||chi - Z||^2 and Z = tnn2_prox(chi + Y/eta, gamma/eta).
inline ReconResult admm_reconstruct(const SolverConfig& cfg, const Problem& p, const ProgressFn& progress = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::check_problem(p);
  const Dims3 dims = p.dims();
  cfg.validate(dims[2]);
  if (!uses_tnn1(cfg.method) && !uses_tnn2(cfg.method))
    throw std::invalid_argument("admm_reconstruct: method " + to_string(cfg.method) + " has no nuclear-norm term");
  const SystemMatrix& A = *p.A;
  const Index n1 = dims[0], n2 = dims[1], n3 = dims[2];

  std::vector<int> modes;
  if (uses_tnn1(cfg.method)) {
    for (int l = 1; l <= 3; ++l)
      if (cfg.weights.gamma_unfold[static_cast<std::size_t>(l - 1)] > 0.0) modes.push_back(l);
  } else if (cfg.weights.gamma_tsvd > 0.0) {
    modes.push_back(0);
  }
  const int nc = static_cast<int>(modes.size());
  const auto L = detail::bin_lipschitz(cfg, p, nc);

  ReconResult res;
  res.chi = detail::initial_state(cfg, p);
  std::vector<Tensor3> Z(modes.size(), Tensor3(dims)), Y(modes.size(), Tensor3(dims));
  res.initial_objective = detail::objective(cfg, A, p.data, res.chi);

  for (int iter = 1; iter <= cfg.outer_iters; ++iter) {
    // chi-update, independent per energy bin.
    parallel_for(0, n3, [&](std::ptrdiff_t k) {
      Coupling c;
      c.count = nc;
      c.eta = cfg.eta;
      if (nc > 0) {
        c.y_sum = Vector::Zero(n1 * n2);
        c.z_sum = Vector::Zero(n1 * n2);
        for (int i = 0; i < nc; ++i) {
          c.y_sum += Y[static_cast<std::size_t>(i)].slice_vec(k);
          c.z_sum += Z[static_cast<std::size_t>(i)].slice_vec(k);
          c.z_sq_sum += Z[static_cast<std::size_t>(i)].slice_vec(k).squaredNorm();
        }
      }
      XSmooth f{A, p.data.m.col(k), p.data.w.col(k), c};
      XSubproblemOptions o;
      o.alpha = uses_tv2d(cfg.method) ? cfg.weights.alpha[static_cast<std::size_t>(k)] : 0.0;
      o.fista_iters = cfg.fista_iters;
      o.tv_prox_iters = cfg.tv_prox_iters;
      o.lipschitz = L[static_cast<std::size_t>(k)];
      res.chi.slice_vec(k) = x_subproblem(Vector(res.chi.slice_vec(k)), f, o, nullptr, n1, n2);
    });
    detail::check_finite(res.chi, "admm_reconstruct", iter);

    // Z-update, then dual ascent.
    parallel_for(0, nc, [&](std::ptrdiff_t i) {
      const auto is = static_cast<std::size_t>(i);
      Tensor3 v = res.chi;
      v.vec() += Y[is].vec() / cfg.eta;
      const int l = modes[is];
      if (l == 0) {
        Z[is] = tnn2_prox(v, cfg.weights.gamma_tsvd / cfg.eta);
      } else {
        const double tau = cfg.weights.gamma_unfold[static_cast<std::size_t>(l - 1)] / cfg.eta;
        const Matrix u = unfold(v, l);
        Matrix s;
        if (cfg.randomized_svd) {
          RandomizedShrinkOptions ro;
          ro.rank_hint = cfg.svd_rank_hint;
          s = sv_shrink_randomized(u, tau, ro);
        } else {
          s = sv_shrink(u, tau);
        }
        Z[is] = fold(s, l, dims);
      }
      Y[is].vec() += cfg.eta * (res.chi.vec() - Z[is].vec());
    });

    double residual = 0.0;
    for (int i = 0; i < nc; ++i) {
      detail::check_finite(Z[static_cast<std::size_t>(i)], "admm_reconstruct", iter);
      detail::check_finite(Y[static_cast<std::size_t>(i)], "admm_reconstruct", iter);
      residual += (res.chi.vec() - Z[static_cast<std::size_t>(i)].vec()).norm();
    }
    res.history.push_back(detail::make_record(iter, detail::objective(cfg, A, p.data, res.chi), residual, p, res.chi));
    if (progress) progress(res.history.back());
    if (cfg.early_stop && residual < 1e-4 * res.chi.frobenius_norm()) break;
  }
  detail::finish(res, cfg, t0);
  return res;
}

/// Per-energy TV: outer_iters warm-started monotone FISTA runs of fista_iters
/// steps each (the x-subproblem with eta = 0). The residual column holds
/// ||chi^n - chi^(n-1)||_F.
inline ReconResult tv_only_reconstruct(const SolverConfig& cfg, const Problem& p, const ProgressFn& progress = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::check_problem(p);
  const Dims3 dims = p.dims();
  SolverConfig c = cfg;
  c.method = Method::TV;
  c.validate(dims[2]);
  const auto L = detail::bin_lipschitz(c, p, 0);
  ReconResult res;
  res.chi = detail::initial_state(c, p);
  res.initial_objective = detail::objective(c, *p.A, p.data, res.chi);
  const Coupling none;
  for (int iter = 1; iter <= c.outer_iters; ++iter) {
    const Tensor3 prev = res.chi;
    parallel_for(0, dims[2], [&](std::ptrdiff_t k) {
      XSmooth f{*p.A, p.data.m.col(k), p.data.w.col(k), none};
      XSubproblemOptions o;
      o.alpha = c.weights.alpha[static_cast<std::size_t>(k)];
      o.fista_iters = c.fista_iters;
      o.tv_prox_iters = c.tv_prox_iters;
      o.lipschitz = L[static_cast<std::size_t>(k)];
      res.chi.slice_vec(k) = x_subproblem(Vector(res.chi.slice_vec(k)), f, o, nullptr, dims[0], dims[1]);
    });
    detail::check_finite(res.chi, "tv_only_reconstruct", iter);
    const double step = (res.chi.vec() - prev.vec()).norm();
    res.history.push_back(detail::make_record(iter, detail::objective(c, *p.A, p.data, res.chi), step, p, res.chi));
    if (progress) progress(res.history.back());
  }
  detail::finish(res, cfg, t0);
  return res;
}

/// 3D TV: monotone FISTA over the whole tensor with the 3D FGP prox. The step
/// uses the largest per-bin Lipschitz constant. outer_iters warm-started runs
/// of fista_iters steps; the residual column holds ||chi^n - chi^(n-1)||_F.
inline ReconResult tv3d_reconstruct(const SolverConfig& cfg, const Problem& p, const ProgressFn& progress = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::check_problem(p);
  const Dims3 dims = p.dims();
  SolverConfig c = cfg;
  c.method = Method::TV3D;
  c.validate(dims[2]);
  const auto Ls = detail::bin_lipschitz(c, p, 0);
  const double L = *std::max_element(Ls.begin(), Ls.end());
  const double alpha = c.weights.alpha_3d, wz = c.weights.energy_weight_3d;
  const SystemMatrix& A = *p.A;
  const Index n3 = dims[2];

  auto project = [&](const Tensor3& x) {
    Matrix out(A.rows(), n3);
    parallel_for(0, n3, [&](std::ptrdiff_t k) { out.col(k) = A * x.slice_vec(k); });
    return out;
  };
  auto value = [&](const Tensor3& x, const Matrix& ax) {
    std::vector<double> parts(static_cast<std::size_t>(n3));
    for (Index k = 0; k < n3; ++k) {
      const Vector r = ax.col(k) - p.data.m.col(k);
      parts[static_cast<std::size_t>(k)] = 0.5 * r.dot(p.data.w.col(k).cwiseProduct(r));
    }
    double s = 0.0;
    for (double v : parts) s += v;
    return s + tv3d_value(x, alpha, wz);
  };

  ReconResult res;
  res.chi = detail::initial_state(c, p);
  Matrix ax = project(res.chi);
  double fx = value(res.chi, ax);
  res.initial_objective = fx;
  for (int iter = 1; iter <= c.outer_iters; ++iter) {
    const Tensor3 prev = res.chi;
    Tensor3 y = res.chi;
    Matrix ay = ax;
    double t = 1.0;
    for (int it = 0; it < c.fista_iters; ++it) {
      Tensor3 g(dims);
      parallel_for(0, n3, [&](std::ptrdiff_t k) {
        g.slice_vec(k) = A.transpose() * p.data.w.col(k).cwiseProduct(ay.col(k) - p.data.m.col(k));
      });
      Tensor3 v = y;
      v.vec() -= g.vec() / L;
      Tensor3 z = alpha > 0.0 ? tv3d_prox(v, alpha / L, c.tv_prox_iters, wz) : v;
      const Matrix az = project(z);
      const double fz = value(z, az);
      if (!std::isfinite(fz) || !z.is_finite()) throw NumericError("tv3d_reconstruct: non-finite iterate at iteration " + std::to_string(iter));
      const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      if (fz <= fx) {
        const double b = (t - 1.0) / t_new;
        y = z;
        y.vec() += b * (z.vec() - res.chi.vec());
        ay = az + b * (az - ax);
        res.chi = std::move(z);
        ax = az;
        fx = fz;
      } else {
        const double a = t / t_new;
        y = res.chi;
        y.vec() += a * (z.vec() - res.chi.vec());
        ay = ax + a * (az - ax);
      }
      t = t_new;
    }
    const double step = (res.chi.vec() - prev.vec()).norm();
    res.history.push_back(detail::make_record(iter, fx, step, p, res.chi));
    if (progress) progress(res.history.back());
  }
  detail::finish(res, cfg, t0);
  return res;
}

inline ReconResult fbp_reconstruct_all(const SolverConfig& cfg, const Problem& p) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::check_problem(p);
  ReconResult res;
  res.chi = detail::fbp_tensor(p);
  detail::check_finite(res.chi, "fbp", 0);
  detail::finish(res, cfg, t0);
  return res;
}

/// Dispatch on cfg.method.
inline ReconResult reconstruct(const SolverConfig& cfg, const Problem& p, const ProgressFn& progress = {}) {
  switch (cfg.method) {
    case Method::FBP: return fbp_reconstruct_all(cfg, p);
    case Method::TV: return tv_only_reconstruct(cfg, p, progress);
    case Method::TV3D: return tv3d_reconstruct(cfg, p, progress);
    default: return admm_reconstruct(cfg, p, progress);
  }
}

}  // namespace spectre
