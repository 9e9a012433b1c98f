#pragma once

// Dense 3-way tensors and the tensor algebra used by the reconstruction:
// mode-l unfolding/folding, n-mode products, block-circulant matrices,
// mode-3 DFT, t-product, t-transpose and t-SVD.
//
// Storage layout is column-major: element (i1, i2, i3) lives at
// i1 + N1 * (i2 + N2 * i3). Frontal slice k is therefore a contiguous
// column-major N1 x N2 matrix, and the raw buffer viewed as an
// N1 x (N2 N3) matrix is exactly the mode-1 unfolding.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "spectre/common.hpp"

namespace spectre {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXd;
using Dims3 = std::array<Index, 3>;

class Tensor3 {
 public:
  Tensor3() : Tensor3(1, 1, 1) {}

  Tensor3(Index n1, Index n2, Index n3, double fill = 0.0) : dims_{n1, n2, n3} {
    if (n1 <= 0 || n2 <= 0 || n3 <= 0)
      throw std::invalid_argument("Tensor3: dimensions must be positive");
    values_.assign(static_cast<std::size_t>(n1 * n2 * n3), fill);
  }

  explicit Tensor3(const Dims3& d, double fill = 0.0) : Tensor3(d[0], d[1], d[2], fill) {}

  Tensor3(const Dims3& d, std::vector<double> values) : Tensor3(d) {
    if (static_cast<Index>(values.size()) != size())
      throw std::invalid_argument("Tensor3: value count does not match dimensions");
    values_ = std::move(values);
  }

  [[nodiscard]] Index n1() const { return dims_[0]; }
  [[nodiscard]] Index n2() const { return dims_[1]; }
  [[nodiscard]] Index n3() const { return dims_[2]; }
  [[nodiscard]] const Dims3& dims() const { return dims_; }
  [[nodiscard]] Index dim(int mode) const { return dims_.at(static_cast<std::size_t>(mode - 1)); }
  [[nodiscard]] Index size() const { return dims_[0] * dims_[1] * dims_[2]; }
  [[nodiscard]] Index slice_size() const { return dims_[0] * dims_[1]; }

  [[nodiscard]] Index offset(Index i1, Index i2, Index i3) const {
    return i1 + dims_[0] * (i2 + dims_[1] * i3);
  }
  double& operator()(Index i1, Index i2, Index i3) { return values_[static_cast<std::size_t>(offset(i1, i2, i3))]; }
  double operator()(Index i1, Index i2, Index i3) const { return values_[static_cast<std::size_t>(offset(i1, i2, i3))]; }

  [[nodiscard]] double* data() { return values_.data(); }
  [[nodiscard]] const double* data() const { return values_.data(); }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  /// Flat view in storage order.
  Eigen::Map<Vector> vec() { return {values_.data(), size()}; }
  [[nodiscard]] Eigen::Map<const Vector> vec() const { return {values_.data(), size()}; }

  /// Frontal slice X^(k) (0-based k) as an N1 x N2 matrix view.
  Eigen::Map<Matrix> slice(Index k) { return {values_.data() + k * slice_size(), n1(), n2()}; }
  [[nodiscard]] Eigen::Map<const Matrix> slice(Index k) const {
    return {values_.data() + k * slice_size(), n1(), n2()};
  }
  /// Frontal slice k in lexicographic (column-major) vector form, i.e. x_k.
  Eigen::Map<Vector> slice_vec(Index k) { return {values_.data() + k * slice_size(), slice_size()}; }
  [[nodiscard]] Eigen::Map<const Vector> slice_vec(Index k) const {
    return {values_.data() + k * slice_size(), slice_size()};
  }

  [[nodiscard]] double frobenius_norm() const { return vec().norm(); }
  [[nodiscard]] bool is_finite() const { return vec().allFinite(); }

  Tensor3& operator+=(const Tensor3& o) { check_same(o); vec() += o.vec(); return *this; }
  Tensor3& operator-=(const Tensor3& o) { check_same(o); vec() -= o.vec(); return *this; }
  Tensor3& operator*=(double a) { vec() *= a; return *this; }

  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(Tensor3 a, double s) { return a *= s; }
  friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

  friend bool operator==(const Tensor3& a, const Tensor3& b) {
    return a.dims_ == b.dims_ && a.values_ == b.values_;
  }

 private:
  void check_same(const Tensor3& o) const {
    if (o.dims_ != dims_) throw std::invalid_argument("Tensor3: dimension mismatch");
  }

  Dims3 dims_;
  std::vector<double> values_;
};

/// The N3 Fourier-domain frontal faces of a tensor, each N1 x N2.
struct ComplexBlockSet {
  std::vector<ComplexMatrix> blocks;

  [[nodiscard]] Index count() const { return static_cast<Index>(blocks.size()); }
  [[nodiscard]] Index rows() const { return blocks.empty() ? 0 : blocks.front().rows(); }
  [[nodiscard]] Index cols() const { return blocks.empty() ? 0 : blocks.front().cols(); }
};

struct TSVDFactors {
  Tensor3 U;  // N1 x N1 x N3
  Tensor3 S;  // N1 x N2 x N3, f-diagonal
  Tensor3 V;  // N2 x N2 x N3
  /// Per Fourier block singular values, descending (the diagonals of S-hat).
  std::vector<Vector> fourier_singular_values;
};

namespace detail {

inline void check_mode(int mode) {
  if (mode < 1 || mode > 3)
    throw std::invalid_argument("mode must be 1, 2 or 3 (got " + std::to_string(mode) + ")");
}

// Column strides J_k of the mode-l unfolding; J_l itself is unused (0).
inline std::array<Index, 3> unfold_strides(const Dims3& d, int mode) {
  std::array<Index, 3> J{0, 0, 0};
  Index running = 1;
  for (int k = 0; k < 3; ++k) {
    if (k == mode - 1) continue;
    J[static_cast<std::size_t>(k)] = running;
    running *= d[static_cast<std::size_t>(k)];
  }
  return J;
}

// Unnormalized DFT matrix F(j, k) = exp(-2 pi i j k / n). Entries at quarter
// turns are set exactly so that the Nyquist and DC columns stay real.
inline ComplexMatrix dft_matrix(Index n) {
  ComplexMatrix F(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index k = 0; k < n; ++k) {
      const Index r = (j * k) % n;
      std::complex<double> w;
      if ((4 * r) % n == 0) {
        switch ((4 * r) / n) {
          case 0: w = {1.0, 0.0}; break;
          case 1: w = {0.0, -1.0}; break;
          case 2: w = {-1.0, 0.0}; break;
          default: w = {0.0, 1.0}; break;
        }
      } else {
        const double a = -2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n);
        w = {std::cos(a), std::sin(a)};
      }
      F(j, k) = w;
    }
  }
  return F;
}

}  // namespace detail

/// Mode-l unfolding (l in {1,2,3}): element (i1,i2,i3) goes to (i_l, j) with
/// j = sum_{k != l} i_k J_k and J_k the product of the preceding non-l dims.
inline Matrix unfold(const Tensor3& x, int mode) {
  detail::check_mode(mode);
  const auto& d = x.dims();
  const auto J = detail::unfold_strides(d, mode);
  const Index rows = d[static_cast<std::size_t>(mode - 1)];
  Matrix out(rows, x.size() / rows);
  for (Index i3 = 0; i3 < d[2]; ++i3)
    for (Index i2 = 0; i2 < d[1]; ++i2)
      for (Index i1 = 0; i1 < d[0]; ++i1) {
        const std::array<Index, 3> idx{i1, i2, i3};
        const Index col = idx[0] * J[0] + idx[1] * J[1] + idx[2] * J[2];
        out(idx[static_cast<std::size_t>(mode - 1)], col) = x(i1, i2, i3);
      }
  return out;
}

/// Inverse of unfold for the given mode and target dimensions.
inline Tensor3 fold(const Matrix& m, int mode, const Dims3& dims) {
  detail::check_mode(mode);
  const Index rows = dims[static_cast<std::size_t>(mode - 1)];
  if (m.rows() != rows || m.rows() * m.cols() != dims[0] * dims[1] * dims[2])
    throw std::invalid_argument("fold: matrix shape inconsistent with dims and mode");
  const auto J = detail::unfold_strides(dims, mode);
  Tensor3 out(dims);
  for (Index i3 = 0; i3 < dims[2]; ++i3)
    for (Index i2 = 0; i2 < dims[1]; ++i2)
      for (Index i1 = 0; i1 < dims[0]; ++i1) {
        const std::array<Index, 3> idx{i1, i2, i3};
        const Index col = idx[0] * J[0] + idx[1] * J[1] + idx[2] * J[2];
        out(i1, i2, i3) = m(idx[static_cast<std::size_t>(mode - 1)], col);
      }
  return out;
}

/// x ×_mode U, with U of shape J x N_mode.
inline Tensor3 n_mode_product(const Tensor3& x, const Matrix& u, int mode) {
  detail::check_mode(mode);
  if (u.cols() != x.dim(mode))
    throw std::invalid_argument("n_mode_product: matrix columns must equal N_mode");
  Dims3 out_dims = x.dims();
  out_dims[static_cast<std::size_t>(mode - 1)] = u.rows();
  return fold(u * unfold(x, mode), mode, out_dims);
}

/// Dense block-circulant matrix bcirc(x) of size N3 N1 x N3 N2. Oracle use only.
inline Matrix bcirc_dense(const Tensor3& x) {
  const Index n1 = x.n1(), n2 = x.n2(), n3 = x.n3();
  Matrix out(n3 * n1, n3 * n2);
  for (Index br = 0; br < n3; ++br)
    for (Index bc = 0; bc < n3; ++bc)
      out.block(br * n1, bc * n2, n1, n2) = x.slice(((br - bc) % n3 + n3) % n3);
  return out;
}

/// Unnormalized forward DFT along mode 3. Block n equals the n-th diagonal
/// block of the normalized-F similarity transform of bcirc(x).
inline ComplexBlockSet mode3_dft(const Tensor3& x) {
  const Index n3 = x.n3(), s = x.slice_size();
  Eigen::Map<const Matrix> fibers(x.data(), s, n3);
  const ComplexMatrix hat = fibers.cast<std::complex<double>>() * detail::dft_matrix(n3);
  ComplexBlockSet out;
  out.blocks.reserve(static_cast<std::size_t>(n3));
  for (Index k = 0; k < n3; ++k)
    out.blocks.emplace_back(Eigen::Map<const ComplexMatrix>(hat.col(k).data(), x.n1(), x.n2()));
  return out;
}

/// Inverse of mode3_dft (1/N3 scaled). Throws NumericError when the blocks are
/// not conjugate symmetric, i.e. the imaginary residue exceeds 1e-9 relative.
inline Tensor3 mode3_idft(const ComplexBlockSet& c) {
  const Index n3 = c.count();
  if (n3 == 0) throw std::invalid_argument("mode3_idft: empty block set");
  const Index n1 = c.rows(), n2 = c.cols();
  for (const auto& b : c.blocks)
    if (b.rows() != n1 || b.cols() != n2)
      throw std::invalid_argument("mode3_idft: blocks must share one shape");
  ComplexMatrix hat(n1 * n2, n3);
  for (Index k = 0; k < n3; ++k)
    hat.col(k) = Eigen::Map<const Eigen::VectorXcd>(c.blocks[static_cast<std::size_t>(k)].data(), n1 * n2);
  const ComplexMatrix fibers = hat * detail::dft_matrix(n3).conjugate() / static_cast<double>(n3);
  const double scale = hat.norm() / std::sqrt(static_cast<double>(n3));
  const double residue = fibers.imag().norm();
  if (residue > 1e-9 * scale + 1e-300)
    throw NumericError("mode3_idft: imaginary residue " + std::to_string(residue) +
                       " exceeds tolerance; blocks are not conjugate symmetric");
  Tensor3 out(n1, n2, n3);
  Eigen::Map<Matrix>(out.data(), n1 * n2, n3) = fibers.real();
  return out;
}

/// Identity tensor: first frontal face is the n x n identity, the rest zero.
inline Tensor3 identity_tensor(Index n, Index n3) {
  Tensor3 out(n, n, n3);
  out.slice(0) = Matrix::Identity(n, n);
  return out;
}

/// t-transpose: transpose every face, then reverse faces 2..N3.
inline Tensor3 t_transpose(const Tensor3& x) {
  const Index n3 = x.n3();
  Tensor3 out(x.n2(), x.n1(), n3);
  for (Index k = 0; k < n3; ++k) out.slice(k) = x.slice((n3 - k) % n3).transpose();
  return out;
}

/// t-product a * b = fold(bcirc(a) unfold(b)), evaluated face-wise in the
/// Fourier domain. Only blocks 0..N3/2 are multiplied; the rest are conjugates.
inline Tensor3 t_product(const Tensor3& a, const Tensor3& b) {
  if (a.n2() != b.n1()) throw std::invalid_argument("t_product: inner dimensions differ");
  if (a.n3() != b.n3()) throw std::invalid_argument("t_product: N3 differs");
  const Index n3 = a.n3();
  const auto ah = mode3_dft(a);
  const auto bh = mode3_dft(b);
  ComplexBlockSet ch;
  ch.blocks.resize(static_cast<std::size_t>(n3));
  for (Index k = 0; k <= n3 / 2; ++k)
    ch.blocks[static_cast<std::size_t>(k)] = ah.blocks[static_cast<std::size_t>(k)] * bh.blocks[static_cast<std::size_t>(k)];
  for (Index k = n3 / 2 + 1; k < n3; ++k)
    ch.blocks[static_cast<std::size_t>(k)] = ch.blocks[static_cast<std::size_t>(n3 - k)].conjugate();
  return mode3_idft(ch);
}

/// t-SVD x = U * S * V^T via per-block SVDs of the Fourier faces. Singular
/// values are sorted descending within each block; blocks k > N3/2 reuse the
/// conjugated factors of block N3-k so that U, S and V are real.
inline TSVDFactors t_svd(const Tensor3& x) {
  const Index n1 = x.n1(), n2 = x.n2(), n3 = x.n3();
  const auto xh = mode3_dft(x);
  ComplexBlockSet uh, sh, vh;
  uh.blocks.resize(static_cast<std::size_t>(n3));
  sh.blocks.resize(static_cast<std::size_t>(n3));
  vh.blocks.resize(static_cast<std::size_t>(n3));
  std::vector<Vector> sigmas(static_cast<std::size_t>(n3));

  parallel_for(0, n3 / 2 + 1, [&](std::ptrdiff_t k) {
    const auto ks = static_cast<std::size_t>(k);
    const ComplexMatrix& block = xh.blocks[ks];
    ComplexMatrix U, V;
    Vector s;
    const bool real_block = (k == 0) || (2 * k == n3);
    if (real_block) {
      Eigen::BDCSVD<Matrix> svd(block.real(), Eigen::ComputeFullU | Eigen::ComputeFullV);
      if (svd.info() != Eigen::Success)
        throw NumericError("t_svd: SVD failed on Fourier block " + std::to_string(k));
      U = svd.matrixU().cast<std::complex<double>>();
      V = svd.matrixV().cast<std::complex<double>>();
      s = svd.singularValues();
    } else {
      Eigen::BDCSVD<ComplexMatrix> svd(block, Eigen::ComputeFullU | Eigen::ComputeFullV);
      if (svd.info() != Eigen::Success)
        throw NumericError("t_svd: SVD failed on Fourier block " + std::to_string(k));
      U = svd.matrixU();
      V = svd.matrixV();
      s = svd.singularValues();
    }
    ComplexMatrix S = ComplexMatrix::Zero(n1, n2);
    for (Index i = 0; i < s.size(); ++i) S(i, i) = s(i);
    uh.blocks[ks] = std::move(U);
    vh.blocks[ks] = std::move(V);
    sh.blocks[ks] = std::move(S);
    sigmas[ks] = std::move(s);
  });
  for (Index k = n3 / 2 + 1; k < n3; ++k) {
    const auto ks = static_cast<std::size_t>(k), ms = static_cast<std::size_t>(n3 - k);
    uh.blocks[ks] = uh.blocks[ms].conjugate();
    vh.blocks[ks] = vh.blocks[ms].conjugate();
    sh.blocks[ks] = sh.blocks[ms];
    sigmas[ks] = sigmas[ms];
  }
  return {mode3_idft(uh), mode3_idft(sh), mode3_idft(vh), std::move(sigmas)};
}

}  // namespace spectre
