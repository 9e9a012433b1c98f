#include <gtest/gtest.h>

#include <random>

#include "spectre/regularizers.hpp"

using namespace spectre;

namespace {

Tensor3 random_tensor(Index n1, Index n2, Index n3, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Tensor3 t(n1, n2, n3);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = nd(gen);
  return t;
}

Matrix random_matrix(Index r, Index c, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(gen);
  return m;
}

// Singular value shrinkage through a one-sided Jacobi SVD.
Matrix dense_shrink(const Matrix& z, double tau) {
  Eigen::JacobiSVD<Matrix> svd(z, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector s = (svd.singularValues().array() - tau).max(0.0).matrix();
  const Index r = s.size();
  return svd.matrixU().leftCols(r) * s.asDiagonal() * svd.matrixV().leftCols(r).transpose();
}

double dense_nuclear(const Matrix& z) { return Eigen::JacobiSVD<Matrix>(z).singularValues().sum(); }

// Direct loop evaluation of the isotropic TV over the literal index ranges.
double tv_loop(const Tensor3& x, bool volumetric, double w) {
  double total = 0.0;
  const Index km = volumetric ? x.n3() - 1 : x.n3();
  for (Index k = 0; k < km; ++k)
    for (Index j = 0; j < x.n2() - 1; ++j)
      for (Index i = 0; i < x.n1() - 1; ++i) {
        const double dx = x(i + 1, j, k) - x(i, j, k);
        const double dy = x(i, j + 1, k) - x(i, j, k);
        const double dz = volumetric ? w * (x(i, j, k + 1) - x(i, j, k)) : 0.0;
        total += std::sqrt(dx * dx + dy * dy + dz * dz);
      }
  return total;
}

double tv_prox_objective(const Matrix& u, const Matrix& v, double tau) { return tau * tv2d_value(u, 1.0) + 0.5 * (u - v).squaredNorm(); }

}  // namespace

TEST(AlphaSchedule, QuadraticDecay) {
  const auto a = alpha_schedule(12);
  ASSERT_EQ(a.size(), 12u);
  EXPECT_DOUBLE_EQ(a.front(), 0.05);
  EXPECT_DOUBLE_EQ(a.back(), 0.03);
  for (std::size_t k = 1; k < a.size(); ++k) EXPECT_LT(a[k], a[k - 1]);
  EXPECT_NEAR(a[5], 0.03 + 0.02 * std::pow(6.0 / 11.0, 2), 1e-16);
  EXPECT_EQ(alpha_schedule(1), std::vector<double>{0.05});
}

TEST(SvShrink, DiagonalCasesAreExact) {
  Matrix d = Matrix::Zero(4, 3);
  d(0, 0) = 5.0;
  d(1, 1) = 3.0;
  d(2, 2) = 1.0;
  Matrix expect = Matrix::Zero(4, 3);
  expect(0, 0) = 3.0;
  expect(1, 1) = 1.0;
  EXPECT_EQ(sv_shrink(d, 2.0), expect);
  EXPECT_EQ(sv_shrink(d, 0.0), d);
  EXPECT_EQ(sv_shrink(d, 5.0), Matrix::Zero(4, 3));
  EXPECT_EQ(sv_shrink(d, 7.5), Matrix::Zero(4, 3));
  Matrix neg = -d;
  EXPECT_EQ(sv_shrink(neg, 2.0), -expect);
  EXPECT_THROW(sv_shrink(d, -1.0), std::invalid_argument);
}

TEST(SvShrink, MatchesDenseOracle) {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 20; ++t) {
    const Matrix z = random_matrix(3 + t % 5, 2 + t % 7, gen);
    const double tau = 0.1 * (t % 9);
    EXPECT_LE((sv_shrink(z, tau) - dense_shrink(z, tau)).norm(), 1e-12 * std::max(1.0, z.norm()));
  }
}

TEST(SvShrink, Nonexpansive) {
  std::mt19937_64 gen(4);
  for (int t = 0; t < 50; ++t) {
    const Matrix a = random_matrix(6, 5, gen), b = random_matrix(6, 5, gen);
    const double tau = 0.05 * t;
    EXPECT_LE((sv_shrink(a, tau) - sv_shrink(b, tau)).norm(), (a - b).norm() * (1 + 1e-12));
  }
}

TEST(SvShrink, LocalOptimality) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 10; ++t) {
    const Matrix z = random_matrix(7, 4, gen);
    const double tau = 0.8;
    const auto obj = [&](const Matrix& x) { return tau * dense_nuclear(x) + 0.5 * (x - z).squaredNorm(); };
    const Matrix x = sv_shrink(z, tau);
    const double f = obj(x);
    for (int p = 0; p < 30; ++p) EXPECT_GE(obj(x + 1e-3 * random_matrix(7, 4, gen)), f - 1e-12);
  }
}

TEST(SvShrink, ComplexBlocks) {
  std::mt19937_64 gen(6);
  const Matrix re = random_matrix(5, 4, gen), im = random_matrix(5, 4, gen);
  const ComplexMatrix z = re.cast<std::complex<double>>() + std::complex<double>(0, 1) * im.cast<std::complex<double>>();
  const ComplexMatrix x = sv_shrink(z, 0.7);
  Eigen::JacobiSVD<ComplexMatrix> a(z), b(x);
  for (Index i = 0; i < 4; ++i)
    EXPECT_NEAR(b.singularValues()(i), std::max(a.singularValues()(i) - 0.7, 0.0), 1e-12);
}

TEST(SvShrinkRandomized, AgreesWithFullShrink) {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 4; ++t) {
    // Low rank plus small noise, the regime the sketch targets.
    const Matrix z = random_matrix(120, 8, gen) * random_matrix(8, 90, gen) + 0.05 * random_matrix(120, 90, gen);
    const double tau = 2.0 + t;
    const Matrix full = sv_shrink(z, tau);
    RandomizedShrinkOptions opt;
    opt.rank_hint = 4 + 4 * t;
    const Matrix fast = sv_shrink_randomized(z, tau, opt);
    EXPECT_LE((fast - full).norm(), 1e-6 * full.norm());
  }
  const Matrix small = random_matrix(6, 5, gen);
  EXPECT_LE((sv_shrink_randomized(small, 0.3) - sv_shrink(small, 0.3)).norm(), 1e-12);
}

TEST(Tnn1, RankOneTensor) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd;
  Vector a(5), b(4), c(3);
  for (Index i = 0; i < 5; ++i) a(i) = nd(gen);
  for (Index i = 0; i < 4; ++i) b(i) = nd(gen);
  for (Index i = 0; i < 3; ++i) c(i) = nd(gen);
  Tensor3 x(5, 4, 3);
  for (Index k = 0; k < 3; ++k)
    for (Index j = 0; j < 4; ++j)
      for (Index i = 0; i < 5; ++i) x(i, j, k) = a(i) * b(j) * c(k);
  const double norm = a.norm() * b.norm() * c.norm();
  EXPECT_NEAR(tnn1_value(x, {0.4, 0.4, 0.4}), 1.2 * norm, 1e-12 * norm);
  EXPECT_NEAR(tnn1_value(x, {0.0, 0.0, 1.0}), norm, 1e-12 * norm);
  EXPECT_EQ(tnn1_value(x, {0.0, 0.0, 0.0}), 0.0);
}

TEST(Tnn1, MatchesDenseUnfoldingNorms) {
  std::mt19937_64 gen(9);
  const Tensor3 x = random_tensor(6, 5, 4, gen);
  const double expect = 0.3 * dense_nuclear(unfold(x, 1)) + 0.5 * dense_nuclear(unfold(x, 2)) + 0.7 * dense_nuclear(unfold(x, 3));
  EXPECT_NEAR(tnn1_value(x, {0.3, 0.5, 0.7}), expect, 1e-12 * expect);
}

TEST(Tnn2, NormAxioms) {
  std::mt19937_64 gen(10);
  for (int t = 0; t < 10; ++t) {
    const Tensor3 x = random_tensor(5, 4, 3 + t % 4, gen), y = random_tensor(5, 4, 3 + t % 4, gen);
    const double nx = tnn2_value(x);
    EXPECT_GT(nx, 0.0);
    EXPECT_NEAR(tnn2_value(-2.5 * x), 2.5 * nx, 1e-12 * nx);
    EXPECT_LE(tnn2_value(x + y), nx + tnn2_value(y) + 1e-12);
  }
  EXPECT_EQ(tnn2_value(Tensor3(3, 3, 3)), 0.0);
}

TEST(Tnn2Prox, MatchesDenseBcircShrinkage) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 20; ++t) {
    const Index n1 = 2 + t % 5, n2 = 2 + (t / 2) % 4, n3 = 1 + t % 4;
    const Tensor3 v = random_tensor(n1, n2, n3, gen);
    const double tau = 0.05 + 0.1 * (t % 6);
    const Matrix got = bcirc_dense(tnn2_prox(v, tau));
    const Matrix expect = dense_shrink(bcirc_dense(v), static_cast<double>(n3) * tau);
    EXPECT_LE((got - expect).cwiseAbs().maxCoeff(), 1e-9) << n1 << "x" << n2 << "x" << n3;
  }
}

TEST(Tnn2Prox, NonexpansiveAndOptimal) {
  std::mt19937_64 gen(12);
  for (int t = 0; t < 50; ++t) {
    const Tensor3 a = random_tensor(4, 3, 4, gen), b = random_tensor(4, 3, 4, gen);
    EXPECT_LE((tnn2_prox(a, 0.3) - tnn2_prox(b, 0.3)).vec().norm(), (a - b).vec().norm() * (1 + 1e-12));
  }
  const Tensor3 v = random_tensor(4, 3, 5, gen);
  const double tau = 0.4;
  const auto obj = [&](const Tensor3& x) { return tau * tnn2_value(x) + 0.5 * (x - v).vec().squaredNorm(); };
  const Tensor3 x = tnn2_prox(v, tau);
  for (int p = 0; p < 30; ++p) EXPECT_GE(obj(x + 1e-3 * random_tensor(4, 3, 5, gen)), obj(x) - 1e-12);
  EXPECT_EQ(tnn2_prox(v, 0.0), v);
}

TEST(Tv, ValuesMatchLoopOracle) {
  std::mt19937_64 gen(13);
  const Tensor3 x = random_tensor(7, 6, 4, gen);
  Tensor3 one(7, 6, 1);
  one.slice(0) = x.slice(2);
  EXPECT_NEAR(tv2d_value(x.slice(2), 1.0), tv_loop(one, false, 0.0), 1e-12);
  EXPECT_NEAR(tv3d_value(x, 0.3, 0.7), 0.3 * tv_loop(x, true, 0.7), 1e-12);
  std::vector<double> alpha{0.1, 0.2, 0.3, 0.4};
  double expect = 0.0;
  for (Index k = 0; k < 4; ++k) expect += alpha[static_cast<std::size_t>(k)] * tv2d_value(x.slice(k), 1.0);
  EXPECT_NEAR(tv_stack_value(x, alpha), expect, 1e-12);
  // The last row and column carry no term.
  Matrix edge = Matrix::Zero(5, 5);
  edge(4, 2) = 1.0;
  EXPECT_DOUBLE_EQ(tv2d_value(edge, 1.0), 1.0);
  edge(4, 4) = 7.0;
  EXPECT_DOUBLE_EQ(tv2d_value(edge, 1.0), 1.0);
}

TEST(Tv, ZeroModeThreeWeightReducesToSliceSum) {
  std::mt19937_64 gen(14);
  const Tensor3 x = random_tensor(6, 6, 3, gen);
  EXPECT_NEAR(tv3d_value(x, 1.0, 0.0), tv2d_value(x.slice(0), 1.0) + tv2d_value(x.slice(1), 1.0), 1e-12);
}

TEST(Tv, DifferenceOperatorAdjoint) {
  std::mt19937_64 gen(15);
  for (bool vol : {false, true}) {
    const detail::TVGrid g{6, 5, 4, vol, 0.6};
    const Tensor3 x = random_tensor(6, 5, 4, gen);
    Vector p(g.comps() * g.cells());
    std::normal_distribution<double> nd;
    for (Index i = 0; i < p.size(); ++i) p(i) = nd(gen);
    Vector dx(p.size()), dtp(x.size());
    detail::tv_forward(g, x.data(), dx.data());
    detail::tv_adjoint(g, p.data(), dtp.data());
    EXPECT_NEAR(dx.dot(p), x.vec().dot(dtp), 1e-12 * dx.norm() * p.norm());
  }
}

TEST(TvProx, ObjectiveMonotoneAndConverging) {
  std::mt19937_64 gen(16);
  Matrix v = Matrix::Zero(24, 24);
  v.block(6, 6, 12, 12).setConstant(1.0);
  v += 0.2 * random_matrix(24, 24, gen);
  const double tau = 0.15;
  std::vector<double> trace;
  const Matrix u20 = tv_prox(v, tau, 20, &trace);
  ASSERT_EQ(trace.size(), 21u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1]);
  EXPECT_NEAR(trace.back(), tv_prox_objective(u20, v, tau), 1e-12);
  const Matrix u_long = tv_prox(v, tau, 4000);
  const double f_long = tv_prox_objective(u_long, v, tau);
  const double f_400 = tv_prox_objective(tv_prox(v, tau, 400), v, tau);
  EXPECT_LE(f_long, trace.back());
  EXPECT_LE(f_400 - f_long, 1e-3 * (trace.front() - f_long));
  // Prox optimality against random perturbations of the long-run solution.
  for (int p = 0; p < 20; ++p) EXPECT_GE(tv_prox_objective(u_long + 1e-3 * random_matrix(24, 24, gen), v, tau), f_long - 1e-6);
}

TEST(TvProx, PreservesMeanAndConstants) {
  std::mt19937_64 gen(17);
  const Matrix v = random_matrix(10, 9, gen);
  const Matrix u = tv_prox(v, 0.5, 50);
  EXPECT_NEAR(u.mean(), v.mean(), 1e-12);
  const Matrix c = Matrix::Constant(8, 8, 3.25);
  EXPECT_EQ(tv_prox(c, 1.0, 10), c);
  EXPECT_EQ(tv_prox(v, 0.0, 10), v);
  // The last pixel sits in no difference term, so it is left alone and the rest flattens to the mean of the others.
  const Matrix flat = tv_prox(v, 50.0, 3000);
  const double corner = v(9, 8), rest = (v.sum() - corner) / 89.0;
  EXPECT_EQ(flat(9, 8), corner);
  Matrix dev = (flat.array() - rest).abs().matrix();
  dev(9, 8) = 0.0;
  EXPECT_LE(dev.maxCoeff(), 1e-3);
}

TEST(TvProx, VolumetricReducesToSlicesWithZeroWeight) {
  std::mt19937_64 gen(18);
  const Tensor3 v = random_tensor(8, 7, 3, gen);
  const Tensor3 u = tv3d_prox(v, 0.3, 200, 0.0);
  // With w = 0 the last slice carries no term and is left untouched.
  for (Index k = 0; k < 2; ++k) {
    const Matrix ref = tv_prox(v.slice(k), 0.3, 2000);
    EXPECT_LE((u.slice(k) - ref).norm(), 1e-2 * ref.norm());
  }
  EXPECT_EQ(u.slice(2), v.slice(2));
}
