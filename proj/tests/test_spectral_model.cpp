#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <set>

#include "spectre/projector.hpp"
#include "spectre/regularizers.hpp"
#include "spectre/spectral_model.hpp"

using namespace spectre;

namespace {

Index numerical_rank(const Matrix& m, double rel_tol) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector s = svd.singularValues();
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

double log_pmf(std::int64_t k, double lambda) {
  const double kd = static_cast<double>(k);
  return kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0);
}

// Pearson chi-square p-value of n samples against Poisson(lambda). Bins are
// consecutive integer ranges, merged until each expects at least 20 hits;
// the two tails are open.
double poisson_chi2_pvalue(double lambda, int n, std::uint64_t seed) {
  const double sd = std::sqrt(lambda);
  const auto lo = static_cast<std::int64_t>(std::max(0.0, std::floor(lambda - 6.0 * sd - 2.0)));
  const auto hi = static_cast<std::int64_t>(std::ceil(lambda + 6.0 * sd + 2.0));
  std::vector<std::int64_t> edges;  // bin b covers [edges[b], edges[b+1])
  std::vector<double> prob;
  double acc = 0.0;
  edges.push_back(lo);
  for (std::int64_t k = lo; k <= hi; ++k) {
    acc += std::exp(log_pmf(k, lambda));
    if (acc * n >= 20.0) {
      prob.push_back(acc);
      edges.push_back(k + 1);
      acc = 0.0;
    }
  }
  if (acc > 0.0 && !prob.empty()) prob.back() += acc;
  edges.back() = hi + 1;
  // Tails fold into the outer bins.
  double inner = 0.0;
  for (double p : prob) inner += p;
  prob.front() += 0.5 * (1.0 - inner);
  prob.back() += 0.5 * (1.0 - inner);

  std::vector<double> observed(prob.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    auto rng = SplitMix64::stream(seed, 0, static_cast<std::uint64_t>(i));
    const std::int64_t y = poisson_sample(lambda, rng);
    const auto it = std::upper_bound(edges.begin(), edges.end(), y);
    std::size_t b = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    b = std::min(b, prob.size() - 1);
    observed[b] += 1.0;
  }
  double chi2 = 0.0;
  for (std::size_t b = 0; b < prob.size(); ++b) {
    const double e = prob[b] * n;
    chi2 += (observed[b] - e) * (observed[b] - e) / e;
  }
  const boost::math::chi_squared dist(static_cast<double>(prob.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

}  // namespace

TEST(Attenuation, ReferenceEnergyNormalization) {
  for (const auto& m : material_presets()) EXPECT_NEAR(attenuation(m, 25.0), m.a_pe + m.a_c, 1e-15);
}

TEST(Attenuation, ComptonOnlyFollowsKleinNishina) {
  const MaterialModel m{"c", 0.0, 0.7};
  double prev = std::numeric_limits<double>::infinity();
  for (double e = 25.0; e <= 85.0; e += 1.0) {
    const double mu = attenuation(m, e);
    EXPECT_NEAR(mu / klein_nishina(e), 0.7 / klein_nishina(25.0), 1e-14);
    EXPECT_LT(mu, prev);
    prev = mu;
  }
}

TEST(Attenuation, KleinNishinaLowEnergyLimit) {
  // In units of 2 pi r_e^2 the total cross-section tends to the Thomson value 4/3 as E -> 0.
  EXPECT_NEAR(klein_nishina(0.01), 4.0 / 3.0, 1e-4);
  EXPECT_THROW(klein_nishina(0.0), std::invalid_argument);
}

TEST(Attenuation, PresetsMonotoneAndConsistentlyOrdered) {
  const auto mats = material_presets();
  const auto energies = uniform_energies(12);
  ASSERT_EQ(energies.size(), 12u);
  EXPECT_DOUBLE_EQ(energies.front(), 25.0);
  EXPECT_DOUBLE_EQ(energies.back(), 85.0);
  for (const auto& m : mats) {
    if (m.a_pe == 0.0 && m.a_c == 0.0) continue;
    for (std::size_t k = 1; k < energies.size(); ++k) EXPECT_LT(attenuation(m, energies[k]), attenuation(m, energies[k - 1])) << m.name;
  }
  for (std::size_t a = 0; a < mats.size(); ++a)
    for (std::size_t b = 0; b < mats.size(); ++b) {
      const bool lo = attenuation(mats[a], 25.0) < attenuation(mats[b], 25.0);
      const bool hi = attenuation(mats[a], 85.0) < attenuation(mats[b], 85.0);
      EXPECT_EQ(lo, hi) << mats[a].name << " vs " << mats[b].name;
    }
}

TEST(Phantom1, LabelsAndValues) {
  const auto e = uniform_energies(12);
  const Phantom ph = build_phantom1(128, 128, e);
  std::set<int> labels(ph.labels.data(), ph.labels.data() + ph.labels.size());
  EXPECT_EQ(labels.size(), ph.materials.size());
  EXPECT_GE(ph.materials.size(), 5u);  // container plus at least four inclusions
  for (Index k = 0; k < 12; ++k)
    for (Index i2 = 0; i2 < 128; ++i2)
      for (Index i1 = 0; i1 < 128; ++i1)
        EXPECT_EQ(ph.truth(i1, i2, k), attenuation(ph.materials[static_cast<std::size_t>(ph.labels(i1, i2))], e[static_cast<std::size_t>(k)]));
  EXPECT_EQ(ph.truth, build_phantom1(128, 128, e).truth);
}

TEST(Phantom1, MuScaleIsLinear) {
  const auto e = uniform_energies(4);
  const Phantom a = build_phantom1(40, 36, e), b = build_phantom1(40, 36, e, 2.5);
  EXPECT_LE((b.truth - 2.5 * a.truth).vec().norm(), 1e-14 * b.truth.vec().norm());
}

TEST(Phantom1, Mode3RankIsLow) {
  const Phantom ph = build_phantom1(64, 64, uniform_energies(12));
  const Index r = numerical_rank(unfold(ph.truth, 3), 1e-10);
  EXPECT_LE(r, static_cast<Index>(ph.materials.size()));
  EXPECT_LE(r, 2);  // photoelectric and Compton terms
  EXPECT_EQ(numerical_rank(unfold(ph.truth, 3), 1e-6), 2);
}

TEST(Phantom1, SliceTvMatchesLabelBoundaries) {
  const auto e = uniform_energies(3);
  const Phantom ph = build_phantom1(64, 64, e);
  for (Index k = 0; k < 3; ++k) {
    std::vector<double> mu;
    for (const auto& m : ph.materials) mu.push_back(attenuation(m, e[static_cast<std::size_t>(k)]));
    const auto val = [&](Index i, Index j) { return mu[static_cast<std::size_t>(ph.labels(i, j))]; };
    // Jumps only occur across label boundaries; sum the step heights there.
    double expect = 0.0;
    for (Index j = 0; j + 1 < 64; ++j)
      for (Index i = 0; i + 1 < 64; ++i) {
        const bool bx = ph.labels(i + 1, j) != ph.labels(i, j), by = ph.labels(i, j + 1) != ph.labels(i, j);
        if (!bx && !by) continue;
        const double dx = bx ? val(i + 1, j) - val(i, j) : 0.0, dy = by ? val(i, j + 1) - val(i, j) : 0.0;
        expect += std::hypot(dx, dy);
      }
    EXPECT_NEAR(tv2d_value(ph.truth.slice(k), 1.0), expect, 1e-12 * expect);
  }
}

TEST(Phantom2, ZeroTextureReducesToPhantom1) {
  const auto e = uniform_energies(5);
  TextureOptions opt;
  opt.amplitude = 0.0;
  opt.ramp = 0.0;
  EXPECT_EQ(build_phantom2(48, 48, e, 3, 1.0, opt).truth, build_phantom1(48, 48, e).truth);
}

TEST(Phantom2, TextureRaisesMode3Rank) {
  const auto e = uniform_energies(12);
  const Index r1 = numerical_rank(unfold(build_phantom1(64, 64, e).truth, 3), 1e-6);
  const Index r2 = numerical_rank(unfold(build_phantom2(64, 64, e, 11).truth, 3), 1e-6);
  EXPECT_GT(r2, r1);
}

TEST(Phantom2, TextureAmplitudeAndRamp) {
  const auto e = uniform_energies(12);
  const Phantom ph = build_phantom2(64, 64, e, 5);
  EXPECT_NEAR(ph.texture.cwiseAbs().maxCoeff(), 0.05, 1e-15);
  EXPECT_NEAR(ph.ramp(63, 0) - ph.ramp(0, 0), 0.02, 1e-15);
  EXPECT_NEAR(ph.ramp(63, 10) / ph.ramp(0, 10), 1.01 / 0.99, 1e-14);
  EXPECT_EQ(ph.truth, build_phantom2(64, 64, e, 5).truth);
  EXPECT_NE(ph.truth, build_phantom2(64, 64, e, 6).truth);
}

TEST(Poisson, ChiSquareGoodnessOfFit) {
  for (double lambda : {0.5, 50.0, 1e6}) EXPECT_GT(poisson_chi2_pvalue(lambda, 20000, 42), 0.001) << "lambda " << lambda;
}

TEST(Poisson, EdgeCases) {
  auto rng = SplitMix64::stream(1, 2, 3);
  EXPECT_EQ(poisson_sample(0.0, rng), 0);
  EXPECT_THROW(poisson_sample(-1.0, rng), std::invalid_argument);
  const std::int64_t big = poisson_sample(1e7, rng);
  EXPECT_LT(std::abs(static_cast<double>(big) - 1e7), 6.0 * std::sqrt(1e7));
}

TEST(Simulation, ZeroPhantomMeanIsSource) {
  Geometry g;
  g.n1 = g.n2 = 32;
  g.n_angles = 220;
  const SystemMatrix A = build_system_matrix(g);
  ASSERT_GE(g.rays(), 10000);
  Vector s(1);
  s << 1000.0;
  const MeasurementSet ms = simulate_counts(Tensor3(32, 32, 1), A, s, 9);
  const double mean = ms.counts.col(0).mean();
  EXPECT_LT(std::abs(mean - 1000.0), 3.0 * std::sqrt(1000.0 / static_cast<double>(g.rays())));
}

TEST(Simulation, SeedDeterminism) {
  Geometry g;
  g.n1 = g.n2 = 32;
  const SystemMatrix A = build_system_matrix(g);
  const Phantom ph = build_phantom1(32, 32, uniform_energies(3));
  const Vector s = Vector::Constant(3, 1e4);
  const auto a = simulate_counts(ph.truth, A, s, 17), b = simulate_counts(ph.truth, A, s, 17), c = simulate_counts(ph.truth, A, s, 18);
  EXPECT_EQ(std::memcmp(a.counts.data(), b.counts.data(), sizeof(double) * static_cast<std::size_t>(a.counts.size())), 0);
  EXPECT_NE(a.counts, c.counts);
  EXPECT_THROW(simulate_counts(ph.truth, A, Vector::Constant(2, 1e4), 1), std::invalid_argument);
}

TEST(Pwls, Conventions) {
  MeasurementSet ms;
  ms.source = Vector::Constant(1, 500.0);
  ms.counts = Matrix(3, 1);
  ms.counts << 500.0, 0.0, 5.0;
  const PWLSData d = pwls_transform(ms);
  EXPECT_EQ(d.m(0, 0), 0.0);
  EXPECT_EQ(d.w(0, 0), 500.0);
  EXPECT_EQ(d.m(1, 0), 0.0);
  EXPECT_EQ(d.w(1, 0), 0.0);
  EXPECT_NEAR(d.m(2, 0), std::log(100.0), 1e-15);
  ms.counts(1, 0) = -1.0;
  EXPECT_THROW(pwls_transform(ms), std::invalid_argument);
}

TEST(Pwls, NoiselessRoundTrip) {
  Geometry g;
  g.n1 = g.n2 = 32;
  const SystemMatrix A = build_system_matrix(g);
  const Phantom ph = build_phantom1(32, 32, uniform_energies(4), 0.5);
  const Matrix li = project_tensor(A, ph.truth);
  MeasurementSet ms;
  ms.source = Vector::Constant(4, 1e6);
  ms.counts = Matrix(li.rows(), li.cols());
  for (Index k = 0; k < 4; ++k) ms.counts.col(k) = 1e6 * (-li.col(k).array()).exp();
  const PWLSData d = pwls_transform(ms);
  EXPECT_LE((d.m - li).cwiseAbs().maxCoeff(), 1e-12);
}
