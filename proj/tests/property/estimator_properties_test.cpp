#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "ncdoa/baselines.hpp"
#include "ncdoa/pipeline.hpp"
#include "oracles.hpp"

namespace ncdoa {
namespace {

using testing::Rng;

struct TwoSourceRun {
  Scenario scenario{make_ula(24, 0.5, {6, 6, 6, 6}), {0.0, 15.0}, {1.0, 1.0}, 20.0};
  GridManifold manifold =
      build_grid_manifold(scenario.geometry, make_uniform_grid(-60, 60, 0.5));

  EstimatorSettings settings() const {
    EstimatorSettings e;
    e.noise_variance = scenario.noise_variance();
    e.peaks = TopQ{scenario.source_doas.size()};
    return e;
  }
};

TEST(EstimatorProperties, GlobalPhaseLeavesPeaksUnchanged) {
  const TwoSourceRun setup;
  const Snapshot snap = generate_snapshot(setup.scenario, 31);
  const auto e = setup.settings();
  const auto p1 = run_proposed1(snap, setup.manifold, e).peak_angles();
  const auto p2 = run_proposed2(snap, setup.manifold, e).peak_angles();
  Rng rng(301);
  std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
  for (int k = 0; k < 10; ++k) {
    Snapshot rotated = snap;
    const cplx c = std::polar(1.0, phase(rng));
    for (CVector& x : rotated.observations) x *= c;
    EXPECT_EQ(run_proposed1(rotated, setup.manifold, e).peak_angles(), p1);
    EXPECT_EQ(run_proposed2(rotated, setup.manifold, e).peak_angles(), p2);
  }
}

TEST(EstimatorProperties, SubarrayPermutationPermutesAlphaOnly) {
  const TwoSourceRun setup;
  const Snapshot snap = generate_snapshot(setup.scenario, 32);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<Position> elements;
  Snapshot permuted;
  for (std::size_t k : perm) {
    for (const Position& p : setup.scenario.geometry.subarray_elements(k))
      elements.push_back(p);
    permuted.observations.push_back(snap.observations[k]);
  }
  const ArrayGeometry geometry(elements, {6, 6, 6, 6});
  const GridManifold manifold =
      build_grid_manifold(geometry, setup.manifold.grid_degrees);
  const auto e = setup.settings();

  const LiftedEstimate a = estimate_lifted(snap, setup.manifold, e.mu, e.c,
                                           e.noise_variance, e.solver);
  const LiftedEstimate b =
      estimate_lifted(permuted, manifold, e.mu, e.c, e.noise_variance, e.solver);
  CVector expected(4);
  for (std::size_t k = 0; k < 4; ++k)
    expected(static_cast<Eigen::Index>(k)) = a.factors.alpha_hat(static_cast<Eigen::Index>(perm[k]));
  const cplx inner = expected.dot(b.factors.alpha_hat);
  const cplx c = inner / std::abs(inner);
  EXPECT_LE((b.factors.alpha_hat - c * expected).norm(), 1e-5);

  EXPECT_EQ(proposed1_from(b, manifold, e.peaks).peak_angles(),
            proposed1_from(a, setup.manifold, e.peaks).peak_angles());
  EXPECT_EQ(proposed2_from(b, permuted, manifold, e).peak_angles(),
            proposed2_from(a, snap, setup.manifold, e).peak_angles());
}

TEST(EstimatorProperties, RankOneResidualIsTheTrailingSpectrum) {
  const TwoSourceRun setup;
  const auto e = setup.settings();
  for (std::uint64_t seed = 40; seed < 45; ++seed) {
    const Snapshot snap = generate_snapshot(setup.scenario, seed);
    const LiftedEstimate lifted = estimate_lifted(snap, setup.manifold, e.mu, e.c,
                                                  e.noise_variance, e.solver);
    const Rank1Factors& f = lifted.factors;
    const double tail =
        f.singular_values.tail(f.singular_values.size() - 1).squaredNorm();
    const double residual =
        (lifted.solution.z_hat - f.s_hat * f.alpha_hat.adjoint()).squaredNorm();
    EXPECT_NEAR(residual, tail, 1e-8 * std::max(tail, 1e-300) + 1e-14 * f.sigma1 * f.sigma1);
    EXPECT_NEAR(f.alpha_hat.norm(), 1.0, 1e-12);
    for (double phi : estimate_phases(f).phases) {
      EXPECT_GT(phi, -kPi);
      EXPECT_LE(phi, kPi);
    }
  }
}

TEST(EstimatorProperties, SparsityOnlyIsProposed1AtMuZero) {
  const TwoSourceRun setup;
  auto e = setup.settings();
  for (std::uint64_t seed = 50; seed < 53; ++seed) {
    const Snapshot snap = generate_snapshot(setup.scenario, seed);
    const SpectrumEstimate so = run_sparsity_only(snap, setup.manifold, e);
    EstimatorSettings forced = e;
    forced.mu = 0.0;
    const SpectrumEstimate p1 = run_proposed1(snap, setup.manifold, forced);
    EXPECT_EQ(so.peak_angles(), p1.peak_angles());
    const double scale = *std::max_element(p1.magnitudes.begin(), p1.magnitudes.end()) /
                         *std::max_element(so.magnitudes.begin(), so.magnitudes.end());
    for (std::size_t n = 0; n < so.magnitudes.size(); ++n)
      EXPECT_NEAR(p1.magnitudes[n], scale * so.magnitudes[n], 1e-12 * scale);
  }
}

TEST(MusicProperties, SpectrumIgnoresSubarrayPhases) {
  Scenario s{make_ula(24, 0.5, {6, 6, 6, 6}), {-15, 0, 15, 30}, {1, 1, 1, 1}, 10.0};
  s.phase_mode = std::vector<double>(4, 0.0);
  const auto grid = make_uniform_grid(-60, 60, 0.5);
  const MusicOptions music{4, 5, true};
  Rng rng(302);
  std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Snapshot base = generate_snapshot(s, seed);
    const auto reference = run_music(base, s.geometry, grid, music).magnitudes;
    for (int draw = 0; draw < 5; ++draw) {
      Snapshot rotated = base;
      for (CVector& x : rotated.observations) x *= std::polar(1.0, phase(rng));
      EXPECT_TRUE(run_music(rotated, s.geometry, grid, music).magnitudes == reference);
    }
  }
}

}  // namespace
}  // namespace ncdoa
