#include "nolb/dynamics.hpp"

#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace nolb;

namespace {

const InteractionFunction kIndicator = InteractionFunction::indicator();

std::vector<Point2> points_of(const AgentConfiguration& c) {
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < c.n_agents(); ++i)
    pts.push_back({c(i, 0), c.dim() > 1 ? c(i, 1) : 0.0});
  return pts;
}

ModelParams params_for(Model m, double r_star, double dt, double t_end, std::uint64_t seed = 1) {
  ModelParams p;
  p.model = m;
  p.r_star = r_star;
  p.dt = dt;
  p.t_end = t_end;
  p.seed = seed;
  return p;
}

}  // namespace

TEST(ModelNames, RoundTrip) {
  for (Model m : {Model::bounded_confidence, Model::nolb_freeze, Model::nolb, Model::rnolb})
    EXPECT_EQ(parse_model(to_string(m)), m);
  EXPECT_FALSE(parse_model("NOLB").has_value());
  EXPECT_EQ(parse_integrator("euler"), Integrator::euler);
}

TEST(ModelParams, ValidationNamesField) {
  ModelParams p;
  p.dt = 0.2;
  try {
    p.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("dt"), std::string::npos);
  }
  p = ModelParams{};
  p.r_star = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.r_star = 1.0;  // allowed for the counterexample
  EXPECT_NO_THROW(p.validate());
}

TEST(StepBoundedConfidence, Examples) {
  const auto iso = AgentConfiguration::line({3.0});
  EXPECT_EQ(step_bounded_confidence(iso, kIndicator, 0.1), iso);

  const auto next = step_bounded_confidence(AgentConfiguration::line({0.0, 0.5}), kIndicator, 0.1);
  EXPECT_DOUBLE_EQ(next(0, 0), 0.025);
  EXPECT_DOUBLE_EQ(next(1, 0), 0.475);
}

TEST(StepBoundedConfidence, StaysInBoundingBox) {
  CounterRng rng(51, "bc-box");
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = nolb::testing::random_configuration(rng, 2 + rng.below(20), 1 + rng.below(3), 3.0);
    const auto next = step_bounded_confidence(c, kIndicator, 0.1);
    EXPECT_TRUE(bounding_box(c.positions()).contains(bounding_box(next.positions()), 1e-12));
  }
}

TEST(StepNolbFreeze, EmptyCriticalRegionMovesLikeBoundedConfidence) {
  // Pair at distance 0.8: each average points toward the partner, so neither
  // has the other behind it.
  const auto c = AgentConfiguration::line({0.0, 0.8});
  const auto frozen = step_nolb_freeze(c, kIndicator, 0.5, 0.1);
  const auto bc = step_bounded_confidence(c, kIndicator, 0.1);
  EXPECT_EQ(frozen, bc);
  EXPECT_GT(frozen(0, 0), 0.0);
}

TEST(StepNolbFreeze, AgentWithBehindNeighborIsFrozen) {
  const auto c = AgentConfiguration::line({0.0, -0.8, 0.1, 0.2, 0.3, 0.4});
  const auto next = step_nolb_freeze(c, kIndicator, 0.5, 0.05);
  EXPECT_EQ(next(0, 0), 0.0);
}

TEST(StepNolb, EmptyCriticalRegionEqualsBoundedConfidence) {
  const auto c = AgentConfiguration::from_rows({{0, 0}, {0.3, 0.1}, {0.2, -0.2}});
  EXPECT_EQ(step_nolb(c, kIndicator, 0.5, 0.1), step_bounded_confidence(c, kIndicator, 0.1));
}

TEST(StepNolb, ProjectsInsteadOfFreezingIn2d) {
  // Agent 0 is pulled along +x by a cluster and has agent 1 behind it at an
  // angle, so the projection keeps part of the motion.
  const auto c = AgentConfiguration::from_rows(
      {{0, 0}, {-0.8, 0.3}, {0.3, 0}, {0.35, 0}, {0.4, 0}});
  const auto frozen = step_nolb_freeze(c, kIndicator, 0.5, 0.1);
  const auto nolb = step_nolb(c, kIndicator, 0.5, 0.1);
  EXPECT_EQ(frozen(0, 0), 0.0);
  EXPECT_GT(std::abs(nolb(0, 0)) + std::abs(nolb(0, 1)), 1e-3);
}

TEST(OneDimensionalReduction, NolbEqualsFreezeWithKernelAndClosedForm) {
  CounterRng rng(53, "reduction");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(19);
    const auto c = nolb::testing::random_configuration(rng, n, 1, 0.4 * static_cast<double>(n));
    const double r_star = rng.uniform(0.05, 0.95);
    FieldSettings s{kIndicator, r_star, kDefaultProjectionTol, kDefaultGeometryEps, true};
    const Positions freeze = velocity_field(Model::nolb_freeze, c, s);
    const Positions closed = velocity_field(Model::nolb, c, s);
    s.closed_form_1d = false;
    const Positions kernel = velocity_field(Model::nolb, c, s);
    EXPECT_LE((freeze - closed).cwiseAbs().maxCoeff(), kDefaultProjectionTol) << "trial " << trial;
    EXPECT_LE((freeze - kernel).cwiseAbs().maxCoeff(), kDefaultProjectionTol) << "trial " << trial;
  }
}

TEST(StepRnolb, EmptyBehindGraphEqualsBoundedConfidence) {
  const auto c = AgentConfiguration::line({0.0, 0.3, 0.6});
  CounterRng rng(5);
  EXPECT_EQ(step_rnolb(c, kIndicator, 0.5, 0.1, rng), step_bounded_confidence(c, kIndicator, 0.1));
}

TEST(StepRnolb, NoShareableEdgesEqualsNolb) {
  const auto c = AgentConfiguration::line({0.0, -0.8, 0.1, 0.2, 0.3, 0.4});
  CounterRng rng(6);
  EXPECT_EQ(step_rnolb(c, kIndicator, 0.5, 0.05, rng), step_nolb(c, kIndicator, 0.5, 0.05));
}

TEST(StepRnolb, SharedBehindAgentConstrainsExactlyOneOwner) {
  // Agent 0 is behind both 1 and 2, which interact with each other; the
  // cluster on the right pulls both away from it.
  const auto c = AgentConfiguration::line({0.0, 0.8, 0.9, 1.5, 1.6, 1.7});
  FieldSettings s{kIndicator, 0.5, kDefaultProjectionTol, kDefaultGeometryEps, true};
  const Positions nolb = velocity_field(Model::nolb, c, s);
  EXPECT_EQ(nolb(1, 0), 0.0);
  EXPECT_EQ(nolb(2, 0), 0.0);
  CounterRng rng(7);
  for (int p = 0; p < 10; ++p) {
    const auto order = rng.permutation(c.n_agents());
    const Positions v = velocity_field(Model::rnolb, c, s, order);
    EXPECT_EQ((v(1, 0) == 0.0) + (v(2, 0) == 0.0), 1);
  }
}

TEST(StepPermutation, DeterministicPerStep) {
  EXPECT_EQ(step_permutation(9, 3, 10), step_permutation(9, 3, 10));
  EXPECT_NE(step_permutation(9, 3, 10), step_permutation(9, 4, 10));
}

TEST(Simulate, ZeroHorizonKeepsOnlyInitialSnapshot) {
  const auto c = AgentConfiguration::line({0.0, 0.5});
  const auto traj = simulate(c, params_for(Model::nolb, 0.5, 0.01, 0.0));
  ASSERT_EQ(traj.times.size(), 1u);
  EXPECT_EQ(traj.snapshots.front(), c);
  EXPECT_EQ(traj.final_state, c);
}

TEST(Simulate, SingleAgentIsConstant) {
  const auto c = AgentConfiguration::from_rows({{1.0, 2.0}});
  for (Model m : {Model::bounded_confidence, Model::nolb_freeze, Model::nolb, Model::rnolb}) {
    const auto traj = simulate(c, params_for(m, 0.5, 0.01, 1.0));
    for (const auto& s : traj.snapshots) EXPECT_EQ(s, c);
  }
}

TEST(Simulate, TwoAgentExponentialDecay) {
  for (Model m : {Model::bounded_confidence, Model::nolb}) {
    auto p = params_for(m, 0.5, 0.001, 1.0);
    const auto traj = simulate(AgentConfiguration::line({0.0, 0.5}), p);
    EXPECT_DOUBLE_EQ(traj.times.back(), 1.0);
    EXPECT_NEAR(traj.metrics.diameter.back(), 0.5 * std::exp(-1.0), 1e-3);
  }
}

TEST(Simulate, RecordingGridAndFinalStep) {
  RecordOptions rec;
  rec.every = 4;
  const auto traj = simulate(AgentConfiguration::line({0.0, 0.5}),
                             params_for(Model::bounded_confidence, 0.5, 0.1, 1.0), rec);
  const std::vector<double> expected{0.0, 0.4, 0.8, 1.0};
  ASSERT_EQ(traj.times.size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(traj.times[k], expected[k], 1e-15);
  EXPECT_EQ(traj.stats.steps, 10u);
}

TEST(Simulate, DeterministicForSameSeed) {
  CounterRng rng(57, "determinism");
  const auto c = nolb::testing::random_connected_configuration(rng, 15, 1, 4.0);
  const auto a = simulate(c, params_for(Model::rnolb, 0.4, 0.01, 2.0, 99));
  const auto b = simulate(c, params_for(Model::rnolb, 0.4, 0.01, 2.0, 99));
  EXPECT_EQ(a.final_state, b.final_state);
  EXPECT_EQ(a.metrics.diameter, b.metrics.diameter);
}

TEST(Simulate, StopDiameterEndsEarly) {
  auto p = params_for(Model::bounded_confidence, 0.5, 0.01, 100.0);
  p.stop_diameter = 0.1;
  const auto traj = simulate(AgentConfiguration::line({0.0, 0.5}), p);
  EXPECT_TRUE(traj.stats.stopped_early);
  EXPECT_LE(traj.metrics.diameter.back(), 0.1);
  EXPECT_LT(traj.times.back(), 5.0);
}

TEST(Simulate, RejectsNonFiniteAndBadRecordEvery) {
  RecordOptions rec;
  rec.every = 0;
  EXPECT_THROW(simulate(AgentConfiguration::line({0.0}), ModelParams{}, rec),
               std::invalid_argument);
  EXPECT_THROW(AgentConfiguration::line({0.0, std::nan("")}), std::invalid_argument);
}

TEST(Simulate, CounterexampleWithFullCriticalBand) {
  auto p = params_for(Model::nolb, 1.0, 0.01, 50.0);
  RecordOptions rec;
  rec.every = 100;
  const auto traj = simulate(AgentConfiguration::line({1, 2, 3, 4}), p, rec);
  const auto& x = traj.final_state;
  EXPECT_LE(std::abs(x(1, 0) - 2.0), 1e-6);
  EXPECT_LE(std::abs(x(2, 0) - 3.0), 1e-6);
  EXPECT_LE(std::abs(x(0, 0) - x(1, 0)), 1e-3);
  EXPECT_LE(std::abs(x(3, 0) - x(2, 0)), 1e-3);
}

// Invariants checked on short random runs of every model.

class DynamicsProperty : public ::testing::TestWithParam<Model> {};

TEST_P(DynamicsProperty, ContractivityAndDiameter) {
  const Model model = GetParam();
  CounterRng rng(61, to_string(model));
  const double dt = 0.01;
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const auto c = nolb::testing::random_connected_configuration(rng, 12, d, d == 1 ? 5.0 : 1.6);
    auto p = params_for(model, rng.uniform(0.1, 0.9), dt, 3.0, 1000 + trial);
    RecordOptions rec;
    rec.every = 5;
    const auto traj = simulate(c, p, rec);
    for (std::size_t k = 1; k < traj.snapshots.size(); ++k) {
      const auto& prev = traj.snapshots[k - 1];
      const auto& cur = traj.snapshots[k];
      EXPECT_LE(traj.metrics.diameter[k], traj.metrics.diameter[k - 1] + 10 * dt);
      if (d <= 2) {
        const auto hull = points_of(prev);
        for (const auto& q : points_of(cur))
          EXPECT_TRUE(hull_contains_2d(hull, q, 10 * dt * kDefaultGeometryEps))
              << "trial " << trial << " step " << k;
      } else {
        EXPECT_TRUE(bounding_box(prev.positions()).contains(bounding_box(cur.positions()),
                                                            10 * dt * kDefaultGeometryEps));
      }
    }
  }
}

TEST_P(DynamicsProperty, ConnectivityPreserved) {
  const Model model = GetParam();
  if (model == Model::bounded_confidence || model == Model::nolb_freeze) GTEST_SKIP();
  CounterRng rng(67, to_string(model));
  const double dt = 0.01;
  const double kappa = 4.0;
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t d = 1 + trial % 2;
    const auto c = nolb::testing::random_connected_configuration(rng, 15, d, d == 1 ? 6.0 : 2.0);
    auto p = params_for(model, rng.uniform(0.1, 0.9), dt, 5.0, 2000 + trial);
    RecordOptions rec;
    rec.every = 1;
    const auto traj = simulate(c, p, rec);
    const double slack = 1.0 + kappa * dt * dt;
    for (std::size_t k = 1; k < traj.snapshots.size(); ++k) {
      const auto g = interaction_graph(traj.snapshots[k], slack - 1.0);
      EXPECT_TRUE(is_connected(g)) << "trial " << trial << " step " << k;
    }
    EXPECT_EQ(traj.stats.guard_failures, 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(AllModels, DynamicsProperty,
                         ::testing::Values(Model::bounded_confidence, Model::nolb_freeze,
                                           Model::nolb, Model::rnolb),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           for (auto& ch : s)
                             if (ch == '-') ch = '_';
                           return s;
                         });

TEST(NolbProperty, CriticalPairsDoNotSeparate) {
  CounterRng rng(71, "pairwise");
  const double dt = 0.01;
  const double kappa = 4.0;
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t d = 1 + trial % 2;
    const auto c = nolb::testing::random_connected_configuration(rng, 12, d, d == 1 ? 5.0 : 1.8);
    const double r_star = rng.uniform(0.1, 0.9);
    RecordOptions rec;
    rec.every = 1;
    const auto traj = simulate(c, params_for(Model::nolb, r_star, dt, 3.0), rec);
    for (std::size_t k = 1; k < traj.snapshots.size(); ++k) {
      const auto& a = traj.snapshots[k - 1];
      const auto& b = traj.snapshots[k];
      for (std::size_t i = 0; i < a.n_agents(); ++i)
        for (std::size_t j = i + 1; j < a.n_agents(); ++j) {
          const double r = a.distance(i, j);
          if (r >= 1.0 - r_star && r <= 1.0) EXPECT_LE(b.distance(i, j), r + kappa * dt);
        }
    }
  }
}

TEST(Integrators, SsprkMoreAccurateThanEuler) {
  auto p = params_for(Model::bounded_confidence, 0.5, 0.01, 5.0);
  p.integrator = Integrator::euler;
  const double euler = simulate(AgentConfiguration::line({0, 0.5}), p).metrics.diameter.back();
  p.integrator = Integrator::ssprk2;
  const double heun = simulate(AgentConfiguration::line({0, 0.5}), p).metrics.diameter.back();
  const double exact = 0.5 * std::exp(-5.0);
  EXPECT_LT(std::abs(heun - exact), 0.1 * std::abs(euler - exact));
}
