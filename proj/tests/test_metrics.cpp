#include "nolb/metrics.hpp"

#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace nolb;

TEST(Diameter, Basics) {
  EXPECT_EQ(diameter(AgentConfiguration::line({4.0})), 0.0);
  EXPECT_EQ(diameter(AgentConfiguration::line({0.0, 3.0})), 3.0);
  const auto square = AgentConfiguration::from_rows({{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  EXPECT_DOUBLE_EQ(diameter(square), std::sqrt(2.0));
}

TEST(Diameter, TranslationAndRotationInvariant) {
  CounterRng rng(41, "diameter");
  const auto c = nolb::testing::random_configuration(rng, 20, 2, 5.0);
  const double theta = 0.7;
  Eigen::Matrix2d rot;
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  Positions moved = (c.positions() * rot.transpose()).rowwise() + Eigen::RowVector2d(3.0, -8.0);
  EXPECT_NEAR(diameter(AgentConfiguration(moved)), diameter(c), 1e-12);
}

TEST(Variance, Basics) {
  EXPECT_EQ(variance(AgentConfiguration::line({2.0, 2.0, 2.0})), 0.0);
  EXPECT_DOUBLE_EQ(variance(AgentConfiguration::line({-1.0, 1.0})), 1.0);
  const auto c = AgentConfiguration::line({0.1, 0.7, 3.0});
  const auto shifted = AgentConfiguration::line({100.1, 100.7, 103.0});
  EXPECT_NEAR(variance(c), variance(shifted), 1e-10);
}

TEST(ClusteringNumber, ConsensusGivesNMinusOne) {
  const auto c = AgentConfiguration::line(std::vector<double>(10, 4.2));
  EXPECT_EQ(clustering_number(c, 10.0), 9.0);
}

TEST(ClusteringNumber, UniformSpacingIsAboutTwo) {
  // Agents at (k + 1/2) L / N: interior agents have two neighbors at exactly
  // R, the end agents one.
  const std::size_t n = 100;
  std::vector<double> xs;
  for (std::size_t k = 0; k < n; ++k) xs.push_back((static_cast<double>(k) + 0.5) * 10.0 / n);
  const double c = clustering_number(AgentConfiguration::line(xs), 10.0);
  EXPECT_DOUBLE_EQ(c, 2.0 - 2.0 / n);
}

TEST(ClusteringNumber, FarApartPairIsZero) {
  EXPECT_EQ(clustering_number(AgentConfiguration::line({0.0, 7.0}), 10.0), 0.0);
}

TEST(ClusteringNumberProperty, BoundsAndTranslation) {
  CounterRng rng(43, "clustering");
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    const auto c = nolb::testing::random_configuration(rng, n, 1, 3.0);
    const double v = clustering_number(c, 10.0);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, static_cast<double>(n - 1));
    Positions shifted = c.positions().array() + 0.5;
    EXPECT_NEAR(clustering_number(AgentConfiguration(shifted), 10.0), v, 1e-12);
  }
}

TEST(ConsensusReached, Cases) {
  EXPECT_TRUE(consensus_reached(AgentConfiguration::line({1.0}), 1e-3));
  EXPECT_FALSE(consensus_reached(AgentConfiguration::line({0.0, 0.5}), 1e-3));
  EXPECT_TRUE(consensus_reached(AgentConfiguration::line({0.0, 1e-4, 5e-5}), 1e-3));
  EXPECT_THROW(consensus_reached(AgentConfiguration::line({0.0}), 0.0), std::invalid_argument);
}

TEST(StoppingTime, Cases) {
  MetricsSeries s;
  s.times = {0, 1, 2};
  s.diameter = {3, 2, 0.9};
  EXPECT_EQ(stopping_time(s), 2.0);
  s.diameter = {0.5, 0.4, 0.3};
  EXPECT_EQ(stopping_time(s), 0.0);
  s.diameter = {3, 2, 1.5};
  EXPECT_FALSE(stopping_time(s).has_value());
}

TEST(AppendMetrics, RequiresIncreasingTimes) {
  MetricsSeries s;
  const auto c = AgentConfiguration::line({0.0, 0.5});
  append_metrics(s, 0.0, c, 10.0);
  EXPECT_THROW(append_metrics(s, 0.0, c, 10.0), std::invalid_argument);
  append_metrics(s, 0.5, c, 10.0);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_TRUE(s.connected.back());
  EXPECT_EQ(s.clustering_number_self_inclusive.back(), s.clustering_number.back() + 1.0);
}

TEST(TimeAverage, LinearSeries) {
  const std::vector<double> t{0, 1, 2, 3};
  const std::vector<double> v{0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(time_average(t, v, 0, 3), 1.5);
  EXPECT_DOUBLE_EQ(time_average(t, v, 0.5, 2.5), 1.5);
}
