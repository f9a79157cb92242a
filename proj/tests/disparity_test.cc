#include "disparity_audit/disparity.h"

#include <algorithm>

#include "disparity_audit/errors.h"
#include "disparity_audit/rng.h"
#include "gtest/gtest.h"

namespace disparity_audit {
namespace {

MetricStream Stream(std::initializer_list<double> values) {
  MetricStream out;
  for (const double v : values) out.push_back(v);
  return out;
}

TEST(Percentile, Examples) {
  const std::vector<double> four = {4, 1, 3, 2};
  EXPECT_EQ(Percentile(four, 50), 2.5);
  EXPECT_EQ(Percentile(four, 0), 1.0);
  EXPECT_EQ(Percentile(four, 100), 4.0);
  const std::vector<double> constant(17, 0.3);
  for (const double q : {0.0, 2.5, 50.0, 97.5, 100.0}) EXPECT_EQ(Percentile(constant, q), 0.3);
  EXPECT_THROW(Percentile({}, 50), InvariantViolation);
  EXPECT_THROW(Percentile(four, 101), InvariantViolation);
}

// Linear interpolation straight from the definition.
double OraclePercentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double rank = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

TEST(Percentile, PropertyMatchesDefinitionAndMirrors) {
  StreamRng rng(29);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(1 + rng.Below(50));
    for (double& x : v) x = rng.Normal();
    // Multiples of 1/64 keep 100 - q exact.
    const double q = static_cast<double>(rng.Below(6401)) / 64.0;
    EXPECT_NEAR(Percentile(v, q), OraclePercentile(v, q), 1e-12);
    std::vector<double> negated(v);
    for (double& x : negated) x = -x;
    EXPECT_EQ(Percentile(negated, 100.0 - q), -Percentile(v, q));
  }
}

TEST(PerConceptDisparity, IdenticalGroups) {
  const MetricStream s = Stream({0.2, 0.5, 0.7});
  const MetricEstimate e = PerConceptDisparity(s, s);
  EXPECT_EQ(e.point, 0.0);
  EXPECT_EQ(e.ci_low, 0.0);
  EXPECT_EQ(e.ci_high, 0.0);
  EXPECT_FALSE(IsSignificant(e));
}

TEST(PerConceptDisparity, OneToHundred) {
  MetricStream a;
  MetricStream b;
  for (int i = 1; i <= 100; ++i) {
    a.push_back(i + 0.0);
    b.push_back(0.0);
  }
  const MetricEstimate e = PerConceptDisparity(a, b);
  EXPECT_DOUBLE_EQ(*e.point, 50.5);
  EXPECT_NEAR(*e.ci_low, 3.475, 1e-12);
  EXPECT_NEAR(*e.ci_high, 97.525, 1e-12);
  EXPECT_EQ(e.bootstrap_count, 100u);
  EXPECT_EQ(e.bootstraps_used, 100u);
  EXPECT_TRUE(IsSignificant(e));
}

TEST(PerConceptDisparity, PropertySwappingGroupsMirrors) {
  StreamRng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    MetricStream a(1 + rng.Below(60));
    MetricStream b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (rng.Below(10) != 0) a[i] = rng.Uniform();
      if (rng.Below(10) != 0) b[i] = rng.Uniform();
    }
    const MetricEstimate ab = PerConceptDisparity(a, b);
    const MetricEstimate ba = PerConceptDisparity(b, a);
    ASSERT_EQ(ab.point.has_value(), ba.point.has_value());
    if (!ab.point) continue;
    EXPECT_NEAR(*ba.point, -*ab.point, 1e-15);
    EXPECT_EQ(*ba.ci_low, -*ab.ci_high);
    EXPECT_EQ(*ba.ci_high, -*ab.ci_low);
    EXPECT_EQ(ab.Swapped().ci_low, ba.ci_low);
    EXPECT_EQ(IsSignificant(ab), IsSignificant(ba));
  }
}

TEST(PerConceptDisparity, UndefinedBootstrapsAreDroppedPairwise) {
  const MetricStream a = {0.5, std::nullopt, 0.7, 0.9};
  const MetricStream b = {0.1, 0.2, std::nullopt, 0.3};
  const MetricEstimate e = PerConceptDisparity(a, b);
  EXPECT_EQ(e.bootstraps_used, 2u);
  EXPECT_DOUBLE_EQ(*e.point, 0.5);
  EXPECT_TRUE(e.reliable);
  const MetricStream mostly = {0.5, std::nullopt, std::nullopt, std::nullopt};
  EXPECT_FALSE(PerConceptDisparity(mostly, b).reliable);
  const MetricEstimate none = PerConceptDisparity({std::nullopt}, {0.1});
  EXPECT_FALSE(none.point.has_value());
  EXPECT_FALSE(IsSignificant(none));
  EXPECT_THROW(PerConceptDisparity({0.1, 0.2}, {0.1}), InvariantViolation);
}

TEST(AggregateDisparity, SingletonEqualsPerConcept) {
  const MetricStream a = Stream({0.9, 0.4, 0.6, 0.3});
  const MetricStream b = Stream({0.1, 0.5, 0.2, 0.2});
  const std::vector<ConceptStreams> one = {{a, b}};
  const MetricEstimate agg = AggregateDisparity(one);
  const MetricEstimate single = PerConceptDisparity(a, b);
  EXPECT_EQ(agg.point, single.point);
  EXPECT_EQ(agg.ci_low, single.ci_low);
  EXPECT_EQ(agg.ci_high, single.ci_high);
  EXPECT_EQ(agg.concept_id, "aggregate");
}

TEST(AggregateDisparity, OppositeConceptsCancel) {
  const std::vector<ConceptStreams> concepts = {
      {Stream({0.6, 0.7}), Stream({0.5, 0.5})}, {Stream({0.5, 0.5}), Stream({0.6, 0.7})}};
  const MetricEstimate e = AggregateDisparity(concepts);
  EXPECT_EQ(e.point, 0.0);
  EXPECT_EQ(e.ci_low, 0.0);
  EXPECT_EQ(e.ci_high, 0.0);
}

TEST(AggregateDisparity, ThreeConceptsFourBootstraps) {
  // Per-bootstrap mean(a) - mean(b), worked by hand:
  //   b0: (0.9+0.6+0.3)/3 - (0.3+0.6+0.3)/3 = 0.2
  //   b1: (0.8+0.5+0.2)/3 - (0.2+0.2+0.2)/3 = 0.3
  //   b2: (0.7+0.4+0.4)/3 - (0.7+0.4+0.4)/3 = 0.0
  //   b3: (0.6+0.6+0.6)/3 - (0.1+0.1+0.1)/3 = 0.5
  const std::vector<ConceptStreams> concepts = {
      {Stream({0.9, 0.8, 0.7, 0.6}), Stream({0.3, 0.2, 0.7, 0.1})},
      {Stream({0.6, 0.5, 0.4, 0.6}), Stream({0.6, 0.2, 0.4, 0.1})},
      {Stream({0.3, 0.2, 0.4, 0.6}), Stream({0.3, 0.2, 0.4, 0.1})}};
  const MetricEstimate e = AggregateDisparity(concepts);
  EXPECT_NEAR(*e.point, (0.2 + 0.3 + 0.0 + 0.5) / 4, 1e-12);
  // Sorted [0, 0.2, 0.3, 0.5]; rank 0.075 and 2.925.
  EXPECT_NEAR(*e.ci_low, 0.075 * 0.2, 1e-12);
  EXPECT_NEAR(*e.ci_high, 0.3 + 0.925 * 0.2, 1e-12);
  EXPECT_EQ(e.bootstraps_used, 4u);
}

TEST(AggregateDisparity, DropsBootstrapWithAnyUndefinedConcept) {
  const std::vector<ConceptStreams> concepts = {
      {MetricStream{0.5, 0.5}, MetricStream{0.1, 0.1}},
      {MetricStream{0.5, std::nullopt}, MetricStream{0.1, 0.1}}};
  EXPECT_EQ(AggregateDisparity(concepts).bootstraps_used, 1u);
  EXPECT_THROW(AggregateDisparity({}), DataError);
}

TEST(IsSignificant, Boundaries) {
  MetricEstimate e;
  e.point = 0.05;
  e.ci_low = 0.02;
  e.ci_high = 0.08;
  EXPECT_TRUE(IsSignificant(e));
  e.ci_low = -0.01;
  EXPECT_FALSE(IsSignificant(e));
  e.point = e.ci_low = e.ci_high = 0.0;
  EXPECT_FALSE(IsSignificant(e));
  e.ci_low = e.ci_high = -0.3;
  EXPECT_TRUE(IsSignificant(e));
}

TEST(PairwiseDisparities, AntisymmetricMatrix) {
  const std::vector<MetricStream> groups = {Stream({0.9, 0.8}), Stream({0.5, 0.4}),
                                            Stream({0.1, 0.2})};
  const DisparityMatrix m = PairwiseDisparities(groups);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m[i][i], 0.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(*m[i][j], -*m[j][i], 1e-15);
  }
  EXPECT_NEAR(*MaxPairwiseDisparity(m), 0.7, 1e-12);
  EXPECT_EQ(MaxPairwiseDisparity(PairwiseDisparities({})), std::nullopt);
}

}  // namespace
}  // namespace disparity_audit
