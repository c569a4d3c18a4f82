#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "gridmine/variance.hpp"
#include "support.hpp"

namespace gridmine::variance
{
namespace
{
double RelativeError(double a, double b)
{
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

SubclusterStat Stat1D(double x, std::size_t size, double variance, std::size_t site, int id)
{
  return SubclusterStat{{x}, size, variance, site, id};
}

std::vector<SubclusterStat> IrisSiteStats(std::uint64_t seed, std::vector<std::size_t> ks)
{
  const Dataset ds = GenerateGaussianMixture(gridmine::testing::IrisLikeSpec(seed));
  const auto sites = SplitBySite(ds, RoundRobinPartition(ds, ks.size()));
  std::vector<SubclusterStat> stats;
  for (std::size_t s = 0; s < sites.size(); ++s)
  {
    LocalOptions options;
    options.seed = seed + s;
    const auto local = LocalSubclusters(sites[s], ks[s], LocalAlgorithm::KMeans, s, options);
    stats.insert(stats.end(), local.begin(), local.end());
  }
  return stats;
}

// ---------------------------------------------------------------- local

TEST(LocalSubclusters, KEqualsSizeGivesSingletons)
{
  const Dataset ds = GenerateGaussianMixture(gridmine::testing::IrisLikeSpec(1));
  const Dataset small = SplitBySite(ds, RoundRobinPartition(ds, 10))[0];
  for (LocalAlgorithm algo : {LocalAlgorithm::KMeans, LocalAlgorithm::KHarmonicMeans})
  {
    const auto stats = LocalSubclusters(small, small.Size(), algo);
    ASSERT_EQ(stats.size(), small.Size());
    for (const auto& stat : stats)
    {
      EXPECT_EQ(stat.size, 1u);
      EXPECT_EQ(stat.variance, 0.0);
    }
  }
}

TEST(LocalSubclusters, FiveAndSevenOnIrisLikeSites)
{
  const auto stats = IrisSiteStats(1, {5, 7});
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t total = 0;
  for (const auto& stat : stats)
  {
    (stat.site == 0 ? a : b) += 1;
    total += stat.size;
    EXPECT_GE(stat.size, 1u);
    EXPECT_GE(stat.variance, 0.0);
  }
  EXPECT_EQ(a, 5u);
  EXPECT_EQ(b, 7u);
  EXPECT_EQ(total, 150u);
}

TEST(LocalSubclusters, SingleClusterIsTheSampleSse)
{
  GaussianMixtureSpec spec;
  spec.components = {{{1, 2, 3}, 0.5, 200}};
  const Dataset ds = GenerateGaussianMixture(spec);
  const auto stats = LocalSubclusters(ds, 1, LocalAlgorithm::KMeans);
  ASSERT_EQ(stats.size(), 1u);
  Point mean{0, 0, 0};
  for (const Point& p : ds.Points())
  {
    for (std::size_t d = 0; d < 3; ++d)
    {
      mean[d] += p[d] / 200.0;
    }
  }
  double sse = 0.0;
  for (const Point& p : ds.Points())
  {
    for (std::size_t d = 0; d < 3; ++d)
    {
      sse += (p[d] - mean[d]) * (p[d] - mean[d]);
    }
  }
  for (std::size_t d = 0; d < 3; ++d)
  {
    EXPECT_NEAR(stats[0].center[d], mean[d], 1e-12);
  }
  EXPECT_LT(RelativeError(stats[0].variance, sse), 1e-9);
}

TEST(LocalSubclusters, StatsMatchAssignment)
{
  const Dataset ds = GenerateGaussianMixture(gridmine::testing::IrisLikeSpec(2));
  for (LocalAlgorithm algo : {LocalAlgorithm::KMeans, LocalAlgorithm::KHarmonicMeans})
  {
    const LocalClustering local = ClusterLocally(ds, 6, algo, 0);
    ASSERT_EQ(local.stats.size(), 6u);
    for (std::size_t c = 0; c < 6; ++c)
    {
      std::vector<Point> members;
      for (std::size_t i = 0; i < ds.Size(); ++i)
      {
        if (local.assignment[i] == static_cast<int>(c))
        {
          members.push_back(ds.At(i));
        }
      }
      const SubclusterStat direct = StatOf(members);
      EXPECT_EQ(local.stats[c].size, members.size());
      EXPECT_LT(RelativeError(local.stats[c].variance, direct.variance), 1e-9);
    }
  }
}

TEST(LocalSubclusters, BadKThrows)
{
  const Dataset ds = Dataset::FromPoints({{0.0}, {1.0}});
  EXPECT_THROW(LocalSubclusters(ds, 3, LocalAlgorithm::KMeans), std::invalid_argument);
  EXPECT_THROW(LocalSubclusters(ds, 0, LocalAlgorithm::KMeans), std::invalid_argument);
}

TEST(LocalSubclusters, Deterministic)
{
  const Dataset ds = GenerateGaussianMixture(gridmine::testing::IrisLikeSpec(3));
  EXPECT_EQ(LocalSubclusters(ds, 7, LocalAlgorithm::KHarmonicMeans),
            LocalSubclusters(ds, 7, LocalAlgorithm::KHarmonicMeans));
}

// ---------------------------------------------------------------- union

TEST(UnionStat, CoincidentSingletons)
{
  const SubclusterStat u = UnionStat(Stat1D(3, 1, 0, 0, 0), Stat1D(3, 1, 0, 0, 1));
  EXPECT_EQ(u.size, 2u);
  EXPECT_EQ(u.variance, 0.0);
}

TEST(UnionStat, SingletonsAtZeroAndTwo)
{
  const SubclusterStat u = UnionStat(Stat1D(0, 1, 0, 0, 0), Stat1D(2, 1, 0, 0, 1));
  EXPECT_DOUBLE_EQ(u.center[0], 1.0);
  EXPECT_DOUBLE_EQ(u.variance, 2.0);
}

TEST(UnionStat, EqualsDirectComputation)
{
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  std::uniform_int_distribution<int> n(1, 30);
  for (int trial = 0; trial < 200; ++trial)
  {
    std::vector<Point> a(static_cast<std::size_t>(n(rng)));
    std::vector<Point> b(static_cast<std::size_t>(n(rng)));
    for (auto* set : {&a, &b})
    {
      for (Point& p : *set)
      {
        p = Point{u(rng), u(rng), u(rng)};
      }
    }
    std::vector<Point> both = a;
    both.insert(both.end(), b.begin(), b.end());
    const SubclusterStat pooled = UnionStat(StatOf(a), StatOf(b));
    const SubclusterStat direct = StatOf(both);
    EXPECT_EQ(pooled.size, direct.size);
    EXPECT_LT(RelativeError(pooled.variance, direct.variance), 1e-9);
    for (std::size_t d = 0; d < 3; ++d)
    {
      EXPECT_LT(RelativeError(pooled.center[d], direct.center[d]), 1e-9);
    }
  }
}

TEST(UnionStat, Associative)
{
  const SubclusterStat a = Stat1D(0.5, 3, 1.25, 0, 0);
  const SubclusterStat b = Stat1D(-2.0, 7, 4.0, 0, 1);
  const SubclusterStat c = Stat1D(9.0, 2, 0.5, 1, 0);
  const SubclusterStat left = UnionStat(UnionStat(a, b), c);
  const SubclusterStat right = UnionStat(a, UnionStat(b, c));
  EXPECT_EQ(left.size, right.size);
  EXPECT_LT(RelativeError(left.variance, right.variance), 1e-9);
  EXPECT_LT(RelativeError(left.center[0], right.center[0]), 1e-9);
}

TEST(UnionStat, DimensionMismatchThrows)
{
  EXPECT_THROW(UnionStat(Stat1D(0, 1, 0, 0, 0), SubclusterStat{{0, 0}, 1, 0, 0, 1}),
               std::invalid_argument);
}

TEST(SubclusterStat, JsonLinesRoundTrip)
{
  const auto stats = IrisSiteStats(5, {5, 7});
  const std::string text = ToJsonLines(stats);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), stats.size());
  EXPECT_EQ(FromJsonLines(text), stats);
}

// ---------------------------------------------------------------- global merge

TEST(GlobalMerge, LimitBelowEveryUnionKeepsSubclusters)
{
  const auto stats = IrisSiteStats(1, {5, 7});
  VarianceConfig cfg;
  cfg.var_limit = 0.0;
  const GlobalLabeling labels = GlobalMerge(stats, cfg);
  EXPECT_EQ(labels.cluster_count, 12);
  EXPECT_TRUE(labels.merge_variances.empty());
}

TEST(GlobalMerge, HugeLimitMergesEverything)
{
  const auto stats = IrisSiteStats(1, {5, 7});
  VarianceConfig cfg;
  cfg.var_limit = 1e12;
  const GlobalLabeling labels = GlobalMerge(stats, cfg);
  EXPECT_EQ(labels.cluster_count, 1);
  EXPECT_EQ(labels.merge_variances.size(), 11u);
}

TEST(GlobalMerge, TwiceHighestVarianceFindsThreeClasses)
{
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
  {
    const auto stats = IrisSiteStats(seed, {5, 7});
    VarianceConfig cfg;
    cfg.var_limit = 2.0 * HighestVariance(stats);
    const GlobalLabeling labels = GlobalMerge(stats, cfg);
    EXPECT_EQ(labels.cluster_count, 3) << "seed " << seed;
  }
}

TEST(GlobalMerge, AcceptedVariancesStayWithinLimitAndGrow)
{
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
  {
    const auto stats = IrisSiteStats(seed, {6, 9, 4});
    VarianceConfig cfg;
    cfg.var_limit = 3.0 * HighestVariance(stats);
    const GlobalLabeling labels = GlobalMerge(stats, cfg);
    for (std::size_t i = 0; i < labels.merge_variances.size(); ++i)
    {
      EXPECT_LE(labels.merge_variances[i], cfg.var_limit);
      if (i > 0)
      {
        EXPECT_GE(labels.merge_variances[i], labels.merge_variances[i - 1] - 1e-9);
      }
    }
    // Dense ids covering every subcluster.
    std::set<int> ids(labels.label_of.begin(), labels.label_of.end());
    EXPECT_EQ(static_cast<int>(ids.size()), labels.cluster_count);
    EXPECT_EQ(*ids.rbegin(), labels.cluster_count - 1);
  }
}

TEST(GlobalMerge, LabelLookupBySiteAndLocalId)
{
  const std::vector<SubclusterStat> stats{Stat1D(0, 1, 0, 0, 0), Stat1D(0.1, 1, 0, 1, 0),
                                          Stat1D(50, 1, 0, 1, 1)};
  VarianceConfig cfg;
  cfg.var_limit = 1.0;
  const GlobalLabeling labels = GlobalMerge(stats, cfg);
  EXPECT_EQ(labels.LabelOf(stats, 0, 0), labels.LabelOf(stats, 1, 0));
  EXPECT_NE(labels.LabelOf(stats, 0, 0), labels.LabelOf(stats, 1, 1));
  EXPECT_THROW(labels.LabelOf(stats, 2, 0), std::out_of_range);
}

TEST(GlobalMerge, EmptyInputThrows)
{
  EXPECT_THROW(GlobalMerge({}, VarianceConfig{}), std::invalid_argument);
}

// ---------------------------------------------------------------- border

TEST(BorderCandidates, SingleMemberClustersGiveNone)
{
  const std::vector<SubclusterStat> stats{Stat1D(0, 1, 0, 0, 0), Stat1D(9, 1, 0, 0, 1)};
  const GlobalLabeling labels{{0, 1}, 2, {}};
  EXPECT_TRUE(BorderCandidates(labels, stats, 0.5).empty());
}

TEST(BorderCandidates, CollinearCentersPickTheFarEnd)
{
  // Centers 0,1,2,3,10 with equal size: pooled center 3.2, farthest is 10.
  std::vector<SubclusterStat> stats;
  for (double x : {0.0, 1.0, 2.0, 3.0, 10.0})
  {
    stats.push_back(Stat1D(x, 4, 0.5, 0, static_cast<int>(stats.size())));
  }
  const GlobalLabeling labels{{0, 0, 0, 0, 0}, 1, {}};
  EXPECT_EQ(BorderCount(5, 0.2), 1u);
  EXPECT_EQ(BorderCandidates(labels, stats, 0.2), (std::vector<std::size_t>{4}));
}

TEST(BorderCandidates, CountsFollowProportionalRule)
{
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 10);
  std::uniform_int_distribution<int> label(0, 3);
  for (int trial = 0; trial < 50; ++trial)
  {
    std::vector<SubclusterStat> stats;
    GlobalLabeling labels;
    labels.cluster_count = 4;
    for (int i = 0; i < 30; ++i)
    {
      stats.push_back(SubclusterStat{{u(rng), u(rng)}, 3, 1.0, 0, i});
      labels.label_of.push_back(i < 4 ? i : label(rng));
    }
    std::vector<std::size_t> members(4);
    for (int l : labels.label_of)
    {
      ++members[static_cast<std::size_t>(l)];
    }
    std::size_t expected = 0;
    for (std::size_t m : members)
    {
      expected += m < 2 ? 0 : static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(m)));
    }
    EXPECT_EQ(BorderCandidates(labels, stats, 0.2).size(), expected);
  }
}

// ---------------------------------------------------------------- perturbation

TEST(Perturb, OptimalLabelingIsAFixedPoint)
{
  const std::vector<SubclusterStat> stats{Stat1D(0, 2, 0.1, 0, 0), Stat1D(1, 2, 0.1, 0, 1),
                                          Stat1D(10, 2, 0.1, 1, 0), Stat1D(11, 2, 0.1, 1, 1)};
  const GlobalLabeling labels{{0, 0, 1, 1}, 2, {}};
  VarianceConfig cfg;
  cfg.border_fraction = 1.0;
  const PerturbationResult result = Perturb(labels, stats, cfg);
  EXPECT_EQ(result.moves, 0u);
  EXPECT_EQ(result.labeling, labels);
}

TEST(Perturb, MovesMisassignedSubclusterLikeExhaustiveSearch)
{
  const std::vector<SubclusterStat> stats{Stat1D(0, 1, 0, 0, 0), Stat1D(1, 1, 0, 0, 1),
                                          Stat1D(4, 1, 0, 0, 2), Stat1D(5, 1, 0, 1, 0),
                                          Stat1D(6, 1, 0, 1, 1)};
  const GlobalLabeling labels{{0, 0, 0, 1, 1}, 2, {}};

  // Best single move by brute force.
  const double start = TotalSse(labels, stats);
  double best = start;
  std::size_t best_index = stats.size();
  for (std::size_t i = 0; i < stats.size(); ++i)
  {
    GlobalLabeling moved = labels;
    moved.label_of[i] = 1 - moved.label_of[i];
    if (std::count(moved.label_of.begin(), moved.label_of.end(), labels.label_of[i]) == 0)
    {
      continue;
    }
    const double sse = TotalSse(moved, stats);
    if (sse < best)
    {
      best = sse;
      best_index = i;
    }
  }
  ASSERT_EQ(best_index, 2u);

  VarianceConfig cfg;
  cfg.border_fraction = 0.34;
  const PerturbationResult result = Perturb(labels, stats, cfg);
  EXPECT_GE(result.moves, 1u);
  EXPECT_EQ(result.labeling.label_of[2], result.labeling.label_of[3]);
  EXPECT_LT(TotalSse(result.labeling, stats), start);
  EXPECT_LE(TotalSse(result.labeling, stats), best + 1e-12);
}

TEST(Perturb, NeverIncreasesSseAndIsIdempotent)
{
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
  {
    const auto stats = IrisSiteStats(seed, {5, 7});
    VarianceConfig cfg;
    cfg.var_limit = 1.5 * HighestVariance(stats);
    const GlobalLabeling merged = GlobalMerge(stats, cfg);
    const PerturbationResult once = Perturb(merged, stats, cfg);
    EXPECT_LE(TotalSse(once.labeling, stats), TotalSse(merged, stats) + 1e-9);
    if (once.rounds < cfg.max_rounds)
    {
      const PerturbationResult twice = Perturb(once.labeling, stats, cfg);
      EXPECT_EQ(twice.moves, 0u);
      EXPECT_EQ(twice.labeling, once.labeling);
    }
  }
}

// ---------------------------------------------------------------- sweep

TEST(Sweep, ZeroAndInfiniteLimits)
{
  const auto stats = IrisSiteStats(2, {5, 7});
  EXPECT_EQ(SweepVarLimit(stats, {0.0}).at(0).cluster_count, 12);
  EXPECT_EQ(SweepVarLimit(stats, {std::numeric_limits<double>::infinity()}).at(0).cluster_count,
            1);
}

TEST(Sweep, CountsAreNonIncreasingWithAThreePlateau)
{
  const auto stats = IrisSiteStats(1, {5, 7});
  std::vector<double> limits;
  for (double limit = 0.01; limit < 1e4; limit *= 1.25)
  {
    limits.push_back(limit);
  }
  const auto rows = SweepVarLimit(stats, limits);
  ASSERT_EQ(rows.size(), limits.size());
  for (std::size_t i = 1; i < rows.size(); ++i)
  {
    EXPECT_LE(rows[i].cluster_count, rows[i - 1].cluster_count);
  }
  EXPECT_EQ(WidestPlateau(rows, stats.size()), 3);
}

TEST(Sweep, BadLimitsThrow)
{
  const auto stats = IrisSiteStats(1, {5, 7});
  EXPECT_THROW(SweepVarLimit(stats, {}), std::invalid_argument);
  EXPECT_THROW(SweepVarLimit(stats, {2.0, 1.0}), std::invalid_argument);
}

// ---------------------------------------------------------------- accounting

TEST(Accounting, ScalarsPerSubcluster)
{
  // Center (4), size and variance for each of 5 subclusters.
  EXPECT_EQ(RawScalarCount(4, 5), 30u);
  EXPECT_EQ(PaperUnitCount(4, 5), 60u);
  EXPECT_LE(RawScalarCount(4, 7), PaperUnitCount(4, 7));
}

}  // namespace
}  // namespace gridmine::variance
