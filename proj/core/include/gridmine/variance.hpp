#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gridmine/core_data.hpp"

namespace gridmine::variance
{
enum class LocalAlgorithm { KMeans, KHarmonicMeans };

LocalAlgorithm LocalAlgorithmFromString(const std::string& name);
std::string ToString(LocalAlgorithm algo);

/// Sufficient statistics of one subcluster. `variance` is the sum of squared
/// distances of the members to `center`.
struct SubclusterStat
{
  Point center;
  std::size_t size = 0;
  double variance = 0.0;
  std::size_t site = 0;
  int local_id = 0;

  friend bool operator==(const SubclusterStat&, const SubclusterStat&) = default;
};

nlohmann::json ToJson(const SubclusterStat& stat);
SubclusterStat SubclusterStatFromJson(const nlohmann::json& doc);

/// One JSON object per line.
std::string ToJsonLines(const std::vector<SubclusterStat>& stats);
std::vector<SubclusterStat> FromJsonLines(const std::string& text);

/// Exact statistic of a concrete point set.
SubclusterStat StatOf(const std::vector<Point>& points, std::size_t site = 0, int local_id = 0);

/// Pooled statistic of the union of two disjoint point sets. Site and
/// local id are taken from `a`.
SubclusterStat UnionStat(const SubclusterStat& a, const SubclusterStat& b);

struct LocalClustering
{
  std::vector<SubclusterStat> stats;
  /// Subcluster index per dataset position.
  std::vector<int> assignment;
  std::size_t iterations = 0;
};

struct LocalOptions
{
  std::size_t max_iterations = 100;
  /// Exponent of the k-harmonic-means performance function.
  double harmonic_p = 3.5;
  std::uint64_t seed = 42;
};

/// Over-fine local clustering into exactly k nonempty subclusters. Centers
/// start from k-means++ seeding; the final partition is the hard nearest
/// center assignment with empty clusters refilled from the worst-fitting
/// points.
LocalClustering ClusterLocally(const Dataset& dataset, std::size_t k, LocalAlgorithm algo,
                               std::size_t site, const LocalOptions& options = {});

std::vector<SubclusterStat> LocalSubclusters(const Dataset& dataset, std::size_t k,
                                             LocalAlgorithm algo, std::size_t site = 0,
                                             const LocalOptions& options = {});

/// Quantity compared with var_limit when two global clusters are united.
enum class MergeCriterion
{
  /// Growth of the summed squared error caused by the union.
  SseIncrease,
  /// Summed squared error of the union itself.
  UnionSse,
  /// Mean squared distance to the union's center.
  UnionMeanSquared,
};

MergeCriterion MergeCriterionFromString(const std::string& name);
std::string ToString(MergeCriterion criterion);

/// The criterion value of uniting `a` and `b`.
double MergeCost(const SubclusterStat& a, const SubclusterStat& b, MergeCriterion criterion);

/// The criterion's notion of the variance of a single subcluster.
double IndividualVariance(const SubclusterStat& stat, MergeCriterion criterion);

struct VarianceConfig
{
  double var_limit = 0.0;
  MergeCriterion criterion = MergeCriterion::SseIncrease;
  /// Per global cluster b = ceil(border_fraction * member_count).
  double border_fraction = 0.2;
  std::size_t max_rounds = 10;
};

/// Global cluster per subcluster, aligned with the stats vector.
struct GlobalLabeling
{
  std::vector<int> label_of;
  int cluster_count = 0;
  /// Criterion values of the executed merges, in execution order.
  std::vector<double> merge_variances;

  int LabelOf(const std::vector<SubclusterStat>& stats, std::size_t site, int local_id) const;

  friend bool operator==(const GlobalLabeling&, const GlobalLabeling&) = default;
};

/// Greedy agglomeration: merge the pair of global clusters with the smallest
/// criterion value while that value stays within var_limit. Ties go to the
/// lexicographically smaller (site, local_id) keys.
GlobalLabeling GlobalMerge(const std::vector<SubclusterStat>& stats, const VarianceConfig& cfg);

/// Pooled statistic of every global cluster, indexed by global id.
std::vector<SubclusterStat> GlobalStats(const GlobalLabeling& labeling,
                                        const std::vector<SubclusterStat>& stats);

double TotalSse(const GlobalLabeling& labeling, const std::vector<SubclusterStat>& stats);

std::size_t BorderCount(std::size_t member_count, double border_fraction);

/// Indexes (into stats) of the b members farthest from their global center,
/// per global cluster in id order, farthest first.
std::vector<std::size_t> BorderCandidates(const GlobalLabeling& labeling,
                                          const std::vector<SubclusterStat>& stats,
                                          double border_fraction);

struct PerturbationResult
{
  GlobalLabeling labeling;
  std::size_t moves = 0;
  std::size_t rounds = 0;
};

/// Moves border candidates to a neighbouring global cluster, nearest
/// neighbour first, whenever that strictly lowers the total SSE.
PerturbationResult Perturb(const GlobalLabeling& labeling,
                           const std::vector<SubclusterStat>& stats, const VarianceConfig& cfg);

struct SweepRow
{
  double limit = 0.0;
  int cluster_count = 0;
  double total_sse = 0.0;
};

std::vector<SweepRow> SweepVarLimit(const std::vector<SubclusterStat>& stats,
                                    const std::vector<double>& limits,
                                    MergeCriterion criterion = MergeCriterion::SseIncrease);

/// Cluster count whose run of consecutive rows is longest, ignoring the
/// trivial counts 1 and |stats|. Returns 0 when no such row exists.
int WidestPlateau(const std::vector<SweepRow>& rows, std::size_t stat_count);

/// Scalars per subcluster as shipped: center (d), size and variance.
std::uint64_t RawScalarCount(std::size_t dimension, std::size_t subclusters);
/// The same shipment in the 3d-per-subcluster envelope.
std::uint64_t PaperUnitCount(std::size_t dimension, std::size_t subclusters);

double HighestVariance(const std::vector<SubclusterStat>& stats,
                       MergeCriterion criterion = MergeCriterion::SseIncrease);

}  // namespace gridmine::variance
