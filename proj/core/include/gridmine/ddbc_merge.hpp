#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridmine/core_data.hpp"
#include "gridmine/dbscan.hpp"
#include "gridmine/topology.hpp"
#include "gridmine/transport.hpp"

namespace gridmine::ddbc
{
enum class EpsAverRule { Mean, Min, Explicit };

EpsAverRule EpsAverRuleFromString(const std::string& name);
std::string ToString(EpsAverRule rule);

struct MergeConfig
{
  /// Disaggregating threshold. Unset means 0.25 * min(E_x, E_y).
  std::optional<double> theta;
  EpsAverRule eps_aver_rule = EpsAverRule::Mean;
  /// Used only with EpsAverRule::Explicit.
  double eps_aver_value = 0.0;
  Metric metric = Metric::Euclidean;

  double ThetaFor(double eps_x, double eps_y) const;
  double EpsAverFor(double eps_x, double eps_y) const;
};

struct Provenance
{
  std::size_t site = 0;
  int cluster = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
  friend auto operator<=>(const Provenance&, const Provenance&) = default;
};

struct MergedCluster
{
  int id = 0;
  std::vector<RepresentativePair> pairs;
  /// Noise points and migrated representatives taken over during merges.
  std::vector<Point> absorbed;
  std::vector<Provenance> provenance;

  friend bool operator==(const MergedCluster&, const MergedCluster&) = default;
};

struct MergedModel
{
  double eps = 0.0;
  int minpts = 1;
  std::vector<MergedCluster> clusters;
  std::vector<Point> noise;

  std::size_t Dimension() const;
  std::size_t ClusterCount() const { return clusters.size(); }

  friend bool operator==(const MergedModel&, const MergedModel&) = default;
};

/// Wraps a site's local model so it can take part in merges.
MergedModel Lift(const LocalDensityModel& local, std::size_t site);

nlohmann::json ToJson(const MergedModel& model);
MergedModel MergedModelFromJson(const nlohmann::json& doc);

struct AbsorbResult
{
  std::vector<Point> absorbed;
  std::vector<Point> remaining;
};

/// A noise point is absorbed iff it lies within eps of some s or c_s.
AbsorbResult AbsorbNoise(const std::vector<RepresentativePair>& reps,
                         const std::vector<Point>& noise, double eps,
                         Metric metric = Metric::Euclidean);

/// True when some endpoint of `a` lies within eps of some endpoint of `b`.
/// Writes the smallest such endpoint distance to `witness` when given.
bool PairsTouch(const RepresentativePair& a, const RepresentativePair& b, double eps,
                Metric metric, double* witness = nullptr);

enum class MergeMode { Direct, Disaggregating };

MergeMode ChooseMode(double eps_x, double eps_y, const MergeConfig& cfg);

/// Merges two models into one. With |E_x - E_y| <= theta noise is absorbed
/// both ways at E = min(E_x, E_y) and clusters touching under that E are
/// unioned transitively. Otherwise the larger-eps model is disaggregated:
/// its representative pairs move one by one into touching clusters of the
/// other model at E_aver.
MergedModel MergePair(const MergedModel& x, const MergedModel& y, const MergeConfig& cfg);
MergedModel MergePair(const LocalDensityModel& x, const LocalDensityModel& y,
                      const MergeConfig& cfg);

struct HierarchicalMergeResult
{
  /// The root model, or the models at `stop_level` when one was requested.
  std::vector<MergedModel> models;
  /// Per internal node: level, node, children, models in, clusters out, bytes in.
  nlohmann::json trace = nlohmann::json::array();
};

/// Leaves hold the local models in site order. Every child model travels to
/// its parent through `transport` as JSON; the parent merges its children
/// left to right.
HierarchicalMergeResult HierarchicalMerge(const std::vector<LocalDensityModel>& models,
                                          const sim::Topology& topology,
                                          const MergeConfig& cfg,
                                          std::optional<std::size_t> stop_level,
                                          sim::Transport& transport);
HierarchicalMergeResult HierarchicalMerge(const std::vector<LocalDensityModel>& models,
                                          const sim::Topology& topology,
                                          const MergeConfig& cfg,
                                          std::optional<std::size_t> stop_level = std::nullopt);

/// Reconstructs membership: each point joins the cluster owning its nearest
/// anchor (representative endpoint or absorbed point) when that anchor lies
/// within the model's eps, otherwise it is noise.
std::vector<int> AssignMembership(const MergedModel& model, const Dataset& dataset,
                                  Metric metric = Metric::Euclidean);

/// Best-match agreement between two labelings of the same points: maximum
/// weight one-to-one matching of clusters on the contingency table plus the
/// noise/noise overlap, divided by the number of points.
double QualityP(const std::vector<int>& distributed, const std::vector<int>& centralized);
double QualityP(const std::map<PointId, int>& distributed,
                const std::map<PointId, int>& centralized);

/// (m - 1) log N / ((mu^2 m - 1) log m). Infinite when mu^2 m == 1.
double Speedup(long long m, double mu, long long n_points);

/// Maximum-weight assignment on a rectangular matrix of nonnegative weights.
/// Returns, per row, the matched column or -1.
std::vector<int> MaxWeightMatching(const std::vector<std::vector<double>>& weights);

}  // namespace gridmine::ddbc
