#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gridmine/core_data.hpp"

namespace gridmine::ddbc
{
inline constexpr int kNoise = -1;

/// Cluster assignment per dataset position; `kNoise` marks noise.
struct Labeling
{
  std::vector<int> cluster_of;
  std::vector<bool> core;
  int cluster_count = 0;

  std::size_t NoiseCount() const;
};

/// Uniform grid over the points with cell side eps. Neighbourhoods are
/// inclusive (distance <= eps) and contain the query point itself.
class NeighborIndex
{
public:
  NeighborIndex(const Dataset& dataset, double eps, Metric metric);

  std::vector<std::size_t> Neighbors(std::size_t position) const;
  std::vector<std::size_t> NeighborsOf(const Point& query) const;

private:
  using CellKey = std::vector<long long>;

  CellKey CellOf(const Point& point) const;

  const Dataset& dataset_;
  double eps_;
  double cell_size_;
  Metric metric_;
  bool brute_force_ = false;
  std::map<CellKey, std::vector<std::size_t>> cells_;
};

/// Core iff |N_eps(p)| >= minpts, counting p itself. Border points join the
/// cluster of their nearest core point (ties by lower point id), which makes
/// the partition independent of input order.
Labeling Dbscan(const Dataset& dataset, double eps, int minpts,
                Metric metric = Metric::Euclidean);

/// An absolute core point `s` with the furthest core point `c` of its own
/// cluster inside N_eps(s). `c` may equal `s` when `s` has no other core
/// neighbour.
struct RepresentativePair
{
  PointId s_id = kUnknownPointId;
  PointId c_id = kUnknownPointId;
  Point s;
  Point c;

  friend bool operator==(const RepresentativePair&, const RepresentativePair&) = default;
};

struct ClusterRepresentatives
{
  int id = 0;
  std::vector<RepresentativePair> pairs;

  friend bool operator==(const ClusterRepresentatives&, const ClusterRepresentatives&) = default;
};

/// Greedy selection in ascending point-id order: a core becomes absolute
/// unless an already selected absolute core lies within eps. Selected cores
/// are pairwise more than eps apart and every core is within eps of one.
std::vector<ClusterRepresentatives> AbsoluteCoreSet(const Labeling& labeling,
                                                    const Dataset& dataset, double eps,
                                                    Metric metric = Metric::Euclidean);

struct LocalDensityModel
{
  double eps = 0.0;
  int minpts = 1;
  std::vector<ClusterRepresentatives> clusters;
  std::vector<Point> noise;

  std::size_t RepresentativeCount() const;
  std::size_t Dimension() const;

  friend bool operator==(const LocalDensityModel&, const LocalDensityModel&) = default;
};

LocalDensityModel BuildLocalModel(const Dataset& dataset, double eps, int minpts,
                                  Metric metric = Metric::Euclidean);

// Wire form: {eps, minpts, clusters:[{id, pairs:[{s, c}]}], noise:[[...]]}.
// Point ids are site-local bookkeeping and are not shipped.
nlohmann::json ToJson(const LocalDensityModel& model);
LocalDensityModel LocalModelFromJson(const nlohmann::json& doc);

}  // namespace gridmine::ddbc
