#include "gridmine/dbscan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gridmine::ddbc
{
namespace
{
// Beyond this many neighbouring cells the grid costs more than a scan.
constexpr std::size_t kMaxGridDimension = 6;

void ValidateParameters(const double eps, const int minpts)
{
  if (!(eps > 0.0) || !std::isfinite(eps))
  {
    throw std::invalid_argument("eps must be a positive finite value");
  }
  if (minpts < 1)
  {
    throw std::invalid_argument("minpts must be at least 1");
  }
}
}  // namespace

std::size_t Labeling::NoiseCount() const
{
  return static_cast<std::size_t>(std::count(cluster_of.begin(), cluster_of.end(), kNoise));
}

NeighborIndex::NeighborIndex(const Dataset& dataset, const double eps, const Metric metric)
    : dataset_(dataset),
      eps_(eps),
      // Slightly enlarged cells keep every eps-neighbour within one cell step
      // even when the division rounds up.
      cell_size_(eps * (1.0 + 1e-9)),
      metric_(metric)
{
  brute_force_ = dataset.Dimension() > kMaxGridDimension;
  if (brute_force_)
  {
    return;
  }
  for (std::size_t i = 0; i < dataset.Size(); ++i)
  {
    cells_[CellOf(dataset.At(i))].push_back(i);
  }
}

NeighborIndex::CellKey NeighborIndex::CellOf(const Point& point) const
{
  CellKey key(point.Dimension());
  for (std::size_t i = 0; i < point.Dimension(); ++i)
  {
    key[i] = static_cast<long long>(std::floor(point[i] / cell_size_));
  }
  return key;
}

std::vector<std::size_t> NeighborIndex::Neighbors(const std::size_t position) const
{
  return NeighborsOf(dataset_.At(position));
}

std::vector<std::size_t> NeighborIndex::NeighborsOf(const Point& query) const
{
  std::vector<std::size_t> out;
  if (brute_force_)
  {
    for (std::size_t i = 0; i < dataset_.Size(); ++i)
    {
      if (Distance(query, dataset_.At(i), metric_) <= eps_)
      {
        out.push_back(i);
      }
    }
    return out;
  }

  const CellKey base = CellOf(query);
  const std::size_t dimension = base.size();
  CellKey probe = base;
  std::vector<int> offset(dimension, -1);
  while (true)
  {
    for (std::size_t i = 0; i < dimension; ++i)
    {
      probe[i] = base[i] + offset[i];
    }
    const auto it = cells_.find(probe);
    if (it != cells_.end())
    {
      for (const std::size_t candidate : it->second)
      {
        if (Distance(query, dataset_.At(candidate), metric_) <= eps_)
        {
          out.push_back(candidate);
        }
      }
    }
    std::size_t digit = 0;
    while (digit < dimension && offset[digit] == 1)
    {
      offset[digit] = -1;
      ++digit;
    }
    if (digit == dimension)
    {
      break;
    }
    ++offset[digit];
  }
  std::sort(out.begin(), out.end());
  return out;
}

Labeling Dbscan(const Dataset& dataset, const double eps, const int minpts, const Metric metric)
{
  ValidateParameters(eps, minpts);
  Labeling labeling;
  const std::size_t n = dataset.Size();
  labeling.cluster_of.assign(n, kNoise);
  labeling.core.assign(n, false);
  if (n == 0)
  {
    return labeling;
  }

  const NeighborIndex index(dataset, eps, metric);
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    neighbors[i] = index.Neighbors(i);
    labeling.core[i] = neighbors[i].size() >= static_cast<std::size_t>(minpts);
  }

  // Core points: connected components of the "within eps" relation.
  int next_cluster = 0;
  std::deque<std::size_t> frontier;
  for (std::size_t seed = 0; seed < n; ++seed)
  {
    if (!labeling.core[seed] || labeling.cluster_of[seed] != kNoise)
    {
      continue;
    }
    const int cluster = next_cluster++;
    labeling.cluster_of[seed] = cluster;
    frontier.push_back(seed);
    while (!frontier.empty())
    {
      const std::size_t current = frontier.front();
      frontier.pop_front();
      for (const std::size_t neighbor : neighbors[current])
      {
        if (labeling.core[neighbor] && labeling.cluster_of[neighbor] == kNoise)
        {
          labeling.cluster_of[neighbor] = cluster;
          frontier.push_back(neighbor);
        }
      }
    }
  }
  labeling.cluster_count = next_cluster;

  for (std::size_t i = 0; i < n; ++i)
  {
    if (labeling.core[i])
    {
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_core = n;
    for (const std::size_t neighbor : neighbors[i])
    {
      if (!labeling.core[neighbor])
      {
        continue;
      }
      const double d = Distance(dataset.At(i), dataset.At(neighbor), metric);
      if (d < best || (d == best && dataset.IdAt(neighbor) < dataset.IdAt(best_core)))
      {
        best = d;
        best_core = neighbor;
      }
    }
    if (best_core != n)
    {
      labeling.cluster_of[i] = labeling.cluster_of[best_core];
    }
  }
  return labeling;
}

std::vector<ClusterRepresentatives> AbsoluteCoreSet(const Labeling& labeling,
                                                    const Dataset& dataset, const double eps,
                                                    const Metric metric)
{
  if (labeling.cluster_of.size() != dataset.Size() || labeling.core.size() != dataset.Size())
  {
    throw std::invalid_argument("labeling does not match the dataset");
  }
  const std::size_t n = dataset.Size();
  std::vector<std::vector<std::size_t>> cores(static_cast<std::size_t>(labeling.cluster_count));
  for (std::size_t i = 0; i < n; ++i)
  {
    if (labeling.core[i])
    {
      if (labeling.cluster_of[i] == kNoise)
      {
        throw std::invalid_argument("core point labelled as noise");
      }
      cores.at(static_cast<std::size_t>(labeling.cluster_of[i])).push_back(i);
    }
  }

  const NeighborIndex index(dataset, eps, metric);
  std::vector<bool> selected(n, false);
  std::vector<ClusterRepresentatives> result;
  for (std::size_t cluster = 0; cluster < cores.size(); ++cluster)
  {
    auto& members = cores[cluster];
    if (members.empty())
    {
      throw std::invalid_argument("cluster " + std::to_string(cluster) + " has no core points");
    }
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return dataset.IdAt(a) < dataset.IdAt(b);
    });

    ClusterRepresentatives reps;
    reps.id = static_cast<int>(cluster);
    for (const std::size_t core : members)
    {
      const auto neighborhood = index.Neighbors(core);
      const bool covered = std::any_of(neighborhood.begin(), neighborhood.end(),
                                       [&](std::size_t p) { return selected[p]; });
      if (covered)
      {
        continue;
      }
      selected[core] = true;

      std::size_t furthest = core;
      double furthest_distance = 0.0;
      for (const std::size_t neighbor : neighborhood)
      {
        if (!labeling.core[neighbor] || neighbor == core)
        {
          continue;
        }
        const double d = Distance(dataset.At(core), dataset.At(neighbor), metric);
        if (d > furthest_distance ||
            (d == furthest_distance && dataset.IdAt(neighbor) < dataset.IdAt(furthest)))
        {
          furthest_distance = d;
          furthest = neighbor;
        }
      }
      reps.pairs.push_back(RepresentativePair{dataset.IdAt(core), dataset.IdAt(furthest),
                                              dataset.At(core), dataset.At(furthest)});
    }
    result.push_back(std::move(reps));
  }
  return result;
}

std::size_t LocalDensityModel::RepresentativeCount() const
{
  std::size_t total = 0;
  for (const auto& cluster : clusters)
  {
    total += cluster.pairs.size();
  }
  return total;
}

std::size_t LocalDensityModel::Dimension() const
{
  for (const auto& cluster : clusters)
  {
    if (!cluster.pairs.empty())
    {
      return cluster.pairs.front().s.Dimension();
    }
  }
  return noise.empty() ? 0 : noise.front().Dimension();
}

LocalDensityModel BuildLocalModel(const Dataset& dataset, const double eps, const int minpts,
                                  const Metric metric)
{
  const Labeling labeling = Dbscan(dataset, eps, minpts, metric);
  LocalDensityModel model;
  model.eps = eps;
  model.minpts = minpts;
  model.clusters = AbsoluteCoreSet(labeling, dataset, eps, metric);
  for (std::size_t i = 0; i < dataset.Size(); ++i)
  {
    if (labeling.cluster_of[i] == kNoise)
    {
      model.noise.push_back(dataset.At(i));
    }
  }
  return model;
}

nlohmann::json ToJson(const LocalDensityModel& model)
{
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& cluster : model.clusters)
  {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& pair : cluster.pairs)
    {
      pairs.push_back({{"s", pair.s.coords}, {"c", pair.c.coords}});
    }
    clusters.push_back({{"id", cluster.id}, {"pairs", std::move(pairs)}});
  }
  nlohmann::json noise = nlohmann::json::array();
  for (const auto& point : model.noise)
  {
    noise.push_back(point.coords);
  }
  return {{"eps", model.eps},
          {"minpts", model.minpts},
          {"clusters", std::move(clusters)},
          {"noise", std::move(noise)}};
}

LocalDensityModel LocalModelFromJson(const nlohmann::json& doc)
{
  LocalDensityModel model;
  model.eps = doc.at("eps").get<double>();
  model.minpts = doc.at("minpts").get<int>();
  for (const auto& entry : doc.at("clusters"))
  {
    ClusterRepresentatives cluster;
    cluster.id = entry.at("id").get<int>();
    for (const auto& pair : entry.at("pairs"))
    {
      RepresentativePair rep;
      rep.s = Point(pair.at("s").get<std::vector<double>>());
      rep.c = Point(pair.at("c").get<std::vector<double>>());
      cluster.pairs.push_back(std::move(rep));
    }
    model.clusters.push_back(std::move(cluster));
  }
  for (const auto& entry : doc.at("noise"))
  {
    model.noise.emplace_back(entry.get<std::vector<double>>());
  }
  return model;
}

}  // namespace gridmine::ddbc
