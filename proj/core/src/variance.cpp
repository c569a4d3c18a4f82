#include "gridmine/variance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

namespace gridmine::variance
{
namespace
{
using Key = std::pair<std::size_t, int>;

Key KeyOf(const SubclusterStat& stat)
{
  return {stat.site, stat.local_id};
}

std::size_t NearestCenter(const Point& point, const std::vector<Point>& centers)
{
  std::size_t best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.size(); ++j)
  {
    const double d = SquaredEuclidean(point, centers[j]);
    if (d < best_distance)
    {
      best_distance = d;
      best = j;
    }
  }
  return best;
}

std::vector<Point> SeedCenters(const Dataset& dataset, const std::size_t k, std::mt19937_64& rng)
{
  const std::size_t n = dataset.Size();
  std::vector<Point> centers;
  std::vector<bool> chosen(n, false);
  std::uniform_int_distribution<std::size_t> uniform(0, n - 1);
  std::size_t first = uniform(rng);
  centers.push_back(dataset.At(first));
  chosen[first] = true;

  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    nearest[i] = SquaredEuclidean(dataset.At(i), centers.front());
  }
  while (centers.size() < k)
  {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0)
    {
      std::uniform_real_distribution<double> draw(0.0, total);
      double target = draw(rng);
      for (std::size_t i = 0; i < n; ++i)
      {
        if (nearest[i] <= 0.0)
        {
          continue;
        }
        pick = i;
        target -= nearest[i];
        if (target <= 0.0)
        {
          break;
        }
      }
    }
    else
    {
      // Only duplicates of existing centers remain.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
      {
        if (!chosen[i])
        {
          free.push_back(i);
        }
      }
      std::uniform_int_distribution<std::size_t> among(0, free.size() - 1);
      pick = free[among(rng)];
    }
    chosen[pick] = true;
    centers.push_back(dataset.At(pick));
    for (std::size_t i = 0; i < n; ++i)
    {
      nearest[i] = std::min(nearest[i], SquaredEuclidean(dataset.At(i), centers.back()));
    }
  }
  return centers;
}

std::size_t RunKMeans(const Dataset& dataset, std::vector<Point>& centers,
                      const std::size_t max_iterations)
{
  const std::size_t n = dataset.Size();
  const std::size_t d = dataset.Dimension();
  std::vector<std::size_t> assignment(n, centers.size());
  std::size_t iteration = 0;
  for (; iteration < max_iterations; ++iteration)
  {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i)
    {
      const std::size_t j = NearestCenter(dataset.At(i), centers);
      changed = changed || j != assignment[i];
      assignment[i] = j;
    }
    if (!changed)
    {
      break;
    }
    std::vector<Point> sums(centers.size(), Point(std::vector<double>(d, 0.0)));
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i)
    {
      for (std::size_t c = 0; c < d; ++c)
      {
        sums[assignment[i]][c] += dataset.At(i)[c];
      }
      ++counts[assignment[i]];
    }
    for (std::size_t j = 0; j < centers.size(); ++j)
    {
      if (counts[j] == 0)
      {
        continue;
      }
      for (std::size_t c = 0; c < d; ++c)
      {
        centers[j][c] = sums[j][c] / static_cast<double>(counts[j]);
      }
    }
  }
  return iteration;
}

std::size_t RunKHarmonicMeans(const Dataset& dataset, std::vector<Point>& centers,
                              const std::size_t max_iterations, const double p)
{
  const std::size_t n = dataset.Size();
  const std::size_t d = dataset.Dimension();
  const std::size_t k = centers.size();
  std::vector<double> dist(k);
  std::size_t iteration = 0;
  for (; iteration < max_iterations; ++iteration)
  {
    std::vector<Point> sums(k, Point(std::vector<double>(d, 0.0)));
    std::vector<double> weights(k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
    {
      double smallest = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j)
      {
        dist[j] = std::max(std::sqrt(SquaredEuclidean(dataset.At(i), centers[j])), 1e-12);
        smallest = std::min(smallest, dist[j]);
      }
      // Ratios to the smallest distance keep the powers in range.
      double harmonic = 0.0;
      for (std::size_t j = 0; j < k; ++j)
      {
        harmonic += std::pow(smallest / dist[j], p);
      }
      const double scale = std::pow(smallest, p - 2.0) / (harmonic * harmonic);
      for (std::size_t j = 0; j < k; ++j)
      {
        const double q = scale * std::pow(smallest / dist[j], p + 2.0);
        weights[j] += q;
        for (std::size_t c = 0; c < d; ++c)
        {
          sums[j][c] += q * dataset.At(i)[c];
        }
      }
    }
    double shift = 0.0;
    for (std::size_t j = 0; j < k; ++j)
    {
      if (!(weights[j] > 0.0))
      {
        continue;
      }
      Point next{std::vector<double>(d)};
      for (std::size_t c = 0; c < d; ++c)
      {
        next[c] = sums[j][c] / weights[j];
      }
      shift = std::max(shift, SquaredEuclidean(next, centers[j]));
      centers[j] = std::move(next);
    }
    if (shift < 1e-24)
    {
      ++iteration;
      break;
    }
  }
  return iteration;
}

// Per-global-cluster member lists, indexed by global id.
std::vector<std::vector<std::size_t>> MembersOf(const GlobalLabeling& labeling)
{
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(labeling.cluster_count));
  for (std::size_t i = 0; i < labeling.label_of.size(); ++i)
  {
    members.at(static_cast<std::size_t>(labeling.label_of[i])).push_back(i);
  }
  return members;
}

SubclusterStat Pool(const std::vector<std::size_t>& members,
                    const std::vector<SubclusterStat>& stats,
                    const std::size_t skip = std::numeric_limits<std::size_t>::max())
{
  SubclusterStat pooled;
  bool first = true;
  for (const std::size_t m : members)
  {
    if (m == skip)
    {
      continue;
    }
    pooled = first ? stats[m] : UnionStat(pooled, stats[m]);
    first = false;
  }
  return pooled;
}

void CheckLabeling(const GlobalLabeling& labeling, const std::vector<SubclusterStat>& stats)
{
  if (labeling.label_of.size() != stats.size())
  {
    throw std::invalid_argument("labeling does not cover the subclusters");
  }
  for (const int label : labeling.label_of)
  {
    if (label < 0 || label >= labeling.cluster_count)
    {
      throw std::invalid_argument("global label out of range");
    }
  }
}

}  // namespace

MergeCriterion MergeCriterionFromString(const std::string& name)
{
  if (name == "sse_increase")
  {
    return MergeCriterion::SseIncrease;
  }
  if (name == "union_sse")
  {
    return MergeCriterion::UnionSse;
  }
  if (name == "union_mean_squared")
  {
    return MergeCriterion::UnionMeanSquared;
  }
  throw std::invalid_argument("unknown merge criterion: " + name);
}

std::string ToString(const MergeCriterion criterion)
{
  switch (criterion)
  {
    case MergeCriterion::SseIncrease:
      return "sse_increase";
    case MergeCriterion::UnionSse:
      return "union_sse";
    case MergeCriterion::UnionMeanSquared:
      return "union_mean_squared";
  }
  return "unknown";
}

double MergeCost(const SubclusterStat& a, const SubclusterStat& b, const MergeCriterion criterion)
{
  const SubclusterStat joined = UnionStat(a, b);
  switch (criterion)
  {
    case MergeCriterion::SseIncrease:
      return std::max(0.0, joined.variance - a.variance - b.variance);
    case MergeCriterion::UnionSse:
      return joined.variance;
    case MergeCriterion::UnionMeanSquared:
      return joined.variance / static_cast<double>(joined.size);
  }
  return joined.variance;
}

double IndividualVariance(const SubclusterStat& stat, const MergeCriterion criterion)
{
  if (criterion == MergeCriterion::UnionMeanSquared)
  {
    return stat.size == 0 ? 0.0 : stat.variance / static_cast<double>(stat.size);
  }
  return stat.variance;
}

LocalAlgorithm LocalAlgorithmFromString(const std::string& name)
{
  if (name == "kmeans" || name == "k-means")
  {
    return LocalAlgorithm::KMeans;
  }
  if (name == "kharmonic" || name == "k-harmonic-means" || name == "khm")
  {
    return LocalAlgorithm::KHarmonicMeans;
  }
  throw std::invalid_argument("unknown local clustering algorithm: " + name);
}

std::string ToString(const LocalAlgorithm algo)
{
  return algo == LocalAlgorithm::KMeans ? "kmeans" : "kharmonic";
}

nlohmann::json ToJson(const SubclusterStat& stat)
{
  return {{"site", stat.site},
          {"local_id", stat.local_id},
          {"size", stat.size},
          {"center", stat.center.coords},
          {"variance", stat.variance}};
}

SubclusterStat SubclusterStatFromJson(const nlohmann::json& doc)
{
  SubclusterStat stat;
  stat.site = doc.at("site").get<std::size_t>();
  stat.local_id = doc.at("local_id").get<int>();
  stat.size = doc.at("size").get<std::size_t>();
  stat.center = Point(doc.at("center").get<std::vector<double>>());
  stat.variance = doc.at("variance").get<double>();
  if (stat.size == 0 || stat.variance < 0.0)
  {
    throw std::invalid_argument("subcluster stat needs size >= 1 and variance >= 0");
  }
  return stat;
}

std::string ToJsonLines(const std::vector<SubclusterStat>& stats)
{
  std::string out;
  for (const auto& stat : stats)
  {
    out += ToJson(stat).dump();
    out += '\n';
  }
  return out;
}

std::vector<SubclusterStat> FromJsonLines(const std::string& text)
{
  std::vector<SubclusterStat> stats;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
  {
    if (!line.empty())
    {
      stats.push_back(SubclusterStatFromJson(nlohmann::json::parse(line)));
    }
  }
  return stats;
}

SubclusterStat StatOf(const std::vector<Point>& points, const std::size_t site, const int local_id)
{
  if (points.empty())
  {
    throw std::invalid_argument("cannot summarize an empty point set");
  }
  const std::size_t d = points.front().Dimension();
  SubclusterStat stat;
  stat.site = site;
  stat.local_id = local_id;
  stat.size = points.size();
  stat.center = Point(std::vector<double>(d, 0.0));
  for (const auto& p : points)
  {
    if (p.Dimension() != d)
    {
      throw std::invalid_argument("points of mixed dimension");
    }
    for (std::size_t c = 0; c < d; ++c)
    {
      stat.center[c] += p[c];
    }
  }
  for (std::size_t c = 0; c < d; ++c)
  {
    stat.center[c] /= static_cast<double>(points.size());
  }
  for (const auto& p : points)
  {
    stat.variance += SquaredEuclidean(p, stat.center);
  }
  if (points.size() == 1)
  {
    stat.variance = 0.0;
  }
  return stat;
}

SubclusterStat UnionStat(const SubclusterStat& a, const SubclusterStat& b)
{
  if (a.size == 0)
  {
    return b;
  }
  if (b.size == 0)
  {
    return a;
  }
  if (a.center.Dimension() != b.center.Dimension())
  {
    throw std::invalid_argument("cannot pool subclusters of different dimension");
  }
  const double na = static_cast<double>(a.size);
  const double nb = static_cast<double>(b.size);
  const double n = na + nb;
  SubclusterStat out;
  out.site = a.site;
  out.local_id = a.local_id;
  out.size = a.size + b.size;
  out.center = Point(std::vector<double>(a.center.Dimension()));
  for (std::size_t c = 0; c < a.center.Dimension(); ++c)
  {
    out.center[c] = (na * a.center[c] + nb * b.center[c]) / n;
  }
  out.variance = a.variance + b.variance + (na * nb / n) * SquaredEuclidean(a.center, b.center);
  return out;
}

LocalClustering ClusterLocally(const Dataset& dataset, const std::size_t k,
                               const LocalAlgorithm algo, const std::size_t site,
                               const LocalOptions& options)
{
  if (k < 1)
  {
    throw std::invalid_argument("k must be at least 1");
  }
  if (k > dataset.Size())
  {
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the " +
                                std::to_string(dataset.Size()) + " points of site " +
                                std::to_string(site));
  }
  std::mt19937_64 rng(options.seed + 0x9E3779B97F4A7C15ULL * (site + 1));
  std::vector<Point> centers = SeedCenters(dataset, k, rng);

  LocalClustering result;
  result.iterations = algo == LocalAlgorithm::KMeans
                          ? RunKMeans(dataset, centers, options.max_iterations)
                          : RunKHarmonicMeans(dataset, centers, options.max_iterations,
                                              options.harmonic_p);

  const std::size_t n = dataset.Size();
  result.assignment.assign(n, 0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i)
  {
    const std::size_t j = NearestCenter(dataset.At(i), centers);
    result.assignment[i] = static_cast<int>(j);
    ++counts[j];
  }
  for (std::size_t empty = 0; empty < k; ++empty)
  {
    if (counts[empty] != 0)
    {
      continue;
    }
    std::size_t worst = n;
    double worst_distance = -1.0;
    for (std::size_t i = 0; i < n; ++i)
    {
      const auto owner = static_cast<std::size_t>(result.assignment[i]);
      if (counts[owner] < 2)
      {
        continue;
      }
      const double dd = SquaredEuclidean(dataset.At(i), centers[owner]);
      if (dd > worst_distance)
      {
        worst_distance = dd;
        worst = i;
      }
    }
    --counts[static_cast<std::size_t>(result.assignment[worst])];
    result.assignment[worst] = static_cast<int>(empty);
    counts[empty] = 1;
    centers[empty] = dataset.At(worst);
  }

  std::vector<std::vector<Point>> members(k);
  for (std::size_t i = 0; i < n; ++i)
  {
    members[static_cast<std::size_t>(result.assignment[i])].push_back(dataset.At(i));
  }
  for (std::size_t j = 0; j < k; ++j)
  {
    result.stats.push_back(StatOf(members[j], site, static_cast<int>(j)));
  }
  return result;
}

std::vector<SubclusterStat> LocalSubclusters(const Dataset& dataset, const std::size_t k,
                                             const LocalAlgorithm algo, const std::size_t site,
                                             const LocalOptions& options)
{
  return ClusterLocally(dataset, k, algo, site, options).stats;
}

int GlobalLabeling::LabelOf(const std::vector<SubclusterStat>& stats, const std::size_t site,
                            const int local_id) const
{
  for (std::size_t i = 0; i < stats.size() && i < label_of.size(); ++i)
  {
    if (stats[i].site == site && stats[i].local_id == local_id)
    {
      return label_of[i];
    }
  }
  throw std::out_of_range("no subcluster " + std::to_string(local_id) + " at site " +
                          std::to_string(site));
}

GlobalLabeling GlobalMerge(const std::vector<SubclusterStat>& stats, const VarianceConfig& cfg)
{
  if (stats.empty())
  {
    throw std::invalid_argument("global merge needs at least one subcluster");
  }
  if (!(cfg.var_limit >= 0.0))
  {
    throw std::invalid_argument("var_limit must be nonnegative");
  }
  const std::size_t count = stats.size();
  struct Group
  {
    SubclusterStat stat;
    Key key;
    std::size_t version = 0;
    bool alive = true;
  };
  std::vector<Group> groups;
  for (const auto& stat : stats)
  {
    groups.push_back(Group{stat, KeyOf(stat)});
  }
  std::vector<std::size_t> parent(count);
  std::iota(parent.begin(), parent.end(), 0);

  struct Candidate
  {
    double variance;
    Key low;
    Key high;
    std::size_t a;
    std::size_t b;
    std::size_t version_a;
    std::size_t version_b;
  };
  auto worse = [](const Candidate& x, const Candidate& y) {
    return std::tie(x.variance, x.low, x.high) > std::tie(y.variance, y.low, y.high);
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> queue(worse);
  auto push = [&](std::size_t a, std::size_t b) {
    const double v = MergeCost(groups[a].stat, groups[b].stat, cfg.criterion);
    if (v > cfg.var_limit)
    {
      return;
    }
    const Key ka = groups[a].key;
    const Key kb = groups[b].key;
    queue.push(Candidate{v, std::min(ka, kb), std::max(ka, kb), a, b, groups[a].version,
                         groups[b].version});
  };
  for (std::size_t a = 0; a < count; ++a)
  {
    for (std::size_t b = a + 1; b < count; ++b)
    {
      push(a, b);
    }
  }

  GlobalLabeling labeling;
  while (!queue.empty())
  {
    const Candidate top = queue.top();
    queue.pop();
    Group& a = groups[top.a];
    Group& b = groups[top.b];
    if (!a.alive || !b.alive || a.version != top.version_a || b.version != top.version_b)
    {
      continue;
    }
    a.stat = UnionStat(a.stat, b.stat);
    a.key = std::min(a.key, b.key);
    ++a.version;
    b.alive = false;
    parent[top.b] = top.a;
    labeling.merge_variances.push_back(top.variance);
    for (std::size_t other = 0; other < count; ++other)
    {
      if (other != top.a && groups[other].alive)
      {
        push(std::min(other, top.a), std::max(other, top.a));
      }
    }
  }

  auto root = [&](std::size_t v) {
    while (parent[v] != v)
    {
      v = parent[v];
    }
    return v;
  };
  std::map<std::size_t, int> label_of_root;
  labeling.label_of.resize(count);
  for (std::size_t i = 0; i < count; ++i)
  {
    const auto [it, inserted] =
        label_of_root.emplace(root(i), static_cast<int>(label_of_root.size()));
    labeling.label_of[i] = it->second;
  }
  labeling.cluster_count = static_cast<int>(label_of_root.size());
  return labeling;
}

std::vector<SubclusterStat> GlobalStats(const GlobalLabeling& labeling,
                                        const std::vector<SubclusterStat>& stats)
{
  CheckLabeling(labeling, stats);
  std::vector<SubclusterStat> out;
  for (const auto& members : MembersOf(labeling))
  {
    out.push_back(Pool(members, stats));
  }
  return out;
}

double TotalSse(const GlobalLabeling& labeling, const std::vector<SubclusterStat>& stats)
{
  double total = 0.0;
  for (const auto& stat : GlobalStats(labeling, stats))
  {
    total += stat.variance;
  }
  return total;
}

std::size_t BorderCount(const std::size_t member_count, const double border_fraction)
{
  if (member_count < 2)
  {
    return 0;
  }
  const auto b = static_cast<std::size_t>(
      std::ceil(border_fraction * static_cast<double>(member_count) - 1e-12));
  return std::min(b, member_count - 1);
}

std::vector<std::size_t> BorderCandidates(const GlobalLabeling& labeling,
                                          const std::vector<SubclusterStat>& stats,
                                          const double border_fraction)
{
  CheckLabeling(labeling, stats);
  std::vector<std::size_t> out;
  for (auto members : MembersOf(labeling))
  {
    const std::size_t b = BorderCount(members.size(), border_fraction);
    if (b == 0)
    {
      continue;
    }
    const Point center = Pool(members, stats).center;
    std::stable_sort(members.begin(), members.end(), [&](std::size_t x, std::size_t y) {
      return SquaredEuclidean(stats[x].center, center) > SquaredEuclidean(stats[y].center, center);
    });
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(b));
  }
  return out;
}

PerturbationResult Perturb(const GlobalLabeling& labeling,
                           const std::vector<SubclusterStat>& stats, const VarianceConfig& cfg)
{
  CheckLabeling(labeling, stats);
  PerturbationResult result;
  result.labeling = labeling;
  auto& labels = result.labeling.label_of;
  const auto clusters = static_cast<std::size_t>(labeling.cluster_count);

  for (; result.rounds < cfg.max_rounds;)
  {
    ++result.rounds;
    std::size_t moved_this_round = 0;
    for (const std::size_t candidate :
         BorderCandidates(result.labeling, stats, cfg.border_fraction))
    {
      auto members = MembersOf(result.labeling);
      const auto home = static_cast<std::size_t>(labels[candidate]);
      if (members[home].size() < 2)
      {
        continue;
      }
      std::vector<SubclusterStat> pooled;
      for (const auto& group : members)
      {
        pooled.push_back(Pool(group, stats));
      }
      std::vector<std::size_t> neighbours;
      for (std::size_t g = 0; g < clusters; ++g)
      {
        if (g != home)
        {
          neighbours.push_back(g);
        }
      }
      std::stable_sort(neighbours.begin(), neighbours.end(), [&](std::size_t x, std::size_t y) {
        return SquaredEuclidean(stats[candidate].center, pooled[x].center) <
               SquaredEuclidean(stats[candidate].center, pooled[y].center);
      });

      const SubclusterStat without = Pool(members[home], stats, candidate);
      for (const std::size_t g : neighbours)
      {
        const SubclusterStat with = UnionStat(pooled[g], stats[candidate]);
        const double before = pooled[home].variance + pooled[g].variance;
        const double after = without.variance + with.variance;
        if (after < before - 1e-12 * std::max(1.0, before))
        {
          labels[candidate] = static_cast<int>(g);
          ++result.moves;
          ++moved_this_round;
          break;
        }
      }
    }
    if (moved_this_round == 0)
    {
      break;
    }
  }
  return result;
}

std::vector<SweepRow> SweepVarLimit(const std::vector<SubclusterStat>& stats,
                                    const std::vector<double>& limits,
                                    const MergeCriterion criterion)
{
  if (limits.empty())
  {
    throw std::invalid_argument("sweep needs at least one limit");
  }
  if (!std::is_sorted(limits.begin(), limits.end()))
  {
    throw std::invalid_argument("sweep limits must be sorted ascending");
  }
  std::vector<SweepRow> rows;
  for (const double limit : limits)
  {
    VarianceConfig cfg;
    cfg.var_limit = limit;
    cfg.criterion = criterion;
    const GlobalLabeling labeling = GlobalMerge(stats, cfg);
    rows.push_back(SweepRow{limit, labeling.cluster_count, TotalSse(labeling, stats)});
  }
  return rows;
}

int WidestPlateau(const std::vector<SweepRow>& rows, const std::size_t stat_count)
{
  int best = 0;
  std::size_t best_run = 0;
  for (std::size_t i = 0; i < rows.size();)
  {
    std::size_t j = i;
    while (j < rows.size() && rows[j].cluster_count == rows[i].cluster_count)
    {
      ++j;
    }
    const int count = rows[i].cluster_count;
    const bool trivial = count <= 1 || static_cast<std::size_t>(count) >= stat_count;
    if (!trivial && j - i > best_run)
    {
      best_run = j - i;
      best = count;
    }
    i = j;
  }
  return best;
}

std::uint64_t RawScalarCount(const std::size_t dimension, const std::size_t subclusters)
{
  return static_cast<std::uint64_t>((dimension + 2) * subclusters);
}

std::uint64_t PaperUnitCount(const std::size_t dimension, const std::size_t subclusters)
{
  return static_cast<std::uint64_t>(3 * dimension * subclusters);
}

double HighestVariance(const std::vector<SubclusterStat>& stats, const MergeCriterion criterion)
{
  double highest = 0.0;
  for (const auto& stat : stats)
  {
    highest = std::max(highest, IndividualVariance(stat, criterion));
  }
  return highest;
}

}  // namespace gridmine::variance
