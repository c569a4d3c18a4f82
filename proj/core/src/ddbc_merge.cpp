#include "gridmine/ddbc_merge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gridmine::ddbc
{
namespace
{
class DisjointSets
{
public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t Find(std::size_t v)
  {
    while (parent_[v] != v)
    {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }

  // The smaller index stays root so component order follows input order.
  void Unite(std::size_t a, std::size_t b)
  {
    a = Find(a);
    b = Find(b);
    if (a == b)
    {
      return;
    }
    if (b < a)
    {
      std::swap(a, b);
    }
    parent_[b] = a;
  }

private:
  std::vector<std::size_t> parent_;
};

void CheckCompatible(const MergedModel& x, const MergedModel& y)
{
  if (x.minpts != y.minpts)
  {
    throw std::invalid_argument("cannot merge models built with different minpts (" +
                                std::to_string(x.minpts) + " vs " + std::to_string(y.minpts) +
                                ")");
  }
  const std::size_t dx = x.Dimension();
  const std::size_t dy = y.Dimension();
  if (dx != 0 && dy != 0 && dx != dy)
  {
    throw std::invalid_argument("cannot merge models of different dimension");
  }
  if (!(x.eps > 0.0) || !(y.eps > 0.0))
  {
    throw std::invalid_argument("model eps must be positive");
  }
}

// Index of the cluster whose nearest endpoint is closest to `point` within
// eps, or nullopt. Ties go to the lower cluster index.
std::optional<std::size_t> NearestTouchingCluster(const std::vector<MergedCluster>& clusters,
                                                  const Point& point, const double eps,
                                                  const Metric metric)
{
  std::optional<std::size_t> best;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < clusters.size(); ++i)
  {
    for (const auto& pair : clusters[i].pairs)
    {
      const double d = std::min(Distance(point, pair.s, metric), Distance(point, pair.c, metric));
      if (d <= eps && d < best_distance)
      {
        best_distance = d;
        best = i;
      }
    }
  }
  return best;
}

// Distributes `noise` over `clusters`; returns the points nobody took.
std::vector<Point> AbsorbInto(std::vector<MergedCluster>& clusters,
                              const std::vector<Point>& noise, const double eps,
                              const Metric metric)
{
  std::vector<Point> remaining;
  for (const auto& point : noise)
  {
    const auto target = NearestTouchingCluster(clusters, point, eps, metric);
    if (target.has_value())
    {
      clusters[*target].absorbed.push_back(point);
    }
    else
    {
      remaining.push_back(point);
    }
  }
  return remaining;
}

void Renumber(MergedModel& model)
{
  for (std::size_t i = 0; i < model.clusters.size(); ++i)
  {
    model.clusters[i].id = static_cast<int>(i);
  }
}

void AppendCluster(MergedCluster& into, MergedCluster&& from)
{
  into.pairs.insert(into.pairs.end(), std::make_move_iterator(from.pairs.begin()),
                    std::make_move_iterator(from.pairs.end()));
  into.absorbed.insert(into.absorbed.end(), std::make_move_iterator(from.absorbed.begin()),
                       std::make_move_iterator(from.absorbed.end()));
  into.provenance.insert(into.provenance.end(), from.provenance.begin(), from.provenance.end());
}

MergedModel MergeDirect(const MergedModel& x, const MergedModel& y, const MergeConfig& cfg)
{
  const double eps = std::min(x.eps, y.eps);
  std::vector<MergedCluster> xs = x.clusters;
  std::vector<MergedCluster> ys = y.clusters;

  std::vector<Point> noise = AbsorbInto(ys, x.noise, eps, cfg.metric);
  std::vector<Point> y_left = AbsorbInto(xs, y.noise, eps, cfg.metric);
  noise.insert(noise.end(), y_left.begin(), y_left.end());

  const std::size_t nx = xs.size();
  DisjointSets sets(nx + ys.size());
  for (std::size_t i = 0; i < nx; ++i)
  {
    for (std::size_t j = 0; j < ys.size(); ++j)
    {
      const bool touch = std::any_of(xs[i].pairs.begin(), xs[i].pairs.end(), [&](const auto& a) {
        return std::any_of(ys[j].pairs.begin(), ys[j].pairs.end(), [&](const auto& b) {
          return PairsTouch(a, b, eps, cfg.metric);
        });
      });
      if (touch)
      {
        sets.Unite(i, nx + j);
      }
    }
  }

  MergedModel out;
  out.eps = eps;
  out.minpts = x.minpts;
  out.noise = std::move(noise);
  std::map<std::size_t, std::size_t> slot_of_root;
  for (std::size_t k = 0; k < nx + ys.size(); ++k)
  {
    MergedCluster&& cluster = k < nx ? std::move(xs[k]) : std::move(ys[k - nx]);
    const std::size_t root = sets.Find(k);
    const auto it = slot_of_root.find(root);
    if (it == slot_of_root.end())
    {
      slot_of_root.emplace(root, out.clusters.size());
      out.clusters.push_back(std::move(cluster));
    }
    else
    {
      AppendCluster(out.clusters[it->second], std::move(cluster));
    }
  }
  Renumber(out);
  return out;
}

MergedModel MergeDisaggregating(const MergedModel& x, const MergedModel& y,
                                const MergeConfig& cfg)
{
  const double eps = cfg.EpsAverFor(x.eps, y.eps);
  const bool x_is_small = x.eps <= y.eps;
  std::vector<MergedCluster> small = x_is_small ? x.clusters : y.clusters;
  std::vector<MergedCluster> large = x_is_small ? y.clusters : x.clusters;
  const std::vector<Point>& small_noise = x_is_small ? x.noise : y.noise;
  const std::vector<Point>& large_noise = x_is_small ? y.noise : x.noise;

  std::vector<Point> large_left = AbsorbInto(small, large_noise, eps, cfg.metric);

  for (auto& cluster : large)
  {
    std::vector<RepresentativePair> kept;
    std::optional<std::size_t> first_target;
    for (auto& pair : cluster.pairs)
    {
      std::optional<std::size_t> target;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < small.size(); ++i)
      {
        for (const auto& anchor : small[i].pairs)
        {
          double witness = 0.0;
          if (PairsTouch(anchor, pair, eps, cfg.metric, &witness) && witness < best)
          {
            best = witness;
            target = i;
          }
        }
      }
      if (!target.has_value())
      {
        kept.push_back(std::move(pair));
        continue;
      }
      if (!first_target.has_value())
      {
        first_target = target;
      }
      auto& absorbed = small[*target].absorbed;
      absorbed.push_back(pair.s);
      if (pair.c_id != pair.s_id || pair.c != pair.s)
      {
        absorbed.push_back(pair.c);
      }
    }
    cluster.pairs = std::move(kept);
    if (cluster.pairs.empty() && first_target.has_value())
    {
      AppendCluster(small[*first_target], std::move(cluster));
      cluster.provenance.clear();
    }
  }

  // Output keeps x's clusters ahead of y's.
  MergedModel out;
  out.eps = eps;
  out.minpts = x.minpts;
  std::vector<MergedCluster> survivors;
  for (auto& cluster : large)
  {
    if (!cluster.pairs.empty())
    {
      survivors.push_back(std::move(cluster));
    }
  }
  std::vector<MergedCluster>& first = x_is_small ? small : survivors;
  std::vector<MergedCluster>& second = x_is_small ? survivors : small;
  for (auto* group : {&first, &second})
  {
    for (auto& cluster : *group)
    {
      out.clusters.push_back(std::move(cluster));
    }
  }
  const std::vector<Point>& x_noise = x_is_small ? small_noise : large_left;
  const std::vector<Point>& y_noise = x_is_small ? large_left : small_noise;
  out.noise = x_noise;
  out.noise.insert(out.noise.end(), y_noise.begin(), y_noise.end());
  Renumber(out);
  return out;
}

nlohmann::json PointsToJson(const std::vector<Point>& points)
{
  nlohmann::json out = nlohmann::json::array();
  for (const auto& point : points)
  {
    out.push_back(point.coords);
  }
  return out;
}

std::vector<Point> PointsFromJson(const nlohmann::json& doc)
{
  std::vector<Point> out;
  for (const auto& entry : doc)
  {
    out.emplace_back(entry.get<std::vector<double>>());
  }
  return out;
}

}  // namespace

EpsAverRule EpsAverRuleFromString(const std::string& name)
{
  if (name == "mean")
  {
    return EpsAverRule::Mean;
  }
  if (name == "min")
  {
    return EpsAverRule::Min;
  }
  if (name == "explicit")
  {
    return EpsAverRule::Explicit;
  }
  throw std::invalid_argument("unknown eps_aver rule: " + name);
}

std::string ToString(const EpsAverRule rule)
{
  switch (rule)
  {
    case EpsAverRule::Mean:
      return "mean";
    case EpsAverRule::Min:
      return "min";
    case EpsAverRule::Explicit:
      return "explicit";
  }
  return "unknown";
}

double MergeConfig::ThetaFor(const double eps_x, const double eps_y) const
{
  if (theta.has_value())
  {
    if (*theta < 0.0)
    {
      throw std::invalid_argument("theta must be nonnegative");
    }
    return *theta;
  }
  return 0.25 * std::min(eps_x, eps_y);
}

double MergeConfig::EpsAverFor(const double eps_x, const double eps_y) const
{
  switch (eps_aver_rule)
  {
    case EpsAverRule::Mean:
      return 0.5 * (eps_x + eps_y);
    case EpsAverRule::Min:
      return std::min(eps_x, eps_y);
    case EpsAverRule::Explicit:
      if (!(eps_aver_value > 0.0))
      {
        throw std::invalid_argument("explicit eps_aver must be positive");
      }
      return eps_aver_value;
  }
  return 0.5 * (eps_x + eps_y);
}

std::size_t MergedModel::Dimension() const
{
  for (const auto& cluster : clusters)
  {
    if (!cluster.pairs.empty())
    {
      return cluster.pairs.front().s.Dimension();
    }
    if (!cluster.absorbed.empty())
    {
      return cluster.absorbed.front().Dimension();
    }
  }
  return noise.empty() ? 0 : noise.front().Dimension();
}

MergedModel Lift(const LocalDensityModel& local, const std::size_t site)
{
  MergedModel model;
  model.eps = local.eps;
  model.minpts = local.minpts;
  model.noise = local.noise;
  for (const auto& cluster : local.clusters)
  {
    MergedCluster merged;
    merged.id = cluster.id;
    merged.pairs = cluster.pairs;
    merged.provenance.push_back(Provenance{site, cluster.id});
    model.clusters.push_back(std::move(merged));
  }
  return model;
}

nlohmann::json ToJson(const MergedModel& model)
{
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& cluster : model.clusters)
  {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& pair : cluster.pairs)
    {
      pairs.push_back({{"s", pair.s.coords}, {"c", pair.c.coords}});
    }
    nlohmann::json provenance = nlohmann::json::array();
    for (const auto& source : cluster.provenance)
    {
      provenance.push_back({{"site", source.site}, {"cluster", source.cluster}});
    }
    clusters.push_back({{"id", cluster.id},
                        {"pairs", std::move(pairs)},
                        {"absorbed", PointsToJson(cluster.absorbed)},
                        {"provenance", std::move(provenance)}});
  }
  return {{"eps", model.eps},
          {"minpts", model.minpts},
          {"clusters", std::move(clusters)},
          {"noise", PointsToJson(model.noise)}};
}

MergedModel MergedModelFromJson(const nlohmann::json& doc)
{
  MergedModel model;
  model.eps = doc.at("eps").get<double>();
  model.minpts = doc.at("minpts").get<int>();
  for (const auto& entry : doc.at("clusters"))
  {
    MergedCluster cluster;
    cluster.id = entry.at("id").get<int>();
    for (const auto& pair : entry.at("pairs"))
    {
      RepresentativePair rep;
      rep.s = Point(pair.at("s").get<std::vector<double>>());
      rep.c = Point(pair.at("c").get<std::vector<double>>());
      cluster.pairs.push_back(std::move(rep));
    }
    cluster.absorbed = PointsFromJson(entry.at("absorbed"));
    for (const auto& source : entry.at("provenance"))
    {
      cluster.provenance.push_back(
          Provenance{source.at("site").get<std::size_t>(), source.at("cluster").get<int>()});
    }
    model.clusters.push_back(std::move(cluster));
  }
  model.noise = PointsFromJson(doc.at("noise"));
  return model;
}

AbsorbResult AbsorbNoise(const std::vector<RepresentativePair>& reps,
                         const std::vector<Point>& noise, const double eps, const Metric metric)
{
  if (!(eps > 0.0))
  {
    throw std::invalid_argument("eps must be positive");
  }
  AbsorbResult result;
  for (const auto& point : noise)
  {
    const bool near = std::any_of(reps.begin(), reps.end(), [&](const RepresentativePair& pair) {
      return Distance(point, pair.s, metric) <= eps || Distance(point, pair.c, metric) <= eps;
    });
    (near ? result.absorbed : result.remaining).push_back(point);
  }
  return result;
}

bool PairsTouch(const RepresentativePair& a, const RepresentativePair& b, const double eps,
                const Metric metric, double* witness)
{
  const double d = std::min({Distance(a.s, b.s, metric), Distance(a.s, b.c, metric),
                             Distance(a.c, b.s, metric), Distance(a.c, b.c, metric)});
  if (witness != nullptr)
  {
    *witness = d;
  }
  return d <= eps;
}

MergeMode ChooseMode(const double eps_x, const double eps_y, const MergeConfig& cfg)
{
  return std::abs(eps_x - eps_y) <= cfg.ThetaFor(eps_x, eps_y) ? MergeMode::Direct
                                                               : MergeMode::Disaggregating;
}

MergedModel MergePair(const MergedModel& x, const MergedModel& y, const MergeConfig& cfg)
{
  CheckCompatible(x, y);
  if (ChooseMode(x.eps, y.eps, cfg) == MergeMode::Direct)
  {
    return MergeDirect(x, y, cfg);
  }
  return MergeDisaggregating(x, y, cfg);
}

MergedModel MergePair(const LocalDensityModel& x, const LocalDensityModel& y,
                      const MergeConfig& cfg)
{
  return MergePair(Lift(x, 0), Lift(y, 1), cfg);
}

HierarchicalMergeResult HierarchicalMerge(const std::vector<LocalDensityModel>& models,
                                          const sim::Topology& topology,
                                          const MergeConfig& cfg,
                                          const std::optional<std::size_t> stop_level,
                                          sim::Transport& transport)
{
  if (models.size() != topology.LeafCount())
  {
    throw std::invalid_argument("expected " + std::to_string(topology.LeafCount()) +
                                " local models, got " + std::to_string(models.size()));
  }
  const std::size_t target = stop_level.value_or(topology.Height());
  if (target > topology.Height())
  {
    throw std::invalid_argument("stop level " + std::to_string(target) +
                                " exceeds topology height " +
                                std::to_string(topology.Height()));
  }

  std::vector<std::optional<MergedModel>> at(topology.NodeCount());
  for (std::size_t site = 0; site < models.size(); ++site)
  {
    at[site] = Lift(models[site], site);
  }

  HierarchicalMergeResult result;
  for (std::size_t level = 1; level <= target; ++level)
  {
    for (const sim::NodeId node_id : topology.Levels()[level])
    {
      const auto& node = topology.Node(node_id);
      if (node.IsLeaf() || node.level != level)
      {
        continue;
      }
      std::optional<MergedModel> merged;
      std::uint64_t bytes_in = 0;
      for (const sim::NodeId child : node.children)
      {
        const nlohmann::json payload = ToJson(*at.at(child));
        const std::string wire = payload.dump();
        bytes_in += wire.size();
        const nlohmann::json received = transport.Send(
            child, node_id, "ddbc_model", payload, sim::CountNumericLeaves(payload), level);
        MergedModel incoming = MergedModelFromJson(received);
        merged = merged.has_value() ? MergePair(*merged, incoming, cfg) : std::move(incoming);
      }
      result.trace.push_back({{"level", level},
                              {"node", node_id},
                              {"children", node.children},
                              {"models_in", node.children.size()},
                              {"clusters_out", merged->ClusterCount()},
                              {"bytes_in", bytes_in}});
      at[node_id] = std::move(merged);
    }
  }

  for (const sim::NodeId node_id : topology.Levels()[target])
  {
    result.models.push_back(*at.at(node_id));
  }
  return result;
}

HierarchicalMergeResult HierarchicalMerge(const std::vector<LocalDensityModel>& models,
                                          const sim::Topology& topology,
                                          const MergeConfig& cfg,
                                          const std::optional<std::size_t> stop_level)
{
  sim::Transport transport;
  return HierarchicalMerge(models, topology, cfg, stop_level, transport);
}

std::vector<int> AssignMembership(const MergedModel& model, const Dataset& dataset,
                                  const Metric metric)
{
  std::vector<int> labels(dataset.Size(), kNoise);
  if (dataset.Empty() || model.clusters.empty())
  {
    return labels;
  }
  Dataset anchors(dataset.Dimension());
  std::vector<int> owner;
  for (const auto& cluster : model.clusters)
  {
    auto add = [&](const Point& p) {
      anchors.Add(static_cast<PointId>(owner.size()), p);
      owner.push_back(cluster.id);
    };
    for (const auto& pair : cluster.pairs)
    {
      add(pair.s);
      add(pair.c);
    }
    for (const auto& point : cluster.absorbed)
    {
      add(point);
    }
  }
  const NeighborIndex index(anchors, model.eps, metric);
  for (std::size_t i = 0; i < dataset.Size(); ++i)
  {
    double best = std::numeric_limits<double>::infinity();
    for (const std::size_t a : index.NeighborsOf(dataset.At(i)))
    {
      const double d = Distance(dataset.At(i), anchors.At(a), metric);
      if (d < best)
      {
        best = d;
        labels[i] = owner[a];
      }
    }
  }
  return labels;
}

std::vector<int> MaxWeightMatching(const std::vector<std::vector<double>>& weights)
{
  const std::size_t rows = weights.size();
  if (rows == 0)
  {
    return {};
  }
  const std::size_t cols = weights.front().size();
  for (const auto& row : weights)
  {
    if (row.size() != cols)
    {
      throw std::invalid_argument("weight matrix must be rectangular");
    }
  }
  if (cols == 0)
  {
    return std::vector<int>(rows, -1);
  }
  if (rows > cols)
  {
    std::vector<std::vector<double>> transposed(cols, std::vector<double>(rows));
    for (std::size_t i = 0; i < rows; ++i)
    {
      for (std::size_t j = 0; j < cols; ++j)
      {
        transposed[j][i] = weights[i][j];
      }
    }
    const auto by_col = MaxWeightMatching(transposed);
    std::vector<int> out(rows, -1);
    for (std::size_t j = 0; j < cols; ++j)
    {
      if (by_col[j] >= 0)
      {
        out[static_cast<std::size_t>(by_col[j])] = static_cast<int>(j);
      }
    }
    return out;
  }

  // Hungarian method with potentials (rows <= cols), minimizing max - w.
  double top = 0.0;
  for (const auto& row : weights)
  {
    for (const double w : row)
    {
      top = std::max(top, w);
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0);
  std::vector<double> v(cols + 1, 0.0);
  std::vector<std::size_t> match(cols + 1, 0);
  std::vector<std::size_t> way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i)
  {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> min_v(cols + 1, inf);
    std::vector<bool> used(cols + 1, false);
    do
    {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j)
      {
        if (used[j])
        {
          continue;
        }
        const double cost = (top - weights[i0 - 1][j - 1]) - u[i0] - v[j];
        if (cost < min_v[j])
        {
          min_v[j] = cost;
          way[j] = j0;
        }
        if (min_v[j] < delta)
        {
          delta = min_v[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j)
      {
        if (used[j])
        {
          u[match[j]] += delta;
          v[j] -= delta;
        }
        else
        {
          min_v[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do
    {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= cols; ++j)
  {
    if (match[j] != 0)
    {
      out[match[j] - 1] = static_cast<int>(j - 1);
    }
  }
  return out;
}

double QualityP(const std::vector<int>& distributed, const std::vector<int>& centralized)
{
  if (distributed.size() != centralized.size())
  {
    throw std::invalid_argument("labelings cover different point sets");
  }
  if (distributed.empty())
  {
    return 1.0;
  }
  std::map<int, std::size_t> row_of;
  std::map<int, std::size_t> col_of;
  for (std::size_t i = 0; i < distributed.size(); ++i)
  {
    if (distributed[i] != kNoise)
    {
      row_of.emplace(distributed[i], 0);
    }
    if (centralized[i] != kNoise)
    {
      col_of.emplace(centralized[i], 0);
    }
  }
  std::size_t next = 0;
  for (auto& [label, index] : row_of)
  {
    index = next++;
  }
  next = 0;
  for (auto& [label, index] : col_of)
  {
    index = next++;
  }

  std::vector<std::vector<double>> table(row_of.size(), std::vector<double>(col_of.size(), 0.0));
  std::size_t noise_agree = 0;
  for (std::size_t i = 0; i < distributed.size(); ++i)
  {
    if (distributed[i] == kNoise || centralized[i] == kNoise)
    {
      noise_agree += distributed[i] == kNoise && centralized[i] == kNoise ? 1 : 0;
      continue;
    }
    table[row_of.at(distributed[i])][col_of.at(centralized[i])] += 1.0;
  }
  const auto match = MaxWeightMatching(table);
  double matched = static_cast<double>(noise_agree);
  for (std::size_t r = 0; r < match.size(); ++r)
  {
    if (match[r] >= 0)
    {
      matched += table[r][static_cast<std::size_t>(match[r])];
    }
  }
  return matched / static_cast<double>(distributed.size());
}

double QualityP(const std::map<PointId, int>& distributed,
                const std::map<PointId, int>& centralized)
{
  if (distributed.size() != centralized.size())
  {
    throw std::invalid_argument("labelings cover different point sets");
  }
  std::vector<int> a;
  std::vector<int> b;
  auto it = centralized.begin();
  for (const auto& [id, label] : distributed)
  {
    if (it->first != id)
    {
      throw std::invalid_argument("point " + std::to_string(id) +
                                  " is missing from the centralized labeling");
    }
    a.push_back(label);
    b.push_back(it->second);
    ++it;
  }
  return QualityP(a, b);
}

double Speedup(const long long m, const double mu, const long long n_points)
{
  if (m < 1)
  {
    throw std::invalid_argument("m must be at least 1");
  }
  if (m == 1)
  {
    throw std::invalid_argument("speedup is undefined for m = 1 (log m = 0)");
  }
  if (!(mu > 0.0) || mu > 1.0)
  {
    throw std::invalid_argument("mu must lie in (0, 1]");
  }
  if (n_points < 1)
  {
    throw std::invalid_argument("N must be at least 1");
  }
  const double md = static_cast<double>(m);
  const double denominator_factor = mu * mu * md - 1.0;
  if (denominator_factor < 0.0)
  {
    throw std::invalid_argument("speedup requires mu^2 m >= 1");
  }
  const double numerator = (md - 1.0) * std::log(static_cast<double>(n_points));
  if (denominator_factor == 0.0)
  {
    return numerator == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                            : std::numeric_limits<double>::infinity();
  }
  return numerator / (denominator_factor * std::log(md));
}

}  // namespace gridmine::ddbc
