#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gridmine
{
using PointId = std::int64_t;

inline constexpr PointId kUnknownPointId = -1;

enum class Metric { Euclidean, Manhattan };

Metric MetricFromString(const std::string& name);
std::string ToString(Metric metric);

/// A d-dimensional record in an unitless feature space.
struct Point
{
  std::vector<double> coords;

  Point() = default;
  explicit Point(std::vector<double> values) : coords(std::move(values)) {}
  Point(std::initializer_list<double> values) : coords(values) {}

  std::size_t Dimension() const { return coords.size(); }
  double operator[](std::size_t i) const { return coords[i]; }
  double& operator[](std::size_t i) { return coords[i]; }

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

double Distance(const Point& a, const Point& b, Metric metric = Metric::Euclidean);
double SquaredEuclidean(const Point& a, const Point& b);

/// Ordered points with stable integer ids. All points share one dimension.
class Dataset
{
public:
  Dataset() = default;
  explicit Dataset(std::size_t dimension) : dimension_(dimension) {}

  /// Builds a dataset whose ids follow the vector order starting at 0.
  static Dataset FromPoints(std::vector<Point> points);

  void Add(PointId id, Point point);

  std::size_t Size() const { return points_.size(); }
  bool Empty() const { return points_.empty(); }
  std::size_t Dimension() const { return dimension_; }

  const Point& At(std::size_t index) const { return points_.at(index); }
  PointId IdAt(std::size_t index) const { return ids_.at(index); }
  const std::vector<Point>& Points() const { return points_; }
  const std::vector<PointId>& Ids() const { return ids_; }

  friend bool operator==(const Dataset&, const Dataset&) = default;

private:
  std::size_t dimension_ = 0;
  std::vector<Point> points_;
  std::vector<PointId> ids_;
  PointId max_id_ = 0;
};

/// Site assignment for every point of a dataset, by position.
struct Partitioning
{
  std::size_t site_count = 0;
  std::vector<std::size_t> site_of;

  std::vector<std::size_t> SiteSizes() const;
};

Partitioning RoundRobinPartition(const Dataset& dataset, std::size_t site_count);

/// Materializes the per-site datasets. Point ids are preserved.
std::vector<Dataset> SplitBySite(const Dataset& dataset, const Partitioning& partitioning);

struct GaussianComponent
{
  Point center;
  double stdev = 0.0;
  std::size_t count = 0;
};

struct GaussianMixtureSpec
{
  std::vector<GaussianComponent> components;
  std::uint64_t seed = 42;
};

/// Samples components in order; ids follow generation order. A zero stdev
/// places every sample of that component exactly on its center.
Dataset GenerateGaussianMixture(const GaussianMixtureSpec& spec);

GaussianMixtureSpec GaussianMixtureSpecFromJson(const nlohmann::json& doc);
nlohmann::json ToJson(const GaussianMixtureSpec& spec);

// CSV with header `id,x0,x1,...`, one point per row.
void WriteCsv(const Dataset& dataset, std::ostream& out);
Dataset ReadCsv(std::istream& in);
void SaveCsv(const Dataset& dataset, const std::string& path);
Dataset LoadCsv(const std::string& path);

/// Shortest decimal text that round-trips the double exactly.
std::string FormatDouble(double value);

}  // namespace gridmine
