#include "gridmine/core_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gridmine
{
Metric MetricFromString(const std::string& name)
{
  if (name == "euclidean")
  {
    return Metric::Euclidean;
  }
  if (name == "manhattan")
  {
    return Metric::Manhattan;
  }
  throw std::invalid_argument("unknown metric: " + name);
}

std::string ToString(const Metric metric)
{
  return metric == Metric::Euclidean ? "euclidean" : "manhattan";
}

double SquaredEuclidean(const Point& a, const Point& b)
{
  if (a.Dimension() != b.Dimension())
  {
    throw std::invalid_argument("dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.Dimension(); ++i)
  {
    const double delta = a[i] - b[i];
    sum += delta * delta;
  }
  return sum;
}

double Distance(const Point& a, const Point& b, const Metric metric)
{
  if (metric == Metric::Euclidean)
  {
    return std::sqrt(SquaredEuclidean(a, b));
  }
  if (a.Dimension() != b.Dimension())
  {
    throw std::invalid_argument("dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.Dimension(); ++i)
  {
    sum += std::abs(a[i] - b[i]);
  }
  return sum;
}

Dataset Dataset::FromPoints(std::vector<Point> points)
{
  Dataset dataset(points.empty() ? 0 : points.front().Dimension());
  for (std::size_t i = 0; i < points.size(); ++i)
  {
    dataset.Add(static_cast<PointId>(i), std::move(points[i]));
  }
  return dataset;
}

void Dataset::Add(const PointId id, Point point)
{
  if (point.Dimension() == 0)
  {
    throw std::invalid_argument("points need at least one dimension");
  }
  if (points_.empty() && dimension_ == 0)
  {
    dimension_ = point.Dimension();
  }
  if (point.Dimension() != dimension_)
  {
    throw std::invalid_argument("dimension mismatch: dataset has " + std::to_string(dimension_) +
                                ", point has " + std::to_string(point.Dimension()));
  }
  for (const double value : point.coords)
  {
    if (!std::isfinite(value))
    {
      throw std::invalid_argument("non-finite coordinate in point " + std::to_string(id));
    }
  }
  // Ascending ids (the common case) skip the uniqueness scan.
  if (!ids_.empty() && id <= max_id_)
  {
    for (const PointId existing : ids_)
    {
      if (existing == id)
      {
        throw std::invalid_argument("duplicate point id " + std::to_string(id));
      }
    }
  }
  max_id_ = ids_.empty() ? id : std::max(max_id_, id);
  ids_.push_back(id);
  points_.push_back(std::move(point));
}

std::vector<std::size_t> Partitioning::SiteSizes() const
{
  std::vector<std::size_t> sizes(site_count, 0);
  for (const std::size_t site : site_of)
  {
    ++sizes.at(site);
  }
  return sizes;
}

Partitioning RoundRobinPartition(const Dataset& dataset, const std::size_t site_count)
{
  if (site_count == 0)
  {
    throw std::invalid_argument("site count must be positive");
  }
  Partitioning partitioning;
  partitioning.site_count = site_count;
  partitioning.site_of.resize(dataset.Size());
  for (std::size_t i = 0; i < dataset.Size(); ++i)
  {
    partitioning.site_of[i] = i % site_count;
  }
  return partitioning;
}

std::vector<Dataset> SplitBySite(const Dataset& dataset, const Partitioning& partitioning)
{
  if (partitioning.site_of.size() != dataset.Size())
  {
    throw std::invalid_argument("partitioning does not cover the dataset");
  }
  std::vector<Dataset> sites(partitioning.site_count, Dataset(dataset.Dimension()));
  for (std::size_t i = 0; i < dataset.Size(); ++i)
  {
    sites.at(partitioning.site_of[i]).Add(dataset.IdAt(i), dataset.At(i));
  }
  return sites;
}

Dataset GenerateGaussianMixture(const GaussianMixtureSpec& spec)
{
  if (spec.components.empty())
  {
    throw std::invalid_argument("gaussian mixture needs at least one component");
  }
  const std::size_t dimension = spec.components.front().center.Dimension();
  for (const auto& component : spec.components)
  {
    if (component.center.Dimension() != dimension || dimension == 0)
    {
      throw std::invalid_argument("all component centers must share a positive dimension");
    }
    if (component.count == 0)
    {
      throw std::invalid_argument("component count must be positive");
    }
    if (!(component.stdev >= 0.0))
    {
      throw std::invalid_argument("component stdev must be non-negative");
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset dataset(dimension);
  PointId next_id = 0;
  for (const auto& component : spec.components)
  {
    for (std::size_t n = 0; n < component.count; ++n)
    {
      Point point = component.center;
      for (std::size_t i = 0; i < dimension; ++i)
      {
        point[i] += component.stdev * normal(rng);
      }
      dataset.Add(next_id++, std::move(point));
    }
  }
  return dataset;
}

GaussianMixtureSpec GaussianMixtureSpecFromJson(const nlohmann::json& doc)
{
  GaussianMixtureSpec spec;
  if (!doc.contains("components") || !doc.at("components").is_array())
  {
    throw std::invalid_argument("generator spec needs a 'components' array");
  }
  for (const auto& entry : doc.at("components"))
  {
    GaussianComponent component;
    component.center = Point(entry.at("center").get<std::vector<double>>());
    component.stdev = entry.at("stdev").get<double>();
    const auto count = entry.at("count").get<std::int64_t>();
    if (count < 1)
    {
      throw std::invalid_argument("component count must be positive");
    }
    component.count = static_cast<std::size_t>(count);
    spec.components.push_back(std::move(component));
  }
  if (spec.components.empty())
  {
    throw std::invalid_argument("generator spec has no components");
  }
  if (doc.contains("seed"))
  {
    spec.seed = doc.at("seed").get<std::uint64_t>();
  }
  return spec;
}

nlohmann::json ToJson(const GaussianMixtureSpec& spec)
{
  nlohmann::json components = nlohmann::json::array();
  for (const auto& component : spec.components)
  {
    components.push_back({{"center", component.center.coords},
                          {"stdev", component.stdev},
                          {"count", component.count}});
  }
  return {{"components", components}, {"seed", spec.seed}};
}

std::string FormatDouble(const double value)
{
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

void WriteCsv(const Dataset& dataset, std::ostream& out)
{
  out << "id";
  for (std::size_t i = 0; i < dataset.Dimension(); ++i)
  {
    out << ",x" << i;
  }
  out << '\n';
  for (std::size_t row = 0; row < dataset.Size(); ++row)
  {
    out << dataset.IdAt(row);
    for (const double value : dataset.At(row).coords)
    {
      out << ',' << FormatDouble(value);
    }
    out << '\n';
  }
}

namespace
{
std::vector<std::string> SplitFields(const std::string& line)
{
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ','))
  {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',')
  {
    fields.emplace_back();
  }
  return fields;
}

double ParseDouble(const std::string& text, const std::size_t line_number)
{
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc() || result.ptr != end)
  {
    throw std::invalid_argument("line " + std::to_string(line_number) + ": bad number '" + text +
                                "'");
  }
  return value;
}
}  // namespace

Dataset ReadCsv(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line))
  {
    throw std::invalid_argument("empty dataset file");
  }
  if (!line.empty() && line.back() == '\r')
  {
    line.pop_back();
  }
  const auto header = SplitFields(line);
  if (header.size() < 2 || header.front() != "id")
  {
    throw std::invalid_argument("dataset header must be 'id,x0,...'");
  }
  const std::size_t dimension = header.size() - 1;
  Dataset dataset(dimension);
  std::size_t line_number = 1;
  while (std::getline(in, line))
  {
    ++line_number;
    if (!line.empty() && line.back() == '\r')
    {
      line.pop_back();
    }
    if (line.empty())
    {
      continue;
    }
    const auto fields = SplitFields(line);
    if (fields.size() != dimension + 1)
    {
      throw std::invalid_argument("line " + std::to_string(line_number) + ": expected " +
                                  std::to_string(dimension + 1) + " fields");
    }
    Point point;
    point.coords.reserve(dimension);
    for (std::size_t i = 1; i < fields.size(); ++i)
    {
      point.coords.push_back(ParseDouble(fields[i], line_number));
    }
    const auto id = static_cast<PointId>(ParseDouble(fields[0], line_number));
    dataset.Add(id, std::move(point));
  }
  return dataset;
}

void SaveCsv(const Dataset& dataset, const std::string& path)
{
  std::ofstream out(path);
  if (!out)
  {
    throw std::runtime_error("cannot write " + path);
  }
  WriteCsv(dataset, out);
}

Dataset LoadCsv(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw std::runtime_error("cannot read " + path);
  }
  return ReadCsv(in);
}

}  // namespace gridmine
