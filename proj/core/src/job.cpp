#include "gridmine/job.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gridmine/apriori.hpp"
#include "gridmine/core_data.hpp"
#include "gridmine/dbscan.hpp"
#include "gridmine/ddbc_merge.hpp"
#include "gridmine/variance.hpp"

namespace gridmine::sim
{
namespace fs = std::filesystem;

Algorithm AlgorithmFromString(const std::string& name)
{
  if (name == "ddbc")
  {
    return Algorithm::Ddbc;
  }
  if (name == "variance")
  {
    return Algorithm::Variance;
  }
  if (name == "apriori")
  {
    return Algorithm::Apriori;
  }
  throw std::invalid_argument("unknown algorithm: " + name);
}

std::string ToString(const Algorithm algorithm)
{
  switch (algorithm)
  {
    case Algorithm::Ddbc:
      return "ddbc";
    case Algorithm::Variance:
      return "variance";
    case Algorithm::Apriori:
      return "apriori";
  }
  return "unknown";
}

namespace
{
std::string Resolve(const std::string& base_dir, const std::string& path)
{
  if (path.empty() || fs::path(path).is_absolute())
  {
    return path;
  }
  return (fs::path(base_dir) / path).lexically_normal().string();
}

bool Has(const nlohmann::json& cfg, const char* key)
{
  return cfg.contains(key) && !cfg.at(key).is_null();
}

double PositiveNumber(const nlohmann::json& cfg, const char* key)
{
  if (!Has(cfg, key) || !cfg.at(key).is_number())
  {
    throw std::invalid_argument(std::string("config needs a numeric \"") + key + "\"");
  }
  const double v = cfg.at(key).get<double>();
  if (!(v > 0.0) || !std::isfinite(v))
  {
    throw std::invalid_argument(std::string("config \"") + key + "\" must be positive");
  }
  return v;
}

/// A scalar or one value per site.
std::vector<double> PerSite(const nlohmann::json& value, std::size_t sites, const char* key)
{
  std::vector<double> out;
  if (value.is_array())
  {
    if (value.size() != sites)
    {
      throw std::invalid_argument(std::string("config \"") + key + "\" needs " +
                                  std::to_string(sites) + " values");
    }
    for (const auto& v : value)
    {
      out.push_back(v.get<double>());
    }
  }
  else
  {
    out.assign(sites, value.get<double>());
  }
  for (double v : out)
  {
    if (!(v > 0.0) || !std::isfinite(v))
    {
      throw std::invalid_argument(std::string("config \"") + key + "\" values must be positive");
    }
  }
  return out;
}

std::size_t CountOf(double v, const char* key)
{
  if (v != std::floor(v) || v < 1.0)
  {
    throw std::invalid_argument(std::string("config \"") + key + "\" must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

void ValidateDdbc(const JobSpec& spec)
{
  const auto& cfg = spec.config;
  PositiveNumber(cfg, "eps");
  CountOf(PositiveNumber(cfg, "minpts"), "minpts");
  if (Has(cfg, "local_eps"))
  {
    PerSite(cfg.at("local_eps"), spec.sites, "local_eps");
  }
  if (Has(cfg, "metric"))
  {
    MetricFromString(cfg.at("metric").get<std::string>());
  }
  if (Has(cfg, "eps_aver"))
  {
    ddbc::EpsAverRuleFromString(cfg.at("eps_aver").get<std::string>());
  }
  if (Has(cfg, "theta") && cfg.at("theta").get<double>() < 0.0)
  {
    throw std::invalid_argument("config \"theta\" must not be negative");
  }
}

void ValidateVariance(const JobSpec& spec)
{
  const auto& cfg = spec.config;
  if (!Has(cfg, "k"))
  {
    throw std::invalid_argument("config needs \"k\"");
  }
  for (double k : PerSite(cfg.at("k"), spec.sites, "k"))
  {
    CountOf(k, "k");
  }
  if (Has(cfg, "var_limit") == Has(cfg, "var_limit_factor"))
  {
    throw std::invalid_argument("config needs exactly one of \"var_limit\" and \"var_limit_factor\"");
  }
  if (Has(cfg, "var_limit") && !(cfg.at("var_limit").get<double>() >= 0.0))
  {
    throw std::invalid_argument("config \"var_limit\" must not be negative");
  }
  if (Has(cfg, "var_limit_factor"))
  {
    PositiveNumber(cfg, "var_limit_factor");
  }
  if (Has(cfg, "local_algorithm"))
  {
    variance::LocalAlgorithmFromString(cfg.at("local_algorithm").get<std::string>());
  }
  if (Has(cfg, "criterion"))
  {
    variance::MergeCriterionFromString(cfg.at("criterion").get<std::string>());
  }
  if (Has(cfg, "border_fraction"))
  {
    const double f = cfg.at("border_fraction").get<double>();
    if (!(f >= 0.0 && f <= 1.0))
    {
      throw std::invalid_argument("config \"border_fraction\" must lie in [0, 1]");
    }
  }
}

void ValidateApriori(const JobSpec& spec)
{
  const auto& cfg = spec.config;
  CountOf(PositiveNumber(cfg, "k"), "k");
  if (Has(cfg, "min_support") == Has(cfg, "min_count"))
  {
    throw std::invalid_argument("config needs exactly one of \"min_support\" and \"min_count\"");
  }
  if (Has(cfg, "min_support"))
  {
    const double s = PositiveNumber(cfg, "min_support");
    if (s > 1.0)
    {
      throw std::invalid_argument("config \"min_support\" must lie in (0, 1]");
    }
  }
  else
  {
    CountOf(PositiveNumber(cfg, "min_count"), "min_count");
  }
}
}  // namespace

void JobSpec::Validate() const
{
  if (id.empty())
  {
    throw std::invalid_argument("job needs an id");
  }
  if (sites == 0)
  {
    throw std::invalid_argument("job needs at least one site");
  }
  if (partition != "round_robin" && partition != "block")
  {
    throw std::invalid_argument("unknown partition scheme: " + partition);
  }
  Topology::Build(sites, topology, group_size).Validate();
  if (!config.is_object() || !config.contains("kind"))
  {
    throw std::invalid_argument("config needs a \"kind\"");
  }
  const std::string kind = config.at("kind").get<std::string>();
  if (kind != ToString(algorithm))
  {
    throw std::invalid_argument("config kind '" + kind + "' does not match algorithm '" +
                                ToString(algorithm) + "'");
  }
  if (!dataset.is_object() || (dataset.contains("path") == dataset.contains("generate")))
  {
    throw std::invalid_argument("dataset needs exactly one of \"path\" and \"generate\"");
  }
  switch (algorithm)
  {
    case Algorithm::Ddbc:
      ValidateDdbc(*this);
      break;
    case Algorithm::Variance:
      ValidateVariance(*this);
      break;
    case Algorithm::Apriori:
      ValidateApriori(*this);
      break;
  }
}

nlohmann::json JobSpec::ToJson() const
{
  nlohmann::json topo{{"kind", sim::ToString(topology)}};
  if (group_size)
  {
    topo["p"] = *group_size;
  }
  return {{"id", id},
          {"algorithm", sim::ToString(algorithm)},
          {"seed", seed},
          {"dataset", dataset},
          {"partitioning", {{"sites", sites}, {"scheme", partition}}},
          {"topology", std::move(topo)},
          {"config", config},
          {"output",
           {{"result", output.result},
            {"trace", output.trace},
            {"report", output.report},
            {"metrics", output.metrics}}}};
}

JobSpec JobSpecFromJson(const nlohmann::json& doc, const std::string& base_dir,
                        std::optional<std::uint64_t> seed_override)
{
  JobSpec spec;
  spec.base_dir = base_dir;
  spec.id = doc.at("id").get<std::string>();
  spec.algorithm = AlgorithmFromString(doc.at("algorithm").get<std::string>());
  if (seed_override)
  {
    spec.seed = *seed_override;
  }
  else if (doc.contains("seed"))
  {
    spec.seed = doc.at("seed").get<std::uint64_t>();
  }
  spec.dataset = doc.at("dataset");
  const auto& part = doc.at("partitioning");
  spec.sites = part.at("sites").get<std::size_t>();
  spec.partition = part.value("scheme", std::string("round_robin"));
  const auto& topo = doc.at("topology");
  spec.topology = TopologyKindFromString(topo.at("kind").get<std::string>());
  if (topo.contains("p"))
  {
    spec.group_size = topo.at("p").get<std::size_t>();
  }
  spec.config = doc.at("config");
  if (doc.contains("output"))
  {
    const auto& out = doc.at("output");
    spec.output.result = Resolve(base_dir, out.value("result", std::string{}));
    spec.output.trace = Resolve(base_dir, out.value("trace", std::string{}));
    spec.output.report = Resolve(base_dir, out.value("report", std::string{}));
    spec.output.metrics = Resolve(base_dir, out.value("metrics", std::string{}));
  }
  return spec;
}

JobSpec LoadJobSpec(const std::string& path, std::optional<std::uint64_t> seed_override)
{
  std::ifstream in(path);
  if (!in)
  {
    throw std::runtime_error("cannot open job file " + path);
  }
  nlohmann::json doc;
  try
  {
    in >> doc;
  }
  catch (const nlohmann::json::exception& e)
  {
    throw std::invalid_argument("job file " + path + " is not valid JSON: " + e.what());
  }
  const fs::path parent = fs::path(path).parent_path();
  return JobSpecFromJson(doc, parent.empty() ? "." : parent.string(), seed_override);
}

nlohmann::json JobMetrics::ToJson() const
{
  nlohmann::json out{{"sites", sites},   {"count", count},       {"passes", passes},
                     {"elements", elements}, {"bytes", bytes}, {"wall_ms", wall_ms},
                     {"extra", extra}};
  out["quality_p"] = quality_p ? nlohmann::json(*quality_p) : nlohmann::json(nullptr);
  out["speedup"] = speedup ? nlohmann::json(*speedup) : nlohmann::json(nullptr);
  return out;
}

namespace
{
Dataset LoadPoints(const JobSpec& spec)
{
  if (spec.dataset.contains("path"))
  {
    return LoadCsv(Resolve(spec.base_dir, spec.dataset.at("path").get<std::string>()));
  }
  GaussianMixtureSpec gen = GaussianMixtureSpecFromJson(spec.dataset.at("generate"));
  gen.seed = spec.seed;
  return GenerateGaussianMixture(gen);
}

apriori::TransactionDb LoadBaskets(const JobSpec& spec)
{
  if (spec.dataset.contains("path"))
  {
    return apriori::LoadTransactions(Resolve(spec.base_dir, spec.dataset.at("path").get<std::string>()),
                                     spec.dataset.value("items", std::size_t{0}));
  }
  apriori::BasketSpec gen = apriori::BasketSpecFromJson(spec.dataset.at("generate"));
  gen.seed = spec.seed;
  return apriori::GenerateBaskets(gen);
}

std::vector<Dataset> SplitPoints(const JobSpec& spec, const Dataset& data)
{
  if (spec.partition == "round_robin")
  {
    return SplitBySite(data, RoundRobinPartition(data, spec.sites));
  }
  Partitioning part;
  part.site_count = spec.sites;
  part.site_of.resize(data.Size());
  for (std::size_t i = 0; i < data.Size(); ++i)
  {
    part.site_of[i] = i * spec.sites / std::max<std::size_t>(1, data.Size());
  }
  return SplitBySite(data, part);
}

std::vector<apriori::TransactionDb> SplitBaskets(const JobSpec& spec,
                                                 const apriori::TransactionDb& db)
{
  if (spec.partition == "round_robin")
  {
    return apriori::SplitRoundRobin(db, spec.sites);
  }
  std::vector<apriori::TransactionDb> out(spec.sites, apriori::TransactionDb(db.ItemCount()));
  const std::size_t n = db.Size();
  for (std::size_t i = 0; i < n; ++i)
  {
    out[i * spec.sites / n].Add(db.Transactions()[i]);
  }
  return out;
}

void Summarize(const MessageTrace& trace, JobMetrics& metrics)
{
  const TraceSummary summary = Account(trace);
  metrics.elements = summary.elements;
  metrics.bytes = summary.bytes;
}

JobOutput RunDdbc(const JobSpec& spec, const Topology& topology)
{
  const auto& cfg = spec.config;
  const Dataset data = LoadPoints(spec);
  const double eps = cfg.at("eps").get<double>();
  const int minpts = cfg.at("minpts").get<int>();
  const Metric metric = Has(cfg, "metric") ? MetricFromString(cfg.at("metric").get<std::string>())
                                           : Metric::Euclidean;
  const std::vector<double> local_eps =
      Has(cfg, "local_eps") ? PerSite(cfg.at("local_eps"), spec.sites, "local_eps")
                            : std::vector<double>(spec.sites, eps);
  ddbc::MergeConfig merge;
  merge.metric = metric;
  if (Has(cfg, "theta"))
  {
    merge.theta = cfg.at("theta").get<double>();
  }
  if (Has(cfg, "eps_aver"))
  {
    merge.eps_aver_rule = ddbc::EpsAverRuleFromString(cfg.at("eps_aver").get<std::string>());
  }
  merge.eps_aver_value = cfg.value("eps_aver_value", 0.0);

  const std::vector<Dataset> parts = SplitPoints(spec, data);
  std::vector<std::future<ddbc::LocalDensityModel>> jobs;
  for (std::size_t s = 0; s < spec.sites; ++s)
  {
    jobs.push_back(std::async(std::launch::async, [&, s] {
      return ddbc::BuildLocalModel(parts[s], local_eps[s], minpts, metric);
    }));
  }
  std::vector<ddbc::LocalDensityModel> locals;
  for (auto& job : jobs)
  {
    locals.push_back(job.get());
  }

  Transport transport;
  const ddbc::HierarchicalMergeResult merged =
      ddbc::HierarchicalMerge(locals, topology, merge, std::nullopt, transport);
  const ddbc::MergedModel& global = merged.models.front();

  JobOutput out;
  out.trace = transport.Trace();
  JobMetrics& metrics = out.metrics;
  metrics.sites = spec.sites;
  metrics.count = global.ClusterCount();
  metrics.passes = topology.Height();
  Summarize(out.trace, metrics);

  std::size_t representatives = 0;
  nlohmann::json local_doc = nlohmann::json::array();
  for (std::size_t s = 0; s < spec.sites; ++s)
  {
    representatives += locals[s].RepresentativeCount();
    local_doc.push_back({{"site", s},
                         {"points", parts[s].Size()},
                         {"eps", local_eps[s]},
                         {"clusters", locals[s].clusters.size()},
                         {"representatives", locals[s].RepresentativeCount()},
                         {"noise", locals[s].noise.size()}});
  }
  const double mu = data.Empty() ? 0.0 : static_cast<double>(representatives) / data.Size();
  metrics.extra["mu"] = mu;
  metrics.extra["local_clusters"] = nlohmann::json::array();
  for (const auto& local : locals)
  {
    metrics.extra["local_clusters"].push_back(local.clusters.size());
  }
  if (spec.sites > 1 && mu > 0.0 && mu * mu * spec.sites >= 1.0 && !data.Empty())
  {
    const double sp = ddbc::Speedup(static_cast<long long>(spec.sites), mu,
                                     static_cast<long long>(data.Size()));
    if (std::isfinite(sp))
    {
      metrics.speedup = sp;
    }
  }

  out.result = {{"algorithm", "ddbc"},
                {"points", data.Size()},
                {"local", std::move(local_doc)},
                {"merge", merged.trace},
                {"model", ddbc::ToJson(global)}};
  if (cfg.value("oracle", true))
  {
    const double oracle_eps = cfg.value("oracle_eps", eps);
    const ddbc::Labeling central = ddbc::Dbscan(data, oracle_eps, minpts, metric);
    const std::vector<int> distributed = ddbc::AssignMembership(global, data, metric);
    const double p = ddbc::QualityP(distributed, central.cluster_of);
    metrics.quality_p = p;
    metrics.extra["central_clusters"] = central.cluster_count;
    out.result["oracle"] = {{"eps", oracle_eps},
                            {"clusters", central.cluster_count},
                            {"noise", central.NoiseCount()},
                            {"quality_p", p}};
  }
  return out;
}

JobOutput RunVariance(const JobSpec& spec, const Topology& topology)
{
  const auto& cfg = spec.config;
  const Dataset data = LoadPoints(spec);
  const std::vector<double> ks = PerSite(cfg.at("k"), spec.sites, "k");
  const variance::LocalAlgorithm algo =
      Has(cfg, "local_algorithm")
          ? variance::LocalAlgorithmFromString(cfg.at("local_algorithm").get<std::string>())
          : variance::LocalAlgorithm::KMeans;
  variance::LocalOptions options;
  options.seed = spec.seed;
  options.max_iterations = cfg.value("max_iterations", options.max_iterations);
  options.harmonic_p = cfg.value("harmonic_p", options.harmonic_p);

  const std::vector<Dataset> parts = SplitPoints(spec, data);
  std::vector<std::future<std::vector<variance::SubclusterStat>>> jobs;
  for (std::size_t s = 0; s < spec.sites; ++s)
  {
    jobs.push_back(std::async(std::launch::async, [&, s] {
      return variance::LocalSubclusters(parts[s], static_cast<std::size_t>(ks[s]), algo, s,
                                        options);
    }));
  }
  std::vector<std::vector<variance::SubclusterStat>> local;
  for (auto& job : jobs)
  {
    local.push_back(job.get());
  }

  // Every site ships its statistics straight to the root.
  Transport transport;
  const NodeId root = topology.Root();
  std::vector<variance::SubclusterStat> stats;
  std::uint64_t shipped = 0;
  for (std::size_t s = 0; s < spec.sites; ++s)
  {
    nlohmann::json payload = nlohmann::json::array();
    for (const auto& stat : local[s])
    {
      payload.push_back(variance::ToJson(stat));
    }
    const std::uint64_t elements = variance::RawScalarCount(data.Dimension(), local[s].size());
    if (s == root)
    {
      for (const auto& stat : local[s])
      {
        stats.push_back(stat);
      }
      continue;
    }
    shipped += elements;
    const nlohmann::json received = transport.Send(s, root, "variance_stats", payload, elements, 1);
    for (const auto& doc : received)
    {
      stats.push_back(variance::SubclusterStatFromJson(doc));
    }
  }

  variance::VarianceConfig vc;
  if (Has(cfg, "criterion"))
  {
    vc.criterion = variance::MergeCriterionFromString(cfg.at("criterion").get<std::string>());
  }
  vc.var_limit = Has(cfg, "var_limit")
                     ? cfg.at("var_limit").get<double>()
                     : cfg.at("var_limit_factor").get<double>() *
                           variance::HighestVariance(stats, vc.criterion);
  vc.border_fraction = cfg.value("border_fraction", vc.border_fraction);
  vc.max_rounds = cfg.value("max_rounds", vc.max_rounds);

  const variance::GlobalLabeling merged = variance::GlobalMerge(stats, vc);
  const variance::PerturbationResult perturbed = variance::Perturb(merged, stats, vc);
  const variance::GlobalLabeling& labels = perturbed.labeling;

  JobOutput out;
  out.trace = transport.Trace();
  JobMetrics& metrics = out.metrics;
  metrics.sites = spec.sites;
  metrics.count = static_cast<std::uint64_t>(labels.cluster_count);
  metrics.passes = shipped > 0 ? 1 : 0;
  Summarize(out.trace, metrics);
  std::uint64_t paper_units = 0;
  for (std::size_t s = 0; s < spec.sites; ++s)
  {
    paper_units += variance::PaperUnitCount(data.Dimension(), local[s].size());
  }
  metrics.extra["gathered_elements"] = shipped;
  metrics.extra["paper_units"] = paper_units;
  metrics.extra["var_limit"] = vc.var_limit;
  metrics.extra["moves"] = perturbed.moves;

  nlohmann::json stat_doc = nlohmann::json::array();
  for (const auto& stat : stats)
  {
    stat_doc.push_back(variance::ToJson(stat));
  }
  nlohmann::json global_doc = nlohmann::json::array();
  for (const auto& g : variance::GlobalStats(labels, stats))
  {
    global_doc.push_back(variance::ToJson(g));
  }
  out.result = {{"algorithm", "variance"},
                {"points", data.Size()},
                {"var_limit", vc.var_limit},
                {"criterion", variance::ToString(vc.criterion)},
                {"subclusters", std::move(stat_doc)},
                {"labels", labels.label_of},
                {"clusters_before_perturbation", merged.cluster_count},
                {"clusters", labels.cluster_count},
                {"global", std::move(global_doc)},
                {"moves", perturbed.moves},
                {"total_sse", variance::TotalSse(labels, stats)}};
  return out;
}

JobOutput RunApriori(const JobSpec& spec, const Topology& topology)
{
  const auto& cfg = spec.config;
  const apriori::TransactionDb db = LoadBaskets(spec);
  const std::vector<apriori::TransactionDb> sites = SplitBaskets(spec, db);
  const std::size_t k = cfg.at("k").get<std::size_t>();
  const std::uint64_t min_count =
      Has(cfg, "min_count") ? cfg.at("min_count").get<std::uint64_t>()
                            : apriori::AbsoluteSupport(cfg.at("min_support").get<double>(), db.Size());
  // A single site coordinates through a separate node.
  const NodeId coordinator = topology.NodeCount() > 1 ? topology.Root() : spec.sites;

  Transport transport;
  const apriori::DistributedResult top =
      apriori::GlobalTopDown(sites, k, min_count, transport, coordinator);

  JobOutput out;
  out.trace = transport.Trace();
  JobMetrics& metrics = out.metrics;
  metrics.sites = spec.sites;
  metrics.count = top.itemsets.size();
  metrics.passes = top.trace.PassCount();
  Summarize(out.trace, metrics);
  metrics.extra["min_count"] = min_count;
  metrics.extra["candidates"] = top.trace.CandidateCount();

  nlohmann::json itemsets = nlohmann::json::array();
  for (const auto& set : top.itemsets)
  {
    itemsets.push_back(set);
  }
  out.result = {{"algorithm", "apriori"},
                {"transactions", db.Size()},
                {"items", db.ItemCount()},
                {"k", k},
                {"min_count", min_count},
                {"itemsets", std::move(itemsets)},
                {"passes", top.trace.ToJson()}};
  if (cfg.value("baseline", true))
  {
    // The baseline runs on its own transport so the job trace shows the
    // top-down protocol only.
    Transport side;
    const apriori::DistributedResult base =
        apriori::ClassicalBaseline(sites, k, min_count, side, coordinator);
    metrics.extra["baseline_passes"] = base.trace.PassCount();
    metrics.extra["baseline_candidates"] = base.trace.CandidateCount();
    metrics.extra["baseline_agrees"] = base.itemsets == top.itemsets;
    if (base.trace.CandidateCount() > 0)
    {
      metrics.extra["candidate_ratio"] = apriori::CandidateRatio(top.trace, base.trace);
    }
    out.result["baseline"] = {{"passes", base.trace.PassCount()},
                              {"candidates", base.trace.CandidateCount()},
                              {"agrees", base.itemsets == top.itemsets}};
  }
  return out;
}
}  // namespace

JobOutput RunJob(const JobSpec& spec)
{
  spec.Validate();
  const auto start = std::chrono::steady_clock::now();
  const Topology topology = Topology::Build(spec.sites, spec.topology, spec.group_size);
  JobOutput out;
  switch (spec.algorithm)
  {
    case Algorithm::Ddbc:
      out = RunDdbc(spec, topology);
      break;
    case Algorithm::Variance:
      out = RunVariance(spec, topology);
      break;
    case Algorithm::Apriori:
      out = RunApriori(spec, topology);
      break;
  }
  out.result["id"] = spec.id;
  out.result["seed"] = spec.seed;
  out.result["sites"] = spec.sites;
  out.result["topology"] = topology.ToJson();
  out.metrics.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

const std::vector<std::string>& ReportRow::Columns()
{
  static const std::vector<std::string> columns{"experiment_id", "algorithm", "m",
                                                "parameters",    "count",     "quality_p",
                                                "passes",        "elements",  "speedup"};
  return columns;
}

std::vector<std::string> ReportRow::Cells() const
{
  return {experiment_id,
          algorithm,
          std::to_string(m),
          parameters,
          std::to_string(count),
          quality_p ? FormatDouble(*quality_p) : std::string{},
          std::to_string(passes),
          std::to_string(elements),
          speedup ? FormatDouble(*speedup) : std::string{}};
}

std::string ParameterString(const JobSpec& spec)
{
  nlohmann::json params = spec.config;
  params.erase("kind");
  params["partition"] = spec.partition;
  params["seed"] = spec.seed;
  params["topology"] = ToString(spec.topology);
  if (spec.group_size)
  {
    params["p"] = *spec.group_size;
  }
  return params.dump();
}

ReportRow MakeReportRow(const JobSpec& spec, const JobMetrics& metrics)
{
  ReportRow row;
  row.experiment_id = spec.id;
  row.algorithm = ToString(spec.algorithm);
  row.m = spec.sites;
  row.parameters = ParameterString(spec);
  row.count = metrics.count;
  row.quality_p = metrics.quality_p;
  row.passes = metrics.passes;
  row.elements = metrics.elements;
  row.speedup = metrics.speedup;
  return row;
}

std::string CsvLine(const std::vector<std::string>& cells)
{
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i)
  {
    if (i > 0)
    {
      line += ',';
    }
    const std::string& cell = cells[i];
    if (cell.find_first_of(",\"\n\r") == std::string::npos)
    {
      line += cell;
      continue;
    }
    line += '"';
    for (char c : cell)
    {
      if (c == '"')
      {
        line += '"';
      }
      line += c;
    }
    line += '"';
  }
  return line;
}

void WriteFileAtomically(const std::string& path, const std::string& contents)
{
  const fs::path target(path);
  if (target.has_parent_path())
  {
    fs::create_directories(target.parent_path());
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
    {
      throw std::runtime_error("cannot write " + tmp.string());
    }
    out << contents;
    if (!out.flush())
    {
      throw std::runtime_error("cannot write " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

void AppendCsvRow(const std::string& path, const std::vector<std::string>& header,
                  const std::vector<std::string>& cells)
{
  std::string contents;
  if (fs::exists(path))
  {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    contents = buffer.str();
    std::string first = contents.substr(0, contents.find('\n'));
    if (first != CsvLine(header))
    {
      throw std::runtime_error(path + " has a different header");
    }
    if (!contents.empty() && contents.back() != '\n')
    {
      contents += '\n';
    }
  }
  else
  {
    contents = CsvLine(header) + "\n";
  }
  contents += CsvLine(cells) + "\n";
  WriteFileAtomically(path, contents);
}

void WriteJobOutputs(const JobSpec& spec, const JobOutput& output)
{
  if (!spec.output.result.empty())
  {
    WriteFileAtomically(spec.output.result, output.result.dump(2) + "\n");
  }
  if (!spec.output.trace.empty())
  {
    WriteFileAtomically(spec.output.trace, output.trace.ToJson().dump(2) + "\n");
  }
  if (!spec.output.report.empty())
  {
    AppendCsvRow(spec.output.report, ReportRow::Columns(),
                 MakeReportRow(spec, output.metrics).Cells());
  }
  if (!spec.output.metrics.empty())
  {
    const JobMetrics& m = output.metrics;
    AppendCsvRow(spec.output.metrics,
                 {"experiment_id", "algorithm", "m", "count", "passes", "elements", "bytes",
                  "wall_ms"},
                 {spec.id, ToString(spec.algorithm), std::to_string(m.sites),
                  std::to_string(m.count), std::to_string(m.passes), std::to_string(m.elements),
                  std::to_string(m.bytes), FormatDouble(m.wall_ms)});
  }
}

}  // namespace gridmine::sim
