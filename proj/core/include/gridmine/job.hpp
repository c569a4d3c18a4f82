#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridmine/topology.hpp"
#include "gridmine/transport.hpp"

namespace gridmine::sim
{
enum class Algorithm { Ddbc, Variance, Apriori };

Algorithm AlgorithmFromString(const std::string& name);
std::string ToString(Algorithm algorithm);

struct OutputPaths
{
  std::string result;
  std::string trace;
  /// Fixed-column report, one row appended per job.
  std::string report;
  /// Per-job metrics row including wall time.
  std::string metrics;
};

/// A complete job description. The dataset is either a file or an inline
/// generator spec; relative paths are resolved against `base_dir`.
struct JobSpec
{
  std::string id;
  Algorithm algorithm = Algorithm::Ddbc;
  std::uint64_t seed = 42;
  nlohmann::json dataset = nlohmann::json::object();
  std::size_t sites = 1;
  /// "round_robin" or "block" (contiguous slices in input order).
  std::string partition = "round_robin";
  TopologyKind topology = TopologyKind::BinaryTree;
  std::optional<std::size_t> group_size;
  /// Must carry "kind" equal to the algorithm name.
  nlohmann::json config = nlohmann::json::object();
  OutputPaths output;
  std::string base_dir = ".";

  /// Checks that the config kind matches the algorithm and that the
  /// parameters are usable. Throws std::invalid_argument.
  void Validate() const;

  nlohmann::json ToJson() const;
};

/// `seed_override` wins over a seed in the document.
JobSpec JobSpecFromJson(const nlohmann::json& doc, const std::string& base_dir = ".",
                        std::optional<std::uint64_t> seed_override = std::nullopt);
JobSpec LoadJobSpec(const std::string& path,
                    std::optional<std::uint64_t> seed_override = std::nullopt);

struct JobMetrics
{
  std::size_t sites = 0;
  /// Global clusters, or frequent itemsets for apriori.
  std::uint64_t count = 0;
  std::optional<double> quality_p;
  std::uint64_t passes = 0;
  std::uint64_t elements = 0;
  std::uint64_t bytes = 0;
  std::optional<double> speedup;
  double wall_ms = 0.0;
  /// Algorithm specific extras.
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json ToJson() const;
};

struct JobOutput
{
  nlohmann::json result;
  MessageTrace trace;
  JobMetrics metrics;
};

/// Local phase on every leaf, then aggregation over the topology. Nothing is
/// written to disk.
JobOutput RunJob(const JobSpec& spec);

struct ReportRow
{
  std::string experiment_id;
  std::string algorithm;
  std::size_t m = 0;
  std::string parameters;
  std::uint64_t count = 0;
  std::optional<double> quality_p;
  std::uint64_t passes = 0;
  std::uint64_t elements = 0;
  std::optional<double> speedup;

  static const std::vector<std::string>& Columns();
  std::vector<std::string> Cells() const;
};

ReportRow MakeReportRow(const JobSpec& spec, const JobMetrics& metrics);

/// Parameters as a compact, key-sorted single line.
std::string ParameterString(const JobSpec& spec);

std::string CsvLine(const std::vector<std::string>& cells);

/// Appends a row, writing a header first when the file is new. The new
/// contents go to a temporary file that is renamed over the target.
void AppendCsvRow(const std::string& path, const std::vector<std::string>& header,
                  const std::vector<std::string>& cells);

/// Writes result and trace JSON, then appends the report and metrics rows.
/// Each file is replaced by rename, so a failure leaves no partial file.
void WriteJobOutputs(const JobSpec& spec, const JobOutput& output);

/// Whole-file write through a temporary name and rename.
void WriteFileAtomically(const std::string& path, const std::string& contents);

}  // namespace gridmine::sim
