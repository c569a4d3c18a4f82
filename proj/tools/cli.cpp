#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridmine/apriori.hpp"
#include "gridmine/core_data.hpp"
#include "gridmine/job.hpp"
#include "gridmine/km_daemon.hpp"

namespace gridmine::cli
{
namespace
{
namespace fs = std::filesystem;

nlohmann::json ReadJson(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw std::runtime_error("cannot open " + path);
  }
  try
  {
    return nlohmann::json::parse(in);
  }
  catch (const nlohmann::json::exception& e)
  {
    throw std::invalid_argument(path + " is not valid JSON: " + e.what());
  }
}

std::optional<std::uint64_t> SeedIn(const nlohmann::json& doc)
{
  if (doc.is_object() && doc.contains("seed") && !doc.at("seed").is_null())
  {
    return doc.at("seed").get<std::uint64_t>();
  }
  return std::nullopt;
}

void PrintError(std::ostream& out, const std::string& code, const std::string& message)
{
  out << nlohmann::json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

// gen -----------------------------------------------------------------------

struct GenArgs
{
  std::string spec;
  std::string out;
  std::string kind = "auto";
  std::optional<std::uint64_t> seed;
};

int RunGen(const GenArgs& args, std::ostream& out)
{
  nlohmann::json doc = ReadJson(args.spec);
  std::string kind = args.kind;
  if (kind == "auto")
  {
    if (doc.contains("components"))
    {
      kind = "mixture";
    }
    else if (doc.contains("transactions"))
    {
      kind = "baskets";
    }
    else
    {
      throw std::invalid_argument("cannot tell the spec kind; pass --kind");
    }
  }
  const std::uint64_t seed = ResolveSeed(args.seed, SeedIn(doc));
  std::ostringstream text;
  std::uint64_t rows = 0;
  if (kind == "mixture")
  {
    GaussianMixtureSpec spec = GaussianMixtureSpecFromJson(doc);
    spec.seed = seed;
    const Dataset data = GenerateGaussianMixture(spec);
    WriteCsv(data, text);
    rows = data.Size();
  }
  else if (kind == "baskets")
  {
    apriori::BasketSpec spec = apriori::BasketSpecFromJson(doc);
    spec.seed = seed;
    const apriori::TransactionDb db = apriori::GenerateBaskets(spec);
    apriori::WriteTransactions(db, text);
    rows = db.Size();
  }
  else
  {
    throw std::invalid_argument("unknown spec kind: " + kind);
  }
  sim::WriteFileAtomically(args.out, text.str());
  out << nlohmann::json{{"kind", kind}, {"out", args.out}, {"rows", rows}, {"seed", seed}}.dump()
      << "\n";
  return 0;
}

// run -----------------------------------------------------------------------

struct RunArgs
{
  std::string job;
  std::optional<std::uint64_t> seed;
  std::string result;
  std::string trace;
  std::string report;
  std::string metrics;
  bool oracle = false;
  bool no_oracle = false;
};

void CheckWritten(const std::string& path, bool json)
{
  if (path.empty())
  {
    return;
  }
  std::ifstream in(path);
  if (!in)
  {
    throw std::runtime_error("output " + path + " was not written");
  }
  if (json)
  {
    if (!nlohmann::json::accept(in))
    {
      throw std::runtime_error("output " + path + " is not valid JSON");
    }
  }
}

int RunRun(const RunArgs& args, std::ostream& out)
{
  const nlohmann::json doc = ReadJson(args.job);
  const std::uint64_t seed = ResolveSeed(args.seed, SeedIn(doc));
  const fs::path parent = fs::path(args.job).parent_path();
  sim::JobSpec spec = sim::JobSpecFromJson(doc, parent.empty() ? "." : parent.string(), seed);
  if (!args.result.empty())
  {
    spec.output.result = args.result;
  }
  if (!args.trace.empty())
  {
    spec.output.trace = args.trace;
  }
  if (!args.report.empty())
  {
    spec.output.report = args.report;
  }
  if (!args.metrics.empty())
  {
    spec.output.metrics = args.metrics;
  }
  if (args.oracle)
  {
    spec.config["oracle"] = true;
  }
  if (args.no_oracle)
  {
    spec.config["oracle"] = false;
  }
  spec.Validate();
  const sim::JobOutput output = sim::RunJob(spec);
  sim::WriteJobOutputs(spec, output);
  CheckWritten(spec.output.result, true);
  CheckWritten(spec.output.trace, true);
  CheckWritten(spec.output.report, false);
  CheckWritten(spec.output.metrics, false);
  out << nlohmann::json{{"id", spec.id},
                        {"algorithm", sim::ToString(spec.algorithm)},
                        {"seed", spec.seed},
                        {"metrics", output.metrics.ToJson()}}
             .dump()
      << "\n";
  return 0;
}

// km ------------------------------------------------------------------------

struct KmArgs
{
  std::string state;
  std::string sites;
  std::optional<std::uint64_t> concept_id;
  std::string task;
  std::string data_type;
  std::string site;
  std::optional<std::uint64_t> id;
  std::string entry;
  std::string name;
  std::optional<std::uint64_t> parent;
  std::string trace;
};

std::vector<std::string> SplitList(const std::string& text)
{
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ','))
  {
    if (!part.empty())
    {
      out.push_back(part);
    }
  }
  return out;
}

int RunKm(const std::string& sub, const KmArgs& args, std::ostream& out)
{
  nlohmann::json request;
  if (sub == "init")
  {
    request = {{"op", "INIT"}, {"sites", SplitList(args.sites)}};
  }
  else if (sub == "stop")
  {
    request = {{"op", "STOP"}};
  }
  else if (sub == "find")
  {
    request = {{"op", "FIND"}};
    if (args.concept_id)
    {
      request["concept"] = *args.concept_id;
    }
    if (!args.task.empty())
    {
      request["task"] = args.task;
    }
    if (!args.data_type.empty())
    {
      request["data_type"] = args.data_type;
    }
  }
  else if (sub == "retrieve")
  {
    request = {{"op", "RETRIEVE"}, {"site", args.site}, {"id", *args.id}};
  }
  else if (sub == "register")
  {
    request = {{"op", "REGISTER"}, {"site", args.site}, {"entry", ReadJson(args.entry)}};
  }
  else
  {
    request = {{"op", "ADD_CONCEPT"}, {"name", args.name}};
    if (args.parent)
    {
      request["parent"] = *args.parent;
    }
  }

  sim::Transport transport;
  km::KmSystem system(km::LoadState(args.state), transport);
  const nlohmann::json reply = system.Handle(request);
  if (!reply.at("ok").get<bool>())
  {
    out << nlohmann::json{{"error", reply.at("error")}}.dump() << "\n";
    return 1;
  }
  km::SaveState(system.State(), args.state);
  if (!args.trace.empty())
  {
    sim::WriteFileAtomically(args.trace, transport.Trace().ToJson().dump(2) + "\n");
  }
  out << reply.at("result").dump() << "\n";
  return 0;
}

// report --------------------------------------------------------------------

struct ReportArgs
{
  std::vector<std::string> inputs;
  std::string out;
};

std::vector<std::string> ReadLines(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw std::runtime_error("cannot open " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
  {
    if (!line.empty())
    {
      lines.push_back(line);
    }
  }
  return lines;
}

int RunReport(const ReportArgs& args, std::ostream& out)
{
  const std::string header = sim::CsvLine(sim::ReportRow::Columns());
  std::string text = header + "\n";
  std::size_t rows = 0;
  for (const std::string& path : args.inputs)
  {
    const std::vector<std::string> lines = ReadLines(path);
    if (lines.empty() || lines.front() != header)
    {
      throw std::invalid_argument(path + " is not a report file");
    }
    for (std::size_t i = 1; i < lines.size(); ++i)
    {
      text += lines[i] + "\n";
      ++rows;
    }
  }
  if (args.out.empty())
  {
    out << text;
  }
  else
  {
    sim::WriteFileAtomically(args.out, text);
    out << nlohmann::json{{"out", args.out}, {"rows", rows}}.dump() << "\n";
  }
  return 0;
}

std::optional<std::uint64_t> ParseSeed(const std::string& text, const std::string& what)
{
  if (text.empty() || !std::all_of(text.begin(), text.end(), ::isdigit))
  {
    throw std::invalid_argument(what + " must be a nonnegative integer, got '" + text + "'");
  }
  try
  {
    return std::stoull(text);
  }
  catch (const std::out_of_range&)
  {
    throw std::invalid_argument(what + " is out of range");
  }
}
}  // namespace

std::uint64_t ResolveSeed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> file)
{
  if (flag)
  {
    return *flag;
  }
  if (file)
  {
    return *file;
  }
  if (const char* env = std::getenv("GRIDMINE_SEED"); env != nullptr && *env != '\0')
  {
    return *ParseSeed(env, "GRIDMINE_SEED");
  }
  return 42;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Distributed data mining on a simulated grid", "gridmine"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a dataset from a JSON spec");
  gen_cmd->add_option("--spec", gen.spec, "Gaussian mixture or basket spec (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output file: CSV for mixtures, one transaction per line for baskets")
      ->required();
  gen_cmd->add_option("--kind", gen.kind, "Spec kind")
      ->check(CLI::IsMember({"auto", "mixture", "baskets"}))
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed (wins over the spec and GRIDMINE_SEED)");

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Run a job and append its report row");
  run_cmd->add_option("--job", run.job, "Job spec (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run.seed, "Random seed (wins over the job file and GRIDMINE_SEED)");
  run_cmd->add_option("--result", run.result, "Result JSON path (overrides the job file)");
  run_cmd->add_option("--trace", run.trace, "Message trace JSON path (overrides the job file)");
  run_cmd->add_option("--report", run.report, "Report CSV to append to (overrides the job file)");
  run_cmd->add_option("--metrics", run.metrics, "Metrics CSV to append to (overrides the job file)");
  auto* oracle = run_cmd->add_flag("--oracle", run.oracle,
                                   "ddbc: compare with centralized DBSCAN and report quality_P");
  run_cmd->add_flag("--no-oracle", run.no_oracle, "ddbc: skip the centralized comparison")
      ->excludes(oracle);

  KmArgs km;
  std::string km_sub;
  CLI::App* km_cmd = app.add_subcommand("km", "Knowledge map daemons");
  km_cmd->require_subcommand(1);
  auto add_km = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = km_cmd->add_subcommand(name, help);
    sub->add_option("--state", km.state, "Directory holding the KM repositories")->required();
    sub->add_option("--trace", km.trace, "Write the message trace of this request (JSON)");
    sub->callback([&km_sub, name] { km_sub = name; });
    return sub;
  };
  add_km("init", "Start the KM daemons")
      ->add_option("--sites", km.sites, "Comma-separated site names; the first hosts the core")
      ->required();
  add_km("stop", "Terminate all KM daemons");
  CLI::App* find_cmd = add_km("find", "Search meta knowledge");
  find_cmd->add_option("--concept", km.concept_id, "Concept id whose subtree is searched (default: all trees)");
  find_cmd->add_option("--task", km.task, "Only entries of this mining task");
  find_cmd->add_option("--data-type", km.data_type, "Only entries of this data type");
  CLI::App* retrieve_cmd = add_km("retrieve", "Fetch a knowledge entry from its site");
  retrieve_cmd->add_option("--site", km.site, "Site holding the entry")->required();
  retrieve_cmd->add_option("--id", km.id, "Knowledge id at that site")->required();
  CLI::App* register_cmd = add_km("register", "Store a knowledge entry at a site");
  register_cmd->add_option("--site", km.site, "Site that stores the entry")->required();
  register_cmd->add_option("--entry", km.entry, "Knowledge entry (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::App* concept_cmd = add_km("add-concept", "Add a concept node");
  concept_cmd->add_option("--name", km.name, "Concept name")->required();
  concept_cmd->add_option("--parent", km.parent, "Parent concept id (omit to start a new tree)");

  ReportArgs report;
  CLI::App* report_cmd = app.add_subcommand("report", "Combine report CSV files");
  report_cmd->add_option("inputs", report.inputs, "Report CSV files")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report.out, "Output CSV (default: stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try
  {
    app.parse(reversed);
  }
  catch (const CLI::ParseError& e)
  {
    return app.exit(e, out, err);
  }

  try
  {
    if (gen_cmd->parsed())
    {
      return RunGen(gen, out);
    }
    if (run_cmd->parsed())
    {
      return RunRun(run, out);
    }
    if (km_cmd->parsed())
    {
      return RunKm(km_sub, km, out);
    }
    return RunReport(report, out);
  }
  catch (const std::invalid_argument& e)
  {
    PrintError(out, "invalid", e.what());
  }
  catch (const nlohmann::json::exception& e)
  {
    PrintError(out, "invalid", e.what());
  }
  catch (const std::exception& e)
  {
    PrintError(out, "failed", e.what());
  }
  err << "gridmine: failed, see the error above\n";
  return 1;
}

}  // namespace gridmine::cli
