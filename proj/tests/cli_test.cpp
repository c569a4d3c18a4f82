#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "gridmine/core_data.hpp"
#include "gridmine/knowledge_map.hpp"
#include "support.hpp"

namespace gridmine::cli
{
namespace
{
namespace fs = std::filesystem;

struct Result
{
  int code = 0;
  std::string out;
  std::string err;

  nlohmann::json Json() const { return nlohmann::json::parse(out); }
};

Result Invoke(const std::vector<std::string>& args)
{
  std::ostringstream out;
  std::ostringstream err;
  Result r;
  r.code = RunCli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string Slurp(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

class Cli : public ::testing::Test
{
protected:
  void SetUp() override
  {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("gridmine_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv("GRIDMINE_SEED");
  }
  void TearDown() override
  {
    unsetenv("GRIDMINE_SEED");
    fs::remove_all(dir_);
  }

  std::string Write(const std::string& name, const nlohmann::json& doc)
  {
    const fs::path path = dir_ / name;
    std::ofstream(path) << doc.dump(2);
    return path.string();
  }
  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  std::string MixtureSpec() { return Write("mixture.json", ToJson(testing::SixBlobSpec(1))); }
  std::string BasketSpec()
  {
    return Write("baskets.json", {{"transactions", 1000},
                                  {"items", 16},
                                  {"patterns", {{{"items", {1, 3, 5, 7}}, {"probability", 0.5}}}},
                                  {"max_noise_items", 3}});
  }

  fs::path dir_;
};

// ---------------------------------------------------------------- gen

TEST_F(Cli, GenMixture)
{
  const Result r = Invoke({"gen", "--spec", MixtureSpec(), "--out", P("points.csv"), "--seed", "7"});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.Json()["rows"], 322);
  EXPECT_EQ(r.Json()["kind"], "mixture");
  EXPECT_EQ(LoadCsv(P("points.csv")).Size(), 322u);

  const std::string first = Slurp(P("points.csv"));
  ASSERT_EQ(Invoke({"gen", "--spec", MixtureSpec(), "--out", P("points.csv"), "--seed", "7"}).code, 0);
  EXPECT_EQ(Slurp(P("points.csv")), first);
  ASSERT_EQ(Invoke({"gen", "--spec", MixtureSpec(), "--out", P("points.csv"), "--seed", "8"}).code, 0);
  EXPECT_NE(Slurp(P("points.csv")), first);
}

TEST_F(Cli, GenBaskets)
{
  const Result r = Invoke({"gen", "--spec", BasketSpec(), "--out", P("b.txt")});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.Json()["kind"], "baskets");
  const std::string text = Slurp(P("b.txt"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1000);
}

TEST_F(Cli, SeedPrecedence)
{
  nlohmann::json spec = ToJson(testing::SixBlobSpec(1));
  spec.erase("seed");
  const std::string no_seed = Write("noseed.json", spec);
  EXPECT_EQ(Invoke({"gen", "--spec", no_seed, "--out", P("a.csv")}).Json()["seed"], 42);
  setenv("GRIDMINE_SEED", "11", 1);
  EXPECT_EQ(Invoke({"gen", "--spec", no_seed, "--out", P("a.csv")}).Json()["seed"], 11);
  spec["seed"] = 5;
  const std::string with_seed = Write("seed.json", spec);
  EXPECT_EQ(Invoke({"gen", "--spec", with_seed, "--out", P("a.csv")}).Json()["seed"], 5);
  EXPECT_EQ(Invoke({"gen", "--spec", with_seed, "--out", P("a.csv"), "--seed", "3"}).Json()["seed"], 3);
  setenv("GRIDMINE_SEED", "abc", 1);
  EXPECT_EQ(Invoke({"gen", "--spec", no_seed, "--out", P("a.csv")}).code, 1);
}

// ---------------------------------------------------------------- run

nlohmann::json DdbcJob()
{
  return {{"id", "cli-ddbc"},
          {"algorithm", "ddbc"},
          {"seed", 1},
          {"dataset", {{"generate", ToJson(testing::SixBlobSpec(1))}}},
          {"partitioning", {{"sites", 2}}},
          {"topology", {{"kind", "binary"}}},
          {"config",
           {{"kind", "ddbc"},
            {"eps", testing::kSixBlobLocalEps},
            {"minpts", testing::kSixBlobMinpts},
            {"oracle_eps", testing::kSixBlobCentralEps},
            {"oracle", false}}},
          {"output", {{"result", "out/result.json"}, {"trace", "out/trace.json"},
                      {"report", "out/report.csv"}}}};
}

TEST_F(Cli, RunDdbcWithOracle)
{
  const std::string job = Write("job.json", DdbcJob());
  const Result r = Invoke({"run", "--job", job, "--oracle"});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const auto metrics = r.Json()["metrics"];
  EXPECT_EQ(metrics["count"], 6);
  EXPECT_GE(metrics["quality_p"].get<double>(), 0.9);
  EXPECT_TRUE(fs::exists(P("out/result.json")));
  EXPECT_TRUE(fs::exists(P("out/trace.json")));
  const std::string report = Slurp(P("out/report.csv"));
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 2);

  const Result plain = Invoke({"run", "--job", job});
  EXPECT_TRUE(plain.Json()["metrics"]["quality_p"].is_null());
}

TEST_F(Cli, RunApriori)
{
  const std::string job = Write("job.json", {{"id", "cli-apriori"},
                                             {"algorithm", "apriori"},
                                             {"seed", 2},
                                             {"dataset",
                                              {{"generate",
                                                {{"transactions", 400},
                                                 {"items", 16},
                                                 {"patterns",
                                                  {{{"items", {1, 3, 5, 7}}, {"probability", 0.5}}}},
                                                 {"max_noise_items", 3}}}}},
                                             {"partitioning", {{"sites", 2}}},
                                             {"topology", {{"kind", "star"}}},
                                             {"config", {{"kind", "apriori"}, {"k", 4}, {"min_support", 0.3}}}});
  const Result r = Invoke({"run", "--job", job, "--result", P("r.json")});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.Json()["metrics"]["passes"], 2);
  EXPECT_EQ(nlohmann::json::parse(Slurp(P("r.json")))["algorithm"], "apriori");
}

TEST_F(Cli, InvalidJobsFail)
{
  nlohmann::json doc = DdbcJob();
  doc["topology"] = {{"kind", "tree_p"}};
  Result r = Invoke({"run", "--job", Write("bad.json", doc)});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.Json()["error"]["code"], "invalid");
  EXPECT_FALSE(fs::exists(P("out/result.json")));

  doc = DdbcJob();
  doc["config"]["kind"] = "apriori";
  EXPECT_NE(Invoke({"run", "--job", Write("bad2.json", doc)}).code, 0);

  std::ofstream(P("broken.json")) << "{ not json";
  EXPECT_NE(Invoke({"run", "--job", P("broken.json")}).code, 0);
  EXPECT_NE(Invoke({"run", "--job", P("missing.json")}).code, 0);
  EXPECT_NE(Invoke({"run", "--job", Write("x.json", DdbcJob()), "--oracle", "--no-oracle"}).code, 0);
}

// ---------------------------------------------------------------- km

TEST_F(Cli, KmFlow)
{
  const std::string state = P("km");
  EXPECT_NE(Invoke({"km", "find", "--state", state}).code, 0);
  ASSERT_EQ(Invoke({"km", "init", "--state", state, "--sites", "a,b,c"}).code, 0);
  const Result root = Invoke({"km", "add-concept", "--state", state, "--name", "meteorology"});
  ASSERT_EQ(root.code, 0) << root.out;
  const int concept_id = root.Json()["id"];

  km::ClusterRepresentative rep(std::vector<km::FieldSpec>{{"Id", "int"}});
  km::ClusterRecord record;
  record.values = {{"Id", 0}};
  record.clustering = {"b", "clusters.csv", 0};
  rep.AddCluster(record);
  km::MetaKnowledge meta;
  meta.concept_id = concept_id;
  meta.task = "clustering";
  meta.method = "DBDC-local";
  meta.data_type = "Numerical";
  meta.instances = 161;
  meta.dimensions = 2;
  const nlohmann::json entry = km::ToJson(km::KnowledgeEntry{meta, rep});
  const Result reg =
      Invoke({"km", "register", "--state", state, "--site", "b", "--entry", Write("entry.json", entry)});
  ASSERT_EQ(reg.code, 0) << reg.out;
  const int id = reg.Json()["id"];

  const Result hits = Invoke({"km", "find", "--state", state, "--task", "clustering"});
  ASSERT_EQ(hits.code, 0) << hits.out;
  ASSERT_EQ(hits.Json().size(), 1u);
  EXPECT_EQ(hits.Json()[0]["site"], "b");

  const Result got = Invoke({"km", "retrieve", "--state", state, "--site", "b", "--id",
                          std::to_string(id), "--trace", P("trace.json")});
  ASSERT_EQ(got.code, 0) << got.out;
  EXPECT_EQ(got.Json()["meta"]["instances"], 161);
  EXPECT_EQ(nlohmann::json::parse(Slurp(P("trace.json"))).size(), 4u);

  const Result missing =
      Invoke({"km", "retrieve", "--state", state, "--site", "b", "--id", "99"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(missing.Json()["error"]["code"], "not_found");

  EXPECT_NE(Invoke({"km", "init", "--state", state, "--sites", "x,y"}).code, 0);
  ASSERT_EQ(Invoke({"km", "stop", "--state", state}).code, 0);
  EXPECT_NE(Invoke({"km", "find", "--state", state}).code, 0);
  // Stopped daemons restart over the same repositories.
  ASSERT_EQ(Invoke({"km", "init", "--state", state, "--sites", "a,b,c"}).code, 0);
  EXPECT_EQ(Invoke({"km", "find", "--state", state}).Json().size(), 1u);
}

// ---------------------------------------------------------------- report and help

TEST_F(Cli, ReportCombinesFiles)
{
  const std::string job = Write("job.json", DdbcJob());
  ASSERT_EQ(Invoke({"run", "--job", job, "--report", P("r1.csv")}).code, 0);
  ASSERT_EQ(Invoke({"run", "--job", job, "--report", P("r2.csv")}).code, 0);
  const Result r = Invoke({"report", P("r1.csv"), P("r2.csv")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
  std::ofstream(P("junk.csv")) << "a,b\n";
  EXPECT_NE(Invoke({"report", P("junk.csv")}).code, 0);
}

TEST_F(Cli, HelpAndUsage)
{
  const Result help = Invoke({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("gen"), std::string::npos);
  EXPECT_NE(help.out.find("km"), std::string::npos);
  EXPECT_EQ(Invoke({"run", "--help"}).code, 0);
  EXPECT_NE(Invoke({}).code, 0);
  EXPECT_NE(Invoke({"frobnicate"}).code, 0);
}

}  // namespace
}  // namespace gridmine::cli
