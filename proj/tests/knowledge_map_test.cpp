#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "gridmine/knowledge_map.hpp"

namespace gridmine::km
{
namespace
{
Rule MakeRule(RuleId id, std::vector<std::string> if_items, std::vector<std::string> then_items)
{
  Rule rule;
  rule.id = id;
  rule.if_items = std::move(if_items);
  rule.then_items = std::move(then_items);
  rule.support = 0.1;
  rule.confidence = 0.8;
  rule.creation = "apriori";
  return rule;
}

std::vector<RuleId> ScanRules(const RuleRepresentative& rep, const std::vector<std::string>& items)
{
  std::vector<RuleId> out;
  for (const auto& [id, rule] : rep.Rules())
  {
    const auto have = rule.Items();
    const bool all = std::all_of(items.begin(), items.end(), [&](const std::string& item) {
      return std::find(have.begin(), have.end(), item) != have.end();
    });
    if (all)
    {
      out.push_back(id);
    }
  }
  return out;
}

// cloud appears in rules 25, 171 and 360; pressure in 20 and 171.
RuleRepresentative WorkedExample()
{
  RuleRepresentative rep;
  rep.AddRule(MakeRule(20, {"pressure"}, {"wind"}));
  rep.AddRule(MakeRule(25, {"cloud"}, {"rain"}));
  rep.AddRule(MakeRule(171, {"cloud", "pressure"}, {"storm"}));
  rep.AddRule(MakeRule(360, {"humidity"}, {"cloud"}));
  return rep;
}

ClusterRepresentative Fig12Clusters()
{
  ClusterRepresentative rep({{"Id", "int"},
                             {"Counts", "int"},
                             {"Centres", "double[3]"},
                             {"Variances", "double[3][3]"}});
  ClusterRecord record;
  record.id = 0;
  record.values = {{"Id", 0},
                   {"Counts", 161},
                   {"Centres", {0.2, 0.4, 0.1}},
                   {"Variances", {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}};
  record.creation = CreationType::Clustering;
  record.clustering = {"node1.grid", "clusters.csv", 0};
  rep.AddCluster(record);
  return rep;
}

ClusterRepresentative IdOnly()
{
  return ClusterRepresentative(std::vector<FieldSpec>{{"Id", "int"}});
}

MetaKnowledge Meta(ConceptId concept_id, std::string task, std::string data_type = "Numerical")
{
  MetaKnowledge meta;
  meta.concept_id = concept_id;
  meta.task = std::move(task);
  meta.method = "DBDC-local";
  meta.data_type = std::move(data_type);
  meta.instances = 161;
  meta.dimensions = 2;
  meta.description = "test entry";
  return meta;
}

struct Storms
{
  CoreKM core;
  ConceptId meteorology = 0;
  ConceptId storm = 0;
  ConceptId cyclone = 0;
  ConceptId tornado = 0;
  ConceptId climate = 0;

  Storms()
  {
    meteorology = core.AddConcept(std::nullopt, "meteorology");
    storm = core.AddConcept(meteorology, "storm");
    cyclone = core.AddConcept(storm, "tropical cyclone");
    tornado = core.AddConcept(storm, "tornado");
    climate = core.AddConcept(meteorology, "climate");
  }
};

// ---------------------------------------------------------------- concepts

TEST(Concepts, ThreeLevelPath)
{
  Storms s;
  const auto& concepts = s.core.Concepts();
  EXPECT_EQ(concepts.Node(s.cyclone).parent, s.storm);
  EXPECT_EQ(concepts.Node(s.storm).parent, s.meteorology);
  EXPECT_FALSE(concepts.Node(s.meteorology).parent.has_value());
  EXPECT_EQ(concepts.RootOf(s.cyclone), s.meteorology);
  EXPECT_EQ(concepts.Domain(s.cyclone), "meteorology");
  EXPECT_TRUE(concepts.InSubtree(s.cyclone, s.meteorology));
  EXPECT_FALSE(concepts.InSubtree(s.climate, s.storm));
  EXPECT_EQ(concepts.Subtree(s.storm), (std::vector<ConceptId>{s.storm, s.cyclone, s.tornado}));
  EXPECT_NO_THROW(concepts.Validate());
}

TEST(Concepts, DuplicateNamesGetDistinctIds)
{
  Storms s;
  const ConceptId again = s.core.AddConcept(s.storm, "tornado");
  EXPECT_NE(again, s.tornado);
  EXPECT_EQ(s.core.Concepts().FindByName("tornado"), (std::vector<ConceptId>{s.tornado, again}));
}

TEST(Concepts, UnknownParentThrows)
{
  Storms s;
  EXPECT_THROW(s.core.AddConcept(999, "hail"), std::invalid_argument);
  EXPECT_THROW(s.core.AddConcept(s.storm, ""), std::invalid_argument);
}

TEST(Concepts, IdsUniqueAcrossTrees)
{
  Storms s;
  const ConceptId geology = s.core.AddConcept(std::nullopt, "geology");
  const ConceptId quake = s.core.AddConcept(geology, "earthquake");
  std::set<ConceptId> ids{s.meteorology, s.storm, s.cyclone, s.tornado, s.climate, geology, quake};
  EXPECT_EQ(ids.size(), 7u);
  EXPECT_EQ(s.core.Concepts().Roots(), (std::vector<ConceptId>{s.meteorology, geology}));
}

TEST(Concepts, OnlyEmptyLeavesCanBeDeleted)
{
  Storms s;
  LocalKM local("a");
  EXPECT_THROW(s.core.DeleteConcept(s.storm), std::invalid_argument);
  RegisterKnowledge(local, {Meta(s.tornado, "clustering"), Fig12Clusters()}, s.core);
  EXPECT_THROW(s.core.DeleteConcept(s.tornado), std::invalid_argument);
  s.core.DeleteConcept(s.climate);
  EXPECT_FALSE(s.core.Concepts().Contains(s.climate));
  // Ids are never reused.
  EXPECT_GT(s.core.AddConcept(s.meteorology, "climate"), s.climate);
}

TEST(Concepts, JsonRoundTrip)
{
  Storms s;
  const auto back = ConceptRepository::FromJson(s.core.Concepts().ToJson());
  EXPECT_EQ(back, s.core.Concepts());
}

// ---------------------------------------------------------------- rules

TEST(RuleIndex, ReflectsIncidences)
{
  RuleRepresentative rep;
  rep.AddRule(MakeRule(1, {"cloud"}, {"rain"}));
  rep.AddRule(MakeRule(2, {"cloud", "pressure"}, {"storm"}));
  rep.AddRule(MakeRule(3, {"pressure"}, {"cloud"}));
  EXPECT_EQ(rep.Index(), BuildIndex(rep.Rules()));
  EXPECT_EQ(rep.Index().at("cloud"), (std::vector<RuleId>{1, 2, 3}));
  EXPECT_EQ(rep.Index().at("pressure"), (std::vector<RuleId>{2, 3}));
  EXPECT_NO_THROW(rep.Validate());
}

TEST(RuleIndex, WorkedExample)
{
  const RuleRepresentative rep = WorkedExample();
  EXPECT_EQ(rep.Lookup({"cloud"}), (std::vector<RuleId>{25, 171, 360}));
  EXPECT_EQ(rep.Lookup({"cloud", "pressure"}), (std::vector<RuleId>{171}));
  EXPECT_EQ(rep.Lookup({"pressure", "cloud"}), (std::vector<RuleId>{171}));
}

TEST(RuleIndex, UnknownItemGivesEmptyResult)
{
  EXPECT_TRUE(WorkedExample().Lookup({"cloud", "snow"}).empty());
  EXPECT_THROW(WorkedExample().Lookup({}), std::invalid_argument);
}

TEST(RuleIndex, RuleErrors)
{
  RuleRepresentative rep = WorkedExample();
  EXPECT_THROW(rep.AddRule(MakeRule(25, {"x"}, {"y"})), std::invalid_argument);
  EXPECT_THROW(rep.AddRule(MakeRule(99, {}, {})), std::invalid_argument);
  EXPECT_THROW(rep.RemoveRule(1234), std::invalid_argument);
}

TEST(RuleIndex, CorruptStoredIndexFailsValidation)
{
  nlohmann::json doc = WorkedExample().ToJson();
  doc["index"]["cloud"] = {25, 360};
  EXPECT_THROW(RuleRepresentative::FromJson(doc).Validate(), std::invalid_argument);
  doc["index"]["cloud"] = {171, 25, 360};
  EXPECT_THROW(RuleRepresentative::FromJson(doc).Validate(), std::invalid_argument);
}

RuleRepresentative RandomTable(std::mt19937_64& rng, std::size_t rules, std::size_t vocabulary)
{
  RuleRepresentative rep;
  std::uniform_int_distribution<std::size_t> item(0, vocabulary - 1);
  std::uniform_int_distribution<int> width(1, 4);
  std::set<RuleId> used;
  while (used.size() < rules)
  {
    used.insert(rng() % (rules * 10));
  }
  for (RuleId id : used)
  {
    std::vector<std::string> lhs;
    std::vector<std::string> rhs;
    for (int i = width(rng); i > 0; --i)
    {
      lhs.push_back("i" + std::to_string(item(rng)));
    }
    rhs.push_back("i" + std::to_string(item(rng)));
    rep.AddRule(MakeRule(id, lhs, rhs));
  }
  return rep;
}

TEST(RuleIndex, LookupMatchesScanOnRandomTables)
{
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial)
  {
    const RuleRepresentative rep = RandomTable(rng, 5 + rng() % 60, 4 + rng() % 12);
    for (int q = 0; q < 5; ++q)
    {
      std::vector<std::string> items;
      for (int i = 1 + static_cast<int>(rng() % 3); i > 0; --i)
      {
        items.push_back("i" + std::to_string(rng() % 16));
      }
      const auto expected = ScanRules(rep, items);
      EXPECT_EQ(rep.Lookup(items), expected);
      std::reverse(items.begin(), items.end());
      EXPECT_EQ(rep.Lookup(items), expected);
    }
  }
}

TEST(RuleIndex, StaysConsistentUnderAddAndRemove)
{
  std::mt19937_64 rng(11);
  RuleRepresentative rep = RandomTable(rng, 40, 8);
  for (int step = 0; step < 300; ++step)
  {
    if (rng() % 2 == 0 && !rep.Rules().empty())
    {
      auto it = rep.Rules().begin();
      std::advance(it, static_cast<std::ptrdiff_t>(rng() % rep.Rules().size()));
      rep.RemoveRule(it->first);
    }
    else
    {
      const RuleId id = 10000 + static_cast<RuleId>(step);
      rep.AddRule(MakeRule(id, {"i" + std::to_string(rng() % 8)}, {"i" + std::to_string(rng() % 8)}));
    }
    ASSERT_EQ(rep.Index(), BuildIndex(rep.Rules())) << "step " << step;
  }
  EXPECT_NO_THROW(rep.Validate());
}

TEST(RuleIndex, LookupCostFollowsShortestList)
{
  // One rare item and one very common one.
  RuleRepresentative rep;
  for (RuleId id = 1; id <= 20000; ++id)
  {
    std::vector<std::string> lhs{"common"};
    if (id % 1000 == 0)
    {
      lhs.push_back("rare");
    }
    rep.AddRule(MakeRule(id, lhs, {"x"}));
  }
  std::size_t comparisons = 0;
  const auto hits = rep.Lookup({"common", "rare"}, &comparisons);
  EXPECT_EQ(hits.size(), 20u);
  const double shortest = 20.0;
  const double longest = 20000.0;
  // Galloping costs about two logarithms of the gap per element of the
  // shortest list, far below a linear merge.
  EXPECT_LE(static_cast<double>(comparisons),
            shortest * (2.0 * std::ceil(std::log2(longest / shortest + 1.0)) + 3.0));
  EXPECT_LT(static_cast<double>(comparisons), longest / 20.0);

  // With lists of similar length the cost per element is a small constant.
  RuleRepresentative even;
  for (RuleId id = 1; id <= 2000; ++id)
  {
    std::vector<std::string> lhs;
    if (id % 2 == 0)
    {
      lhs.push_back("a");
    }
    if (id % 3 == 0)
    {
      lhs.push_back("b");
    }
    if (!lhs.empty())
    {
      even.AddRule(MakeRule(id, lhs, {"x"}));
    }
  }
  even.Lookup({"a", "b"}, &comparisons);
  const double min_len = static_cast<double>(even.Index().at("b").size());
  EXPECT_LE(static_cast<double>(comparisons), 5.0 * min_len);
}

TEST(RuleIndex, JsonRoundTrip)
{
  const RuleRepresentative rep = WorkedExample();
  EXPECT_EQ(RuleRepresentative::FromJson(rep.ToJson()), rep);
  nlohmann::json without_index = rep.ToJson();
  without_index.erase("index");
  EXPECT_EQ(RuleRepresentative::FromJson(without_index), rep);
}

// ---------------------------------------------------------------- clusters

TEST(ClusterRepresentative, Fig12SchemaValidates)
{
  const ClusterRepresentative rep = Fig12Clusters();
  EXPECT_NO_THROW(rep.Validate());
  EXPECT_EQ(rep.Cluster(0).values["Counts"], 161);
  EXPECT_EQ(ClusterRepresentative::FromJson(rep.ToJson()), rep);
}

TEST(ClusterRepresentative, RejectsBadRecords)
{
  ClusterRepresentative rep = Fig12Clusters();
  ClusterRecord dup;
  dup.id = 0;
  EXPECT_THROW(rep.AddCluster(dup), std::invalid_argument);

  ClusterRecord undeclared;
  undeclared.id = 1;
  undeclared.values = {{"Colour", "red"}};
  rep.AddCluster(undeclared);
  EXPECT_THROW(rep.Validate(), std::invalid_argument);

  ClusterRepresentative empty_integration = IdOnly();
  ClusterRecord integrated;
  integrated.creation = CreationType::Integrating;
  empty_integration.AddCluster(integrated);
  EXPECT_THROW(empty_integration.Validate(), std::invalid_argument);
}

// ---------------------------------------------------------------- provenance

TEST(Provenance, ClusteringRecordIsSingleNode)
{
  const ClusterRepresentative rep = Fig12Clusters();
  const ProvenanceNode tree = ResolveIntegrationLink(rep, "a", 1, 0, nullptr);
  EXPECT_EQ(tree.NodeCount(), 1u);
  EXPECT_EQ(tree.Depth(), 1u);
  EXPECT_EQ(tree.ToJson()["sub_elements"].size(), 0u);
}

ClusterRecord Integrated(int id, std::vector<IntegrationPart> parts)
{
  ClusterRecord record;
  record.id = id;
  record.values = {{"Id", id}};
  record.creation = CreationType::Integrating;
  record.parts = std::move(parts);
  return record;
}

ClusterRecord Leaf(int id)
{
  ClusterRecord record;
  record.id = id;
  record.values = {{"Id", id}};
  record.clustering = {"host", "file.csv", id};
  return record;
}

TEST(Provenance, Fig12Shape)
{
  // Root integrates three clusters; the third integrates two more.
  std::map<std::pair<std::string, KnowledgeId>, ClusterRepresentative> reps;
  auto& leaves_b = reps[{"b", 1}] = IdOnly();
  leaves_b.AddCluster(Leaf(0));
  leaves_b.AddCluster(Leaf(1));
  auto& leaves_c = reps[{"c", 1}] = IdOnly();
  leaves_c.AddCluster(Leaf(0));
  leaves_c.AddCluster(Leaf(1));
  auto& middle = reps[{"a", 2}] = IdOnly();
  middle.AddCluster(Integrated(0, {{"c", 1, 0}, {"c", 1, 1}}));
  ClusterRepresentative root = IdOnly();
  root.AddCluster(Integrated(0, {{"b", 1, 0}, {"b", 1, 1}, {"a", 2, 0}}));

  const RepresentativeResolver resolver = [&](const std::string& site, KnowledgeId id) {
    const auto it = reps.find({site, id});
    return it == reps.end() ? nullptr : &it->second;
  };
  const ProvenanceNode tree = ResolveIntegrationLink(root, "a", 3, 0, resolver);
  EXPECT_EQ(tree.children.size(), 3u);
  EXPECT_EQ(tree.children[2].children.size(), 2u);
  EXPECT_EQ(tree.NodeCount(), 6u);
  EXPECT_EQ(tree.Depth(), 3u);
  EXPECT_TRUE(tree.children[0].children.empty());
}

TEST(Provenance, CycleAndDanglingLinks)
{
  std::map<std::pair<std::string, KnowledgeId>, ClusterRepresentative> reps;
  auto& a = reps[{"a", 1}] = IdOnly();
  a.AddCluster(Integrated(0, {{"b", 1, 0}}));
  auto& b = reps[{"b", 1}] = IdOnly();
  b.AddCluster(Integrated(0, {{"a", 1, 0}}));
  b.AddCluster(Integrated(1, {{"zzz", 9, 0}}));
  const RepresentativeResolver resolver = [&](const std::string& site, KnowledgeId id) {
    const auto it = reps.find({site, id});
    return it == reps.end() ? nullptr : &it->second;
  };
  EXPECT_THROW(ResolveIntegrationLink(a, "a", 1, 0, resolver), std::runtime_error);
  try
  {
    ResolveIntegrationLink(b, "b", 1, 1, resolver);
    FAIL() << "expected a dangling link error";
  }
  catch (const std::runtime_error& error)
  {
    EXPECT_NE(std::string(error.what()).find("zzz"), std::string::npos);
  }
}

// ---------------------------------------------------------------- register / find / retrieve

TEST(Register, UnknownConceptIsRejectedWithoutSideEffects)
{
  Storms s;
  LocalKM local("a");
  EXPECT_THROW(RegisterKnowledge(local, {Meta(4242, "clustering"), Fig12Clusters()}, s.core),
               std::invalid_argument);
  EXPECT_TRUE(local.Entries().empty());
  EXPECT_TRUE(s.core.Metas().empty());
}

TEST(Register, InvalidIndexIsRejected)
{
  Storms s;
  LocalKM local("a");
  nlohmann::json doc = WorkedExample().ToJson();
  doc["index"]["cloud"] = {25};
  const RuleRepresentative broken = RuleRepresentative::FromJson(doc);
  EXPECT_THROW(RegisterKnowledge(local, {Meta(s.storm, "association_rules"), broken}, s.core),
               std::invalid_argument);
  EXPECT_TRUE(Coherent(s.core, {&local}));
}

TEST(Register, RetrieveRoundTrip)
{
  Storms s;
  LocalKM local("a");
  const KnowledgeEntry entry{Meta(s.cyclone, "clustering"), Fig12Clusters()};
  const KnowledgeId id = RegisterKnowledge(local, entry, s.core);
  const KnowledgeEntry back = Retrieve(local, id);
  EXPECT_EQ(back.meta.site, "a");
  EXPECT_EQ(back.meta.id, id);
  EXPECT_EQ(back.representative, entry.representative);
  EXPECT_EQ(KnowledgeEntryFromJson(ToJson(back)), back);
  EXPECT_THROW(Retrieve(local, id + 1), std::invalid_argument);
}

TEST(Register, DbdcResultRow)
{
  Storms s;
  LocalKM local("site1");
  const KnowledgeId id =
      RegisterKnowledge(local, {Meta(s.storm, "clustering"), Fig12Clusters()}, s.core);
  const auto hits = Find(s.core, {s.storm, std::nullopt, std::nullopt});
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].method, "DBDC-local");
  EXPECT_EQ(hits[0].data_type, "Numerical");
  EXPECT_EQ(hits[0].instances, 161u);
  EXPECT_EQ(hits[0].dimensions, 2u);
  EXPECT_EQ(hits[0].id, id);
}

TEST(Find, RootLeafAndFilteredQueries)
{
  Storms s;
  std::map<std::string, LocalKM> locals{{"a", LocalKM("a")}, {"b", LocalKM("b")}};
  RegisterKnowledge(locals["a"], {Meta(s.cyclone, "clustering"), Fig12Clusters()}, s.core);
  RegisterKnowledge(locals["a"], {Meta(s.tornado, "association_rules", "Categorical"),
                                  WorkedExample()},
                    s.core);
  RegisterKnowledge(locals["b"], {Meta(s.storm, "clustering"), Fig12Clusters()}, s.core);
  RegisterKnowledge(locals["b"], {Meta(s.climate, "clustering"), Fig12Clusters()}, s.core);

  EXPECT_EQ(Find(s.core, {s.meteorology, std::nullopt, std::nullopt}).size(), 4u);
  const auto leaf = Find(s.core, {s.cyclone, std::nullopt, std::nullopt});
  ASSERT_EQ(leaf.size(), 1u);
  EXPECT_EQ(leaf[0].concept_id, s.cyclone);

  const auto filtered = Find(s.core, {s.storm, std::string("clustering"), std::nullopt});
  std::vector<MetaKnowledge> expected;
  for (const auto& [key, meta] : s.core.Metas())
  {
    if (s.core.Concepts().InSubtree(meta.concept_id, s.storm) && meta.task == "clustering")
    {
      expected.push_back(meta);
    }
  }
  EXPECT_EQ(filtered, expected);
  EXPECT_EQ(filtered.size(), 2u);
  EXPECT_EQ(Find(s.core, {s.storm, std::nullopt, std::string("Categorical")}).size(), 1u);
  EXPECT_THROW(Find(s.core, {777, std::nullopt, std::nullopt}), std::invalid_argument);
}

TEST(Coherence, RandomRegisterAndDelete)
{
  Storms s;
  const std::vector<ConceptId> concepts{s.meteorology, s.storm, s.cyclone, s.tornado, s.climate};
  std::vector<LocalKM> locals{LocalKM("s0"), LocalKM("s1"), LocalKM("s2"), LocalKM("s3")};
  std::mt19937_64 rng(21);
  for (int step = 0; step < 300; ++step)
  {
    LocalKM& local = locals[rng() % locals.size()];
    if (rng() % 3 == 0 && !local.Entries().empty())
    {
      auto it = local.Entries().begin();
      std::advance(it, static_cast<std::ptrdiff_t>(rng() % local.Entries().size()));
      DeleteKnowledge(local, it->first, s.core);
    }
    else
    {
      const ConceptId c = concepts[rng() % concepts.size()];
      if (rng() % 2 == 0)
      {
        RegisterKnowledge(local, {Meta(c, "clustering"), Fig12Clusters()}, s.core);
      }
      else
      {
        RegisterKnowledge(local, {Meta(c, "association_rules"), WorkedExample()}, s.core);
      }
    }
  }
  std::vector<const LocalKM*> views;
  for (const auto& local : locals)
  {
    views.push_back(&local);
  }
  EXPECT_TRUE(Coherent(s.core, views));
  for (const auto& meta : Find(s.core, {s.meteorology, std::nullopt, std::nullopt}))
  {
    const auto& local = *std::find_if(locals.begin(), locals.end(),
                                      [&](const LocalKM& l) { return l.Site() == meta.site; });
    EXPECT_EQ(Retrieve(local, meta.id).meta, meta);
  }
}

TEST(Persistence, CoreAndLocalJson)
{
  Storms s;
  LocalKM local("a");
  RegisterKnowledge(local, {Meta(s.cyclone, "clustering"), Fig12Clusters()}, s.core);
  RegisterKnowledge(local, {Meta(s.storm, "association_rules"), WorkedExample()}, s.core);
  const CoreKM core_back = CoreKM::FromJson(nlohmann::json::parse(s.core.ToJson().dump()));
  const LocalKM local_back = LocalKM::FromJson(nlohmann::json::parse(local.ToJson().dump()));
  EXPECT_EQ(core_back, s.core);
  EXPECT_EQ(local_back, local);
  EXPECT_TRUE(Coherent(core_back, {&local_back}));
}

}  // namespace
}  // namespace gridmine::km
