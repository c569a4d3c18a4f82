#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace gridmine::km
{
using ConceptId = std::uint64_t;
using KnowledgeId = std::uint64_t;
using RuleId = std::uint64_t;

struct ConceptNode
{
  ConceptId id = 0;
  std::string name;
  /// Empty for the root of a tree.
  std::optional<ConceptId> parent;
  std::vector<ConceptId> children;

  friend bool operator==(const ConceptNode&, const ConceptNode&) = default;
};

/// All concept trees of the host. Ids come from one counter and are never
/// reused, so they are unique across trees.
class ConceptRepository
{
public:
  /// A missing parent starts a new tree whose domain is `name`.
  ConceptId Add(std::optional<ConceptId> parent, const std::string& name);
  /// Only leaves can be removed.
  void Remove(ConceptId id);

  bool Contains(ConceptId id) const { return nodes_.count(id) != 0; }
  const ConceptNode& Node(ConceptId id) const;
  ConceptId RootOf(ConceptId id) const;
  /// Domain name of the tree holding `id`.
  const std::string& Domain(ConceptId id) const;
  std::vector<ConceptId> Roots() const;
  /// `id` and all its descendants, ascending.
  std::vector<ConceptId> Subtree(ConceptId id) const;
  bool InSubtree(ConceptId node, ConceptId ancestor) const;
  /// Concepts named `name`, ascending.
  std::vector<ConceptId> FindByName(const std::string& name) const;
  std::size_t Size() const { return nodes_.size(); }

  void Validate() const;

  nlohmann::json ToJson() const;
  static ConceptRepository FromJson(const nlohmann::json& doc);

  friend bool operator==(const ConceptRepository&, const ConceptRepository&) = default;

private:
  std::map<ConceptId, ConceptNode> nodes_;
  ConceptId next_id_ = 1;
};

struct MetaKnowledge
{
  KnowledgeId id = 0;
  std::string site;
  ConceptId concept_id = 0;
  /// e.g. "clustering", "association_rules".
  std::string task;
  std::string method;
  /// e.g. "Numerical", "Categorical".
  std::string data_type;
  std::uint64_t instances = 0;
  std::uint64_t dimensions = 0;
  std::string description;

  friend bool operator==(const MetaKnowledge&, const MetaKnowledge&) = default;
};

nlohmann::json ToJson(const MetaKnowledge& meta);
MetaKnowledge MetaKnowledgeFromJson(const nlohmann::json& doc);

struct Rule
{
  RuleId id = 0;
  std::vector<std::string> if_items;
  std::vector<std::string> then_items;
  double support = 0.0;
  double confidence = 0.0;
  std::string creation;

  /// IF and THEN items, sorted, without duplicates.
  std::vector<std::string> Items() const;

  friend bool operator==(const Rule&, const Rule&) = default;
};

using ItemIndex = std::map<std::string, std::vector<RuleId>>;

/// Rule table plus inverted item index.
class RuleRepresentative
{
public:
  void AddRule(Rule rule);
  void RemoveRule(RuleId id);

  const std::map<RuleId, Rule>& Rules() const { return rules_; }
  const ItemIndex& Index() const { return index_; }

  /// Rules containing every item of `items`. Unknown items give an empty
  /// result. When `comparisons` is given it receives the number of list
  /// element comparisons made.
  std::vector<RuleId> Lookup(const std::vector<std::string>& items,
                             std::size_t* comparisons = nullptr) const;

  /// Throws std::invalid_argument when the index does not match the table.
  void Validate() const;

  nlohmann::json ToJson() const;
  /// Reads the stored index as-is; call Validate() to check it.
  static RuleRepresentative FromJson(const nlohmann::json& doc);

  friend bool operator==(const RuleRepresentative&, const RuleRepresentative&) = default;

private:
  std::map<RuleId, Rule> rules_;
  ItemIndex index_;
};

ItemIndex BuildIndex(const std::map<RuleId, Rule>& rules);

/// Intersection of sorted lists, shortest first, galloping through the
/// longer ones.
std::vector<RuleId> IntersectSorted(std::vector<const std::vector<RuleId>*> lists,
                                    std::size_t* comparisons = nullptr);

enum class CreationType { Clustering, Integrating };

CreationType CreationTypeFromString(const std::string& name);
std::string ToString(CreationType type);

struct FieldSpec
{
  std::string name;
  std::string type;

  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

/// Where a clustering-type cluster was produced.
struct ClusteringLink
{
  std::string host;
  std::string file;
  int cluster = 0;

  friend bool operator==(const ClusteringLink&, const ClusteringLink&) = default;
};

/// A sub-element of an integration link.
struct IntegrationPart
{
  std::string site;
  KnowledgeId knowledge = 0;
  int cluster = 0;

  friend bool operator==(const IntegrationPart&, const IntegrationPart&) = default;
};

struct ClusterRecord
{
  int id = 0;
  /// Field name to value.
  nlohmann::json values = nlohmann::json::object();
  CreationType creation = CreationType::Clustering;
  ClusteringLink clustering;
  std::vector<IntegrationPart> parts;

  friend bool operator==(const ClusterRecord&, const ClusterRecord&) = default;
};

class ClusterRepresentative
{
public:
  ClusterRepresentative() = default;
  explicit ClusterRepresentative(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {}

  void AddCluster(ClusterRecord record);

  const std::vector<FieldSpec>& Fields() const { return fields_; }
  const std::map<int, ClusterRecord>& Clusters() const { return clusters_; }
  const ClusterRecord& Cluster(int id) const;

  /// Field names unique, record values only use declared fields, clustering
  /// records carry no parts and integrating records at least one.
  void Validate() const;

  nlohmann::json ToJson() const;
  static ClusterRepresentative FromJson(const nlohmann::json& doc);

  friend bool operator==(const ClusterRepresentative&, const ClusterRepresentative&) = default;

private:
  std::vector<FieldSpec> fields_;
  std::map<int, ClusterRecord> clusters_;
};

struct ProvenanceNode
{
  std::string site;
  KnowledgeId knowledge = 0;
  int cluster = 0;
  CreationType creation = CreationType::Clustering;
  ClusteringLink clustering;
  std::vector<ProvenanceNode> children;

  std::size_t NodeCount() const;
  std::size_t Depth() const;
  nlohmann::json ToJson() const;
};

/// Looks up the cluster representative of a (site, knowledge id), or returns
/// nullptr when there is none.
using RepresentativeResolver =
    std::function<const ClusterRepresentative*(const std::string& site, KnowledgeId id)>;

/// Expands integration links down to clustering-type leaves. Throws
/// std::runtime_error on a dangling link or a cycle.
ProvenanceNode ResolveIntegrationLink(const ClusterRepresentative& rep, const std::string& site,
                                      KnowledgeId knowledge, int cluster,
                                      const RepresentativeResolver& resolver);

using Representative = std::variant<RuleRepresentative, ClusterRepresentative>;

struct KnowledgeEntry
{
  MetaKnowledge meta;
  Representative representative;

  friend bool operator==(const KnowledgeEntry&, const KnowledgeEntry&) = default;
};

nlohmann::json ToJson(const KnowledgeEntry& entry);
KnowledgeEntry KnowledgeEntryFromJson(const nlohmann::json& doc);

void ValidateRepresentative(const Representative& rep);

class LocalKM
{
public:
  LocalKM() = default;
  explicit LocalKM(std::string site) : site_(std::move(site)) {}

  const std::string& Site() const { return site_; }

  /// Assigns the next knowledge id and stamps site and id into the meta.
  KnowledgeId Store(KnowledgeEntry entry);
  void Remove(KnowledgeId id);
  bool Contains(KnowledgeId id) const { return entries_.count(id) != 0; }
  const KnowledgeEntry& Entry(KnowledgeId id) const;
  const std::map<KnowledgeId, KnowledgeEntry>& Entries() const { return entries_; }
  std::vector<MetaKnowledge> Metas() const;

  nlohmann::json ToJson() const;
  static LocalKM FromJson(const nlohmann::json& doc);

  friend bool operator==(const LocalKM&, const LocalKM&) = default;

private:
  std::string site_;
  std::map<KnowledgeId, KnowledgeEntry> entries_;
  KnowledgeId next_id_ = 1;
};

struct FindQuery
{
  ConceptId concept_id = 0;
  std::optional<std::string> task;
  std::optional<std::string> data_type;
};

using MetaKey = std::pair<std::string, KnowledgeId>;

class CoreKM
{
public:
  ConceptRepository& Concepts() { return concepts_; }
  const ConceptRepository& Concepts() const { return concepts_; }

  ConceptId AddConcept(std::optional<ConceptId> parent, const std::string& name);
  /// Refuses concepts that still have children or knowledge attached.
  void DeleteConcept(ConceptId id);

  void Mirror(const MetaKnowledge& meta);
  void Unmirror(const std::string& site, KnowledgeId id);
  const std::map<MetaKey, MetaKnowledge>& Metas() const { return metas_; }

  /// Metadata only, ordered by (site, id).
  std::vector<MetaKnowledge> Find(const FindQuery& query) const;

  nlohmann::json ToJson() const;
  static CoreKM FromJson(const nlohmann::json& doc);

  friend bool operator==(const CoreKM&, const CoreKM&) = default;

private:
  ConceptRepository concepts_;
  std::map<MetaKey, MetaKnowledge> metas_;
  /// Concept id to the entries filed under it.
  std::multimap<ConceptId, MetaKey> by_concept_;
};

/// Stores the entry at `local` and mirrors its meta into `core`. Nothing is
/// changed when validation fails.
KnowledgeId RegisterKnowledge(LocalKM& local, KnowledgeEntry entry, CoreKM& core);
void DeleteKnowledge(LocalKM& local, KnowledgeId id, CoreKM& core);
std::vector<MetaKnowledge> Find(const CoreKM& core, const FindQuery& query);
KnowledgeEntry Retrieve(const LocalKM& local, KnowledgeId id);

/// Core metas equal the union of the local metas.
bool Coherent(const CoreKM& core, const std::vector<const LocalKM*>& locals);

}  // namespace gridmine::km
