#include "gridmine/knowledge_map.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <tuple>

namespace gridmine::km
{
namespace
{
std::string MetaName(const std::string& site, KnowledgeId id)
{
  return "(site '" + site + "', knowledge " + std::to_string(id) + ")";
}

void SortUnique(std::vector<std::string>& items)
{
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
}
}  // namespace

// ---------------------------------------------------------------------------
// Concept trees

ConceptId ConceptRepository::Add(std::optional<ConceptId> parent, const std::string& name)
{
  if (name.empty())
  {
    throw std::invalid_argument("concept name must not be empty");
  }
  if (parent && !Contains(*parent))
  {
    throw std::invalid_argument("unknown parent concept " + std::to_string(*parent));
  }
  const ConceptId id = next_id_++;
  nodes_[id] = ConceptNode{id, name, parent, {}};
  if (parent)
  {
    nodes_[*parent].children.push_back(id);
  }
  return id;
}

void ConceptRepository::Remove(ConceptId id)
{
  const ConceptNode& node = Node(id);
  if (!node.children.empty())
  {
    throw std::invalid_argument("concept " + std::to_string(id) + " still has children");
  }
  if (node.parent)
  {
    auto& siblings = nodes_[*node.parent].children;
    siblings.erase(std::remove(siblings.begin(), siblings.end(), id), siblings.end());
  }
  nodes_.erase(id);
}

const ConceptNode& ConceptRepository::Node(ConceptId id) const
{
  auto it = nodes_.find(id);
  if (it == nodes_.end())
  {
    throw std::invalid_argument("unknown concept " + std::to_string(id));
  }
  return it->second;
}

ConceptId ConceptRepository::RootOf(ConceptId id) const
{
  const ConceptNode* node = &Node(id);
  while (node->parent)
  {
    node = &Node(*node->parent);
  }
  return node->id;
}

const std::string& ConceptRepository::Domain(ConceptId id) const
{
  return Node(RootOf(id)).name;
}

std::vector<ConceptId> ConceptRepository::Roots() const
{
  std::vector<ConceptId> roots;
  for (const auto& [id, node] : nodes_)
  {
    if (!node.parent)
    {
      roots.push_back(id);
    }
  }
  return roots;
}

std::vector<ConceptId> ConceptRepository::Subtree(ConceptId id) const
{
  std::vector<ConceptId> out;
  std::vector<ConceptId> stack{Node(id).id};
  while (!stack.empty())
  {
    const ConceptId cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    for (ConceptId child : Node(cur).children)
    {
      stack.push_back(child);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool ConceptRepository::InSubtree(ConceptId node, ConceptId ancestor) const
{
  std::optional<ConceptId> cur = node;
  while (cur)
  {
    if (*cur == ancestor)
    {
      return true;
    }
    cur = Node(*cur).parent;
  }
  return false;
}

std::vector<ConceptId> ConceptRepository::FindByName(const std::string& name) const
{
  std::vector<ConceptId> out;
  for (const auto& [id, node] : nodes_)
  {
    if (node.name == name)
    {
      out.push_back(id);
    }
  }
  return out;
}

void ConceptRepository::Validate() const
{
  for (const auto& [id, node] : nodes_)
  {
    if (node.id != id || id >= next_id_)
    {
      throw std::logic_error("concept id " + std::to_string(id) + " is inconsistent");
    }
    if (node.parent)
    {
      const auto& siblings = Node(*node.parent).children;
      if (std::count(siblings.begin(), siblings.end(), id) != 1)
      {
        throw std::logic_error("concept " + std::to_string(id) + " missing from its parent");
      }
    }
    for (ConceptId child : node.children)
    {
      if (Node(child).parent != id)
      {
        throw std::logic_error("concept " + std::to_string(child) + " has a wrong parent");
      }
    }
    // Walking up must reach a root within |nodes| steps.
    std::size_t steps = 0;
    std::optional<ConceptId> cur = node.parent;
    while (cur)
    {
      if (++steps > nodes_.size())
      {
        throw std::logic_error("concept tree has a cycle through " + std::to_string(id));
      }
      cur = Node(*cur).parent;
    }
  }
}

nlohmann::json ConceptRepository::ToJson() const
{
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [id, node] : nodes_)
  {
    nlohmann::json n{{"id", id}, {"name", node.name}};
    n["parent"] = node.parent ? nlohmann::json(*node.parent) : nlohmann::json(nullptr);
    nodes.push_back(std::move(n));
  }
  return {{"next_id", next_id_}, {"nodes", std::move(nodes)}};
}

ConceptRepository ConceptRepository::FromJson(const nlohmann::json& doc)
{
  ConceptRepository repo;
  for (const auto& n : doc.at("nodes"))
  {
    ConceptNode node;
    node.id = n.at("id").get<ConceptId>();
    node.name = n.at("name").get<std::string>();
    if (!n.at("parent").is_null())
    {
      node.parent = n.at("parent").get<ConceptId>();
    }
    if (!repo.nodes_.emplace(node.id, node).second)
    {
      throw std::invalid_argument("duplicate concept id " + std::to_string(node.id));
    }
  }
  // Children are rebuilt in id order, which is also creation order.
  for (auto& [id, node] : repo.nodes_)
  {
    if (node.parent)
    {
      auto it = repo.nodes_.find(*node.parent);
      if (it == repo.nodes_.end())
      {
        throw std::invalid_argument("concept " + std::to_string(id) + " has unknown parent");
      }
      it->second.children.push_back(id);
    }
  }
  repo.next_id_ = doc.at("next_id").get<ConceptId>();
  repo.Validate();
  return repo;
}

// ---------------------------------------------------------------------------
// Meta knowledge

nlohmann::json ToJson(const MetaKnowledge& meta)
{
  return {{"id", meta.id},
          {"site", meta.site},
          {"concept", meta.concept_id},
          {"task", meta.task},
          {"method", meta.method},
          {"data_type", meta.data_type},
          {"instances", meta.instances},
          {"dimensions", meta.dimensions},
          {"description", meta.description}};
}

MetaKnowledge MetaKnowledgeFromJson(const nlohmann::json& doc)
{
  MetaKnowledge meta;
  meta.id = doc.value("id", KnowledgeId{0});
  meta.site = doc.value("site", std::string{});
  meta.concept_id = doc.at("concept").get<ConceptId>();
  meta.task = doc.at("task").get<std::string>();
  meta.method = doc.value("method", std::string{});
  meta.data_type = doc.value("data_type", std::string{});
  meta.instances = doc.value("instances", std::uint64_t{0});
  meta.dimensions = doc.value("dimensions", std::uint64_t{0});
  meta.description = doc.value("description", std::string{});
  return meta;
}

// ---------------------------------------------------------------------------
// Rules and the inverted index

std::vector<std::string> Rule::Items() const
{
  std::vector<std::string> items = if_items;
  items.insert(items.end(), then_items.begin(), then_items.end());
  SortUnique(items);
  return items;
}

ItemIndex BuildIndex(const std::map<RuleId, Rule>& rules)
{
  ItemIndex index;
  for (const auto& [id, rule] : rules)
  {
    for (const std::string& item : rule.Items())
    {
      index[item].push_back(id);
    }
  }
  return index;
}

void RuleRepresentative::AddRule(Rule rule)
{
  if (rules_.count(rule.id) != 0)
  {
    throw std::invalid_argument("duplicate rule id " + std::to_string(rule.id));
  }
  if (rule.if_items.empty() && rule.then_items.empty())
  {
    throw std::invalid_argument("rule " + std::to_string(rule.id) + " has no items");
  }
  for (const std::string& item : rule.Items())
  {
    auto& list = index_[item];
    list.insert(std::upper_bound(list.begin(), list.end(), rule.id), rule.id);
  }
  const RuleId id = rule.id;
  rules_.emplace(id, std::move(rule));
}

void RuleRepresentative::RemoveRule(RuleId id)
{
  auto it = rules_.find(id);
  if (it == rules_.end())
  {
    throw std::invalid_argument("unknown rule id " + std::to_string(id));
  }
  for (const std::string& item : it->second.Items())
  {
    auto entry = index_.find(item);
    auto& list = entry->second;
    list.erase(std::lower_bound(list.begin(), list.end(), id));
    if (list.empty())
    {
      index_.erase(entry);
    }
  }
  rules_.erase(it);
}

std::vector<RuleId> IntersectSorted(std::vector<const std::vector<RuleId>*> lists,
                                    std::size_t* comparisons)
{
  std::size_t cmp = 0;
  std::vector<RuleId> result;
  if (!lists.empty())
  {
    std::stable_sort(lists.begin(), lists.end(),
                     [](const auto* a, const auto* b) { return a->size() < b->size(); });
    result = *lists.front();
    for (std::size_t l = 1; l < lists.size() && !result.empty(); ++l)
    {
      const std::vector<RuleId>& list = *lists[l];
      const std::size_t n = list.size();
      std::vector<RuleId> next;
      std::size_t pos = 0;
      for (RuleId x : result)
      {
        // Gallop to bracket x, then binary search inside the bracket.
        std::size_t lo = pos;
        std::size_t hi = pos;
        std::size_t step = 1;
        while (hi < n)
        {
          ++cmp;
          if (list[hi] >= x)
          {
            break;
          }
          lo = hi + 1;
          hi = lo + step;
          step *= 2;
        }
        hi = std::min(hi, n);
        while (lo < hi)
        {
          const std::size_t mid = lo + (hi - lo) / 2;
          ++cmp;
          if (list[mid] < x)
          {
            lo = mid + 1;
          }
          else
          {
            hi = mid;
          }
        }
        pos = lo;
        if (pos == n)
        {
          break;
        }
        ++cmp;
        if (list[pos] == x)
        {
          next.push_back(x);
          ++pos;
        }
      }
      result = std::move(next);
    }
  }
  if (comparisons)
  {
    *comparisons = cmp;
  }
  return result;
}

std::vector<RuleId> RuleRepresentative::Lookup(const std::vector<std::string>& items,
                                               std::size_t* comparisons) const
{
  if (items.empty())
  {
    throw std::invalid_argument("rule lookup needs at least one item");
  }
  std::vector<std::string> keys = items;
  SortUnique(keys);
  std::vector<const std::vector<RuleId>*> lists;
  for (const std::string& item : keys)
  {
    auto it = index_.find(item);
    if (it == index_.end())
    {
      if (comparisons)
      {
        *comparisons = 0;
      }
      return {};
    }
    lists.push_back(&it->second);
  }
  return IntersectSorted(std::move(lists), comparisons);
}

void RuleRepresentative::Validate() const
{
  for (const auto& [item, list] : index_)
  {
    if (list.empty())
    {
      throw std::invalid_argument("empty posting list for item '" + item + "'");
    }
    if (std::adjacent_find(list.begin(), list.end(), std::greater_equal<>()) != list.end())
    {
      throw std::invalid_argument("posting list for item '" + item +
                                  "' is not strictly ascending");
    }
  }
  for (const auto& [id, rule] : rules_)
  {
    if (rule.id != id)
    {
      throw std::invalid_argument("rule table key " + std::to_string(id) +
                                  " does not match its rule");
    }
  }
  if (BuildIndex(rules_) != index_)
  {
    throw std::invalid_argument("item index does not match the rule table");
  }
}

nlohmann::json RuleRepresentative::ToJson() const
{
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& [id, rule] : rules_)
  {
    rules.push_back({{"id", id},
                     {"if", rule.if_items},
                     {"then", rule.then_items},
                     {"support", rule.support},
                     {"confidence", rule.confidence},
                     {"creation", rule.creation}});
  }
  nlohmann::json index = nlohmann::json::object();
  for (const auto& [item, list] : index_)
  {
    index[item] = list;
  }
  return {{"rules", std::move(rules)}, {"index", std::move(index)}};
}

RuleRepresentative RuleRepresentative::FromJson(const nlohmann::json& doc)
{
  RuleRepresentative rep;
  for (const auto& r : doc.at("rules"))
  {
    Rule rule;
    rule.id = r.at("id").get<RuleId>();
    rule.if_items = r.value("if", std::vector<std::string>{});
    rule.then_items = r.value("then", std::vector<std::string>{});
    rule.support = r.value("support", 0.0);
    rule.confidence = r.value("confidence", 0.0);
    rule.creation = r.value("creation", std::string{});
    if (!rep.rules_.emplace(rule.id, rule).second)
    {
      throw std::invalid_argument("duplicate rule id " + std::to_string(rule.id));
    }
  }
  if (doc.contains("index"))
  {
    for (const auto& [item, list] : doc.at("index").items())
    {
      rep.index_[item] = list.get<std::vector<RuleId>>();
    }
  }
  else
  {
    rep.index_ = BuildIndex(rep.rules_);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Cluster representatives

CreationType CreationTypeFromString(const std::string& name)
{
  if (name == "clustering" || name == "Clustering")
  {
    return CreationType::Clustering;
  }
  if (name == "integrating" || name == "Integrating")
  {
    return CreationType::Integrating;
  }
  throw std::invalid_argument("unknown creation type: " + name);
}

std::string ToString(CreationType type)
{
  return type == CreationType::Clustering ? "clustering" : "integrating";
}

void ClusterRepresentative::AddCluster(ClusterRecord record)
{
  if (clusters_.count(record.id) != 0)
  {
    throw std::invalid_argument("duplicate cluster id " + std::to_string(record.id));
  }
  const int id = record.id;
  clusters_.emplace(id, std::move(record));
}

const ClusterRecord& ClusterRepresentative::Cluster(int id) const
{
  auto it = clusters_.find(id);
  if (it == clusters_.end())
  {
    throw std::invalid_argument("unknown cluster id " + std::to_string(id));
  }
  return it->second;
}

void ClusterRepresentative::Validate() const
{
  std::set<std::string> names;
  for (const FieldSpec& field : fields_)
  {
    if (field.name.empty() || !names.insert(field.name).second)
    {
      throw std::invalid_argument("field names must be nonempty and unique");
    }
  }
  for (const auto& [id, record] : clusters_)
  {
    const std::string where = "cluster " + std::to_string(id);
    if (record.id != id)
    {
      throw std::invalid_argument(where + " is stored under a different id");
    }
    if (!record.values.is_object())
    {
      throw std::invalid_argument(where + " values must be an object");
    }
    for (const auto& [name, value] : record.values.items())
    {
      if (names.count(name) == 0)
      {
        throw std::invalid_argument(where + " uses undeclared field '" + name + "'");
      }
    }
    if (record.creation == CreationType::Clustering && !record.parts.empty())
    {
      throw std::invalid_argument(where + " is a clustering result but has sub-elements");
    }
    if (record.creation == CreationType::Integrating && record.parts.empty())
    {
      throw std::invalid_argument(where + " is integrated but has no sub-elements");
    }
  }
}

nlohmann::json ClusterRepresentative::ToJson() const
{
  nlohmann::json fields = nlohmann::json::array();
  for (const FieldSpec& field : fields_)
  {
    fields.push_back({{"name", field.name}, {"type", field.type}});
  }
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& [id, record] : clusters_)
  {
    nlohmann::json c{{"id", id}, {"values", record.values}, {"creation", ToString(record.creation)}};
    if (record.creation == CreationType::Clustering)
    {
      c["link"] = {{"host", record.clustering.host},
                   {"file", record.clustering.file},
                   {"cluster", record.clustering.cluster}};
    }
    else
    {
      nlohmann::json parts = nlohmann::json::array();
      for (const IntegrationPart& part : record.parts)
      {
        parts.push_back(
            {{"site", part.site}, {"knowledge", part.knowledge}, {"cluster", part.cluster}});
      }
      c["link"] = {{"parts", std::move(parts)}};
    }
    clusters.push_back(std::move(c));
  }
  return {{"fields", std::move(fields)}, {"clusters", std::move(clusters)}};
}

ClusterRepresentative ClusterRepresentative::FromJson(const nlohmann::json& doc)
{
  std::vector<FieldSpec> fields;
  for (const auto& f : doc.at("fields"))
  {
    fields.push_back({f.at("name").get<std::string>(), f.value("type", std::string{})});
  }
  ClusterRepresentative rep(std::move(fields));
  for (const auto& c : doc.at("clusters"))
  {
    ClusterRecord record;
    record.id = c.at("id").get<int>();
    record.values = c.value("values", nlohmann::json::object());
    record.creation = CreationTypeFromString(c.at("creation").get<std::string>());
    const nlohmann::json& link = c.at("link");
    if (record.creation == CreationType::Clustering)
    {
      record.clustering.host = link.value("host", std::string{});
      record.clustering.file = link.value("file", std::string{});
      record.clustering.cluster = link.value("cluster", 0);
    }
    else
    {
      for (const auto& p : link.at("parts"))
      {
        record.parts.push_back({p.at("site").get<std::string>(),
                                p.at("knowledge").get<KnowledgeId>(), p.at("cluster").get<int>()});
      }
    }
    rep.AddCluster(std::move(record));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Integration links

std::size_t ProvenanceNode::NodeCount() const
{
  std::size_t n = 1;
  for (const ProvenanceNode& child : children)
  {
    n += child.NodeCount();
  }
  return n;
}

std::size_t ProvenanceNode::Depth() const
{
  std::size_t deepest = 0;
  for (const ProvenanceNode& child : children)
  {
    deepest = std::max(deepest, child.Depth());
  }
  return deepest + 1;
}

nlohmann::json ProvenanceNode::ToJson() const
{
  nlohmann::json out{{"site", site},
                     {"knowledge", knowledge},
                     {"cluster", cluster},
                     {"creation", gridmine::km::ToString(creation)}};
  if (creation == CreationType::Clustering)
  {
    out["link"] = {{"host", clustering.host},
                   {"file", clustering.file},
                   {"cluster", clustering.cluster}};
  }
  nlohmann::json kids = nlohmann::json::array();
  for (const ProvenanceNode& child : children)
  {
    kids.push_back(child.ToJson());
  }
  out["sub_elements"] = std::move(kids);
  return out;
}

namespace
{
using LinkKey = std::tuple<std::string, KnowledgeId, int>;

ProvenanceNode Expand(const ClusterRepresentative& rep, const std::string& site,
                      KnowledgeId knowledge, int cluster, const RepresentativeResolver& resolver,
                      std::vector<LinkKey>& path)
{
  const LinkKey key{site, knowledge, cluster};
  if (std::find(path.begin(), path.end(), key) != path.end())
  {
    throw std::runtime_error("integration link cycle at " + MetaName(site, knowledge) +
                             " cluster " + std::to_string(cluster));
  }
  auto it = rep.Clusters().find(cluster);
  if (it == rep.Clusters().end())
  {
    throw std::runtime_error("dangling integration link: " + MetaName(site, knowledge) +
                             " has no cluster " + std::to_string(cluster));
  }
  const ClusterRecord& record = it->second;
  ProvenanceNode node;
  node.site = site;
  node.knowledge = knowledge;
  node.cluster = cluster;
  node.creation = record.creation;
  node.clustering = record.clustering;
  path.push_back(key);
  for (const IntegrationPart& part : record.parts)
  {
    const ClusterRepresentative* target = resolver ? resolver(part.site, part.knowledge) : nullptr;
    if (target == nullptr)
    {
      throw std::runtime_error("dangling integration link: " +
                               MetaName(part.site, part.knowledge) + " not found");
    }
    node.children.push_back(
        Expand(*target, part.site, part.knowledge, part.cluster, resolver, path));
  }
  path.pop_back();
  return node;
}
}  // namespace

ProvenanceNode ResolveIntegrationLink(const ClusterRepresentative& rep, const std::string& site,
                                      KnowledgeId knowledge, int cluster,
                                      const RepresentativeResolver& resolver)
{
  std::vector<LinkKey> path;
  return Expand(rep, site, knowledge, cluster, resolver, path);
}

// ---------------------------------------------------------------------------
// Knowledge entries

nlohmann::json ToJson(const KnowledgeEntry& entry)
{
  nlohmann::json rep;
  if (const auto* rules = std::get_if<RuleRepresentative>(&entry.representative))
  {
    rep = rules->ToJson();
    rep["kind"] = "rules";
  }
  else
  {
    rep = std::get<ClusterRepresentative>(entry.representative).ToJson();
    rep["kind"] = "clusters";
  }
  return {{"meta", ToJson(entry.meta)}, {"representative", std::move(rep)}};
}

KnowledgeEntry KnowledgeEntryFromJson(const nlohmann::json& doc)
{
  KnowledgeEntry entry;
  entry.meta = MetaKnowledgeFromJson(doc.at("meta"));
  const nlohmann::json& rep = doc.at("representative");
  const std::string kind = rep.at("kind").get<std::string>();
  if (kind == "rules")
  {
    entry.representative = RuleRepresentative::FromJson(rep);
  }
  else if (kind == "clusters")
  {
    entry.representative = ClusterRepresentative::FromJson(rep);
  }
  else
  {
    throw std::invalid_argument("unknown representative kind: " + kind);
  }
  return entry;
}

void ValidateRepresentative(const Representative& rep)
{
  std::visit([](const auto& r) { r.Validate(); }, rep);
}

KnowledgeId LocalKM::Store(KnowledgeEntry entry)
{
  const KnowledgeId id = next_id_++;
  entry.meta.id = id;
  entry.meta.site = site_;
  entries_.emplace(id, std::move(entry));
  return id;
}

void LocalKM::Remove(KnowledgeId id)
{
  if (entries_.erase(id) == 0)
  {
    throw std::invalid_argument("unknown knowledge id " + std::to_string(id) + " at site '" +
                                site_ + "'");
  }
}

const KnowledgeEntry& LocalKM::Entry(KnowledgeId id) const
{
  auto it = entries_.find(id);
  if (it == entries_.end())
  {
    throw std::invalid_argument("unknown knowledge id " + std::to_string(id) + " at site '" +
                                site_ + "'");
  }
  return it->second;
}

std::vector<MetaKnowledge> LocalKM::Metas() const
{
  std::vector<MetaKnowledge> out;
  for (const auto& [id, entry] : entries_)
  {
    out.push_back(entry.meta);
  }
  return out;
}

nlohmann::json LocalKM::ToJson() const
{
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [id, entry] : entries_)
  {
    entries.push_back(gridmine::km::ToJson(entry));
  }
  return {{"site", site_}, {"next_id", next_id_}, {"entries", std::move(entries)}};
}

LocalKM LocalKM::FromJson(const nlohmann::json& doc)
{
  LocalKM local(doc.at("site").get<std::string>());
  for (const auto& e : doc.at("entries"))
  {
    KnowledgeEntry entry = KnowledgeEntryFromJson(e);
    if (entry.meta.site != local.site_)
    {
      throw std::invalid_argument("entry of site '" + entry.meta.site + "' stored at '" +
                                  local.site_ + "'");
    }
    const KnowledgeId id = entry.meta.id;
    if (!local.entries_.emplace(id, std::move(entry)).second)
    {
      throw std::invalid_argument("duplicate knowledge id " + std::to_string(id));
    }
  }
  local.next_id_ = doc.at("next_id").get<KnowledgeId>();
  if (!local.entries_.empty() && local.entries_.rbegin()->first >= local.next_id_)
  {
    throw std::invalid_argument("knowledge id counter is behind the stored entries");
  }
  return local;
}

// ---------------------------------------------------------------------------
// Core

ConceptId CoreKM::AddConcept(std::optional<ConceptId> parent, const std::string& name)
{
  return concepts_.Add(parent, name);
}

void CoreKM::DeleteConcept(ConceptId id)
{
  if (by_concept_.count(id) != 0)
  {
    throw std::invalid_argument("concept " + std::to_string(id) + " still has knowledge");
  }
  concepts_.Remove(id);
}

void CoreKM::Mirror(const MetaKnowledge& meta)
{
  if (!concepts_.Contains(meta.concept_id))
  {
    throw std::invalid_argument("unknown concept " + std::to_string(meta.concept_id));
  }
  const MetaKey key{meta.site, meta.id};
  if (!metas_.emplace(key, meta).second)
  {
    throw std::invalid_argument("meta knowledge " + MetaName(meta.site, meta.id) +
                                " is already registered");
  }
  by_concept_.emplace(meta.concept_id, key);
}

void CoreKM::Unmirror(const std::string& site, KnowledgeId id)
{
  auto it = metas_.find({site, id});
  if (it == metas_.end())
  {
    throw std::invalid_argument("unknown meta knowledge " + MetaName(site, id));
  }
  auto range = by_concept_.equal_range(it->second.concept_id);
  for (auto c = range.first; c != range.second; ++c)
  {
    if (c->second == it->first)
    {
      by_concept_.erase(c);
      break;
    }
  }
  metas_.erase(it);
}

std::vector<MetaKnowledge> CoreKM::Find(const FindQuery& query) const
{
  std::vector<MetaKnowledge> out;
  for (ConceptId concept_id : concepts_.Subtree(query.concept_id))
  {
    auto range = by_concept_.equal_range(concept_id);
    for (auto it = range.first; it != range.second; ++it)
    {
      const MetaKnowledge& meta = metas_.at(it->second);
      if (query.task && meta.task != *query.task)
      {
        continue;
      }
      if (query.data_type && meta.data_type != *query.data_type)
      {
        continue;
      }
      out.push_back(meta);
    }
  }
  std::sort(out.begin(), out.end(), [](const MetaKnowledge& a, const MetaKnowledge& b) {
    return std::tie(a.site, a.id) < std::tie(b.site, b.id);
  });
  return out;
}

nlohmann::json CoreKM::ToJson() const
{
  nlohmann::json metas = nlohmann::json::array();
  for (const auto& [key, meta] : metas_)
  {
    metas.push_back(gridmine::km::ToJson(meta));
  }
  return {{"concepts", concepts_.ToJson()}, {"metas", std::move(metas)}};
}

CoreKM CoreKM::FromJson(const nlohmann::json& doc)
{
  CoreKM core;
  core.concepts_ = ConceptRepository::FromJson(doc.at("concepts"));
  for (const auto& m : doc.at("metas"))
  {
    core.Mirror(MetaKnowledgeFromJson(m));
  }
  return core;
}

KnowledgeId RegisterKnowledge(LocalKM& local, KnowledgeEntry entry, CoreKM& core)
{
  if (!core.Concepts().Contains(entry.meta.concept_id))
  {
    throw std::invalid_argument("unknown concept " + std::to_string(entry.meta.concept_id));
  }
  if (entry.meta.task.empty())
  {
    throw std::invalid_argument("meta knowledge needs a task kind");
  }
  ValidateRepresentative(entry.representative);
  const KnowledgeId id = local.Store(std::move(entry));
  try
  {
    core.Mirror(local.Entry(id).meta);
  }
  catch (...)
  {
    local.Remove(id);
    throw;
  }
  return id;
}

void DeleteKnowledge(LocalKM& local, KnowledgeId id, CoreKM& core)
{
  local.Entry(id);
  core.Unmirror(local.Site(), id);
  local.Remove(id);
}

std::vector<MetaKnowledge> Find(const CoreKM& core, const FindQuery& query)
{
  return core.Find(query);
}

KnowledgeEntry Retrieve(const LocalKM& local, KnowledgeId id)
{
  return local.Entry(id);
}

bool Coherent(const CoreKM& core, const std::vector<const LocalKM*>& locals)
{
  std::map<MetaKey, MetaKnowledge> united;
  for (const LocalKM* local : locals)
  {
    for (const MetaKnowledge& meta : local->Metas())
    {
      if (!united.emplace(MetaKey{meta.site, meta.id}, meta).second)
      {
        return false;
      }
    }
  }
  return united == core.Metas();
}

}  // namespace gridmine::km
