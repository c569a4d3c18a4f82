#include "gridmine/apriori.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gridmine::apriori
{
namespace
{
constexpr const char* kRequestKind = "apriori_request";
constexpr const char* kReplyKind = "apriori_reply";

// Tops larger than this would make subset enumeration explode.
constexpr std::size_t kMaxEnumeratedSize = 24;

bool Contains(const Itemset& transaction, const Itemset& itemset)
{
  return std::includes(transaction.begin(), transaction.end(), itemset.begin(), itemset.end());
}

std::uint64_t ItemElements(const std::vector<Itemset>& itemsets)
{
  std::uint64_t total = 0;
  for (const auto& itemset : itemsets)
  {
    total += itemset.size();
  }
  return total;
}

void CheckSites(const std::vector<TransactionDb>& sites, const std::size_t k)
{
  if (sites.empty())
  {
    throw std::invalid_argument("at least one site is required");
  }
  if (k < 1)
  {
    throw std::invalid_argument("requested itemset size k must be at least 1");
  }
  for (const auto& site : sites)
  {
    if (site.ItemCount() != sites.front().ItemCount())
    {
      throw std::invalid_argument("sites disagree on the item universe (" +
                                  std::to_string(site.ItemCount()) + " vs " +
                                  std::to_string(sites.front().ItemCount()) + " items)");
    }
  }
}

std::size_t TotalSize(const std::vector<TransactionDb>& sites)
{
  std::size_t total = 0;
  for (const auto& site : sites)
  {
    total += site.Size();
  }
  return total;
}

// All subsets of `itemset` with size in [low, high], in lexicographic order.
void EnumerateSubsets(const Itemset& itemset, const std::size_t low, const std::size_t high,
                      std::vector<Itemset>& out)
{
  if (itemset.size() > kMaxEnumeratedSize)
  {
    throw std::invalid_argument("itemset of size " + std::to_string(itemset.size()) +
                                " is too large to enumerate");
  }
  const std::size_t n = itemset.size();
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask)
  {
    const auto bits = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (bits < low || bits > high)
    {
      continue;
    }
    Itemset subset;
    for (std::size_t i = 0; i < n; ++i)
    {
      if ((mask >> i) & 1U)
      {
        subset.push_back(itemset[i]);
      }
    }
    out.push_back(std::move(subset));
  }
}

bool IsSubset(const Itemset& small, const Itemset& large)
{
  return small.size() <= large.size() && Contains(large, small);
}

nlohmann::json ItemsetsToJson(const std::vector<Itemset>& itemsets)
{
  nlohmann::json out = nlohmann::json::array();
  for (const auto& itemset : itemsets)
  {
    out.push_back(itemset);
  }
  return out;
}

// A site as seen by the coordinator: its data, local mining result and what
// it has already reported.
struct SiteState
{
  const TransactionDb* db = nullptr;
  LocalResult local;
  std::set<Itemset> reported;

  std::pair<std::uint64_t, bool> SupportOf(const Itemset& itemset) const
  {
    const auto it = local.frequent.find(itemset);
    if (it != local.frequent.end())
    {
      return {it->second, false};
    }
    return {db->Support(itemset), true};
  }
};

// One broadcast/gather round. Each site returns supports for the broadcast
// itemsets it has not reported yet; `known` collects them per site.
Pass CollectSupports(std::vector<SiteState>& states, const std::vector<Itemset>& broadcast,
                     const std::size_t pass_index, sim::Transport& transport,
                     const sim::NodeId coordinator,
                     std::map<Itemset, std::map<std::size_t, std::uint64_t>>& known)
{
  Pass pass;
  pass.index = pass_index;
  pass.broadcast = broadcast;
  const nlohmann::json request = {{"pass", pass_index}, {"itemsets", ItemsetsToJson(broadcast)}};
  for (std::size_t site = 0; site < states.size(); ++site)
  {
    const nlohmann::json received = transport.Send(coordinator, site, kRequestKind, request,
                                                   ItemElements(broadcast), pass_index);
    const auto asked = received.at("itemsets").get<std::vector<Itemset>>();

    SiteReply reply;
    reply.site = site;
    nlohmann::json supports = nlohmann::json::array();
    for (std::size_t i = 0; i < asked.size(); ++i)
    {
      if (states[site].reported.count(asked[i]) != 0)
      {
        continue;
      }
      const auto [support, recounted] = states[site].SupportOf(asked[i]);
      supports.push_back({i, support});
      states[site].reported.insert(asked[i]);
      ++reply.counted;
      reply.recounted += recounted ? 1 : 0;
    }
    const nlohmann::json answer =
        transport.Send(site, coordinator, kReplyKind, {{"supports", supports}},
                       2 * static_cast<std::uint64_t>(supports.size()), pass_index);
    for (const auto& entry : answer.at("supports"))
    {
      known[asked.at(entry.at(0).get<std::size_t>())][site] = entry.at(1).get<std::uint64_t>();
    }
    pass.replies.push_back(reply);
  }
  return pass;
}

std::uint64_t KnownSum(const std::map<std::size_t, std::uint64_t>& per_site)
{
  std::uint64_t sum = 0;
  for (const auto& [site, support] : per_site)
  {
    sum += support;
  }
  return sum;
}

}  // namespace

void TransactionDb::Add(std::vector<Item> transaction)
{
  std::sort(transaction.begin(), transaction.end());
  if (std::adjacent_find(transaction.begin(), transaction.end()) != transaction.end())
  {
    throw std::invalid_argument("transaction contains a duplicate item");
  }
  for (const Item item : transaction)
  {
    if (item < 0 || static_cast<std::size_t>(item) >= item_count_)
    {
      throw std::invalid_argument("item " + std::to_string(item) + " is outside the universe of " +
                                  std::to_string(item_count_) + " items");
    }
  }
  transactions_.push_back(std::move(transaction));
}

std::uint64_t TransactionDb::Support(const Itemset& itemset) const
{
  std::uint64_t count = 0;
  for (const auto& transaction : transactions_)
  {
    count += Contains(transaction, itemset) ? 1 : 0;
  }
  return count;
}

void WriteTransactions(const TransactionDb& db, std::ostream& out)
{
  for (const auto& transaction : db.Transactions())
  {
    for (std::size_t i = 0; i < transaction.size(); ++i)
    {
      if (i != 0)
      {
        out << ' ';
      }
      out << transaction[i];
    }
    out << '\n';
  }
}

TransactionDb ReadTransactions(std::istream& in, const std::size_t item_count)
{
  std::vector<std::vector<Item>> rows;
  Item largest = -1;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line))
  {
    ++line_number;
    if (!line.empty() && line.back() == '\r')
    {
      line.pop_back();
    }
    std::vector<Item> row;
    std::istringstream fields(line);
    std::string token;
    while (fields >> token)
    {
      Item item = 0;
      const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), item);
      if (ec != std::errc() || end != token.data() + token.size() || item < 0)
      {
        throw std::runtime_error("line " + std::to_string(line_number) + ": bad item '" +
                                 token + "'");
      }
      largest = std::max(largest, item);
      row.push_back(item);
    }
    rows.push_back(std::move(row));
  }
  const std::size_t universe =
      item_count != 0 ? item_count : static_cast<std::size_t>(largest + 1);
  TransactionDb db(universe);
  for (std::size_t i = 0; i < rows.size(); ++i)
  {
    try
    {
      db.Add(std::move(rows[i]));
    }
    catch (const std::invalid_argument& error)
    {
      throw std::runtime_error("line " + std::to_string(i + 1) + ": " + error.what());
    }
  }
  return db;
}

void SaveTransactions(const TransactionDb& db, const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  WriteTransactions(db, out);
  if (!out)
  {
    throw std::runtime_error("failed writing " + path);
  }
}

TransactionDb LoadTransactions(const std::string& path, const std::size_t item_count)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw std::runtime_error("cannot open " + path);
  }
  return ReadTransactions(in, item_count);
}

std::vector<TransactionDb> SplitRoundRobin(const TransactionDb& db, const std::size_t site_count)
{
  if (site_count == 0)
  {
    throw std::invalid_argument("site count must be at least 1");
  }
  std::vector<TransactionDb> sites(site_count, TransactionDb(db.ItemCount()));
  for (std::size_t i = 0; i < db.Size(); ++i)
  {
    sites[i % site_count].Add(db.Transactions()[i]);
  }
  return sites;
}

TransactionDb Concatenate(const std::vector<TransactionDb>& sites)
{
  TransactionDb all(sites.empty() ? 0 : sites.front().ItemCount());
  for (const auto& site : sites)
  {
    if (site.ItemCount() != all.ItemCount())
    {
      throw std::invalid_argument("sites disagree on the item universe");
    }
    for (const auto& transaction : site.Transactions())
    {
      all.Add(transaction);
    }
  }
  return all;
}

BasketSpec BasketSpecFromJson(const nlohmann::json& doc)
{
  BasketSpec spec;
  spec.transactions = doc.at("transactions").get<std::size_t>();
  spec.items = doc.at("items").get<std::size_t>();
  if (doc.contains("patterns"))
  {
    for (const auto& entry : doc.at("patterns"))
    {
      PlantedPattern pattern;
      pattern.items = entry.at("items").get<Itemset>();
      pattern.probability = entry.at("probability").get<double>();
      spec.patterns.push_back(std::move(pattern));
    }
  }
  spec.random_patterns = doc.value("random_patterns", spec.random_patterns);
  spec.pattern_size = doc.value("pattern_size", spec.pattern_size);
  spec.pattern_probability = doc.value("pattern_probability", spec.pattern_probability);
  spec.max_noise_items = doc.value("max_noise_items", spec.max_noise_items);
  spec.seed = doc.value("seed", spec.seed);
  return spec;
}

nlohmann::json ToJson(const BasketSpec& spec)
{
  nlohmann::json patterns = nlohmann::json::array();
  for (const auto& pattern : spec.patterns)
  {
    patterns.push_back({{"items", pattern.items}, {"probability", pattern.probability}});
  }
  return {{"kind", "basket"},
          {"transactions", spec.transactions},
          {"items", spec.items},
          {"patterns", patterns},
          {"random_patterns", spec.random_patterns},
          {"pattern_size", spec.pattern_size},
          {"pattern_probability", spec.pattern_probability},
          {"max_noise_items", spec.max_noise_items},
          {"seed", spec.seed}};
}

TransactionDb GenerateBaskets(const BasketSpec& spec)
{
  if (spec.items == 0)
  {
    throw std::invalid_argument("basket spec needs at least one item");
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<PlantedPattern> patterns = spec.patterns;
  for (auto& pattern : patterns)
  {
    std::sort(pattern.items.begin(), pattern.items.end());
    pattern.items.erase(std::unique(pattern.items.begin(), pattern.items.end()),
                        pattern.items.end());
  }
  if (spec.random_patterns > 0)
  {
    if (spec.pattern_size == 0 || spec.pattern_size > spec.items)
    {
      throw std::invalid_argument("pattern size must lie in [1, items]");
    }
    std::vector<Item> universe(spec.items);
    for (std::size_t i = 0; i < spec.items; ++i)
    {
      universe[i] = static_cast<Item>(i);
    }
    for (std::size_t p = 0; p < spec.random_patterns; ++p)
    {
      std::shuffle(universe.begin(), universe.end(), rng);
      Itemset items(universe.begin(),
                    universe.begin() + static_cast<std::ptrdiff_t>(spec.pattern_size));
      std::sort(items.begin(), items.end());
      patterns.push_back(PlantedPattern{std::move(items), spec.pattern_probability});
    }
  }
  for (const auto& pattern : patterns)
  {
    if (pattern.probability < 0.0 || pattern.probability > 1.0)
    {
      throw std::invalid_argument("pattern probability must lie in [0, 1]");
    }
    for (const Item item : pattern.items)
    {
      if (item < 0 || static_cast<std::size_t>(item) >= spec.items)
      {
        throw std::invalid_argument("pattern item outside the universe");
      }
    }
  }

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> noise_count(0, spec.max_noise_items);
  std::uniform_int_distribution<Item> any_item(0, static_cast<Item>(spec.items - 1));
  TransactionDb db(spec.items);
  for (std::size_t t = 0; t < spec.transactions; ++t)
  {
    std::set<Item> basket;
    for (const auto& pattern : patterns)
    {
      if (coin(rng) < pattern.probability)
      {
        basket.insert(pattern.items.begin(), pattern.items.end());
      }
    }
    const std::size_t noise = noise_count(rng);
    for (std::size_t i = 0; i < noise; ++i)
    {
      basket.insert(any_item(rng));
    }
    db.Add(std::vector<Item>(basket.begin(), basket.end()));
  }
  return db;
}

std::size_t LocalResult::CandidateCount() const
{
  std::size_t total = 0;
  for (const std::size_t level : level_candidates)
  {
    total += level;
  }
  return total;
}

std::vector<Itemset> GenerateCandidates(const std::vector<Itemset>& frequent_level)
{
  std::vector<Itemset> sorted = frequent_level;
  std::sort(sorted.begin(), sorted.end());
  const std::set<Itemset> lookup(sorted.begin(), sorted.end());
  std::vector<Itemset> candidates;
  for (std::size_t i = 0; i < sorted.size(); ++i)
  {
    for (std::size_t j = i + 1; j < sorted.size(); ++j)
    {
      const Itemset& a = sorted[i];
      const Itemset& b = sorted[j];
      if (!std::equal(a.begin(), a.end() - 1, b.begin(), b.end() - 1))
      {
        break;
      }
      Itemset joined = a;
      joined.push_back(b.back());
      bool all_frequent = true;
      for (std::size_t drop = 0; drop + 2 < joined.size() && all_frequent; ++drop)
      {
        Itemset subset = joined;
        subset.erase(subset.begin() + static_cast<std::ptrdiff_t>(drop));
        all_frequent = lookup.count(subset) != 0;
      }
      if (all_frequent)
      {
        candidates.push_back(std::move(joined));
      }
    }
  }
  return candidates;
}

LocalResult AprioriLocal(const TransactionDb& db, const std::uint64_t min_support,
                         const std::size_t max_size)
{
  if (min_support < 1)
  {
    throw std::invalid_argument("min_support must be at least 1");
  }
  LocalResult result;
  if (db.Empty())
  {
    return result;
  }

  std::vector<std::uint64_t> singles(db.ItemCount(), 0);
  for (const auto& transaction : db.Transactions())
  {
    for (const Item item : transaction)
    {
      ++singles[static_cast<std::size_t>(item)];
    }
  }
  result.level_candidates.push_back(db.ItemCount());
  std::vector<Itemset> level;
  for (std::size_t item = 0; item < singles.size(); ++item)
  {
    if (singles[item] >= min_support)
    {
      Itemset single{static_cast<Item>(item)};
      result.frequent.emplace(single, singles[item]);
      level.push_back(std::move(single));
    }
  }

  for (std::size_t size = 2; !level.empty() && (max_size == 0 || size <= max_size); ++size)
  {
    const std::vector<Itemset> candidates = GenerateCandidates(level);
    if (candidates.empty())
    {
      break;
    }
    result.level_candidates.push_back(candidates.size());
    std::vector<std::uint64_t> counts(candidates.size(), 0);
    for (const auto& transaction : db.Transactions())
    {
      if (transaction.size() < size)
      {
        continue;
      }
      for (std::size_t c = 0; c < candidates.size(); ++c)
      {
        counts[c] += Contains(transaction, candidates[c]) ? 1 : 0;
      }
    }
    level.clear();
    for (std::size_t c = 0; c < candidates.size(); ++c)
    {
      if (counts[c] >= min_support)
      {
        result.frequent.emplace(candidates[c], counts[c]);
        level.push_back(candidates[c]);
      }
    }
  }
  return result;
}

std::set<Itemset> MaximalItemsets(const SupportTable& table)
{
  std::set<Itemset> maximal;
  // Proper supersets are exactly one item larger somewhere in a closed table,
  // but tables built by hand need not be closed, so check every larger entry.
  for (const auto& [itemset, support] : table)
  {
    bool has_superset = false;
    for (const auto& [other, other_support] : table)
    {
      if (other.size() > itemset.size() && IsSubset(itemset, other))
      {
        has_superset = true;
        break;
      }
    }
    if (!has_superset)
    {
      maximal.insert(itemset);
    }
  }
  return maximal;
}

std::uint64_t LocalThreshold(const std::uint64_t global_support, const std::size_t site_size,
                             const std::size_t total_size)
{
  if (total_size == 0)
  {
    return std::max<std::uint64_t>(1, global_support);
  }
  // ceil(S * n_i / N) without overflowing S * n_i.
  const std::uint64_t quotient = global_support / total_size;
  const std::uint64_t remainder = global_support % total_size;
  const std::uint64_t threshold =
      quotient * site_size + (remainder * site_size + total_size - 1) / total_size;
  return std::max<std::uint64_t>(1, threshold);
}

std::uint64_t AbsoluteSupport(const double relative, const std::size_t transactions)
{
  if (!(relative > 0.0) || relative > 1.0)
  {
    throw std::invalid_argument("relative support must lie in (0, 1]");
  }
  const double scaled = relative * static_cast<double>(transactions);
  // Guard against 0.1 * 100 landing a hair above 10.
  const double rounded = std::round(scaled);
  const double value = std::abs(scaled - rounded) < 1e-9 ? rounded : std::ceil(scaled);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(value));
}

std::size_t PassTrace::CandidateCount() const
{
  std::size_t total = 0;
  for (const std::size_t local : local_candidates)
  {
    total += local;
  }
  for (const auto& pass : passes)
  {
    for (const auto& reply : pass.replies)
    {
      total += reply.recounted;
    }
  }
  return total;
}

nlohmann::json PassTrace::ToJson() const
{
  nlohmann::json out = nlohmann::json::array();
  for (const auto& pass : passes)
  {
    nlohmann::json replies = nlohmann::json::array();
    for (const auto& reply : pass.replies)
    {
      replies.push_back(
          {{"site", reply.site}, {"counted", reply.counted}, {"recounted", reply.recounted}});
    }
    out.push_back({{"pass", pass.index},
                   {"broadcast", ItemsetsToJson(pass.broadcast)},
                   {"replies", std::move(replies)}});
  }
  return out;
}

DistributedResult GlobalTopDown(const std::vector<TransactionDb>& sites, const std::size_t k,
                                const std::uint64_t min_support, sim::Transport& transport,
                                const sim::NodeId coordinator)
{
  CheckSites(sites, k);
  if (min_support < 1)
  {
    throw std::invalid_argument("global min_support must be at least 1");
  }
  const std::size_t m = sites.size();
  const std::size_t total = TotalSize(sites);
  const std::size_t items = sites.front().ItemCount();

  // Local mining phase, independent per site.
  std::vector<std::future<LocalResult>> mining;
  for (const auto& site : sites)
  {
    const std::uint64_t threshold = LocalThreshold(min_support, site.Size(), total);
    mining.push_back(std::async(std::launch::async, [&site, threshold, k] {
      return AprioriLocal(site, threshold, k);
    }));
  }
  std::vector<SiteState> states(m);
  DistributedResult result;
  for (std::size_t i = 0; i < m; ++i)
  {
    states[i].db = &sites[i];
    states[i].local = mining[i].get();
    result.trace.local_candidates.push_back(states[i].local.CandidateCount());
  }

  // Pass 1: maximal itemsets of each site's lattice cut at k, plus singletons.
  std::map<Itemset, std::map<std::size_t, std::uint64_t>> known;
  std::vector<std::uint64_t> singles(items, 0);
  {
    Pass pass;
    pass.index = 1;
    const nlohmann::json request = {{"pass", 1}, {"k", k}};
    for (std::size_t i = 0; i < m; ++i)
    {
      transport.Send(coordinator, i, kRequestKind, request, 1, 1);
      nlohmann::json tops = nlohmann::json::array();
      std::uint64_t elements = 0;
      for (const auto& top : MaximalItemsets(states[i].local.frequent))
      {
        tops.push_back({{"items", top}, {"support", states[i].local.frequent.at(top)}});
        elements += top.size() + 1;
        states[i].reported.insert(top);
      }
      std::vector<std::uint64_t> site_singles(items, 0);
      for (const auto& transaction : sites[i].Transactions())
      {
        for (const Item item : transaction)
        {
          ++site_singles[static_cast<std::size_t>(item)];
        }
      }
      const nlohmann::json reply = transport.Send(
          i, coordinator, kReplyKind, {{"tops", tops}, {"singletons", site_singles}},
          elements + items, 1);
      for (const auto& entry : reply.at("tops"))
      {
        known[entry.at("items").get<Itemset>()][i] = entry.at("support").get<std::uint64_t>();
      }
      const auto received = reply.at("singletons").get<std::vector<std::uint64_t>>();
      for (std::size_t item = 0; item < items; ++item)
      {
        singles[item] += received.at(item);
      }
      pass.replies.push_back(SiteReply{i, tops.size() + items, 0});
    }
    result.trace.passes.push_back(std::move(pass));
  }

  std::set<Item> frequent_items;
  for (std::size_t item = 0; item < items; ++item)
  {
    if (singles[item] >= min_support)
    {
      frequent_items.insert(static_cast<Item>(item));
      result.itemsets.insert(Itemset{static_cast<Item>(item)});
    }
  }

  // Candidates reduced to globally frequent items: every frequent itemset of
  // size >= 2 lies inside one of them.
  std::set<Itemset> reduced;
  for (const auto& [top, per_site] : known)
  {
    Itemset r;
    for (const Item item : top)
    {
      if (frequent_items.count(item) != 0)
      {
        r.push_back(item);
      }
    }
    if (r.size() >= 2)
    {
      reduced.insert(std::move(r));
    }
  }

  auto is_frequent_known = [&](const Itemset& itemset) {
    const auto it = known.find(itemset);
    return it != known.end() && KnownSum(it->second) >= min_support;
  };
  auto is_complete = [&](const Itemset& itemset) {
    const auto it = known.find(itemset);
    return it != known.end() && it->second.size() == m;
  };

  if (m >= 2 && !reduced.empty())
  {
    // Pass 2: missing supports of the candidates, plus the pairs inside any
    // candidate not yet known to be frequent.
    std::set<Itemset> wanted;
    for (const auto& r : reduced)
    {
      if (is_frequent_known(r))
      {
        continue;
      }
      if (!is_complete(r))
      {
        wanted.insert(r);
      }
      if (r.size() >= 3)
      {
        std::vector<Itemset> pairs;
        EnumerateSubsets(r, 2, 2, pairs);
        for (auto& pair : pairs)
        {
          if (!is_complete(pair) && !is_frequent_known(pair))
          {
            wanted.insert(std::move(pair));
          }
        }
      }
    }
    result.trace.passes.push_back(CollectSupports(
        states, std::vector<Itemset>(wanted.begin(), wanted.end()), 2, transport, coordinator,
        known));
  }

  std::vector<Itemset> frequent_roots;
  std::vector<Itemset> failed;
  for (const auto& r : reduced)
  {
    if (is_frequent_known(r))
    {
      frequent_roots.push_back(r);
    }
    else
    {
      failed.push_back(r);
    }
  }
  auto under_frequent_root = [&](const Itemset& itemset) {
    return std::any_of(frequent_roots.begin(), frequent_roots.end(),
                       [&](const Itemset& root) { return IsSubset(itemset, root); });
  };

  // Pairs inside failed candidates are now known exactly (or lie under a
  // frequent root). Anything with an infrequent pair is infrequent.
  std::set<Itemset> infrequent_pairs;
  for (const auto& r : failed)
  {
    std::vector<Itemset> pairs;
    EnumerateSubsets(r, 2, 2, pairs);
    for (auto& pair : pairs)
    {
      if (under_frequent_root(pair) || is_frequent_known(pair))
      {
        frequent_roots.push_back(pair);
      }
      else if (is_complete(pair))
      {
        infrequent_pairs.insert(pair);
      }
      else
      {
        throw std::logic_error("support of pair " + ToString(pair) + " was never collected");
      }
    }
  }

  std::set<Itemset> pass3;
  for (const auto& r : failed)
  {
    if (r.size() < 4)
    {
      continue;
    }
    std::vector<Itemset> subsets;
    EnumerateSubsets(r, 3, r.size() - 1, subsets);
    for (auto& subset : subsets)
    {
      if (under_frequent_root(subset) || is_frequent_known(subset))
      {
        continue;
      }
      std::vector<Itemset> pairs;
      EnumerateSubsets(subset, 2, 2, pairs);
      const bool pruned = std::any_of(pairs.begin(), pairs.end(), [&](const Itemset& pair) {
        return infrequent_pairs.count(pair) != 0;
      });
      if (pruned)
      {
        continue;
      }
      if (!is_complete(subset))
      {
        pass3.insert(std::move(subset));
      }
      else if (is_frequent_known(subset))
      {
        frequent_roots.push_back(std::move(subset));
      }
    }
  }
  if (!pass3.empty())
  {
    result.trace.passes.push_back(CollectSupports(
        states, std::vector<Itemset>(pass3.begin(), pass3.end()), 3, transport, coordinator,
        known));
  }
  for (const auto& itemset : pass3)
  {
    if (is_frequent_known(itemset))
    {
      frequent_roots.push_back(itemset);
    }
  }

  for (const auto& root : frequent_roots)
  {
    std::vector<Itemset> subsets;
    EnumerateSubsets(root, 1, root.size(), subsets);
    result.itemsets.insert(subsets.begin(), subsets.end());
  }
  return result;
}

DistributedResult GlobalTopDown(const std::vector<TransactionDb>& sites, const std::size_t k,
                                const std::uint64_t min_support)
{
  sim::Transport transport;
  return GlobalTopDown(sites, k, min_support, transport, sites.size());
}

DistributedResult ClassicalBaseline(const std::vector<TransactionDb>& sites, const std::size_t k,
                                    const std::uint64_t min_support, sim::Transport& transport,
                                    const sim::NodeId coordinator)
{
  CheckSites(sites, k);
  if (min_support < 1)
  {
    throw std::invalid_argument("global min_support must be at least 1");
  }
  const std::size_t m = sites.size();
  DistributedResult result;
  result.trace.local_candidates.assign(m, 0);

  std::vector<Itemset> candidates;
  for (std::size_t item = 0; item < sites.front().ItemCount(); ++item)
  {
    candidates.push_back(Itemset{static_cast<Item>(item)});
  }
  for (std::size_t size = 1; size <= k && !candidates.empty(); ++size)
  {
    Pass pass;
    pass.index = size;
    pass.broadcast = candidates;
    std::vector<std::uint64_t> global(candidates.size(), 0);
    const nlohmann::json request = {{"pass", size}, {"itemsets", ItemsetsToJson(candidates)}};
    for (std::size_t i = 0; i < m; ++i)
    {
      const nlohmann::json received = transport.Send(coordinator, i, kRequestKind, request,
                                                     ItemElements(candidates), size);
      std::vector<std::uint64_t> counts;
      for (const auto& itemset : received.at("itemsets").get<std::vector<Itemset>>())
      {
        counts.push_back(sites[i].Support(itemset));
      }
      const nlohmann::json reply = transport.Send(i, coordinator, kReplyKind,
                                                  {{"supports", counts}}, counts.size(), size);
      const auto returned = reply.at("supports").get<std::vector<std::uint64_t>>();
      for (std::size_t c = 0; c < returned.size(); ++c)
      {
        global[c] += returned[c];
      }
      pass.replies.push_back(SiteReply{i, counts.size(), counts.size()});
    }
    result.trace.passes.push_back(std::move(pass));

    std::vector<Itemset> level;
    for (std::size_t c = 0; c < candidates.size(); ++c)
    {
      if (global[c] >= min_support)
      {
        result.itemsets.insert(candidates[c]);
        level.push_back(candidates[c]);
      }
    }
    candidates = size < k ? GenerateCandidates(level) : std::vector<Itemset>{};
  }
  return result;
}

DistributedResult ClassicalBaseline(const std::vector<TransactionDb>& sites, const std::size_t k,
                                    const std::uint64_t min_support)
{
  sim::Transport transport;
  return ClassicalBaseline(sites, k, min_support, transport, sites.size());
}

double CandidateRatio(const PassTrace& a, const PassTrace& b)
{
  const std::size_t denominator = b.CandidateCount();
  if (denominator == 0)
  {
    throw std::invalid_argument("candidate ratio with zero candidates in the second run");
  }
  return static_cast<double>(a.CandidateCount()) / static_cast<double>(denominator);
}

std::set<Itemset> CentralizedFrequent(const std::vector<TransactionDb>& sites, const std::size_t k,
                                      const std::uint64_t min_support)
{
  std::set<Itemset> out;
  for (const auto& [itemset, support] : AprioriLocal(Concatenate(sites), min_support, k).frequent)
  {
    out.insert(itemset);
  }
  return out;
}

std::string ToString(const Itemset& itemset)
{
  std::string out = "{";
  for (std::size_t i = 0; i < itemset.size(); ++i)
  {
    out += (i == 0 ? "" : ",") + std::to_string(itemset[i]);
  }
  return out + "}";
}

}  // namespace gridmine::apriori
