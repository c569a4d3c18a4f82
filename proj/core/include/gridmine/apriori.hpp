#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gridmine/transport.hpp"

namespace gridmine::apriori
{
using Item = int;
/// Items in strictly ascending order.
using Itemset = std::vector<Item>;
using SupportTable = std::map<Itemset, std::uint64_t>;

/// Transactions over the item universe [0, item_count).
class TransactionDb
{
public:
  TransactionDb() = default;
  explicit TransactionDb(std::size_t item_count) : item_count_(item_count) {}

  /// Sorts the items; duplicates or ids outside the universe are errors.
  void Add(std::vector<Item> transaction);

  std::size_t ItemCount() const { return item_count_; }
  std::size_t Size() const { return transactions_.size(); }
  bool Empty() const { return transactions_.empty(); }
  const std::vector<Itemset>& Transactions() const { return transactions_; }

  std::uint64_t Support(const Itemset& itemset) const;

  friend bool operator==(const TransactionDb&, const TransactionDb&) = default;

private:
  std::size_t item_count_ = 0;
  std::vector<Itemset> transactions_;
};

/// One transaction per line, items separated by spaces. The universe is one
/// past the largest item unless `item_count` is given.
void WriteTransactions(const TransactionDb& db, std::ostream& out);
TransactionDb ReadTransactions(std::istream& in, std::size_t item_count = 0);
void SaveTransactions(const TransactionDb& db, const std::string& path);
TransactionDb LoadTransactions(const std::string& path, std::size_t item_count = 0);

/// Round-robin split of the transactions over m sites.
std::vector<TransactionDb> SplitRoundRobin(const TransactionDb& db, std::size_t site_count);
TransactionDb Concatenate(const std::vector<TransactionDb>& sites);

struct PlantedPattern
{
  Itemset items;
  double probability = 0.0;
};

/// Synthetic market baskets: each transaction contains every planted pattern
/// independently with its probability, plus uniformly drawn noise items.
struct BasketSpec
{
  std::size_t transactions = 0;
  std::size_t items = 0;
  std::vector<PlantedPattern> patterns;
  /// Random patterns added on top of the explicit ones.
  std::size_t random_patterns = 0;
  std::size_t pattern_size = 3;
  double pattern_probability = 0.3;
  /// Noise items per transaction are drawn uniformly from [0, max_noise_items].
  std::size_t max_noise_items = 3;
  std::uint64_t seed = 42;
};

BasketSpec BasketSpecFromJson(const nlohmann::json& doc);
nlohmann::json ToJson(const BasketSpec& spec);
TransactionDb GenerateBaskets(const BasketSpec& spec);

struct LocalResult
{
  SupportTable frequent;
  /// Candidates whose support was counted, per level starting at size 1.
  std::vector<std::size_t> level_candidates;

  std::size_t CandidateCount() const;
};

/// Level-wise Apriori with subset pruning. `max_size` of 0 means unbounded.
LocalResult AprioriLocal(const TransactionDb& db, std::uint64_t min_support,
                         std::size_t max_size = 0);

/// Candidates of size L+1 whose every L-subset is in `frequent_level`.
std::vector<Itemset> GenerateCandidates(const std::vector<Itemset>& frequent_level);

/// Frequent itemsets with no frequent proper superset in the table.
std::set<Itemset> MaximalItemsets(const SupportTable& table);

/// Local threshold max(1, ceil(S * n_i / N)).
std::uint64_t LocalThreshold(std::uint64_t global_support, std::size_t site_size,
                             std::size_t total_size);

/// Relative support in (0, 1] to an absolute count, rounded up.
std::uint64_t AbsoluteSupport(double relative, std::size_t transactions);

struct SiteReply
{
  std::size_t site = 0;
  /// Support values returned to the coordinator in this pass.
  std::size_t counted = 0;
  /// Of those, values computed by rescanning raw transactions.
  std::size_t recounted = 0;
};

struct Pass
{
  std::size_t index = 0;
  std::vector<Itemset> broadcast;
  std::vector<SiteReply> replies;
};

struct PassTrace
{
  std::vector<Pass> passes;
  /// Candidates counted by each site before any communication.
  std::vector<std::size_t> local_candidates;

  std::size_t PassCount() const { return passes.size(); }
  /// Every support value a site computed during the run, local or remote.
  std::size_t CandidateCount() const;

  nlohmann::json ToJson() const;
};

struct DistributedResult
{
  std::set<Itemset> itemsets;
  PassTrace trace;
};

/// Top-down collection: sites mine locally, send their maximal itemsets of
/// the lattice cut at size k together with all singleton supports, then the
/// coordinator asks for the missing supports of those candidates and finally
/// for the subsets of any candidate that failed. Result: every itemset of
/// size <= k with global support >= min_support.
DistributedResult GlobalTopDown(const std::vector<TransactionDb>& sites, std::size_t k,
                                std::uint64_t min_support, sim::Transport& transport,
                                sim::NodeId coordinator);
DistributedResult GlobalTopDown(const std::vector<TransactionDb>& sites, std::size_t k,
                                std::uint64_t min_support);

/// Level-wise baseline: one broadcast/gather pass per itemset size.
DistributedResult ClassicalBaseline(const std::vector<TransactionDb>& sites, std::size_t k,
                                    std::uint64_t min_support, sim::Transport& transport,
                                    sim::NodeId coordinator);
DistributedResult ClassicalBaseline(const std::vector<TransactionDb>& sites, std::size_t k,
                                    std::uint64_t min_support);

/// |candidates(a)| / |candidates(b)|.
double CandidateRatio(const PassTrace& a, const PassTrace& b);

/// Frequent itemsets of size <= k on the concatenated data.
std::set<Itemset> CentralizedFrequent(const std::vector<TransactionDb>& sites, std::size_t k,
                                      std::uint64_t min_support);

std::string ToString(const Itemset& itemset);

}  // namespace gridmine::apriori
