#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridmine/topology.hpp"

namespace gridmine::sim
{
struct MessageRecord
{
  NodeId from = 0;
  NodeId to = 0;
  std::string kind;
  std::uint64_t bytes = 0;
  std::uint64_t elements = 0;
  std::uint64_t round = 0;

  friend bool operator==(const MessageRecord&, const MessageRecord&) = default;
};

/// Append-only log of every inter-site message.
class MessageTrace
{
public:
  void Append(MessageRecord record);
  const std::vector<MessageRecord>& Records() const { return records_; }
  bool Empty() const { return records_.empty(); }
  std::size_t Size() const { return records_.size(); }

  nlohmann::json ToJson() const;
  static MessageTrace FromJson(const nlohmann::json& doc);

  friend bool operator==(const MessageTrace&, const MessageTrace&) = default;

private:
  std::vector<MessageRecord> records_;
};

struct RoundTotals
{
  std::uint64_t messages = 0;
  std::uint64_t elements = 0;
  std::uint64_t bytes = 0;
};

struct TraceSummary
{
  std::uint64_t messages = 0;
  std::uint64_t elements = 0;
  std::uint64_t bytes = 0;
  std::map<std::uint64_t, RoundTotals> per_round;

  nlohmann::json ToJson() const;
};

TraceSummary Account(const MessageTrace& trace);

/// The only channel between simulated sites. A payload is serialized to its
/// JSON wire form, accounted, and handed to the receiver as a fresh parse of
/// those bytes, so receivers never share memory with senders.
///
/// Sends may come from concurrent site computations. Records are kept in
/// (round, from, to) order with ties in call order, so the trace is
/// deterministic whenever each (round, from, to) stream is.
class Transport
{
public:
  nlohmann::json Send(NodeId from, NodeId to, const std::string& kind,
                      const nlohmann::json& payload, std::uint64_t elements,
                      std::uint64_t round);

  /// Length-prefixed variant used by the knowledge-map daemons: the frame is
  /// shipped as-is and its full length is accounted.
  std::string SendFrame(NodeId from, NodeId to, const std::string& kind,
                        const std::string& frame, std::uint64_t elements,
                        std::uint64_t round);

  /// Records a step that stays on one node (e.g. a local fetch).
  void RecordLocal(NodeId node, const std::string& kind, std::uint64_t bytes,
                   std::uint64_t round);

  MessageTrace Trace() const;

private:
  void Record(MessageRecord record);

  mutable std::mutex mutex_;
  std::vector<std::pair<std::uint64_t, MessageRecord>> records_;
  std::uint64_t sequence_ = 0;
};

/// Number of numeric leaves in a JSON document.
std::uint64_t CountNumericLeaves(const nlohmann::json& doc);

}  // namespace gridmine::sim
