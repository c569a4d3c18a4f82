#include "gridmine/transport.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace gridmine::sim
{
void MessageTrace::Append(MessageRecord record)
{
  if (!records_.empty() && record.round < records_.back().round)
  {
    throw std::logic_error("message rounds must be non-decreasing");
  }
  records_.push_back(std::move(record));
}

nlohmann::json MessageTrace::ToJson() const
{
  nlohmann::json out = nlohmann::json::array();
  for (const auto& record : records_)
  {
    out.push_back({{"round", record.round},
                   {"from", record.from},
                   {"to", record.to},
                   {"kind", record.kind},
                   {"bytes", record.bytes},
                   {"elements", record.elements}});
  }
  return out;
}

MessageTrace MessageTrace::FromJson(const nlohmann::json& doc)
{
  MessageTrace trace;
  for (const auto& entry : doc)
  {
    trace.Append(MessageRecord{entry.at("from").get<NodeId>(), entry.at("to").get<NodeId>(),
                               entry.at("kind").get<std::string>(),
                               entry.at("bytes").get<std::uint64_t>(),
                               entry.at("elements").get<std::uint64_t>(),
                               entry.at("round").get<std::uint64_t>()});
  }
  return trace;
}

nlohmann::json TraceSummary::ToJson() const
{
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& [round, totals] : per_round)
  {
    rounds.push_back({{"round", round},
                      {"messages", totals.messages},
                      {"elements", totals.elements},
                      {"bytes", totals.bytes}});
  }
  return {{"messages", messages}, {"elements", elements}, {"bytes", bytes}, {"rounds", rounds}};
}

TraceSummary Account(const MessageTrace& trace)
{
  TraceSummary summary;
  for (const auto& record : trace.Records())
  {
    summary.messages += 1;
    summary.elements += record.elements;
    summary.bytes += record.bytes;
    auto& round = summary.per_round[record.round];
    round.messages += 1;
    round.elements += record.elements;
    round.bytes += record.bytes;
  }
  return summary;
}

nlohmann::json Transport::Send(const NodeId from, const NodeId to, const std::string& kind,
                               const nlohmann::json& payload, const std::uint64_t elements,
                               const std::uint64_t round)
{
  const std::string wire = payload.dump();
  Record(MessageRecord{from, to, kind, wire.size(), elements, round});
  return nlohmann::json::parse(wire);
}

std::string Transport::SendFrame(const NodeId from, const NodeId to, const std::string& kind,
                                 const std::string& frame, const std::uint64_t elements,
                                 const std::uint64_t round)
{
  Record(MessageRecord{from, to, kind, frame.size(), elements, round});
  return std::string(frame);
}

void Transport::RecordLocal(const NodeId node, const std::string& kind, const std::uint64_t bytes,
                            const std::uint64_t round)
{
  Record(MessageRecord{node, node, kind, bytes, 0, round});
}

void Transport::Record(MessageRecord record)
{
  std::lock_guard<std::mutex> lock(mutex_);
  records_.emplace_back(sequence_++, std::move(record));
}

MessageTrace Transport::Trace() const
{
  std::vector<std::pair<std::uint64_t, MessageRecord>> sorted;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    sorted = records_;
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.second.round, a.second.from, a.second.to, a.first) <
           std::tie(b.second.round, b.second.from, b.second.to, b.first);
  });
  MessageTrace trace;
  for (auto& entry : sorted)
  {
    trace.Append(std::move(entry.second));
  }
  return trace;
}

std::uint64_t CountNumericLeaves(const nlohmann::json& doc)
{
  if (doc.is_number())
  {
    return 1;
  }
  std::uint64_t total = 0;
  if (doc.is_array() || doc.is_object())
  {
    for (const auto& child : doc)
    {
      total += CountNumericLeaves(child);
    }
  }
  return total;
}

}  // namespace gridmine::sim
