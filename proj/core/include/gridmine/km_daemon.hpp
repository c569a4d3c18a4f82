#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridmine/knowledge_map.hpp"
#include "gridmine/transport.hpp"

namespace gridmine::km
{
/// 4-byte big-endian length followed by the JSON text.
std::string EncodeFrame(const nlohmann::json& message);
nlohmann::json DecodeFrame(const std::string& frame);

/// Everything the daemons own. The first site hosts the core.
struct KmState
{
  bool running = false;
  std::vector<std::string> sites;
  CoreKM core;
  std::map<std::string, LocalKM> locals;

  nlohmann::json ToJson() const;
  static KmState FromJson(const nlohmann::json& doc);

  friend bool operator==(const KmState&, const KmState&) = default;
};

/// One file for the core, one per site and a small daemon file, each
/// written to a temporary name and renamed into place.
void SaveState(const KmState& state, const std::string& dir);
/// A missing directory or daemon file gives a stopped, empty state.
KmState LoadState(const std::string& dir);

/// Request/reply front end of the KM daemons. Requests are JSON objects
/// with an "op" of INIT, STOP, FIND, RETRIEVE, REGISTER or ADD_CONCEPT.
/// Every exchange between the client, the site daemons and the host daemon
/// travels as a frame through the transport. Every hop takes the next round,
/// so the trace lists the steps of a request in the order they happened.
///
/// Replies are {"ok": true, "result": ...} or
/// {"ok": false, "error": {"code": ..., "message": ...}}.
class KmSystem
{
public:
  explicit KmSystem(sim::Transport& transport) : transport_(transport) {}
  KmSystem(KmState state, sim::Transport& transport)
      : state_(std::move(state)), transport_(transport)
  {
  }

  nlohmann::json Handle(const nlohmann::json& request);

  /// Handle() that returns the result and throws std::runtime_error on an
  /// error reply.
  nlohmann::json Call(const nlohmann::json& request);

  const KmState& State() const { return state_; }

private:
  sim::NodeId HostNode() const { return 0; }
  sim::NodeId SiteNode(const std::string& site) const;
  sim::NodeId ClientNode() const { return state_.sites.size(); }

  nlohmann::json Exchange(sim::NodeId from, sim::NodeId to, const std::string& kind,
                          const nlohmann::json& message);

  nlohmann::json DoInit(const nlohmann::json& request);
  nlohmann::json DoStop();
  nlohmann::json DoFind(const nlohmann::json& request);
  nlohmann::json DoRetrieve(const nlohmann::json& request);
  nlohmann::json DoRegister(const nlohmann::json& request);
  nlohmann::json DoAddConcept(const nlohmann::json& request);

  KmState state_;
  sim::Transport& transport_;
  std::mutex mutex_;
  std::uint64_t round_ = 0;
};

}  // namespace gridmine::km
