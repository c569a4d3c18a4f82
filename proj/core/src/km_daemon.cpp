#include "gridmine/km_daemon.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace gridmine::km
{
namespace fs = std::filesystem;

std::string EncodeFrame(const nlohmann::json& message)
{
  const std::string body = message.dump();
  if (body.size() > 0xFFFFFFFFu)
  {
    throw std::invalid_argument("message too large for one frame");
  }
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string frame;
  frame.reserve(4 + body.size());
  frame.push_back(static_cast<char>((n >> 24) & 0xFF));
  frame.push_back(static_cast<char>((n >> 16) & 0xFF));
  frame.push_back(static_cast<char>((n >> 8) & 0xFF));
  frame.push_back(static_cast<char>(n & 0xFF));
  frame += body;
  return frame;
}

nlohmann::json DecodeFrame(const std::string& frame)
{
  if (frame.size() < 4)
  {
    throw std::runtime_error("truncated frame header");
  }
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i)
  {
    n = (n << 8) | static_cast<unsigned char>(frame[i]);
  }
  if (frame.size() - 4 != n)
  {
    throw std::runtime_error("frame length " + std::to_string(n) + " does not match payload of " +
                             std::to_string(frame.size() - 4) + " bytes");
  }
  return nlohmann::json::parse(frame.begin() + 4, frame.end());
}

nlohmann::json KmState::ToJson() const
{
  nlohmann::json locals_doc = nlohmann::json::object();
  for (const auto& [site, local] : locals)
  {
    locals_doc[site] = local.ToJson();
  }
  return {{"running", running},
          {"sites", sites},
          {"core", core.ToJson()},
          {"locals", std::move(locals_doc)}};
}

KmState KmState::FromJson(const nlohmann::json& doc)
{
  KmState state;
  state.running = doc.at("running").get<bool>();
  state.sites = doc.at("sites").get<std::vector<std::string>>();
  state.core = CoreKM::FromJson(doc.at("core"));
  for (const auto& [site, local] : doc.at("locals").items())
  {
    state.locals.emplace(site, LocalKM::FromJson(local));
  }
  return state;
}

namespace
{
void WriteAtomically(const fs::path& path, const std::string& text)
{
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
    {
      throw std::runtime_error("cannot write " + tmp.string());
    }
    out << text;
    if (!out.flush())
    {
      throw std::runtime_error("cannot write " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

nlohmann::json ReadJsonFile(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return nlohmann::json::parse(buffer.str());
}

fs::path SiteFile(const fs::path& dir, const std::string& site)
{
  return dir / ("site_" + site + ".json");
}
}  // namespace

void SaveState(const KmState& state, const std::string& dir)
{
  const fs::path root(dir);
  fs::create_directories(root);
  WriteAtomically(root / "core.json", state.core.ToJson().dump(2) + "\n");
  for (const auto& [site, local] : state.locals)
  {
    WriteAtomically(SiteFile(root, site), local.ToJson().dump(2) + "\n");
  }
  // Written last so a reader never sees sites whose files are missing.
  nlohmann::json daemon{{"running", state.running}, {"sites", state.sites}};
  WriteAtomically(root / "daemon.json", daemon.dump(2) + "\n");
}

KmState LoadState(const std::string& dir)
{
  const fs::path root(dir);
  KmState state;
  if (!fs::exists(root / "daemon.json"))
  {
    return state;
  }
  const nlohmann::json daemon = ReadJsonFile(root / "daemon.json");
  state.running = daemon.at("running").get<bool>();
  state.sites = daemon.at("sites").get<std::vector<std::string>>();
  state.core = CoreKM::FromJson(ReadJsonFile(root / "core.json"));
  for (const std::string& site : state.sites)
  {
    state.locals.emplace(site, LocalKM::FromJson(ReadJsonFile(SiteFile(root, site))));
  }
  return state;
}

namespace
{
nlohmann::json Ok(nlohmann::json result)
{
  return {{"ok", true}, {"result", std::move(result)}};
}

nlohmann::json Error(const std::string& code, const std::string& message)
{
  return {{"ok", false}, {"error", {{"code", code}, {"message", message}}}};
}

std::string CodeFor(const std::string& message)
{
  return message.rfind("unknown ", 0) == 0 ? "not_found" : "invalid";
}

nlohmann::json MetaList(const std::vector<MetaKnowledge>& metas)
{
  nlohmann::json out = nlohmann::json::array();
  for (const MetaKnowledge& meta : metas)
  {
    out.push_back(ToJson(meta));
  }
  return out;
}

const std::set<std::string>& KnownOps()
{
  static const std::set<std::string> ops{"INIT", "STOP", "FIND", "RETRIEVE", "REGISTER",
                                         "ADD_CONCEPT"};
  return ops;
}
}  // namespace

sim::NodeId KmSystem::SiteNode(const std::string& site) const
{
  auto it = std::find(state_.sites.begin(), state_.sites.end(), site);
  if (it == state_.sites.end())
  {
    throw std::invalid_argument("unknown site '" + site + "'");
  }
  return static_cast<sim::NodeId>(it - state_.sites.begin());
}

nlohmann::json KmSystem::Exchange(sim::NodeId from, sim::NodeId to, const std::string& kind,
                                  const nlohmann::json& message)
{
  const std::string received = transport_.SendFrame(
      from, to, kind, EncodeFrame(message), sim::CountNumericLeaves(message), ++round_);
  return DecodeFrame(received);
}

nlohmann::json KmSystem::Call(const nlohmann::json& request)
{
  nlohmann::json reply = Handle(request);
  if (!reply.at("ok").get<bool>())
  {
    throw std::runtime_error(reply.at("error").at("message").get<std::string>());
  }
  return reply.at("result");
}

nlohmann::json KmSystem::Handle(const nlohmann::json& request)
{
  std::lock_guard<std::mutex> lock(mutex_);
  if (!request.is_object() || !request.contains("op") || !request.at("op").is_string())
  {
    return Error("invalid", "request needs a string \"op\"");
  }
  const std::string op = request.at("op").get<std::string>();
  if (KnownOps().count(op) == 0)
  {
    return Error("invalid", "unknown request kind '" + op + "'");
  }
  if (op == "INIT")
  {
    try
    {
      return DoInit(request);
    }
    catch (const std::exception& e)
    {
      return Error(CodeFor(e.what()), e.what());
    }
  }
  if (!state_.running)
  {
    return Error("not_running", "KM daemons are not running");
  }

  sim::NodeId target = HostNode();
  if (op == "RETRIEVE" || op == "REGISTER")
  {
    try
    {
      target = SiteNode(request.at("site").get<std::string>());
    }
    catch (const std::exception& e)
    {
      return Error(CodeFor(e.what()), e.what());
    }
  }
  const sim::NodeId client = ClientNode();
  const nlohmann::json received = Exchange(client, target, "km_request", request);

  nlohmann::json reply;
  try
  {
    if (op == "STOP")
    {
      reply = Ok(DoStop());
    }
    else if (op == "FIND")
    {
      reply = Ok(DoFind(received));
    }
    else if (op == "RETRIEVE")
    {
      reply = Ok(DoRetrieve(received));
    }
    else if (op == "REGISTER")
    {
      reply = Ok(DoRegister(received));
    }
    else
    {
      reply = Ok(DoAddConcept(received));
    }
  }
  catch (const std::exception& e)
  {
    reply = Error(CodeFor(e.what()), e.what());
  }
  nlohmann::json delivered = Exchange(target, client, "km_reply", reply);
  if (op == "RETRIEVE" && delivered.at("ok").get<bool>())
  {
    // The client rebuilds the entry from the wire form.
    KnowledgeEntry entry = KnowledgeEntryFromJson(delivered.at("result"));
    delivered["result"] = ToJson(entry);
    transport_.RecordLocal(client, "km_materialize", delivered.at("result").dump().size(),
                           ++round_);
  }
  return delivered;
}

nlohmann::json KmSystem::DoInit(const nlohmann::json& request)
{
  if (state_.running)
  {
    throw std::invalid_argument("KM daemons are already running");
  }
  const auto sites = request.at("sites").get<std::vector<std::string>>();
  if (sites.empty())
  {
    throw std::invalid_argument("init needs at least one site");
  }
  std::set<std::string> seen;
  for (const std::string& site : sites)
  {
    if (site.empty() || !seen.insert(site).second)
    {
      throw std::invalid_argument("site names must be nonempty and unique");
    }
  }
  if (!state_.sites.empty() && state_.sites != sites)
  {
    throw std::invalid_argument("sites differ from the stored repositories");
  }
  state_.sites = sites;
  for (const std::string& site : sites)
  {
    state_.locals.try_emplace(site, LocalKM(site));
  }
  const sim::NodeId client = ClientNode();
  Exchange(client, HostNode(), "km_request", request);
  for (std::size_t s = 1; s < sites.size(); ++s)
  {
    Exchange(HostNode(), s, "km_init", {{"op", "INIT"}, {"site", sites[s]}});
    Exchange(s, HostNode(), "km_ack", {{"ok", true}});
  }
  state_.running = true;
  return Exchange(HostNode(), client, "km_reply",
                  Ok({{"sites", sites}, {"host", sites.front()}}));
}

nlohmann::json KmSystem::DoStop()
{
  for (std::size_t s = 1; s < state_.sites.size(); ++s)
  {
    Exchange(HostNode(), s, "km_stop", {{"op", "STOP"}});
    Exchange(s, HostNode(), "km_ack", {{"ok", true}});
  }
  state_.running = false;
  return {{"stopped", true}};
}

nlohmann::json KmSystem::DoFind(const nlohmann::json& request)
{
  std::vector<ConceptId> scopes;
  if (request.contains("concept") && !request.at("concept").is_null())
  {
    scopes.push_back(request.at("concept").get<ConceptId>());
  }
  else
  {
    scopes = state_.core.Concepts().Roots();
  }
  std::vector<MetaKnowledge> hits;
  for (ConceptId scope : scopes)
  {
    FindQuery query;
    query.concept_id = scope;
    if (request.contains("task") && !request.at("task").is_null())
    {
      query.task = request.at("task").get<std::string>();
    }
    if (request.contains("data_type") && !request.at("data_type").is_null())
    {
      query.data_type = request.at("data_type").get<std::string>();
    }
    auto part = Find(state_.core, query);
    hits.insert(hits.end(), part.begin(), part.end());
  }
  std::sort(hits.begin(), hits.end(), [](const MetaKnowledge& a, const MetaKnowledge& b) {
    return std::tie(a.site, a.id) < std::tie(b.site, b.id);
  });
  return MetaList(hits);
}

nlohmann::json KmSystem::DoRetrieve(const nlohmann::json& request)
{
  const std::string site = request.at("site").get<std::string>();
  const KnowledgeEntry entry =
      Retrieve(state_.locals.at(site), request.at("id").get<KnowledgeId>());
  nlohmann::json doc = ToJson(entry);
  transport_.RecordLocal(SiteNode(site), "km_fetch", doc.dump().size(), ++round_);
  return doc;
}

nlohmann::json KmSystem::DoRegister(const nlohmann::json& request)
{
  const std::string site = request.at("site").get<std::string>();
  const sim::NodeId node = SiteNode(site);
  KnowledgeEntry entry = KnowledgeEntryFromJson(request.at("entry"));
  if (entry.meta.task.empty())
  {
    throw std::invalid_argument("meta knowledge needs a task kind");
  }
  ValidateRepresentative(entry.representative);
  LocalKM& local = state_.locals.at(site);
  const KnowledgeId id = local.Store(std::move(entry));
  // Synchronous mirror of the meta knowledge to the host.
  const nlohmann::json meta = ToJson(local.Entry(id).meta);
  const nlohmann::json at_host = Exchange(node, HostNode(), "km_mirror", meta);
  nlohmann::json ack;
  try
  {
    state_.core.Mirror(MetaKnowledgeFromJson(at_host));
    ack = Ok(nullptr);
  }
  catch (const std::exception& e)
  {
    ack = Error(CodeFor(e.what()), e.what());
  }
  ack = Exchange(HostNode(), node, "km_ack", ack);
  if (!ack.at("ok").get<bool>())
  {
    local.Remove(id);
    throw std::invalid_argument(ack.at("error").at("message").get<std::string>());
  }
  return {{"site", site}, {"id", id}};
}

nlohmann::json KmSystem::DoAddConcept(const nlohmann::json& request)
{
  std::optional<ConceptId> parent;
  if (request.contains("parent") && !request.at("parent").is_null())
  {
    parent = request.at("parent").get<ConceptId>();
  }
  const std::string name = request.at("name").get<std::string>();
  const ConceptId id = state_.core.AddConcept(parent, name);
  return {{"id", id}, {"name", name}, {"domain", state_.core.Concepts().Domain(id)}};
}

}  // namespace gridmine::km
