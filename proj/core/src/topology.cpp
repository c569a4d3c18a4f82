#include "gridmine/topology.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gridmine::sim
{
TopologyKind TopologyKindFromString(const std::string& name)
{
  if (name == "star" || name == "star_1n")
  {
    return TopologyKind::Star;
  }
  if (name == "binary" || name == "binary_tree")
  {
    return TopologyKind::BinaryTree;
  }
  if (name == "tree_p" || name == "treep")
  {
    return TopologyKind::TreeP;
  }
  throw std::invalid_argument("unknown topology kind: " + name);
}

std::string ToString(const TopologyKind kind)
{
  switch (kind)
  {
    case TopologyKind::Star:
      return "star_1n";
    case TopologyKind::BinaryTree:
      return "binary_tree";
    case TopologyKind::TreeP:
      return "tree_p";
  }
  return "unknown";
}

Topology Topology::Build(const std::size_t site_count, const TopologyKind kind,
                         const std::optional<std::size_t> group_size)
{
  if (site_count == 0)
  {
    throw std::invalid_argument("topology needs at least one site");
  }
  Topology topology;
  topology.kind_ = kind;
  topology.leaf_count_ = site_count;
  switch (kind)
  {
    case TopologyKind::BinaryTree:
      topology.group_size_ = 2;
      break;
    case TopologyKind::Star:
      topology.group_size_ = site_count;
      break;
    case TopologyKind::TreeP:
      if (!group_size.has_value())
      {
        throw std::invalid_argument("tree_p topology requires a group size p");
      }
      if (*group_size < 2)
      {
        throw std::invalid_argument("tree_p group size must be at least 2");
      }
      topology.group_size_ = *group_size;
      break;
  }

  std::vector<NodeId> current;
  for (NodeId leaf = 0; leaf < site_count; ++leaf)
  {
    topology.nodes_.push_back(TopologyNode{leaf, std::nullopt, {}, 0});
    current.push_back(leaf);
  }
  topology.levels_.push_back(current);

  const std::size_t group = std::max<std::size_t>(topology.group_size_, 2);
  while (current.size() > 1)
  {
    const std::size_t level = topology.levels_.size();
    std::vector<NodeId> next;
    for (std::size_t begin = 0; begin < current.size(); begin += group)
    {
      const std::size_t end = std::min(begin + group, current.size());
      if (end - begin == 1)
      {
        next.push_back(current[begin]);
        continue;
      }
      const NodeId parent = topology.nodes_.size();
      TopologyNode node{parent, std::nullopt, {}, level};
      for (std::size_t i = begin; i < end; ++i)
      {
        node.children.push_back(current[i]);
        topology.nodes_.at(current[i]).parent = parent;
      }
      topology.nodes_.push_back(std::move(node));
      next.push_back(parent);
    }
    topology.levels_.push_back(next);
    current = std::move(next);
  }
  topology.root_ = current.front();
  topology.Validate();
  return topology;
}

std::vector<NodeId> Topology::InternalNodesBottomUp() const
{
  std::vector<NodeId> internal;
  for (const auto& node : nodes_)
  {
    if (!node.IsLeaf())
    {
      internal.push_back(node.id);
    }
  }
  return internal;
}

void Topology::Validate() const
{
  std::size_t leaves = 0;
  std::size_t roots = 0;
  for (const auto& node : nodes_)
  {
    if (node.IsLeaf())
    {
      ++leaves;
      if (node.id >= leaf_count_)
      {
        throw std::logic_error("virtual node without children");
      }
    }
    if (node.children.size() > group_size_ && kind_ != TopologyKind::Star)
    {
      throw std::logic_error("node exceeds group size");
    }
    if (!node.parent.has_value())
    {
      ++roots;
    }
    for (const NodeId child : node.children)
    {
      // Children are created before parents, which rules out cycles.
      if (child >= node.id || nodes_.at(child).parent != node.id)
      {
        throw std::logic_error("inconsistent parent/child links");
      }
    }
  }
  if (leaves != leaf_count_ || roots != 1 || nodes_.at(root_).parent.has_value())
  {
    throw std::logic_error("topology must have exactly m leaves and one root");
  }
}

nlohmann::json Topology::ToJson() const
{
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& node : nodes_)
  {
    nodes.push_back({{"id", node.id},
                     {"parent", node.parent.has_value() ? nlohmann::json(*node.parent)
                                                        : nlohmann::json(nullptr)},
                     {"children", node.children},
                     {"level", node.level}});
  }
  return {{"kind", ToString(kind_)},
          {"group_size", group_size_},
          {"leaves", leaf_count_},
          {"root", root_},
          {"nodes", nodes}};
}

}  // namespace gridmine::sim
