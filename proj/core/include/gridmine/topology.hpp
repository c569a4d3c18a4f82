#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gridmine::sim
{
using NodeId = std::size_t;

enum class TopologyKind { Star, BinaryTree, TreeP };

TopologyKind TopologyKindFromString(const std::string& name);
std::string ToString(TopologyKind kind);

struct TopologyNode
{
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  /// Level at which this node is created: leaves are 0.
  std::size_t level = 0;
  bool IsLeaf() const { return children.empty(); }
};

/// Aggregation tree over m sites. Leaves are nodes 0..m-1 in site order;
/// internal (virtual) nodes follow, created bottom-up level by level.
///
/// `levels[L]` lists the nodes whose model exists at level L. A node that is
/// left over when its level cannot be grouped evenly is carried up unchanged,
/// so it appears in several consecutive levels. The last level holds only the
/// root.
class Topology
{
public:
  static Topology Build(std::size_t site_count, TopologyKind kind,
                        std::optional<std::size_t> group_size = std::nullopt);

  TopologyKind Kind() const { return kind_; }
  std::size_t GroupSize() const { return group_size_; }
  std::size_t LeafCount() const { return leaf_count_; }
  std::size_t NodeCount() const { return nodes_.size(); }
  NodeId Root() const { return root_; }
  const TopologyNode& Node(NodeId id) const { return nodes_.at(id); }
  const std::vector<TopologyNode>& Nodes() const { return nodes_; }
  const std::vector<std::vector<NodeId>>& Levels() const { return levels_; }
  std::size_t Height() const { return levels_.size() - 1; }

  /// Internal nodes in an order where children always precede parents.
  std::vector<NodeId> InternalNodesBottomUp() const;

  /// Checks structural invariants; throws std::logic_error on violation.
  void Validate() const;

  nlohmann::json ToJson() const;

private:
  TopologyKind kind_ = TopologyKind::BinaryTree;
  std::size_t group_size_ = 2;
  std::size_t leaf_count_ = 0;
  NodeId root_ = 0;
  std::vector<TopologyNode> nodes_;
  std::vector<std::vector<NodeId>> levels_;
};

}  // namespace gridmine::sim
