#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ctf {

/// Semi-Markovian causal diagram over named nodes. Directed edges are
/// (parent, child) pairs; bidirected edges are stored with first < second.
class CausalDiagram {
 public:
  CausalDiagram() = default;
  explicit CausalDiagram(std::vector<std::string> nodes);

  void add_directed(int parent, int child);
  void add_bidirected(int a, int b);
  void add_directed(const std::string& parent, const std::string& child);
  void add_bidirected(const std::string& a, const std::string& b);

  const std::vector<std::string>& nodes() const { return nodes_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  std::optional<int> index_of(const std::string& name) const;
  int require_index(const std::string& name) const;

  const std::set<std::pair<int, int>>& directed() const { return directed_; }
  const std::set<std::pair<int, int>>& bidirected() const { return bidirected_; }

  /// Parents in node order.
  std::vector<int> parents(int node) const;
  bool has_bidirected(int a, int b) const;

  bool acyclic() const;
  /// Kahn order, smallest index first among ready nodes. Throws if cyclic.
  std::vector<int> topological_order() const;

  /// Ancestors of `targets` (inclusive) in the graph with edges into
  /// `cut` removed.
  std::vector<bool> ancestors(const std::vector<int>& targets,
                              const std::vector<bool>& cut) const;
  std::vector<bool> descendants(const std::vector<int>& sources) const;

  /// The same diagram with every bidirected edge dropped.
  CausalDiagram markovian() const;

  friend bool operator==(const CausalDiagram&, const CausalDiagram&) = default;

 private:
  std::vector<std::string> nodes_;
  std::set<std::pair<int, int>> directed_;
  std::set<std::pair<int, int>> bidirected_;
};

}  // namespace ctf
