#include "ctf/diagram.hpp"

#include <algorithm>
#include <queue>

#include "ctf/rational.hpp"

namespace ctf {

CausalDiagram::CausalDiagram(std::vector<std::string> nodes) : nodes_(std::move(nodes)) {
  std::vector<std::string> sorted = nodes_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error("duplicate node in diagram");
  }
}

std::optional<int> CausalDiagram::index_of(const std::string& name) const {
  auto it = std::find(nodes_.begin(), nodes_.end(), name);
  if (it == nodes_.end()) return std::nullopt;
  return static_cast<int>(it - nodes_.begin());
}

int CausalDiagram::require_index(const std::string& name) const {
  auto idx = index_of(name);
  if (!idx) throw Error("unknown diagram node '" + name + "'");
  return *idx;
}

void CausalDiagram::add_directed(int parent, int child) {
  if (parent < 0 || child < 0 || parent >= size() || child >= size() || parent == child) {
    throw Error("directed edge between undeclared or identical nodes");
  }
  directed_.emplace(parent, child);
}

void CausalDiagram::add_bidirected(int a, int b) {
  if (a < 0 || b < 0 || a >= size() || b >= size() || a == b) {
    throw Error("bidirected edge between undeclared or identical nodes");
  }
  bidirected_.emplace(std::min(a, b), std::max(a, b));
}

void CausalDiagram::add_directed(const std::string& parent, const std::string& child) {
  add_directed(require_index(parent), require_index(child));
}

void CausalDiagram::add_bidirected(const std::string& a, const std::string& b) {
  add_bidirected(require_index(a), require_index(b));
}

std::vector<int> CausalDiagram::parents(int node) const {
  std::vector<int> out;
  for (const auto& [p, c] : directed_) {
    if (c == node) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool CausalDiagram::has_bidirected(int a, int b) const {
  return bidirected_.count({std::min(a, b), std::max(a, b)}) > 0;
}

bool CausalDiagram::acyclic() const {
  try {
    topological_order();
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::vector<int> CausalDiagram::topological_order() const {
  std::vector<int> indegree(nodes_.size(), 0);
  for (const auto& e : directed_) ++indegree[e.second];
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    int n = ready.top();
    ready.pop();
    order.push_back(n);
    for (const auto& [p, c] : directed_) {
      if (p == n && --indegree[c] == 0) ready.push(c);
    }
  }
  if (static_cast<int>(order.size()) != size()) throw Error("diagram has a directed cycle");
  return order;
}

std::vector<bool> CausalDiagram::ancestors(const std::vector<int>& targets,
                                           const std::vector<bool>& cut) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<int> stack(targets.begin(), targets.end());
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    if (seen[n]) continue;
    seen[n] = true;
    if (!cut.empty() && cut[n]) continue;
    for (const auto& [p, c] : directed_) {
      if (c == n && !seen[p]) stack.push_back(p);
    }
  }
  return seen;
}

std::vector<bool> CausalDiagram::descendants(const std::vector<int>& sources) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<int> stack(sources.begin(), sources.end());
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    if (seen[n]) continue;
    seen[n] = true;
    for (const auto& [p, c] : directed_) {
      if (p == n && !seen[c]) stack.push_back(c);
    }
  }
  return seen;
}

CausalDiagram CausalDiagram::markovian() const {
  CausalDiagram out(nodes_);
  out.directed_ = directed_;
  return out;
}

}  // namespace ctf
