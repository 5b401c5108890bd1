/*
 * Copyright 2026 The sentinsert Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sentinsert/errors.hpp"
#include "sentinsert/matrix.hpp"

namespace sentinsert {

inline constexpr std::size_t kPartCount = 5;
inline constexpr std::size_t kSlotCount = 4;
inline constexpr std::size_t kNodeCount = kPartCount + kSlotCount;

/// Roles of the nine nodes: the five context parts then the four slots.
enum class NodeRole : std::size_t { c1, c2, c3, c4, c5, A, B, C, D };

constexpr NodeRole part_role(std::size_t part) { return static_cast<NodeRole>(part); }
constexpr NodeRole slot_role(std::size_t slot) { return static_cast<NodeRole>(kPartCount + slot); }
constexpr bool is_slot(NodeRole r) { return static_cast<std::size_t>(r) >= kPartCount; }

inline std::string role_name(NodeRole r) {
  static constexpr const char* names[] = {"c1", "c2", "c3", "c4", "c5", "A", "B", "C", "D"};
  return names[static_cast<std::size_t>(r)];
}

/// Sentence embeddings for one problem; empty parts are zero vectors.
struct EmbeddedProblem {
  std::string id;
  std::array<std::vector<double>, kPartCount> parts;
  std::vector<double> question;
  int label = 0;

  std::size_t dim() const noexcept { return question.size(); }

  void validate() const {
    for (const auto& p : parts) {
      if (p.size() != question.size()) {
        throw ShapeError("problem " + id + ": part dim " + std::to_string(p.size()) +
                         " != question dim " + std::to_string(question.size()));
      }
    }
    if (label < 0 || label >= static_cast<int>(kSlotCount)) {
      throw DomainError("problem " + id + ": label " + std::to_string(label) + " out of range");
    }
  }
};

inline bool is_zero_vector(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Nine-node insertion graph. Node storage order is carried in `roles` so
/// consumers look nodes up by role, never by position.
struct InsertionGraph {
  std::vector<NodeRole> roles;
  std::vector<Edge> edges;
  Matrix features;

  std::size_t node_count() const noexcept { return roles.size(); }

  std::size_t index_of(NodeRole r) const {
    const auto it = std::find(roles.begin(), roles.end(), r);
    if (it == roles.end()) throw DomainError("graph has no node " + role_name(r));
    return static_cast<std::size_t>(it - roles.begin());
  }
};

/// Edge rule in role terms: slot paths c_i -> S_i -> c_{i+1} plus skip edges
/// c_i -> c_{i+1}.
inline std::vector<std::pair<NodeRole, NodeRole>> insertion_edge_roles() {
  std::vector<std::pair<NodeRole, NodeRole>> out;
  for (std::size_t i = 0; i < kSlotCount; ++i) out.emplace_back(part_role(i), slot_role(i));
  for (std::size_t i = 0; i < kSlotCount; ++i) out.emplace_back(slot_role(i), part_role(i + 1));
  for (std::size_t i = 0; i < kSlotCount; ++i) out.emplace_back(part_role(i), part_role(i + 1));
  return out;
}

inline InsertionGraph build_insertion_graph(const EmbeddedProblem& p) {
  p.validate();
  const std::size_t d = p.dim();
  InsertionGraph g;
  for (std::size_t i = 0; i < kNodeCount; ++i) g.roles.push_back(static_cast<NodeRole>(i));
  for (const auto& [from, to] : insertion_edge_roles()) {
    g.edges.push_back({static_cast<std::size_t>(from), static_cast<std::size_t>(to)});
  }
  g.features = Matrix(kNodeCount, d);
  for (std::size_t i = 0; i < kPartCount; ++i)
    std::copy(p.parts[i].begin(), p.parts[i].end(), g.features.row(i).begin());
  for (std::size_t s = 0; s < kSlotCount; ++s)
    std::copy(p.question.begin(), p.question.end(), g.features.row(kPartCount + s).begin());
  return g;
}

/// N_i: in-neighbours, out-neighbours and i itself, ascending storage order.
inline std::vector<std::size_t> neighborhood(const InsertionGraph& g, std::size_t i) {
  if (i >= g.node_count()) throw DomainError("node " + std::to_string(i) + " out of range");
  std::vector<std::size_t> out{i};
  for (const Edge& e : g.edges) {
    if (e.from == i) out.push_back(e.to);
    if (e.to == i) out.push_back(e.from);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// mask(i, j) = 1 iff j is in N_i.
inline Matrix neighborhood_mask(const InsertionGraph& g) {
  const std::size_t n = g.node_count();
  Matrix mask(n, n);
  for (std::size_t i = 0; i < n; ++i) mask(i, i) = 1.0;
  for (const Edge& e : g.edges) {
    mask(e.from, e.to) = 1.0;
    mask(e.to, e.from) = 1.0;
  }
  return mask;
}

/// Three-node local graph around one slot: (left part, slot, right part).
struct SubGraph {
  std::size_t slot_index = 0;
  std::array<std::size_t, 3> node_ids{};  // storage indices in the parent graph
  std::vector<Edge> edges;                // local indices 0..2
  Matrix features;
};

inline std::array<NodeRole, 3> subgraph_roles(std::size_t slot) {
  return {part_role(slot), slot_role(slot), part_role(slot + 1)};
}

inline std::array<SubGraph, kSlotCount> build_local_subgraphs(const InsertionGraph& g,
                                                              const Matrix& node_features) {
  if (node_features.rows() != g.node_count()) {
    throw ShapeError("node features have " + std::to_string(node_features.rows()) +
                     " rows, graph has " + std::to_string(g.node_count()) + " nodes");
  }
  std::array<SubGraph, kSlotCount> out;
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    SubGraph& s = out[k];
    s.slot_index = k;
    const auto roles = subgraph_roles(k);
    for (std::size_t r = 0; r < 3; ++r) s.node_ids[r] = g.index_of(roles[r]);
    s.edges = {{0, 1}, {1, 2}};
    s.features = Matrix(3, node_features.cols());
    for (std::size_t r = 0; r < 3; ++r) {
      const auto src = node_features.row(s.node_ids[r]);
      std::copy(src.begin(), src.end(), s.features.row(r).begin());
    }
  }
  return out;
}

/// Number of sub-graphs containing each node, in the graph's storage order.
inline std::vector<std::size_t> membership_counts(const InsertionGraph& g) {
  std::vector<std::size_t> counts(g.node_count(), 0);
  for (std::size_t k = 0; k < kSlotCount; ++k)
    for (NodeRole r : subgraph_roles(k)) ++counts[g.index_of(r)];
  return counts;
}

}  // namespace sentinsert
