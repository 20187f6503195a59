// SPDX-License-Identifier: Apache-2.0

#include <numeric>

#include "segsort/retrieval.hpp"

namespace segsort {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Connected components of the first-neighbor graph. Edges i-nn(i) already
// connect every pair with nn(i) == nn(j), so the shared-neighbor links of the
// full adjacency need no separate pass. Cluster ids follow the smallest
// member index.
std::vector<std::uint32_t> first_neighbor_partition(const VectorSet& points,
                                                    std::size_t& count) {
  const auto nn = first_neighbors(points);
  DisjointSets sets(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) sets.unite(i, nn[i]);
  std::vector<std::uint32_t> ids(points.size());
  std::vector<std::int64_t> root_id(points.size(), -1);
  count = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t r = sets.find(i);
    if (root_id[r] < 0) root_id[r] = static_cast<std::int64_t>(count++);
    ids[i] = static_cast<std::uint32_t>(root_id[r]);
  }
  return ids;
}

}  // namespace

std::vector<std::size_t> first_neighbors(const VectorSet& points) {
  const std::size_t n = points.size();
  std::vector<std::size_t> nn(n);
  for (std::size_t i = 0; i < n; ++i) {
    nn[i] = i;
    double best = -2.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = cosine(points[i], points[j]);
      if (c > best) {
        best = c;
        nn[i] = j;
      }
    }
  }
  return nn;
}

FinchHierarchy finch(const VectorSet& points) {
  if (points.empty()) throw Error("finch: no points");
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  FinchHierarchy out;

  std::vector<std::uint32_t> assignment(n);
  std::iota(assignment.begin(), assignment.end(), 0u);
  VectorSet current = points;
  while (true) {
    std::size_t count = 0;
    const auto merged = first_neighbor_partition(current, count);
    for (auto& a : assignment) a = merged[a];
    out.levels.push_back(assignment);
    out.counts.push_back(count);
    if (count <= 1) break;

    // Cluster representatives: mean direction of the original members.
    std::vector<double> sums(count * d, 0.0);
    std::vector<std::int64_t> first_member(count, -1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = points[i];
      double* acc = sums.data() + assignment[i] * d;
      for (std::size_t j = 0; j < d; ++j) acc[j] += v[j];
      if (first_member[assignment[i]] < 0) first_member[assignment[i]] = static_cast<std::int64_t>(i);
    }
    VectorSet next(d);
    for (std::size_t c = 0; c < count; ++c) {
      std::span<const double> acc{sums.data() + c * d, d};
      if (norm(acc) >= kZeroNormThreshold) {
        next.push_back(normalized(acc));
      } else {
        next.push_back(points[static_cast<std::size_t>(first_member[c])]);
      }
    }
    current = std::move(next);
  }
  return out;
}

}  // namespace segsort
