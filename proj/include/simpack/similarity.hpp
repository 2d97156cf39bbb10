#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "simpack/error.hpp"
#include "simpack/features.hpp"
#include "simpack/manifest.hpp"
#include "simpack/parallel.hpp"
#include "simpack/rng.hpp"

namespace simpack {

struct Edge {
  std::uint32_t i = 0;  // i < j
  std::uint32_t j = 0;
  std::uint32_t weight = 0;  // shared feature count

  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge& o) const { return std::tie(i, j) <=> std::tie(o.i, o.j); }
};

/// Node k stands for the k-th image. Edges are kept sorted by (i, j).
struct SimilarityGraph {
  std::size_t n = 0;
  std::uint32_t threshold = 10;
  std::vector<Edge> edges;

  bool has_edge(std::uint32_t a, std::uint32_t b) const {
    if (a > b) std::swap(a, b);
    return std::binary_search(edges.begin(), edges.end(), Edge{a, b, 0});
  }
};

struct Cluster {
  std::vector<std::uint32_t> members;  // ascending

  std::size_t size() const noexcept { return members.size(); }
  bool operator==(const Cluster&) const = default;
};

struct PairCount {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t shared = 0;
};

enum class Strategy { TopN, SiftPicked, Mixed, Random };

constexpr std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::TopN: return "top_n";
    case Strategy::SiftPicked: return "sift_picked";
    case Strategy::Mixed: return "mixed";
    case Strategy::Random: return "random";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "top_n") return Strategy::TopN;
  if (s == "sift_picked") return Strategy::SiftPicked;
  if (s == "mixed") return Strategy::Mixed;
  if (s == "random") return Strategy::Random;
  throw Error(Errc::InvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

/// Ordered image set; the order is the concatenation order used by pack.
struct PhotoGroup {
  std::string label;
  Strategy strategy = Strategy::TopN;
  std::vector<std::string> image_ids;

  std::size_t size() const noexcept { return image_ids.size(); }
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
};

/// Graph from precomputed shared counts: edge (i, j) iff shared >= threshold.
inline SimilarityGraph graph_from_counts(std::size_t n, const std::vector<PairCount>& counts,
                                         std::uint32_t threshold = 10) {
  if (threshold < 1) throw Error(Errc::InvalidArgument, "threshold must be >= 1");
  SimilarityGraph g;
  g.n = n;
  g.threshold = threshold;
  for (const auto& c : counts) {
    if (c.i == c.j || c.i >= n || c.j >= n) throw Error(Errc::InvalidArgument, "bad node pair");
    if (c.shared >= threshold) g.edges.push_back({std::min(c.i, c.j), std::max(c.i, c.j), c.shared});
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end(),
                            [](const Edge& a, const Edge& b) { return a.i == b.i && a.j == b.j; }),
                g.edges.end());
  return g;
}

/// Shared-feature counts for all n(n-1)/2 pairs, in (i, j) order.
inline std::vector<PairCount> pairwise_shared_counts(const std::vector<FeatureSet>& sets, double ratio = 0.6,
                                                     unsigned jobs = 1) {
  std::set<std::string> ids;
  for (const auto& s : sets)
    if (!ids.insert(s.image_id).second) throw Error(Errc::DuplicateImageId, s.image_id);

  std::vector<PairCount> counts;
  const auto n = static_cast<std::uint32_t>(sets.size());
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j) counts.push_back({i, j, 0});
  parallel_for(counts.size(), jobs, [&](std::size_t k) {
    counts[k].shared =
        static_cast<std::uint32_t>(match_features(sets[counts[k].i], sets[counts[k].j], ratio).shared_count);
  });
  return counts;
}

inline SimilarityGraph build_graph(const std::vector<FeatureSet>& sets, std::uint32_t threshold = 10,
                                   double ratio = 0.6, unsigned jobs = 1) {
  if (threshold < 1) throw Error(Errc::InvalidArgument, "threshold must be >= 1");
  return graph_from_counts(sets.size(), pairwise_shared_counts(sets, ratio, jobs), threshold);
}

/// Components ordered by size (descending), ties by smallest member. Isolated
/// nodes come last as singletons.
inline std::vector<Cluster> connected_components(const SimilarityGraph& g) {
  UnionFind uf(g.n);
  for (const auto& e : g.edges) uf.unite(e.i, e.j);
  std::vector<std::int64_t> slot(g.n, -1);
  std::vector<Cluster> clusters;
  for (std::uint32_t v = 0; v < g.n; ++v) {
    const std::uint32_t root = uf.find(v);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::int64_t>(clusters.size());
      clusters.emplace_back();
    }
    clusters[static_cast<std::size_t>(slot[root])].members.push_back(v);
  }
  // Members are already ascending; first member is the minimum.
  std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.members.front() < b.members.front();
  });
  return clusters;
}

inline Cluster largest_cluster(const SimilarityGraph& g) {
  if (g.n == 0) throw Error(Errc::EmptyInput, "graph has no nodes");
  return connected_components(g).front();
}

/// The n most relevant entries carrying `tag`, rank ascending.
inline PhotoGroup top_n(const std::vector<ManifestEntry>& entries, const std::string& tag, std::size_t n,
                        std::string label = {}) {
  std::vector<const ManifestEntry*> tagged;
  for (const auto& e : entries)
    if (e.has_tag(tag)) tagged.push_back(&e);
  if (tagged.size() < n)
    throw Error(Errc::NotEnoughEntries, "tag '" + tag + "' has " + std::to_string(tagged.size()) +
                                            " entries, " + std::to_string(n) + " requested");
  std::stable_sort(tagged.begin(), tagged.end(), [](const ManifestEntry* a, const ManifestEntry* b) {
    return a->relevance_rank < b->relevance_rank;
  });
  PhotoGroup g;
  g.label = label.empty() ? tag + "-top" + std::to_string(n) : std::move(label);
  g.strategy = Strategy::TopN;
  for (std::size_t k = 0; k < n; ++k) g.image_ids.push_back(tagged[k]->image_id);
  return g;
}

/// Images of the largest cluster of the thresholded similarity graph, in node order.
inline PhotoGroup sift_picked(const std::vector<FeatureSet>& sets, std::uint32_t threshold = 10,
                              double ratio = 0.6, unsigned jobs = 1, std::string label = "sift_picked") {
  if (sets.empty()) throw Error(Errc::EmptyInput, "no feature sets");
  const Cluster c = largest_cluster(build_graph(sets, threshold, ratio, jobs));
  PhotoGroup g;
  g.label = std::move(label);
  g.strategy = Strategy::SiftPicked;
  for (std::uint32_t v : c.members) g.image_ids.push_back(sets[v].image_id);
  return g;
}

/// Seeded sample without replacement; order is draw order.
inline PhotoGroup sample_group(const std::vector<ManifestEntry>& pool, std::size_t size, std::uint64_t seed,
                               std::string label, Strategy strategy) {
  if (size > pool.size())
    throw Error(Errc::PoolTooSmall,
                "pool has " + std::to_string(pool.size()) + " entries, " + std::to_string(size) + " requested");
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  PhotoGroup g;
  g.label = std::move(label);
  g.strategy = strategy;
  // Partial Fisher-Yates: position k receives the k-th draw.
  for (std::size_t k = 0; k < size; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.below(idx.size() - k));
    std::swap(idx[k], idx[pick]);
    g.image_ids.push_back(pool[idx[k]].image_id);
  }
  return g;
}

inline PhotoGroup mixed_group(const std::vector<ManifestEntry>& pool, std::size_t size, std::uint64_t seed,
                              std::string label = "m1") {
  return sample_group(pool, size, seed, std::move(label), Strategy::Mixed);
}

inline PhotoGroup random_group(const std::vector<ManifestEntry>& pool, std::size_t size, std::uint64_t seed,
                               std::string label = "r1") {
  return sample_group(pool, size, seed, std::move(label), Strategy::Random);
}

}  // namespace simpack
