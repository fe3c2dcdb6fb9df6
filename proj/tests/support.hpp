#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ssdann/dataset.hpp"
#include "ssdann/index.hpp"
#include "ssdann/quantize.hpp"
#include "ssdann/search.hpp"
#include "ssdann/storage.hpp"

namespace testutil {

using namespace ssdann;

class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ssdann_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline VectorDataset rows(const VectorDataset& ds, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx;
  for (std::size_t i = begin; i < end; ++i) idx.push_back(i);
  return ds.subset(idx);
}

struct Corpus {
  VectorDataset base;
  VectorDataset queries;
};

/// Base and queries drawn from the same blobs.
inline Corpus make_corpus(std::size_t n, std::size_t nq, std::size_t dim, std::uint64_t seed,
                          ElemType elem = ElemType::f32, std::size_t clusters = 16) {
  const VectorDataset all = gen_synthetic(n + nq, dim, elem, seed, clusters);
  return {rows(all, 0, n), rows(all, n, n + nq)};
}

inline GraphIndex make_index(const VectorDataset& base, std::size_t degree = 32, std::uint64_t seed = 1) {
  PqTrainOptions o;
  o.seed = seed;
  const PqCodebook book = pq_train(base, default_pq_m(base.dim()), o);
  const PqCodes codes = pq_encode(base, book);
  return build_index(base, book, codes, BuildParams::with_degree(degree, seed));
}

/// u8 vectors with a scalar codebook (sub_dim 1, centroid c = value c), so
/// PQ distances equal exact distances. Topology is taken as given.
inline GraphIndex hand_graph(const std::vector<std::vector<std::uint8_t>>& vecs,
                             std::vector<std::vector<NodeId>> adjacency, NodeId entry, std::size_t degree = 8) {
  const std::size_t n = vecs.size();
  const std::size_t dim = vecs.front().size();
  VectorDataset base(n, dim, ElemType::u8);
  for (std::size_t i = 0; i < n; ++i) std::copy(vecs[i].begin(), vecs[i].end(), base.row<std::uint8_t>(i).begin());
  PqCodebook book;
  book.m = dim;
  book.sub_dim = 1;
  book.centroids.resize(dim * kPqCentroids);
  for (std::size_t s = 0; s < dim; ++s)
    for (std::size_t c = 0; c < kPqCentroids; ++c) book.centroid(s, c)[0] = static_cast<float>(c);
  PqCodes codes;
  codes.count = n;
  codes.m = dim;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < dim; ++s) codes.codes.push_back(vecs[i][s]);
  return GraphIndex::from_adjacency(std::move(base), std::move(book), std::move(codes), std::move(adjacency), degree,
                                    entry);
}

inline std::vector<std::byte> u8_query(std::initializer_list<int> v) {
  std::vector<std::byte> out;
  for (int x : v) out.push_back(static_cast<std::byte>(x));
  return out;
}

// ---------------------------------------------------------------------------
// Reference best-first search, written against the in-memory graph only
// (no pages, no heaps): a sorted candidate list of at most L entries; each
// round expands the closest unexpanded entry; stops when all are expanded.
// ---------------------------------------------------------------------------

struct OracleResult {
  std::vector<NodeId> ids;
  std::vector<float> distances;
  std::vector<NodeId> order;  // expansion order
};

inline float oracle_exact(const VectorDataset& base, NodeId id, std::span<const std::byte> q) {
  const std::size_t dim = base.dim();
  if (base.elem() == ElemType::f32) {
    const float* a = base.row<float>(id).data();
    float b[4096];
    std::memcpy(b, q.data(), dim * sizeof(float));
    float acc = 0.0f;
    for (std::size_t j = 0; j < dim; ++j) {
      const float d = a[j] - b[j];
      acc += d * d;
    }
    return acc;
  }
  std::int64_t acc = 0;
  for (std::size_t j = 0; j < dim; ++j) {
    std::int64_t x, y;
    if (base.elem() == ElemType::u8) {
      x = base.row<std::uint8_t>(id)[j];
      y = std::to_integer<std::uint8_t>(q[j]);
    } else {
      x = base.row<std::int8_t>(id)[j];
      y = static_cast<std::int8_t>(std::to_integer<std::uint8_t>(q[j]));
    }
    acc += (x - y) * (x - y);
  }
  return static_cast<float>(acc);
}

inline OracleResult reference_best_first(const GraphIndex& g, std::span<const std::byte> q, std::size_t L,
                                         std::size_t k) {
  const std::size_t dim = g.base.dim();
  std::vector<float> qf(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    switch (g.base.elem()) {
      case ElemType::f32: std::memcpy(&qf[j], q.data() + 4 * j, 4); break;
      case ElemType::u8: qf[j] = std::to_integer<std::uint8_t>(q[j]); break;
      case ElemType::i8: qf[j] = static_cast<std::int8_t>(std::to_integer<std::uint8_t>(q[j])); break;
    }
  }
  // Per-subspace table, summed in subspace order like any ADC scan.
  std::vector<float> table(g.book.m * kPqCentroids);
  for (std::size_t s = 0; s < g.book.m; ++s)
    for (std::size_t c = 0; c < kPqCentroids; ++c) {
      float acc = 0.0f;
      const auto cen = g.book.centroid(s, c);
      for (std::size_t j = 0; j < g.book.sub_dim; ++j) {
        const float d = qf[s * g.book.sub_dim + j] - cen[j];
        acc += d * d;
      }
      table[s * kPqCentroids + c] = acc;
    }
  auto pq = [&](NodeId id) {
    float acc = 0.0f;
    for (std::size_t s = 0; s < g.book.m; ++s) acc += table[s * kPqCentroids + g.codes.codes[id * g.codes.m + s]];
    return acc;
  };

  struct Entry {
    float d;
    NodeId id;
    bool expanded;
  };
  auto before = [](const Entry& a, const Entry& b) { return a.d < b.d || (a.d == b.d && a.id < b.id); };
  std::vector<Entry> list;
  std::unordered_set<NodeId> seen;
  std::vector<std::pair<float, NodeId>> found;
  OracleResult out;

  auto insert = [&](NodeId id) {
    Entry e{pq(id), id, false};
    auto pos = std::lower_bound(list.begin(), list.end(), e, before);
    list.insert(pos, e);
    if (list.size() > L) list.pop_back();
  };
  const NodeId entry = g.header.entry_point;
  seen.insert(entry);
  insert(entry);
  for (;;) {
    auto it = std::find_if(list.begin(), list.end(), [](const Entry& e) { return !e.expanded; });
    if (it == list.end()) break;
    it->expanded = true;
    const NodeId id = it->id;
    out.order.push_back(id);
    found.emplace_back(oracle_exact(g.base, id, q), id);
    for (NodeId n : g.adjacency[id]) {
      if (seen.insert(n).second) insert(n);
    }
  }
  std::sort(found.begin(), found.end());
  for (std::size_t i = 0; i < k; ++i) {
    if (i < found.size()) {
      out.ids.push_back(found[i].second);
      out.distances.push_back(found[i].first);
    } else {
      out.ids.push_back(kInvalidNode);
      out.distances.push_back(std::numeric_limits<float>::infinity());
    }
  }
  return out;
}

inline std::vector<NodeId> expansion_order(const StepTrace& t) {
  std::vector<NodeId> out;
  for (const auto& s : t.steps) out.push_back(s.expanded_id);
  return out;
}

}  // namespace testutil
