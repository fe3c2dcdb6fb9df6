#include "ssdann/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/core.h>

namespace ssdann {

PagePayload node_payload_bytes(std::size_t dim, std::size_t elem_bytes, std::size_t degree) {
  if (dim == 0 || elem_bytes == 0) {
    throw Error(Errc::InvalidArgument, fmt::format("dim={} elem_bytes={}", dim, elem_bytes));
  }
  const std::size_t vec = dim * elem_bytes;
  return {vec + 4 + 4 * degree, vec + 4 * degree};
}

double fill_ratio(std::size_t dim, std::size_t elem_bytes, std::size_t degree) {
  const auto payload = node_payload_bytes(dim, elem_bytes, degree);
  if (payload.bytes_no_count > kPageSize) {
    throw Error(Errc::PageOverflow,
                fmt::format("{} payload bytes exceed one {}-byte page", payload.bytes_no_count, kPageSize));
  }
  return static_cast<double>(payload.bytes_no_count) / static_cast<double>(kPageSize);
}

std::size_t max_degree_for_page(std::size_t dim, std::size_t elem_bytes) {
  const auto fixed = node_payload_bytes(dim, elem_bytes, 0).bytes;
  if (fixed >= kPageSize) {
    throw Error(Errc::PageOverflow, fmt::format("vector of {} bytes leaves no room for neighbors", dim * elem_bytes));
  }
  return (kPageSize - fixed) / 4;
}

BuildParams BuildParams::with_degree(std::size_t degree, std::uint64_t seed) {
  BuildParams p;
  p.degree = degree;
  p.build_list = std::max<std::size_t>(2 * degree, 64);
  p.seed = seed;
  return p;
}

void BuildParams::validate() const {
  if (degree == 0) throw Error(Errc::InvalidArgument, "degree R must be at least 1");
  if (build_list < degree) {
    throw Error(Errc::InvalidArgument, fmt::format("L_build={} is smaller than R={}", build_list, degree));
  }
  if (!(alpha >= 1.0f)) throw Error(Errc::InvalidArgument, fmt::format("alpha={} is below 1", alpha));
}

namespace {

std::uint64_t align_page(std::uint64_t off) { return (off + kPageSize - 1) / kPageSize * kPageSize; }

std::uint64_t pq_section_bytes(const PqCodebook& book, std::size_t count) {
  return book.centroids.size() * sizeof(float) + count * book.m;
}

}  // namespace

GraphIndex GraphIndex::from_adjacency(VectorDataset base, PqCodebook book, PqCodes codes,
                                      std::vector<std::vector<NodeId>> adjacency, std::size_t degree,
                                      NodeId entry_point) {
  const std::size_t n = base.count();
  if (adjacency.size() != n) throw Error(Errc::InvalidArgument, "adjacency size differs from vector count");
  if (n == 0 || entry_point >= n) throw Error(Errc::OutOfRange, "entry point outside the graph");
  if (degree > max_degree_for_page(base.dim(), elem_size(base.elem()))) {
    throw Error(Errc::PageOverflow, fmt::format("degree {} does not fit one page", degree));
  }
  if (codes.count != n || codes.m != book.m || book.dim() != base.dim()) {
    throw Error(Errc::DimMismatch, "PQ codes or codebook do not match the base vectors");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nbrs = adjacency[i];
    if (nbrs.size() > degree) throw Error(Errc::InvalidArgument, fmt::format("node {} exceeds degree", i));
    for (NodeId v : nbrs) {
      if (v >= n || v == i) throw Error(Errc::InvalidArgument, fmt::format("node {} has invalid neighbor {}", i, v));
    }
  }

  GraphIndex idx;
  idx.header.elem = base.elem();
  idx.header.count = n;
  idx.header.dim = static_cast<std::uint32_t>(base.dim());
  idx.header.degree = static_cast<std::uint32_t>(degree);
  idx.header.entry_point = entry_point;
  idx.header.pq_m = static_cast<std::uint32_t>(book.m);
  idx.header.pq_section_offset = kHeaderBytes;
  idx.header.page_base = align_page(kHeaderBytes + pq_section_bytes(book, n));
  idx.base = std::move(base);
  idx.book = std::move(book);
  idx.codes = std::move(codes);
  idx.adjacency = std::move(adjacency);
  return idx;
}

void GraphIndex::serialize_page(NodeId id, std::span<std::byte, kPageSize> out) const {
  std::ranges::fill(out, std::byte{0});
  const auto vec = base.row_bytes(id);
  std::memcpy(out.data(), vec.data(), vec.size());
  const auto& nbrs = adjacency[id];
  const auto n = static_cast<std::uint32_t>(nbrs.size());
  std::memcpy(out.data() + vec.size(), &n, 4);
  auto* slots = out.data() + vec.size() + 4;
  for (std::size_t s = 0; s < header.degree; ++s) {
    const NodeId v = s < nbrs.size() ? nbrs[s] : kInvalidNode;
    std::memcpy(slots + 4 * s, &v, 4);
  }
}

NodeView decode_page(std::span<const std::byte> page, const IndexHeader& header) {
  const std::size_t vec_bytes = header.dim * elem_size(header.elem);
  std::uint32_t n;
  std::memcpy(&n, page.data() + vec_bytes, 4);
  if (n > header.degree) throw Error(Errc::Truncated, fmt::format("page declares {} neighbors", n));
  const auto* ids = reinterpret_cast<const NodeId*>(page.data() + vec_bytes + 4);
  return {page.subspan(0, vec_bytes), std::span<const NodeId>(ids, n)};
}

// ---------------------------------------------------------------------------
// Vamana construction
// ---------------------------------------------------------------------------

NodeId sample_medoid(const VectorDataset& base, std::size_t sample, std::uint64_t seed) {
  std::vector<std::size_t> rows(base.count());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (rows.size() > sample) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> picked;
    std::sample(rows.begin(), rows.end(), std::back_inserter(picked), sample, rng);
    rows = std::move(picked);
  }
  std::vector<double> total(rows.size(), 0.0);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    const auto va = base.row_bytes(rows[a]);
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      const double d = std::sqrt(static_cast<double>(l2_sq(base, rows[b], va)));
      total[a] += d;
      total[b] += d;
    }
  }
  const auto best = std::min_element(total.begin(), total.end()) - total.begin();
  return static_cast<NodeId>(rows[static_cast<std::size_t>(best)]);
}

namespace {

struct Scored {
  float dist;
  NodeId id;
  bool operator<(const Scored& o) const { return dist < o.dist || (dist == o.dist && id < o.id); }
};

class VamanaBuilder {
 public:
  VamanaBuilder(const VectorDataset& base, const BuildParams& params)
      : base_(base), params_(params), graph_(base.count()), stamp_(base.count(), 0) {}

  std::vector<std::vector<NodeId>> run(NodeId entry) {
    entry_ = entry;
    std::mt19937_64 rng(params_.seed);
    std::vector<NodeId> order(base_.count());
    std::iota(order.begin(), order.end(), NodeId{0});
    for (float alpha : {1.0f, params_.alpha}) {
      std::shuffle(order.begin(), order.end(), rng);
      for (NodeId p : order) insert(p, alpha);
    }
    patch_isolated();
    return std::move(graph_);
  }

 private:
  float dist(NodeId a, NodeId b) const { return l2_sq(base_, a, base_.row_bytes(b)); }

  // Best-first search from the entry point toward node p over the current
  // graph; returns every expanded node with its distance to p.
  std::vector<Scored> greedy_visit(NodeId p) {
    ++epoch_;
    std::vector<Scored> list;  // sorted, at most build_list entries
    std::vector<bool> expanded;
    std::vector<Scored> visited;
    list.reserve(params_.build_list + 1);
    auto offer = [&](NodeId v) {
      if (stamp_[v] == epoch_) return;
      stamp_[v] = epoch_;
      const Scored s{dist(v, p), v};
      if (list.size() == params_.build_list && !(s < list.back())) return;
      auto pos = std::lower_bound(list.begin(), list.end(), s);
      const auto at = pos - list.begin();
      list.insert(pos, s);
      expanded.insert(expanded.begin() + at, false);
      if (list.size() > params_.build_list) {
        list.pop_back();
        expanded.pop_back();
      }
    };
    offer(entry_);
    while (true) {
      std::size_t next = list.size();
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (!expanded[i]) {
          next = i;
          break;
        }
      }
      if (next == list.size()) break;
      expanded[next] = true;
      const Scored cur = list[next];
      visited.push_back(cur);
      for (NodeId v : graph_[cur.id]) offer(v);
    }
    return visited;
  }

  // Alpha-pruned neighbor selection over `pool` (distances to p). Pruning
  // compares true distances: a candidate c is dropped once some kept k has
  // alpha * d(k, c) <= d(p, c).
  std::vector<NodeId> robust_prune(NodeId p, std::vector<Scored> pool, float alpha) const {
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) { return a.id == b.id; }),
               pool.end());
    const float alpha_sq = alpha * alpha;
    std::vector<bool> dropped(pool.size(), false);
    std::vector<NodeId> kept;
    for (std::size_t i = 0; i < pool.size() && kept.size() < params_.degree; ++i) {
      if (dropped[i] || pool[i].id == p) continue;
      kept.push_back(pool[i].id);
      for (std::size_t j = i + 1; j < pool.size(); ++j) {
        if (dropped[j]) continue;
        if (alpha_sq * dist(pool[i].id, pool[j].id) <= pool[j].dist) dropped[j] = true;
      }
    }
    return kept;
  }

  void insert(NodeId p, float alpha) {
    auto pool = greedy_visit(p);
    for (NodeId v : graph_[p]) pool.push_back({dist(v, p), v});
    std::erase_if(pool, [p](const Scored& s) { return s.id == p; });
    graph_[p] = robust_prune(p, std::move(pool), alpha);

    for (NodeId j : graph_[p]) {
      auto& nj = graph_[j];
      if (std::find(nj.begin(), nj.end(), p) != nj.end()) continue;
      if (nj.size() < params_.degree) {
        nj.push_back(p);
        continue;
      }
      std::vector<Scored> cand;
      cand.reserve(nj.size() + 1);
      for (NodeId v : nj) cand.push_back({dist(v, j), v});
      cand.push_back({dist(p, j), p});
      nj = robust_prune(j, std::move(cand), alpha);
    }
  }

  // Every node must keep at least one out-edge; a node left empty links to
  // its exact nearest neighbor.
  void patch_isolated() {
    if (base_.count() < 2) return;
    for (NodeId p = 0; p < graph_.size(); ++p) {
      if (!graph_[p].empty()) continue;
      Scored best{std::numeric_limits<float>::max(), kInvalidNode};
      for (NodeId v = 0; v < graph_.size(); ++v) {
        if (v == p) continue;
        const Scored s{dist(v, p), v};
        if (s < best) best = s;
      }
      graph_[p].push_back(best.id);
    }
  }

  const VectorDataset& base_;
  const BuildParams& params_;
  std::vector<std::vector<NodeId>> graph_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  NodeId entry_ = 0;
};

}  // namespace

GraphIndex build_index(const VectorDataset& base, const PqCodebook& book, const PqCodes& codes,
                       const BuildParams& params) {
  params.validate();
  if (base.count() < 2) throw Error(Errc::InvalidArgument, "index build needs at least two vectors");
  const std::size_t cap = max_degree_for_page(base.dim(), elem_size(base.elem()));
  if (params.degree > cap) {
    throw Error(Errc::PageOverflow, fmt::format("degree {} exceeds the page capacity {}", params.degree, cap));
  }
  const NodeId entry = sample_medoid(base, params.medoid_sample, params.seed);
  VamanaBuilder builder(base, params);
  auto adjacency = builder.run(entry);
  return GraphIndex::from_adjacency(base, book, codes, std::move(adjacency), params.degree, entry);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put(std::byte* buf, std::size_t off, T v) {
  std::memcpy(buf + off, &v, sizeof(T));
}

template <typename T>
T get(const std::byte* buf, std::size_t off) {
  T v;
  std::memcpy(&v, buf + off, sizeof(T));
  return v;
}

std::array<std::byte, kHeaderBytes> encode_header(const IndexHeader& h) {
  std::array<std::byte, kHeaderBytes> buf{};
  std::memcpy(buf.data(), kIndexMagic.data(), kIndexMagic.size());
  put<std::uint32_t>(buf.data(), 8, h.version);
  put<std::uint32_t>(buf.data(), 12, static_cast<std::uint32_t>(h.elem));
  put<std::uint64_t>(buf.data(), 16, h.count);
  put<std::uint32_t>(buf.data(), 24, h.dim);
  put<std::uint32_t>(buf.data(), 28, h.degree);
  put<std::uint32_t>(buf.data(), 32, h.entry_point);
  put<std::uint32_t>(buf.data(), 36, h.pq_m);
  put<std::uint64_t>(buf.data(), 40, h.pq_section_offset);
  put<std::uint64_t>(buf.data(), 48, h.page_base);
  return buf;
}

IndexHeader decode_header(const std::byte* buf) {
  if (std::memcmp(buf, kIndexMagic.data(), kIndexMagic.size()) != 0) {
    throw Error(Errc::BadMagic, "not an index file");
  }
  IndexHeader h;
  h.version = get<std::uint32_t>(buf, 8);
  if (h.version != kIndexVersion) throw Error(Errc::BadVersion, fmt::format("index version {}", h.version));
  const auto elem = get<std::uint32_t>(buf, 12);
  if (elem > static_cast<std::uint32_t>(ElemType::f32)) throw Error(Errc::BadVersion, "unknown element type");
  h.elem = static_cast<ElemType>(elem);
  h.count = get<std::uint64_t>(buf, 16);
  h.dim = get<std::uint32_t>(buf, 24);
  h.degree = get<std::uint32_t>(buf, 28);
  h.entry_point = get<std::uint32_t>(buf, 32);
  h.pq_m = get<std::uint32_t>(buf, 36);
  h.pq_section_offset = get<std::uint64_t>(buf, 40);
  h.page_base = get<std::uint64_t>(buf, 48);
  if (h.dim == 0 || h.pq_m == 0 || h.dim % h.pq_m != 0 || h.count == 0 || h.entry_point >= h.count ||
      h.page_base % kPageSize != 0) {
    throw Error(Errc::BadVersion, "inconsistent index header");
  }
  return h;
}

}  // namespace

void write_index(const GraphIndex& idx, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, fmt::format("cannot create '{}'", path.string()));
  const auto hdr = encode_header(idx.header);
  out.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
  out.write(reinterpret_cast<const char*>(idx.book.centroids.data()),
            static_cast<std::streamsize>(idx.book.centroids.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(idx.codes.codes.data()), static_cast<std::streamsize>(idx.codes.codes.size()));
  const std::uint64_t written = kHeaderBytes + pq_section_bytes(idx.book, idx.count());
  const std::vector<char> pad(idx.header.page_base - written, 0);
  out.write(pad.data(), static_cast<std::streamsize>(pad.size()));
  std::array<std::byte, kPageSize> page;
  for (NodeId i = 0; i < idx.count(); ++i) {
    idx.serialize_page(i, page);
    out.write(reinterpret_cast<const char*>(page.data()), kPageSize);
  }
  if (!out) throw Error(Errc::Io, fmt::format("write to '{}' failed", path.string()));
}

IndexHeader read_index_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, fmt::format("cannot open '{}'", path.string()));
  std::array<std::byte, kHeaderBytes> buf;
  if (!in.read(reinterpret_cast<char*>(buf.data()), kHeaderBytes)) {
    throw Error(Errc::Truncated, fmt::format("'{}' is shorter than an index header", path.string()));
  }
  const auto h = decode_header(buf.data());
  const auto size = std::filesystem::file_size(path);
  if (size < h.page_base + h.count * kPageSize) {
    throw Error(Errc::Truncated, fmt::format("'{}' holds {} bytes, pages need {}", path.string(), size,
                                             h.page_base + h.count * kPageSize));
  }
  return h;
}

SearchIndex SearchIndex::load(const std::filesystem::path& path) {
  SearchIndex idx;
  idx.header = read_index_header(path);
  const auto& h = idx.header;
  idx.book.m = h.pq_m;
  idx.book.sub_dim = h.dim / h.pq_m;
  idx.book.centroids.resize(h.pq_m * kPqCentroids * idx.book.sub_dim);
  idx.codes.m = h.pq_m;
  idx.codes.count = h.count;
  idx.codes.codes.resize(h.count * h.pq_m);
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(h.pq_section_offset));
  in.read(reinterpret_cast<char*>(idx.book.centroids.data()),
          static_cast<std::streamsize>(idx.book.centroids.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(idx.codes.codes.data()), static_cast<std::streamsize>(idx.codes.codes.size()));
  if (!in) throw Error(Errc::Truncated, fmt::format("'{}': PQ section is truncated", path.string()));
  return idx;
}

SearchIndex SearchIndex::from(const GraphIndex& idx) { return {idx.header, idx.book, idx.codes}; }

GraphStats graph_stats(const GraphIndex& idx) {
  GraphStats st;
  const std::size_t n = idx.count();
  st.min_degree = std::numeric_limits<std::size_t>::max();
  std::size_t total = 0;
  for (const auto& nbrs : idx.adjacency) {
    st.min_degree = std::min(st.min_degree, nbrs.size());
    st.max_degree = std::max(st.max_degree, nbrs.size());
    total += nbrs.size();
  }
  st.mean_degree = n ? static_cast<double>(total) / static_cast<double>(n) : 0.0;
  std::vector<bool> seen(n, false);
  std::vector<NodeId> stack{idx.header.entry_point};
  seen[idx.header.entry_point] = true;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    ++st.reachable;
    for (NodeId v : idx.adjacency[u]) {
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return st;
}

}  // namespace ssdann
