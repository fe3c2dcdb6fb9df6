#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ssdann/dataset.hpp"
#include "ssdann/quantize.hpp"

namespace ssdann {

// ---------------------------------------------------------------------------
// Page layout arithmetic
//
// A node page holds the raw vector, a 32-bit neighbor count and R neighbor id
// slots, zero-padded to exactly one 4 KB page:
//
//   [ vector: dim * elem_size ][ count: u32 ][ ids: R * u32 ][ padding ]
// ---------------------------------------------------------------------------

struct PagePayload {
  std::size_t bytes;             // vector + count field + id slots
  std::size_t bytes_no_count;    // vector + id slots only
};

PagePayload node_payload_bytes(std::size_t dim, std::size_t elem_bytes, std::size_t degree);

/// Useful fraction of a 4 KB read, counting vector and neighbor ids only.
/// Throws PageOverflow when the page cannot hold the payload.
double fill_ratio(std::size_t dim, std::size_t elem_bytes, std::size_t degree);

/// Largest degree whose payload (with the count field) fits one page.
std::size_t max_degree_for_page(std::size_t dim, std::size_t elem_bytes);

// ---------------------------------------------------------------------------
// Index file
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 8> kIndexMagic{'S', 'S', 'D', 'G', 'R', 'A', 'P', 'H'};
inline constexpr std::uint32_t kIndexVersion = 1;
inline constexpr std::size_t kHeaderBytes = 64;

struct IndexHeader {
  std::uint32_t version = kIndexVersion;
  ElemType elem = ElemType::f32;
  std::uint64_t count = 0;
  std::uint32_t dim = 0;
  std::uint32_t degree = 0;  // R: id slots per page
  NodeId entry_point = 0;
  std::uint32_t pq_m = 0;
  std::uint64_t pq_section_offset = kHeaderBytes;
  std::uint64_t page_base = 0;  // 4096-aligned start of the page region

  std::uint64_t page_offset(NodeId id) const { return page_base + static_cast<std::uint64_t>(id) * kPageSize; }

  friend bool operator==(const IndexHeader&, const IndexHeader&) = default;
};

struct BuildParams {
  std::size_t degree = 32;   // R
  std::size_t build_list = 64;  // L_build
  float alpha = 1.2f;
  std::uint64_t seed = 1;
  std::size_t medoid_sample = 10'000;

  /// L_build = max(2R, 64), the conventional default.
  static BuildParams with_degree(std::size_t degree, std::uint64_t seed = 1);
  void validate() const;
};

/// Graph plus everything needed to serialize an index file. Vectors are
/// retained so pages can be produced without touching the source dataset.
struct GraphIndex {
  IndexHeader header;
  VectorDataset base;
  PqCodebook book;
  PqCodes codes;
  std::vector<std::vector<NodeId>> adjacency;

  /// Builds a header-consistent index around a prepared adjacency list; used
  /// by the builder and by tests that need hand-made topologies.
  static GraphIndex from_adjacency(VectorDataset base, PqCodebook book, PqCodes codes,
                                   std::vector<std::vector<NodeId>> adjacency, std::size_t degree,
                                   NodeId entry_point);

  std::size_t count() const noexcept { return base.count(); }
  void serialize_page(NodeId id, std::span<std::byte, kPageSize> out) const;
};

GraphIndex build_index(const VectorDataset& base, const PqCodebook& book, const PqCodes& codes,
                       const BuildParams& params);

/// Medoid of a seeded sample of at most `sample` points: the sample member
/// with the smallest summed distance to the rest of the sample.
NodeId sample_medoid(const VectorDataset& base, std::size_t sample, std::uint64_t seed);

void write_index(const GraphIndex& idx, const std::filesystem::path& path);
IndexHeader read_index_header(const std::filesystem::path& path);

/// Decoded view over one serialized node page.
struct NodeView {
  std::span<const std::byte> vector;
  std::span<const NodeId> neighbors;
};

NodeView decode_page(std::span<const std::byte> page, const IndexHeader& header);

/// Everything the searchers keep in memory: the header plus the PQ section.
/// Node pages stay on the storage backend.
struct SearchIndex {
  IndexHeader header;
  PqCodebook book;
  PqCodes codes;

  static SearchIndex load(const std::filesystem::path& path);
  static SearchIndex from(const GraphIndex& idx);

  std::size_t count() const noexcept { return static_cast<std::size_t>(header.count); }
  std::size_t dim() const noexcept { return header.dim; }
  std::size_t vector_bytes() const noexcept { return header.dim * elem_size(header.elem); }
};

/// Graph-level diagnostics used by tests and the bench harness.
struct GraphStats {
  std::size_t min_degree = 0;
  std::size_t max_degree = 0;
  double mean_degree = 0.0;
  std::size_t reachable = 0;  // from the entry point
};

GraphStats graph_stats(const GraphIndex& idx);

}  // namespace ssdann
