#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ssdann/dataset.hpp"

namespace ssdann {

inline constexpr std::size_t kPqCentroids = 256;

/// Per-subspace codebooks: `m` subspaces of `sub_dim` coordinates, 256
/// centroids each, stored as m x 256 x sub_dim floats.
struct PqCodebook {
  std::size_t m = 0;
  std::size_t sub_dim = 0;
  std::vector<float> centroids;

  std::size_t dim() const noexcept { return m * sub_dim; }
  std::span<const float> centroid(std::size_t sub, std::size_t c) const {
    return {centroids.data() + (sub * kPqCentroids + c) * sub_dim, sub_dim};
  }
  std::span<float> centroid(std::size_t sub, std::size_t c) {
    return {centroids.data() + (sub * kPqCentroids + c) * sub_dim, sub_dim};
  }

  friend bool operator==(const PqCodebook&, const PqCodebook&) = default;
};

struct PqCodes {
  std::size_t count = 0;
  std::size_t m = 0;
  std::vector<std::uint8_t> codes;

  std::span<const std::uint8_t> code(std::size_t i) const { return {codes.data() + i * m, m}; }

  friend bool operator==(const PqCodes&, const PqCodes&) = default;
};

/// Query-specific lookup table: entry(s, c) = squared L2 between the query's
/// s-th sub-vector and centroid c of subspace s.
class AdcTable {
 public:
  AdcTable() = default;
  explicit AdcTable(std::size_t m) : m_(m), table_(m * kPqCentroids) {}

  std::size_t m() const noexcept { return m_; }
  float entry(std::size_t sub, std::size_t c) const { return table_[sub * kPqCentroids + c]; }
  float& entry(std::size_t sub, std::size_t c) { return table_[sub * kPqCentroids + c]; }

  float distance(std::span<const std::uint8_t> code) const {
    float acc = 0.0f;
    const float* row = table_.data();
    for (std::size_t s = 0; s < m_; ++s, row += kPqCentroids) acc += row[code[s]];
    return acc;
  }

 private:
  std::size_t m_ = 0;
  std::vector<float> table_;
};

struct PqTrainOptions {
  std::size_t iters = 10;
  std::uint64_t seed = 1;
  // Training uses a uniform sample of at most this many base vectors.
  std::size_t max_train = 100'000;
};

PqCodebook pq_train(const VectorDataset& base, std::size_t m, const PqTrainOptions& opts = {});

/// Mean squared reconstruction error of `base` under `book` after each Lloyd
/// iteration of a training run; exposed so the monotone objective is testable.
std::vector<double> pq_train_history(const VectorDataset& base, std::size_t m, const PqTrainOptions& opts);

PqCodes pq_encode(const VectorDataset& base, const PqCodebook& book);
void pq_encode_one(std::span<const float> v, const PqCodebook& book, std::span<std::uint8_t> code);
std::vector<float> pq_decode(std::span<const std::uint8_t> code, const PqCodebook& book);

AdcTable adc_table(std::span<const float> query, const PqCodebook& book);
float adc_distance(std::span<const std::uint8_t> code, const AdcTable& table);

/// Picks m so that dim/m lands in {4, 8, 16}, preferring 4; falls back to
/// the largest divisor of dim that is at most dim/4 (or m = dim).
std::size_t default_pq_m(std::size_t dim);

}  // namespace ssdann
