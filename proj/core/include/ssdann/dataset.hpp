#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ssdann/common.hpp"

namespace ssdann {

enum class ElemType : std::uint8_t { u8 = 0, i8 = 1, f32 = 2 };

std::size_t elem_size(ElemType elem);
std::string_view elem_name(ElemType elem);
ElemType parse_elem(std::string_view name);

enum class VecFormat { fvecs, bvecs, ivecs };

VecFormat format_from_path(const std::filesystem::path& path);

/// Row-major matrix of `count` vectors of `dim` elements each. The element
/// bytes are stored untyped; typed access goes through `row<T>()`.
class VectorDataset {
 public:
  VectorDataset() = default;
  VectorDataset(std::size_t count, std::size_t dim, ElemType elem);

  std::size_t count() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  ElemType elem() const noexcept { return elem_; }
  std::size_t row_bytes() const noexcept { return dim_ * elem_size(elem_); }

  std::span<const std::byte> bytes() const noexcept { return data_; }
  std::span<std::byte> bytes() noexcept { return data_; }

  std::span<const std::byte> row_bytes(std::size_t i) const {
    return std::span<const std::byte>(data_).subspan(i * row_bytes(), row_bytes());
  }
  std::span<std::byte> row_bytes(std::size_t i) {
    return std::span<std::byte>(data_).subspan(i * row_bytes(), row_bytes());
  }

  template <typename T>
  std::span<const T> row(std::size_t i) const {
    return {reinterpret_cast<const T*>(data_.data() + i * row_bytes()), dim_};
  }
  template <typename T>
  std::span<T> row(std::size_t i) {
    return {reinterpret_cast<T*>(data_.data() + i * row_bytes()), dim_};
  }

  /// Element `j` of vector `i` widened to float.
  float value(std::size_t i, std::size_t j) const;
  void row_as_float(std::size_t i, std::span<float> out) const;

  /// Copy of the listed rows, in order.
  VectorDataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const VectorDataset&, const VectorDataset&) = default;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  ElemType elem_ = ElemType::f32;
  std::vector<std::byte> data_;
};

/// Squared L2 between two raw vectors of the same element type. Integer data
/// is accumulated in 64-bit integers, so the result is exact while it fits
/// a float mantissa.
float l2_sq(ElemType elem, const std::byte* a, const std::byte* b, std::size_t dim);

inline float l2_sq(const VectorDataset& ds, std::size_t i, std::span<const std::byte> q) {
  return l2_sq(ds.elem(), ds.row_bytes(i).data(), q.data(), ds.dim());
}

VectorDataset load_vectors(const std::filesystem::path& path, VecFormat format);
void write_vectors(const VectorDataset& ds, const std::filesystem::path& path, VecFormat format);

/// Raw 32-bit integer records from an ivecs file.
std::vector<std::vector<std::int32_t>> load_ivecs(const std::filesystem::path& path);
void write_ivecs(std::span<const std::vector<std::int32_t>> rows, const std::filesystem::path& path);

struct SyntheticData {
  VectorDataset data;
  std::vector<std::uint32_t> labels;         // generating cluster per vector
  std::vector<std::vector<float>> centers;  // in the element's value space
};

/// Gaussian blobs around `clusters` centers drawn uniformly over the element
/// type's value range. Each coordinate has standard deviation `spread` times
/// that range. With 0 < latent_dim < dim, every blob is the image of a
/// latent_dim-dimensional standard normal under its own random linear map, so
/// the data has low intrinsic dimension; latent_dim = 0 gives isotropic blobs.
SyntheticData gen_synthetic_labeled(std::size_t count, std::size_t dim, ElemType elem, std::uint64_t seed,
                                    std::size_t clusters, double spread = 0.1, std::size_t latent_dim = 8);

inline VectorDataset gen_synthetic(std::size_t count, std::size_t dim, ElemType elem, std::uint64_t seed,
                                   std::size_t clusters, double spread = 0.1, std::size_t latent_dim = 8) {
  return gen_synthetic_labeled(count, dim, elem, seed, clusters, spread, latent_dim).data;
}

enum class Metric { l2 };

struct GroundTruth {
  std::size_t query_count = 0;
  std::size_t k = 0;
  std::vector<NodeId> ids;       // query_count x k
  std::vector<float> distances;  // query_count x k

  std::span<const NodeId> row_ids(std::size_t q) const { return {ids.data() + q * k, k}; }
  std::span<const float> row_distances(std::size_t q) const { return {distances.data() + q * k, k}; }
};

GroundTruth brute_force_knn(const VectorDataset& base, const VectorDataset& queries, std::size_t k,
                            Metric metric = Metric::l2);

/// Mean over queries of |result_top_k ∩ truth_top_k| / k. Each result row must
/// hold at least k ids.
double recall_at_k(std::span<const std::vector<NodeId>> results, const GroundTruth& truth, std::size_t k);

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& ids_path,
                        const std::filesystem::path& dist_path);
GroundTruth read_ground_truth(const std::filesystem::path& ids_path, const std::filesystem::path& dist_path);

}  // namespace ssdann
