#include "ssdann/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <unordered_set>

#include <fmt/core.h>

namespace ssdann {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InconsistentDim: return "InconsistentDim";
    case Errc::Truncated: return "Truncated";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::InsufficientPoints: return "InsufficientPoints";
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadVersion: return "BadVersion";
    case Errc::PageOverflow: return "PageOverflow";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::BackendClosed: return "BackendClosed";
    case Errc::NoTraffic: return "NoTraffic";
    case Errc::ProtocolViolation: return "ProtocolViolation";
    case Errc::StaleWait: return "StaleWait";
    case Errc::PoisonedCompletion: return "PoisonedCompletion";
    case Errc::Io: return "Io";
    case Errc::Config: return "Config";
  }
  return "Unknown";
}

std::size_t elem_size(ElemType elem) {
  switch (elem) {
    case ElemType::u8:
    case ElemType::i8: return 1;
    case ElemType::f32: return 4;
  }
  throw Error(Errc::InvalidArgument, "unknown element type");
}

std::string_view elem_name(ElemType elem) {
  switch (elem) {
    case ElemType::u8: return "u8";
    case ElemType::i8: return "i8";
    case ElemType::f32: return "f32";
  }
  return "?";
}

ElemType parse_elem(std::string_view name) {
  if (name == "u8" || name == "uint8") return ElemType::u8;
  if (name == "i8" || name == "int8") return ElemType::i8;
  if (name == "f32" || name == "float") return ElemType::f32;
  throw Error(Errc::InvalidArgument, fmt::format("unknown element type '{}'", name));
}

VecFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".fvecs") return VecFormat::fvecs;
  if (ext == ".bvecs") return VecFormat::bvecs;
  if (ext == ".ivecs") return VecFormat::ivecs;
  throw Error(Errc::InvalidArgument, fmt::format("cannot infer vector format from '{}'", path.string()));
}

VectorDataset::VectorDataset(std::size_t count, std::size_t dim, ElemType elem)
    : count_(count), dim_(dim), elem_(elem), data_(count * dim * elem_size(elem)) {
  if (dim == 0) throw Error(Errc::InvalidArgument, "dim must be positive");
}

float VectorDataset::value(std::size_t i, std::size_t j) const {
  switch (elem_) {
    case ElemType::u8: return static_cast<float>(row<std::uint8_t>(i)[j]);
    case ElemType::i8: return static_cast<float>(row<std::int8_t>(i)[j]);
    case ElemType::f32: return row<float>(i)[j];
  }
  return 0.0f;
}

void VectorDataset::row_as_float(std::size_t i, std::span<float> out) const {
  for (std::size_t j = 0; j < dim_; ++j) out[j] = value(i, j);
}

VectorDataset VectorDataset::subset(std::span<const std::size_t> rows) const {
  VectorDataset out(rows.size(), dim_, elem_);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= count_) throw Error(Errc::OutOfRange, "subset row out of range");
    std::memcpy(out.row_bytes(r).data(), row_bytes(rows[r]).data(), row_bytes());
  }
  return out;
}

namespace {

template <typename T>
std::int64_t l2_int(const std::byte* a, const std::byte* b, std::size_t dim) {
  const auto* x = reinterpret_cast<const T*>(a);
  const auto* y = reinterpret_cast<const T*>(b);
  std::int64_t acc = 0;
  for (std::size_t j = 0; j < dim; ++j) {
    const std::int32_t d = static_cast<std::int32_t>(x[j]) - static_cast<std::int32_t>(y[j]);
    acc += d * d;
  }
  return acc;
}

float l2_float(const std::byte* a, const std::byte* b, std::size_t dim) {
  const auto* p = reinterpret_cast<const float*>(a);
  const auto* q = reinterpret_cast<const float*>(b);
  float acc = 0.0f;
  for (std::size_t j = 0; j < dim; ++j) {
    const float d = p[j] - q[j];
    acc += d * d;
  }
  return acc;
}

}  // namespace

float l2_sq(ElemType elem, const std::byte* a, const std::byte* b, std::size_t dim) {
  switch (elem) {
    case ElemType::u8: return static_cast<float>(l2_int<std::uint8_t>(a, b, dim));
    case ElemType::i8: return static_cast<float>(l2_int<std::int8_t>(a, b, dim));
    case ElemType::f32: return l2_float(a, b, dim);
  }
  return 0.0f;
}

namespace {

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, fmt::format("cannot open '{}'", path.string()));
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

std::size_t format_elem_bytes(VecFormat format) { return format == VecFormat::bvecs ? 1 : 4; }

// Walks the per-record headers and returns (count, dim); validates layout.
std::pair<std::size_t, std::size_t> scan_records(const std::vector<char>& buf, std::size_t elem_bytes,
                                                 const std::filesystem::path& path) {
  std::size_t offset = 0;
  std::size_t count = 0;
  std::int32_t dim = -1;
  while (offset < buf.size()) {
    if (buf.size() - offset < 4) {
      throw Error(Errc::Truncated, fmt::format("'{}': partial header at byte {}", path.string(), offset));
    }
    std::int32_t d;
    std::memcpy(&d, buf.data() + offset, 4);
    if (d <= 0) throw Error(Errc::InvalidArgument, fmt::format("'{}': record {} has dim {}", path.string(), count, d));
    if (dim >= 0 && d != dim) {
      throw Error(Errc::InconsistentDim,
                  fmt::format("'{}': record {} declares dim {} after {}", path.string(), count, d, dim));
    }
    dim = d;
    const std::size_t body = static_cast<std::size_t>(d) * elem_bytes;
    if (buf.size() - offset - 4 < body) {
      throw Error(Errc::Truncated, fmt::format("'{}': record {} is truncated", path.string(), count));
    }
    offset += 4 + body;
    ++count;
  }
  if (count == 0) throw Error(Errc::Truncated, fmt::format("'{}' holds no records", path.string()));
  return {count, static_cast<std::size_t>(dim)};
}

}  // namespace

VectorDataset load_vectors(const std::filesystem::path& path, VecFormat format) {
  const auto buf = slurp(path);
  const std::size_t eb = format_elem_bytes(format);
  const auto [count, dim] = scan_records(buf, eb, path);
  const ElemType elem = format == VecFormat::bvecs ? ElemType::u8 : ElemType::f32;
  VectorDataset ds(count, dim, elem);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    offset += 4;
    if (format == VecFormat::ivecs) {
      auto row = ds.row<float>(i);
      for (std::size_t j = 0; j < dim; ++j) {
        std::int32_t v;
        std::memcpy(&v, buf.data() + offset + 4 * j, 4);
        row[j] = static_cast<float>(v);
      }
    } else {
      std::memcpy(ds.row_bytes(i).data(), buf.data() + offset, dim * eb);
    }
    offset += dim * eb;
  }
  return ds;
}

void write_vectors(const VectorDataset& ds, const std::filesystem::path& path, VecFormat format) {
  const bool want_bytes = format == VecFormat::bvecs;
  if (want_bytes != (ds.elem() != ElemType::f32)) {
    throw Error(Errc::InvalidArgument,
                fmt::format("cannot write {} data as {}", elem_name(ds.elem()), path.extension().string()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, fmt::format("cannot create '{}'", path.string()));
  const auto dim = static_cast<std::int32_t>(ds.dim());
  for (std::size_t i = 0; i < ds.count(); ++i) {
    out.write(reinterpret_cast<const char*>(&dim), 4);
    if (format == VecFormat::ivecs) {
      for (float v : ds.row<float>(i)) {
        const auto iv = static_cast<std::int32_t>(v);
        out.write(reinterpret_cast<const char*>(&iv), 4);
      }
    } else {
      out.write(reinterpret_cast<const char*>(ds.row_bytes(i).data()), static_cast<std::streamsize>(ds.row_bytes()));
    }
  }
  if (!out) throw Error(Errc::Io, fmt::format("write to '{}' failed", path.string()));
}

std::vector<std::vector<std::int32_t>> load_ivecs(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  const auto [count, dim] = scan_records(buf, 4, path);
  std::vector<std::vector<std::int32_t>> rows(count, std::vector<std::int32_t>(dim));
  std::size_t offset = 0;
  for (auto& row : rows) {
    offset += 4;
    std::memcpy(row.data(), buf.data() + offset, dim * 4);
    offset += dim * 4;
  }
  return rows;
}

void write_ivecs(std::span<const std::vector<std::int32_t>> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, fmt::format("cannot create '{}'", path.string()));
  for (const auto& row : rows) {
    const auto dim = static_cast<std::int32_t>(row.size());
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw Error(Errc::Io, fmt::format("write to '{}' failed", path.string()));
}

namespace {

struct ValueRange {
  double lo;
  double hi;
};

ValueRange value_range(ElemType elem) {
  switch (elem) {
    case ElemType::u8: return {0.0, 255.0};
    case ElemType::i8: return {-128.0, 127.0};
    case ElemType::f32: return {0.0, 1.0};
  }
  return {0.0, 1.0};
}

}  // namespace

SyntheticData gen_synthetic_labeled(std::size_t count, std::size_t dim, ElemType elem, std::uint64_t seed,
                                    std::size_t clusters, double spread, std::size_t latent_dim) {
  if (count == 0 || dim == 0) throw Error(Errc::InvalidArgument, "count and dim must be positive");
  if (clusters == 0) throw Error(Errc::InvalidArgument, "clusters must be positive");
  if (!(spread >= 0.0)) throw Error(Errc::InvalidArgument, "spread must be non-negative");
  const auto range = value_range(elem);
  const double width = range.hi - range.lo;
  const std::size_t lat = (latent_dim == 0 || latent_dim > dim) ? dim : latent_dim;
  const bool isotropic = lat == dim;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(range.lo, range.hi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SyntheticData out;
  out.centers.assign(clusters, std::vector<float>(dim));
  for (auto& c : out.centers) {
    for (auto& v : c) v = static_cast<float>(uni(rng));
  }
  // Per-cluster dim x lat mixing matrices; entries scaled so every
  // coordinate has standard deviation spread * width.
  std::vector<std::vector<double>> mix;
  if (!isotropic) {
    const double scale = spread * width / std::sqrt(static_cast<double>(lat));
    mix.assign(clusters, std::vector<double>(dim * lat));
    for (auto& w : mix) {
      for (auto& v : w) v = gauss(rng) * scale;
    }
  }

  std::uniform_int_distribution<std::size_t> pick(0, clusters - 1);
  out.data = VectorDataset(count, dim, elem);
  out.labels.resize(count);
  std::vector<double> z(lat);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = pick(rng);
    out.labels[i] = static_cast<std::uint32_t>(c);
    for (auto& v : z) v = gauss(rng);
    for (std::size_t j = 0; j < dim; ++j) {
      double v = out.centers[c][j];
      if (isotropic) {
        v += z[j] * spread * width;
      } else {
        const double* w = mix[c].data() + j * lat;
        for (std::size_t l = 0; l < lat; ++l) v += w[l] * z[l];
      }
      switch (elem) {
        case ElemType::u8:
          out.data.row<std::uint8_t>(i)[j] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
          break;
        case ElemType::i8:
          out.data.row<std::int8_t>(i)[j] = static_cast<std::int8_t>(std::clamp(std::lround(v), -128L, 127L));
          break;
        case ElemType::f32:
          out.data.row<float>(i)[j] = static_cast<float>(v);
          break;
      }
    }
  }
  return out;
}

GroundTruth brute_force_knn(const VectorDataset& base, const VectorDataset& queries, std::size_t k, Metric) {
  if (base.dim() != queries.dim() || base.elem() != queries.elem()) {
    throw Error(Errc::DimMismatch, fmt::format("base dim {} vs query dim {}", base.dim(), queries.dim()));
  }
  if (k == 0 || k > base.count()) {
    throw Error(Errc::InvalidArgument, fmt::format("k={} with {} base vectors", k, base.count()));
  }
  GroundTruth gt;
  gt.query_count = queries.count();
  gt.k = k;
  gt.ids.resize(queries.count() * k);
  gt.distances.resize(queries.count() * k);

  std::vector<std::pair<float, NodeId>> scored(base.count());
  for (std::size_t q = 0; q < queries.count(); ++q) {
    const auto qrow = queries.row_bytes(q);
    for (std::size_t i = 0; i < base.count(); ++i) {
      scored[i] = {l2_sq(base, i, qrow), static_cast<NodeId>(i)};
    }
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
    for (std::size_t j = 0; j < k; ++j) {
      gt.distances[q * k + j] = scored[j].first;
      gt.ids[q * k + j] = scored[j].second;
    }
  }
  return gt;
}

double recall_at_k(std::span<const std::vector<NodeId>> results, const GroundTruth& truth, std::size_t k) {
  if (results.size() != truth.query_count) {
    throw Error(Errc::InvalidArgument,
                fmt::format("{} result rows for {} ground-truth rows", results.size(), truth.query_count));
  }
  if (k == 0 || k > truth.k) throw Error(Errc::InvalidArgument, fmt::format("k={} exceeds ground-truth k={}", k, truth.k));
  if (results.empty()) return 0.0;
  double total = 0.0;
  std::unordered_set<NodeId> want;
  for (std::size_t q = 0; q < results.size(); ++q) {
    if (results[q].size() < k) throw Error(Errc::InvalidArgument, fmt::format("result row {} has fewer than k ids", q));
    want.clear();
    const auto row = truth.row_ids(q);
    want.insert(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k));
    std::size_t hit = 0;
    for (std::size_t j = 0; j < k; ++j) hit += want.count(results[q][j]);
    total += static_cast<double>(hit) / static_cast<double>(k);
  }
  return total / static_cast<double>(results.size());
}

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& ids_path,
                        const std::filesystem::path& dist_path) {
  std::vector<std::vector<std::int32_t>> rows(gt.query_count);
  VectorDataset dists(gt.query_count, gt.k, ElemType::f32);
  for (std::size_t q = 0; q < gt.query_count; ++q) {
    for (auto id : gt.row_ids(q)) rows[q].push_back(static_cast<std::int32_t>(id));
    std::ranges::copy(gt.row_distances(q), dists.row<float>(q).begin());
  }
  write_ivecs(rows, ids_path);
  write_vectors(dists, dist_path, VecFormat::fvecs);
}

GroundTruth read_ground_truth(const std::filesystem::path& ids_path, const std::filesystem::path& dist_path) {
  const auto rows = load_ivecs(ids_path);
  const auto dists = load_vectors(dist_path, VecFormat::fvecs);
  if (dists.count() != rows.size() || dists.dim() != rows.front().size()) {
    throw Error(Errc::DimMismatch, "ground-truth id and distance files disagree in shape");
  }
  GroundTruth gt;
  gt.query_count = rows.size();
  gt.k = rows.front().size();
  for (std::size_t q = 0; q < rows.size(); ++q) {
    for (auto id : rows[q]) gt.ids.push_back(static_cast<NodeId>(id));
    for (float d : dists.row<float>(q)) gt.distances.push_back(d);
  }
  return gt;
}

}  // namespace ssdann
