#include "ssdann/quantize.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/core.h>

namespace ssdann {

namespace {

float sq_dist(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t j = 0; j < n; ++j) {
    const float d = a[j] - b[j];
    acc += d * d;
  }
  return acc;
}

// Argmin over the 256 centroids of one subspace; ties go to the smaller index.
std::pair<std::uint8_t, float> nearest_centroid(const float* x, const float* centroids, std::size_t sub_dim) {
  std::size_t best = 0;
  float best_d = std::numeric_limits<float>::max();
  for (std::size_t c = 0; c < kPqCentroids; ++c) {
    const float d = sq_dist(x, centroids + c * sub_dim, sub_dim);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {static_cast<std::uint8_t>(best), best_d};
}

void check_m(std::size_t dim, std::size_t m) {
  if (m == 0 || dim % m != 0) {
    throw Error(Errc::InvalidArgument, fmt::format("m={} does not divide dim={}", m, dim));
  }
}

std::vector<float> training_matrix(const VectorDataset& base, const PqTrainOptions& opts, std::mt19937_64& rng) {
  std::vector<std::size_t> rows(base.count());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (rows.size() > opts.max_train) {
    std::vector<std::size_t> picked;
    picked.reserve(opts.max_train);
    std::sample(rows.begin(), rows.end(), std::back_inserter(picked), opts.max_train, rng);
    rows = std::move(picked);
  }
  std::vector<float> x(rows.size() * base.dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    base.row_as_float(rows[r], std::span<float>(x.data() + r * base.dim(), base.dim()));
  }
  return x;
}

// k-means over one subspace. `x` is n x sub_dim (gathered), `centroids` is
// 256 x sub_dim. Appends the per-iteration mean error into `errors`.
void kmeans_subspace(const std::vector<float>& x, std::size_t n, std::size_t sub_dim, std::size_t iters,
                     std::mt19937_64& rng, float* centroids, std::vector<double>& errors) {
  // k-means++ seeding.
  std::vector<float> mind(n, std::numeric_limits<float>::max());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t chosen = first(rng);
  for (std::size_t c = 0; c < kPqCentroids; ++c) {
    std::copy_n(x.data() + chosen * sub_dim, sub_dim, centroids + c * sub_dim);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mind[i] = std::min(mind[i], sq_dist(x.data() + i * sub_dim, centroids + c * sub_dim, sub_dim));
      total += mind[i];
    }
    if (c + 1 == kPqCentroids) break;
    if (total <= 0.0) {
      chosen = first(rng);
      continue;
    }
    std::uniform_real_distribution<double> pick(0.0, total);
    double target = pick(rng);
    chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= mind[i];
      if (target < 0.0 && mind[i] > 0.0f) {
        chosen = i;
        break;
      }
    }
  }

  std::vector<std::uint8_t> assign(n);
  std::vector<float> adist(n);
  std::vector<double> sums(kPqCentroids * sub_dim);
  std::vector<std::size_t> counts(kPqCentroids);
  for (std::size_t it = 0; it <= iters; ++it) {
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto [c, d] = nearest_centroid(x.data() + i * sub_dim, centroids, sub_dim);
      assign[i] = c;
      adist[i] = d;
      err += d;
    }
    errors[it] += err / static_cast<double>(n);
    if (it == iters) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      counts[assign[i]]++;
      for (std::size_t j = 0; j < sub_dim; ++j) sums[assign[i] * sub_dim + j] += x[i * sub_dim + j];
    }
    for (std::size_t c = 0; c < kPqCentroids; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < sub_dim; ++j) {
        centroids[c * sub_dim + j] = static_cast<float>(sums[c * sub_dim + j] / static_cast<double>(counts[c]));
      }
    }
    // Empty clusters take over the point currently worst served.
    for (std::size_t c = 0; c < kPqCentroids; ++c) {
      if (counts[c] != 0) continue;
      const auto far = static_cast<std::size_t>(std::max_element(adist.begin(), adist.end()) - adist.begin());
      if (adist[far] <= 0.0f) break;
      std::copy_n(x.data() + far * sub_dim, sub_dim, centroids + c * sub_dim);
      adist[far] = 0.0f;
    }
  }
}

PqCodebook train_impl(const VectorDataset& base, std::size_t m, const PqTrainOptions& opts,
                      std::vector<double>& history) {
  check_m(base.dim(), m);
  if (base.count() < kPqCentroids) {
    throw Error(Errc::InsufficientPoints,
                fmt::format("PQ training needs at least {} vectors, got {}", kPqCentroids, base.count()));
  }
  std::mt19937_64 rng(opts.seed);
  const auto x = training_matrix(base, opts, rng);
  const std::size_t n = x.size() / base.dim();

  PqCodebook book;
  book.m = m;
  book.sub_dim = base.dim() / m;
  book.centroids.assign(m * kPqCentroids * book.sub_dim, 0.0f);
  history.assign(opts.iters + 1, 0.0);

  std::vector<float> sub(n * book.sub_dim);
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(x.data() + i * base.dim() + s * book.sub_dim, book.sub_dim, sub.data() + i * book.sub_dim);
    }
    kmeans_subspace(sub, n, book.sub_dim, opts.iters, rng, book.centroid(s, 0).data(), history);
  }
  return book;
}

}  // namespace

PqCodebook pq_train(const VectorDataset& base, std::size_t m, const PqTrainOptions& opts) {
  std::vector<double> history;
  return train_impl(base, m, opts, history);
}

std::vector<double> pq_train_history(const VectorDataset& base, std::size_t m, const PqTrainOptions& opts) {
  std::vector<double> history;
  train_impl(base, m, opts, history);
  return history;
}

void pq_encode_one(std::span<const float> v, const PqCodebook& book, std::span<std::uint8_t> code) {
  for (std::size_t s = 0; s < book.m; ++s) {
    code[s] = nearest_centroid(v.data() + s * book.sub_dim, book.centroid(s, 0).data(), book.sub_dim).first;
  }
}

PqCodes pq_encode(const VectorDataset& base, const PqCodebook& book) {
  PqCodes out;
  out.m = book.m;
  out.count = base.count();
  if (base.count() == 0) return out;
  if (base.dim() != book.dim()) {
    throw Error(Errc::DimMismatch, fmt::format("dataset dim {} vs codebook dim {}", base.dim(), book.dim()));
  }
  out.codes.resize(base.count() * book.m);
  std::vector<float> v(base.dim());
  for (std::size_t i = 0; i < base.count(); ++i) {
    base.row_as_float(i, v);
    pq_encode_one(v, book, std::span<std::uint8_t>(out.codes.data() + i * book.m, book.m));
  }
  return out;
}

std::vector<float> pq_decode(std::span<const std::uint8_t> code, const PqCodebook& book) {
  std::vector<float> v(book.dim());
  for (std::size_t s = 0; s < book.m; ++s) {
    std::ranges::copy(book.centroid(s, code[s]), v.begin() + static_cast<std::ptrdiff_t>(s * book.sub_dim));
  }
  return v;
}

AdcTable adc_table(std::span<const float> query, const PqCodebook& book) {
  if (query.size() != book.dim()) {
    throw Error(Errc::DimMismatch, fmt::format("query dim {} vs codebook dim {}", query.size(), book.dim()));
  }
  AdcTable table(book.m);
  for (std::size_t s = 0; s < book.m; ++s) {
    const float* q = query.data() + s * book.sub_dim;
    for (std::size_t c = 0; c < kPqCentroids; ++c) {
      table.entry(s, c) = sq_dist(q, book.centroid(s, c).data(), book.sub_dim);
    }
  }
  return table;
}

float adc_distance(std::span<const std::uint8_t> code, const AdcTable& table) {
  if (code.size() != table.m()) {
    throw Error(Errc::DimMismatch, fmt::format("code length {} vs table m {}", code.size(), table.m()));
  }
  return table.distance(code);
}

std::size_t default_pq_m(std::size_t dim) {
  for (std::size_t sub : {4, 8, 16}) {
    if (dim % sub == 0) return dim / sub;
  }
  for (std::size_t m = dim / 4; m > 1; --m) {
    if (dim % m == 0) return m;
  }
  return dim;
}

}  // namespace ssdann
