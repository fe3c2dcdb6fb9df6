#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "support.hpp"

using namespace ssdann;

namespace {

float direct_sq(std::span<const float> a, std::span<const float> b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  return static_cast<float>(acc);
}

std::vector<float> as_float(const VectorDataset& ds, std::size_t i) {
  std::vector<float> v(ds.dim());
  ds.row_as_float(i, v);
  return v;
}

}  // namespace

TEST(PqTrain, DistinctPointsAreExact) {
  VectorDataset base(256, 8, ElemType::f32);
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(0, 1);
  for (std::size_t i = 0; i < 256; ++i)
    for (auto& v : base.row<float>(i)) v = u(rng);
  for (std::size_t m : {1, 2, 4, 8}) {
    PqTrainOptions o;
    o.iters = 25;
    const auto book = pq_train(base, m, o);
    const auto codes = pq_encode(base, book);
    for (std::size_t i = 0; i < 256; ++i) {
      const auto rec = pq_decode(codes.code(i), book);
      const auto v = as_float(base, i);
      EXPECT_EQ(direct_sq(rec, v), 0.0f) << "m=" << m << " i=" << i;
    }
  }
}

TEST(PqTrain, DeterministicAndBoundaries) {
  const auto base = gen_synthetic(600, 16, ElemType::f32, 2, 4);
  EXPECT_EQ(pq_train(base, 4), pq_train(base, 4));
  const auto scalar = pq_train(base, 16);
  EXPECT_EQ(scalar.sub_dim, 1u);
  EXPECT_EQ(scalar.centroids.size(), 16u * 256u);
  EXPECT_THROW(pq_train(base, 5), Error);
  try {
    pq_train(gen_synthetic(100, 16, ElemType::f32, 2, 4), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientPoints);
  }
}

TEST(PqTrain, ObjectiveIsMonotone) {
  const auto base = gen_synthetic(2000, 16, ElemType::f32, 5, 8);
  PqTrainOptions o;
  o.iters = 12;
  const auto hist = pq_train_history(base, 4, o);
  ASSERT_EQ(hist.size(), 13u);
  for (std::size_t i = 1; i < hist.size(); ++i) EXPECT_LE(hist[i], hist[i - 1] * (1 + 1e-9)) << i;
}

TEST(PqEncode, MatchesExhaustiveArgmin) {
  const auto base = gen_synthetic(1000, 12, ElemType::f32, 7, 5);
  const auto book = pq_train(base, 3);
  const auto codes = pq_encode(base, book);
  EXPECT_EQ(codes.count, 1000u);
  for (std::size_t i = 0; i < 1000; i += 7) {
    const auto v = as_float(base, i);
    for (std::size_t s = 0; s < 3; ++s) {
      std::size_t best = 0;
      float bd = INFINITY;
      for (std::size_t c = 0; c < 256; ++c) {
        const float d = direct_sq(std::span<const float>(v).subspan(s * 4, 4), book.centroid(s, c));
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      const float got = direct_sq(std::span<const float>(v).subspan(s * 4, 4), book.centroid(s, codes.code(i)[s]));
      EXPECT_LE(got, bd * (1 + 1e-6f) + 1e-12f);
      if (got != bd) ADD_FAILURE() << "non-minimal code";
      (void)best;
    }
  }
}

TEST(PqEncode, CentroidVectorAndEmpty) {
  const auto base = gen_synthetic(600, 8, ElemType::f32, 2, 4);
  const auto book = pq_train(base, 2);
  std::vector<float> v(8);
  for (std::size_t s = 0; s < 2; ++s) std::copy_n(book.centroid(s, 17).begin(), 4, v.begin() + s * 4);
  std::vector<std::uint8_t> code(2);
  pq_encode_one(v, book, code);
  // The centroid's own index wins unless an identical centroid with a
  // smaller index exists.
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_EQ(direct_sq(book.centroid(s, code[s]), book.centroid(s, 17)), 0.0f);
    EXPECT_LE(code[s], 17);
  }
  VectorDataset empty(0, 8, ElemType::f32);
  EXPECT_EQ(pq_encode(empty, book).count, 0u);
  EXPECT_THROW(pq_encode(gen_synthetic(10, 4, ElemType::f32, 1, 1), book), Error);
}

TEST(PqEncode, TiesGoToSmallerCentroid) {
  PqCodebook book;
  book.m = 1;
  book.sub_dim = 1;
  book.centroids.assign(256, 100.0f);
  book.centroids[3] = 1.0f;
  book.centroids[9] = 1.0f;
  std::vector<float> v{1.0f};
  std::vector<std::uint8_t> code(1);
  pq_encode_one(v, book, code);
  EXPECT_EQ(code[0], 3);
}

TEST(PqEncode, Idempotent) {
  const auto base = gen_synthetic(800, 16, ElemType::u8, 4, 4);
  const auto book = pq_train(base, 4);
  const auto codes = pq_encode(base, book);
  for (std::size_t i = 0; i < 800; i += 5) {
    const auto rec = pq_decode(codes.code(i), book);
    std::vector<std::uint8_t> again(4);
    pq_encode_one(rec, book, again);
    EXPECT_TRUE(std::equal(again.begin(), again.end(), codes.code(i).begin()));
  }
}

TEST(Adc, TableMatchesDirectDistances) {
  const auto base = gen_synthetic(600, 8, ElemType::f32, 3, 4);
  const auto book = pq_train(base, 4);
  const auto q = as_float(base, 11);
  const auto t = adc_table(q, book);
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t c = 0; c < 256; ++c) {
      EXPECT_GE(t.entry(s, c), 0.0f);
      EXPECT_NEAR(t.entry(s, c), direct_sq(std::span<const float>(q).subspan(s * 2, 2), book.centroid(s, c)), 1e-6);
    }
  std::vector<float> onc(8);
  for (std::size_t s = 0; s < 4; ++s) std::copy_n(book.centroid(s, 5).begin(), 2, onc.begin() + s * 2);
  const auto t2 = adc_table(onc, book);
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(t2.entry(s, 5), 0.0f);
  EXPECT_THROW(adc_table(std::vector<float>(7), book), Error);
}

TEST(Adc, DistanceEqualsReconstructionDistance) {
  const auto base = gen_synthetic(1000, 16, ElemType::f32, 8, 4);
  const auto book = pq_train(base, 4);
  const auto codes = pq_encode(base, book);
  const auto q = as_float(gen_synthetic(1, 16, ElemType::f32, 99, 1), 0);
  const auto t = adc_table(q, book);
  for (std::size_t i = 0; i < 1000; i += 3) {
    const float adc = adc_distance(codes.code(i), t);
    const float direct = direct_sq(pq_decode(codes.code(i), book), q);
    EXPECT_NEAR(adc, direct, 1e-3 * std::max(1.0f, direct));
  }
  const auto self = adc_table(pq_decode(codes.code(3), book), book);
  EXPECT_EQ(adc_distance(codes.code(3), self), 0.0f);
  EXPECT_THROW(adc_distance(std::vector<std::uint8_t>(3), t), Error);
}

TEST(Adc, SingleSubspaceIsOneLookup) {
  const auto base = gen_synthetic(400, 4, ElemType::f32, 1, 2);
  const auto book = pq_train(base, 1);
  const auto q = as_float(base, 0);
  const auto t = adc_table(q, book);
  std::vector<std::uint8_t> code{42};
  EXPECT_EQ(adc_distance(code, t), t.entry(0, 42));
}

TEST(DefaultPqM, SubDimPreference) {
  EXPECT_EQ(default_pq_m(128), 32u);
  EXPECT_EQ(default_pq_m(96), 24u);
  EXPECT_EQ(default_pq_m(64), 16u);
  EXPECT_EQ(default_pq_m(12), 3u);
  EXPECT_EQ(128 % default_pq_m(128), 0u);
}
