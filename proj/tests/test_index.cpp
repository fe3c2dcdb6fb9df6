#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "support.hpp"

using namespace ssdann;
using testutil::TempDir;

TEST(PageLayout, PayloadBytes) {
  EXPECT_EQ(node_payload_bytes(128, 1, 64).bytes, 388u);
  EXPECT_EQ(node_payload_bytes(128, 1, 64).bytes_no_count, 384u);
  EXPECT_EQ(node_payload_bytes(96, 4, 150).bytes, 988u);
  EXPECT_EQ(node_payload_bytes(96, 4, 150).bytes_no_count, 984u);
  EXPECT_EQ(node_payload_bytes(4, 1, 0).bytes, 8u);
  EXPECT_THROW(node_payload_bytes(0, 1, 4), Error);
  EXPECT_THROW(node_payload_bytes(4, 0, 4), Error);
}

TEST(PageLayout, FillRatio) {
  EXPECT_DOUBLE_EQ(fill_ratio(128, 1, 64), 0.09375);
  EXPECT_DOUBLE_EQ(fill_ratio(128, 1, 992), 1.0);
  try {
    fill_ratio(128, 1, 1000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PageOverflow);
  }
}

TEST(PageLayout, MaxDegree) {
  EXPECT_EQ(max_degree_for_page(128, 1), 991u);
  EXPECT_EQ(max_degree_for_page(96, 4), 927u);
  EXPECT_THROW(max_degree_for_page(4096, 1), Error);
  for (std::size_t dim : {1u, 7u, 128u, 960u})
    for (std::size_t e : {1u, 4u}) {
      if (dim * e + 4 >= kPageSize) continue;
      const std::size_t r = max_degree_for_page(dim, e);
      EXPECT_LE(node_payload_bytes(dim, e, r).bytes, kPageSize);
      EXPECT_GT(node_payload_bytes(dim, e, r + 1).bytes, kPageSize);
    }
}

TEST(PageLayout, SerializedPageIsExact) {
  const auto base = gen_synthetic(300, 8, ElemType::u8, 1, 4);
  const auto g = testutil::make_index(base, 12);
  std::array<std::byte, kPageSize> page;
  for (NodeId id = 0; id < 300; id += 13) {
    page.fill(std::byte{0x5A});
    g.serialize_page(id, page);
    const auto view = decode_page(page, g.header);
    EXPECT_TRUE(std::equal(view.vector.begin(), view.vector.end(), base.row_bytes(id).begin()));
    EXPECT_EQ(std::vector<NodeId>(view.neighbors.begin(), view.neighbors.end()), g.adjacency[id]);
    // Independent byte-level decode.
    std::uint32_t count;
    std::memcpy(&count, page.data() + 8, 4);
    EXPECT_EQ(count, g.adjacency[id].size());
    for (std::size_t s = 0; s < 12; ++s) {
      std::uint32_t v;
      std::memcpy(&v, page.data() + 12 + 4 * s, 4);
      EXPECT_EQ(v, s < count ? g.adjacency[id][s] : kInvalidNode);
    }
    for (std::size_t b = 12 + 4 * 12; b < kPageSize; ++b) ASSERT_EQ(page[b], std::byte{0});
  }
}

TEST(BuildIndex, TwoPoints) {
  VectorDataset base(2, 2, ElemType::f32);
  base.row<float>(1)[0] = 1.0f;
  PqCodebook book;
  book.m = 2;
  book.sub_dim = 1;
  book.centroids.assign(2 * 256, 0.0f);
  book.centroids[1] = 1.0f;
  PqCodes codes{2, 2, {0, 0, 1, 0}};
  const auto g = build_index(base, book, codes, BuildParams::with_degree(4));
  EXPECT_EQ(g.adjacency[0], std::vector<NodeId>{1});
  EXPECT_EQ(g.adjacency[1], std::vector<NodeId>{0});
}

TEST(BuildIndex, Errors) {
  const auto base = gen_synthetic(400, 8, ElemType::f32, 1, 4);
  const auto book = pq_train(base, 2);
  const auto codes = pq_encode(base, book);
  EXPECT_THROW(build_index(testutil::rows(base, 0, 1), book, pq_encode(testutil::rows(base, 0, 1), book),
                           BuildParams::with_degree(4)),
               Error);
  auto p = BuildParams::with_degree(4);
  p.degree = 0;
  EXPECT_THROW(build_index(base, book, codes, p), Error);
  p = BuildParams::with_degree(4);
  p.alpha = 0.9f;
  EXPECT_THROW(p.validate(), Error);
  p = BuildParams::with_degree(32);
  p.build_list = 16;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_EQ(BuildParams::with_degree(16).build_list, 64u);
  EXPECT_EQ(BuildParams::with_degree(48).build_list, 96u);
}

TEST(BuildIndex, StructuralInvariants) {
  const auto base = gen_synthetic(2000, 16, ElemType::f32, 3, 8);
  const auto g = testutil::make_index(base, 24);
  EXPECT_EQ(g.header.degree, 24u);
  EXPECT_LT(g.header.entry_point, 2000u);
  for (NodeId i = 0; i < 2000; ++i) {
    const auto& nb = g.adjacency[i];
    ASSERT_GE(nb.size(), 1u);
    ASSERT_LE(nb.size(), 24u);
    std::set<NodeId> uniq(nb.begin(), nb.end());
    EXPECT_EQ(uniq.size(), nb.size());
    EXPECT_EQ(uniq.count(i), 0u);
    EXPECT_LT(*uniq.rbegin(), 2000u);
  }
  const auto st = graph_stats(g);
  EXPECT_GE(st.reachable, 1980u);
  EXPECT_EQ(g.header.entry_point, sample_medoid(base, 10'000, 1));
}

TEST(BuildIndex, DeterministicForSeed) {
  const auto base = gen_synthetic(800, 8, ElemType::f32, 3, 8);
  const auto a = testutil::make_index(base, 16, 5);
  const auto b = testutil::make_index(base, 16, 5);
  EXPECT_EQ(a.adjacency, b.adjacency);
  EXPECT_EQ(a.header, b.header);
}

TEST(SampleMedoid, MatchesBruteForceOnFullSample) {
  const auto base = gen_synthetic(60, 4, ElemType::f32, 2, 3);
  const NodeId m = sample_medoid(base, 1000, 1);
  double best = 1e300;
  NodeId arg = 0;
  for (NodeId i = 0; i < 60; ++i) {
    double s = 0;
    for (NodeId j = 0; j < 60; ++j) s += l2_sq(base, j, base.row_bytes(i));
    if (s < best) {
      best = s;
      arg = i;
    }
  }
  EXPECT_EQ(m, arg);
}

TEST(BuildIndex, StrictSearchRecallOnBlobs) {
  const auto corpus = testutil::make_corpus(1000, 100, 16, 11);
  const auto g = testutil::make_index(corpus.base, 32);
  const auto gt = brute_force_knn(corpus.base, corpus.queries, 10);
  std::vector<std::vector<NodeId>> got;
  for (std::size_t q = 0; q < 100; ++q)
    got.push_back(testutil::reference_best_first(g, corpus.queries.row_bytes(q), 64, 10).ids);
  EXPECT_GE(recall_at_k(got, gt, 10), 0.95);
}

TEST(BuildIndex, LargerAlphaKeepsLongEdges) {
  const auto base = gen_synthetic(1500, 16, ElemType::f32, 4, 8);
  const auto book = pq_train(base, 4);
  const auto codes = pq_encode(base, book);
  auto p = BuildParams::with_degree(24);
  p.alpha = 1.0f;
  const auto g10 = build_index(base, book, codes, p);
  p.alpha = 1.2f;
  const auto g12 = build_index(base, book, codes, p);
  auto lengths = [&](const GraphIndex& g) {
    std::vector<float> out;
    for (NodeId i = 0; i < g.count(); ++i)
      for (NodeId j : g.adjacency[i]) out.push_back(l2_sq(base, i, base.row_bytes(j)));
    return out;
  };
  auto l10 = lengths(g10);
  const auto l12 = lengths(g12);
  std::vector<float> sorted = l10;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const float median = sorted[sorted.size() / 2];
  auto longer = [&](const std::vector<float>& v) { return std::count_if(v.begin(), v.end(), [&](float x) { return x > median; }); };
  EXPECT_GE(longer(l12), longer(l10));
}

TEST(IndexFile, HeaderRoundTripAndOffsets) {
  TempDir dir;
  const auto base = gen_synthetic(300, 12, ElemType::i8, 1, 4);
  const auto g = testutil::make_index(base, 10);
  write_index(g, dir / "x.idx");
  const auto h = read_index_header(dir / "x.idx");
  EXPECT_EQ(h, g.header);
  EXPECT_EQ(h.page_base % kPageSize, 0u);
  EXPECT_EQ(h.page_offset(5), h.page_base + 20480);
  EXPECT_EQ(std::filesystem::file_size(dir / "x.idx"), h.page_base + 300 * kPageSize);

  std::ifstream in(dir / "x.idx", std::ios::binary);
  std::vector<char> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(std::string(file.data(), 8), "SSDGRAPH");
  std::array<std::byte, kPageSize> page;
  g.serialize_page(7, page);
  EXPECT_EQ(std::memcmp(file.data() + h.page_offset(7), page.data(), kPageSize), 0);

  const auto si = SearchIndex::load(dir / "x.idx");
  EXPECT_EQ(si.book, g.book);
  EXPECT_EQ(si.codes, g.codes);

  write_index(g, dir / "y.idx");
  std::ifstream in2(dir / "y.idx", std::ios::binary);
  std::vector<char> file2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
  EXPECT_EQ(file, file2);
}

TEST(IndexFile, Corruption) {
  TempDir dir;
  const auto base = gen_synthetic(300, 8, ElemType::u8, 1, 4);
  write_index(testutil::make_index(base, 8), dir / "x.idx");
  {
    std::fstream f(dir / "x.idx", std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  try {
    read_index_header(dir / "x.idx");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BadMagic);
  }
  write_index(testutil::make_index(base, 8), dir / "v.idx");
  {
    std::fstream f(dir / "v.idx", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t v = 99;
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  try {
    read_index_header(dir / "v.idx");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BadVersion);
  }
  write_index(testutil::make_index(base, 8), dir / "t.idx");
  std::filesystem::resize_file(dir / "t.idx", std::filesystem::file_size(dir / "t.idx") - 100);
  try {
    read_index_header(dir / "t.idx");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Truncated);
  }
}
