#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "support.hpp"

using namespace ssdann;
using testutil::TempDir;

namespace {

class Fixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    const auto base = gen_synthetic(500, 8, ElemType::u8, 1, 4);
    graph_ = new GraphIndex(testutil::make_index(base, 8));
    write_index(*graph_, *dir_ / "s.idx");
  }
  static void TearDownTestSuite() {
    delete graph_;
    delete dir_;
  }
  static std::filesystem::path path() { return *dir_ / "s.idx"; }
  static StorageProfile quiet() {
    StorageProfile p;
    p.tail_probability = 0.0;
    return p;
  }
  static TempDir* dir_;
  static GraphIndex* graph_;
};

class ZeroPages final : public PageStore {
 public:
  explicit ZeroPages(std::uint64_t n) : n_(n) {}
  std::uint64_t page_count() const override { return n_; }
  void read(NodeId, PageSpan out) const override { std::fill(out.begin(), out.end(), std::byte{0}); }

 private:
  std::uint64_t n_;
};

TempDir* Fixture::dir_ = nullptr;
GraphIndex* Fixture::graph_ = nullptr;

}  // namespace

TEST(StorageProfile, ParseAndValidate) {
  const auto p = StorageProfile::parse(
      "# two drives\ndevice_count = 2\nqueue_depth=16\nbase_latency_us = 90.5\ntail_probability = 0.1\n"
      "tail_latency_us = 2000\nbandwidth_mbps = 1500\nseed = 9\n");
  EXPECT_EQ(p.device_count, 2u);
  EXPECT_EQ(p.queue_depth, 16u);
  EXPECT_EQ(p.base_latency, 90'500);
  EXPECT_DOUBLE_EQ(p.tail_probability, 0.1);
  EXPECT_EQ(p.tail_latency, 2'000'000);
  EXPECT_DOUBLE_EQ(p.bandwidth, 1.5e9);
  EXPECT_EQ(p.seed, 9u);
  EXPECT_GE(p.service_time(), static_cast<Nanos>(4096 / 1.5e9 * 1e9));
  const auto again = StorageProfile::parse(p.to_config());
  EXPECT_EQ(again.device_count, p.device_count);
  EXPECT_EQ(again.base_latency, p.base_latency);
  EXPECT_EQ(again.tail_latency, p.tail_latency);
  EXPECT_DOUBLE_EQ(again.bandwidth, p.bandwidth);

  for (const char* bad : {"bogus = 1", "device_count = 0", "tail_probability = 1", "bandwidth_mbps = -3",
                          "base_latency_us = abc", "no equals sign"}) {
    try {
      StorageProfile::parse(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::Config) << bad;
    }
  }
}

TEST_F(Fixture, FileBackendReadsExactPages) {
  auto b = open_backend(BackendKind::file, path());
  std::ifstream in(path(), std::ios::binary);
  std::vector<char> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::array<std::byte, kPageSize> page;
  for (NodeId id : {0u, 1u, 250u, 499u}) {
    b->read_page(id, page);
    EXPECT_EQ(std::memcmp(page.data(), file.data() + graph_->header.page_offset(id), kPageSize), 0);
  }
  try {
    b->read_page(500, page);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::OutOfRange);
  }
  b->close();
  EXPECT_THROW(b->read_page(0, page), Error);
}

TEST_F(Fixture, OpenBackendErrors) {
  EXPECT_THROW(open_backend(BackendKind::file, *dir_ / "missing.idx"), Error);
  EXPECT_THROW(open_backend(BackendKind::simulated, path()), Error);
  auto bad = quiet();
  bad.queue_depth = 0;
  EXPECT_THROW(open_backend(BackendKind::simulated, path(), bad), Error);
}

TEST_F(Fixture, SimulatedPagesMatchFile) {
  auto f = open_backend(BackendKind::file, path());
  auto s = open_backend(BackendKind::simulated, path(), quiet());
  auto m = std::make_unique<MemoryBackend>(memory_pages(*graph_));
  std::array<std::byte, kPageSize> a, b, c;
  for (NodeId id = 0; id < 500; id += 37) {
    f->read_page(id, a);
    s->read_page(id, b);
    m->read_page(id, c);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
  }
}

TEST_F(Fixture, TailFreeLatencyMatchesQueueOracle) {
  auto p = quiet();
  p.device_count = 2;
  SimulatedBackend sim(memory_pages(*graph_), p);
  const Nanos svc = p.service_time();
  // Independent FIFO channel model per device; the queue depth is never
  // reached at this load.
  std::map<std::size_t, Nanos> channel;
  std::mt19937 rng(3);
  Nanos t = 0;
  for (int i = 0; i < 2000; ++i) {
    t += static_cast<Nanos>(rng() % 2000);
    const NodeId id = static_cast<NodeId>(rng() % 500);
    const Nanos done = sim.completion_time(id, t);
    const std::size_t dev = sim.device_of(id);
    const Nanos start = std::max(t, channel[dev]);
    channel[dev] = start + svc;
    EXPECT_EQ(done, start + svc + p.base_latency);
    EXPECT_GE(done - t, p.base_latency + svc);
  }
}

TEST_F(Fixture, QueueDepthLimitsAdmission) {
  auto p = quiet();
  p.queue_depth = 2;
  p.bandwidth = 1e12;
  SimulatedBackend sim(memory_pages(*graph_), p);
  const Nanos svc = p.service_time();
  const Nanos d1 = sim.completion_time(1, 0);
  const Nanos d2 = sim.completion_time(2, 0);
  const Nanos d3 = sim.completion_time(3, 0);
  EXPECT_EQ(d1, svc + p.base_latency);
  EXPECT_EQ(d2, 2 * svc + p.base_latency);
  EXPECT_EQ(d3, d1 + svc + p.base_latency);
}

TEST_F(Fixture, DeterministicUnderSeed) {
  StorageProfile p;
  p.tail_probability = 0.1;
  SimulatedBackend a(memory_pages(*graph_), p), b(memory_pages(*graph_), p);
  for (int i = 0; i < 500; ++i) {
    const NodeId id = static_cast<NodeId>((i * 7) % 500);
    EXPECT_EQ(a.completion_time(id, i * 1000), b.completion_time(id, i * 1000));
  }
  a.reset_timeline();
  SimulatedBackend c(memory_pages(*graph_), p);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.completion_time(3, i), c.completion_time(3, i));
}

TEST_F(Fixture, TailCountWithinBinomialInterval) {
  // 200 trials of 64 reads at p = 0.05: the total is Binomial(12800, 0.05).
  std::uint64_t tails = 0;
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    StorageProfile p;
    p.tail_probability = 0.05;
    p.seed = 1000 + trial;
    SimulatedBackend sim(memory_pages(*graph_), p);
    for (NodeId i = 0; i < 64; ++i) {
      const Nanos done = sim.completion_time(i, 0);
      (void)done;
    }
    tails += sim.tail_events();
  }
  const double n = 12800, mean = n * 0.05, sd = std::sqrt(n * 0.05 * 0.95);
  EXPECT_NEAR(static_cast<double>(tails), mean, 2.576 * sd);
  EXPECT_NEAR(static_cast<double>(tails) / 200.0, 3.2, 2.576 * sd / 200.0);
}

TEST_F(Fixture, TailLatencyShape) {
  StorageProfile p;
  p.tail_probability = 0.3;
  p.bandwidth = 1e12;
  SimulatedBackend sim(memory_pages(*graph_), p);
  for (int i = 0; i < 300; ++i) {
    const Nanos t = i * 10'000'000LL;
    const Nanos lat = sim.completion_time(static_cast<NodeId>(i % 500), t) - t;
    const Nanos base = p.base_latency + p.service_time();
    EXPECT_TRUE(lat == base || lat == base + p.tail_latency) << lat;
  }
}

TEST(Saturation, ThroughputApproachesBandwidth) {
  auto pages = std::make_shared<ZeroPages>(100'000);
  auto saturate = [&](std::size_t devices) {
    StorageProfile p;
    p.tail_probability = 0.0;
    p.device_count = devices;
    SimulatedBackend sim(pages, p);
    for (NodeId i = 0; i < 100'000; ++i) {
      const Nanos done = sim.completion_time(i, 0);
      (void)done;
    }
    return aggregate_throughput_report(sim).achieved_bandwidth;
  };
  for (std::size_t d : {1u, 2u, 4u, 8u}) EXPECT_NEAR(saturate(d), d * 3.0e9, 0.1 * d * 3.0e9) << d;
  for (std::size_t d : {1u, 2u, 4u}) {
    const double lo = saturate(d), hi = saturate(2 * d);
    EXPECT_GE(hi, 1.8 * lo) << d;
    EXPECT_LE(hi, 2.0 * lo * 1.001) << d;
  }
}

TEST_F(Fixture, ReportCounters) {
  auto b = open_backend(BackendKind::file, path());
  try {
    aggregate_throughput_report(*b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoTraffic);
  }
  std::array<std::byte, kPageSize> page;
  for (NodeId i = 0; i < 10; ++i) b->read_page(i, page);
  const auto r = aggregate_throughput_report(*b);
  EXPECT_EQ(r.pages_read, 10u);
  EXPECT_EQ(r.bytes_read, 40960u);
}
