#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ssdann/tuner.hpp"
#include "support.hpp"

using namespace ssdann;

namespace {

DegreeProfile prof(std::size_t degree, double tc, double tio, double steps) {
  DegreeProfile p;
  p.degree = degree;
  p.t_compute = tc;
  p.t_io = tio;
  p.est_steps = steps;
  p.ratio = tio / tc;
  return p;
}

struct Sample {
  testutil::Corpus corpus;
  GraphIndex graph;
  SearchIndex index;
  Sample() : corpus(testutil::make_corpus(3000, 120, 16, 31)), graph(build_sample_index(corpus.base, 32)), index(SearchIndex::from(graph)) {}
};

const Sample& sample() {
  static const Sample s;
  return s;
}

SearchParams params() {
  SearchParams p;
  p.L = 32;
  p.k = 10;
  return p;
}

}  // namespace

TEST(DegreeGrid, ClippedByPage) {
  EXPECT_EQ(default_degree_grid(128, 1), (std::vector<std::size_t>{32, 64, 128, 192, 256}));
  EXPECT_EQ(default_degree_grid(960, 4), (std::vector<std::size_t>{32}));
}

TEST(SampleIndex, FillRatiosAndValidity) {
  const auto base = gen_synthetic(3000, 16, ElemType::f32, 4, 8);
  double prev = 0.0;
  for (std::size_t d : {64u, 128u, 250u}) {
    const auto g = build_sample_index(base, d);
    EXPECT_EQ(g.header.degree, d);
    const auto st = graph_stats(g);
    EXPECT_GE(st.min_degree, 1u);
    EXPECT_LE(st.max_degree, d);
    EXPECT_GE(st.reachable, 2970u);
    const double f = fill_ratio(16, 4, d);
    EXPECT_GT(f, prev);
    prev = f;
  }
  try {
    build_sample_index(gen_synthetic(300, 960, ElemType::f32, 1, 2), 64);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PageOverflow);
  }
  const auto a = build_sample_index(testutil::rows(base, 0, 800), 16, 3);
  const auto b = build_sample_index(testutil::rows(base, 0, 800), 16, 3);
  EXPECT_EQ(a.adjacency, b.adjacency);
  EXPECT_EQ(a.book, b.book);
}

TEST(Profile, InMemoryIsComputeBound) {
  const auto& s = sample();
  MemoryBackend mem(memory_pages(s.graph));
  const auto p = profile_degree(s.index, mem, s.corpus.queries, params());
  EXPECT_EQ(p.degree, 32u);
  EXPECT_GT(p.t_compute, 0.0);
  EXPECT_GT(p.est_steps, 1.0);
  EXPECT_LT(p.ratio, 0.01);
  EXPECT_THROW(profile_degree(s.index, mem, testutil::rows(s.corpus.queries, 0, 99), params()), Error);
}

TEST(Profile, CalibratedLatencyGivesAnalyticRatio) {
  const auto& s = sample();
  MemoryBackend mem(memory_pages(s.graph));
  const auto base = profile_degree(s.index, mem, s.corpus.queries, params());
  StorageProfile sp;
  sp.tail_probability = 0.0;
  sp.bandwidth = 1e12;
  sp = balanced_profile(sp, 10.0 * base.t_compute);
  SimulatedBackend sim(memory_pages(s.graph), sp);
  const auto p = profile_degree(s.index, sim, s.corpus.queries, params());
  EXPECT_GE(p.ratio, 8.0);
  EXPECT_LE(p.ratio, 12.0);
  EXPECT_NEAR(p.t_compute, base.t_compute, 1e-9);
  EXPECT_DOUBLE_EQ(p.est_steps, base.est_steps);
}

TEST(Profile, MoreDevicesHalveSaturatedIo) {
  const auto& s = sample();
  auto run = [&](std::size_t devices) {
    StorageProfile sp;
    sp.tail_probability = 0.0;
    sp.device_count = devices;
    sp.base_latency = 5'000;
    sp.bandwidth = 4096.0 / 20e-6;  // 20 us per page: the channel saturates
    SimulatedBackend sim(memory_pages(s.graph), sp);
    ProfileOptions o;
    o.batch.workers = 64;
    return profile_degree(s.index, sim, s.corpus.queries, params(), o).t_io;
  };
  const double one = run(1), two = run(2);
  EXPECT_NEAR(two / one, 0.5, 0.125);
}

TEST(SelectDegree, Examples) {
  const std::vector<DegreeProfile> io_vs_balanced{prof(150, 1000, 4200, 60), prof(250, 1000, 1100, 58)};
  EXPECT_EQ(select_degree(io_vs_balanced).selected_degree, 250u);
  const std::vector<DegreeProfile> same{prof(128, 500, 900, 40), prof(64, 500, 900, 40)};
  EXPECT_EQ(select_degree(same).selected_degree, 64u);
  const std::vector<DegreeProfile> one{prof(64, 1, 1, 1)};
  EXPECT_THROW(select_degree(one), Error);
  const std::vector<DegreeProfile> bad{prof(64, 1, 1, 1), prof(32, 0, 1, 1)};
  EXPECT_THROW(select_degree(bad), Error);
  const auto r = select_degree(io_vs_balanced);
  ASSERT_EQ(r.objective.size(), 2u);
  EXPECT_DOUBLE_EQ(r.objective[0], 60 * 4200.0);
  EXPECT_DOUBLE_EQ(r.objective[1], 58 * 1100.0);
}

namespace {

// Profiles shaped like a real degree sweep: steps fall, compute rises, the
// page read costs the same at every degree.
std::vector<DegreeProfile> random_sweep(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DegreeProfile> out;
  double steps = 200 + 200 * u(rng), tc = 200 + 300 * u(rng);
  const double tio = 500 + 3000 * u(rng);
  for (std::size_t d : {32u, 64u, 128u, 192u, 256u}) {
    out.push_back(prof(d, tc, tio * (0.95 + 0.1 * u(rng)), steps));
    steps *= 0.6 + 0.35 * u(rng);
    tc *= 1.3 + 0.7 * u(rng);
  }
  return out;
}

}  // namespace

TEST(SelectDegree, InvariantUnderUniformRescaling) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto ps = random_sweep(rng);
    const auto sel = select_degree(ps).selected_degree;
    for (auto& p : ps) {
      p.t_compute *= 3.7;
      p.t_io *= 3.7;
    }
    EXPECT_EQ(select_degree(ps).selected_degree, sel);
  }
}

TEST(SelectDegree, MoreIoPressureNeverLowersDegree) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    auto ps = random_sweep(rng);
    std::size_t prev = select_degree(ps).selected_degree;
    for (double c : {1.5, 2.0, 4.0, 8.0}) {
      auto scaled = ps;
      for (auto& p : scaled) p.t_io *= c;
      const auto sel = select_degree(scaled).selected_degree;
      EXPECT_GE(sel, prev) << "c=" << c;
      prev = sel;
    }
  }
}

TEST(TunerIo, CsvAndDegreeFile) {
  testutil::TempDir dir;
  const std::vector<DegreeProfile> ps{prof(64, 1000, 4200, 60), prof(128, 1000, 1100, 58)};
  const auto r = select_degree(ps);
  std::ostringstream ss;
  write_tuner_csv(r, ss);
  std::istringstream in(ss.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "degree,t_compute_ns,t_io_ns,ratio,est_steps,objective_ns,selected");
  int rows = 0, selected = 0;
  while (std::getline(in, line)) {
    ++rows;
    selected += line.back() == '1';
  }
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(selected, 1);
  write_selected_degree(r, dir / "deg.txt");
  EXPECT_EQ(read_selected_degree(dir / "deg.txt"), 128u);
  EXPECT_THROW(read_selected_degree(dir / "missing.txt"), Error);
}

TEST(BalancedProfile, HitsTarget) {
  StorageProfile p;
  p.tail_probability = 0.01;
  const auto b = balanced_profile(p, 50'000);
  const double mean = b.base_latency + b.service_time() + b.tail_probability * b.tail_latency;
  EXPECT_NEAR(mean, 50'000, 1.0);
  EXPECT_THROW(balanced_profile(p, 5'000), Error);
}
