#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ssdann/dataset.hpp"
#include "ssdann/index.hpp"
#include "ssdann/minmax_heap.hpp"
#include "ssdann/quantize.hpp"
#include "ssdann/search.hpp"
#include "ssdann/storage.hpp"

using namespace ssdann;

namespace {

struct Fixture {
  VectorDataset base;
  VectorDataset queries;
  GraphIndex graph;
  SearchIndex index;
  std::shared_ptr<PageStore> pages;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    const VectorDataset all = gen_synthetic(10'100, 64, ElemType::f32, 7, 16);
    std::vector<std::size_t> b(10'000), q(100);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = i;
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = 10'000 + i;
    out.base = all.subset(b);
    out.queries = all.subset(q);
    const PqCodebook book = pq_train(out.base, default_pq_m(64));
    const PqCodes codes = pq_encode(out.base, book);
    out.graph = build_index(out.base, book, codes, BuildParams::with_degree(32));
    out.index = SearchIndex::from(out.graph);
    out.pages = memory_pages(out.graph);
    return out;
  }();
  return f;
}

void BM_HeapPushPop(benchmark::State& state) {
  const auto cap = static_cast<std::size_t>(state.range(0));
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> xs(4096);
  for (float& x : xs) x = u(rng);
  BoundedMinMaxHeap<float> heap(cap);
  std::size_t i = 0;
  for (auto _ : state) {
    heap.push(xs[i++ & 4095]);
    if ((i & 3) == 0) benchmark::DoNotOptimize(heap.pop_min());
  }
}
BENCHMARK(BM_HeapPushPop)->Arg(64)->Arg(256);

void BM_L2(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const VectorDataset ds = gen_synthetic(2, dim, ElemType::f32, 3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(l2_sq(ElemType::f32, ds.row_bytes(0).data(), ds.row_bytes(1).data(), dim));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_L2)->Arg(64)->Arg(128)->Arg(960);

void BM_Adc(benchmark::State& state) {
  const auto& f = fixture();
  const auto q = f.queries.row<float>(0);
  const AdcTable table = adc_table(q, f.index.book);
  const std::size_t m = f.graph.codes.m;
  std::size_t i = 0;
  for (auto _ : state) {
    const std::span<const std::uint8_t> code(f.graph.codes.codes.data() + (i++ % f.base.count()) * m, m);
    benchmark::DoNotOptimize(adc_distance(code, table));
  }
}
BENCHMARK(BM_Adc);

void BM_Search(benchmark::State& state) {
  const auto& f = fixture();
  const auto engine = state.range(0) == 0 ? Engine::strict : Engine::relaxed;
  MemoryBackend mem(f.pages);
  SearchParams p;
  p.engine = engine;
  std::size_t q = 0, steps = 0;
  for (auto _ : state) {
    const auto out = engine == Engine::strict
                         ? search_strict(f.queries.row_bytes(q % f.queries.count()), f.index, mem, p)
                         : search_relaxed(f.queries.row_bytes(q % f.queries.count()), f.index, mem, p);
    steps += out.trace.step_count();
    ++q;
  }
  state.counters["steps/query"] = benchmark::Counter(static_cast<double>(steps) / static_cast<double>(q));
  state.SetItemsProcessed(static_cast<std::int64_t>(steps));
}
BENCHMARK(BM_Search)->Arg(0)->Arg(1)->ArgName("relaxed");

}  // namespace
BENCHMARK_MAIN();
