#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "ssdann/bench.hpp"
#include "ssdann/dataset.hpp"
#include "ssdann/index.hpp"
#include "ssdann/quantize.hpp"
#include "ssdann/search.hpp"
#include "ssdann/storage.hpp"
#include "ssdann/tuner.hpp"

namespace fs = std::filesystem;
using namespace ssdann;

namespace {

struct GenArgs {
  std::size_t count = 10'000;
  std::size_t dim = 64;
  std::string elem = "f32";
  std::uint64_t seed = 1;
  std::size_t clusters = 16;
  double spread = 0.1;
  std::size_t latent_dim = 8;
  std::size_t queries = 0;
  fs::path out;
  fs::path queries_out;
};

struct GtArgs {
  fs::path base, queries, ids_out, dists_out;
  std::size_t k = 10;
};

struct BuildArgs {
  fs::path base, out, degree_file;
  std::size_t degree = 32;
  std::size_t build_list = 0;
  float alpha = 1.2f;
  std::uint64_t seed = 1;
  std::size_t pq_m = 0;
  std::size_t pq_iters = 10;
};

struct TuneArgs {
  fs::path base, queries, storage, csv_out, degree_out;
  std::vector<std::size_t> degrees;
  std::size_t sample = 10'000;
  std::size_t sample_queries = 100;
  std::size_t L = 64;
  std::size_t workers = 1;
  std::string backend = "simulated";
  std::uint64_t seed = 1;
};

struct SearchArgs {
  fs::path index, queries, storage, ids_out, dists_out, trace, gt;
  std::string backend = "file";
  std::string engine = "relaxed";
  std::string io_mode = "worker_level";
  std::size_t L = 64;
  std::size_t k = 10;
  std::size_t workers = 1;
};

VectorDataset rows(const VectorDataset& ds, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return ds.subset(idx);
}

VectorDataset load_any(const fs::path& p) { return load_vectors(p, format_from_path(p)); }

void require(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(Errc::Config, fmt::format("{} path is required", what));
  if (!fs::exists(p)) throw Error(Errc::Io, fmt::format("{} '{}' does not exist", what, p.string()));
}

void cmd_gen(const GenArgs& a) {
  const ElemType elem = parse_elem(a.elem);
  const VectorDataset all = gen_synthetic(a.count + a.queries, a.dim, elem, a.seed, a.clusters, a.spread, a.latent_dim);
  write_vectors(rows(all, 0, a.count), a.out, format_from_path(a.out));
  if (a.queries > 0) {
    if (a.queries_out.empty()) throw Error(Errc::Config, "--queries-out is required with --queries");
    write_vectors(rows(all, a.count, a.count + a.queries), a.queries_out, format_from_path(a.queries_out));
  }
}

void cmd_gt(const GtArgs& a) {
  require(a.base, "base");
  require(a.queries, "queries");
  const GroundTruth gt = brute_force_knn(load_any(a.base), load_any(a.queries), a.k);
  write_ground_truth(gt, a.ids_out, a.dists_out);
}

void cmd_build(const BuildArgs& a) {
  require(a.base, "base");
  const VectorDataset base = load_any(a.base);
  const std::size_t degree = a.degree_file.empty() ? a.degree : read_selected_degree(a.degree_file);
  BuildParams bp = BuildParams::with_degree(degree, a.seed);
  if (a.build_list) bp.build_list = a.build_list;
  bp.alpha = a.alpha;
  bp.validate();
  const std::size_t cap = max_degree_for_page(base.dim(), elem_size(base.elem()));
  if (degree > cap) throw Error(Errc::PageOverflow, fmt::format("degree {} exceeds the page capacity of {}", degree, cap));
  PqTrainOptions topts;
  topts.iters = a.pq_iters;
  topts.seed = a.seed;
  const PqCodebook book = pq_train(base, a.pq_m ? a.pq_m : default_pq_m(base.dim()), topts);
  const PqCodes codes = pq_encode(base, book);
  const GraphIndex idx = build_index(base, book, codes, bp);
  write_index(idx, a.out);
  const GraphStats st = graph_stats(idx);
  fmt::print("built {} nodes, degree {} (mean {:.1f}, max {}), entry {}, fill ratio {:.4f}\n", idx.count(), degree,
             st.mean_degree, st.max_degree, idx.header.entry_point,
             fill_ratio(base.dim(), elem_size(base.elem()), degree));
}

void cmd_tune(const TuneArgs& a) {
  require(a.base, "base");
  require(a.queries, "queries");
  const VectorDataset base = load_any(a.base);
  VectorDataset queries = load_any(a.queries);
  if (queries.count() > a.sample_queries) queries = rows(queries, 0, a.sample_queries);
  VectorDataset sample = base;
  if (base.count() > a.sample) {
    std::vector<std::size_t> idx(base.count());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<std::size_t> picked;
    std::mt19937_64 rng(a.seed);
    std::sample(idx.begin(), idx.end(), std::back_inserter(picked), a.sample, rng);
    sample = base.subset(picked);
  }
  const BackendKind kind = parse_backend_kind(a.backend);
  if (kind == BackendKind::file) throw Error(Errc::Config, "tune profiles sample indices in memory; use simulated or memory");
  const StorageProfile profile = a.storage.empty() ? StorageProfile{} : StorageProfile::load(a.storage);
  const auto grid = a.degrees.empty() ? default_degree_grid(base.dim(), elem_size(base.elem())) : a.degrees;

  std::vector<DegreeProfile> profiles;
  for (std::size_t d : grid) {
    const GraphIndex g = build_sample_index(sample, d, a.seed);
    const SearchIndex si = SearchIndex::from(g);
    std::unique_ptr<StorageBackend> backend;
    if (kind == BackendKind::memory) {
      backend = std::make_unique<MemoryBackend>(memory_pages(g));
    } else {
      backend = std::make_unique<SimulatedBackend>(memory_pages(g), profile);
    }
    SearchParams p;
    p.L = a.L;
    ProfileOptions po;
    po.batch.workers = a.workers;
    po.min_queries = std::min<std::size_t>(100, a.sample_queries);
    profiles.push_back(profile_degree(si, *backend, queries, p, po));
    const auto& last = profiles.back();
    fmt::print(stderr, "degree {}: t_compute {:.0f} ns, t_io {:.0f} ns, steps {:.1f}\n", d, last.t_compute,
               last.t_io, last.est_steps);
  }
  const TunerReport report = select_degree(profiles);
  if (a.csv_out.empty()) {
    write_tuner_csv(report, std::cout);
  } else {
    std::ofstream f(a.csv_out);
    if (!f) throw Error(Errc::Io, fmt::format("cannot write {}", a.csv_out.string()));
    write_tuner_csv(report, f);
  }
  if (!a.degree_out.empty()) write_selected_degree(report, a.degree_out);
  fmt::print(stderr, "selected degree {}\n", report.selected_degree);
}

void cmd_search(const SearchArgs& a) {
  require(a.index, "index");
  require(a.queries, "queries");
  const SearchIndex index = SearchIndex::load(a.index);
  const VectorDataset queries = load_any(a.queries);
  const BackendKind kind = parse_backend_kind(a.backend);
  std::optional<StorageProfile> profile;
  if (kind == BackendKind::simulated) profile = a.storage.empty() ? StorageProfile{} : StorageProfile::load(a.storage);
  auto backend = open_backend(kind, a.index, profile);
  SearchParams p;
  p.L = a.L;
  p.k = a.k;
  p.engine = parse_engine(a.engine);
  BatchOptions bo;
  bo.workers = a.workers;
  bo.io_mode = parse_io_mode(a.io_mode);
  std::optional<GroundTruth> gt;
  if (!a.gt.empty()) {
    require(a.gt, "ground truth");
    GroundTruth g;
    const auto ids = load_ivecs(a.gt);
    g.query_count = ids.size();
    g.k = ids.empty() ? 0 : ids.front().size();
    for (const auto& row : ids) {
      if (row.size() != g.k) throw Error(Errc::InconsistentDim, "ragged ground truth");
      for (auto v : row) g.ids.push_back(static_cast<NodeId>(v));
    }
    if (g.query_count != queries.count()) throw Error(Errc::DimMismatch, "ground truth rows differ from query count");
    gt = std::move(g);
  }
  const BatchResult r = run_query_batch(queries, index, *backend, p, bo, gt ? &*gt : nullptr);
  std::size_t failed = 0;
  for (const auto& q : r.results) failed += q.error.has_value();
  if (!a.ids_out.empty()) {
    GroundTruth out;
    out.query_count = queries.count();
    out.k = p.k;
    for (const auto& q : r.results) {
      out.ids.insert(out.ids.end(), q.ids.begin(), q.ids.end());
      out.distances.insert(out.distances.end(), q.distances.begin(), q.distances.end());
      if (q.ids.size() < p.k) {
        out.ids.resize(out.ids.size() + p.k - q.ids.size(), kInvalidNode);
        out.distances.resize(out.distances.size() + p.k - q.distances.size(), 0.0f);
      }
    }
    write_ground_truth(out, a.ids_out, a.dists_out.empty() ? fs::path(a.ids_out).replace_extension(".fvecs") : a.dists_out);
  }
  if (!a.trace.empty()) {
    std::ofstream f(a.trace);
    if (!f) throw Error(Errc::Io, fmt::format("cannot write {}", a.trace.string()));
    write_trace_csv(r.traces, f);
  }
  const StepTimes st = step_times(r.traces);
  fmt::print("queries {} failed {} qps {:.1f} mean_steps {:.2f} overlap {:.4f}", queries.count(), failed, r.qps,
             st.mean_steps, overlap_report(r.traces).overlap_ratio);
  if (r.recall) fmt::print(" recall@{} {:.4f}", p.k, *r.recall);
  fmt::print("\n");
  if (failed) throw Error(Errc::Io, fmt::format("{} queries failed", failed));
}

void emit(const fs::path& out, auto&& writer) {
  if (out.empty()) {
    writer(std::cout);
    return;
  }
  std::ofstream f(out);
  if (!f) throw Error(Errc::Io, fmt::format("cannot write {}", out.string()));
  writer(f);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Storage-resident graph ANN search: data generation, index build, tuning and benchmarks.\n"
               "Exit codes: 0 ok, 1 runtime error, 2 configuration error, 3 data error."};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic blob dataset");
  g->add_option("--count", gen.count, "Number of base vectors")->capture_default_str();
  g->add_option("--dim", gen.dim, "Dimension")->capture_default_str();
  g->add_option("--elem", gen.elem, "Element type: u8, i8 or f32")->capture_default_str();
  g->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  g->add_option("--clusters", gen.clusters, "Number of blobs")->capture_default_str();
  g->add_option("--spread", gen.spread, "Per-coordinate std dev as a fraction of the value range")->capture_default_str();
  g->add_option("--latent-dim", gen.latent_dim, "Intrinsic dimension of each blob (0 = isotropic)")->capture_default_str();
  g->add_option("--queries", gen.queries, "Extra vectors drawn from the same blobs as queries")->capture_default_str();
  g->add_option("--out", gen.out, "Base output (.fvecs or .bvecs)")->required();
  g->add_option("--queries-out", gen.queries_out, "Query output (.fvecs or .bvecs)");

  GtArgs gt;
  auto* t = app.add_subcommand("gt", "Compute exact ground truth by brute force");
  t->add_option("--base", gt.base, "Base vectors")->required();
  t->add_option("--queries", gt.queries, "Query vectors")->required();
  t->add_option("--k", gt.k, "Neighbors per query")->capture_default_str();
  t->add_option("--ids-out", gt.ids_out, "Neighbor ids (.ivecs)")->required();
  t->add_option("--dists-out", gt.dists_out, "Squared distances (.fvecs)")->required();

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Train PQ and build a graph index file");
  b->add_option("--base", build.base, "Base vectors")->required();
  b->add_option("--out", build.out, "Index file")->required();
  b->add_option("--degree", build.degree, "Graph degree R")->capture_default_str();
  b->add_option("--degree-file", build.degree_file, "Read R from a file written by tune");
  b->add_option("--build-list", build.build_list, "Build candidate list length (default max(2R, 64))");
  b->add_option("--alpha", build.alpha, "Pruning slack")->capture_default_str();
  b->add_option("--seed", build.seed, "RNG seed")->capture_default_str();
  b->add_option("--pq-m", build.pq_m, "PQ subspaces (default: dim/4, dim/8 or dim/16)");
  b->add_option("--pq-iters", build.pq_iters, "k-means iterations")->capture_default_str();

  TuneArgs tune;
  auto* u = app.add_subcommand("tune", "Select the graph degree from sample-index profiles");
  u->add_option("--base", tune.base, "Base vectors")->required();
  u->add_option("--queries", tune.queries, "Profiling queries")->required();
  u->add_option("--storage", tune.storage, "Storage profile (key=value)");
  u->add_option("--backend", tune.backend, "simulated or memory")->capture_default_str();
  u->add_option("--degrees", tune.degrees, "Candidate degrees (default 32,64,128,192,256 within page capacity)")
      ->delimiter(',');
  u->add_option("--sample", tune.sample, "Base sample size")->capture_default_str();
  u->add_option("--sample-queries", tune.sample_queries, "Profiling queries used (at least 100)")->capture_default_str();
  u->add_option("--L", tune.L, "Search list length")->capture_default_str();
  u->add_option("--workers", tune.workers, "Concurrent workers during profiling")->capture_default_str();
  u->add_option("--seed", tune.seed, "RNG seed")->capture_default_str();
  u->add_option("--csv-out", tune.csv_out, "Report CSV (stdout when omitted)");
  u->add_option("--degree-out", tune.degree_out, "One-line selected degree file");

  SearchArgs search;
  auto* s = app.add_subcommand("search", "Run a query batch against an index file");
  s->add_option("--index", search.index, "Index file")->required();
  s->add_option("--queries", search.queries, "Query vectors")->required();
  s->add_option("--backend", search.backend, "file, simulated or memory")->capture_default_str();
  s->add_option("--storage", search.storage, "Storage profile for the simulated backend");
  s->add_option("--engine", search.engine, "strict or relaxed")->capture_default_str();
  s->add_option("--io-mode", search.io_mode, "worker_level or batch_barrier")->capture_default_str();
  s->add_option("--L", search.L, "Candidate list length")->capture_default_str();
  s->add_option("--k", search.k, "Results per query")->capture_default_str();
  s->add_option("--workers", search.workers, "Concurrent workers")->capture_default_str();
  s->add_option("--gt", search.gt, "Ground-truth ids (.ivecs) for recall");
  s->add_option("--ids-out", search.ids_out, "Result ids (.ivecs)");
  s->add_option("--dists-out", search.dists_out, "Result distances (.fvecs)");
  s->add_option("--trace", search.trace, "Per-step trace CSV");

  fs::path sweep_cfg, compare_cfg;
  auto* w = app.add_subcommand("sweep", "Recall/QPS sweep over L; CSV per the config's output key");
  w->add_option("config", sweep_cfg, "key=value config file")->required();
  auto* c = app.add_subcommand("compare-io", "Worker-level vs batch-barrier completion");
  c->add_option("config", compare_cfg, "key=value config file")->required();
  const char* bench_keys =
      "\nConfig keys ('#' starts a comment):\n"
      "  index, queries        required paths\n"
      "  gt                    ground-truth ids (.ivecs); required by sweep\n"
      "  storage               storage profile file (defaults when omitted)\n"
      "  output, trace         CSV outputs (output defaults to stdout)\n"
      "  backend               simulated (default), memory or file\n"
      "  engine                relaxed (default) or strict\n"
      "  L                     comma-separated ascending list (default 64)\n"
      "  k                     results per query (default 10)\n"
      "  workers               worker count (default 1)\n"
      "  worker_counts         compare-io worker counts (default: workers)\n"
      "  io_mode               worker_level (default) or batch_barrier\n"
      "  seed, max_steps       defaults 1 and 100000\n"
      "  query_limit           use only the first N queries (0 = all)\n"
      "  cost_scale            multiplier on the modeled compute costs (default 1)\n"
      "  calibrate_cost        fit the compute cost model on this machine (default false)\n"
      "  dispatch_delay_us     submit-to-storage delay on the simulated clock (default 0)\n"
      "\nStorage profile keys: device_count, queue_depth, base_latency_us, tail_probability,\n"
      "  tail_latency_us, bandwidth_mbps, seed\n";
  w->footer(bench_keys);
  c->footer(bench_keys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    if (*g) cmd_gen(gen);
    else if (*t) cmd_gt(gt);
    else if (*b) cmd_build(build);
    else if (*u) cmd_tune(tune);
    else if (*s) cmd_search(search);
    else if (*w) {
      const BenchConfig cfg = BenchConfig::load(sweep_cfg);
      const auto rows = run_sweep(cfg);
      emit(cfg.output, [&](std::ostream& o) { write_sweep_csv(rows, o); });
    } else if (*c) {
      const BenchConfig cfg = BenchConfig::load(compare_cfg);
      const auto rows = run_compare_io(cfg);
      emit(cfg.output, [&](std::ostream& o) { write_compare_csv(rows, o); });
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(exit_code_for(e.code()));
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return static_cast<int>(ExitCode::runtime);
  }
  return 0;
}
