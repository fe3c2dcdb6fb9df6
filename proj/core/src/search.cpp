#include "ssdann/search.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <ostream>
#include <random>
#include <thread>
#include <unordered_set>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "replay.hpp"
#include "ssdann/minmax_heap.hpp"

namespace ssdann {

std::string_view engine_name(Engine e) { return e == Engine::strict ? "strict" : "relaxed"; }

Engine parse_engine(std::string_view name) {
  if (name == "strict") return Engine::strict;
  if (name == "relaxed") return Engine::relaxed;
  throw Error(Errc::Config, fmt::format("unknown engine '{}'", name));
}

void SearchParams::validate() const {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be at least 1");
  if (k > L) throw Error(Errc::InvalidArgument, fmt::format("k={} exceeds L={}", k, L));
  if (max_steps == 0) throw Error(Errc::InvalidArgument, "max_steps must be at least 1");
}

Nanos CostModel::select_cost() const { return std::max<Nanos>(1, std::llround(select_ns)); }

Nanos CostModel::process_cost(std::size_t dim, std::size_t pq_m, std::size_t neighbors, std::size_t scored) const {
  const double ns = step_fixed_ns + exact_ns_per_dim * static_cast<double>(dim) +
                    neighbor_check_ns * static_cast<double>(neighbors) +
                    (pq_ns_per_subspace * static_cast<double>(pq_m) + heap_push_ns) * static_cast<double>(scored);
  return std::max<Nanos>(1, std::llround(ns));
}

CostModel CostModel::scaled(double f) const {
  CostModel c = *this;
  c.select_ns *= f;
  c.step_fixed_ns *= f;
  c.exact_ns_per_dim *= f;
  c.neighbor_check_ns *= f;
  c.pq_ns_per_subspace *= f;
  c.heap_push_ns *= f;
  return c;
}

// ---------------------------------------------------------------------------
// Engines
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  float pq;
  NodeId id;
  std::uint32_t source;
};

struct CandidateLess {
  bool operator()(const Candidate& a, const Candidate& b) const {
    return a.pq < b.pq || (a.pq == b.pq && a.id < b.id);
  }
};

using Hit = std::pair<float, NodeId>;

std::vector<float> query_floats(std::span<const std::byte> q, ElemType elem, std::size_t dim) {
  std::vector<float> out(dim);
  switch (elem) {
    case ElemType::u8:
      for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(std::to_integer<std::uint8_t>(q[i]));
      break;
    case ElemType::i8:
      for (std::size_t i = 0; i < dim; ++i)
        out[i] = static_cast<float>(static_cast<std::int8_t>(std::to_integer<std::uint8_t>(q[i])));
      break;
    case ElemType::f32:
      std::memcpy(out.data(), q.data(), dim * sizeof(float));
      break;
  }
  return out;
}

class SearchState {
 public:
  SearchState(std::span<const std::byte> query, const SearchIndex& index, const SearchParams& params)
      : query_(query),
        index_(index),
        params_(params),
        adc_(adc_table(query_floats(query, index.header.elem, index.dim()), index.book)),
        heap_(params.L) {
    visited_.reserve(std::max<std::size_t>(1024, params.L * index.header.degree));
    results_.reserve(params.k + 1);
  }

  void seed(NodeId entry) {
    visited_.insert(entry);
    admit({adc_.distance(index_.codes.code(entry)), entry, 0});
  }

  // Converged once every entry of the L-list has been expanded.
  bool converged() const { return heap_.empty(); }

  Candidate pop() {
    const Candidate c = heap_.pop_min();
    expanded_.push_back(c);
    std::push_heap(expanded_.begin(), expanded_.end(), CandidateLess{});
    return c;
  }

  // Scores one fetched page; returns (neighbors, newly scored).
  std::pair<std::uint32_t, std::uint32_t> process(NodeId id, std::span<const std::byte> page, std::uint32_t step) {
    const NodeView view = decode_page(page, index_.header);
    const float exact = l2_sq(index_.header.elem, view.vector.data(), query_.data(), index_.dim());
    offer({exact, id});
    std::uint32_t scored = 0;
    for (const NodeId n : view.neighbors) {
      if (n >= index_.count()) continue;
      if (!visited_.insert(n).second) continue;
      admit({adc_.distance(index_.codes.code(n)), n, step});
      ++scored;
    }
    return {static_cast<std::uint32_t>(view.neighbors.size()), scored};
  }

  QueryResult result() const {
    std::vector<Hit> sorted = results_;
    std::sort(sorted.begin(), sorted.end());
    QueryResult r;
    r.ids.assign(params_.k, kInvalidNode);
    r.distances.assign(params_.k, std::numeric_limits<float>::infinity());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      r.distances[i] = sorted[i].first;
      r.ids[i] = sorted[i].second;
    }
    return r;
  }

 private:
  // The L-list spans unexpanded entries (heap_) and expanded ones still
  // ranked in the top L (expanded_); a newcomer displaces the worst of both.
  void admit(const Candidate& c) {
    const CandidateLess less;
    if (heap_.size() + expanded_.size() < params_.L) {
      heap_.push(c);
      return;
    }
    const bool worst_expanded = !expanded_.empty() && (heap_.empty() || less(heap_.max(), expanded_.front()));
    const Candidate& worst = worst_expanded ? expanded_.front() : heap_.max();
    if (!less(c, worst)) return;
    if (worst_expanded) {
      std::pop_heap(expanded_.begin(), expanded_.end(), less);
      expanded_.pop_back();
    } else {
      heap_.pop_max();
    }
    heap_.push(c);
  }

  void offer(Hit h) {
    if (results_.size() < params_.k) {
      results_.push_back(h);
      std::push_heap(results_.begin(), results_.end());
    } else if (h < results_.front()) {
      std::pop_heap(results_.begin(), results_.end());
      results_.back() = h;
      std::push_heap(results_.begin(), results_.end());
    }
  }

  std::span<const std::byte> query_;
  const SearchIndex& index_;
  const SearchParams& params_;
  AdcTable adc_;
  BoundedMinMaxHeap<Candidate, CandidateLess> heap_;
  std::vector<Candidate> expanded_;  // max-heap on (pq, id)
  std::vector<Hit> results_;  // max-heap on (distance, id)
  std::unordered_set<NodeId> visited_;
};

StepRecord& open_step(StepTrace& trace, std::uint32_t step, const Candidate& c, bool pipelined) {
  StepRecord rec;
  rec.step = step;
  rec.expanded_id = c.id;
  rec.source_epoch = c.source;
  rec.pipelined = pipelined;
  trace.steps.push_back(rec);
  return trace.steps.back();
}

QueryResult run_strict(SearchState& st, const SearchIndex& index, PageIo& io, const SearchParams& params,
                       const CostModel& cost, StepTrace& trace) {
  std::uint32_t step = 0;
  while (!st.converged()) {
    if (step >= params.max_steps) {
      trace.max_steps_hit = true;
      break;
    }
    ++step;
    io.compute_begin(step);
    const Candidate c = st.pop();
    open_step(trace, step, c, false);
    io.compute_end(step, cost.select_cost());
    io.submit(step, c.id, BufferSlot::A);
    const auto page = io.await_page(step);
    io.compute_begin(step);
    const auto [nb, scored] = st.process(c.id, page, step);
    StepRecord& rec = trace.steps[step - 1];
    rec.neighbors = nb;
    rec.scored = scored;
    io.compute_end(step, cost.process_cost(index.dim(), index.book.m, nb, scored));
  }
  return st.result();
}

// One page is in flight at a time. After the page of step i lands, the
// next node is chosen from the heap as it stood before that page is scored
// (so it was discovered by step i-1 or earlier), its read goes into the
// other buffer, and only then is page i processed.
QueryResult run_relaxed(SearchState& st, const SearchIndex& index, PageIo& io, const SearchParams& params,
                        const CostModel& cost, StepTrace& trace) {
  struct Pending {
    std::uint32_t step = 0;
    NodeId node = kInvalidNode;
    BufferSlot buffer = BufferSlot::A;
  };
  std::uint32_t step = 0;
  std::optional<Pending> pending;

  auto launch = [&](bool pipelined, BufferSlot buffer) {
    ++step;
    io.compute_begin(step);
    const Candidate c = st.pop();
    open_step(trace, step, c, pipelined);
    io.compute_end(step, cost.select_cost());
    io.submit(step, c.id, buffer);
    pending = Pending{step, c.id, buffer};
  };

  if (!st.converged()) launch(false, BufferSlot::A);
  while (pending) {
    const Pending cur = *pending;
    pending.reset();
    const auto page = io.await_page(cur.step);
    if (!st.converged()) {
      if (step < params.max_steps) {
        launch(true, other(cur.buffer));
      } else {
        trace.max_steps_hit = true;
      }
    }
    io.compute_begin(cur.step);
    const auto [nb, scored] = st.process(cur.node, page, cur.step);
    StepRecord& rec = trace.steps[cur.step - 1];
    rec.neighbors = nb;
    rec.scored = scored;
    io.compute_end(cur.step, cost.process_cost(index.dim(), index.book.m, nb, scored));
    if (!pending && !st.converged()) {
      if (step < params.max_steps) {
        launch(false, other(cur.buffer));
      } else {
        trace.max_steps_hit = true;
      }
    }
  }
  return st.result();
}

}  // namespace

QueryResult run_engine(Engine engine, std::span<const std::byte> query, const SearchIndex& index, PageIo& io,
                       const SearchParams& params, const CostModel& cost, StepTrace& trace) {
  params.validate();
  if (query.size() != index.vector_bytes()) {
    throw Error(Errc::DimMismatch,
                fmt::format("query has {} bytes, index vectors have {}", query.size(), index.vector_bytes()));
  }
  if (index.count() == 0) throw Error(Errc::InvalidArgument, "index is empty");
  trace.engine = engine;
  trace.steps.clear();
  trace.compute_spans.clear();
  trace.max_steps_hit = false;
  SearchState st(query, index, params);
  st.seed(index.header.entry_point);
  return engine == Engine::strict ? run_strict(st, index, io, params, cost, trace)
                                  : run_relaxed(st, index, io, params, cost, trace);
}

// ---------------------------------------------------------------------------
// Page sources
// ---------------------------------------------------------------------------

namespace {

// Reads pages synchronously from the backend. With a script it records the
// op sequence for a simulated-clock replay (and peeks, so traffic is only
// counted once, by the replay); otherwise it reads and records real time.
class DirectIo final : public PageIo {
 public:
  DirectIo(StorageBackend& backend, StepTrace& trace, detail::OpScript* script)
      : backend_(backend), trace_(trace), script_(script), origin_(steady_now()) {}

  void submit(std::uint32_t step, NodeId node, BufferSlot buffer) override {
    node_ = node;
    buffer_ = buffer;
    if (script_) {
      script_->push_back({detail::IoOp::Kind::submit, buffer, step, node, 0});
    } else {
      trace_.steps[step - 1].io_issue = steady_now() - origin_;
    }
  }

  std::span<const std::byte> await_page(std::uint32_t step) override {
    PageSpan out(pages_[static_cast<std::size_t>(buffer_)].data(), kPageSize);
    if (script_) {
      script_->push_back({detail::IoOp::Kind::wait, buffer_, step, node_, 0});
      backend_.peek_page(node_, out);
    } else {
      const Nanos t0 = steady_now();
      backend_.read_page(node_, out);
      StepRecord& rec = trace_.steps[step - 1];
      rec.io_complete = steady_now() - origin_;
      rec.io_wait = rec.io_complete - (t0 - origin_);
    }
    return out;
  }

  void compute_begin(std::uint32_t) override {
    if (!script_) c0_ = steady_now();
  }

  void compute_end(std::uint32_t step, Nanos modeled) override {
    if (script_) {
      script_->push_back({detail::IoOp::Kind::compute, buffer_, step, kInvalidNode, modeled});
      return;
    }
    const Nanos t1 = steady_now();
    trace_.steps[step - 1].compute += t1 - c0_;
    trace_.compute_spans.push_back({c0_ - origin_, t1 - origin_});
  }

  Nanos elapsed() const { return steady_now() - origin_; }

 private:
  StorageBackend& backend_;
  StepTrace& trace_;
  detail::OpScript* script_;
  Nanos origin_;
  Nanos c0_ = 0;
  NodeId node_ = kInvalidNode;
  BufferSlot buffer_ = BufferSlot::A;
  std::array<std::array<std::byte, kPageSize>, 2> pages_{};
};

// Worker context over the shared I/O stack; all timings are real.
class StackIo final : public PageIo {
 public:
  StackIo(IoStack& io, std::size_t worker, IoMode mode, Nanos origin)
      : io_(io), worker_(worker), mode_(mode), origin_(origin) {}

  void bind(StepTrace& trace) { trace_ = &trace; }

  void submit(std::uint32_t step, NodeId node, BufferSlot buffer) override {
    trace_->steps[step - 1].io_issue = steady_now() - origin_;
    epoch_ = io_.submit(worker_, node, buffer);
  }

  std::span<const std::byte> await_page(std::uint32_t step) override {
    const Nanos t0 = steady_now();
    const auto page = io_.await_completion(worker_, epoch_, mode_);
    const Nanos t1 = steady_now();
    StepRecord& rec = trace_->steps[step - 1];
    rec.io_complete = t1 - origin_;
    rec.io_wait = t1 - t0;
    return page;
  }

  void compute_begin(std::uint32_t) override { c0_ = steady_now(); }

  void compute_end(std::uint32_t step, Nanos) override {
    const Nanos t1 = steady_now();
    trace_->steps[step - 1].compute += t1 - c0_;
    trace_->compute_spans.push_back({c0_ - origin_, t1 - origin_});
  }

 private:
  IoStack& io_;
  std::size_t worker_;
  IoMode mode_;
  Nanos origin_;
  StepTrace* trace_ = nullptr;
  std::uint64_t epoch_ = 0;
  Nanos c0_ = 0;
};

SearchOutcome search_one(Engine engine, std::span<const std::byte> query, const SearchIndex& index,
                         StorageBackend& backend, SearchParams params, const CostModel& cost) {
  params.engine = engine;
  SearchOutcome out;
  if (backend.simulated_clock()) {
    std::vector<detail::OpScript> scripts(1);
    DirectIo io(backend, out.trace, &scripts[0]);
    out.result = run_engine(engine, query, index, io, params, cost, out.trace);
    detail::replay_scripts(scripts, std::span<StepTrace>(&out.trace, 1), backend, 1, IoMode::worker_level, 0);
  } else {
    DirectIo io(backend, out.trace, nullptr);
    out.result = run_engine(engine, query, index, io, params, cost, out.trace);
    out.trace.start = 0;
    out.trace.end = io.elapsed();
  }
  return out;
}

}  // namespace

SearchOutcome search_strict(std::span<const std::byte> query, const SearchIndex& index, StorageBackend& backend,
                            SearchParams params, const CostModel& cost) {
  return search_one(Engine::strict, query, index, backend, params, cost);
}

SearchOutcome search_relaxed(std::span<const std::byte> query, const SearchIndex& index, StorageBackend& backend,
                             SearchParams params, const CostModel& cost) {
  return search_one(Engine::relaxed, query, index, backend, params, cost);
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

std::vector<std::vector<NodeId>> BatchResult::ids() const {
  std::vector<std::vector<NodeId>> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(r.ids);
  return out;
}

BatchResult run_query_batch(const VectorDataset& queries, const SearchIndex& index, StorageBackend& backend,
                            const SearchParams& params, const BatchOptions& opts, const GroundTruth* truth) {
  params.validate();
  if (opts.workers == 0) throw Error(Errc::InvalidArgument, "workers must be at least 1");
  if (queries.dim() != index.dim() || queries.elem() != index.header.elem) {
    throw Error(Errc::DimMismatch, fmt::format("queries are {}x{}, index is {}x{}", queries.dim(),
                                               elem_name(queries.elem()), index.dim(), elem_name(index.header.elem)));
  }
  const std::size_t nq = queries.count();
  BatchResult out;
  out.results.resize(nq);
  out.traces.resize(nq);
  for (std::size_t q = 0; q < nq; ++q) {
    out.traces[q].query_id = q;
    out.traces[q].engine = params.engine;
  }

  if (backend.simulated_clock() && !opts.real_threads) {
    out.simulated_clock = true;
    std::vector<detail::OpScript> scripts(nq);
    for (std::size_t q = 0; q < nq; ++q) {
      DirectIo io(backend, out.traces[q], &scripts[q]);
      try {
        out.results[q] = run_engine(params.engine, queries.row_bytes(q), index, io, params, opts.cost, out.traces[q]);
      } catch (const Error& e) {
        out.results[q] = {};
        out.results[q].error = e.what();
        // A read that failed still occupies the worker's slot until the
        // replay completes it.
        if (!scripts[q].empty() && scripts[q].back().kind == detail::IoOp::Kind::submit) {
          auto op = scripts[q].back();
          op.kind = detail::IoOp::Kind::wait;
          scripts[q].push_back(op);
        }
      }
    }
    const auto stats = detail::replay_scripts(scripts, out.traces, backend, opts.workers, opts.io_mode,
                                              opts.dispatch_delay);
    out.wall_time = stats.makespan;
    out.io = stats.io;
  } else {
    const std::size_t members = std::min(opts.workers, nq);
    IoStack io(opts.workers);
    if (opts.io_mode == IoMode::batch_barrier) io.set_batch_group(members);
    std::atomic<std::size_t> next{0};
    const Nanos t0 = steady_now();
    {
      Dispatcher dispatcher(io, backend);
      std::vector<std::jthread> threads;
      threads.reserve(members);
      for (std::size_t w = 0; w < members; ++w) {
        threads.emplace_back([&, w] {
          StackIo sio(io, w, opts.io_mode, t0);
          for (;;) {
            const std::size_t q = next.fetch_add(1, std::memory_order_relaxed);
            if (q >= nq) break;
            StepTrace& trace = out.traces[q];
            sio.bind(trace);
            trace.start = steady_now() - t0;
            try {
              out.results[q] = run_engine(params.engine, queries.row_bytes(q), index, sio, params, opts.cost, trace);
            } catch (const Error& e) {
              out.results[q] = {};
              out.results[q].error = e.what();
            }
            trace.end = steady_now() - t0;
          }
          if (opts.io_mode == IoMode::batch_barrier) io.leave_batch_group();
        });
      }
      threads.clear();
      dispatcher.stop();
    }
    out.wall_time = steady_now() - t0;
    out.io = io.stats();
  }

  out.qps = out.wall_time > 0 ? static_cast<double>(nq) / to_seconds(out.wall_time) : 0.0;
  if (truth) out.recall = recall_at_k(out.ids(), *truth, params.k);
  if (!opts.keep_traces) out.traces.clear();
  return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

std::vector<Span> merged(std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.begin < b.begin; });
  std::vector<Span> out;
  for (const Span& s : spans) {
    if (s.end <= s.begin) continue;
    if (!out.empty() && s.begin <= out.back().end) {
      out.back().end = std::max(out.back().end, s.end);
    } else {
      out.push_back(s);
    }
  }
  return out;
}

Nanos total(const std::vector<Span>& spans) {
  Nanos t = 0;
  for (const Span& s : spans) t += s.end - s.begin;
  return t;
}

Nanos intersection(const std::vector<Span>& a, const std::vector<Span>& b) {
  Nanos t = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const Nanos lo = std::max(a[i].begin, b[j].begin);
    const Nanos hi = std::min(a[i].end, b[j].end);
    if (hi > lo) t += hi - lo;
    if (a[i].end < b[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return t;
}

}  // namespace

OverlapReport overlap_report(std::span<const StepTrace> traces) {
  Nanos wall = 0, both = 0, comp = 0, io = 0;
  for (const StepTrace& t : traces) {
    std::vector<Span> ios;
    ios.reserve(t.steps.size());
    for (const StepRecord& s : t.steps) ios.push_back({s.io_issue, s.io_complete});
    const auto cu = merged(t.compute_spans);
    const auto iu = merged(std::move(ios));
    wall += t.end - t.start;
    comp += total(cu);
    io += total(iu);
    both += intersection(cu, iu);
  }
  OverlapReport r;
  r.wall_time = wall;
  if (wall > 0) {
    const double w = static_cast<double>(wall);
    r.overlap_ratio = std::clamp(static_cast<double>(both) / w, 0.0, 1.0);
    r.compute_busy = std::clamp(static_cast<double>(comp) / w, 0.0, 1.0);
    r.io_busy = std::clamp(static_cast<double>(io) / w, 0.0, 1.0);
  }
  return r;
}

double freshness_utilization(const StepTrace& trace) {
  return freshness_utilization(std::span<const StepTrace>(&trace, 1));
}

double freshness_utilization(std::span<const StepTrace> traces) {
  std::size_t fresh = 0, steps = 0;
  for (const StepTrace& t : traces) {
    for (const StepRecord& s : t.steps) {
      ++steps;
      if (s.source_epoch + 1 == s.step) ++fresh;
    }
  }
  return steps ? static_cast<double>(fresh) / static_cast<double>(steps) : 0.0;
}

StepTimes step_times(std::span<const StepTrace> traces) {
  StepTimes r;
  double comp = 0, io = 0, wait = 0;
  std::size_t steps = 0;
  for (const StepTrace& t : traces) {
    for (const StepRecord& s : t.steps) {
      comp += static_cast<double>(s.compute);
      io += static_cast<double>(s.io_complete - s.io_issue);
      wait += static_cast<double>(s.io_wait);
      ++steps;
    }
  }
  if (steps) {
    const double n = static_cast<double>(steps);
    r.mean_compute_ns = comp / n;
    r.mean_io_ns = io / n;
    r.mean_wait_ns = wait / n;
  }
  if (!traces.empty()) r.mean_steps = static_cast<double>(steps) / static_cast<double>(traces.size());
  return r;
}

void write_trace_csv(std::span<const StepTrace> traces, std::ostream& out) {
  out << "query_id,step,expanded_id,source_epoch,io_wait_us,compute_us\n";
  for (const StepTrace& t : traces) {
    for (const StepRecord& s : t.steps) {
      fmt::print(out, "{},{},{},{},{:.3f},{:.3f}\n", t.query_id, s.step, s.expanded_id, s.source_epoch,
                 to_micros(s.io_wait), to_micros(s.compute));
    }
  }
}

// ---------------------------------------------------------------------------
// Cost calibration
// ---------------------------------------------------------------------------

namespace {

template <typename F>
double ns_per_op(std::size_t ops, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  body();
  const auto t1 = std::chrono::steady_clock::now();
  const double ns = static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
  return ops ? std::max(0.01, ns / static_cast<double>(ops)) : 0.0;
}

}  // namespace

CostModel calibrate_cost_model(const SearchIndex& index, StorageBackend& backend, const VectorDataset& queries,
                               const SearchParams& params) {
  params.validate();
  if (queries.count() == 0 || index.count() == 0) throw Error(Errc::InvalidArgument, "nothing to calibrate on");
  if (queries.dim() != index.dim()) throw Error(Errc::DimMismatch, "query dimension differs from index");
  const std::size_t np = std::min<std::size_t>(512, index.count());
  const std::size_t nq = std::min<std::size_t>(16, queries.count());
  std::vector<std::array<std::byte, kPageSize>> pages(np);
  for (std::size_t i = 0; i < np; ++i) {
    const NodeId id = static_cast<NodeId>(i * index.count() / np);
    backend.peek_page(id, PageSpan(pages[i].data(), kPageSize));
  }
  std::vector<AdcTable> tables;
  for (std::size_t q = 0; q < nq; ++q) {
    tables.push_back(adc_table(query_floats(queries.row_bytes(q), index.header.elem, index.dim()), index.book));
  }
  volatile float sink = 0.0f;
  const std::size_t rounds = 8;
  CostModel m;

  m.exact_ns_per_dim = ns_per_op(rounds * np * nq * index.dim(), [&] {
    float acc = 0.0f;
    for (std::size_t r = 0; r < rounds; ++r)
      for (std::size_t i = 0; i < np; ++i)
        for (std::size_t q = 0; q < nq; ++q)
          acc += l2_sq(index.header.elem, pages[i].data(), queries.row_bytes(q).data(), index.dim());
    sink = acc;
  });

  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < np; ++i) {
    for (const NodeId n : decode_page(pages[i], index.header).neighbors) ids.push_back(n);
  }
  if (ids.empty()) ids.push_back(0);
  m.pq_ns_per_subspace = ns_per_op(rounds * ids.size() * nq * index.book.m, [&] {
    float acc = 0.0f;
    for (std::size_t r = 0; r < rounds; ++r)
      for (std::size_t q = 0; q < nq; ++q)
        for (const NodeId n : ids) acc += tables[q].distance(index.codes.code(n));
    sink = acc;
  });

  std::unordered_set<NodeId> visited;
  visited.reserve(4096);
  for (std::size_t i = 0; i < ids.size() && visited.size() < 3000; i += 2) visited.insert(ids[i]);
  m.neighbor_check_ns = ns_per_op(rounds * ids.size(), [&] {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < rounds; ++r)
      for (const NodeId n : ids) hits += visited.count(n);
    sink = static_cast<float>(hits);
  });

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Candidate> cands(4096);
  for (std::size_t i = 0; i < cands.size(); ++i) cands[i] = {u(rng), static_cast<NodeId>(i), 0};
  BoundedMinMaxHeap<Candidate, CandidateLess> heap(params.L);
  m.heap_push_ns = ns_per_op(rounds * cands.size(), [&] {
    for (std::size_t r = 0; r < rounds; ++r) {
      heap.clear();
      for (const auto& c : cands) heap.push(c);
    }
  });
  const double pop_ns = ns_per_op(rounds * cands.size(), [&] {
    float acc = 0.0f;
    for (std::size_t r = 0; r < rounds; ++r) {
      for (std::size_t i = 0; i < cands.size(); i += params.L) {
        heap.clear();
        for (std::size_t j = i; j < std::min(cands.size(), i + params.L); ++j) heap.push(cands[j]);
        while (!heap.empty()) acc += heap.pop_min().pq;
      }
    }
    sink = acc;
  });
  m.select_ns = std::max(1.0, pop_ns - m.heap_push_ns);

  std::vector<Hit> results;
  m.step_fixed_ns = ns_per_op(rounds * np, [&] {
    std::size_t acc = 0;
    for (std::size_t r = 0; r < rounds; ++r) {
      results.clear();
      for (std::size_t i = 0; i < np; ++i) {
        const NodeView v = decode_page(pages[i], index.header);
        acc += v.neighbors.size();
        results.push_back({static_cast<float>(i), static_cast<NodeId>(i)});
        std::push_heap(results.begin(), results.end());
        if (results.size() > params.k) {
          std::pop_heap(results.begin(), results.end());
          results.pop_back();
        }
      }
    }
    sink = static_cast<float>(acc);
  });
  (void)sink;
  return m;
}

}  // namespace ssdann
