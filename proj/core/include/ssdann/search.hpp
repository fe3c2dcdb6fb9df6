#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssdann/dataset.hpp"
#include "ssdann/index.hpp"
#include "ssdann/iostack.hpp"
#include "ssdann/storage.hpp"

namespace ssdann {

enum class Engine { strict, relaxed };

std::string_view engine_name(Engine e);
Engine parse_engine(std::string_view name);

struct SearchParams {
  std::size_t L = 64;  // candidate heap capacity
  std::size_t k = 10;
  std::size_t max_steps = 100'000;
  Engine engine = Engine::strict;

  void validate() const;
};

/// Per-operation compute costs charged on the simulated clock. The
/// defaults approximate a single modern CPU core; `calibrate_cost_model`
/// measures them on the current machine.
struct CostModel {
  double select_ns = 40.0;           // pop-min plus convergence check
  double step_fixed_ns = 150.0;      // page decode, result-queue update
  double exact_ns_per_dim = 0.8;     // full-precision distance
  double neighbor_check_ns = 3.0;    // visited filter per neighbor slot
  double pq_ns_per_subspace = 1.0;   // ADC lookup per scored neighbor
  double heap_push_ns = 25.0;        // candidate heap insertion

  Nanos select_cost() const;
  Nanos process_cost(std::size_t dim, std::size_t pq_m, std::size_t neighbors, std::size_t scored) const;

  /// All coefficients multiplied by `factor`.
  CostModel scaled(double factor) const;
};

struct QueryResult {
  std::vector<NodeId> ids;      // ascending by (distance, id); padded with kInvalidNode
  std::vector<float> distances;  // exact squared L2
  std::optional<std::string> error;
};

struct StepRecord {
  std::uint32_t step = 0;          // 1-based
  NodeId expanded_id = kInvalidNode;
  std::uint32_t source_epoch = 0;  // step whose page discovered the node; 0 = entry point
  bool pipelined = false;          // chosen before the previous page was processed
  std::uint32_t neighbors = 0;
  std::uint32_t scored = 0;        // newly discovered neighbors
  Nanos io_issue = 0;
  Nanos io_complete = 0;
  Nanos io_wait = 0;
  Nanos compute = 0;               // select + page processing attributed to this step
};

struct Span {
  Nanos begin = 0;
  Nanos end = 0;
};

struct StepTrace {
  std::size_t query_id = 0;
  Engine engine = Engine::strict;
  std::vector<StepRecord> steps;
  std::vector<Span> compute_spans;
  Nanos start = 0;
  Nanos end = 0;
  bool max_steps_hit = false;

  std::size_t step_count() const noexcept { return steps.size(); }
};

/// Engine-facing I/O surface. Steps are numbered from 1.
class PageIo {
 public:
  virtual ~PageIo() = default;
  virtual void submit(std::uint32_t step, NodeId node, BufferSlot buffer) = 0;
  virtual std::span<const std::byte> await_page(std::uint32_t step) = 0;
  virtual void compute_begin(std::uint32_t step) = 0;
  virtual void compute_end(std::uint32_t step, Nanos modeled) = 0;
};

/// Runs one query through `engine` over `io`, filling `trace` (timings are
/// left to the PageIo implementation).
QueryResult run_engine(Engine engine, std::span<const std::byte> query, const SearchIndex& index, PageIo& io,
                       const SearchParams& params, const CostModel& cost, StepTrace& trace);

struct SearchOutcome {
  QueryResult result;
  StepTrace trace;
};

/// Single-query entry points. On a simulated-clock backend the trace
/// timings come from a one-worker replay on the simulated clock; on a file
/// backend they are real elapsed times.
SearchOutcome search_strict(std::span<const std::byte> query, const SearchIndex& index, StorageBackend& backend,
                            SearchParams params, const CostModel& cost = {});
SearchOutcome search_relaxed(std::span<const std::byte> query, const SearchIndex& index, StorageBackend& backend,
                             SearchParams params, const CostModel& cost = {});

struct OverlapReport {
  double overlap_ratio = 0.0;
  double compute_busy = 0.0;  // fraction of wall time with compute active
  double io_busy = 0.0;       // fraction of wall time with a page read outstanding
  Nanos wall_time = 0;
};

OverlapReport overlap_report(std::span<const StepTrace> traces);

/// Fraction of steps whose expanded node was discovered by the immediately
/// preceding step (the entry point counts as discovered at step 0).
double freshness_utilization(const StepTrace& trace);
double freshness_utilization(std::span<const StepTrace> traces);

struct BatchOptions {
  std::size_t workers = 1;
  IoMode io_mode = IoMode::worker_level;
  CostModel cost;
  /// Delay between a submit and its hand-off to storage on the simulated
  /// clock; models the dispatcher's polling cadence.
  Nanos dispatch_delay = 0;
  /// Run real worker threads over the I/O stack even on a simulated-clock
  /// backend.
  bool real_threads = false;
  bool keep_traces = true;
};

struct BatchResult {
  std::vector<QueryResult> results;
  std::vector<StepTrace> traces;
  Nanos wall_time = 0;
  double qps = 0.0;
  std::optional<double> recall;
  IoStats io;
  bool simulated_clock = false;

  std::vector<std::vector<NodeId>> ids() const;
};

/// Each query runs start to finish on one worker; workers pull queries in
/// order. Simulated-clock backends are replayed on the simulated clock
/// (deterministic); otherwise real threads run over the I/O stack.
BatchResult run_query_batch(const VectorDataset& queries, const SearchIndex& index, StorageBackend& backend,
                            const SearchParams& params, const BatchOptions& opts,
                            const GroundTruth* truth = nullptr);

/// Mean per-step compute and I/O latency across traces.
struct StepTimes {
  double mean_compute_ns = 0.0;
  double mean_io_ns = 0.0;     // issue to completion
  double mean_wait_ns = 0.0;   // time blocked awaiting the page
  double mean_steps = 0.0;
};

StepTimes step_times(std::span<const StepTrace> traces);

void write_trace_csv(std::span<const StepTrace> traces, std::ostream& out);

/// Times the search kernels on this machine and fits a CostModel.
CostModel calibrate_cost_model(const SearchIndex& index, StorageBackend& backend, const VectorDataset& queries,
                               const SearchParams& params);

}  // namespace ssdann
