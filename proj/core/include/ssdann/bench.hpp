#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ssdann/search.hpp"
#include "ssdann/storage.hpp"

namespace ssdann {

/// Process exit codes of the command line tool.
enum class ExitCode : int { ok = 0, runtime = 1, config = 2, data = 3 };

ExitCode exit_code_for(Errc code);

/// Splits `key = value` lines; '#' starts a comment. Duplicate keys keep the
/// last value.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

BackendKind parse_backend_kind(std::string_view name);
std::string_view backend_kind_name(BackendKind kind);

/// Experiment description shared by `sweep` and `compare-io`.
struct BenchConfig {
  std::filesystem::path queries;
  std::filesystem::path gt;            // ivecs ground-truth ids
  std::filesystem::path index;
  std::filesystem::path storage;       // storage profile; defaults when empty
  std::filesystem::path output;        // CSV; stdout when empty
  std::filesystem::path trace;         // optional per-step trace CSV
  BackendKind backend = BackendKind::simulated;
  Engine engine = Engine::relaxed;
  std::vector<std::size_t> L{64};
  std::size_t k = 10;
  std::size_t workers = 1;
  std::vector<std::size_t> worker_counts;  // compare-io; defaults to {workers}
  IoMode io_mode = IoMode::worker_level;
  std::uint64_t seed = 1;
  std::size_t max_steps = 100'000;
  std::size_t query_limit = 0;  // 0 = all queries
  double cost_scale = 1.0;
  bool calibrate_cost = false;
  Nanos dispatch_delay = 0;

  static BenchConfig parse(std::string_view text);
  static BenchConfig load(const std::filesystem::path& path);
  /// Checks value constraints; file existence is checked when a run starts.
  void validate() const;
};

struct SweepRow {
  std::size_t L = 0;
  double recall = 0.0;
  double qps = 0.0;
  double mean_steps = 0.0;
  double overlap_ratio = 0.0;
  double p99_io_wait_us = 0.0;
};

struct CompareRow {
  IoMode mode = IoMode::worker_level;
  std::size_t workers = 1;
  double qps = 0.0;
  double p50_wait_us = 0.0;
  double p99_wait_us = 0.0;
};

std::vector<SweepRow> run_sweep(const BenchConfig& cfg);
std::vector<CompareRow> run_compare_io(const BenchConfig& cfg);

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);
void write_compare_csv(std::span<const CompareRow> rows, std::ostream& out);

/// Nearest-rank percentile, p in [0, 100]; 0 for an empty sample.
double percentile(std::vector<double> values, double p);

}  // namespace ssdann
