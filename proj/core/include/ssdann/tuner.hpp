#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ssdann/index.hpp"
#include "ssdann/search.hpp"
#include "ssdann/storage.hpp"

namespace ssdann {

struct DegreeProfile {
  std::size_t degree = 0;
  double t_compute = 0.0;  // mean per-step compute, ns
  double t_io = 0.0;       // mean per-step I/O (issue to completion), ns
  double est_steps = 0.0;
  double ratio = 0.0;      // t_io / t_compute
};

struct TunerReport {
  std::vector<DegreeProfile> profiles;
  std::vector<double> objective;  // parallel to profiles
  std::size_t selected_degree = 0;
};

/// {32, 64, 128, 192, 256} without the degrees a page cannot hold.
std::vector<std::size_t> default_degree_grid(std::size_t dim, std::size_t elem_bytes);

/// PQ training plus a Vamana build with L_build = max(2R, 64). The page
/// capacity is checked before any work is done.
GraphIndex build_sample_index(const VectorDataset& sample, std::size_t degree, std::uint64_t seed = 1,
                              std::size_t pq_m = 0);

struct ProfileOptions {
  BatchOptions batch;          // workers, io mode and cost model for the profiling runs
  std::size_t min_queries = 100;
  double trim = 0.05;          // dropped from each end before averaging
};

/// Runs the strict engine over `queries` and summarizes per-step stage
/// times as trimmed means. Durations are floored at 1 ns.
DegreeProfile profile_degree(const SearchIndex& index, StorageBackend& backend, const VectorDataset& queries,
                             const SearchParams& params, const ProfileOptions& opts = {});

/// est_steps * max(t_compute, t_io).
double degree_objective(const DegreeProfile& p);

/// Argmin of the objective; ties go to the smaller degree.
TunerReport select_degree(std::span<const DegreeProfile> profiles);

void write_tuner_csv(const TunerReport& report, std::ostream& out);
void write_selected_degree(const TunerReport& report, const std::filesystem::path& path);
std::size_t read_selected_degree(const std::filesystem::path& path);

/// Copy of `profile` whose mean single-request latency (base + transfer +
/// expected tail) matches `target_ns`. Throws if the fixed parts alone
/// already exceed it.
StorageProfile balanced_profile(StorageProfile profile, double target_ns);

}  // namespace ssdann
