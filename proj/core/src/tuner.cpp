#include "ssdann/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>

#include <fmt/core.h>
#include <fmt/ostream.h>

namespace ssdann {

std::vector<std::size_t> default_degree_grid(std::size_t dim, std::size_t elem_bytes) {
  const std::size_t cap = max_degree_for_page(dim, elem_bytes);
  std::vector<std::size_t> grid;
  for (std::size_t d : {32, 64, 128, 192, 256}) {
    if (d <= cap) grid.push_back(d);
  }
  return grid;
}

GraphIndex build_sample_index(const VectorDataset& sample, std::size_t degree, std::uint64_t seed,
                              std::size_t pq_m) {
  const std::size_t cap = max_degree_for_page(sample.dim(), elem_size(sample.elem()));
  if (degree > cap) {
    throw Error(Errc::PageOverflow, fmt::format("degree {} exceeds the page capacity of {}", degree, cap));
  }
  const std::size_t m = pq_m ? pq_m : default_pq_m(sample.dim());
  PqTrainOptions topts;
  topts.seed = seed;
  const PqCodebook book = pq_train(sample, m, topts);
  const PqCodes codes = pq_encode(sample, book);
  return build_index(sample, book, codes, BuildParams::with_degree(degree, seed));
}

namespace {

double trimmed_mean(std::vector<double> v, double trim) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto drop = static_cast<std::size_t>(std::floor(static_cast<double>(v.size()) * trim));
  const auto b = v.begin() + static_cast<std::ptrdiff_t>(drop);
  const auto e = v.end() - static_cast<std::ptrdiff_t>(drop);
  if (b >= e) return v[v.size() / 2];
  double s = 0.0;
  for (auto it = b; it != e; ++it) s += *it;
  return s / static_cast<double>(e - b);
}

}  // namespace

DegreeProfile profile_degree(const SearchIndex& index, StorageBackend& backend, const VectorDataset& queries,
                             const SearchParams& params, const ProfileOptions& opts) {
  if (queries.count() < opts.min_queries) {
    throw Error(Errc::InvalidArgument,
                fmt::format("profiling needs at least {} queries, got {}", opts.min_queries, queries.count()));
  }
  if (!(opts.trim >= 0.0 && opts.trim < 0.5)) throw Error(Errc::InvalidArgument, "trim must be in [0, 0.5)");
  SearchParams p = params;
  p.engine = Engine::strict;
  BatchOptions bo = opts.batch;
  bo.keep_traces = true;
  const BatchResult run = run_query_batch(queries, index, backend, p, bo);

  std::vector<double> comp, io;
  double steps = 0.0;
  for (const StepTrace& t : run.traces) {
    steps += static_cast<double>(t.step_count());
    for (const StepRecord& s : t.steps) {
      comp.push_back(static_cast<double>(s.compute));
      io.push_back(static_cast<double>(s.io_complete - s.io_issue));
    }
  }
  DegreeProfile d;
  d.degree = index.header.degree;
  d.t_compute = std::max(1.0, trimmed_mean(std::move(comp), opts.trim));
  d.t_io = std::max(1.0, trimmed_mean(std::move(io), opts.trim));
  d.est_steps = run.traces.empty() ? 0.0 : steps / static_cast<double>(run.traces.size());
  d.ratio = d.t_io / d.t_compute;
  return d;
}

double degree_objective(const DegreeProfile& p) { return p.est_steps * std::max(p.t_compute, p.t_io); }

TunerReport select_degree(std::span<const DegreeProfile> profiles) {
  if (profiles.size() < 2) {
    throw Error(Errc::InvalidArgument, fmt::format("degree selection needs at least 2 profiles, got {}",
                                                   profiles.size()));
  }
  TunerReport r;
  r.profiles.assign(profiles.begin(), profiles.end());
  std::size_t best = 0;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& p = profiles[i];
    if (p.degree == 0 || !(p.t_compute > 0.0) || !(p.t_io > 0.0) || !(p.est_steps > 0.0)) {
      throw Error(Errc::InvalidArgument, fmt::format("profile for degree {} has non-positive fields", p.degree));
    }
    r.objective.push_back(degree_objective(p));
    const double o = r.objective.back();
    const double ob = r.objective[best];
    if (o < ob || (o == ob && p.degree < profiles[best].degree)) best = i;
  }
  r.selected_degree = profiles[best].degree;
  return r;
}

void write_tuner_csv(const TunerReport& report, std::ostream& out) {
  out << "degree,t_compute_ns,t_io_ns,ratio,est_steps,objective_ns,selected\n";
  for (std::size_t i = 0; i < report.profiles.size(); ++i) {
    const auto& p = report.profiles[i];
    fmt::print(out, "{},{:.1f},{:.1f},{:.4f},{:.3f},{:.1f},{}\n", p.degree, p.t_compute, p.t_io, p.ratio,
               p.est_steps, report.objective[i], p.degree == report.selected_degree ? 1 : 0);
  }
}

void write_selected_degree(const TunerReport& report, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(Errc::Io, fmt::format("cannot write {}", path.string()));
  f << report.selected_degree << '\n';
  if (!f) throw Error(Errc::Io, fmt::format("write to {} failed", path.string()));
}

std::size_t read_selected_degree(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::Io, fmt::format("cannot open {}", path.string()));
  long long d = 0;
  if (!(f >> d) || d <= 0) throw Error(Errc::Config, fmt::format("{} does not hold a degree", path.string()));
  return static_cast<std::size_t>(d);
}

StorageProfile balanced_profile(StorageProfile profile, double target_ns) {
  const double fixed = static_cast<double>(profile.service_time()) +
                       profile.tail_probability * static_cast<double>(profile.tail_latency);
  const double base = target_ns - fixed;
  if (!(base >= 1.0)) {
    throw Error(Errc::Config, fmt::format("target latency {:.0f} ns is below the transfer and tail cost {:.0f} ns",
                                          target_ns, fixed));
  }
  profile.base_latency = static_cast<Nanos>(std::llround(base));
  return profile;
}

}  // namespace ssdann
