#include "ssdann/bench.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <fmt/core.h>
#include <fmt/ostream.h>

namespace ssdann {

ExitCode exit_code_for(Errc code) {
  switch (code) {
    case Errc::Config:
    case Errc::InvalidArgument:
    case Errc::PageOverflow:
      return ExitCode::config;
    case Errc::InconsistentDim:
    case Errc::Truncated:
    case Errc::DimMismatch:
    case Errc::InsufficientPoints:
    case Errc::BadMagic:
    case Errc::BadVersion:
    case Errc::Io:
      return ExitCode::data;
    default:
      return ExitCode::runtime;
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0' || value.front() == '-') {
    throw Error(Errc::Config, fmt::format("'{}' is not a non-negative integer for key '{}'", value, key));
  }
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0') {
    throw Error(Errc::Config, fmt::format("'{}' is not a number for key '{}'", value, key));
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw Error(Errc::Config, fmt::format("'{}' is not a boolean for key '{}'", value, key));
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto t = trim(item);
    if (t.empty()) continue;
    out.push_back(static_cast<std::size_t>(parse_uint(key, t)));
  }
  return out;
}

void require_file(const std::filesystem::path& p, std::string_view what) {
  if (p.empty()) throw Error(Errc::Config, fmt::format("{} path is not set", what));
  if (!std::filesystem::exists(p)) throw Error(Errc::Io, fmt::format("{} '{}' does not exist", what, p.string()));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(Errc::Config, fmt::format("line {}: expected key = value", lineno));
    auto key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw Error(Errc::Config, fmt::format("line {}: empty key", lineno));
    out.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "file") return BackendKind::file;
  if (name == "simulated") return BackendKind::simulated;
  if (name == "memory") return BackendKind::memory;
  throw Error(Errc::Config, fmt::format("unknown backend '{}'", name));
}

std::string_view backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::file: return "file";
    case BackendKind::simulated: return "simulated";
    case BackendKind::memory: return "memory";
  }
  return "?";
}

BenchConfig BenchConfig::parse(std::string_view text) {
  BenchConfig c;
  bool have_worker_counts = false;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "queries") c.queries = value;
    else if (key == "gt") c.gt = value;
    else if (key == "index") c.index = value;
    else if (key == "storage") c.storage = value;
    else if (key == "output") c.output = value;
    else if (key == "trace") c.trace = value;
    else if (key == "backend") c.backend = parse_backend_kind(value);
    else if (key == "engine") c.engine = parse_engine(value);
    else if (key == "L") c.L = parse_list(key, value);
    else if (key == "k") c.k = parse_uint(key, value);
    else if (key == "workers") c.workers = parse_uint(key, value);
    else if (key == "worker_counts") {
      c.worker_counts = parse_list(key, value);
      have_worker_counts = true;
    } else if (key == "io_mode") c.io_mode = parse_io_mode(value);
    else if (key == "seed") c.seed = parse_uint(key, value);
    else if (key == "max_steps") c.max_steps = parse_uint(key, value);
    else if (key == "query_limit") c.query_limit = parse_uint(key, value);
    else if (key == "cost_scale") c.cost_scale = parse_double(key, value);
    else if (key == "calibrate_cost") c.calibrate_cost = parse_bool(key, value);
    else if (key == "dispatch_delay_us") c.dispatch_delay = static_cast<Nanos>(std::llround(parse_double(key, value) * 1e3));
    else throw Error(Errc::Config, fmt::format("unknown key '{}'", key));
  }
  if (!have_worker_counts) c.worker_counts = {c.workers};
  c.validate();
  return c;
}

BenchConfig BenchConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::Config, fmt::format("cannot open config '{}'", path.string()));
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void BenchConfig::validate() const {
  if (L.empty()) throw Error(Errc::Config, "L sweep list is empty");
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (L[i] == 0) throw Error(Errc::Config, "L values must be positive");
    if (i > 0 && L[i] <= L[i - 1]) throw Error(Errc::Config, "L sweep list must be strictly ascending");
  }
  if (k == 0) throw Error(Errc::Config, "k must be positive");
  if (k > L.front()) throw Error(Errc::Config, fmt::format("k={} exceeds the smallest L={}", k, L.front()));
  if (workers == 0) throw Error(Errc::Config, "workers must be positive");
  if (worker_counts.empty()) throw Error(Errc::Config, "worker_counts is empty");
  for (std::size_t w : worker_counts) {
    if (w == 0) throw Error(Errc::Config, "worker counts must be positive");
  }
  if (max_steps == 0) throw Error(Errc::Config, "max_steps must be positive");
  if (!(cost_scale > 0.0)) throw Error(Errc::Config, "cost_scale must be positive");
  if (dispatch_delay < 0) throw Error(Errc::Config, "dispatch_delay_us must be non-negative");
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size()));
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

namespace {

struct Session {
  SearchIndex index;
  VectorDataset queries;
  std::unique_ptr<StorageBackend> backend;
  CostModel cost;
};

Session open_session(const BenchConfig& cfg) {
  cfg.validate();
  require_file(cfg.index, "index");
  require_file(cfg.queries, "queries");
  Session s;
  s.index = SearchIndex::load(cfg.index);
  VectorDataset q = load_vectors(cfg.queries, format_from_path(cfg.queries));
  if (cfg.query_limit > 0 && cfg.query_limit < q.count()) {
    std::vector<std::size_t> rows(cfg.query_limit);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    q = q.subset(rows);
  }
  s.queries = std::move(q);
  std::optional<StorageProfile> profile;
  if (cfg.backend == BackendKind::simulated) {
    profile = cfg.storage.empty() ? StorageProfile{} : StorageProfile::load(cfg.storage);
  }
  s.backend = open_backend(cfg.backend, cfg.index, profile);
  SearchParams p;
  p.L = cfg.L.front();
  p.k = cfg.k;
  s.cost = cfg.calibrate_cost ? calibrate_cost_model(s.index, *s.backend, s.queries, p) : CostModel{};
  s.cost = s.cost.scaled(cfg.cost_scale);
  return s;
}

std::vector<double> waits_us(const std::vector<StepTrace>& traces) {
  std::vector<double> out;
  for (const auto& t : traces) {
    for (const auto& s : t.steps) out.push_back(to_micros(s.io_wait));
  }
  return out;
}

}  // namespace

std::vector<SweepRow> run_sweep(const BenchConfig& cfg) {
  require_file(cfg.gt, "ground truth");
  Session s = open_session(cfg);
  const auto ids = load_ivecs(cfg.gt);
  if (ids.size() < s.queries.count()) {
    throw Error(Errc::DimMismatch, fmt::format("ground truth has {} rows for {} queries", ids.size(),
                                               s.queries.count()));
  }
  GroundTruth gt;
  gt.query_count = s.queries.count();
  gt.k = ids.empty() ? 0 : ids.front().size();
  if (gt.k < cfg.k) throw Error(Errc::DimMismatch, fmt::format("ground truth holds {} ids per query, k={}", gt.k, cfg.k));
  for (std::size_t q = 0; q < gt.query_count; ++q) {
    if (ids[q].size() != gt.k) throw Error(Errc::InconsistentDim, fmt::format("ground-truth row {} is ragged", q));
    for (auto v : ids[q]) gt.ids.push_back(static_cast<NodeId>(v));
  }

  std::vector<SweepRow> rows;
  std::vector<StepTrace> all_traces;
  for (std::size_t L : cfg.L) {
    SearchParams p;
    p.L = L;
    p.k = cfg.k;
    p.max_steps = cfg.max_steps;
    p.engine = cfg.engine;
    BatchOptions bo;
    bo.workers = cfg.workers;
    bo.io_mode = cfg.io_mode;
    bo.cost = s.cost;
    bo.dispatch_delay = cfg.dispatch_delay;
    s.backend->reset_timeline();
    BatchResult r = run_query_batch(s.queries, s.index, *s.backend, p, bo, &gt);
    SweepRow row;
    row.L = L;
    row.recall = r.recall.value_or(0.0);
    row.qps = r.qps;
    row.mean_steps = step_times(r.traces).mean_steps;
    row.overlap_ratio = overlap_report(r.traces).overlap_ratio;
    row.p99_io_wait_us = percentile(waits_us(r.traces), 99.0);
    rows.push_back(row);
    if (!cfg.trace.empty()) {
      for (auto& t : r.traces) all_traces.push_back(std::move(t));
    }
  }
  if (!cfg.trace.empty()) {
    std::ofstream f(cfg.trace);
    if (!f) throw Error(Errc::Io, fmt::format("cannot write trace '{}'", cfg.trace.string()));
    write_trace_csv(all_traces, f);
  }
  return rows;
}

std::vector<CompareRow> run_compare_io(const BenchConfig& cfg) {
  Session s = open_session(cfg);
  SearchParams p;
  p.L = cfg.L.front();
  p.k = cfg.k;
  p.max_steps = cfg.max_steps;
  p.engine = cfg.engine;
  std::vector<CompareRow> rows;
  for (std::size_t w : cfg.worker_counts) {
    for (IoMode mode : {IoMode::worker_level, IoMode::batch_barrier}) {
      BatchOptions bo;
      bo.workers = w;
      bo.io_mode = mode;
      bo.cost = s.cost;
      bo.dispatch_delay = cfg.dispatch_delay;
      s.backend->reset_timeline();
      const BatchResult r = run_query_batch(s.queries, s.index, *s.backend, p, bo);
      std::vector<double> waits;
      for (Nanos n : r.io.waits) waits.push_back(to_micros(n));
      CompareRow row;
      row.mode = mode;
      row.workers = w;
      row.qps = r.qps;
      row.p50_wait_us = percentile(waits, 50.0);
      row.p99_wait_us = percentile(std::move(waits), 99.0);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  out << "L,recall@10,qps,mean_steps,overlap_ratio,p99_io_wait\n";
  for (const auto& r : rows) {
    fmt::print(out, "{},{:.4f},{:.2f},{:.3f},{:.4f},{:.3f}\n", r.L, r.recall, r.qps, r.mean_steps, r.overlap_ratio,
               r.p99_io_wait_us);
  }
}

void write_compare_csv(std::span<const CompareRow> rows, std::ostream& out) {
  out << "io_mode,workers,qps,p50_wait,p99_wait\n";
  for (const auto& r : rows) {
    fmt::print(out, "{},{},{:.2f},{:.3f},{:.3f}\n", io_mode_name(r.mode), r.workers, r.qps, r.p50_wait_us,
               r.p99_wait_us);
  }
}

}  // namespace ssdann
