#include "ssdann/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/core.h>

namespace ssdann {

// ---------------------------------------------------------------------------
// StorageProfile
// ---------------------------------------------------------------------------

Nanos StorageProfile::service_time() const {
  return static_cast<Nanos>(std::ceil(static_cast<double>(kPageSize) / bandwidth * 1e9));
}

void StorageProfile::validate() const {
  if (device_count == 0 || queue_depth == 0) throw Error(Errc::Config, "device_count and queue_depth must be positive");
  if (base_latency <= 0 || tail_latency <= 0) throw Error(Errc::Config, "latencies must be positive");
  if (!(bandwidth > 0.0)) throw Error(Errc::Config, "bandwidth must be positive");
  if (!(tail_probability >= 0.0 && tail_probability < 1.0)) {
    throw Error(Errc::Config, fmt::format("tail_probability={} outside [0,1)", tail_probability));
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0') {
    throw Error(Errc::Config, fmt::format("'{}' is not a number for key '{}'", value, key));
  }
  return v;
}

}  // namespace

StorageProfile StorageProfile::parse(std::string_view text) {
  StorageProfile p;
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
    const auto key = trim(std::string_view(t).substr(0, eq));
    const auto value = trim(std::string_view(t).substr(eq + 1));
    const double v = parse_number(key, value);
    if (key == "device_count") p.device_count = static_cast<std::size_t>(v);
    else if (key == "queue_depth") p.queue_depth = static_cast<std::size_t>(v);
    else if (key == "base_latency_us") p.base_latency = static_cast<Nanos>(std::llround(v * 1e3));
    else if (key == "tail_probability") p.tail_probability = v;
    else if (key == "tail_latency_us") p.tail_latency = static_cast<Nanos>(std::llround(v * 1e3));
    else if (key == "bandwidth_mbps") p.bandwidth = v * 1e6;
    else if (key == "seed") p.seed = static_cast<std::uint64_t>(v);
    else throw Error(Errc::Config, fmt::format("line {}: unknown key '{}'", lineno, key));
  }
  p.validate();
  return p;
}

StorageProfile StorageProfile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Config, fmt::format("cannot open storage profile '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string StorageProfile::to_config() const {
  return fmt::format(
      "device_count = {}\nqueue_depth = {}\nbase_latency_us = {}\ntail_probability = {}\n"
      "tail_latency_us = {}\nbandwidth_mbps = {}\nseed = {}\n",
      device_count, queue_depth, to_micros(base_latency), tail_probability, to_micros(tail_latency), bandwidth / 1e6,
      seed);
}

// ---------------------------------------------------------------------------
// StorageBackend
// ---------------------------------------------------------------------------

void StorageBackend::check(NodeId id) const {
  if (closed()) throw Error(Errc::BackendClosed, "backend is closed");
  if (id >= page_count_) throw Error(Errc::OutOfRange, fmt::format("node {} outside {} pages", id, page_count_));
}

void StorageBackend::read_page(NodeId id, PageSpan out) {
  check(id);
  const Nanos t0 = steady_now();
  fetch(id, out);
  Nanos expected = -1;
  real_first_.compare_exchange_strong(expected, t0, std::memory_order_relaxed);
  const Nanos t1 = steady_now();
  Nanos last = real_last_.load(std::memory_order_relaxed);
  while (last < t1 && !real_last_.compare_exchange_weak(last, t1, std::memory_order_relaxed)) {
  }
  pages_.fetch_add(1, std::memory_order_relaxed);
}

Nanos StorageBackend::completion_time(NodeId id, Nanos issue) {
  check(id);
  if (!simulated_clock()) throw Error(Errc::InvalidArgument, "backend has no simulated clock");
  note_simulated(issue, issue);
  return issue;
}

void StorageBackend::reset_timeline() {
  std::lock_guard lock(sim_mu_);
  sim_pages_ = 0;
  sim_first_ = -1;
  sim_last_ = 0;
  pages_.store(0);
  real_first_.store(-1);
  real_last_.store(0);
}

Nanos StorageBackend::horizon() const {
  std::lock_guard lock(sim_mu_);
  return sim_last_;
}

void StorageBackend::note_simulated(Nanos issue, Nanos done) {
  std::lock_guard lock(sim_mu_);
  ++sim_pages_;
  if (sim_first_ < 0 || issue < sim_first_) sim_first_ = issue;
  sim_last_ = std::max(sim_last_, done);
}

ThroughputReport StorageBackend::report() const {
  ThroughputReport r;
  std::uint64_t sim_pages;
  Nanos sim_wall;
  {
    std::lock_guard lock(sim_mu_);
    sim_pages = sim_pages_;
    sim_wall = sim_pages_ ? sim_last_ - sim_first_ : 0;
  }
  const std::uint64_t real_pages = pages_.load(std::memory_order_relaxed);
  r.pages_read = std::max(real_pages, sim_pages);
  if (r.pages_read == 0) throw Error(Errc::NoTraffic, "backend has not served any request");
  r.bytes_read = r.pages_read * kPageSize;
  if (sim_pages > 0) {
    r.wall_time = sim_wall;
    if (sim_wall > 0) r.achieved_bandwidth = static_cast<double>(sim_pages * kPageSize) / to_seconds(sim_wall);
  } else {
    r.wall_time = real_last_.load(std::memory_order_relaxed) - real_first_.load(std::memory_order_relaxed);
    if (r.wall_time > 0) r.achieved_bandwidth = static_cast<double>(r.bytes_read) / to_seconds(r.wall_time);
  }
  return r;
}

ThroughputReport aggregate_throughput_report(const StorageBackend& backend) { return backend.report(); }

// ---------------------------------------------------------------------------
// File backend
// ---------------------------------------------------------------------------

namespace {

struct AlignedPage {
  AlignedPage() : ptr(static_cast<std::byte*>(std::aligned_alloc(kPageSize, kPageSize))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~AlignedPage() { std::free(ptr); }
  AlignedPage(const AlignedPage&) = delete;
  AlignedPage& operator=(const AlignedPage&) = delete;
  std::byte* ptr;
};

void pread_full(int fd, std::byte* dst, std::size_t n, std::uint64_t offset) {
  std::size_t done = 0;
  while (done < n) {
    const ssize_t got = ::pread(fd, dst + done, n - done, static_cast<off_t>(offset + done));
    if (got < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::Io, fmt::format("pread failed: {}", std::strerror(errno)));
    }
    if (got == 0) throw Error(Errc::Truncated, "unexpected end of index file");
    done += static_cast<std::size_t>(got);
  }
}

int open_index(const std::filesystem::path& path, bool direct, bool* got_direct) {
  *got_direct = false;
#ifdef O_DIRECT
  if (direct) {
    const int fd = ::open(path.c_str(), O_RDONLY | O_DIRECT);
    if (fd >= 0) {
      *got_direct = true;
      return fd;
    }
  }
#endif
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw Error(Errc::Io, fmt::format("cannot open '{}': {}", path.string(), std::strerror(errno)));
  return fd;
}

class FilePageStore final : public PageStore {
 public:
  explicit FilePageStore(const std::filesystem::path& path) : header_(read_index_header(path)) {
    bool direct;
    fd_ = open_index(path, false, &direct);
  }
  ~FilePageStore() override { ::close(fd_); }

  std::uint64_t page_count() const override { return header_.count; }
  void read(NodeId id, PageSpan out) const override {
    pread_full(fd_, out.data(), kPageSize, header_.page_offset(id));
  }

 private:
  IndexHeader header_;
  int fd_ = -1;
};

class MemoryPageStore final : public PageStore {
 public:
  explicit MemoryPageStore(const GraphIndex& idx) : count_(idx.count()), pages_(idx.count() * kPageSize) {
    for (NodeId i = 0; i < count_; ++i) {
      idx.serialize_page(i, PageSpan(pages_.data() + static_cast<std::size_t>(i) * kPageSize, kPageSize));
    }
  }
  std::uint64_t page_count() const override { return count_; }
  void read(NodeId id, PageSpan out) const override {
    std::memcpy(out.data(), pages_.data() + static_cast<std::size_t>(id) * kPageSize, kPageSize);
  }

 private:
  std::uint64_t count_;
  std::vector<std::byte> pages_;
};

}  // namespace

FileBackend::FileBackend(const std::filesystem::path& index_path, bool direct_io)
    : StorageBackend(read_index_header(index_path).count) {
  page_base_ = read_index_header(index_path).page_base;
  fd_ = open_index(index_path, direct_io, &direct_);
}

FileBackend::~FileBackend() {
  if (fd_ >= 0) ::close(fd_);
}

void FileBackend::fetch(NodeId id, PageSpan out) {
  const std::uint64_t off = page_base_ + static_cast<std::uint64_t>(id) * kPageSize;
  if (!direct_) {
    pread_full(fd_, out.data(), kPageSize, off);
    return;
  }
  AlignedPage tmp;
  pread_full(fd_, tmp.ptr, kPageSize, off);
  std::memcpy(out.data(), tmp.ptr, kPageSize);
}

std::shared_ptr<PageStore> memory_pages(const GraphIndex& idx) { return std::make_shared<MemoryPageStore>(idx); }

std::shared_ptr<PageStore> file_pages(const std::filesystem::path& index_path) {
  return std::make_shared<FilePageStore>(index_path);
}

MemoryBackend::MemoryBackend(std::shared_ptr<PageStore> pages)
    : StorageBackend(pages->page_count()), pages_(std::move(pages)) {}

// ---------------------------------------------------------------------------
// Simulated backend
// ---------------------------------------------------------------------------

SimulatedBackend::SimulatedBackend(std::shared_ptr<PageStore> pages, const StorageProfile& profile)
    : StorageBackend(pages->page_count()),
      pages_(std::move(pages)),
      profile_(profile),
      devices_(profile.device_count),
      rng_(profile.seed) {
  profile_.validate();
}

std::size_t SimulatedBackend::device_of(NodeId id) const {
  // splitmix64 finalizer
  std::uint64_t z = static_cast<std::uint64_t>(id) + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<std::size_t>(z % profile_.device_count);
}

void SimulatedBackend::set_tail_override(std::function<std::optional<bool>(NodeId, std::uint64_t)> hook) {
  std::lock_guard lock(mu_);
  tail_hook_ = std::move(hook);
}

void SimulatedBackend::reset_timeline() {
  StorageBackend::reset_timeline();
  std::lock_guard lock(mu_);
  devices_.assign(profile_.device_count, Device{});
  rng_.seed(profile_.seed);
  seq_ = 0;
  tail_events_ = 0;
}

Nanos SimulatedBackend::completion_time(NodeId id, Nanos issue) {
  check(id);
  Nanos done;
  {
    std::lock_guard lock(mu_);
    Device& dev = devices_[device_of(id)];
    while (!dev.busy.empty() && dev.busy.top() <= issue) dev.busy.pop();
    Nanos admit = issue;
    if (dev.busy.size() >= profile_.queue_depth) {
      admit = dev.busy.top();
      dev.busy.pop();
    }
    const Nanos service = profile_.service_time();
    const Nanos start = std::max(admit, dev.channel_free);
    dev.channel_free = start + service;

    const std::uint64_t seq = seq_++;
    bool tail = std::generate_canonical<double, 53>(rng_) < profile_.tail_probability;
    if (tail_hook_) {
      if (auto forced = tail_hook_(id, seq)) tail = *forced;
    }
    tail_events_ += tail ? 1 : 0;
    done = start + service + profile_.base_latency + (tail ? profile_.tail_latency : 0);
    dev.busy.push(done);
  }
  note_simulated(issue, done);
  return done;
}

std::unique_ptr<StorageBackend> open_backend(BackendKind kind, const std::filesystem::path& index_path,
                                             const std::optional<StorageProfile>& profile) {
  if (!std::filesystem::exists(index_path)) {
    throw Error(Errc::Io, fmt::format("index file '{}' does not exist", index_path.string()));
  }
  switch (kind) {
    case BackendKind::file: return std::make_unique<FileBackend>(index_path);
    case BackendKind::memory: return std::make_unique<MemoryBackend>(file_pages(index_path));
    case BackendKind::simulated:
      if (!profile) throw Error(Errc::Config, "simulated backend needs a storage profile");
      return std::make_unique<SimulatedBackend>(file_pages(index_path), *profile);
  }
  throw Error(Errc::InvalidArgument, "unknown backend kind");
}

}  // namespace ssdann
