#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "ssdann/common.hpp"
#include "ssdann/index.hpp"

namespace ssdann {

using PageSpan = std::span<std::byte, kPageSize>;

/// Latency/bandwidth model for the simulated backend. Durations are in
/// nanoseconds; the text config uses microseconds and MB/s.
struct StorageProfile {
  std::size_t device_count = 1;
  std::size_t queue_depth = 128;   // requests in service per device
  Nanos base_latency = 80'000;
  double tail_probability = 0.02;
  Nanos tail_latency = 1'000'000;  // extra delay of a tail event
  double bandwidth = 3.0e9;        // bytes per second, per device
  std::uint64_t seed = 1;

  /// Transfer time of one 4 KB page on one device.
  Nanos service_time() const;
  void validate() const;

  static StorageProfile parse(std::string_view text);
  static StorageProfile load(const std::filesystem::path& path);
  std::string to_config() const;
};

struct ThroughputReport {
  std::uint64_t pages_read = 0;
  std::uint64_t bytes_read = 0;
  Nanos wall_time = 0;
  double achieved_bandwidth = 0.0;  // bytes per second
};

enum class BackendKind { file, simulated, memory };

/// Page-granular read interface under the I/O stack. `read_page` is
/// synchronous and safe to call concurrently. Backends that model timing
/// also answer `completion_time` on their simulated clock.
class StorageBackend {
 public:
  virtual ~StorageBackend() = default;

  virtual BackendKind kind() const noexcept = 0;
  std::uint64_t page_count() const noexcept { return page_count_; }

  void read_page(NodeId id, PageSpan out);

  /// Reads a page without counting it as traffic.
  void peek_page(NodeId id, PageSpan out) {
    check(id);
    fetch(id, out);
  }

  /// True when the backend runs on the simulated clock (simulated and
  /// memory backends); false for real files.
  virtual bool simulated_clock() const noexcept { return false; }

  /// Simulated completion time of a read of `id` issued at `issue`. Calls
  /// must come in non-decreasing `issue` order. Also records the request
  /// for the throughput report.
  virtual Nanos completion_time(NodeId id, Nanos issue);

  /// Starts a fresh simulated timeline at t=0: idle devices, re-seeded
  /// tail draws and cleared traffic counters.
  virtual void reset_timeline();

  /// Latest simulated completion handed out so far; new simulated work
  /// should start at or after this point.
  Nanos horizon() const;

  ThroughputReport report() const;

  void close() noexcept { closed_.store(true, std::memory_order_release); }
  bool closed() const noexcept { return closed_.load(std::memory_order_acquire); }

 protected:
  explicit StorageBackend(std::uint64_t page_count) : page_count_(page_count) {}
  virtual void fetch(NodeId id, PageSpan out) = 0;
  void check(NodeId id) const;
  void note_simulated(Nanos issue, Nanos done);

 private:
  std::uint64_t page_count_;
  std::atomic<bool> closed_{false};
  std::atomic<std::uint64_t> pages_{0};
  std::atomic<Nanos> real_first_{-1};
  std::atomic<Nanos> real_last_{0};
  mutable std::mutex sim_mu_;
  std::uint64_t sim_pages_ = 0;
  Nanos sim_first_ = -1;
  Nanos sim_last_ = 0;
};

/// Reads pages from an index file with positioned reads.
class FileBackend final : public StorageBackend {
 public:
  explicit FileBackend(const std::filesystem::path& index_path, bool direct_io = false);
  ~FileBackend() override;
  FileBackend(const FileBackend&) = delete;
  FileBackend& operator=(const FileBackend&) = delete;

  BackendKind kind() const noexcept override { return BackendKind::file; }

 protected:
  void fetch(NodeId id, PageSpan out) override;

 private:
  int fd_ = -1;
  std::uint64_t page_base_ = 0;
  bool direct_ = false;
};

/// Source of page bytes for the clock-modeled backends.
class PageStore {
 public:
  virtual ~PageStore() = default;
  virtual std::uint64_t page_count() const = 0;
  virtual void read(NodeId id, PageSpan out) const = 0;
};

std::shared_ptr<PageStore> memory_pages(const GraphIndex& idx);
std::shared_ptr<PageStore> file_pages(const std::filesystem::path& index_path);

/// Zero-latency backend on the simulated clock.
class MemoryBackend : public StorageBackend {
 public:
  explicit MemoryBackend(std::shared_ptr<PageStore> pages);
  BackendKind kind() const noexcept override { return BackendKind::memory; }
  bool simulated_clock() const noexcept override { return true; }

 protected:
  void fetch(NodeId id, PageSpan out) override { pages_->read(id, out); }

 private:
  std::shared_ptr<PageStore> pages_;
};

/// Queueing model of `device_count` SSDs. Each request is striped to a
/// device by a hash of its node id, waits for one of the device's
/// `queue_depth` service slots, then for the device's transfer channel
/// (one page per service_time), and completes base_latency later, plus
/// tail_latency with probability tail_probability.
class SimulatedBackend final : public StorageBackend {
 public:
  SimulatedBackend(std::shared_ptr<PageStore> pages, const StorageProfile& profile);

  BackendKind kind() const noexcept override { return BackendKind::simulated; }
  bool simulated_clock() const noexcept override { return true; }
  Nanos completion_time(NodeId id, Nanos issue) override;
  void reset_timeline() override;

  const StorageProfile& profile() const noexcept { return profile_; }
  std::size_t device_of(NodeId id) const;

  /// Forces (or suppresses) the tail decision per request: the hook sees
  /// the node id and the request's sequence number and returns a value to
  /// override the random draw.
  void set_tail_override(std::function<std::optional<bool>(NodeId, std::uint64_t)> hook);

  std::uint64_t tail_events() const noexcept { return tail_events_; }

 protected:
  void fetch(NodeId id, PageSpan out) override { pages_->read(id, out); }

 private:
  struct Device {
    Nanos channel_free = 0;
    std::priority_queue<Nanos, std::vector<Nanos>, std::greater<>> busy;  // completion times in service
  };

  std::shared_ptr<PageStore> pages_;
  StorageProfile profile_;
  std::mutex mu_;
  std::vector<Device> devices_;
  std::mt19937_64 rng_;
  std::uint64_t seq_ = 0;
  std::uint64_t tail_events_ = 0;
  std::function<std::optional<bool>(NodeId, std::uint64_t)> tail_hook_;
};

std::unique_ptr<StorageBackend> open_backend(BackendKind kind, const std::filesystem::path& index_path,
                                             const std::optional<StorageProfile>& profile = std::nullopt);

ThroughputReport aggregate_throughput_report(const StorageBackend& backend);

}  // namespace ssdann
