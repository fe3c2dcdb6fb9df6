#pragma once

#include <array>
#include <atomic>
#include <barrier>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <thread>
#include <vector>

#include "ssdann/common.hpp"
#include "ssdann/storage.hpp"

namespace ssdann {

enum class SlotState : std::uint32_t { empty = 0, submitted = 1, in_flight = 2 };
enum class BufferSlot : std::uint8_t { A = 0, B = 1 };
enum class IoMode { worker_level, batch_barrier };

inline BufferSlot other(BufferSlot s) { return s == BufferSlot::A ? BufferSlot::B : BufferSlot::A; }
std::string_view io_mode_name(IoMode mode);
IoMode parse_io_mode(std::string_view name);

struct ForwardedRequest {
  std::size_t worker = 0;
  NodeId node = kInvalidNode;
  BufferSlot buffer = BufferSlot::A;
  std::uint64_t epoch = 0;
};

struct IoStats {
  std::uint64_t submissions = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t completions = 0;
  std::uint64_t poisoned = 0;
  std::vector<Nanos> waits;  // await_completion durations, all workers
};

/// Per-worker request array, completion-signal array and double page
/// buffers, shared between N worker contexts and one dispatcher.
///
/// Ordering contract: the dispatcher writes the page into the worker's
/// buffer before it release-stores the completion word; a worker
/// acquire-loads the word before it reads the buffer. Each request slot
/// and signal is single-producer/single-consumer.
class IoStack {
 public:
  explicit IoStack(std::size_t workers);
  IoStack(const IoStack&) = delete;
  IoStack& operator=(const IoStack&) = delete;

  std::size_t workers() const noexcept { return workers_; }

  // --- worker side -------------------------------------------------------

  /// Posts a read of `node` into the worker's `buffer`. Returns the epoch
  /// token of the request. Throws ProtocolViolation if the worker's slot is
  /// not empty.
  std::uint64_t submit(std::size_t worker, NodeId node, BufferSlot buffer);

  /// Non-blocking: true once the completion for `epoch` is visible.
  bool completed(std::size_t worker, std::uint64_t epoch) const;

  /// Blocks until the request completes (worker_level) or until every
  /// member of the batch group has completed its outstanding request
  /// (batch_barrier), then returns the filled buffer.
  std::span<const std::byte, kPageSize> await_completion(std::size_t worker, std::uint64_t epoch, IoMode mode);

  std::span<const std::byte, kPageSize> buffer_view(std::size_t worker, BufferSlot slot) const;

  /// Batch-barrier membership. The group is fixed for a run; a worker that
  /// runs out of work leaves so the others are not held back by it.
  void set_batch_group(std::size_t members);
  void leave_batch_group();

  // --- dispatcher side ---------------------------------------------------

  /// Moves every submitted slot to in_flight and appends it to `out`.
  std::size_t dispatcher_poll(std::vector<ForwardedRequest>& out);

  PageSpan dispatch_buffer(const ForwardedRequest& req);

  /// Marks the request done; the page must already be in its buffer.
  /// A failed request is published as poisoned.
  void publish(const ForwardedRequest& req, bool ok = true);

  /// Copies `page` into the request's buffer, then publishes.
  void complete(const ForwardedRequest& req, std::span<const std::byte> page);

  std::uint64_t doorbell() const noexcept { return doorbell_.load(std::memory_order_acquire); }
  void wait_doorbell(std::uint64_t seen) const { doorbell_.wait(seen, std::memory_order_acquire); }
  void ring() noexcept;

  // --- inspection ----------------------------------------------------------

  SlotState slot_state(std::size_t worker) const;
  std::uint64_t last_epoch(std::size_t worker) const;
  /// Merged counters; call once the workers are quiescent.
  IoStats stats() const;

 private:
  struct alignas(64) RequestSlot {
    std::atomic<SlotState> state{SlotState::empty};
    NodeId node = kInvalidNode;
    BufferSlot buffer = BufferSlot::A;
    std::uint64_t epoch = 0;
  };
  struct alignas(64) CompletionSignal {
    // (epoch << 1) | poisoned
    std::atomic<std::uint64_t> word{0};
  };
  struct alignas(64) WorkerLocal {
    std::uint64_t next_epoch = 0;
    std::uint64_t outstanding = 0;
    BufferSlot outstanding_buffer = BufferSlot::A;
    std::vector<Nanos> waits;
  };

  void check_worker(std::size_t worker) const;

  std::size_t workers_;
  std::unique_ptr<RequestSlot[]> slots_;
  std::unique_ptr<CompletionSignal[]> signals_;
  std::unique_ptr<WorkerLocal[]> local_;
  std::vector<std::byte> buffers_;  // workers x 2 x 4096
  std::unique_ptr<std::barrier<>> group_;
  std::atomic<std::uint64_t> doorbell_{0};
  std::atomic<std::uint64_t> submissions_{0};
  std::atomic<std::uint64_t> forwarded_{0};
  std::atomic<std::uint64_t> completions_{0};
  std::atomic<std::uint64_t> poisoned_{0};
};

struct DispatcherOptions {
  /// Empty polls before the dispatcher parks on the doorbell.
  std::size_t spin_polls = 16;
};

/// Dispatcher thread: forwards submitted requests to the backend and
/// publishes completions. On a simulated-clock backend, completions are
/// released in order of their simulated completion time and the simulated
/// clock advances to each released completion.
class Dispatcher {
 public:
  Dispatcher(IoStack& io, StorageBackend& backend, DispatcherOptions opts = {});
  ~Dispatcher();
  Dispatcher(const Dispatcher&) = delete;
  Dispatcher& operator=(const Dispatcher&) = delete;

  void stop();
  Nanos simulated_now() const noexcept { return sim_now_.load(std::memory_order_relaxed); }

 private:
  void run();
  void serve(const ForwardedRequest& req);

  IoStack& io_;
  StorageBackend& backend_;
  DispatcherOptions opts_;
  std::atomic<bool> stop_{false};
  std::atomic<Nanos> sim_now_{0};
  std::thread thread_;
};

}  // namespace ssdann
