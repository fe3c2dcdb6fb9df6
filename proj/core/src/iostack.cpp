#include "ssdann/iostack.hpp"

#include <algorithm>
#include <cstring>
#include <queue>

#include <fmt/core.h>

namespace ssdann {

std::string_view io_mode_name(IoMode mode) {
  return mode == IoMode::worker_level ? "worker_level" : "batch_barrier";
}

IoMode parse_io_mode(std::string_view name) {
  if (name == "worker_level" || name == "worker") return IoMode::worker_level;
  if (name == "batch_barrier" || name == "batch") return IoMode::batch_barrier;
  throw Error(Errc::Config, fmt::format("unknown io mode '{}'", name));
}

IoStack::IoStack(std::size_t workers)
    : workers_(workers),
      slots_(std::make_unique<RequestSlot[]>(workers)),
      signals_(std::make_unique<CompletionSignal[]>(workers)),
      local_(std::make_unique<WorkerLocal[]>(workers)),
      buffers_(workers * 2 * kPageSize) {
  if (workers == 0) throw Error(Errc::InvalidArgument, "I/O stack needs at least one worker");
}

void IoStack::check_worker(std::size_t worker) const {
  if (worker >= workers_) throw Error(Errc::OutOfRange, fmt::format("worker {} of {}", worker, workers_));
}

void IoStack::ring() noexcept {
  doorbell_.fetch_add(1, std::memory_order_release);
  doorbell_.notify_all();
}

std::uint64_t IoStack::submit(std::size_t worker, NodeId node, BufferSlot buffer) {
  check_worker(worker);
  RequestSlot& slot = slots_[worker];
  const SlotState st = slot.state.load(std::memory_order_acquire);
  if (st != SlotState::empty) {
    throw Error(Errc::ProtocolViolation,
                fmt::format("worker {} submitted while its slot is {}", worker, static_cast<int>(st)));
  }
  WorkerLocal& me = local_[worker];
  const std::uint64_t epoch = ++me.next_epoch;
  me.outstanding = epoch;
  me.outstanding_buffer = buffer;
  slot.node = node;
  slot.buffer = buffer;
  slot.epoch = epoch;
  slot.state.store(SlotState::submitted, std::memory_order_release);
  submissions_.fetch_add(1, std::memory_order_relaxed);
  ring();
  return epoch;
}

bool IoStack::completed(std::size_t worker, std::uint64_t epoch) const {
  check_worker(worker);
  const std::uint64_t word = signals_[worker].word.load(std::memory_order_acquire);
  return (word >> 1) == epoch;
}

std::span<const std::byte, kPageSize> IoStack::buffer_view(std::size_t worker, BufferSlot slot) const {
  check_worker(worker);
  return std::span<const std::byte, kPageSize>(
      buffers_.data() + (worker * 2 + static_cast<std::size_t>(slot)) * kPageSize, kPageSize);
}

std::span<const std::byte, kPageSize> IoStack::await_completion(std::size_t worker, std::uint64_t epoch,
                                                                IoMode mode) {
  check_worker(worker);
  WorkerLocal& me = local_[worker];
  if (epoch == 0 || epoch != me.outstanding) {
    throw Error(Errc::StaleWait,
                fmt::format("worker {} waits on epoch {} but its request is epoch {}", worker, epoch, me.outstanding));
  }
  const Nanos t0 = steady_now();
  auto& signal = signals_[worker].word;
  std::uint64_t word = signal.load(std::memory_order_acquire);
  while ((word >> 1) != epoch) {
    signal.wait(word, std::memory_order_acquire);
    word = signal.load(std::memory_order_acquire);
  }
  if (mode == IoMode::batch_barrier && group_) group_->arrive_and_wait();
  me.waits.push_back(steady_now() - t0);
  if (word & 1u) throw Error(Errc::PoisonedCompletion, fmt::format("worker {} epoch {} failed", worker, epoch));
  return buffer_view(worker, me.outstanding_buffer);
}

void IoStack::set_batch_group(std::size_t members) {
  group_ = members > 0 ? std::make_unique<std::barrier<>>(static_cast<std::ptrdiff_t>(members)) : nullptr;
}

void IoStack::leave_batch_group() {
  if (group_) group_->arrive_and_drop();
}

std::size_t IoStack::dispatcher_poll(std::vector<ForwardedRequest>& out) {
  std::size_t n = 0;
  for (std::size_t w = 0; w < workers_; ++w) {
    RequestSlot& slot = slots_[w];
    if (slot.state.load(std::memory_order_acquire) != SlotState::submitted) continue;
    out.push_back({w, slot.node, slot.buffer, slot.epoch});
    slot.state.store(SlotState::in_flight, std::memory_order_relaxed);
    ++n;
  }
  forwarded_.fetch_add(n, std::memory_order_relaxed);
  return n;
}

PageSpan IoStack::dispatch_buffer(const ForwardedRequest& req) {
  return PageSpan(buffers_.data() + (req.worker * 2 + static_cast<std::size_t>(req.buffer)) * kPageSize, kPageSize);
}

void IoStack::publish(const ForwardedRequest& req, bool ok) {
  RequestSlot& slot = slots_[req.worker];
  if (slot.state.load(std::memory_order_relaxed) != SlotState::in_flight || slot.epoch != req.epoch) {
    throw Error(Errc::ProtocolViolation, fmt::format("completion for worker {} epoch {} has no in-flight request",
                                                     req.worker, req.epoch));
  }
  slot.state.store(SlotState::empty, std::memory_order_release);
  auto& signal = signals_[req.worker].word;
  signal.store((req.epoch << 1) | (ok ? 0u : 1u), std::memory_order_release);
  signal.notify_all();
  completions_.fetch_add(1, std::memory_order_relaxed);
  if (!ok) poisoned_.fetch_add(1, std::memory_order_relaxed);
}

void IoStack::complete(const ForwardedRequest& req, std::span<const std::byte> page) {
  if (page.size() != kPageSize) throw Error(Errc::InvalidArgument, "completion payload is not one page");
  std::memcpy(dispatch_buffer(req).data(), page.data(), kPageSize);
  publish(req, true);
}

SlotState IoStack::slot_state(std::size_t worker) const {
  check_worker(worker);
  return slots_[worker].state.load(std::memory_order_acquire);
}

std::uint64_t IoStack::last_epoch(std::size_t worker) const {
  check_worker(worker);
  return local_[worker].next_epoch;
}

IoStats IoStack::stats() const {
  IoStats s;
  s.submissions = submissions_.load();
  s.forwarded = forwarded_.load();
  s.completions = completions_.load();
  s.poisoned = poisoned_.load();
  for (std::size_t w = 0; w < workers_; ++w) {
    s.waits.insert(s.waits.end(), local_[w].waits.begin(), local_[w].waits.end());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

Dispatcher::Dispatcher(IoStack& io, StorageBackend& backend, DispatcherOptions opts)
    : io_(io), backend_(backend), opts_(opts) {
  thread_ = std::thread([this] { run(); });
}

Dispatcher::~Dispatcher() { stop(); }

void Dispatcher::stop() {
  if (!thread_.joinable()) return;
  stop_.store(true, std::memory_order_release);
  io_.ring();
  thread_.join();
}

void Dispatcher::serve(const ForwardedRequest& req) {
  bool ok = true;
  try {
    backend_.read_page(req.node, io_.dispatch_buffer(req));
  } catch (const Error&) {
    ok = false;
  }
  io_.publish(req, ok);
}

void Dispatcher::run() {
  struct Pending {
    Nanos at;
    std::uint64_t seq;
    ForwardedRequest req;
    bool operator>(const Pending& o) const { return at > o.at || (at == o.at && seq > o.seq); }
  };
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;
  std::vector<ForwardedRequest> batch;
  std::uint64_t seq = 0;
  std::size_t idle = 0;
  const bool timed = backend_.simulated_clock();

  while (!stop_.load(std::memory_order_acquire)) {
    const std::uint64_t bell = io_.doorbell();
    batch.clear();
    const std::size_t n = io_.dispatcher_poll(batch);
    for (const auto& req : batch) {
      if (!timed) {
        serve(req);
        continue;
      }
      Nanos at = sim_now_.load(std::memory_order_relaxed);
      try {
        at = backend_.completion_time(req.node, at);
      } catch (const Error&) {
        io_.publish(req, false);
        continue;
      }
      pending.push({at, seq++, req});
    }
    if (!pending.empty()) {
      const Pending next = pending.top();
      pending.pop();
      sim_now_.store(std::max(sim_now_.load(std::memory_order_relaxed), next.at), std::memory_order_relaxed);
      serve(next.req);
      idle = 0;
      continue;
    }
    if (n > 0) {
      idle = 0;
      continue;
    }
    if (++idle < opts_.spin_polls) {
      std::this_thread::yield();
      continue;
    }
    io_.wait_doorbell(bell);
  }
  // Anything still queued is failed so no worker waits forever.
  while (!pending.empty()) {
    io_.publish(pending.top().req, false);
    pending.pop();
  }
}

}  // namespace ssdann
