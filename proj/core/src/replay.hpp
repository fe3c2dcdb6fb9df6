#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssdann/search.hpp"

namespace ssdann::detail {

// One engine-visible event, recorded while a query runs against a direct
// page source and later replayed on the simulated clock.
struct IoOp {
  enum class Kind : std::uint8_t { submit, wait, compute };
  Kind kind;
  BufferSlot buffer = BufferSlot::A;
  std::uint32_t step = 0;
  NodeId node = kInvalidNode;
  Nanos cost = 0;
};

using OpScript = std::vector<IoOp>;

struct ReplayStats {
  Nanos makespan = 0;
  IoStats io;
};

// Discrete-event replay of per-query scripts over `workers` workers sharing
// one IoStack and the backend's queue model. Fills the timing fields of
// `traces` (relative to the backend horizon at entry).
ReplayStats replay_scripts(std::span<const OpScript> scripts, std::span<StepTrace> traces, StorageBackend& backend,
                           std::size_t workers, IoMode mode, Nanos dispatch_delay);

}  // namespace ssdann::detail
