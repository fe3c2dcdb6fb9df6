#include "replay.hpp"

#include <algorithm>
#include <array>
#include <queue>

namespace ssdann::detail {

namespace {

struct Event {
  enum class Kind : std::uint8_t { resume, forward, complete };
  Nanos at;
  std::uint64_t seq;
  Kind kind;
  std::size_t worker;
  ForwardedRequest req;

  bool operator>(const Event& o) const { return at > o.at || (at == o.at && seq > o.seq); }
};

enum class WorkerState { running, waiting, at_barrier, done };

struct Worker {
  WorkerState state = WorkerState::running;
  long query = -1;
  std::size_t pc = 0;
  std::uint64_t epoch = 0;
  std::uint32_t io_step = 0;  // step of the outstanding request
  Nanos wait_start = 0;
};

class Replay {
 public:
  Replay(std::span<const OpScript> scripts, std::span<StepTrace> traces, StorageBackend& backend,
         std::size_t workers, IoMode mode, Nanos dispatch_delay)
      : scripts_(scripts),
        traces_(traces),
        backend_(backend),
        mode_(mode),
        delay_(dispatch_delay),
        io_(workers),
        workers_(std::min(workers, scripts.size())),
        origin_(backend.horizon()) {}

  ReplayStats run() {
    members_ = workers_.size();
    for (std::size_t w = 0; w < workers_.size(); ++w) push(origin_, Event::Kind::resume, w, {});
    Nanos last = origin_;
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      last = std::max(last, ev.at);
      switch (ev.kind) {
        case Event::Kind::resume:
          step_worker(ev.worker, ev.at);
          break;
        case Event::Kind::forward:
          forward(ev.at);
          break;
        case Event::Kind::complete:
          complete(ev.req, ev.at);
          break;
      }
    }
    ReplayStats s;
    s.makespan = last - origin_;
    s.io = io_.stats();
    s.io.waits = std::move(waits_);
    return s;
  }

 private:
  void push(Nanos at, Event::Kind kind, std::size_t worker, ForwardedRequest req) {
    events_.push({at, seq_++, kind, worker, req});
  }

  StepRecord& record(std::size_t w, std::uint32_t step) {
    return traces_[static_cast<std::size_t>(workers_[w].query)].steps[step - 1];
  }

  void step_worker(std::size_t w, Nanos t) {
    Worker& me = workers_[w];
    for (;;) {
      if (me.query < 0) {
        if (next_ >= scripts_.size()) {
          me.state = WorkerState::done;
          --members_;
          try_release(t);
          return;
        }
        me.query = static_cast<long>(next_++);
        me.pc = 0;
        traces_[static_cast<std::size_t>(me.query)].start = t - origin_;
      }
      const OpScript& script = scripts_[static_cast<std::size_t>(me.query)];
      StepTrace& trace = traces_[static_cast<std::size_t>(me.query)];
      if (me.pc == script.size()) {
        trace.end = t - origin_;
        me.query = -1;
        continue;
      }
      const IoOp& op = script[me.pc];
      switch (op.kind) {
        case IoOp::Kind::submit:
          me.epoch = io_.submit(w, op.node, op.buffer);
          me.io_step = op.step;
          if (op.step >= 1 && op.step <= trace.steps.size()) record(w, op.step).io_issue = t - origin_;
          if (delay_ > 0) {
            push(t + delay_, Event::Kind::forward, w, {});
          } else {
            forward(t);
          }
          ++me.pc;
          break;
        case IoOp::Kind::wait:
          me.wait_start = t;
          if (mode_ == IoMode::batch_barrier) {
            me.state = WorkerState::at_barrier;
            ++arrived_;
            try_release(t);
            return;
          }
          if (io_.completed(w, me.epoch)) {
            finish_wait(w, t);
            break;
          }
          me.state = WorkerState::waiting;
          return;
        case IoOp::Kind::compute:
          if (op.step >= 1 && op.step <= trace.steps.size()) {
            record(w, op.step).compute += op.cost;
            trace.compute_spans.push_back({t - origin_, t + op.cost - origin_});
          }
          ++me.pc;
          if (op.cost > 0) {
            push(t + op.cost, Event::Kind::resume, w, {});
            return;
          }
          break;
      }
    }
  }

  void finish_wait(std::size_t w, Nanos t) {
    Worker& me = workers_[w];
    const IoOp& op = scripts_[static_cast<std::size_t>(me.query)][me.pc];
    const Nanos waited = t - me.wait_start;
    if (op.step >= 1 && op.step <= traces_[static_cast<std::size_t>(me.query)].steps.size()) {
      record(w, op.step).io_wait = waited;
    }
    waits_.push_back(waited);
    me.state = WorkerState::running;
    ++me.pc;
  }

  void forward(Nanos t) {
    batch_.clear();
    io_.dispatcher_poll(batch_);
    for (const auto& req : batch_) push(backend_.completion_time(req.node, t), Event::Kind::complete, req.worker, req);
  }

  void complete(const ForwardedRequest& req, Nanos t) {
    bool ok = true;
    try {
      backend_.read_page(req.node, io_.dispatch_buffer(req));
    } catch (const Error&) {
      ok = false;
    }
    io_.publish(req, ok);
    Worker& me = workers_[req.worker];
    const StepTrace& trace = traces_[static_cast<std::size_t>(me.query)];
    if (me.io_step >= 1 && me.io_step <= trace.steps.size()) record(req.worker, me.io_step).io_complete = t - origin_;
    if (mode_ == IoMode::batch_barrier) {
      try_release(t);
    } else if (me.state == WorkerState::waiting && io_.completed(req.worker, me.epoch)) {
      finish_wait(req.worker, t);
      push(t, Event::Kind::resume, req.worker, {});
    }
  }

  // The barrier opens once every remaining member has arrived and every
  // arrived member's request has completed.
  void try_release(Nanos t) {
    if (arrived_ == 0 || arrived_ < members_) return;
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      if (workers_[w].state == WorkerState::at_barrier && !io_.completed(w, workers_[w].epoch)) return;
    }
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      if (workers_[w].state != WorkerState::at_barrier) continue;
      finish_wait(w, t);
      push(t, Event::Kind::resume, w, {});
    }
    arrived_ = 0;
  }

  std::span<const OpScript> scripts_;
  std::span<StepTrace> traces_;
  StorageBackend& backend_;
  IoMode mode_;
  Nanos delay_;
  IoStack io_;
  std::vector<Worker> workers_;
  Nanos origin_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  std::size_t next_ = 0;
  std::size_t members_ = 0;
  std::size_t arrived_ = 0;
  std::vector<ForwardedRequest> batch_;
  std::vector<Nanos> waits_;
};

}  // namespace

ReplayStats replay_scripts(std::span<const OpScript> scripts, std::span<StepTrace> traces, StorageBackend& backend,
                           std::size_t workers, IoMode mode, Nanos dispatch_delay) {
  if (workers == 0) throw Error(Errc::InvalidArgument, "workers must be at least 1");
  if (scripts.empty()) return {};
  return Replay(scripts, traces, backend, workers, mode, dispatch_delay).run();
}

}  // namespace ssdann::detail
