#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bboost {

enum class SyncMode : std::uint8_t { Conventional, Boosted };

std::string_view to_string(SyncMode m);

struct GracePeriodTimeout : std::runtime_error {
  GracePeriodTimeout() : std::runtime_error("grace period wait timed out") {}
};

struct ResourceExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Outcome of one synchronize call.
struct WaitStats {
  SyncMode mode = SyncMode::Conventional;  // mode the call ran under
  bool covered = false;        // returned on another caller's grace period
  std::uint64_t spins = 0;     // failed wait-lock acquisitions
  std::uint64_t sleeps = 0;    // blocking waits entered
  std::uint64_t ctx_switches = 0;  // voluntary, this thread, during the call
  std::chrono::nanoseconds waited{0};
  // Conventional only: position taken in the wait queue and in the order of
  // returns, both counted per domain from 1.
  std::uint64_t enqueue_order = 0;
  std::uint64_t return_order = 0;
};

struct DomainStats {
  std::uint64_t grace_periods = 0;
  std::uint64_t conventional_grace_periods = 0;
  std::uint64_t boosted_grace_periods = 0;
  std::uint64_t covered_returns = 0;
  std::uint64_t total_wait_ns = 0;
  std::uint64_t spin_iterations = 0;
  std::uint64_t blocked_sleeps = 0;
  std::uint64_t timeouts = 0;
};

struct DomainOptions {
  std::size_t max_slots = 64;
  std::chrono::milliseconds conventional_timeout{1000};
  // Shortest grace period; models the kernel's wait for every CPU to pass a
  // quiescent state even when no reader is inside a section.
  std::chrono::microseconds min_grace_period{0};
};

// Epoch-based grace periods over a bounded table of reader slots. A slot's
// counter is odd while its reader is inside a read-side section.
class GracePeriodDomain {
 public:
  explicit GracePeriodDomain(DomainOptions opts = {});
  ~GracePeriodDomain();
  GracePeriodDomain(const GracePeriodDomain&) = delete;
  GracePeriodDomain& operator=(const GracePeriodDomain&) = delete;

  // Throws ResourceExhausted when the table is full.
  std::size_t register_reader();
  void unregister_reader(std::size_t slot);

  void reader_enter(std::size_t slot);
  void reader_exit(std::size_t slot);
  std::uint64_t slot_counter(std::size_t slot) const;

  // Algorithm 1: FIFO wait queue behind a spin-style wait-lock; the head
  // polls reader slots. Throws GracePeriodTimeout.
  WaitStats synchronize_conventional();
  // Algorithm 2: barriers, sequence snapshot, blocking lock, reader drain.
  WaitStats synchronize_boosted();
  // Dispatches on the mode read once at entry.
  WaitStats synchronize();

  SyncMode set_mode(SyncMode m);
  SyncMode mode() const { return mode_.load(std::memory_order_acquire); }

  DomainStats stats() const;
  // rcu_seq style: low bit set while a boosted grace period runs.
  std::uint64_t boosted_sequence() const { return boosted_seq_.load(); }
  std::uint64_t conventional_sequence() const { return conv_seq_.load(); }

  const DomainOptions& options() const { return opts_; }

 private:
  struct Slot;
  struct Waiter;

  void wait_lock();
  void wait_unlock();
  void account(const WaitStats& s);
  void hold_floor(std::chrono::steady_clock::time_point gp_begin) const;

  DomainOptions opts_;
  std::unique_ptr<Slot[]> slots_;
  std::atomic<SyncMode> mode_{SyncMode::Conventional};

  // Conventional path.
  alignas(64) std::atomic<std::uint32_t> ticket_next_{0};
  alignas(64) std::atomic<std::uint32_t> ticket_serving_{0};
  std::vector<Waiter*> queue_;  // guarded by the wait-lock
  std::uint64_t enqueued_ = 0, returned_ = 0;  // guarded by the wait-lock
  std::atomic<std::uint64_t> conv_seq_{0};

  // Boosted path.
  alignas(64) std::atomic<std::uint32_t> gp_lock_{0};
  alignas(64) std::atomic<std::uint64_t> boosted_seq_{0};
  alignas(64) std::atomic<std::int32_t> pending_{0};

  mutable std::mutex slot_mu_;  // registration only

  struct Counters {
    std::atomic<std::uint64_t> gp{0}, conv_gp{0}, boosted_gp{0}, covered{0},
        wait_ns{0}, spins{0}, sleeps{0}, timeouts{0};
  } counters_;
};

// RAII slot registration for reader threads.
class ReaderSlot {
 public:
  explicit ReaderSlot(GracePeriodDomain& d) : d_(d), slot_(d.register_reader()) {}
  ~ReaderSlot() { d_.unregister_reader(slot_); }
  ReaderSlot(const ReaderSlot&) = delete;
  ReaderSlot& operator=(const ReaderSlot&) = delete;

  void enter() { d_.reader_enter(slot_); }
  void exit() { d_.reader_exit(slot_); }
  std::size_t index() const { return slot_; }

 private:
  GracePeriodDomain& d_;
  std::size_t slot_;
};

enum class BenchMode : std::uint8_t { Conventional, Boosted, Toggle };

std::string_view to_string(BenchMode m);

struct BenchOptions {
  std::size_t readers = 4;
  std::size_t synchronizers = 1;
  std::size_t iterations = 100;
  BenchMode mode = BenchMode::Conventional;
  // Reader section length is drawn uniformly from this range.
  std::chrono::microseconds section_min{50};
  std::chrono::microseconds section_max{200};
  std::size_t thread_budget = 256;
  std::uint64_t seed = 0;
};

struct BenchReport {
  BenchMode mode = BenchMode::Conventional;
  std::size_t readers = 0;
  std::size_t synchronizers = 0;
  std::size_t iterations = 0;
  std::size_t samples = 0;
  double mean_ns = 0;
  double median_ns = 0;
  double p99_ns = 0;
  std::uint64_t spin_iterations = 0;
  std::uint64_t context_switches = 0;
  // spins for conventional runs, context switches for boosted ones, their sum
  // for toggled runs.
  std::uint64_t cpu_burn_proxy = 0;
  std::uint64_t grace_periods = 0;
  std::uint64_t covered_returns = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t reader_sections = 0;
  unsigned hardware_threads = 0;
  double wall_ms = 0;
};

// Throws ResourceExhausted when readers + synchronizers exceed the budget,
// std::invalid_argument on zero counts.
BenchReport bench_contention(const BenchOptions& opts);

std::string bench_to_json(const BenchReport& r);
std::string bench_to_table(const std::vector<BenchReport>& rows);

}  // namespace bboost
