#include "bboost/sync_booster.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace bboost {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t voluntary_switches() {
  rusage ru{};
  getrusage(RUSAGE_THREAD, &ru);
  return static_cast<std::uint64_t>(ru.ru_nvcsw);
}

thread_local std::uint64_t t_spins = 0;

inline void cpu_relax() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_ia32_pause();
#endif
}

void full_fence() { std::atomic_thread_fence(std::memory_order_seq_cst); }

// Has the sequence passed `snap`? Signed difference tolerates wraparound.
bool seq_done(std::uint64_t cur, std::uint64_t snap) {
  return static_cast<std::int64_t>(cur - snap) >= 0;
}

}  // namespace

struct GracePeriodDomain::Slot {
  alignas(64) std::atomic<std::uint64_t> ctr{0};
  std::atomic<bool> blocked{false};
  std::atomic<bool> in_use{false};
};

struct GracePeriodDomain::Waiter {
  std::uint64_t ticket;
};

std::string_view to_string(SyncMode m) {
  return m == SyncMode::Boosted ? "boosted" : "conventional";
}

std::string_view to_string(BenchMode m) {
  switch (m) {
    case BenchMode::Conventional: return "conventional";
    case BenchMode::Boosted: return "boosted";
    case BenchMode::Toggle: return "toggle";
  }
  return "?";
}

GracePeriodDomain::GracePeriodDomain(DomainOptions opts)
    : opts_(opts), slots_(new Slot[opts.max_slots]) {
  if (opts_.max_slots == 0) throw std::invalid_argument("domain needs at least one slot");
  queue_.reserve(64);
}

GracePeriodDomain::~GracePeriodDomain() = default;

std::size_t GracePeriodDomain::register_reader() {
  std::lock_guard lk(slot_mu_);
  for (std::size_t i = 0; i < opts_.max_slots; ++i) {
    if (!slots_[i].in_use.load(std::memory_order_relaxed)) {
      slots_[i].in_use.store(true, std::memory_order_seq_cst);
      return i;
    }
  }
  throw ResourceExhausted("reader slot table full (" + std::to_string(opts_.max_slots) + ")");
}

void GracePeriodDomain::unregister_reader(std::size_t slot) {
  std::lock_guard lk(slot_mu_);
  assert((slots_[slot].ctr.load() & 1) == 0 && "unregistering inside a section");
  slots_[slot].in_use.store(false, std::memory_order_seq_cst);
}

void GracePeriodDomain::reader_enter(std::size_t slot) {
  auto& s = slots_[slot];
  [[maybe_unused]] const auto before = s.ctr.fetch_add(1, std::memory_order_seq_cst);
  assert((before & 1) == 0 && "nested reader_enter");
}

void GracePeriodDomain::reader_exit(std::size_t slot) {
  auto& s = slots_[slot];
  [[maybe_unused]] const auto before = s.ctr.fetch_add(1, std::memory_order_seq_cst);
  assert((before & 1) == 1 && "reader_exit without enter");
  // A boosted grace period may be waiting on this slot.
  if (s.blocked.load(std::memory_order_seq_cst) && s.blocked.exchange(false)) {
    if (pending_.fetch_sub(1) == 1) pending_.notify_all();
  }
}

std::uint64_t GracePeriodDomain::slot_counter(std::size_t slot) const {
  return slots_[slot].ctr.load();
}

SyncMode GracePeriodDomain::set_mode(SyncMode m) {
  return mode_.exchange(m, std::memory_order_acq_rel);
}

WaitStats GracePeriodDomain::synchronize() {
  return mode() == SyncMode::Boosted ? synchronize_boosted() : synchronize_conventional();
}

// Ticket spinlock; returns after counting failed acquisition attempts.
void GracePeriodDomain::wait_lock() {
  const auto ticket = ticket_next_.fetch_add(1, std::memory_order_relaxed);
  std::uint64_t spins = 0;
  while (ticket_serving_.load(std::memory_order_acquire) != ticket) {
    ++spins;
    if (spins % 16 == 0) {
      std::this_thread::yield();
    } else {
      cpu_relax();
    }
  }
  if (spins) counters_.spins.fetch_add(spins, std::memory_order_relaxed);
  t_spins += spins;
}

void GracePeriodDomain::wait_unlock() {
  ticket_serving_.fetch_add(1, std::memory_order_release);
}

void GracePeriodDomain::hold_floor(Clock::time_point gp_begin) const {
  if (opts_.min_grace_period.count() <= 0) return;
  const auto until = gp_begin + opts_.min_grace_period;
  if (Clock::now() < until) std::this_thread::sleep_until(until);
}

void GracePeriodDomain::account(const WaitStats& s) {
  counters_.wait_ns.fetch_add(static_cast<std::uint64_t>(s.waited.count()),
                              std::memory_order_relaxed);
  counters_.sleeps.fetch_add(s.sleeps, std::memory_order_relaxed);
  if (s.covered) counters_.covered.fetch_add(1, std::memory_order_relaxed);
}

WaitStats GracePeriodDomain::synchronize_conventional() {
  WaitStats st;
  st.mode = SyncMode::Conventional;
  const auto nv0 = voluntary_switches();
  const auto begin = Clock::now();
  const auto deadline = begin + opts_.conventional_timeout;
  t_spins = 0;

  Waiter me{};
  wait_lock();
  queue_.push_back(&me);
  st.enqueue_order = ++enqueued_;
  wait_unlock();

  auto leave = [&] {
    wait_lock();
    queue_.erase(std::find(queue_.begin(), queue_.end(), &me));
    st.return_order = ++returned_;
    wait_unlock();
  };
  auto finish = [&] {
    st.spins = t_spins;
    st.ctx_switches = voluntary_switches() - nv0;
    st.waited = Clock::now() - begin;
    account(st);
  };
  auto timed_out = [&] {
    counters_.timeouts.fetch_add(1, std::memory_order_relaxed);
    finish();
    throw GracePeriodTimeout();
  };

  // Wait for our turn at the head of the queue.
  while (true) {
    wait_lock();
    const bool head = queue_.front() == &me;
    wait_unlock();
    if (head) break;
    if (Clock::now() > deadline) {
      leave();
      timed_out();
    }
    std::this_thread::yield();
  }

  // Our grace period: every slot odd now must move on.
  conv_seq_.fetch_add(1, std::memory_order_seq_cst);
  const auto gp_begin = Clock::now();
  std::vector<std::pair<std::size_t, std::uint64_t>> busy;
  for (std::size_t i = 0; i < opts_.max_slots; ++i) {
    if (!slots_[i].in_use.load()) continue;
    const auto c = slots_[i].ctr.load(std::memory_order_seq_cst);
    if (c & 1) busy.emplace_back(i, c);
  }
  for (const auto& [i, c] : busy) {
    while (slots_[i].ctr.load(std::memory_order_seq_cst) == c) {
      if (Clock::now() > deadline) {
        conv_seq_.fetch_add(1, std::memory_order_seq_cst);
        leave();
        timed_out();
      }
      std::this_thread::yield();
    }
  }
  hold_floor(gp_begin);
  full_fence();
  conv_seq_.fetch_add(1, std::memory_order_seq_cst);
  counters_.gp.fetch_add(1, std::memory_order_relaxed);
  counters_.conv_gp.fetch_add(1, std::memory_order_relaxed);
  leave();
  finish();
  return st;
}

WaitStats GracePeriodDomain::synchronize_boosted() {
  WaitStats st;
  st.mode = SyncMode::Boosted;
  const auto nv0 = voluntary_switches();
  const auto begin = Clock::now();

  full_fence();
  // Smallest even value reached only by a grace period that starts after now.
  const auto snap = (boosted_seq_.load(std::memory_order_seq_cst) + 3) & ~std::uint64_t{1};
  full_fence();

  bool locked = false;
  while (true) {
    std::uint32_t expect = 0;
    if (gp_lock_.compare_exchange_strong(expect, 1, std::memory_order_acquire)) {
      locked = true;
      break;
    }
    if (seq_done(boosted_seq_.load(std::memory_order_seq_cst), snap)) break;
    gp_lock_.wait(1, std::memory_order_acquire);
    ++st.sleeps;
  }

  if (locked) {
    if (seq_done(boosted_seq_.load(std::memory_order_seq_cst), snap)) {
      st.covered = true;
    } else {
      boosted_seq_.fetch_add(1, std::memory_order_seq_cst);
      const auto gp_begin = Clock::now();

      // Drain: every reader inside a section now reports its exit.
      std::vector<std::pair<std::size_t, std::uint64_t>> busy;
      for (std::size_t i = 0; i < opts_.max_slots; ++i) {
        if (!slots_[i].in_use.load()) continue;
        const auto c = slots_[i].ctr.load(std::memory_order_seq_cst);
        if (c & 1) busy.emplace_back(i, c);
      }
      if (!busy.empty()) {
        pending_.store(static_cast<std::int32_t>(busy.size()), std::memory_order_seq_cst);
        for (const auto& [i, c] : busy) {
          auto& s = slots_[i];
          s.blocked.store(true, std::memory_order_seq_cst);
          if (s.ctr.load(std::memory_order_seq_cst) != c && s.blocked.exchange(false)) {
            pending_.fetch_sub(1);
          }
        }
        for (auto p = pending_.load(); p != 0; p = pending_.load()) {
          pending_.wait(p);
          ++st.sleeps;
        }
      }
      hold_floor(gp_begin);
      full_fence();
      boosted_seq_.fetch_add(1, std::memory_order_seq_cst);
      counters_.gp.fetch_add(1, std::memory_order_relaxed);
      counters_.boosted_gp.fetch_add(1, std::memory_order_relaxed);
    }
    full_fence();
    gp_lock_.store(0, std::memory_order_release);
    gp_lock_.notify_all();
    full_fence();
  } else {
    st.covered = true;
  }

  st.ctx_switches = voluntary_switches() - nv0;
  st.waited = Clock::now() - begin;
  account(st);
  return st;
}

DomainStats GracePeriodDomain::stats() const {
  DomainStats s;
  s.grace_periods = counters_.gp.load();
  s.conventional_grace_periods = counters_.conv_gp.load();
  s.boosted_grace_periods = counters_.boosted_gp.load();
  s.covered_returns = counters_.covered.load();
  s.total_wait_ns = counters_.wait_ns.load();
  s.spin_iterations = counters_.spins.load();
  s.blocked_sleeps = counters_.sleeps.load();
  s.timeouts = counters_.timeouts.load();
  return s;
}

BenchReport bench_contention(const BenchOptions& opts) {
  if (opts.readers == 0 || opts.synchronizers == 0 || opts.iterations == 0) {
    throw std::invalid_argument("readers, synchronizers and iterations must be >= 1");
  }
  const auto threads = opts.readers + opts.synchronizers + (opts.mode == BenchMode::Toggle);
  if (threads > opts.thread_budget) {
    throw ResourceExhausted("bench needs " + std::to_string(threads) +
                            " threads, budget is " + std::to_string(opts.thread_budget));
  }
  if (opts.section_max < opts.section_min) {
    throw std::invalid_argument("section_max < section_min");
  }

  DomainOptions dopts;
  dopts.max_slots = std::max<std::size_t>(opts.readers, 1);
  GracePeriodDomain domain(dopts);
  domain.set_mode(opts.mode == BenchMode::Boosted ? SyncMode::Boosted : SyncMode::Conventional);

  std::atomic<bool> go{false};
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> sections{0};
  std::vector<std::vector<std::int64_t>> lat(opts.synchronizers);
  std::vector<std::uint64_t> spins(opts.synchronizers), switches(opts.synchronizers);

  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t r = 0; r < opts.readers; ++r) {
    pool.emplace_back([&, r] {
      ReaderSlot slot(domain);
      std::mt19937_64 rng(opts.seed * 1000003 + r);
      std::uniform_int_distribution<std::int64_t> hold(opts.section_min.count(),
                                                       opts.section_max.count());
      while (!go.load()) std::this_thread::yield();
      std::uint64_t n = 0;
      while (!stop.load(std::memory_order_relaxed)) {
        slot.enter();
        std::this_thread::sleep_for(std::chrono::microseconds(hold(rng)));
        slot.exit();
        ++n;
        std::this_thread::yield();
      }
      sections.fetch_add(n);
    });
  }
  std::atomic<std::size_t> syncers_left{opts.synchronizers};
  for (std::size_t s = 0; s < opts.synchronizers; ++s) {
    pool.emplace_back([&, s] {
      auto& mine = lat[s];
      mine.reserve(opts.iterations);
      while (!go.load()) std::this_thread::yield();
      for (std::size_t i = 0; i < opts.iterations; ++i) {
        const auto t0 = Clock::now();
        try {
          const auto w = domain.synchronize();
          spins[s] += w.spins;
          switches[s] += w.ctx_switches;
        } catch (const GracePeriodTimeout&) {
          // counted by the domain; the latency still goes in
        }
        mine.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count());
      }
      syncers_left.fetch_sub(1);
    });
  }
  if (opts.mode == BenchMode::Toggle) {
    pool.emplace_back([&] {
      while (!go.load()) std::this_thread::yield();
      bool boosted = false;
      while (syncers_left.load() != 0) {
        boosted = !boosted;
        domain.set_mode(boosted ? SyncMode::Boosted : SyncMode::Conventional);
        std::this_thread::sleep_for(std::chrono::microseconds(100));
      }
    });
  }

  const auto wall0 = Clock::now();
  go.store(true);
  for (std::size_t i = opts.readers; i < pool.size(); ++i) pool[i].join();
  stop.store(true);
  for (std::size_t i = 0; i < opts.readers; ++i) pool[i].join();
  const auto wall = Clock::now() - wall0;

  std::vector<std::int64_t> all;
  for (auto& v : lat) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());

  BenchReport rep;
  rep.mode = opts.mode;
  rep.readers = opts.readers;
  rep.synchronizers = opts.synchronizers;
  rep.iterations = opts.iterations;
  rep.samples = all.size();
  if (!all.empty()) {
    rep.mean_ns = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
    const auto n = all.size();
    rep.median_ns = n % 2 ? static_cast<double>(all[n / 2])
                          : (static_cast<double>(all[n / 2 - 1]) + static_cast<double>(all[n / 2])) / 2;
    const auto idx = std::min(n - 1, static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n))) - 1);
    rep.p99_ns = static_cast<double>(all[idx]);
  }
  rep.spin_iterations = std::accumulate(spins.begin(), spins.end(), std::uint64_t{0});
  rep.context_switches = std::accumulate(switches.begin(), switches.end(), std::uint64_t{0});
  switch (opts.mode) {
    case BenchMode::Conventional: rep.cpu_burn_proxy = rep.spin_iterations; break;
    case BenchMode::Boosted: rep.cpu_burn_proxy = rep.context_switches; break;
    case BenchMode::Toggle: rep.cpu_burn_proxy = rep.spin_iterations + rep.context_switches; break;
  }
  const auto ds = domain.stats();
  rep.grace_periods = ds.grace_periods;
  rep.covered_returns = ds.covered_returns;
  rep.timeouts = ds.timeouts;
  rep.reader_sections = sections.load();
  rep.hardware_threads = std::thread::hardware_concurrency();
  rep.wall_ms = std::chrono::duration<double, std::milli>(wall).count();
  return rep;
}

std::string bench_to_json(const BenchReport& r) {
  nlohmann::ordered_json j{
      {"mode", to_string(r.mode)},
      {"readers", r.readers},
      {"synchronizers", r.synchronizers},
      {"iterations", r.iterations},
      {"samples", r.samples},
      {"mean_ns", r.mean_ns},
      {"median_ns", r.median_ns},
      {"p99_ns", r.p99_ns},
      {"spin_iterations", r.spin_iterations},
      {"context_switches", r.context_switches},
      {"cpu_burn_proxy", r.cpu_burn_proxy},
      {"grace_periods", r.grace_periods},
      {"covered_returns", r.covered_returns},
      {"timeouts", r.timeouts},
      {"reader_sections", r.reader_sections},
      {"hardware_threads", r.hardware_threads},
      {"wall_ms", r.wall_ms},
  };
  return j.dump(2) + "\n";
}

std::string bench_to_table(const std::vector<BenchReport>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %7s %7s %6s %12s %12s %12s %10s %8s %7s\n", "mode",
                "readers", "syncers", "iters", "mean_us", "median_us", "p99_us", "burn", "gps",
                "covered");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-12s %7zu %7zu %6zu %12.1f %12.1f %12.1f %10llu %8llu %7llu\n",
                  std::string(to_string(r.mode)).c_str(), r.readers, r.synchronizers,
                  r.iterations, r.mean_ns / 1e3, r.median_ns / 1e3, r.p99_ns / 1e3,
                  static_cast<unsigned long long>(r.cpu_burn_proxy),
                  static_cast<unsigned long long>(r.grace_periods),
                  static_cast<unsigned long long>(r.covered_returns));
    out << buf;
  }
  return out.str();
}

}  // namespace bboost
