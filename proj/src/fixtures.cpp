#include "bboost/fixtures.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <string_view>

#include "bboost/unit_parser.hpp"

namespace bboost::fixtures {

namespace {

class Builder {
 public:
  UnitFile& add(std::string_view name, ServiceType type, double ms,
                std::string description = {}) {
    UnitName n(name);
    auto [it, fresh] = units_.emplace(n, UnitFile(n));
    if (!fresh) throw std::logic_error("fixture defines " + n.str() + " twice");
    auto& u = it->second;
    u.service_type = type;
    u.exec_duration = to_duration(ms);
    u.description = description.empty() ? std::string(name) : std::move(description);
    if (n.kind() == UnitKind::Service) u.exec_start = "/usr/bin/" + n.str().substr(0, n.str().size() - 8);
    return u;
  }

  UnitFile& forking(std::string_view name, double fork_ms, double total_ms,
                    std::string description = {}) {
    auto& u = add(name, ServiceType::Forking, total_ms, std::move(description));
    u.fork_point = to_duration(fork_ms);
    return u;
  }

  void dep(std::string_view from, DependencyKind kind, std::string_view target) {
    auto& u = units_.at(UnitName(from));
    Dependency d{kind, UnitName(target)};
    if (std::find(u.deps.begin(), u.deps.end(), d) == u.deps.end()) u.deps.push_back(std::move(d));
  }

  Fixture done() {
    Fixture f;
    for (auto& [name, u] : units_) {
      std::stable_sort(u.deps.begin(), u.deps.end(), [](const Dependency& a, const Dependency& b) {
        return a.kind < b.kind;
      });
      f.units.emplace(name, serialize_unit(u));
    }
    return f;
  }

  static Duration to_duration(double ms) {
    return Duration{static_cast<std::int64_t>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5))};
  }

 private:
  std::map<UnitName, UnitFile> units_;
};

using K = DependencyKind;
using T = ServiceType;

// Names for filler services; suffixed with an index when reused.
constexpr const char* kWords[] = {
    "alsa", "app-manager", "avahi", "bluetooth", "camera", "cec", "clock", "codec",
    "config", "content", "cron", "crash", "dial", "display", "dlna", "drm",
    "epg", "factory", "font", "fota", "gfx", "hotplug", "input", "ir",
    "journal", "key", "locale", "log", "media", "memory", "mhl", "mount-helper",
    "netlink", "network", "notice", "ntp", "ota", "panel", "power", "profile",
    "pvr", "recorder", "resource", "rtc", "sam", "scaler", "screen", "security",
    "sensor", "settings", "smart-hub", "sound", "storage", "subtitle", "swap", "sysinfo",
    "teletext", "thermal", "time", "tts", "update", "usb", "voice", "volume",
    "watchdog", "web", "wifi", "window",
};

std::string filler_name(std::size_t i) {
  constexpr std::size_t n = std::size(kWords);
  std::string base = kWords[i % n];
  if (i >= n) base += "-" + std::to_string(i / n + 1);
  return base + ".service";
}

}  // namespace

Fixture tv7() {
  Builder b;
  b.add("var.mount", T::Oneshot, 300, "Persistent data partition");
  b.add("dbus.socket", T::Oneshot, 100, "D-Bus system message bus socket");
  b.forking("dbus.service", 400, 500, "D-Bus system message bus");
  b.forking("tuner.service", 900, 1000, "Broadcast tuner");
  b.forking("hdmi.service", 700, 800, "HDMI output");
  b.forking("demux.service", 800, 900, "Transport stream demultiplexer");
  b.forking("fasttv.service", 1300, 1400, "Live TV playback");
  b.dep("dbus.socket", K::Strong, "var.mount");
  b.dep("dbus.service", K::Strong, "dbus.socket");
  for (auto s : {"tuner.service", "hdmi.service", "demux.service"}) {
    b.dep(s, K::Strong, "dbus.service");
    b.dep("fasttv.service", K::Strong, s);
  }

  // Outsiders: ordering and wants only, never required by the group.
  b.add("messenger.service", T::Simple, 200, "Messenger");
  b.dep("messenger.service", K::OrderBefore, "fasttv.service");
  b.add("weather.service", T::Oneshot, 150, "Weather widget");
  b.dep("weather.service", K::Weak, "dbus.service");
  b.dep("weather.service", K::OrderAfter, "dbus.service");
  b.add("store.service", T::Simple, 250, "App store");
  b.dep("store.service", K::OrderAfter, "dbus.service");
  b.dep("store.service", K::WantedBy, "multi-user.target");
  b.add("multi-user.target", T::Oneshot, 0, "Multi-User System");

  auto f = b.done();
  f.files["sim.conf"] =
      "[Simulation]\n"
      "Workers=4\n"
      "Completion=fasttv.service\n";
  return f;
}

Fixture tv(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x7456u);
  auto uniform = [&](double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return std::round(d(rng) * 10.0) / 10.0;
  };
  Builder b;

  // Booting-critical path: playback of the broadcast channel and remote
  // control input.
  b.add("var.mount", T::Oneshot, 300, "Persistent data partition");
  b.add("dbus.socket", T::Oneshot, 100, "D-Bus system message bus socket");
  b.forking("dbus.service", 400, 450, "D-Bus system message bus");
  b.forking("tuner.service", 1600, 1700, "Broadcast tuner");
  b.forking("hdmi.service", 1200, 1300, "HDMI output");
  b.forking("demux.service", 1400, 1500, "Transport stream demultiplexer");
  b.forking("remote-input.service", 2000, 2100, "Remote control receiver");
  b.forking("fasttv.service", 600, 700, "Live TV playback");
  b.dep("dbus.socket", K::Strong, "var.mount");
  b.dep("dbus.service", K::Strong, "dbus.socket");
  for (auto s : {"tuner.service", "hdmi.service", "demux.service"}) {
    b.dep(s, K::Strong, "dbus.service");
    b.dep("fasttv.service", K::Strong, s);
  }
  b.dep("fasttv.service", K::Strong, "remote-input.service");
  b.dep("fasttv.service", K::WantedBy, "multi-user.target");

  // Modules and auxiliary daemons everyone else leans on.
  b.add("builtin-modules.service", T::Oneshot, 428, "Load built-in kernel modules");
  b.add("systemd-aux.service", T::Oneshot, 496, "Auxiliary init tasks");
  b.dep("systemd-aux.service", K::Strong, "builtin-modules.service");

  b.add("basic.target", T::Oneshot, 0, "Basic System");
  b.add("multi-user.target", T::Oneshot, 0, "Multi-User System");
  b.dep("basic.target", K::WantedBy, "multi-user.target");

  // A dozen outsiders that order themselves before var.mount.
  constexpr const char* kOutsiders[] = {
      "app-launcher.service", "ad-manager.service", "browser-cache.service",
      "cloud-sync.service", "game-hub.service", "home-screen.service",
      "iot-bridge.service", "messenger.service", "music-app.service",
      "photo-frame.service", "store.service", "video-app.service",
  };
  for (auto name : kOutsiders) {
    b.add(name, T::Simple, uniform(60, 180));
    b.dep(name, K::Strong, "systemd-aux.service");
    b.dep(name, K::Strong, "builtin-modules.service");
    b.dep(name, K::OrderAfter, "basic.target");
    b.dep(name, K::OrderBefore, "var.mount");
    b.dep(name, K::WantedBy, "multi-user.target");
  }

  // Fillers: early ones make up basic.target, late ones follow it.
  const std::size_t total = 136;
  const std::size_t fixed = 8 + 2 + 2 + std::size(kOutsiders);
  const std::size_t fillers = total - fixed;
  const std::size_t early = fillers * 55 / 100;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < fillers; ++i) {
    names.push_back(filler_name(i));
    const auto type = static_cast<T>(rng() % 3);
    const double dur = uniform(24, 140);
    auto& u = type == T::Forking ? b.forking(names.back(), std::round(dur * 6.0) / 10.0, dur)
                                 : b.add(names.back(), type, dur);
    (void)u;
    if (i < early) {
      b.dep(names.back(), K::WantedBy, "basic.target");
      b.dep(names.back(), K::OrderBefore, "basic.target");
    } else {
      b.dep(names.back(), K::OrderAfter, "basic.target");
      b.dep(names.back(), K::WantedBy, "multi-user.target");
    }
    // A couple of dependencies on earlier fillers of the same half.
    const std::size_t lo = i < early ? 0 : early;
    for (int k = 0; k < 2 && i > lo; ++k) {
      const auto j = lo + rng() % (i - lo);
      const auto kind = rng() % 3 == 0 ? K::Strong : K::Weak;
      b.dep(names.back(), kind, names[j]);
      if (kind == K::Weak) b.dep(names.back(), K::OrderAfter, names[j]);
    }
  }
  // Playback wants the network and the picture settings, which isolation
  // ignores.
  b.dep("fasttv.service", K::OrderAfter, filler_name(37));
  b.dep("tuner.service", K::OrderAfter, filler_name(60));

  auto f = b.done();
  f.files["sim.conf"] =
      "# TV boot model: kernel figures are conventional / boosted\n"
      "[Simulation]\n"
      "Workers=4\n"
      "Completion=fasttv.service\n"
      "RcuOverhead=23.7\n"
      "BoostedRcuOverhead=3.1\n"
      "\n"
      "[Kernel]\n"
      "Phase=memory-init 370 110\n"
      "Phase=rootfs-mount 110 75\n"
      "Phase=kernel-other 218 218\n"
      "\n"
      "[Init]\n"
      "Task=init-core 71\n"
      "DeferrableTask=enable-logging 28\n"
      "DeferrableTask=setup-kernel-module 28\n"
      "DeferrableTask=hostname 13\n"
      "DeferrableTask=machine-id 9\n"
      "DeferrableTask=loopback 17\n"
      "DeferrableTask=test-directory 29\n"
      "\n"
      "[Load]\n"
      "Task=load-services 150\n"
      "Task=parse-dependencies 231\n";
  return f;
}

Fixture cycle() {
  Builder b;
  // group a: a-core, a-ui; group b: b-core. b-core is ordered before group
  // a already; the new a-extra is ordered after a-core but b-core requires
  // it.
  b.add("a-core.service", T::Simple, 50, "Group a core");
  b.add("a-ui.service", T::Simple, 40, "Group a UI");
  b.add("b-core.service", T::Simple, 60, "Group b core");
  b.add("a-extra.service", T::Oneshot, 30, "New service in group a");
  b.dep("a-ui.service", K::OrderAfter, "a-core.service");
  b.dep("b-core.service", K::OrderBefore, "a-core.service");
  b.dep("a-extra.service", K::OrderAfter, "a-core.service");
  b.dep("b-core.service", K::Strong, "a-extra.service");
  auto f = b.done();
  f.files["sim.conf"] = "[Simulation]\nWorkers=2\nCompletion=a-ui.service\n";
  return f;
}

Fixture dbus() {
  Builder b;
  b.add("var.mount", T::Oneshot, 147.6, "Persistent data partition");
  b.add("dbus.service", T::Simple, 300, "D-Bus system message bus");
  b.dep("dbus.service", K::Strong, "var.mount");
  b.add("udev-settle.service", T::Oneshot, 120, "Wait for device probing");
  for (int i = 1; i <= 12; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "early-app%02d.service", i);
    b.add(name, T::Oneshot, 40);
    b.dep(name, K::OrderAfter, "udev-settle.service");
    b.dep(name, K::OrderBefore, "var.mount");
  }
  auto f = b.done();
  f.files["sim.conf"] =
      "[Simulation]\n"
      "Workers=4\n"
      "Completion=dbus.service\n"
      "RcuOverhead=23.7\n"
      "BoostedRcuOverhead=23.7\n";
  return f;
}

Fixture serial_chain(std::size_t n, Duration each) {
  Builder b;
  std::string prev;
  for (std::size_t i = 0; i < n; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "chain%03zu.service", i);
    auto& u = b.add(name, T::Oneshot, 0);
    u.exec_duration = each;
    if (!prev.empty()) b.dep(name, K::Strong, prev);
    prev = name;
  }
  return b.done();
}

Fixture random_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Builder b;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    const char* suffix = rng() % 10 == 0 ? ".mount" : (rng() % 10 == 0 ? ".socket" : ".service");
    char name[64];
    std::snprintf(name, sizeof name, "unit%04zu%s", i, suffix);
    names.emplace_back(name);
    auto type = static_cast<T>(rng() % 3);
    if (type == T::Forking && std::string_view(suffix) != ".service") type = T::Oneshot;
    const double dur = static_cast<double>(rng() % 5000) / 10.0;
    auto& u = type == T::Forking ? b.forking(name, std::floor(dur / 2), dur) : b.add(name, type, dur);
    u.description = "Generated unit " + std::to_string(i) + " for corpus " + std::to_string(seed);
    u.priority = static_cast<int>(rng() % 21) - 10;
    for (int k = 0, m = static_cast<int>(rng() % 5); k < m && i > 0; ++k) {
      const auto kind = static_cast<K>(rng() % 4);
      b.dep(name, kind, names[rng() % i]);
    }
    if (rng() % 4 == 0) b.dep(name, K::WantedBy, "multi-user.target");
  }
  return b.done();
}

}  // namespace bboost::fixtures
