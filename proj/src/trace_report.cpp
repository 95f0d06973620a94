#include "bboost/trace_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace bboost {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<const UnitTrace*> by_start(const ScheduleTrace& t) {
  std::vector<const UnitTrace*> rows;
  for (const auto& u : t.units) rows.push_back(&u);
  std::stable_sort(rows.begin(), rows.end(), [](const UnitTrace* a, const UnitTrace* b) {
    return a->started_at < b->started_at;
  });
  return rows;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string svg_chart(const ScheduleTrace& t, const ChartOptions& o) {
  constexpr int kLabel = 220, kRow = 16, kTop = 40, kPad = 10;
  const double scale = o.ms_per_px > 0 ? o.ms_per_px : 5.0;
  const auto rows = by_start(t);
  auto x = [&](Duration d) { return kLabel + to_millis(d) / scale; };
  const int width = kLabel + static_cast<int>(std::ceil(to_millis(t.all_finished_at) / scale)) + kPad;
  const int height = kTop + kRow * static_cast<int>(rows.size()) + kPad;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"monospace\" font-size=\"10\">\n"
    << "<defs><pattern id=\"hatch\" width=\"4\" height=\"4\" patternUnits=\"userSpaceOnUse\">"
       "<path d=\"M0,4 L4,0\" stroke=\"#888\" stroke-width=\"1\"/></pattern></defs>\n"
    << "<text x=\"" << kPad << "\" y=\"14\">boot completed at " << format_millis(t.boot_completed_at)
    << " ms; " << fmt("%g", scale) << " ms/px</text>\n";
  for (const auto& p : t.phases) {
    s << "<rect class=\"phase\" x=\"" << fmt("%.1f", x(p.begin)) << "\" y=\"20\" width=\""
      << fmt("%.1f", to_millis(p.end - p.begin) / scale) << "\" height=\"10\" fill=\"#ddd\" stroke=\"#999\">"
      << "<title>" << xml_escape(p.label) << "</title></rect>\n";
  }
  s << "<line x1=\"" << fmt("%.1f", x(t.boot_completed_at)) << "\" y1=\"20\" x2=\""
    << fmt("%.1f", x(t.boot_completed_at)) << "\" y2=\"" << height << "\" stroke=\"red\"/>\n";
  int y = kTop;
  for (const auto* u : rows) {
    const char* fill = u->bb_member ? "#d62728" : (u->deferred ? "#7f7f7f" : "#1f77b4");
    s << "<g class=\"unit" << (u->bb_member ? " bb" : "") << "\">"
      << "<text x=\"" << kPad << "\" y=\"" << y + 11 << "\">" << (u->bb_member ? "* " : "")
      << xml_escape(u->name.str()) << "</text>";
    if (u->started_at > u->launched_at) {
      s << "<rect x=\"" << fmt("%.1f", x(u->launched_at)) << "\" y=\"" << y + 5 << "\" width=\""
        << fmt("%.1f", to_millis(u->started_at - u->launched_at) / scale)
        << "\" height=\"4\" fill=\"#bbb\"/>";
    }
    s << "<rect x=\"" << fmt("%.1f", x(u->started_at)) << "\" y=\"" << y + 2 << "\" width=\""
      << fmt("%.1f", to_millis(u->ready_at - u->started_at) / scale) << "\" height=\"" << kRow - 4
      << "\" fill=\"" << fill << "\"/>";
    s << "<rect x=\"" << fmt("%.1f", x(u->ready_at)) << "\" y=\"" << y + 2 << "\" width=\""
      << fmt("%.1f", to_millis(u->finished_at - u->ready_at) / scale) << "\" height=\"" << kRow - 4
      << "\" fill=\"url(#hatch)\" stroke=\"" << fill << "\"/>";
    s << "</g>\n";
    y += kRow;
  }
  s << "</svg>\n";
  return s.str();
}

std::string text_chart(const ScheduleTrace& t, const ChartOptions& o) {
  const auto cols = std::max<std::size_t>(o.text_columns, 10);
  const auto span = std::max<std::int64_t>(t.all_finished_at.count(), 1);
  // microseconds per column, rounded up so the last exit fits
  const auto per_col = (span + static_cast<std::int64_t>(cols) - 1) / static_cast<std::int64_t>(cols);
  auto col = [&](Duration d) { return static_cast<std::size_t>(d.count() / per_col); };

  std::size_t name_w = 4;
  for (const auto& u : t.units) name_w = std::max(name_w, u.name.str().size() + 2);

  std::ostringstream s;
  s << "# bootchart: completed at " << format_millis(t.boot_completed_at) << " ms, "
    << format_millis(Duration{per_col}) << " ms/col, '=' start..ready, '-' ready..exit, '*' BB member\n";
  for (const auto* u : by_start(t)) {
    std::string line(cols + 1, ' ');
    const auto a = col(u->started_at), b = col(u->ready_at), c = col(u->finished_at);
    for (auto i = b; i < std::min(c, cols + 1); ++i) line[i] = '-';
    for (auto i = a; i < std::min(b, cols + 1); ++i) line[i] = '=';
    if (a == b && b == c && a <= cols) line[a] = '|';
    while (!line.empty() && line.back() == ' ') line.pop_back();
    std::string name = (u->bb_member ? "*" : " ") + u->name.str();
    name.resize(name_w, ' ');
    s << name << line << '\n';
  }
  return s.str();
}

std::string feature_for(const std::string& phase, const TraceFlags& a, const TraceFlags& b) {
  std::vector<std::string> f;
  if (phase.rfind("kernel:", 0) == 0) {
    if (a.kernel_total != b.kernel_total) f.push_back("kernel-boost");
  } else if (phase == "init") {
    if (a.defer_policy != b.defer_policy) f.push_back("deferred-init");
  } else if (phase == "load") {
    if (a.preparsed != b.preparsed) f.push_back("pre-parser");
  } else if (phase == "services") {
    if (a.rcu_overhead != b.rcu_overhead) f.push_back("rcu-booster");
    if (a.bb_group != b.bb_group || a.isolate != b.isolate || a.prioritize != b.prioritize) {
      f.push_back("bb-group");
    }
    if (a.defer_policy != b.defer_policy) f.push_back("deferred-units");
    if (a.workers != b.workers) f.push_back("workers");
  }
  if (f.empty()) return "unattributed";
  std::string out;
  for (const auto& x : f) out += (out.empty() ? "" : "+") + x;
  return out;
}

ordered_json ms(Duration d) { return to_millis(d); }

}  // namespace

std::string emit_bootchart(const ScheduleTrace& trace, ChartFormat format, ChartOptions opts) {
  return format == ChartFormat::SVG ? svg_chart(trace, opts) : text_chart(trace, opts);
}

ComparisonReport compare_traces(const ScheduleTrace& before, const ScheduleTrace& after) {
  ComparisonReport r;
  r.total_before = before.boot_completed_at;
  r.total_after = after.boot_completed_at;
  r.total_saved = r.total_before - r.total_after;

  auto len = [](const ScheduleTrace& t, const std::string& label) {
    for (const auto& p : t.phases) {
      if (p.label == label) return p.end - p.begin;
    }
    return Duration{0};
  };
  std::vector<std::string> labels;
  for (const auto* t : {&before, &after}) {
    for (const auto& p : t->phases) {
      if (std::find(labels.begin(), labels.end(), p.label) == labels.end()) labels.push_back(p.label);
    }
  }
  // Keep services last so rows read in boot order.
  std::stable_partition(labels.begin(), labels.end(), [](const std::string& l) { return l != "services"; });
  for (const auto& l : labels) {
    const auto b = len(before, l), a = len(after, l);
    r.phases.push_back({l, b, a, b - a});
  }

  for (const auto& u : before.units) {
    if (const auto* v = after.find(u.name)) {
      r.units.push_back({u.name.str(), u.started_at, v->started_at, v->started_at - u.started_at});
    } else {
      r.only_before.push_back(u.name.str());
    }
  }
  for (const auto& v : after.units) {
    if (!before.find(v.name)) r.only_after.push_back(v.name.str());
  }

  for (const auto& p : r.phases) {
    if (p.saved == Duration{0}) continue;
    const auto key = feature_for(p.label, before.flags, after.flags);
    auto it = std::find_if(r.attribution.begin(), r.attribution.end(),
                           [&](const Attribution& a) { return a.feature == key; });
    if (it == r.attribution.end()) {
      r.attribution.push_back({key, {}, Duration{0}});
      it = std::prev(r.attribution.end());
    }
    it->phases.push_back(p.label);
    it->saved += p.saved;
  }
  return r;
}

std::string comparison_to_json(const ComparisonReport& r) {
  ordered_json j;
  j["total_before"] = ms(r.total_before);
  j["total_after"] = ms(r.total_after);
  j["total_saved"] = ms(r.total_saved);
  auto& ph = j["phases"] = ordered_json::array();
  for (const auto& p : r.phases) {
    ph.push_back({{"label", p.label}, {"before", ms(p.before)}, {"after", ms(p.after)}, {"saved", ms(p.saved)}});
  }
  auto& at = j["attribution"] = ordered_json::array();
  for (const auto& a : r.attribution) {
    at.push_back({{"feature", a.feature}, {"phases", a.phases}, {"saved", ms(a.saved)}});
  }
  auto& un = j["units"] = ordered_json::array();
  for (const auto& u : r.units) {
    un.push_back({{"name", u.name},
                  {"before_start", ms(u.before_start)},
                  {"after_start", ms(u.after_start)},
                  {"delta", ms(u.delta)}});
  }
  j["only_before"] = r.only_before;
  j["only_after"] = r.only_after;
  return j.dump(2) + "\n";
}

std::string comparison_to_text(const ComparisonReport& r) {
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %10s %10s %10s\n", "phase", "before", "after", "saved");
  s << buf;
  for (const auto& p : r.phases) {
    std::snprintf(buf, sizeof buf, "%-28s %10.1f %10.1f %10.1f\n", p.label.c_str(), to_millis(p.before),
                  to_millis(p.after), to_millis(p.saved));
    s << buf;
  }
  std::snprintf(buf, sizeof buf, "%-28s %10.1f %10.1f %10.1f\n", "total", to_millis(r.total_before),
                to_millis(r.total_after), to_millis(r.total_saved));
  s << buf << "\nattribution\n";
  for (const auto& a : r.attribution) {
    std::snprintf(buf, sizeof buf, "  %-40s %10.1f\n", a.feature.c_str(), to_millis(a.saved));
    s << buf;
  }
  return s.str();
}

Metrics compute_metrics(const ScheduleTrace& t) {
  Metrics m;
  m.boot_completed_at = t.boot_completed_at;
  m.all_finished_at = t.all_finished_at;
  for (const auto& p : t.phases) m.phases.emplace_back(p.label, p.end - p.begin);
  m.units = t.units.size();

  // Sweep over occupancy changes; a unit occupies [launched_at, finished_at).
  std::vector<std::pair<Duration, int>> ev;
  for (const auto& u : t.units) {
    if (u.phantom || u.target || u.finished_at <= u.launched_at) continue;
    ev.emplace_back(u.launched_at, +1);
    ev.emplace_back(u.finished_at, -1);
  }
  std::sort(ev.begin(), ev.end());
  int cur = 0;
  for (const auto& [when, d] : ev) {
    cur += d;
    m.max_parallelism = std::max(m.max_parallelism, static_cast<std::size_t>(std::max(cur, 0)));
  }

  Duration begin{0};
  for (const auto& p : t.phases) {
    if (p.label == "services") begin = p.begin;
  }
  std::size_t k = 0;
  cur = 0;
  for (Duration s = begin; s < t.boot_completed_at; s += millis(1)) {
    while (k < ev.size() && ev[k].first <= s) cur += ev[k++].second;
    ++m.parallelism_histogram[static_cast<std::size_t>(std::max(cur, 0))];
  }

  for (const auto& d : t.deferred_executed) m.deferred_wake_latencies.emplace_back(d.label, d.wake_latency);
  for (const auto& u : t.units) {
    if (u.deferred) m.deferred_wake_latencies.emplace_back(u.name.str(), u.launched_at - t.boot_completed_at);
  }
  return m;
}

std::string emit_metrics(const ScheduleTrace& trace) {
  const auto m = compute_metrics(trace);
  ordered_json j;
  j["boot_completed_at"] = ms(m.boot_completed_at);
  j["all_finished_at"] = ms(m.all_finished_at);
  j["units"] = m.units;
  auto& ph = j["phases"] = ordered_json::array();
  for (const auto& [l, d] : m.phases) ph.push_back({{"label", l}, {"ms", ms(d)}});
  j["max_parallelism"] = m.max_parallelism;
  auto& h = j["parallelism_histogram"] = ordered_json::object();
  for (const auto& [k, v] : m.parallelism_histogram) h[std::to_string(k)] = v;
  auto& w = j["deferred_wake_latencies"] = ordered_json::array();
  Duration sum{0};
  for (const auto& [l, d] : m.deferred_wake_latencies) {
    w.push_back({{"label", l}, {"ms", ms(d)}});
    sum += d;
  }
  j["mean_deferred_wake_latency"] =
      m.deferred_wake_latencies.empty()
          ? 0.0
          : to_millis(sum) / static_cast<double>(m.deferred_wake_latencies.size());
  return j.dump(2) + "\n";
}

}  // namespace bboost
