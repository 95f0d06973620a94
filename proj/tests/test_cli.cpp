#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

// Runs bbctl through the shell; stderr is folded into the output.
Run bbctl(const std::string& args) {
  const std::string cmd = std::string(BBCTL_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) throw std::runtime_error("popen failed");
  std::string out;
  std::array<char, 4096> buf;
  while (auto n = std::fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
  const int st = pclose(p);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string fx(const char* name) { return std::string(FIXTURES_DIR) + "/" + name; }

class Scratch {
 public:
  Scratch() {
    path_ = fs::temp_directory_path() /
            ("bbctl-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~Scratch() { fs::remove_all(path_); }
  std::string operator/(const std::string& f) const { return (path_ / f).string(); }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

std::size_t lines_with(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto end = s.find('\n', pos);
    if (end == std::string::npos) end = s.size();
    if (s.substr(pos, end - pos).find(needle) != std::string::npos) ++n;
    pos = end + 1;
  }
  return n;
}

}  // namespace

TEST(Cli, AnalyzeCycleExitsTwo) {
  const auto r = bbctl("analyze " + fx("cycle"));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(lines_with(r.out, "cycle ("), 1u);
}

TEST(Cli, AnalyzeCleanTree) {
  const auto r = bbctl("analyze " + fx("tv7"));
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, IsolateSevenMembers) {
  const auto r = bbctl("isolate " + fx("tv7") + " --completion fasttv.service --json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  const std::vector<std::string> want{"dbus.service", "dbus.socket",  "demux.service", "fasttv.service",
                                      "hdmi.service", "tuner.service", "var.mount"};
  EXPECT_EQ(j["members"].get<std::vector<std::string>>(), want);
}

TEST(Cli, SimulateCompareSaving) {
  Scratch tmp;
  ASSERT_EQ(bbctl("simulate " + fx("tv") + " --bb off --out " + (tmp / "off.json")).code, 0);
  ASSERT_EQ(bbctl("simulate " + fx("tv") + " --bb on --out " + (tmp / "on.json")).code, 0);
  const auto r = bbctl("compare " + (tmp / "off.json") + " " + (tmp / "on.json") + " --json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["total_saved"].get<double>(), 4600, 460);
}

TEST(Cli, PreparseThenSimulateFromCache) {
  Scratch tmp;
  const auto cache = tmp / "tv.cache";
  ASSERT_EQ(bbctl("preparse " + fx("tv") + " --cache " + cache).code, 0);
  ASSERT_TRUE(fs::exists(cache));
  const auto a = bbctl("simulate " + fx("tv") + " --bb on --json");
  const auto b = bbctl("simulate " + fx("tv") + " --bb on --json --cache " + cache);
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(nlohmann::json::parse(a.out)["boot_completed_at"],
            nlohmann::json::parse(b.out)["boot_completed_at"]);
}

TEST(Cli, CorruptCacheIsRebuilt) {
  Scratch tmp;
  const auto cache = tmp / "c.cache";
  ASSERT_EQ(bbctl("preparse " + fx("tv7") + " --cache " + cache).code, 0);
  {
    std::fstream f(cache, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(60);
    f.put('\x5a');
  }
  const auto r = bbctl("simulate " + fx("tv7") + " --cache " + cache);
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, ChartAndMetrics) {
  Scratch tmp;
  ASSERT_EQ(bbctl("simulate " + fx("tv7") + " --bb on --out " + (tmp / "t.json")).code, 0);
  ASSERT_EQ(bbctl("chart " + (tmp / "t.json") + " --format svg --out " + (tmp / "t.svg")).code, 0);
  std::ifstream svg(tmp / "t.svg");
  std::string head(4, '\0');
  svg.read(head.data(), 4);
  EXPECT_EQ(head, "<svg");
  const auto text = bbctl("chart " + (tmp / "t.json") + " --format text");
  EXPECT_EQ(text.code, 0);
  EXPECT_NE(text.out.find("fasttv.service"), std::string::npos);
}

TEST(Cli, BenchSyncJson) {
  const auto r = bbctl("bench-sync --readers 2 --syncers 1 --iters 20 --mode boosted --json");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(nlohmann::json::parse(r.out)["samples"], 20);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(bbctl("").code, 1);
  EXPECT_EQ(bbctl("frobnicate").code, 1);
  EXPECT_EQ(bbctl("simulate " + fx("tv7") + " --bb maybe").code, 1);
  EXPECT_EQ(bbctl("parse /nonexistent/dir").code, 3);
  EXPECT_EQ(bbctl("simulate " + fx("cycle")).code, 4);
  EXPECT_EQ(bbctl("simulate " + fx("tv7") + " --completion nope.service").code, 4);
  EXPECT_EQ(bbctl("isolate " + fx("tv7") + " --completion nope.service").code, 1);
  EXPECT_EQ(bbctl("parse " + fx("tv7")).code, 0);
}
