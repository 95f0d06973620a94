#include <gtest/gtest.h>

#include <random>

#include "bboost/fixtures.hpp"
#include "bboost/unit_parser.hpp"
#include "helpers.hpp"

using namespace bboost;
using testing_helpers::kMyapp;

TEST(ParseUnit, MyappExample) {
  const auto p = parse_unit(kMyapp, UnitName("Myapp.service"));
  const auto& u = p.unit;
  EXPECT_EQ(u.name.str(), "Myapp.service");
  EXPECT_EQ(u.service_type, ServiceType::Oneshot);
  EXPECT_EQ(u.exec_start, "/usr/bin/myapp-service-daemon");
  EXPECT_EQ(u.description, "Summarized explanation of Myapp.service");
  const std::vector<Dependency> want{
      {DependencyKind::OrderBefore, UnitName("socket.service")},
      {DependencyKind::WantedBy, UnitName("multi-user.target")},
  };
  EXPECT_EQ(u.deps, want);
  EXPECT_TRUE(p.warnings.empty());
}

TEST(ParseUnit, EmptyTextIsMissingSection) {
  try {
    parse_unit("", UnitName("x.service"));
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.reason(), ParseErrorReason::MissingSection);
  }
}

TEST(ParseUnit, DuplicateKeyKeepsLastAndWarns) {
  // Hand-written reference: the second Type line wins and the first one is
  // reported as overridden.
  const auto p = parse_unit("[Service]\nType=oneshot\nType=simple\n", UnitName("d.service"));
  UnitFile ref(UnitName("d.service"));
  ref.service_type = ServiceType::Simple;
  EXPECT_EQ(p.unit, ref);
  ASSERT_EQ(p.warnings.size(), 1u);
  EXPECT_EQ(p.warnings[0].severity, Severity::Warning);
  EXPECT_NE(p.warnings[0].message.find("duplicate key Type"), std::string::npos);
}

TEST(ParseUnit, Errors) {
  auto reason = [](const std::string& text) {
    try {
      parse_unit(text, UnitName("e.service"));
    } catch (const ParseError& e) {
      return e.reason();
    }
    ADD_FAILURE() << "accepted: " << text;
    return ParseErrorReason::MissingSection;
  };
  EXPECT_EQ(reason("[Bogus]\nA=b\n"), ParseErrorReason::UnknownSection);
  EXPECT_EQ(reason("[Unit]\nnot a key\n"), ParseErrorReason::MalformedKey);
  EXPECT_EQ(reason("[Unit]\n[Unit]\n"), ParseErrorReason::DuplicateSection);
  EXPECT_EQ(reason("[Service]\nType=weird\n"), ParseErrorReason::BadValue);
  EXPECT_EQ(reason("[Unit]\nRequires=nope\n"), ParseErrorReason::BadValue);
  EXPECT_EQ(reason("[Unit]\nX-Sim-Duration=-4\n"), ParseErrorReason::BadValue);
}

TEST(ParseUnit, ErrorCarriesLine) {
  try {
    parse_unit("[Unit]\nDescription=x\n[Service]\nType=zzz\n", UnitName("e.service"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_EQ(e.file(), "e.service");
  }
}

TEST(ParseUnit, UnknownKeyWarns) {
  const auto p = parse_unit("[Unit]\nFrobnicate=yes\n", UnitName("w.service"));
  ASSERT_EQ(p.warnings.size(), 1u);
  EXPECT_EQ(p.warnings[0].severity, Severity::Warning);
}

TEST(ParseUnit, SimExtensions) {
  const auto p = parse_unit(
      "[Unit]\nRequires=a.service b.mount\nWants=c.service\nAfter=d.service\n"
      "X-Sim-Duration=12.5\nX-Sim-ForkPoint=2\nX-Sim-Deferred=yes\nX-Sim-Priority=3\n"
      "[Service]\nType=forking\n",
      UnitName("f.service"));
  const auto& u = p.unit;
  EXPECT_EQ(u.exec_duration, Duration{12500});
  EXPECT_EQ(u.fork_point, millis(2));
  EXPECT_TRUE(u.deferred);
  EXPECT_EQ(u.priority, 3);
  EXPECT_EQ(u.deps.size(), 4u);
  EXPECT_EQ(u.deps[0], (Dependency{DependencyKind::Strong, UnitName("a.service")}));
  EXPECT_EQ(u.deps[1], (Dependency{DependencyKind::Strong, UnitName("b.mount")}));
}

TEST(ParseUnit, SerializeRoundTripOnCorpus) {
  const auto corpus = fixtures::random_corpus(200, 11);
  for (const auto& [name, text] : corpus.units) {
    const auto u = parse_unit(text, name).unit;
    EXPECT_EQ(parse_unit(serialize_unit(u), name).unit, u) << name.str();
  }
}

TEST(ParseUnit, Pure) {
  const auto a = parse_unit(kMyapp, UnitName("Myapp.service"));
  const auto b = parse_unit(kMyapp, UnitName("Myapp.service"));
  EXPECT_EQ(a.unit, b.unit);
  EXPECT_EQ(a.warnings, b.warnings);
}

TEST(ParseTree, MyappAloneHasTwoDanglingWarnings) {
  const auto t = parse_tree({{UnitName("Myapp.service"), kMyapp}});
  EXPECT_EQ(t.set.size(), 1u);
  EXPECT_EQ(t.set.dangling,
            (std::set<UnitName>{UnitName("socket.service"), UnitName("multi-user.target")}));
  ASSERT_EQ(t.diagnostics.size(), 2u);
  for (const auto& d : t.diagnostics) {
    EXPECT_EQ(d.severity, Severity::Warning);
    EXPECT_NE(d.message.find("dangling"), std::string::npos);
  }
}

TEST(ParseTree, EmptyFails) {
  EXPECT_THROW(parse_tree({}), EmptyUnitTree);
}

TEST(ParseTree, GeneratedMinimalUnits) {
  // Minimal valid units written by hand here, not by the fixture code.
  std::map<UnitName, std::string> src;
  for (int i = 0; i < 250; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "min%03d.service", i);
    src.emplace(UnitName(name), "[Unit]\nDescription=minimal\n[Service]\nType=simple\n");
  }
  const auto t = parse_tree(src);
  EXPECT_EQ(t.set.size(), 250u);
  EXPECT_TRUE(t.diagnostics.empty());
}

TEST(ParseTree, BadFilesReportedAndSkipped) {
  const auto t = parse_tree({
      {UnitName("good.service"), "[Unit]\n"},
      {UnitName("bad.service"), "[Nope]\n"},
      {UnitName("self.service"), "[Unit]\nRequires=self.service\n"},
  });
  EXPECT_EQ(t.set.size(), 1u);
  EXPECT_TRUE(has_errors(t.diagnostics));
}

TEST(SourceDigest, SensitiveToNameAndText) {
  std::map<UnitName, std::string> a{{UnitName("a.service"), "[Unit]\n"}};
  auto b = a;
  b.begin()->second += "\n";
  std::map<UnitName, std::string> c{{UnitName("c.service"), "[Unit]\n"}};
  EXPECT_NE(source_digest(a), source_digest(b));
  EXPECT_NE(source_digest(a), source_digest(c));
  EXPECT_EQ(source_digest(a), source_digest(a));
}
