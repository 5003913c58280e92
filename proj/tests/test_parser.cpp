#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "trussloop/response_parser.hpp"

using namespace trussloop;
using namespace testing_support;

namespace {

ParsedResponse parse_ok(std::string_view text) {
  auto r = parse_response(text);
  if (const auto* e = std::get_if<ParseError>(&r)) {
    ADD_FAILURE() << e->describe();
    return {};
  }
  return std::get<ParsedResponse>(std::move(r));
}

ParseError parse_err(std::string_view text) {
  auto r = parse_response(text);
  EXPECT_TRUE(std::holds_alternative<ParseError>(r)) << "expected a parse error for:\n" << text;
  if (auto* e = std::get_if<ParseError>(&r)) return *e;
  return {};
}

}  // namespace

TEST(Parser, SampleResponseFixture) {
  const auto parsed = parse_ok(read_file(fixture_path("fig5_response.txt")));
  EXPECT_EQ(parsed.design, fig5_design());
  EXPECT_EQ(parsed.design.nodes.size(), 5u);
  EXPECT_EQ(parsed.design.members.size(), 7u);
  EXPECT_GE(parsed.rationale.size(), 5u);
  EXPECT_TRUE(parsed.rationale.nodes.contains("node_4"));
  EXPECT_NE(parsed.rationale.nodes.at("node_4").find("vertical support"), std::string::npos);
  EXPECT_TRUE(validate_design(parsed.design, task1_problem(15)).ok());
}

TEST(Parser, FixtureWithoutOpeningFence) {
  // Same response with the opening fence dropped: the code runs up to the
  // remaining fence line.
  std::string text = read_file(fixture_path("fig5_response.txt"));
  text.erase(0, text.find('\n') + 1);
  const auto parsed = parse_ok(text);
  EXPECT_EQ(parsed.design, fig5_design());
}

TEST(Parser, PicksLastBlockWithNodeDict) {
  const std::string text =
      "First try:\n```python\nnode_dict = {'a': (0, 0)}\nmember_dict = {}\n```\n"
      "Shell:\n```\npip install nothing\n```\n"
      "Better:\n```python\nnode_dict = {'a': (1, 2), 'b': (3, 4)}\nmember_dict = {'m': ('a', 'b', '1')}\n```\n"
      "Trailing note.\n```\necho hi\n```\n";
  const auto parsed = parse_ok(text);
  ASSERT_EQ(parsed.design.nodes.size(), 2u);
  EXPECT_EQ(parsed.design.nodes.at("a").x, 1);
  EXPECT_GT(parsed.extra_text, 0u);
}

TEST(Parser, BareCodeWithoutFences) {
  const auto parsed = parse_ok("node_dict = {'a': (0, 0), 'b': (1, 0)}\nmember_dict = {'m': ('a', 'b', '0')}\n");
  EXPECT_EQ(parsed.design.members.at("m").area, "0");
}

TEST(Parser, AcceptsPythonVariations) {
  const std::string code =
      "```python\n"
      "import math  # ignored\n"
      "node_dict = {\n"
      "    \"n1\": (0.0, -0),\n"
      "    'n2': [6e0, +1.5,],\n"
      "    'n3': (2,\n"
      "           3), # rationale with 'quotes' and # hashes\n"
      "}\n"
      "member_dict = {'m1': ('n1', \"n2\", '10'), 'm2': ['n2', 'n3', '1']}\n"
      "print(node_dict)\n"
      "```\n";
  const auto parsed = parse_ok(code);
  EXPECT_EQ(parsed.design.nodes.at("n2").x, 6);
  EXPECT_EQ(parsed.design.nodes.at("n2").y, 1.5);
  EXPECT_EQ(parsed.design.nodes.at("n3").y, 3);
  EXPECT_EQ(parsed.design.members.at("m2").b, "n3");
  EXPECT_EQ(parsed.rationale.nodes.at("n3"), "rationale with 'quotes' and # hashes");
  EXPECT_FALSE(parsed.diagnostics.empty());
}

TEST(ParserErrors, NoCode) {
  EXPECT_EQ(parse_err("I cannot help with that.").kind, ParseErrorKind::NoCodeBlock);
  EXPECT_EQ(parse_err("").kind, ParseErrorKind::NoCodeBlock);
}

TEST(ParserErrors, MissingDicts) {
  EXPECT_EQ(parse_err("```python\nmember_dict = {}\n```").kind, ParseErrorKind::MissingNodeDict);
  EXPECT_EQ(parse_err("```python\nnode_dict = {'a': (0, 0)}\n```").kind, ParseErrorKind::MissingMemberDict);
}

TEST(ParserErrors, SyntaxErrorCarriesResponsePosition) {
  const std::string text = "Intro line\n```python\nnode_dict = {'a': (0, 0),\n  'b': (1 0)}\nmember_dict = {}\n```\n";
  const auto e = parse_err(text);
  EXPECT_EQ(e.kind, ParseErrorKind::SyntaxError);
  EXPECT_EQ(e.position.line, 4u);
  EXPECT_EQ(e.position.column, 11u);
  EXPECT_NE(e.describe().find("line 4, column 11"), std::string::npos);
}

TEST(ParserErrors, UnterminatedLiteral) {
  EXPECT_EQ(parse_err("```\nnode_dict = {'a': (0, 0)\nmember_dict = {}\n```").kind, ParseErrorKind::SyntaxError);
  EXPECT_EQ(parse_err("```\nnode_dict = {'a: (0, 0)}\nmember_dict = {}\n```").kind, ParseErrorKind::SyntaxError);
}

TEST(ParserErrors, BadShapes) {
  EXPECT_EQ(parse_err("```\nnode_dict = {'a': (0, 0, 1)}\nmember_dict = {}\n```").kind, ParseErrorKind::BadShape);
  EXPECT_EQ(parse_err("```\nnode_dict = {'a': ('x', 0)}\nmember_dict = {}\n```").kind, ParseErrorKind::BadShape);
  EXPECT_EQ(parse_err("```\nnode_dict = {1: (0, 0)}\nmember_dict = {}\n```").kind, ParseErrorKind::BadShape);
  EXPECT_EQ(parse_err("```\nnode_dict = {}\nmember_dict = {'m': ('a', 'b')}\n```").kind, ParseErrorKind::BadShape);
  EXPECT_EQ(parse_err("```\nnode_dict = {}\nmember_dict = {'m': ('a', 'b', 4)}\n```").kind, ParseErrorKind::BadShape);
  EXPECT_EQ(parse_err("```\nnode_dict = [('a', 0, 0)]\nmember_dict = {}\n```").kind, ParseErrorKind::BadShape);
}

TEST(ParserErrors, ExpressionsAreNotEvaluated) {
  const char* hostile[] = {
      "```\nnode_dict = {'a': (__import__('os').system('touch /tmp/trussloop_pwned'), 0)}\nmember_dict = {}\n```",
      "```\nnode_dict = {'a': (1 + 1, 0)}\nmember_dict = {}\n```",
      "```\nnode_dict = dict(a=(0, 0))\nmember_dict = {}\n```",
      "```\nnode_dict = {'a': (math.sqrt(2), 0)}\nmember_dict = {}\n```",
      "```\nnode_dict = {f'n{i}': (i, 0) for i in range(3)}\nmember_dict = {}\n```",
  };
  for (const char* text : hostile) {
    EXPECT_EQ(parse_err(text).kind, ParseErrorKind::SyntaxError) << text;
  }
  EXPECT_FALSE(std::filesystem::exists("/tmp/trussloop_pwned"));
}

TEST(ParserErrors, DeepNestingIsRejectedNotRecursedForever) {
  std::string deep = "```\nnode_dict = {'a': ";
  for (int i = 0; i < 100000; ++i) deep += '(';
  deep += "\n```";
  EXPECT_EQ(parse_err(deep).kind, ParseErrorKind::SyntaxError);
}

TEST(ParserRoundTrip, RenderedDesignsParseBack) {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> coord(-50, 50);
  std::uniform_int_distribution<int> count(1, 9);
  std::uniform_int_distribution<int> area(0, 10);
  const char* notes[] = {"keeps the span short", "triangulates the bay", "it's a \"brace\"", "#1 choice", ""};
  for (int trial = 0; trial < 200; ++trial) {
    TrussDesign d;
    Rationale r;
    const int n = count(rng) + 1;
    for (int i = 0; i < n; ++i) {
      const std::string id = "node_" + std::to_string(i + 1);
      d.nodes.insert_or_assign(id, Point2{std::round(coord(rng) * 100) / 100, std::round(coord(rng) * 100) / 100});
      const char* note = notes[rng() % 5];
      if (*note) r.nodes.insert_or_assign(id, note);
    }
    const int m = count(rng);
    for (int k = 0; k < m; ++k) {
      const std::string id = "member_" + std::to_string(k + 1);
      d.members.insert_or_assign(id, Member{d.nodes.entry(rng() % n).first, d.nodes.entry(rng() % n).first,
                                            std::to_string(area(rng))});
      const char* note = notes[rng() % 5];
      if (*note) r.members.insert_or_assign(id, note);
    }
    const auto parsed = parse_ok(response_text(d, &r));
    EXPECT_EQ(parsed.design, d) << format_design_code(d, &r);
    EXPECT_EQ(parsed.rationale, r) << format_design_code(d, &r);
  }
}

TEST(ParserFuzz, RandomBytesNeverCrash) {
  std::mt19937_64 rng(7);
  const std::string alphabet = "node_dict=member_dict{}()[]'\",:#\n `0123456789.-+eE abc\\\t";
  int parsed = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string text;
    const int len = static_cast<int>(rng() % 300);
    const bool raw = i % 2 == 0;
    for (int k = 0; k < len; ++k) {
      text += raw ? static_cast<char>(rng() & 0xff) : alphabet[rng() % alphabet.size()];
    }
    if (i % 3 == 0) text = "```python\nnode_dict = {" + text + "\n```";
    const auto r = parse_response(text);
    if (std::holds_alternative<ParsedResponse>(r)) ++parsed;
    else EXPECT_FALSE(std::get<ParseError>(r).describe().empty());
  }
  SUCCEED() << parsed << " inputs parsed";
}

TEST(ParserFuzz, MutatedSampleNeverCrashes) {
  const std::string base = read_file(fixture_path("fig5_response.txt"));
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    std::string text = base;
    for (int k = 0; k < 4; ++k) {
      const auto pos = rng() % text.size();
      switch (rng() % 3) {
        case 0: text[pos] = static_cast<char>(rng() & 0xff); break;
        case 1: text.erase(pos, 1 + rng() % 8); break;
        default: text.insert(pos, 1, "{}()[]',:#\n"[rng() % 11]); break;
      }
      if (text.empty()) text = "x";
    }
    (void)parse_response(text);
  }
}
