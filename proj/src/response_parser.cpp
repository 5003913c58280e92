#include "trussloop/response_parser.hpp"

#include <charconv>
#include <cmath>
#include <memory>
#include <optional>
#include <regex>

namespace trussloop {
namespace {

constexpr int kMaxNesting = 64;

enum class Tok { Ident, Number, String, LBrace, RBrace, LParen, RParen, LBracket, RBracket, Colon, Comma, Equals, Newline, Unterminated, Other, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;  // identifier name, decoded string, or raw text
  double number = 0.0;
  SourcePosition pos;
};

struct Comment {
  std::size_t line;
  bool standalone;  // first thing on its line
  std::string text;
};

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && (text[b] == ' ' || text[b] == '\t' || text[b] == '\r')) ++b;
  while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t' || text[e - 1] == '\r')) --e;
  return std::string(text.substr(b, e - b));
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  void run(std::vector<Token>& tokens, std::vector<Comment>& comments) {
    bool line_has_token = false;
    while (i_ < src_.size()) {
      const char c = src_[i_];
      const SourcePosition here{line_, col_};
      if (c == '\n') {
        tokens.push_back({Tok::Newline, "", 0.0, here});
        advance();
        line_has_token = false;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
        advance();
        continue;
      }
      if (c == '#') {
        std::size_t start = i_ + 1;
        while (i_ < src_.size() && src_[i_] != '\n') advance();
        comments.push_back({here.line, !line_has_token, trim(src_.substr(start, i_ - start))});
        continue;
      }
      line_has_token = true;
      if (c == '\'' || c == '"') {
        Token tok{Tok::String, "", 0.0, here};
        advance();
        bool closed = false;
        while (i_ < src_.size()) {
          const char d = src_[i_];
          if (d == '\n') break;
          if (d == c) {
            advance();
            closed = true;
            break;
          }
          if (d == '\\' && i_ + 1 < src_.size() && src_[i_ + 1] != '\n') {
            const char e = src_[i_ + 1];
            tok.text += e == 'n' ? '\n' : e == 't' ? '\t' : e;
            advance();
            advance();
            continue;
          }
          tok.text += d;
          advance();
        }
        // Prose outside the dicts may hold stray apostrophes; only a literal
        // that actually reaches this token reports it.
        if (!closed) tok.kind = Tok::Unterminated;
        tokens.push_back(std::move(tok));
        continue;
      }
      if (is_digit(c) || ((c == '-' || c == '+' || c == '.') && starts_number(i_))) {
        tokens.push_back(lex_number(here));
        continue;
      }
      if (is_ident_start(c)) {
        std::size_t start = i_;
        while (i_ < src_.size() && is_ident_char(src_[i_])) advance();
        tokens.push_back({Tok::Ident, std::string(src_.substr(start, i_ - start)), 0.0, here});
        continue;
      }
      Tok kind = Tok::Other;
      switch (c) {
        case '{': kind = Tok::LBrace; break;
        case '}': kind = Tok::RBrace; break;
        case '(': kind = Tok::LParen; break;
        case ')': kind = Tok::RParen; break;
        case '[': kind = Tok::LBracket; break;
        case ']': kind = Tok::RBracket; break;
        case ':': kind = Tok::Colon; break;
        case ',': kind = Tok::Comma; break;
        case '=': kind = Tok::Equals; break;
        default: break;
      }
      tokens.push_back({kind, std::string(1, c), 0.0, here});
      advance();
    }
    tokens.push_back({Tok::End, "", 0.0, {line_, col_}});
  }

 private:
  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  bool starts_number(std::size_t at) const {
    std::size_t j = at;
    if (src_[j] == '-' || src_[j] == '+') ++j;
    if (j < src_.size() && is_digit(src_[j])) return true;
    return j + 1 < src_.size() && src_[j] == '.' && is_digit(src_[j + 1]);
  }

  Token lex_number(SourcePosition here) {
    const std::size_t start = i_;
    if (src_[i_] == '-' || src_[i_] == '+') advance();
    while (i_ < src_.size() && is_digit(src_[i_])) advance();
    if (i_ < src_.size() && src_[i_] == '.') {
      advance();
      while (i_ < src_.size() && is_digit(src_[i_])) advance();
    }
    if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) {
      std::size_t j = i_ + 1;
      if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
      if (j < src_.size() && is_digit(src_[j])) {
        while (i_ < j) advance();
        while (i_ < src_.size() && is_digit(src_[i_])) advance();
      }
    }
    std::string raw(src_.substr(start, i_ - start));
    std::string_view digits = raw;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || !std::isfinite(value)) {
      return {Tok::Other, raw, 0.0, here};
    }
    return {Tok::Number, raw, value, here};
  }

  std::string_view src_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

// Literal value tree.
struct Value {
  enum class Kind { Dict, Tuple, String, Number } kind = Kind::Number;
  SourcePosition pos;
  std::size_t end_line = 0;
  std::string str;
  double number = 0.0;
  std::vector<Value> items;  // tuple items; dict: key, value, key, value, ...
};

std::string describe_kind(const Value& v) {
  switch (v.kind) {
    case Value::Kind::Dict: return "a dict";
    case Value::Kind::Tuple: return "a tuple";
    case Value::Kind::String: return "a string";
    case Value::Kind::Number: return "a number";
  }
  return "a value";
}

struct Failure {
  ParseError error;
};

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : tokens_(tokens) {}

  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() {
    const Token& t = tokens_[pos_];
    if (t.kind != Tok::End) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Tok::End; }

  void skip_newlines() {
    while (peek().kind == Tok::Newline) next();
  }

  // Moves past the current statement: up to a newline outside brackets.
  void skip_statement() {
    int depth = 0;
    while (!at_end()) {
      const Tok k = next().kind;
      if (k == Tok::LBrace || k == Tok::LParen || k == Tok::LBracket) ++depth;
      if ((k == Tok::RBrace || k == Tok::RParen || k == Tok::RBracket) && depth > 0) --depth;
      if (k == Tok::Newline && (depth == 0 || at_target_assignment())) return;
    }
  }

  // A dict assignment at the start of a line ends any unbalanced prose.
  bool at_target_assignment() const {
    const Token& t = peek();
    return t.kind == Tok::Ident && (t.text == "node_dict" || t.text == "member_dict") &&
           tokens_[pos_ + 1].kind == Tok::Equals;
  }

  // True (and positioned after the `=`) for `name [: annotation] = ...`.
  bool at_assignment(std::string& name) {
    if (peek().kind != Tok::Ident) return false;
    std::size_t j = pos_ + 1;
    if (tokens_[j].kind == Tok::Colon) {
      ++j;
      while (tokens_[j].kind == Tok::Ident) ++j;
    }
    if (tokens_[j].kind != Tok::Equals || tokens_[j + 1].kind == Tok::Equals) return false;
    name = peek().text;
    pos_ = j + 1;
    return true;
  }

  Value parse_value(int depth) {
    if (depth > kMaxNesting) fail(ParseErrorKind::SyntaxError, peek().pos, "literal nested too deeply");
    skip_inner();
    const Token& t = next();
    Value v;
    v.pos = t.pos;
    v.end_line = t.pos.line;
    switch (t.kind) {
      case Tok::Number:
        v.kind = Value::Kind::Number;
        v.number = t.number;
        return v;
      case Tok::String:
        v.kind = Value::Kind::String;
        v.str = t.text;
        return v;
      case Tok::LBrace:
        v.kind = Value::Kind::Dict;
        parse_sequence(v, Tok::RBrace, depth, true);
        return v;
      case Tok::LParen:
      case Tok::LBracket:
        v.kind = Value::Kind::Tuple;
        parse_sequence(v, t.kind == Tok::LParen ? Tok::RParen : Tok::RBracket, depth, false);
        return v;
      case Tok::End:
        fail(ParseErrorKind::SyntaxError, t.pos, "unexpected end of input, expected a literal");
      case Tok::Unterminated:
        fail(ParseErrorKind::SyntaxError, t.pos, "unterminated string literal");
      case Tok::Newline:
        fail(ParseErrorKind::SyntaxError, t.pos, "unexpected end of line, expected a literal");
      default:
        fail(ParseErrorKind::SyntaxError, t.pos, "unexpected '" + t.text + "', expected a literal");
    }
  }

  [[noreturn]] static void fail(ParseErrorKind kind, SourcePosition pos, std::string detail) {
    throw Failure{{kind, pos, std::move(detail)}};
  }

 private:
  void skip_inner() {
    while (peek().kind == Tok::Newline) next();
  }

  void parse_sequence(Value& v, Tok close, int depth, bool dict) {
    const char* closer = close == Tok::RBrace ? "}" : close == Tok::RParen ? ")" : "]";
    while (true) {
      skip_inner();
      if (peek().kind == close) {
        v.end_line = next().pos.line;
        return;
      }
      Value item = parse_value(depth + 1);
      if (dict) {
        skip_inner();
        const Token& colon = next();
        if (colon.kind != Tok::Colon) {
          fail(ParseErrorKind::SyntaxError, colon.pos, "expected ':' after dict key");
        }
        v.items.push_back(std::move(item));
        v.items.push_back(parse_value(depth + 1));
      } else {
        v.items.push_back(std::move(item));
      }
      skip_inner();
      const Token& sep = next();
      if (sep.kind == close) {
        v.end_line = sep.pos.line;
        return;
      }
      if (sep.kind != Tok::Comma) {
        fail(ParseErrorKind::SyntaxError, sep.pos,
             std::string("expected ',' or '") + closer + "'" +
                 (sep.kind == Tok::End ? " before end of input" : ", found '" + sep.text + "'"));
      }
    }
  }

  const std::vector<Token>& tokens_;
  std::size_t pos_ = 0;
};

std::string rationale_for(const Value& key, const Value& value, const std::vector<Comment>& comments) {
  std::string text;
  const std::size_t first = key.pos.line;
  const std::size_t last = std::max(value.end_line, first);
  for (const auto& c : comments) {
    const bool inline_comment = c.line >= first && c.line <= last && !c.standalone;
    const bool above = c.standalone && c.line + 1 == first;
    if ((inline_comment || above) && !c.text.empty()) {
      if (!text.empty()) text += "; ";
      text += c.text;
    }
  }
  return text;
}

void require_string_key(const Value& key, const char* dict_name) {
  if (key.kind != Value::Kind::String) {
    Parser::fail(ParseErrorKind::BadShape, key.pos,
                 std::string(dict_name) + " keys must be strings, found " + describe_kind(key));
  }
  if (key.str.empty()) Parser::fail(ParseErrorKind::BadShape, key.pos, std::string(dict_name) + " key is empty");
}

void build_nodes(const Value& dict, const std::vector<Comment>& comments, ParsedResponse& out) {
  if (dict.kind != Value::Kind::Dict) {
    Parser::fail(ParseErrorKind::BadShape, dict.pos, "node_dict must be a dict, found " + describe_kind(dict));
  }
  for (std::size_t i = 0; i + 1 < dict.items.size(); i += 2) {
    const Value& key = dict.items[i];
    const Value& val = dict.items[i + 1];
    require_string_key(key, "node_dict");
    if (val.kind != Value::Kind::Tuple || val.items.size() != 2 ||
        val.items[0].kind != Value::Kind::Number || val.items[1].kind != Value::Kind::Number) {
      Parser::fail(ParseErrorKind::BadShape, val.pos,
                   "node '" + key.str + "' must be an (x, y) pair of numbers");
    }
    out.design.nodes.insert_or_assign(key.str, Point2{val.items[0].number, val.items[1].number});
    if (auto note = rationale_for(key, val, comments); !note.empty()) {
      out.rationale.nodes.insert_or_assign(key.str, note);
    }
  }
}

void build_members(const Value& dict, const std::vector<Comment>& comments, ParsedResponse& out) {
  if (dict.kind != Value::Kind::Dict) {
    Parser::fail(ParseErrorKind::BadShape, dict.pos, "member_dict must be a dict, found " + describe_kind(dict));
  }
  for (std::size_t i = 0; i + 1 < dict.items.size(); i += 2) {
    const Value& key = dict.items[i];
    const Value& val = dict.items[i + 1];
    require_string_key(key, "member_dict");
    const bool shaped = val.kind == Value::Kind::Tuple && val.items.size() == 3;
    if (!shaped) {
      Parser::fail(ParseErrorKind::BadShape, val.pos,
                   "member '" + key.str + "' must be a 3-tuple ('node_a', 'node_b', 'area_id')" +
                       (val.kind == Value::Kind::Tuple
                            ? ", found " + std::to_string(val.items.size()) + " elements"
                            : ", found " + describe_kind(val)));
    }
    for (const auto& item : val.items) {
      if (item.kind != Value::Kind::String) {
        Parser::fail(ParseErrorKind::BadShape, item.pos,
                     "member '" + key.str + "' elements must be strings, found " + describe_kind(item));
      }
    }
    out.design.members.insert_or_assign(key.str, Member{val.items[0].str, val.items[1].str, val.items[2].str});
    if (auto note = rationale_for(key, val, comments); !note.empty()) {
      out.rationale.members.insert_or_assign(key.str, note);
    }
  }
}

SourcePosition map_position(SourcePosition local, SourcePosition origin) {
  if (local.line == 1) return {origin.line, origin.column + local.column - 1};
  return {origin.line + local.line - 1, local.column};
}

SourcePosition position_of(std::string_view text, std::size_t offset) {
  SourcePosition pos;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++pos.line;
      pos.column = 1;
    } else {
      ++pos.column;
    }
  }
  return pos;
}

}  // namespace

std::string to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::NoCodeBlock: return "NoCodeBlock";
    case ParseErrorKind::MissingNodeDict: return "MissingNodeDict";
    case ParseErrorKind::MissingMemberDict: return "MissingMemberDict";
    case ParseErrorKind::SyntaxError: return "SyntaxError";
    case ParseErrorKind::BadShape: return "BadShape";
  }
  return "Unknown";
}

std::string ParseError::describe() const {
  return to_string(kind) + " at line " + std::to_string(position.line) + ", column " +
         std::to_string(position.column) + ": " + detail;
}

std::variant<CodeBlock, ParseError> extract_code(std::string_view response) {
  struct Line {
    std::size_t begin;
    std::size_t end;
  };
  std::vector<Line> lines;
  for (std::size_t b = 0; b <= response.size();) {
    std::size_t e = response.find('\n', b);
    if (e == std::string_view::npos) e = response.size();
    lines.push_back({b, e});
    b = e + 1;
  }
  std::vector<std::size_t> fences;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = response.substr(lines[i].begin, lines[i].end - lines[i].begin);
    std::size_t lead = line.find_first_not_of(" \t");
    if (lead != std::string_view::npos && line.substr(lead).starts_with("```")) fences.push_back(i);
  }
  static const std::regex assignment(R"(node_dict\s*=)");
  auto block_of = [&](std::size_t open, std::size_t close) {
    CodeBlock block;
    block.origin = {open + 2, 1};
    if (open + 1 < close) {
      const std::size_t begin = lines[open + 1].begin;
      const std::size_t end = lines[close - 1].end;
      block.text = std::string(response.substr(begin, end - begin));
    }
    return block;
  };
  auto has_assignment = [&](const std::string& text) { return std::regex_search(text, assignment); };

  // Fences pair up in order; an unmatched final fence runs to end of text.
  // The last block that assigns node_dict wins, otherwise the last block.
  std::optional<CodeBlock> last_block;
  for (std::size_t k = 0; k < fences.size(); k += 2) {
    CodeBlock block = block_of(fences[k], k + 1 < fences.size() ? fences[k + 1] : lines.size());
    if (has_assignment(block.text) || !last_block || !has_assignment(last_block->text)) {
      last_block = std::move(block);
    }
  }
  if (last_block && has_assignment(last_block->text)) return *last_block;

  // No block assigns node_dict: take the text from the first assignment up
  // to the next fence line (a lone closing fence, for instance).
  std::match_results<std::string_view::const_iterator> match;
  if (std::regex_search(response.begin(), response.end(), match, assignment)) {
    const auto offset = static_cast<std::size_t>(match.position(0));
    std::size_t end = response.size();
    for (std::size_t f : fences) {
      if (lines[f].begin > offset) {
        end = lines[f].begin;
        break;
      }
    }
    return CodeBlock{std::string(response.substr(offset, end - offset)), position_of(response, offset)};
  }
  if (last_block) return *last_block;
  return ParseError{ParseErrorKind::NoCodeBlock, {1, 1}, "no fenced code block and no node_dict assignment found"};
}

std::variant<ParsedResponse, ParseError> parse_design(std::string_view code, SourcePosition origin) {
  std::vector<Token> tokens;
  std::vector<Comment> comments;
  Lexer(code).run(tokens, comments);

  ParsedResponse out;
  try {
    Parser parser(tokens);
    std::optional<Value> node_dict;
    std::optional<Value> member_dict;
    while (true) {
      parser.skip_newlines();
      if (parser.at_end()) break;
      const SourcePosition start = parser.peek().pos;
      std::string name;
      if (parser.at_assignment(name) && (name == "node_dict" || name == "member_dict")) {
        Value value = parser.parse_value(0);
        (name == "node_dict" ? node_dict : member_dict) = std::move(value);
        const Token& after = parser.peek();
        if (after.kind != Tok::Newline && after.kind != Tok::End) {
          Parser::fail(ParseErrorKind::SyntaxError, after.pos,
                       "unexpected '" + after.text + "' after " + name + " literal");
        }
        continue;
      }
      out.diagnostics.push_back("skipped statement at line " +
                                std::to_string(map_position(start, origin).line));
      parser.skip_statement();
    }
    if (!node_dict) Parser::fail(ParseErrorKind::MissingNodeDict, {1, 1}, "no node_dict assignment found");
    if (!member_dict) Parser::fail(ParseErrorKind::MissingMemberDict, {1, 1}, "no member_dict assignment found");
    build_nodes(*node_dict, comments, out);
    build_members(*member_dict, comments, out);
  } catch (const Failure& failure) {
    ParseError error = failure.error;
    error.position = map_position(error.position, origin);
    return error;
  }
  return out;
}

std::variant<ParsedResponse, ParseError> parse_response(std::string_view response) {
  auto extracted = extract_code(response);
  if (auto* error = std::get_if<ParseError>(&extracted)) return *error;
  const CodeBlock& block = std::get<CodeBlock>(extracted);
  auto parsed = parse_design(block.text, block.origin);
  if (auto* ok = std::get_if<ParsedResponse>(&parsed)) ok->extra_text = response.size() - block.text.size();
  return parsed;
}

}  // namespace trussloop
