#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "trussloop/model.hpp"

namespace trussloop {

enum class ParseErrorKind { NoCodeBlock, MissingNodeDict, MissingMemberDict, SyntaxError, BadShape };

std::string to_string(ParseErrorKind kind);

/// 1-based line and byte column.
struct SourcePosition {
  std::size_t line = 1;
  std::size_t column = 1;

  friend bool operator==(const SourcePosition&, const SourcePosition&) = default;
};

struct ParseError {
  ParseErrorKind kind = ParseErrorKind::SyntaxError;
  SourcePosition position;
  std::string detail;

  /// "<kind> at line L, column C: <detail>"
  [[nodiscard]] std::string describe() const;
};

struct ParsedResponse {
  TrussDesign design;
  Rationale rationale;
  std::size_t extra_text = 0;            // bytes of prose outside the code
  std::vector<std::string> diagnostics;  // statements that were skipped
};

/// Candidate code and where it starts in the original response.
struct CodeBlock {
  std::string text;
  SourcePosition origin;
};

/// Contents of the last fenced block that assigns node_dict (the last block
/// when none does). Without such a block, the text from the first
/// `node_dict =` up to the next fence line.
std::variant<CodeBlock, ParseError> extract_code(std::string_view response);

/// Parses `node_dict` and `member_dict` literal assignments. Nothing in the
/// input is ever evaluated; other statements are skipped. Positions in errors
/// are relative to `origin`.
std::variant<ParsedResponse, ParseError> parse_design(std::string_view code, SourcePosition origin = {});

/// extract_code followed by parse_design, positions mapped to the response.
std::variant<ParsedResponse, ParseError> parse_response(std::string_view response);

}  // namespace trussloop
