#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pfsarnn/pfsa.hpp"

namespace pfsarnn {

/// Malformed input document. line/column are 1-based and 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line = 0, std::size_t column = 0);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Reads the automaton document format:
///   {"alphabet": [...], "states": [...], "initial": {state: weight},
///    "final": {state: weight}, "transitions": [{"from","symbol","to","weight"}]}
/// States missing from initial/final default to 0. Does not validate
/// normalization; call validate() for that.
Pfsa parse_pfsa(std::string_view text);
Pfsa load_pfsa(const std::filesystem::path& path);

/// Canonical document: rationals as "p/q", zero initial/final entries omitted.
std::string pfsa_to_json(const Pfsa& a);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace pfsarnn
