#include "pfsarnn/compiler.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "pfsarnn/pfsa_io.hpp"

namespace pfsarnn {

using nlohmann::json;

std::size_t ElmanParams::index_of(std::size_t state, std::size_t symbol) const {
  if (state >= num_states() || symbol >= num_symbols()) throw std::invalid_argument("coordinate out of range");
  return symbol * num_states() + state;
}

std::size_t ElmanParams::index_of(std::string_view state, std::string_view symbol) const {
  const auto q = std::find(states.begin(), states.end(), state);
  if (q == states.end()) throw std::invalid_argument("unknown state '" + std::string(state) + "'");
  return index_of(static_cast<std::size_t>(q - states.begin()), symbol_index(symbol));
}

std::pair<std::size_t, std::size_t> ElmanParams::inverse(std::size_t coordinate) const {
  if (coordinate >= dimension()) throw std::invalid_argument("coordinate out of range");
  return {coordinate % num_states(), coordinate / num_states()};
}

std::size_t ElmanParams::symbol_index(std::string_view symbol) const {
  const auto y = std::find(alphabet.begin(), alphabet.end(), symbol);
  if (y == alphabet.end()) throw UnknownSymbolError(std::string(symbol));
  return static_cast<std::size_t>(y - alphabet.begin());
}

Word ElmanParams::parse_word(std::string_view text) const {
  // Same splitting rule as Pfsa::parse_word.
  const bool single_char =
      std::all_of(alphabet.begin(), alphabet.end(), [](const std::string& s) { return s.size() == 1; });
  Word word;
  if (single_char) {
    for (char c : text) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      word.push_back(symbol_index(std::string_view(&c, 1)));
    }
    return word;
  }
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) word.push_back(symbol_index(token));
  return word;
}

std::string ElmanParams::format_word(const Word& word) const {
  const bool single_char =
      std::all_of(alphabet.begin(), alphabet.end(), [](const std::string& s) { return s.size() == 1; });
  std::string out;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (!single_char && i > 0) out += ' ';
    out += alphabet.at(word[i]);
  }
  return out;
}

ElmanParams compile(const Pfsa& a) {
  const auto n = a.num_states();
  const auto k = a.num_symbols();
  const auto d = n * k;
  ElmanParams p{a.alphabet(), a.states(), Matrix<Rational>(d, d), Matrix<Rational>(d, k),
                std::vector<Rational>(d, Rational(-1)), std::vector<Rational>(d, Rational(0))};
  // Row (q', y') gets w(q, y', q') in every column (q, .): the row symbol
  // labels the transition being taken.
  for (const auto& t : a.transitions()) {
    if (t.weight.is_zero()) continue;
    const auto row = p.index_of(t.to, t.symbol);
    for (std::size_t y = 0; y < k; ++y) p.U(row, p.index_of(t.from, y)) = t.weight;
  }
  for (std::size_t y = 0; y < k; ++y) {
    for (std::size_t q = 0; q < n; ++q) p.V(p.index_of(q, y), y) = Rational(1);
  }
  for (std::size_t q = 0; q < n; ++q) p.eta[p.index_of(q, 0)] = a.initial()[q];
  return p;
}

OutputMatrix output_matrix(const Pfsa& a) {
  const auto n = a.num_states();
  const auto k = a.num_symbols();
  std::vector<std::vector<Rational>> next(n, std::vector<Rational>(k + 1, Rational(0)));
  for (const auto& t : a.transitions()) next[t.from][t.symbol] += t.weight;
  for (std::size_t q = 0; q < n; ++q) next[q][k] = a.final_weights()[q];
  OutputMatrix out{Matrix<Rational>(k + 1, n * k)};
  for (std::size_t y = 0; y < k; ++y) {
    for (std::size_t q = 0; q < n; ++q) {
      for (std::size_t row = 0; row <= k; ++row) out.E(row, y * n + q) = next[q][row];
    }
  }
  return out;
}

namespace {

json matrix_json(const Matrix<Rational>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (const auto& x : m.row(r)) row.push_back(x.str());
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const std::vector<Rational>& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(x.str());
  return out;
}

Rational rational_at(const json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + ": expected a rational string");
  try {
    return Rational::parse(v.get<std::string>());
  } catch (const std::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
}

std::vector<Rational> vector_from(const json& doc, const char* field, std::size_t size) {
  if (!doc.contains(field) || !doc.at(field).is_array() || doc.at(field).size() != size)
    throw ParseError(std::string("field '") + field + "' must be an array of length " + std::to_string(size));
  std::vector<Rational> out;
  for (std::size_t i = 0; i < size; ++i)
    out.push_back(rational_at(doc.at(field)[i], std::string(field) + "[" + std::to_string(i) + "]"));
  return out;
}

Matrix<Rational> matrix_from(const json& doc, const char* field, std::size_t rows, std::size_t cols) {
  const std::string shape = std::to_string(rows) + "x" + std::to_string(cols);
  if (!doc.contains(field) || !doc.at(field).is_array() || doc.at(field).size() != rows)
    throw ParseError(std::string("field '") + field + "' must be a " + shape + " matrix");
  Matrix<Rational> m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = doc.at(field)[r];
    if (!row.is_array() || row.size() != cols)
      throw ParseError(std::string("field '") + field + "' must be a " + shape + " matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(r, c) = rational_at(row[c], std::string(field) + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return m;
}

std::vector<std::string> names(const json& doc, const char* field) {
  if (!doc.contains(field) || !doc.at(field).is_array()) throw ParseError(std::string("missing field '") + field + "'");
  std::vector<std::string> out;
  for (const auto& e : doc.at(field)) {
    if (!e.is_string()) throw ParseError(std::string("field '") + field + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

std::string params_to_json(const CompiledModel& model) {
  const auto& p = model.params;
  json doc;
  doc["D"] = p.dimension();
  doc["alphabet"] = p.alphabet;
  doc["states"] = p.states;
  json ordering = json::array();
  for (std::size_t d = 0; d < p.dimension(); ++d) {
    const auto [q, y] = p.inverse(d);
    ordering.push_back({p.states[q], p.alphabet[y]});
  }
  doc["ordering"] = ordering;
  doc["U"] = matrix_json(p.U);
  doc["V"] = matrix_json(p.V);
  doc["b"] = vector_json(p.b);
  doc["eta"] = vector_json(p.eta);
  doc["E"] = matrix_json(model.output.E);
  json rows = p.alphabet;
  rows.push_back("EOS");
  doc["E_rows"] = rows;
  return doc.dump(1) + "\n";
}

CompiledModel parse_params(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError("malformed JSON", line, column);
  }
  if (!doc.is_object()) throw ParseError("params document must be a JSON object", 1, 1);
  ElmanParams p;
  p.alphabet = names(doc, "alphabet");
  p.states = names(doc, "states");
  if (p.alphabet.empty() || p.states.empty()) throw ParseError("params need a nonempty alphabet and state list");
  const auto d = p.dimension();
  if (doc.contains("D") && (!doc.at("D").is_number_unsigned() || doc.at("D").get<std::size_t>() != d))
    throw ParseError("field 'D' disagrees with |states| * |alphabet|");
  p.U = matrix_from(doc, "U", d, d);
  p.V = matrix_from(doc, "V", d, p.num_symbols());
  p.b = vector_from(doc, "b", d);
  p.eta = vector_from(doc, "eta", d);
  OutputMatrix output{matrix_from(doc, "E", p.num_symbols() + 1, d)};
  return {std::move(p), std::move(output)};
}

}  // namespace pfsarnn
