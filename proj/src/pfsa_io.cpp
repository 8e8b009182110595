#include "pfsarnn/pfsa_io.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace pfsarnn {

using nlohmann::json;

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : std::runtime_error(line == 0 ? message
                                   : "line " + std::to_string(line) + ", column " + std::to_string(column) +
                                         ": " + message),
      line_(line),
      column_(column) {}

namespace {

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

// Byte offset of every value in a document that already parsed, keyed by JSON pointer.
class Locator {
 public:
  explicit Locator(std::string_view text) : text_(text) { value(""); }

  ParseError error(const std::string& pointer, const std::string& message) const {
    const auto it = offsets_.find(pointer);
    if (it == offsets_.end()) return ParseError(message);
    const auto [line, column] = line_column(text_, it->second);
    return ParseError(message, line, column);
  }

 private:
  void skip() {
    while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
  }

  std::string string() {
    const std::size_t begin = ++i_;
    while (i_ < text_.size() && text_[i_] != '"') i_ += text_[i_] == '\\' ? 2 : 1;
    return std::string(text_.substr(begin, i_++ - begin));
  }

  void value(const std::string& pointer) {
    skip();
    offsets_.emplace(pointer, i_);
    if (i_ >= text_.size()) return;
    const char c = text_[i_];
    if (c == '{') {
      ++i_;
      for (skip(); i_ < text_.size() && text_[i_] != '}'; skip()) {
        if (text_[i_] == ',') {
          ++i_;
          continue;
        }
        const auto key = string();
        skip();
        ++i_;
        value(pointer + "/" + key);
      }
      ++i_;
    } else if (c == '[') {
      ++i_;
      std::size_t index = 0;
      for (skip(); i_ < text_.size() && text_[i_] != ']'; skip()) {
        if (text_[i_] == ',') {
          ++i_;
          continue;
        }
        value(pointer + "/" + std::to_string(index++));
      }
      ++i_;
    } else if (c == '"') {
      string();
    } else {
      while (i_ < text_.size() && std::string_view(",]} \t\r\n").find(text_[i_]) == std::string_view::npos) ++i_;
    }
  }

  std::string_view text_;
  std::size_t i_ = 0;
  std::map<std::string, std::size_t> offsets_;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : locate_(text) {}

  const json& member(const json& obj, const std::string& pointer, const char* name) const {
    if (!obj.is_object() || !obj.contains(name))
      throw locate_.error(pointer, std::string("missing field '") + name + "'");
    return obj.at(name);
  }

  std::string string_field(const json& obj, const std::string& pointer, const char* name) const {
    const auto& v = member(obj, pointer, name);
    if (!v.is_string()) throw locate_.error(pointer + "/" + name, "field '" + std::string(name) + "' must be a string");
    return v.get<std::string>();
  }

  Rational weight(const json& v, const std::string& pointer, const std::string& where) const {
    try {
      if (v.is_string()) return Rational::parse(v.get<std::string>());
      if (v.is_number_integer()) return Rational(v.get<long>());
    } catch (const std::exception& e) {
      throw locate_.error(pointer, where + ": " + e.what());
    }
    throw locate_.error(pointer, where + ": weights must be rational strings such as \"2/5\" or \"0.4\"");
  }

  std::vector<std::string> names(const json& doc, const char* field) const {
    const std::string pointer = std::string("/") + field;
    const auto& v = member(doc, "", field);
    if (!v.is_array()) throw locate_.error(pointer, std::string("field '") + field + "' must be an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string())
        throw locate_.error(pointer + "/" + std::to_string(i), std::string("field '") + field + "' must be an array of strings");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  std::size_t lookup(const std::vector<std::string>& names, const std::string& name, const std::string& what,
                     const std::string& pointer) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    throw locate_.error(pointer, "unknown " + what + " '" + name + "'");
  }

  std::vector<Rational> state_map(const json& doc, const char* field, const std::vector<std::string>& states) const {
    std::vector<Rational> out(states.size(), Rational(0));
    if (!doc.contains(field)) return out;
    const std::string pointer = std::string("/") + field;
    const auto& m = doc.at(field);
    if (!m.is_object()) throw locate_.error(pointer, std::string("field '") + field + "' must map state names to weights");
    for (const auto& [name, w] : m.items()) {
      out[lookup(states, name, "state", pointer + "/" + name)] =
          weight(w, pointer + "/" + name, std::string(field) + "." + name);
    }
    return out;
  }

  const Locator& locate() const { return locate_; }

 private:
  Locator locate_;
};

}  // namespace

Pfsa parse_pfsa(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("malformed JSON", line, column);
  }
  if (!doc.is_object()) throw ParseError("document must be a JSON object", 1, 1);
  const Reader r(text);

  auto alphabet = r.names(doc, "alphabet");
  auto states = r.names(doc, "states");
  auto initial = r.state_map(doc, "initial", states);
  auto final_weights = r.state_map(doc, "final", states);

  std::vector<Transition> transitions;
  const auto& list = r.member(doc, "", "transitions");
  if (!list.is_array()) throw r.locate().error("/transitions", "field 'transitions' must be an array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "transitions[" + std::to_string(i) + "]";
    const std::string pointer = "/transitions/" + std::to_string(i);
    const auto& t = list[i];
    if (!t.is_object()) throw r.locate().error(pointer, where + ": expected an object");
    transitions.push_back(
        {r.lookup(states, r.string_field(t, pointer, "from"), "state", pointer + "/from"),
         r.lookup(alphabet, r.string_field(t, pointer, "symbol"), "symbol", pointer + "/symbol"),
         r.lookup(states, r.string_field(t, pointer, "to"), "state", pointer + "/to"),
         r.weight(r.member(t, pointer, "weight"), pointer + "/weight", where + ".weight")});
  }
  try {
    return Pfsa(std::move(alphabet), std::move(states), std::move(transitions), std::move(initial),
                std::move(final_weights));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

Pfsa load_pfsa(const std::filesystem::path& path) { return parse_pfsa(read_file(path)); }

std::string pfsa_to_json(const Pfsa& a) {
  json doc;
  doc["alphabet"] = a.alphabet();
  doc["states"] = a.states();
  json initial = json::object(), final_weights = json::object();
  for (std::size_t q = 0; q < a.num_states(); ++q) {
    if (!a.initial()[q].is_zero()) initial[a.states()[q]] = a.initial()[q].str();
    if (!a.final_weights()[q].is_zero()) final_weights[a.states()[q]] = a.final_weights()[q].str();
  }
  doc["initial"] = initial;
  doc["final"] = final_weights;
  json transitions = json::array();
  for (const auto& t : a.transitions()) {
    if (t.weight.is_zero()) continue;
    transitions.push_back({{"from", a.states()[t.from]},
                           {"symbol", a.alphabet()[t.symbol]},
                           {"to", a.states()[t.to]},
                           {"weight", t.weight.str()}});
  }
  doc["transitions"] = transitions;
  return doc.dump(2) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

}  // namespace pfsarnn
