#pragma once

// Readers for N-Triples, Turtle and RDF/XML, plus a canonical N-Triples
// writer. Blank nodes are renamed to `_:b0`, `_:b1`, ... in document order.

#include <expat.h>

#include <cstdio>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgmatch/rdf.hpp"
#include "kgmatch/text.hpp"

namespace kgmatch {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line), message_(message) {}
  std::size_t line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

class UnsupportedFormat : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RdfFormat { automatic, ntriples, turtle, rdfxml };

inline RdfFormat parse_rdf_format(std::string_view s) {
  if (s.empty() || s == "auto") return RdfFormat::automatic;
  if (s == "ntriples" || s == "nt") return RdfFormat::ntriples;
  if (s == "turtle" || s == "ttl") return RdfFormat::turtle;
  if (s == "rdfxml" || s == "xml" || s == "owl") return RdfFormat::rdfxml;
  throw UnsupportedFormat("unknown RDF format: " + std::string(s));
}

inline RdfFormat format_from_extension(const std::filesystem::path& path) {
  auto ext = text::to_lower(path.extension().string());
  if (ext == ".nt") return RdfFormat::ntriples;
  if (ext == ".ttl" || ext == ".turtle") return RdfFormat::turtle;
  if (ext == ".rdf" || ext == ".owl" || ext == ".xml") return RdfFormat::rdfxml;
  throw UnsupportedFormat("cannot infer RDF format from extension '" + ext + "' of " + path.string());
}

/// Resolves `ref` against `base` (simplified RFC 3986: no dot-segment removal).
inline std::string resolve_iri(std::string_view base, std::string_view ref) {
  if (has_iri_scheme(ref) || base.empty()) return std::string(ref);
  std::string_view b = base;
  if (auto hash = b.find('#'); hash != std::string_view::npos) b = b.substr(0, hash);
  if (ref.empty()) return std::string(b);
  if (ref[0] == '#') return std::string(b) + std::string(ref);
  auto scheme_end = b.find(':');
  if (ref.size() > 1 && ref[0] == '/' && ref[1] == '/') return std::string(b.substr(0, scheme_end + 1)) + std::string(ref);
  if (ref[0] == '/') {
    auto authority = b.find("//", scheme_end);
    std::size_t path_start = authority == std::string_view::npos ? scheme_end + 1 : b.find('/', authority + 2);
    if (path_start == std::string_view::npos) path_start = b.size();
    return std::string(b.substr(0, path_start)) + std::string(ref);
  }
  if (ref[0] == '?') {
    auto q = b.find('?');
    return std::string(b.substr(0, q)) + std::string(ref);
  }
  auto slash = b.rfind('/');
  if (slash == std::string_view::npos || slash < scheme_end) return std::string(b) + "/" + std::string(ref);
  return std::string(b.substr(0, slash + 1)) + std::string(ref);
}

namespace detail {

/// Maps document blank-node labels (and anonymous nodes) to `_:bN`.
class BlankNodeNamer {
 public:
  Iri labeled(const std::string& label) {
    auto [it, inserted] = labels_.try_emplace(label, "");
    if (inserted) it->second = next_name();
    return Iri(it->second);
  }
  Iri fresh() { return Iri(next_name()); }

 private:
  std::string next_name() { return "_:b" + std::to_string(counter_++); }
  std::unordered_map<std::string, std::string> labels_;
  std::size_t counter_ = 0;
};

/// Recursive-descent parser for Turtle; N-Triples is parsed as the subset it is.
class TurtleParser {
 public:
  TurtleParser(std::string_view input, std::string base, bool ntriples_only)
      : in_(input), base_(std::move(base)), ntriples_(ntriples_only) {}

  std::vector<Triple> parse() {
    skip_ws();
    while (pos_ < in_.size()) {
      statement();
      skip_ws();
    }
    return std::move(triples_);
  }

  std::map<std::string, std::string> prefixes() const { return prefixes_; }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, msg); }

  bool eof() const { return pos_ >= in_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < in_.size() ? in_[pos_ + ahead] : '\0'; }
  char get() {
    char c = in_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_ws() {
    while (!eof()) {
      char c = peek();
      if (c == '#') {
        while (!eof() && peek() != '\n') get();
      } else if (text::is_space(c)) {
        get();
      } else {
        break;
      }
    }
  }

  void expect(char c) {
    skip_ws();
    if (eof() || peek() != c) fail(std::string("expected '") + c + "'" + (eof() ? " at end of input" : std::string(" before '") + peek() + "'"));
    get();
  }

  bool keyword_ahead(std::string_view kw, bool case_insensitive) const {
    if (pos_ + kw.size() > in_.size()) return false;
    for (std::size_t i = 0; i < kw.size(); ++i) {
      char a = in_[pos_ + i], b = kw[i];
      if (case_insensitive ? text::to_lower(std::string(1, a))[0] != b : a != b) return false;
    }
    char after = pos_ + kw.size() < in_.size() ? in_[pos_ + kw.size()] : ' ';
    return text::is_space(after) || after == '<' || after == '#';
  }

  void statement() {
    if (!ntriples_) {
      if (peek() == '@') {
        if (keyword_ahead("@prefix", false)) { pos_ += 7; prefix_decl(); expect('.'); return; }
        if (keyword_ahead("@base", false)) { pos_ += 5; base_decl(); expect('.'); return; }
        fail("unknown directive");
      }
      if (keyword_ahead("prefix", true)) { pos_ += 6; prefix_decl(); return; }
      if (keyword_ahead("base", true)) { pos_ += 4; base_decl(); return; }
    }
    triples_statement();
    expect('.');
  }

  void prefix_decl() {
    skip_ws();
    std::string label;
    while (!eof() && peek() != ':') {
      char c = get();
      if (text::is_space(c)) fail("malformed prefix label");
      label += c;
    }
    if (eof()) fail("unterminated prefix declaration");
    get();  // ':'
    skip_ws();
    if (peek() != '<') fail("expected IRI in prefix declaration");
    prefixes_[label] = iri_ref();
  }

  void base_decl() {
    skip_ws();
    if (peek() != '<') fail("expected IRI in base declaration");
    base_ = iri_ref();
  }

  void triples_statement() {
    skip_ws();
    if (peek() == '[' && !ntriples_) {
      Iri subject = blank_property_list();
      skip_ws();
      if (peek() != '.') predicate_object_list(subject);
      return;
    }
    Iri subject = subject_term();
    predicate_object_list(subject);
  }

  Iri subject_term() {
    skip_ws();
    char c = peek();
    if (c == '<') return Iri(iri_ref());
    if (c == '_' && peek(1) == ':') return blank_label();
    if (c == '(' && !ntriples_) return collection();
    if (!ntriples_) return prefixed_name();
    fail("expected subject");
  }

  void predicate_object_list(const Iri& subject) {
    for (;;) {
      Iri predicate = verb();
      object_list(subject, predicate);
      skip_ws();
      if (ntriples_ || peek() != ';') return;
      while (peek() == ';') {
        get();
        skip_ws();
      }
      if (peek() == '.' || peek() == ']' || eof()) return;
    }
  }

  Iri verb() {
    skip_ws();
    if (!ntriples_ && peek() == 'a') {
      char after = peek(1);
      if (text::is_space(after) || after == '<' || after == '"' || after == '[' || after == '_' || after == '(') {
        get();
        return Iri(vocab::rdf_type);
      }
    }
    if (peek() == '<') return Iri(iri_ref());
    if (ntriples_) fail("expected predicate IRI");
    return prefixed_name();
  }

  void object_list(const Iri& subject, const Iri& predicate) {
    for (;;) {
      Term object = object_term();
      triples_.push_back(Triple{subject, predicate, std::move(object)});
      skip_ws();
      if (ntriples_ || peek() != ',') return;
      get();
    }
  }

  Term object_term() {
    skip_ws();
    char c = peek();
    if (eof()) fail("expected object at end of input");
    if (c == '<') return Iri(iri_ref());
    if (c == '_' && peek(1) == ':') return blank_label();
    if (c == '"' || (c == '\'' && !ntriples_)) return literal();
    if (ntriples_) fail("expected object");
    if (c == '[') return blank_property_list();
    if (c == '(') return collection();
    if (c == '+' || c == '-' || c == '.' || text::is_ascii_digit(c)) return numeric_literal();
    if (keyword_ahead_token("true")) { pos_ += 4; return Literal{"true", std::nullopt, Iri(vocab::xsd_boolean)}; }
    if (keyword_ahead_token("false")) { pos_ += 5; return Literal{"false", std::nullopt, Iri(vocab::xsd_boolean)}; }
    return prefixed_name();
  }

  bool keyword_ahead_token(std::string_view kw) const {
    if (in_.substr(pos_, kw.size()) != kw) return false;
    char after = peek(kw.size());
    return !(text::is_ascii_alnum(after) || after == '_' || after == ':' || after == '-');
  }

  Iri blank_property_list() {
    get();  // '['
    Iri node = blanks_.fresh();
    skip_ws();
    if (peek() != ']') predicate_object_list(node);
    expect(']');
    return node;
  }

  Iri collection() {
    get();  // '('
    std::vector<Term> items;
    skip_ws();
    while (!eof() && peek() != ')') {
      items.push_back(object_term());
      skip_ws();
    }
    expect(')');
    if (items.empty()) return Iri(vocab::rdf_nil);
    std::vector<Iri> nodes;
    for (std::size_t i = 0; i < items.size(); ++i) nodes.push_back(blanks_.fresh());
    for (std::size_t i = 0; i < items.size(); ++i) {
      triples_.push_back(Triple{nodes[i], Iri(vocab::rdf_first), std::move(items[i])});
      triples_.push_back(Triple{nodes[i], Iri(vocab::rdf_rest), i + 1 < items.size() ? Term(nodes[i + 1]) : Term(Iri(vocab::rdf_nil))});
    }
    return nodes.front();
  }

  Iri blank_label() {
    pos_ += 2;
    std::string label;
    while (!eof()) {
      char c = peek();
      if (text::is_ascii_alnum(c) || c == '_' || c == '-' || c == '.' || static_cast<unsigned char>(c) >= 0x80) {
        label += get();
      } else {
        break;
      }
    }
    while (!label.empty() && label.back() == '.') {
      label.pop_back();
      --pos_;
    }
    if (label.empty()) fail("empty blank node label");
    return blanks_.labeled(label);
  }

  std::uint32_t hex_escape(int digits) {
    std::uint32_t cp = 0;
    for (int i = 0; i < digits; ++i) {
      if (eof()) fail("truncated unicode escape");
      char h = get();
      cp <<= 4;
      if (h >= '0' && h <= '9') cp |= h - '0';
      else if (h >= 'a' && h <= 'f') cp |= h - 'a' + 10;
      else if (h >= 'A' && h <= 'F') cp |= h - 'A' + 10;
      else fail("invalid hex digit in unicode escape");
    }
    return cp;
  }

  std::string iri_ref() {
    get();  // '<'
    std::string value;
    for (;;) {
      if (eof()) fail("unterminated IRI");
      char c = get();
      if (c == '>') break;
      if (c == '\n' || c == ' ') fail("invalid character in IRI");
      if (c == '\\') {
        char e = eof() ? '\0' : get();
        if (e == 'u') text::append_utf8(value, hex_escape(4));
        else if (e == 'U') text::append_utf8(value, hex_escape(8));
        else fail("invalid escape in IRI");
        continue;
      }
      value += c;
    }
    if (ntriples_) {
      if (!has_iri_scheme(value)) fail("relative IRI not allowed in N-Triples: " + value);
      return value;
    }
    return resolve_iri(base_, value);
  }

  static bool pn_char(char c) {
    return text::is_ascii_alnum(c) || c == '_' || c == '-' || c == '.' || c == ':' || c == '%' ||
           static_cast<unsigned char>(c) >= 0x80;
  }

  Iri prefixed_name() {
    std::string label;
    while (!eof() && peek() != ':') {
      char c = peek();
      if (!(text::is_ascii_alnum(c) || c == '_' || c == '-' || c == '.' || static_cast<unsigned char>(c) >= 0x80))
        fail(std::string("unexpected character '") + c + "'");
      label += get();
    }
    if (eof()) fail("unexpected end of input in prefixed name");
    get();  // ':'
    std::string local;
    while (!eof()) {
      char c = peek();
      if (c == '\\' && pos_ + 1 < in_.size()) {
        get();
        local += get();
      } else if (pn_char(c)) {
        local += get();
      } else {
        break;
      }
    }
    while (!local.empty() && local.back() == '.') {
      local.pop_back();
      --pos_;
    }
    auto it = prefixes_.find(label);
    if (it == prefixes_.end()) fail("undeclared prefix '" + label + "'");
    return Iri(it->second + local);
  }

  Literal literal() {
    char quote = get();
    bool long_form = peek() == quote && peek(1) == quote;
    if (long_form) {
      get();
      get();
    }
    std::string lexical;
    for (;;) {
      if (eof()) fail("unterminated string literal");
      char c = get();
      if (c == quote) {
        if (!long_form) break;
        if (peek() == quote && peek(1) == quote) {
          get();
          get();
          // a run of more than three quotes ends with the last three
          while (peek() == quote) lexical += get();
          break;
        }
        lexical += c;
        continue;
      }
      if (!long_form && (c == '\n' || c == '\r')) fail("newline in short string literal");
      if (c == '\\') {
        if (eof()) fail("unterminated escape");
        char e = get();
        switch (e) {
          case 't': lexical += '\t'; break;
          case 'b': lexical += '\b'; break;
          case 'n': lexical += '\n'; break;
          case 'r': lexical += '\r'; break;
          case 'f': lexical += '\f'; break;
          case '"': lexical += '"'; break;
          case '\'': lexical += '\''; break;
          case '\\': lexical += '\\'; break;
          case 'u': text::append_utf8(lexical, hex_escape(4)); break;
          case 'U': text::append_utf8(lexical, hex_escape(8)); break;
          default: fail(std::string("invalid string escape \\") + e);
        }
        continue;
      }
      lexical += c;
    }
    Literal lit{std::move(lexical), std::nullopt, std::nullopt};
    if (peek() == '@') {
      get();
      std::string lang;
      while (!eof() && (text::is_ascii_alnum(peek()) || peek() == '-')) lang += get();
      if (lang.empty()) fail("empty language tag");
      lit.language = std::move(lang);
    } else if (peek() == '^' && peek(1) == '^') {
      pos_ += 2;
      if (peek() == '<') lit.datatype = Iri(iri_ref());
      else if (ntriples_) fail("expected datatype IRI");
      else lit.datatype = prefixed_name();
    }
    return lit;
  }

  Literal numeric_literal() {
    std::string lexical;
    if (peek() == '+' || peek() == '-') lexical += get();
    bool dot = false, exp = false;
    while (!eof()) {
      char c = peek();
      if (text::is_ascii_digit(c)) {
        lexical += get();
      } else if (c == '.' && !dot && !exp && text::is_ascii_digit(peek(1))) {
        dot = true;
        lexical += get();
      } else if ((c == 'e' || c == 'E') && !exp) {
        exp = true;
        lexical += get();
        if (peek() == '+' || peek() == '-') lexical += get();
      } else {
        break;
      }
    }
    if (lexical.empty() || lexical == "+" || lexical == "-") fail("malformed numeric literal");
    const std::string& dt = exp ? vocab::xsd_double : dot ? vocab::xsd_decimal : vocab::xsd_integer;
    return Literal{std::move(lexical), std::nullopt, Iri(dt)};
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::string base_;
  bool ntriples_;
  BlankNodeNamer blanks_;
  std::map<std::string, std::string> prefixes_;
  std::vector<Triple> triples_;
};

/// SAX-style RDF/XML reader built on expat.
class RdfXmlParser {
 public:
  explicit RdfXmlParser(std::string base) : base_(std::move(base)) {}

  std::vector<Triple> parse(std::string_view input) {
    std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreateNS(nullptr, ' '), &XML_ParserFree);
    if (!parser) throw std::runtime_error("cannot create XML parser");
    parser_ = parser.get();
    XML_SetUserData(parser_, this);
    XML_SetElementHandler(parser_, &RdfXmlParser::on_start, &RdfXmlParser::on_end);
    XML_SetCharacterDataHandler(parser_, &RdfXmlParser::on_text);
    XML_SetStartNamespaceDeclHandler(parser_, &RdfXmlParser::on_namespace);
    if (XML_Parse(parser_, input.data(), static_cast<int>(input.size()), XML_TRUE) == XML_STATUS_ERROR) {
      if (error_) throw *error_;
      throw ParseError(XML_GetCurrentLineNumber(parser_), XML_ErrorString(XML_GetErrorCode(parser_)));
    }
    if (error_) throw *error_;
    return std::move(triples_);
  }

  std::map<std::string, std::string> prefixes() const { return prefixes_; }

 private:
  enum class FrameKind { root, node, property, resource_node, literal_xml };

  struct Frame {
    FrameKind kind;
    Iri subject;  // node: the node; property: the owning node
    Iri predicate;
    std::string lang;
    std::string base;
    std::optional<Iri> datatype;
    std::string text;
    bool has_object = false;
    bool collection = false;
    std::vector<Iri> items;
    int li_counter = 0;
    int literal_depth = 0;
  };

  static std::string expand(const XML_Char* name) {
    std::string n(name);
    auto sp = n.find(' ');
    if (sp == std::string::npos) return n;
    return n.substr(0, sp) + n.substr(sp + 1);
  }

  static inline const std::string xml_ns = "http://www.w3.org/XML/1998/namespace";
  static std::string rdf(std::string_view local) { return vocab::term(vocab::rdf, local); }

  void fail(const std::string& msg) {
    if (!error_) error_ = ParseError(XML_GetCurrentLineNumber(parser_), msg);
    XML_StopParser(parser_, XML_FALSE);
  }

  static void on_namespace(void* self, const XML_Char* prefix, const XML_Char* uri) {
    auto* p = static_cast<RdfXmlParser*>(self);
    if (uri) p->prefixes_[prefix ? prefix : ""] = uri;
  }

  static void on_start(void* self, const XML_Char* name, const XML_Char** attrs) {
    static_cast<RdfXmlParser*>(self)->start(expand(name), attrs);
  }
  static void on_end(void* self, const XML_Char* name) { static_cast<RdfXmlParser*>(self)->end(expand(name)); }
  static void on_text(void* self, const XML_Char* s, int len) {
    auto* p = static_cast<RdfXmlParser*>(self);
    if (!p->stack_.empty()) p->stack_.back().text.append(s, static_cast<std::size_t>(len));
  }

  std::string current_lang() const { return stack_.empty() ? std::string() : stack_.back().lang; }
  std::string current_base() const { return stack_.empty() ? base_ : stack_.back().base; }

  Iri node_subject(const std::map<std::string, std::string>& a, const std::string& base) {
    if (auto it = a.find(rdf("about")); it != a.end()) return Iri(resolve_iri(base, it->second));
    if (auto it = a.find(rdf("ID")); it != a.end()) return Iri(resolve_iri(base, "#" + it->second));
    if (auto it = a.find(rdf("nodeID")); it != a.end()) return blanks_.labeled(it->second);
    return blanks_.fresh();
  }

  static bool is_syntax_attribute(const std::string& key) {
    static const std::set<std::string> syntax = {
        rdf("about"), rdf("ID"), rdf("nodeID"), rdf("resource"), rdf("datatype"), rdf("parseType"), rdf("aboutEach"), rdf("bagID")};
    return syntax.count(key) != 0 || key.rfind(xml_ns, 0) == 0 || key.rfind("xmlns", 0) == 0;
  }

  void emit_property_attributes(const Iri& subject, const std::map<std::string, std::string>& a, const std::string& lang) {
    for (const auto& [key, value] : a) {
      if (is_syntax_attribute(key)) continue;
      if (key == vocab::rdf_type) {
        triples_.push_back(Triple{subject, Iri(key), Iri(resolve_iri(current_base(), value))});
      } else {
        Literal lit{value, lang.empty() ? std::nullopt : std::optional<std::string>(lang), std::nullopt};
        triples_.push_back(Triple{subject, Iri(key), std::move(lit)});
      }
    }
  }

  void start(const std::string& name, const XML_Char** raw_attrs) {
    std::map<std::string, std::string> a;
    for (std::size_t i = 0; raw_attrs[i]; i += 2) a[expand(raw_attrs[i])] = raw_attrs[i + 1];

    if (!stack_.empty() && stack_.back().kind == FrameKind::literal_xml) {
      auto& f = stack_.back();
      ++f.literal_depth;
      f.text += "<" + name + ">";
      return;
    }

    Frame frame;
    frame.lang = current_lang();
    frame.base = current_base();
    if (auto it = a.find(xml_ns + "lang"); it != a.end()) frame.lang = it->second;
    if (auto it = a.find(xml_ns + "base"); it != a.end()) frame.base = resolve_iri(frame.base, it->second);

    bool expect_node = stack_.empty() || stack_.back().kind == FrameKind::root || stack_.back().kind == FrameKind::property;
    if (stack_.empty() && name == rdf("RDF")) {
      frame.kind = FrameKind::root;
      stack_.push_back(std::move(frame));
      return;
    }

    if (expect_node) {
      frame.kind = FrameKind::node;
      frame.subject = node_subject(a, frame.base);
      if (name != rdf("Description"))
        triples_.push_back(Triple{frame.subject, Iri(vocab::rdf_type), Iri(name)});
      emit_property_attributes(frame.subject, a, frame.lang);
      if (!stack_.empty() && stack_.back().kind == FrameKind::property) {
        auto& parent = stack_.back();
        if (parent.collection) {
          parent.items.push_back(frame.subject);
        } else {
          if (parent.has_object) {
            fail("property element has more than one object node");
            return;
          }
          parent.has_object = true;
          triples_.push_back(Triple{parent.subject, parent.predicate, frame.subject});
        }
      }
      stack_.push_back(std::move(frame));
      return;
    }

    // property element
    auto& owner = stack_.back();
    frame.kind = FrameKind::property;
    frame.subject = owner.subject;
    if (name == rdf("li")) frame.predicate = Iri(rdf("_" + std::to_string(++owner.li_counter)));
    else frame.predicate = Iri(name);

    if (auto it = a.find(rdf("datatype")); it != a.end()) frame.datatype = Iri(resolve_iri(frame.base, it->second));

    std::string parse_type;
    if (auto it = a.find(rdf("parseType")); it != a.end()) parse_type = it->second;

    if (parse_type == "Resource") {
      Iri node = blanks_.fresh();
      triples_.push_back(Triple{frame.subject, frame.predicate, node});
      frame.kind = FrameKind::resource_node;
      frame.subject = node;
      stack_.push_back(std::move(frame));
      return;
    }
    if (parse_type == "Collection") {
      frame.collection = true;
      frame.has_object = true;
      stack_.push_back(std::move(frame));
      return;
    }
    if (parse_type == "Literal") {
      frame.kind = FrameKind::literal_xml;
      frame.datatype = Iri(vocab::rdf_xml_literal);
      stack_.push_back(std::move(frame));
      return;
    }

    std::optional<Iri> object;
    if (auto it = a.find(rdf("resource")); it != a.end()) object = Iri(resolve_iri(frame.base, it->second));
    else if (auto it2 = a.find(rdf("nodeID")); it2 != a.end()) object = blanks_.labeled(it2->second);

    bool has_property_attrs = false;
    for (const auto& [key, _] : a)
      if (!is_syntax_attribute(key)) has_property_attrs = true;
    if (!object && has_property_attrs) object = blanks_.fresh();

    if (object) {
      triples_.push_back(Triple{frame.subject, frame.predicate, *object});
      emit_property_attributes(*object, a, frame.lang);
      frame.has_object = true;
    }
    stack_.push_back(std::move(frame));
  }

  void end(const std::string& name) {
    if (stack_.empty()) return;
    auto& f = stack_.back();
    if (f.kind == FrameKind::literal_xml && f.literal_depth > 0) {
      --f.literal_depth;
      f.text += "</" + name + ">";
      return;
    }
    if (f.kind == FrameKind::property || f.kind == FrameKind::literal_xml) {
      if (f.collection) {
        Iri head(vocab::rdf_nil);
        std::vector<Iri> cells;
        for (std::size_t i = 0; i < f.items.size(); ++i) cells.push_back(blanks_.fresh());
        for (std::size_t i = 0; i < f.items.size(); ++i) {
          triples_.push_back(Triple{cells[i], Iri(vocab::rdf_first), f.items[i]});
          triples_.push_back(Triple{cells[i], Iri(vocab::rdf_rest), i + 1 < cells.size() ? cells[i + 1] : Iri(vocab::rdf_nil)});
        }
        if (!cells.empty()) head = cells.front();
        triples_.push_back(Triple{f.subject, f.predicate, head});
      } else if (!f.has_object) {
        Literal lit{f.text, std::nullopt, f.datatype};
        if (!f.datatype && !f.lang.empty()) lit.language = f.lang;
        triples_.push_back(Triple{f.subject, f.predicate, std::move(lit)});
      } else if (!text::trim(f.text).empty()) {
        fail("property element mixes text and object node");
      }
    }
    stack_.pop_back();
  }

  std::string base_;
  XML_Parser parser_ = nullptr;
  std::vector<Frame> stack_;
  BlankNodeNamer blanks_;
  std::vector<Triple> triples_;
  std::map<std::string, std::string> prefixes_;
  std::optional<ParseError> error_;
};

}  // namespace detail

inline Graph parse_rdf(std::string_view content, RdfFormat format, std::string name = {}, std::string base = {}) {
  switch (format) {
    case RdfFormat::ntriples: {
      detail::TurtleParser p(content, base, true);
      auto triples = p.parse();
      return Graph(std::move(name), std::move(triples));
    }
    case RdfFormat::turtle: {
      detail::TurtleParser p(content, base, false);
      auto triples = p.parse();
      return Graph(std::move(name), std::move(triples), p.prefixes());
    }
    case RdfFormat::rdfxml: {
      detail::RdfXmlParser p(base);
      auto triples = p.parse(content);
      return Graph(std::move(name), std::move(triples), p.prefixes());
    }
    case RdfFormat::automatic: break;
  }
  throw UnsupportedFormat("format must be explicit when parsing from memory");
}

/// Loads one ontology file. The graph is named after the file stem.
inline Graph load_graph(const std::filesystem::path& path, RdfFormat format = RdfFormat::automatic) {
  if (format == RdfFormat::automatic) format = format_from_extension(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string base = "file://" + std::filesystem::absolute(path).string();
  return parse_rdf(buf.str(), format, path.stem().string(), base);
}

namespace detail {
inline void write_escaped(std::ostream& out, std::string_view s) {
  for (char c : s) {
    switch (c) {
      case '\\': out << "\\\\"; break;
      case '"': out << "\\\""; break;
      case '\n': out << "\\n"; break;
      case '\r': out << "\\r"; break;
      case '\t': out << "\\t"; break;
      default: out << c;
    }
  }
}
}  // namespace detail

inline std::string to_ntriples(const Iri& iri) {
  if (iri.is_blank()) return iri.value;
  std::string out = "<";
  for (char c : iri.value) {
    if (c == '>' || c == '\\') {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\u%04X", static_cast<unsigned>(static_cast<unsigned char>(c)));
      out += buf;
    } else {
      out += c;
    }
  }
  return out + ">";
}

inline std::string to_ntriples(const Term& t) {
  if (is_iri(t)) return to_ntriples(as_iri(t));
  const auto& lit = as_literal(t);
  std::ostringstream out;
  out << '"';
  detail::write_escaped(out, lit.lexical);
  out << '"';
  if (lit.language) out << '@' << *lit.language;
  else if (lit.datatype) out << "^^" << to_ntriples(*lit.datatype);
  return out.str();
}

inline std::string to_ntriples(const Triple& t) {
  return to_ntriples(t.subject) + " " + to_ntriples(t.predicate) + " " + to_ntriples(t.object) + " .";
}

/// Canonical serialization: one statement per line, lines sorted bytewise.
inline void write_ntriples(const Graph& g, std::ostream& out) {
  std::vector<std::string> lines;
  lines.reserve(g.size());
  for (const auto& t : g.triples()) lines.push_back(to_ntriples(t));
  std::sort(lines.begin(), lines.end());
  for (const auto& l : lines) out << l << '\n';
}

inline std::string to_ntriples(const Graph& g) {
  std::ostringstream out;
  write_ntriples(g, out);
  return out.str();
}

}  // namespace kgmatch
