#pragma once

// Alignment-format XML reading and writing, and precision/recall/F1.

#include <expat.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "kgmatch/alignment.hpp"
#include "kgmatch/rdf_io.hpp"

namespace kgmatch {

inline constexpr std::string_view kAlignmentNamespace = "http://knowledgeweb.semanticweb.org/heterogeneity/alignment";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

class AlignmentXmlReader {
 public:
  AlignmentXmlReader(Alignment& out, std::vector<std::string>* warnings) : out_(out), warnings_(warnings) {}

  void parse(std::string_view input) {
    std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreateNS(nullptr, ' '), &XML_ParserFree);
    if (!parser) throw std::runtime_error("cannot create XML parser");
    parser_ = parser.get();
    XML_SetUserData(parser_, this);
    XML_SetElementHandler(parser_, &AlignmentXmlReader::on_start, &AlignmentXmlReader::on_end);
    XML_SetCharacterDataHandler(parser_, &AlignmentXmlReader::on_text);
    if (XML_Parse(parser_, input.data(), static_cast<int>(input.size()), XML_TRUE) == XML_STATUS_ERROR) {
      if (error_) throw *error_;
      throw ParseError(XML_GetCurrentLineNumber(parser_), XML_ErrorString(XML_GetErrorCode(parser_)));
    }
    if (error_) throw *error_;
    if (!saw_alignment_) throw ParseError(1, "no Alignment element");
  }

 private:
  struct Cell {
    std::optional<std::string> entity1, entity2, relation, measure;
    std::size_t line = 0;
  };

  static std::pair<std::string, std::string> split(const XML_Char* name) {
    std::string n(name);
    auto sp = n.find(' ');
    if (sp == std::string::npos) return {"", n};
    return {n.substr(0, sp), n.substr(sp + 1)};
  }

  static bool in_alignment_ns(const std::string& ns) { return ns.empty() || ns == kAlignmentNamespace; }

  void fail(const std::string& msg) {
    if (!error_) error_ = ParseError(XML_GetCurrentLineNumber(parser_), msg);
    XML_StopParser(parser_, XML_FALSE);
  }

  static void on_start(void* self, const XML_Char* name, const XML_Char** attrs) {
    static_cast<AlignmentXmlReader*>(self)->start(name, attrs);
  }
  static void on_end(void* self, const XML_Char* name) { static_cast<AlignmentXmlReader*>(self)->end(name); }
  static void on_text(void* self, const XML_Char* s, int len) {
    auto* r = static_cast<AlignmentXmlReader*>(self);
    if (r->capture_) r->text_.append(s, static_cast<std::size_t>(len));
  }

  void start(const XML_Char* raw, const XML_Char** attrs) {
    auto [ns, local] = split(raw);
    if (!in_alignment_ns(ns)) return;
    if (local == "Alignment") saw_alignment_ = true;
    if (local == "Cell") {
      if (cell_) return fail("nested Cell");
      cell_ = Cell{};
      cell_->line = XML_GetCurrentLineNumber(parser_);
      return;
    }
    if (!cell_) return;
    if (local == "entity1" || local == "entity2") {
      std::optional<std::string> resource;
      for (int i = 0; attrs[i]; i += 2) {
        auto [ans, alocal] = split(attrs[i]);
        if (alocal == "resource" && (ans.empty() || ans == vocab::rdf)) resource = attrs[i + 1];
      }
      if (!resource) return fail(local + " without rdf:resource");
      (local == "entity1" ? cell_->entity1 : cell_->entity2) = *resource;
    } else if (local == "relation" || local == "measure") {
      capture_ = true;
      text_.clear();
    }
  }

  void end(const XML_Char* raw) {
    auto [ns, local] = split(raw);
    if (!in_alignment_ns(ns) || !cell_) return;
    if (local == "relation" || local == "measure") {
      (local == "relation" ? cell_->relation : cell_->measure) = std::string(text::trim(text_));
      capture_ = false;
    } else if (local == "Cell") {
      finish_cell(*cell_);
      cell_.reset();
    }
  }

  void finish_cell(const Cell& c) {
    if (!c.entity1 || !c.entity2) return fail("Cell without entity1 and entity2");
    std::string relation = c.relation.value_or("=");
    if (relation != "=") {
      if (warnings_)
        warnings_->push_back("line " + std::to_string(c.line) + ": skipping cell with relation '" + relation + "'");
      return;
    }
    double confidence = 1.0;
    if (c.measure) {
      const auto& m = *c.measure;
      auto [ptr, ec] = std::from_chars(m.data(), m.data() + m.size(), confidence);
      if (ec != std::errc() || ptr != m.data() + m.size()) return fail("measure is not a number: '" + m + "'");
      if (!(confidence >= 0.0 && confidence <= 1.0)) return fail("measure outside [0,1]: " + m);
    }
    out_.add(Iri(*c.entity1), Iri(*c.entity2), confidence);
  }

  Alignment& out_;
  std::vector<std::string>* warnings_;
  XML_Parser parser_ = nullptr;
  std::optional<ParseError> error_;
  std::optional<Cell> cell_;
  bool capture_ = false;
  bool saw_alignment_ = false;
  std::string text_;
};

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      case '\t': out += "&#9;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Shortest decimal text that reads back to exactly `v`.
inline std::string format_confidence(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("cannot format confidence");
  return std::string(buf, ptr);
}

/// Parses Alignment-format XML. Cells whose relation is not "=" are skipped
/// and reported in `warnings`; a missing measure means 1.0.
inline Alignment parse_alignment(std::string_view xml, std::vector<std::string>* warnings = nullptr) {
  Alignment out;
  detail::AlignmentXmlReader reader(out, warnings);
  reader.parse(xml);
  return out;
}

inline Alignment read_alignment(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open alignment " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_alignment(buf.str(), warnings);
}

inline void write_alignment(const Alignment& a, std::ostream& out) {
  out << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n"
      << "<rdf:RDF xmlns=\"" << kAlignmentNamespace << "\"\n"
      << "         xmlns:rdf=\"http://www.w3.org/1999/02/22-rdf-syntax-ns#\"\n"
      << "         xmlns:xsd=\"http://www.w3.org/2001/XMLSchema#\">\n"
      << "<Alignment>\n"
      << "  <xml>yes</xml>\n"
      << "  <level>0</level>\n"
      << "  <type>?\?</type>\n";
  for (const auto& [k, e] : a) {
    out << "  <map>\n"
        << "    <Cell>\n"
        << "      <entity1 rdf:resource=\"" << detail::xml_escape(k.source.value) << "\"/>\n"
        << "      <entity2 rdf:resource=\"" << detail::xml_escape(k.target.value) << "\"/>\n"
        << "      <relation>" << detail::xml_escape(to_symbol(k.relation)) << "</relation>\n"
        << "      <measure rdf:datatype=\"http://www.w3.org/2001/XMLSchema#float\">" << format_confidence(e.confidence)
        << "</measure>\n"
        << "    </Cell>\n"
        << "  </map>\n";
  }
  out << "</Alignment>\n"
      << "</rdf:RDF>\n";
}

inline std::string to_alignment_xml(const Alignment& a) {
  std::ostringstream out;
  write_alignment(a, out);
  return out.str();
}

inline void write_alignment(const Alignment& a, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write alignment " + path.string());
  write_alignment(a, out);
  out.flush();
  if (!out) throw IoError("error writing alignment " + path.string());
}

struct EvalResult {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  std::size_t system_size = 0;
  std::size_t reference_size = 0;
  std::size_t correct = 0;
  std::chrono::duration<double> runtime{0};
};

/// Key-based correctness; confidences are ignored. An empty system has
/// precision 1; an empty reference has recall 1.
inline EvalResult evaluate(const Alignment& system, const Alignment& reference) {
  EvalResult r;
  r.system_size = system.size();
  r.reference_size = reference.size();
  for (const auto& [k, _] : system)
    if (reference.contains(k.source, k.target, k.relation)) ++r.correct;
  r.precision = r.system_size == 0 ? 1.0 : static_cast<double>(r.correct) / static_cast<double>(r.system_size);
  r.recall = r.reference_size == 0 ? 1.0 : static_cast<double>(r.correct) / static_cast<double>(r.reference_size);
  r.f1 = r.precision + r.recall == 0 ? 0.0 : 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

/// H:MM:SS, seconds truncated.
inline std::string format_hms(std::chrono::duration<double> d) {
  auto total = static_cast<long long>(std::floor(std::max(0.0, d.count())));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld:%02lld:%02lld", total / 3600, (total / 60) % 60, total % 60);
  return buf;
}

/// "Prec Rec F1 Size" values with three decimals, e.g. "0.750 0.500 0.600 4".
inline std::string format_eval_row(const EvalResult& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f %.3f %.3f %zu", r.precision, r.recall, r.f1, r.system_size);
  return buf;
}

}  // namespace kgmatch
