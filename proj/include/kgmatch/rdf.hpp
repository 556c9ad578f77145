#pragma once

// In-memory RDF model: IRIs, literals, triples and an immutable,
// subject-indexed graph.

#include <algorithm>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace kgmatch {

namespace vocab {
inline constexpr std::string_view rdf = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
inline constexpr std::string_view rdfs = "http://www.w3.org/2000/01/rdf-schema#";
inline constexpr std::string_view owl = "http://www.w3.org/2002/07/owl#";
inline constexpr std::string_view skos = "http://www.w3.org/2004/02/skos/core#";
inline constexpr std::string_view dc = "http://purl.org/dc/elements/1.1/";
inline constexpr std::string_view dcterms = "http://purl.org/dc/terms/";
inline constexpr std::string_view schema = "http://schema.org/";
inline constexpr std::string_view xsd = "http://www.w3.org/2001/XMLSchema#";

inline std::string term(std::string_view ns, std::string_view local) {
  std::string out(ns);
  out += local;
  return out;
}

inline const std::string rdf_type = term(rdf, "type");
inline const std::string rdf_first = term(rdf, "first");
inline const std::string rdf_rest = term(rdf, "rest");
inline const std::string rdf_nil = term(rdf, "nil");
inline const std::string rdf_property = term(rdf, "Property");
inline const std::string rdf_lang_string = term(rdf, "langString");
inline const std::string rdf_xml_literal = term(rdf, "XMLLiteral");
inline const std::string rdfs_label = term(rdfs, "label");
inline const std::string rdfs_comment = term(rdfs, "comment");
inline const std::string owl_class = term(owl, "Class");
inline const std::string owl_object_property = term(owl, "ObjectProperty");
inline const std::string owl_datatype_property = term(owl, "DatatypeProperty");
inline const std::string owl_annotation_property = term(owl, "AnnotationProperty");
inline const std::string owl_ontology = term(owl, "Ontology");
inline const std::string skos_pref_label = term(skos, "prefLabel");
inline const std::string skos_alt_label = term(skos, "altLabel");
inline const std::string skos_hidden_label = term(skos, "hiddenLabel");
inline const std::string dc_description = term(dc, "description");
inline const std::string schema_name = term(schema, "name");
inline const std::string schema_comment = term(schema, "comment");
inline const std::string xsd_string = term(xsd, "string");
inline const std::string xsd_integer = term(xsd, "integer");
inline const std::string xsd_decimal = term(xsd, "decimal");
inline const std::string xsd_double = term(xsd, "double");
inline const std::string xsd_boolean = term(xsd, "boolean");
}  // namespace vocab

/// An absolute IRI. Blank nodes are represented as IRIs of the form `_:bN`.
struct Iri {
  std::string value;

  Iri() = default;
  explicit Iri(std::string v) : value(std::move(v)) {}

  bool is_blank() const { return value.size() > 2 && value[0] == '_' && value[1] == ':'; }

  /// Substring after the last '#', else after the last '/'. Blank nodes have
  /// no fragment.
  std::string_view fragment() const {
    if (is_blank()) return {};
    std::string_view v = value;
    if (auto hash = v.rfind('#'); hash != std::string_view::npos) return v.substr(hash + 1);
    if (auto slash = v.rfind('/'); slash != std::string_view::npos) return v.substr(slash + 1);
    return v;
  }

  friend auto operator<=>(const Iri&, const Iri&) = default;
  friend bool operator==(const Iri&, const Iri&) = default;
};

/// True when `s` looks like an absolute IRI: a scheme followed by ':'.
inline bool has_iri_scheme(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos || colon == 0) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  if (!alpha(s[0])) return s.substr(0, 2) == "_:";
  for (std::size_t i = 1; i < colon; ++i) {
    char c = s[i];
    if (!alpha(c) && !(c >= '0' && c <= '9') && c != '+' && c != '-' && c != '.') return false;
  }
  return true;
}

struct Literal {
  std::string lexical;
  std::optional<std::string> language;
  std::optional<Iri> datatype;

  /// Untagged or tagged `en` / `en-*`.
  bool is_english_or_untagged() const {
    if (!language) return true;
    const std::string& l = *language;
    if (l.size() < 2) return false;
    auto lower = [](char c) { return static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c); };
    if (lower(l[0]) != 'e' || lower(l[1]) != 'n') return false;
    return l.size() == 2 || l[2] == '-';
  }

  friend auto operator<=>(const Literal&, const Literal&) = default;
  friend bool operator==(const Literal&, const Literal&) = default;
};

using Term = std::variant<Iri, Literal>;

inline bool is_iri(const Term& t) { return std::holds_alternative<Iri>(t); }
inline const Iri& as_iri(const Term& t) { return std::get<Iri>(t); }
inline const Literal& as_literal(const Term& t) { return std::get<Literal>(t); }

/// IRI string for IRIs, lexical form for literals.
inline const std::string& lexical_form(const Term& t) {
  return is_iri(t) ? as_iri(t).value : as_literal(t).lexical;
}

struct Triple {
  Iri subject;
  Iri predicate;
  Term object;

  friend auto operator<=>(const Triple&, const Triple&) = default;
  friend bool operator==(const Triple&, const Triple&) = default;
};

/// Ordering used by subject queries: predicate IRI, then object lexical form,
/// then the full object (kind, language, datatype) so the order is total.
inline bool predicate_object_less(const Triple& a, const Triple& b) {
  if (a.predicate != b.predicate) return a.predicate < b.predicate;
  const auto& la = lexical_form(a.object);
  const auto& lb = lexical_form(b.object);
  if (la != lb) return la < lb;
  return a.object < b.object;
}

enum class EntityKind { klass, property, instance };

/// Immutable triple collection for one ontology or knowledge graph.
class Graph {
 public:
  Graph() = default;

  Graph(std::string name, std::vector<Triple> triples,
        std::map<std::string, std::string> prefixes = {})
      : name_(std::move(name)), triples_(std::move(triples)), prefixes_(std::move(prefixes)) {
    subject_index_ = build_index(triples_);
  }

  const std::string& name() const { return name_; }
  const std::vector<Triple>& triples() const { return triples_; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }

  /// Prefix label -> namespace IRI as declared in the source document.
  const std::map<std::string, std::string>& prefixes() const { return prefixes_; }

  /// Every triple with subject `s`, sorted by predicate then object.
  std::vector<Triple> triples_with_subject(const Iri& s) const {
    std::vector<Triple> out;
    auto it = subject_index_.find(s.value);
    if (it == subject_index_.end()) return out;
    out.reserve(it->second.size());
    for (auto idx : it->second) out.push_back(triples_[idx]);
    return out;
  }

  /// Objects of `(s, p, ?)` in predicate/object order.
  std::vector<Term> objects(const Iri& s, std::string_view predicate) const {
    std::vector<Term> out;
    auto it = subject_index_.find(s.value);
    if (it == subject_index_.end()) return out;
    for (auto idx : it->second) {
      if (triples_[idx].predicate.value == predicate) out.push_back(triples_[idx].object);
    }
    return out;
  }

  bool has_subject(const Iri& s) const { return subject_index_.count(s.value) != 0; }

  /// All distinct subjects in sorted order.
  std::vector<Iri> subjects() const {
    std::vector<Iri> out;
    out.reserve(subject_index_.size());
    for (const auto& [s, _] : subject_index_) out.emplace_back(s);
    return out;
  }

  bool has_type(const Iri& s, std::string_view type) const {
    auto it = subject_index_.find(s.value);
    if (it == subject_index_.end()) return false;
    for (auto idx : it->second) {
      const auto& t = triples_[idx];
      if (t.predicate.value == vocab::rdf_type && is_iri(t.object) && as_iri(t.object).value == type)
        return true;
    }
    return false;
  }

  /// Properties declared `owl:AnnotationProperty`.
  std::set<std::string> annotation_properties() const {
    std::set<std::string> out;
    for (const auto& t : triples_) {
      if (t.predicate.value == vocab::rdf_type && is_iri(t.object) &&
          as_iri(t.object).value == vocab::owl_annotation_property)
        out.insert(t.subject.value);
    }
    return out;
  }

  /// Entities of the requested kinds, deduplicated and sorted.
  ///
  /// Classes are subjects typed owl:Class; properties are typed
  /// owl:ObjectProperty, owl:DatatypeProperty or rdf:Property; instances are
  /// all remaining named subjects. Blank nodes, the ontology header and
  /// annotation-property declarations are never returned.
  std::vector<Iri> matchable_entities(const std::set<EntityKind>& kinds) const {
    std::vector<Iri> out;
    if (kinds.empty()) return out;
    for (const auto& [s, indices] : subject_index_) {
      Iri iri(s);
      if (iri.is_blank()) continue;
      bool is_class = false, is_property = false, is_schema = false;
      for (auto idx : indices) {
        const auto& t = triples_[idx];
        if (t.predicate.value != vocab::rdf_type || !is_iri(t.object)) continue;
        const auto& type = as_iri(t.object).value;
        if (type == vocab::owl_class) is_class = true;
        else if (type == vocab::owl_object_property || type == vocab::owl_datatype_property ||
                 type == vocab::rdf_property)
          is_property = true;
        else if (type == vocab::owl_ontology || type == vocab::owl_annotation_property)
          is_schema = true;
      }
      bool wanted = (is_class && kinds.count(EntityKind::klass)) ||
                    (is_property && kinds.count(EntityKind::property)) ||
                    (!is_class && !is_property && !is_schema && kinds.count(EntityKind::instance));
      if (wanted) out.push_back(std::move(iri));
    }
    return out;
  }

  /// Recomputes the subject index from scratch; equals the stored index.
  bool index_consistent() const { return build_index(triples_) == subject_index_; }

 private:
  static std::map<std::string, std::vector<std::size_t>> build_index(const std::vector<Triple>& triples) {
    std::map<std::string, std::vector<std::size_t>> index;
    for (std::size_t i = 0; i < triples.size(); ++i) index[triples[i].subject.value].push_back(i);
    for (auto& [_, v] : index) {
      std::stable_sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) {
        return predicate_object_less(triples[a], triples[b]);
      });
    }
    return index;
  }

  std::string name_;
  std::vector<Triple> triples_;
  std::map<std::string, std::string> prefixes_;
  std::map<std::string, std::vector<std::size_t>> subject_index_;
};

inline std::vector<Triple> triples_with_subject(const Graph& g, const Iri& s) {
  return g.triples_with_subject(s);
}

inline std::vector<Iri> matchable_entities(const Graph& g, const std::set<EntityKind>& kinds) {
  return g.matchable_entities(kinds);
}

inline std::string to_string(EntityKind k) {
  switch (k) {
    case EntityKind::klass: return "class";
    case EntityKind::property: return "property";
    case EntityKind::instance: return "instance";
  }
  return "instance";
}

inline EntityKind parse_entity_kind(std::string_view s) {
  if (s == "class") return EntityKind::klass;
  if (s == "property") return EntityKind::property;
  if (s == "instance") return EntityKind::instance;
  throw std::invalid_argument("unknown entity kind: " + std::string(s));
}

}  // namespace kgmatch
