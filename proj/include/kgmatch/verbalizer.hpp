#pragma once

// Text extractors: turn a graph resource into natural-language text for
// embedding (a set of texts) or for prompting (one text).

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgmatch/rdf.hpp"
#include "kgmatch/text.hpp"

namespace kgmatch {

enum class TextExtractorKind { set, only_labels, verbalized_rdf, description_in_rdf };

inline std::string to_string(TextExtractorKind k) {
  switch (k) {
    case TextExtractorKind::set: return "set";
    case TextExtractorKind::only_labels: return "only_labels";
    case TextExtractorKind::verbalized_rdf: return "verbalized_rdf";
    case TextExtractorKind::description_in_rdf: return "description_in_rdf";
  }
  return "only_labels";
}

inline TextExtractorKind parse_extractor_kind(std::string_view s) {
  auto k = text::to_lower(s);
  std::erase(k, '_');
  std::erase(k, '-');
  if (k == "set" || k == "textextractorset") return TextExtractorKind::set;
  if (k == "onlylabels" || k == "onlylabel") return TextExtractorKind::only_labels;
  if (k == "verbalizedrdf") return TextExtractorKind::verbalized_rdf;
  if (k == "descriptioninrdf") return TextExtractorKind::description_in_rdf;
  throw std::invalid_argument("unknown text extractor: " + std::string(s));
}

/// Which properties count as labels and which as descriptions.
struct LabelPropertyConfig {
  std::vector<Iri> label_props{Iri(vocab::skos_pref_label), Iri(vocab::rdfs_label), Iri(vocab::skos_alt_label),
                               Iri(vocab::skos_hidden_label), Iri(vocab::schema_name)};
  std::vector<Iri> description_props{Iri(vocab::rdfs_comment), Iri(vocab::dc_description), Iri(vocab::schema_comment)};

  /// Throws std::invalid_argument when a list is empty or has duplicates.
  void validate() const {
    auto check = [](const std::vector<Iri>& v, const char* what) {
      if (v.empty()) throw std::invalid_argument(std::string(what) + " list must not be empty");
      std::set<Iri> seen(v.begin(), v.end());
      if (seen.size() != v.size()) throw std::invalid_argument(std::string(what) + " list has duplicates");
    };
    check(label_props, "label property");
    check(description_props, "description property");
  }

  bool is_label(const Iri& p) const { return std::find(label_props.begin(), label_props.end(), p) != label_props.end(); }
  bool is_description(const Iri& p) const {
    return std::find(description_props.begin(), description_props.end(), p) != description_props.end();
  }
  bool is_label_like(const Iri& p) const { return is_label(p) || is_description(p); }
};

/// Maximum depth when following annotation properties in extract_text_set.
inline constexpr int kAnnotationDepth = 2;

/// The fragment as words ("SpinalCord" -> "Spinal Cord"), or nothing when more
/// than half of the fragment's characters are digits.
inline std::optional<std::string> uri_fragment_text(const Iri& iri) {
  auto frag = iri.fragment();
  if (frag.empty()) return std::nullopt;
  std::size_t digits = std::count_if(frag.begin(), frag.end(), [](char c) { return text::is_ascii_digit(c); });
  if (digits * 2 > frag.size()) return std::nullopt;
  auto words = text::split_identifier(frag);
  if (words.empty()) return std::nullopt;
  return words;
}

namespace detail {

/// Lexical forms of English/untagged literal values of (r, p).
inline std::vector<std::string> literal_values(const Graph& g, const Iri& r, std::string_view p) {
  std::vector<std::string> out;
  for (const auto& o : g.objects(r, p)) {
    if (is_iri(o)) continue;
    const auto& lit = as_literal(o);
    if (!lit.is_english_or_untagged()) continue;
    if (text::trim(lit.lexical).empty()) continue;
    out.push_back(lit.lexical);
  }
  return out;
}

inline std::optional<std::string> smallest_literal(const Graph& g, const Iri& r, std::string_view p) {
  auto values = literal_values(g, r, p);
  if (values.empty()) return std::nullopt;
  return *std::min_element(values.begin(), values.end());
}

inline void collect_annotation_labels(const Graph& g, const Iri& r, const LabelPropertyConfig& cfg,
                                      const std::set<std::string>& annotation_props, int depth,
                                      std::set<std::string>& visited, std::set<std::string>& out) {
  if (depth > kAnnotationDepth) return;
  for (const auto& t : g.triples_with_subject(r)) {
    if (!is_iri(t.object)) continue;
    if (!annotation_props.count(t.predicate.value) && !cfg.is_label_like(t.predicate)) continue;
    const Iri& target = as_iri(t.object);
    if (!visited.insert(target.value).second) continue;
    for (const auto& p : cfg.label_props)
      for (auto& v : literal_values(g, target, p.value)) out.insert(std::move(v));
    collect_annotation_labels(g, target, cfg, annotation_props, depth + 1, visited, out);
  }
}

}  // namespace detail

/// Every text of a resource: its label and description literals, its URI
/// fragment, and the labels of resources reached through annotation
/// properties (declared owl:AnnotationProperty or configured label and
/// description properties), following at most two hops.
inline std::set<std::string> extract_text_set(const Graph& g, const Iri& r,
                                              const LabelPropertyConfig& cfg = {}) {
  std::set<std::string> out;
  for (const auto& p : cfg.label_props)
    for (auto& v : detail::literal_values(g, r, p.value)) out.insert(std::move(v));
  for (const auto& p : cfg.description_props)
    for (auto& v : detail::literal_values(g, r, p.value)) out.insert(std::move(v));
  if (auto frag = uri_fragment_text(r)) out.insert(*frag);
  std::set<std::string> visited{r.value};
  detail::collect_annotation_labels(g, r, cfg, g.annotation_properties(), 1, visited, out);
  return out;
}

/// One label, taken from the first available source in the order
/// skos:prefLabel, rdfs:label, URI fragment, skos:altLabel, skos:hiddenLabel.
/// Multiple values of one property resolve to the lexicographically smallest.
inline std::string extract_only_label(const Graph& g, const Iri& r) {
  if (auto v = detail::smallest_literal(g, r, vocab::skos_pref_label)) return *v;
  if (auto v = detail::smallest_literal(g, r, vocab::rdfs_label)) return *v;
  if (auto v = uri_fragment_text(r)) return *v;
  if (auto v = detail::smallest_literal(g, r, vocab::skos_alt_label)) return *v;
  if (auto v = detail::smallest_literal(g, r, vocab::skos_hidden_label)) return *v;
  return {};
}

/// Lowercased words of a predicate's label: rdfs:subClassOf -> "sub class of".
inline std::string humanize_predicate(const Graph& g, const Iri& predicate) {
  return text::to_lower(text::split_identifier(extract_only_label(g, predicate)));
}

/// Sentences "<subject> <predicate> <object>" for the resource's
/// non-label triples, joined by ". ".
inline std::string extract_verbalized_rdf(const Graph& g, const Iri& r, const LabelPropertyConfig& cfg = {}) {
  std::vector<std::string> sentences;
  std::string subject = extract_only_label(g, r);
  for (const auto& t : g.triples_with_subject(r)) {
    if (cfg.is_label_like(t.predicate)) continue;
    std::string object;
    if (is_iri(t.object)) {
      object = extract_only_label(g, as_iri(t.object));
    } else {
      const auto& lit = as_literal(t.object);
      if (!lit.is_english_or_untagged()) continue;
      object = lit.lexical;
    }
    std::string sentence = subject;
    auto append = [&](const std::string& s) {
      if (s.empty()) return;
      if (!sentence.empty()) sentence += ' ';
      sentence += s;
    };
    append(humanize_predicate(g, t.predicate));
    append(object);
    sentences.push_back(std::move(sentence));
  }
  return text::join(sentences, ". ");
}

namespace detail {

inline const std::map<std::string, std::string>& builtin_prefixes() {
  static const std::map<std::string, std::string> table = {
      {"rdf", std::string(vocab::rdf)},   {"rdfs", std::string(vocab::rdfs)}, {"owl", std::string(vocab::owl)},
      {"skos", std::string(vocab::skos)}, {"dc", std::string(vocab::dc)},     {"schema", std::string(vocab::schema)},
      {"xsd", std::string(vocab::xsd)},
  };
  return table;
}

inline bool valid_local_name(std::string_view local) {
  if (local.empty()) return true;
  if (local.back() == '.') return false;
  char first = local.front();
  if (first == '-' || first == '.') return false;
  return std::all_of(local.begin(), local.end(), [](char c) {
    return text::is_ascii_alnum(c) || c == '_' || c == '-' || c == '.' || static_cast<unsigned char>(c) >= 0x80;
  });
}

inline std::string quote_turtle(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

}  // namespace detail

/// Compacts IRIs against the built-in prefix table plus the graph's own
/// declared prefixes (graph declarations win on label clashes).
class PrefixCompactor {
 public:
  explicit PrefixCompactor(const Graph& g) {
    std::map<std::string, std::string> labels = detail::builtin_prefixes();
    for (const auto& [label, ns] : g.prefixes())
      if (!ns.empty()) labels[label] = ns;
    for (const auto& [label, ns] : labels) namespaces_.emplace_back(ns, label);
    // longest namespace first; ties by label
    std::sort(namespaces_.begin(), namespaces_.end(), [](const auto& a, const auto& b) {
      if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
      return a.second < b.second;
    });
  }

  std::string compact(const Iri& iri) const {
    if (iri.is_blank()) return iri.value;
    for (const auto& [ns, label] : namespaces_) {
      if (iri.value.size() >= ns.size() && iri.value.compare(0, ns.size(), ns) == 0) {
        std::string_view local(iri.value.data() + ns.size(), iri.value.size() - ns.size());
        if (detail::valid_local_name(local)) return label + ":" + std::string(local);
      }
    }
    return "<" + iri.value + ">";
  }

 private:
  std::vector<std::pair<std::string, std::string>> namespaces_;
};

/// The resource's triples as Turtle without prefix declarations; IRI objects
/// are replaced by a quoted literal of their label.
inline std::string extract_description_in_rdf(const Graph& g, const Iri& r) {
  auto triples = g.triples_with_subject(r);
  if (triples.empty()) return {};
  PrefixCompactor prefixes(g);
  std::string out = prefixes.compact(r);
  bool first = true;
  for (const auto& t : triples) {
    std::string object;
    if (is_iri(t.object)) {
      auto label = extract_only_label(g, as_iri(t.object));
      object = label.empty() ? prefixes.compact(as_iri(t.object)) : detail::quote_turtle(label);
    } else {
      const auto& lit = as_literal(t.object);
      object = detail::quote_turtle(lit.lexical);
      if (lit.language) object += "@" + *lit.language;
      else if (lit.datatype && lit.datatype->value != vocab::xsd_string) object += "^^" + prefixes.compact(*lit.datatype);
    }
    out += first ? " " : " ;\n    ";
    out += prefixes.compact(t.predicate) + " " + object;
    first = false;
  }
  return out + " .";
}

/// The single text used in prompts. The set extractor's texts are joined
/// with ", " in sorted order.
inline std::string extract_text(TextExtractorKind kind, const Graph& g, const Iri& r,
                                const LabelPropertyConfig& cfg = {}) {
  switch (kind) {
    case TextExtractorKind::set: {
      auto texts = extract_text_set(g, r, cfg);
      return text::join(std::vector<std::string>(texts.begin(), texts.end()), ", ");
    }
    case TextExtractorKind::only_labels: return extract_only_label(g, r);
    case TextExtractorKind::verbalized_rdf: return extract_verbalized_rdf(g, r, cfg);
    case TextExtractorKind::description_in_rdf: return extract_description_in_rdf(g, r);
  }
  return extract_only_label(g, r);
}

}  // namespace kgmatch
