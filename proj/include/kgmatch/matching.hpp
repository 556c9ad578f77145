#pragma once

// Exact matching on normalized labels.

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kgmatch/alignment.hpp"
#include "kgmatch/rdf.hpp"
#include "kgmatch/text.hpp"
#include "kgmatch/verbalizer.hpp"

namespace kgmatch {

/// Splits camel case ("SpinalCord", "HTMLParser"), underscores, hyphens and
/// whitespace; lowercases; deletes remaining non-alphanumeric ASCII
/// characters; joins the words with single spaces. Idempotent.
inline std::string normalize_label(std::string_view s) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '_' || c == '-' || text::is_space(c)) {
      flush();
      continue;
    }
    bool ascii = static_cast<unsigned char>(c) < 0x80;
    if (ascii && !text::is_ascii_alnum(c)) continue;
    if (text::is_ascii_upper(c) && i > 0) {
      char prev = s[i - 1];
      bool next_lower = i + 1 < s.size() && text::is_ascii_lower(s[i + 1]);
      if (text::is_ascii_lower(prev) || text::is_ascii_digit(prev) || (text::is_ascii_upper(prev) && next_lower)) flush();
    }
    cur += text::is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c;
  }
  flush();
  return text::join(words, " ");
}

namespace detail {

/// Normalized keys of an entity: all its label literals, or the URI
/// fragment text when it has none.
inline std::set<std::string> high_precision_keys(const Graph& g, const Iri& e, const LabelPropertyConfig& cfg) {
  std::set<std::string> keys;
  for (const auto& p : cfg.label_props)
    for (const auto& v : literal_values(g, e, p.value)) {
      auto k = normalize_label(v);
      if (!k.empty()) keys.insert(std::move(k));
    }
  if (keys.empty())
    if (auto frag = uri_fragment_text(e)) {
      auto k = normalize_label(*frag);
      if (!k.empty()) keys.insert(std::move(k));
    }
  return keys;
}

inline std::map<std::string, std::set<Iri>> high_precision_index(const Graph& g, const LabelPropertyConfig& cfg,
                                                                 const std::set<EntityKind>& kinds) {
  std::map<std::string, std::set<Iri>> index;
  for (const auto& e : g.matchable_entities(kinds))
    for (auto& k : high_precision_keys(g, e, cfg)) index[std::move(k)].insert(e);
  return index;
}

}  // namespace detail

/// (a, b, =, 1.0) for every normalized label owned by exactly one entity in
/// each graph.
inline Alignment high_precision_match(const Graph& g1, const Graph& g2, const LabelPropertyConfig& cfg = {},
                                      const std::set<EntityKind>& kinds = {EntityKind::klass, EntityKind::property,
                                                                           EntityKind::instance}) {
  auto left = detail::high_precision_index(g1, cfg, kinds);
  auto right = detail::high_precision_index(g2, cfg, kinds);
  Alignment out;
  for (const auto& [key, sources] : left) {
    if (sources.size() != 1) continue;
    auto it = right.find(key);
    if (it == right.end() || it->second.size() != 1) continue;
    out.add(*sources.begin(), *it->second.begin(), 1.0, Provenance::high_precision);
  }
  return out;
}

}  // namespace kgmatch
