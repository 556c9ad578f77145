#pragma once

// Correspondences and alignments.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kgmatch/rdf.hpp"

namespace kgmatch {

enum class Relation { equivalence };

inline std::string to_symbol(Relation) { return "="; }

struct Correspondence {
  Iri source;
  Iri target;
  Relation relation = Relation::equivalence;
  double confidence = 1.0;
};

/// Where a correspondence came from. A bit set; merges union the bits.
enum class Provenance : std::uint8_t {
  none = 0,
  candidate = 1,
  llm = 2,
  high_precision = 4,
};

inline Provenance operator|(Provenance a, Provenance b) {
  return static_cast<Provenance>(static_cast<std::uint8_t>(a) | static_cast<std::uint8_t>(b));
}
inline bool has(Provenance set, Provenance flag) {
  return (static_cast<std::uint8_t>(set) & static_cast<std::uint8_t>(flag)) != 0;
}

inline std::string to_string(Provenance p) {
  std::string out;
  auto add = [&](Provenance f, const char* name) {
    if (!has(p, f)) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(Provenance::candidate, "candidate");
  add(Provenance::llm, "llm");
  add(Provenance::high_precision, "high_precision");
  return out.empty() ? "none" : out;
}

struct CorrespondenceKey {
  Iri source;
  Iri target;
  Relation relation = Relation::equivalence;

  friend auto operator<=>(const CorrespondenceKey&, const CorrespondenceKey&) = default;
  friend bool operator==(const CorrespondenceKey&, const CorrespondenceKey&) = default;
};

/// A set of correspondences keyed by (source, target, relation); iteration
/// is in key order. Adding an existing key keeps the higher confidence.
class Alignment {
 public:
  struct Entry {
    double confidence = 1.0;
    Provenance provenance = Provenance::none;
  };
  using Map = std::map<CorrespondenceKey, Entry>;

  Alignment() = default;

  static void check_confidence(double c) {
    if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("confidence outside [0,1]: " + std::to_string(c));
  }

  void add(const Correspondence& c, Provenance p = Provenance::none) {
    check_confidence(c.confidence);
    CorrespondenceKey key{c.source, c.target, c.relation};
    auto [it, inserted] = entries_.try_emplace(std::move(key), Entry{c.confidence, p});
    if (!inserted) {
      it->second.confidence = std::max(it->second.confidence, c.confidence);
      it->second.provenance = it->second.provenance | p;
    }
  }

  void add(const Iri& source, const Iri& target, double confidence, Provenance p = Provenance::none) {
    add(Correspondence{source, target, Relation::equivalence, confidence}, p);
  }

  bool contains(const Iri& source, const Iri& target, Relation r = Relation::equivalence) const {
    return entries_.count(CorrespondenceKey{source, target, r}) != 0;
  }

  const Entry* find(const Iri& source, const Iri& target, Relation r = Relation::equivalence) const {
    auto it = entries_.find(CorrespondenceKey{source, target, r});
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Map& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::vector<Correspondence> correspondences() const {
    std::vector<Correspondence> out;
    out.reserve(entries_.size());
    for (const auto& [k, e] : entries_) out.push_back(Correspondence{k.source, k.target, k.relation, e.confidence});
    return out;
  }

  Alignment filtered(const std::function<bool(const CorrespondenceKey&, const Entry&)>& keep) const {
    Alignment out;
    for (const auto& [k, e] : entries_)
      if (keep(k, e)) out.entries_.emplace(k, e);
    return out;
  }

  /// Source and target swapped.
  Alignment inverted() const {
    Alignment out;
    for (const auto& [k, e] : entries_) out.entries_.emplace(CorrespondenceKey{k.target, k.source, k.relation}, e);
    return out;
  }

  /// Same keys and confidences (provenance ignored).
  bool same_correspondences(const Alignment& other) const {
    if (size() != other.size()) return false;
    return std::equal(entries_.begin(), entries_.end(), other.entries_.begin(), [](const auto& a, const auto& b) {
      return a.first == b.first && a.second.confidence == b.second.confidence;
    });
  }

  bool same_keys(const Alignment& other) const {
    if (size() != other.size()) return false;
    return std::equal(entries_.begin(), entries_.end(), other.entries_.begin(),
                      [](const auto& a, const auto& b) { return a.first == b.first; });
  }

 private:
  Map entries_;
};

/// Set union; duplicate keys keep the maximum confidence and the union of
/// provenance tags.
inline Alignment merge_alignments(const Alignment& primary, const Alignment& addition) {
  Alignment out = primary;
  for (const auto& [k, e] : addition) out.add(Correspondence{k.source, k.target, k.relation, e.confidence}, e.provenance);
  return out;
}

/// Keeps correspondences whose confidence is at least `threshold`.
inline Alignment confidence_filter(const Alignment& a, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold outside [0,1]");
  return a.filtered([threshold](const CorrespondenceKey&, const Alignment::Entry& e) { return e.confidence >= threshold; });
}

}  // namespace kgmatch
