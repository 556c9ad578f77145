#pragma once

// Candidate generation: exact top-k nearest-neighbour search between the
// embedded texts of two graphs, run in both directions.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kgmatch/alignment.hpp"
#include "kgmatch/embedding.hpp"
#include "kgmatch/rdf.hpp"
#include "kgmatch/verbalizer.hpp"

namespace kgmatch {

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ZeroVector : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionMismatch("dimension " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw ZeroVector("cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

enum class CandidateDirection { forward, backward, both };

struct Candidate {
  Iri source;
  Iri target;
  double similarity = 0;
  CandidateDirection provenance = CandidateDirection::forward;
};

/// One embedded text of a resource.
struct EmbeddedText {
  Iri resource;
  EmbeddingVector vector;
};

namespace detail {

struct NormalizedSet {
  std::vector<Iri> resources;             // distinct, sorted
  std::vector<std::vector<double>> rows;  // unit vectors
  std::vector<std::size_t> owner;         // row -> index into resources
  std::size_t dim = 0;
};

inline NormalizedSet normalize(const std::vector<EmbeddedText>& texts) {
  NormalizedSet out;
  std::map<Iri, std::size_t> ids;
  for (const auto& t : texts) ids.try_emplace(t.resource, 0);
  for (auto& [iri, id] : ids) {
    id = out.resources.size();
    out.resources.push_back(iri);
  }
  for (const auto& t : texts) {
    if (out.rows.empty() && out.dim == 0) out.dim = t.vector.size();
    if (t.vector.size() != out.dim) throw DimensionMismatch("embeddings of different dimensions");
    double norm = 0;
    for (double x : t.vector) {
      if (!std::isfinite(x)) throw std::invalid_argument("non-finite embedding value");
      norm += x * x;
    }
    if (norm == 0) continue;  // no direction; cannot be compared
    norm = std::sqrt(norm);
    std::vector<double> row(t.vector.size());
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = t.vector[i] / norm;
    out.rows.push_back(std::move(row));
    out.owner.push_back(ids[t.resource]);
  }
  return out;
}

}  // namespace detail

/// For every query resource, the k corpus resources with the highest
/// similarity, where a pair's similarity is the maximum cosine over all
/// (query text, corpus text) pairs. Ties are broken by target IRI. Output is
/// sorted by source, then rank.
inline std::vector<Candidate> top_k_search(const std::vector<EmbeddedText>& queries,
                                           const std::vector<EmbeddedText>& corpus, std::size_t k,
                                           std::size_t parallelism = 1) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  auto q = detail::normalize(queries);
  auto c = detail::normalize(corpus);
  if (!q.rows.empty() && !c.rows.empty() && q.dim != c.dim)
    throw DimensionMismatch("query and corpus embeddings differ in dimension");

  std::vector<std::vector<std::size_t>> rows_of(q.resources.size());
  for (std::size_t r = 0; r < q.rows.size(); ++r) rows_of[q.owner[r]].push_back(r);

  std::vector<std::vector<Candidate>> per_query(q.resources.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    std::vector<double> best(c.resources.size());
    std::vector<char> seen(c.resources.size());
    for (std::size_t qi = begin; qi < q.resources.size(); qi += stride) {
      if (rows_of[qi].empty()) continue;
      std::fill(best.begin(), best.end(), -2.0);
      std::fill(seen.begin(), seen.end(), 0);
      for (std::size_t qr : rows_of[qi]) {
        const auto& qv = q.rows[qr];
        for (std::size_t cr = 0; cr < c.rows.size(); ++cr) {
          const auto& cv = c.rows[cr];
          double dot = 0;
          for (std::size_t d = 0; d < qv.size(); ++d) dot += qv[d] * cv[d];
          dot = std::clamp(dot, -1.0, 1.0);
          auto owner = c.owner[cr];
          if (!seen[owner] || dot > best[owner]) best[owner] = dot;
          seen[owner] = 1;
        }
      }
      std::vector<std::size_t> order;
      for (std::size_t t = 0; t < c.resources.size(); ++t)
        if (seen[t]) order.push_back(t);
      std::size_t keep = std::min(k, order.size());
      // resources are sorted, so index order is IRI order
      std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](std::size_t a, std::size_t b) {
        if (best[a] != best[b]) return best[a] > best[b];
        return a < b;
      });
      for (std::size_t i = 0; i < keep; ++i)
        per_query[qi].push_back(Candidate{q.resources[qi], c.resources[order[i]], best[order[i]], CandidateDirection::forward});
    }
  };
  std::size_t threads = std::max<std::size_t>(1, std::min(parallelism, q.resources.size()));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  std::vector<Candidate> out;
  for (auto& v : per_query)
    for (auto& cand : v) out.push_back(std::move(cand));
  return out;
}

struct CandidateGeneration {
  Alignment alignment;              // confidence = (similarity + 1) / 2
  std::vector<Candidate> candidates;  // merged, sorted by (source, target)
  std::vector<Iri> skipped_source;  // entities without any text
  std::vector<Iri> skipped_target;
};

class EmptyTextSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bidirectional top-k candidate generation over the text sets of the
/// matchable entities of both graphs.
inline CandidateGeneration generate_candidates(const Graph& g1, const Graph& g2, Embedder& embedder, std::size_t k,
                                               const LabelPropertyConfig& cfg = {},
                                               const std::set<EntityKind>& kinds = {EntityKind::klass, EntityKind::property,
                                                                                    EntityKind::instance},
                                               std::size_t parallelism = 1) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  CandidateGeneration result;

  struct Side {
    std::vector<std::pair<Iri, std::string>> texts;
  };
  auto collect = [&](const Graph& g, std::vector<Iri>& skipped) {
    Side side;
    for (const auto& e : g.matchable_entities(kinds)) {
      auto set = extract_text_set(g, e, cfg);
      if (set.empty()) {
        skipped.push_back(e);
        continue;
      }
      for (const auto& t : set) side.texts.emplace_back(e, t);
    }
    return side;
  };
  Side left = collect(g1, result.skipped_source);
  Side right = collect(g2, result.skipped_target);
  if (left.texts.empty()) throw EmptyTextSet("no entity with text in " + (g1.name().empty() ? "source graph" : g1.name()));
  if (right.texts.empty()) throw EmptyTextSet("no entity with text in " + (g2.name().empty() ? "target graph" : g2.name()));

  std::map<std::string, std::size_t> distinct;
  for (const auto* side : {&left, &right})
    for (const auto& [_, t] : side->texts) distinct.try_emplace(t, 0);
  std::vector<std::string> unique_texts;
  unique_texts.reserve(distinct.size());
  for (auto& [t, idx] : distinct) {
    idx = unique_texts.size();
    unique_texts.push_back(t);
  }
  auto vectors = embedder.embed_batch(unique_texts);
  if (vectors.size() != unique_texts.size()) throw std::runtime_error("embedder returned wrong number of vectors");

  auto embedded = [&](const Side& side) {
    std::vector<EmbeddedText> out;
    out.reserve(side.texts.size());
    for (const auto& [iri, t] : side.texts) out.push_back(EmbeddedText{iri, vectors[distinct[t]]});
    return out;
  };
  auto e1 = embedded(left);
  auto e2 = embedded(right);

  std::map<std::pair<Iri, Iri>, Candidate> merged;
  for (auto& c : top_k_search(e1, e2, k, parallelism)) merged.emplace(std::make_pair(c.source, c.target), c);
  for (auto& c : top_k_search(e2, e1, k, parallelism)) {
    Candidate flipped{c.target, c.source, c.similarity, CandidateDirection::backward};
    auto [it, inserted] = merged.try_emplace(std::make_pair(flipped.source, flipped.target), flipped);
    if (!inserted) {
      it->second.provenance = CandidateDirection::both;
      it->second.similarity = std::max(it->second.similarity, flipped.similarity);
    }
  }
  for (auto& [_, c] : merged) {
    double conf = std::clamp((c.similarity + 1.0) / 2.0, 0.0, 1.0);
    result.alignment.add(c.source, c.target, conf, Provenance::candidate);
    result.candidates.push_back(std::move(c));
  }
  return result;
}

}  // namespace kgmatch
