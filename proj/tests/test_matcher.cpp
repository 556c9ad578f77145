#include <gtest/gtest.h>

#include <random>

#include "kgmatch/alignment_io.hpp"
#include "kgmatch/matching.hpp"
#include "kgmatch/pipeline.hpp"
#include "kgmatch/rdf_io.hpp"
#include "oracles.hpp"

using namespace kgmatch;

namespace {

Iri L(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "http://l/%03d", i);
  return Iri(buf);
}
Iri R(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "http://r/%03d", i);
  return Iri(buf);
}

Graph labelled(const std::string& ns, const std::vector<std::pair<std::string, std::string>>& entities) {
  std::string doc = "@prefix owl: <http://www.w3.org/2002/07/owl#> .\n@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n";
  for (const auto& [local, label] : entities) {
    doc += "<" + ns + local + "> a owl:Class";
    if (!label.empty()) doc += " ; rdfs:label \"" + label + "\"";
    doc += " .\n";
  }
  return parse_rdf(doc, RdfFormat::turtle);
}

struct Toy {
  Graph source = load_graph(oracle::data("anatomy-mini-source.ttl"));
  Graph target = load_graph(oracle::data("anatomy-mini-target.ttl"));
  Alignment reference = read_alignment(oracle::data("anatomy-mini-reference.rdf"));
  PipelineConfig config() const {
    PipelineConfig c;
    c.embedder = "exact";
    c.parallelism = 2;
    return c;
  }
};

}  // namespace

TEST(NormalizeLabel, Examples) {
  EXPECT_EQ(normalize_label("SpinalCord"), "spinal cord");
  EXPECT_EQ(normalize_label("spinal_cord"), "spinal cord");
  EXPECT_EQ(normalize_label("Spinal-Cord"), "spinal cord");
  EXPECT_EQ(normalize_label("  spinal   cord "), "spinal cord");
  EXPECT_EQ(normalize_label("HTMLParser"), "html parser");
  EXPECT_EQ(normalize_label("Trigeminal V Nerve (Ophthalmic)"), "trigeminal v nerve ophthalmic");
  EXPECT_EQ(normalize_label("C12Heart"), "c12 heart");
  EXPECT_EQ(normalize_label(""), "");
}

TEST(NormalizeLabel, Idempotent) {
  std::mt19937 rng(5);
  const std::string alphabet = "aBcDe_- 1(.)XyZ";
  std::uniform_int_distribution<int> len(0, 16), pick(0, static_cast<int>(alphabet.size()) - 1);
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (int n = len(rng); n > 0; --n) s += alphabet[pick(rng)];
    auto once = normalize_label(s);
    EXPECT_EQ(normalize_label(once), once) << s;
  }
}

TEST(HighPrecision, CaseAndSeparatorInsensitive) {
  auto g1 = labelled("http://a/", {{"X0000001", "Colon"}});
  auto g2 = labelled("http://b/", {{"Y0000001", "colon"}});
  auto hp = high_precision_match(g1, g2);
  ASSERT_EQ(hp.size(), 1u);
  const auto* e = hp.find(Iri("http://a/X0000001"), Iri("http://b/Y0000001"));
  ASSERT_NE(e, nullptr);
  EXPECT_DOUBLE_EQ(e->confidence, 1.0);
  EXPECT_TRUE(has(e->provenance, Provenance::high_precision));
}

TEST(HighPrecision, AmbiguousLabelsEmitNothing) {
  auto g1 = labelled("http://a/", {{"X0000001", "colon"}});
  auto g2 = labelled("http://b/", {{"Y0000001", "colon"}, {"Y0000002", "Colon"}});
  EXPECT_TRUE(high_precision_match(g1, g2).empty());
}

TEST(HighPrecision, FiveSharedOneAmbiguous) {
  auto g1 = labelled("http://a/", {{"X0000001", "heart"}, {"X0000002", "skin"}, {"X0000003", "colon"},
                                   {"X0000004", "pancreas"}, {"X0000005", "spinal cord"}, {"X0000006", "brain"}});
  auto g2 = labelled("http://b/", {{"Y0000001", "Heart"}, {"Y0000002", "Skin"}, {"Y0000003", "Colon"},
                                   {"Y0000004", "Pancreas"}, {"Y0000005", "SpinalCord"}, {"Y0000006", "Spinal_Cord"},
                                   {"Y0000007", "liver"}});
  auto hp = high_precision_match(g1, g2);
  EXPECT_EQ(hp.size(), 4u);
  EXPECT_FALSE(hp.contains(Iri("http://a/X0000005"), Iri("http://b/Y0000005")));
}

TEST(HighPrecision, SymmetricUnderSwap) {
  Toy toy;
  auto ab = high_precision_match(toy.source, toy.target);
  auto ba = high_precision_match(toy.target, toy.source);
  EXPECT_TRUE(ab.same_correspondences(ba.inverted()));
  EXPECT_FALSE(ab.empty());
}

TEST(Merge, UnionAndMaxRule) {
  Alignment a, b;
  a.add(L(1), R(1), 0.7, Provenance::llm);
  a.add(L(2), R(2), 0.4, Provenance::llm);
  a.add(L(3), R(3), 0.9, Provenance::llm);
  b.add(L(4), R(4), 1.0, Provenance::high_precision);
  b.add(L(5), R(5), 1.0, Provenance::high_precision);
  EXPECT_EQ(merge_alignments(a, b).size(), 5u);

  Alignment c;
  c.add(L(1), R(1), 1.0, Provenance::high_precision);
  c.add(L(3), R(3), 0.2, Provenance::high_precision);
  auto m = merge_alignments(a, c);
  EXPECT_DOUBLE_EQ(m.find(L(1), R(1))->confidence, 1.0);
  EXPECT_DOUBLE_EQ(m.find(L(3), R(3))->confidence, 0.9);
  EXPECT_TRUE(has(m.find(L(1), R(1))->provenance, Provenance::llm));
  EXPECT_TRUE(has(m.find(L(1), R(1))->provenance, Provenance::high_precision));
}

TEST(Assignment, TwoByTwo) {
  Alignment a;
  a.add(L(1), R(1), 0.9);
  a.add(L(1), R(2), 0.8);
  a.add(L(2), R(1), 0.85);
  a.add(L(2), R(2), 0.1);
  auto m = max_weight_bipartite_extract(a);
  EXPECT_EQ(m.size(), 2u);
  EXPECT_TRUE(m.contains(L(1), R(2)));
  EXPECT_TRUE(m.contains(L(2), R(1)));
}

TEST(Assignment, OneToOneInputUnchanged) {
  Alignment a;
  for (int i = 0; i < 6; ++i) a.add(L(i), R(5 - i), 0.1 * (i + 1));
  EXPECT_TRUE(max_weight_bipartite_extract(a).same_correspondences(a));
  EXPECT_TRUE(max_weight_bipartite_extract(Alignment{}).empty());
}

TEST(Assignment, RandomInstancesAgreeWithPermutationSearch) {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> u(0, 1);
  for (int round = 0; round < 200; ++round) {
    int n = dim(rng), m = dim(rng);
    Alignment a;
    std::map<std::pair<int, int>, double> w;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (u(rng) < 0.6) {
          double c = std::round(u(rng) * 1000) / 1000;
          a.add(L(i), R(j), c);
          w[{i, j}] = c;
        }
    auto got = max_weight_bipartite_extract(a);
    double total = 0;
    std::set<Iri> ls, rs;
    for (const auto& [k, e] : got) {
      total += e.confidence;
      EXPECT_TRUE(ls.insert(k.source).second);
      EXPECT_TRUE(rs.insert(k.target).second);
      EXPECT_TRUE(a.contains(k.source, k.target));
    }
    EXPECT_NEAR(total, oracle::permutation_search(n, m, w), 1e-9) << "round " << round;
  }
}

TEST(Assignment, TiesResolveToLexicographicallySmallest) {
  std::mt19937 rng(23);
  std::uniform_int_distribution<int> dim(1, 4), weight(1, 3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int round = 0; round < 150; ++round) {
    int n = dim(rng), m = dim(rng);
    Alignment a;
    std::vector<std::pair<std::pair<int, int>, double>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (u(rng) < 0.7) {
          double c = weight(rng) / 4.0;
          a.add(L(i), R(j), c);
          edges.push_back({{i, j}, c});
        }
    if (edges.empty()) continue;
    auto expected = oracle::exhaustive_matchings(edges);
    std::set<std::pair<int, int>> got;
    for (const auto& [k, _] : max_weight_bipartite_extract(a))
      got.emplace(std::stoi(k.source.value.substr(9)), std::stoi(k.target.value.substr(9)));
    EXPECT_EQ(got, expected.best_lex) << "round " << round;
  }
}

TEST(ConfidenceFilter, InclusiveThreshold) {
  Alignment a;
  a.add(L(1), R(1), 0.49);
  a.add(L(2), R(2), 0.5);
  a.add(L(3), R(3), 0.51);
  auto f = confidence_filter(a, 0.5);
  EXPECT_EQ(f.size(), 2u);
  EXPECT_FALSE(f.contains(L(1), R(1)));
  EXPECT_TRUE(f.contains(L(2), R(2)));
  EXPECT_EQ(confidence_filter(a, 0.0).size(), 3u);
  EXPECT_EQ(confidence_filter(a, 1.0).size(), 0u);
  EXPECT_TRUE(confidence_filter(f, 0.5).same_correspondences(f));
  EXPECT_THROW(confidence_filter(a, 1.5), std::invalid_argument);
}

TEST(Pipeline, ToyOntologyFullScore) {
  Toy toy;
  auto backend = ScriptedBackend::from_file(oracle::data("anatomy-mini-script.json"));
  ExactMatchEmbedder embedder;
  auto result = run_pipeline(toy.source, toy.target, toy.config(), embedder, &backend, &toy.reference);
  ASSERT_TRUE(result.report.evaluation);
  EXPECT_DOUBLE_EQ(result.report.evaluation->f1, 1.0);
  EXPECT_TRUE(result.alignment.same_keys(toy.reference));
}

TEST(Pipeline, StageSizesNeverGrowAfterMerge) {
  Toy toy;
  auto backend = ScriptedBackend::from_file(oracle::data("anatomy-mini-script.json"));
  HashedNgramEmbedder embedder;
  auto result = run_pipeline(toy.source, toy.target, toy.config(), embedder, &backend);
  const auto& r = result.report;
  ASSERT_NE(r.stage(stage::merged), nullptr);
  EXPECT_LE(r.stage(stage::cardinality)->size, r.stage(stage::merged)->size);
  EXPECT_LE(r.stage(stage::confidence)->size, r.stage(stage::cardinality)->size);
  EXPECT_EQ(r.stage(stage::llm)->size, r.stage(stage::candidates)->size);
  EXPECT_EQ(result.alignment.size(), r.stage(stage::confidence)->size);
}

TEST(Pipeline, AllNoWithoutHighPrecisionIsEmpty) {
  Toy toy;
  ScriptedBackend backend;
  backend.otherwise(ScriptedBackend::answer(" no", {{" no", 0.95}, {" yes", 0.05}}));
  auto c = toy.config();
  c.use_high_precision = false;
  ExactMatchEmbedder embedder;
  auto result = run_pipeline(toy.source, toy.target, c, embedder, &backend);
  EXPECT_TRUE(result.alignment.empty());
}

TEST(Pipeline, BackendFailureCarriesReport) {
  Toy toy;
  ScriptedBackend backend;
  ExactMatchEmbedder embedder;
  try {
    run_pipeline(toy.source, toy.target, toy.config(), embedder, &backend);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_NE(e.report().stage(stage::candidates), nullptr);
    EXPECT_EQ(e.report().stage(stage::llm), nullptr);
    EXPECT_NE(e.report().failure.find("llm"), std::string::npos);
  }
}

TEST(Pipeline, ChoiceModeKeepsOnePerSource) {
  Toy toy;
  ScriptedBackend backend;
  backend.otherwise(ScriptedBackend::answer(" a", {{" a", 0.9}, {" none", 0.1}}));
  auto c = toy.config();
  c.prompt_id = 8;
  c.use_high_precision = false;
  c.use_cardinality = false;
  ExactMatchEmbedder embedder;
  auto result = run_pipeline(toy.source, toy.target, c, embedder, &backend);
  std::map<Iri, int> per_source;
  for (const auto& [k, _] : result.alignment) ++per_source[k.source];
  for (const auto& [_, n] : per_source) EXPECT_EQ(n, 1);
  EXPECT_FALSE(result.alignment.empty());
}

TEST(PipelineConfig, JsonRoundTripAndUnknownKeys) {
  PipelineConfig c;
  c.k = 3;
  c.prompt_id = 8;
  c.labels.label_props = {Iri("http://example.org/name")};
  nlohmann::json j = c;
  PipelineConfig back;
  apply_config_json(back, j);
  EXPECT_EQ(back.k, 3u);
  EXPECT_EQ(back.prompt_id, 8);
  ASSERT_EQ(back.labels.label_props.size(), 1u);
  EXPECT_EQ(back.labels.label_props[0].value, "http://example.org/name");
  EXPECT_THROW(apply_config_json(back, nlohmann::json{{"kk", 1}}), std::invalid_argument);
}

TEST(PipelineConfig, ModeMustAgreeWithTemplate) {
  PipelineConfig c;
  c.prompt_id = 7;
  c.mode = DecisionMode::multiple_choice;
  EXPECT_THROW(resolve_template(c), std::invalid_argument);
  c.prompt_id = 9;
  EXPECT_EQ(resolve_template(c).mode, DecisionMode::multiple_choice);
}
