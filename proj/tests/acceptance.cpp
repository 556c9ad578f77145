// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "kgmatch/alignment_io.hpp"
#include "kgmatch/pipeline.hpp"
#include "kgmatch/rdf_io.hpp"
#include "oracles.hpp"

using namespace kgmatch;

namespace {

using Clock = std::chrono::steady_clock;

/// Collects failure notes for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(17);
    s << what << ": got " << got << " want " << want;
    expect(std::fabs(got - want) <= tol, s.str());
  }
};

int failed = 0;

void criterion(const std::string& name, const std::function<void(Check&)>& body) {
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  if (c.failures.empty()) {
    std::cout << "PASS " << name << '\n';
    return;
  }
  ++failed;
  std::cout << "FAIL " << name;
  for (const auto& f : c.failures) std::cout << " | " << f;
  std::cout << '\n';
}

TokenStep slice_step(const std::string& chosen, const std::map<std::string, double>& slice) {
  TokenStep s;
  s.token = chosen;
  for (const auto& [t, p] : slice) s.top.emplace_back(t, p);
  s.probability = slice.count(chosen) ? slice.at(chosen) : 0.0;
  return s;
}

PipelineConfig toy_config() {
  PipelineConfig c;
  c.source = oracle::data("anatomy-mini-source.ttl");
  c.target = oracle::data("anatomy-mini-target.ttl");
  c.embedder = "exact";
  c.parallelism = 2;
  return c;
}

std::size_t covered(const Alignment& candidates, const Alignment& reference, std::set<CorrespondenceKey>* keys) {
  std::size_t n = 0;
  for (const auto& [k, _] : reference)
    if (candidates.contains(k.source, k.target)) {
      ++n;
      if (keys) keys->insert(k);
    }
  return n;
}

}  // namespace

int main() {
  const std::set<std::string> pos{"yes", "true"}, neg{"no", "false"};

  criterion("confidence formula", [&](Check& c) {
    auto bc = extract_binary_confidence({slice_step("yes", {{"yes", 0.4}, {"no", 0.1}})}, pos, neg);
    c.near(bc.confidence, 0.8, 1e-12, "(0.4, 0.1)");
    std::mt19937 rng(101);
    std::uniform_real_distribution<double> u(0, 1);
    const std::vector<std::string> vocab{"yes", " Yes", "no", "NO", "true", "false", "maybe", "the", "a"};
    for (int i = 0; i < 200; ++i) {
      std::map<std::string, double> slice;
      for (const auto& t : vocab)
        if (u(rng) < 0.6) slice[t] = u(rng);
      slice["no"] = u(rng);
      std::map<std::string, double> folded;
      for (const auto& [t, p] : slice) {
        std::string key;
        for (char ch : t)
          if (ch != ' ') key += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        folded[key] = std::max(folded[key], p);
      }
      auto got = extract_binary_confidence({slice_step("no", slice)}, pos, neg).confidence;
      c.near(got, oracle::binary_confidence(folded, pos, neg), 1e-12, "random distribution " + std::to_string(i));
    }
  });

  criterion("verbalization fixed point", [&](Check& c) {
    auto g = load_graph(oracle::data("verbalize-fixture.ttl"));
    auto got = extract_verbalized_rdf(g, Iri("http://mouse.owl#MA_0000002"));
    c.expect(got == "spinal cord grey matter sub class of grey matter", "got '" + got + "'");
    auto xml = load_graph(oracle::data("verbalize-fixture.rdf"));
    c.expect(extract_verbalized_rdf(xml, Iri("http://mouse.owl#MA_0000002")) == got, "RDF/XML copy differs");
  });

  criterion("digit rule", [&](Check& c) {
    c.expect(!uri_fragment_text(Iri("http://mouse.owl#MA_0000002")), "MA_0000002 not excluded");
    c.expect(uri_fragment_text(Iri("http://x#ab12")).has_value(), "50% digits excluded");
    c.expect(uri_fragment_text(Iri("http://x#A1")).has_value(), "A1 excluded");
    std::mt19937 rng(202);
    const std::string alphabet = "abXY0123456789_-";
    std::uniform_int_distribution<int> len(1, 16), pick(0, static_cast<int>(alphabet.size()) - 1);
    for (int i = 0; i < 1000; ++i) {
      std::string frag;
      for (int n = len(rng); n > 0; --n) frag += alphabet[pick(rng)];
      bool has_words = frag.find_first_not_of('_') != std::string::npos;
      bool want = !oracle::too_many_digits(frag) && has_words;
      c.expect(uri_fragment_text(Iri("http://x/o#" + frag)).has_value() == want, "fragment " + frag);
    }
  });

  criterion("assignment optimality", [&](Check& c) {
    auto start = Clock::now();
    std::mt19937 rng(303);
    std::uniform_int_distribution<int> dim(1, 8);
    std::uniform_real_distribution<double> u(0, 1);
    auto iri = [](const char* side, int i) { return Iri(std::string("http://") + side + "/" + std::to_string(i)); };
    for (int round = 0; round < 500; ++round) {
      int n = dim(rng), m = dim(rng);
      double density = 0.3 + 0.7 * u(rng);
      std::vector<std::vector<double>> w(n, std::vector<double>(m, -1.0));
      Alignment a;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          if (u(rng) < density) {
            w[i][j] = u(rng);
            a.add(iri("s", i), iri("t", j), w[i][j]);
          }
      auto got = max_weight_bipartite_extract(a);
      double total = 0;
      std::set<Iri> left, right;
      bool valid = true;
      for (const auto& [k, e] : got) {
        total += e.confidence;
        valid = valid && left.insert(k.source).second && right.insert(k.target).second && a.contains(k.source, k.target);
      }
      c.expect(valid, "invalid matching in round " + std::to_string(round));
      c.near(total, oracle::permutation_search(w), 1e-9, "weight in round " + std::to_string(round));
    }
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    c.expect(secs < 5.0, "took " + std::to_string(secs) + " s");
  });

  criterion("metric correctness", [&](Check& c) {
    const auto& cases = oracle::eval_fixtures();
    c.expect(cases.size() == 20, "fixture count");
    for (std::size_t i = 0; i < cases.size(); ++i) {
      auto [system, reference] = oracle::realize(cases[i]);
      auto r = evaluate(system, reference);
      auto tag = "fixture " + std::to_string(i);
      c.near(r.precision, cases[i].precision, 1e-12, tag + " precision");
      c.near(r.recall, cases[i].recall, 1e-12, tag + " recall");
      c.near(r.f1, cases[i].f1, 1e-12, tag + " f1");
    }
  });

  criterion("end-to-end determinism and correctness", [&](Check& c) {
    auto start = Clock::now();
    auto config = toy_config();
    auto g1 = load_graph(config.source);
    auto g2 = load_graph(config.target);
    auto reference = read_alignment(oracle::data("anatomy-mini-reference.rdf"));
    std::string outputs[2];
    for (auto& out : outputs) {
      auto backend = ScriptedBackend::from_file(oracle::data("anatomy-mini-script.json"));
      ExactMatchEmbedder embedder;
      auto result = run_pipeline(g1, g2, config, embedder, &backend, &reference);
      c.near(result.report.evaluation->f1, 1.0, 0.0, "F1");
      out = to_alignment_xml(result.alignment);
    }
    c.expect(outputs[0] == outputs[1], "runs differ");
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    c.expect(secs < 10.0, "took " + std::to_string(secs) + " s");
  });

  criterion("multiple-choice semantics", [&](Check& c) {
    auto t8 = builtin_prompt(8);
    std::vector<std::pair<Correspondence, std::string>> opts;
    for (const char* name : {"Islet of Langerhans", "Pancreatic Secretion", "Pancreatic Endocrine Secretion", "Delta Cell of the Pancreas"})
      opts.emplace_back(Correspondence{Iri("http://a/src"), Iri(std::string("http://b/") + name), Relation::equivalence, 0.0}, name);
    ScriptedBackend none;
    none.otherwise(ScriptedBackend::answer(" none", {{" none", 0.7}, {" a", 0.2}, {" c", 0.1}}));
    for (const auto& r : judge_choice(Iri("http://a/src"), "endocrine pancreas secretion", opts, t8, none))
      c.expect(!r.kept, "kept " + r.correspondence.target.value + " under none");

    auto t9 = builtin_prompt(9);
    ScriptedBackend letter;
    letter.on("Answer:$", ScriptedBackend::answer(" c", {{" c", 0.8}, {" b", 0.1}, {" none", 0.1}}));
    auto results = judge_choice(Iri("http://a/src"), "endocrine pancreas secretion", opts, t9, letter);
    for (std::size_t i = 0; i < results.size(); ++i) c.expect(results[i].kept == (i == 2), "candidate " + std::to_string(i));
  });

  criterion("threshold boundary", [&](Check& c) {
    Alignment a;
    a.add(Iri("http://a/1"), Iri("http://b/1"), 0.5);
    a.add(Iri("http://a/2"), Iri("http://b/2"), std::nextafter(0.5, 0.0));
    PipelineConfig defaults;
    auto kept = confidence_filter(a, defaults.threshold);
    c.expect(kept.contains(Iri("http://a/1"), Iri("http://b/1")), "0.5 dropped");
    c.expect(!kept.contains(Iri("http://a/2"), Iri("http://b/2")), "below 0.5 kept");
    auto degenerate = extract_binary_confidence({slice_step("hmm", {{"hmm", 1.0}})}, pos, neg);
    Alignment b;
    b.add(Iri("http://a/3"), Iri("http://b/3"), degenerate.confidence);
    c.expect(confidence_filter(b, defaults.threshold).size() == 1, "confidence 0.5 from the judge dropped");
  });

  criterion("candidate recall monotonicity", [&](Check& c) {
    auto g1 = load_graph(oracle::data("anatomy-mini-source.ttl"));
    auto g2 = load_graph(oracle::data("anatomy-mini-target.ttl"));
    auto reference = read_alignment(oracle::data("anatomy-mini-reference.rdf"));
    for (const char* kind : {"hashed", "exact"}) {
      std::set<CorrespondenceKey> previous;
      for (std::size_t k : {1u, 3u, 5u}) {
        PipelineConfig cfg;
        cfg.embedder = kind;
        auto embedder = make_embedder(cfg);
        auto gen = generate_candidates(g1, g2, *embedder, k);
        std::set<CorrespondenceKey> now;
        covered(gen.alignment, reference, &now);
        c.expect(std::includes(now.begin(), now.end(), previous.begin(), previous.end()),
                 std::string(kind) + " coverage shrank at k=" + std::to_string(k));
        previous = std::move(now);
      }
    }
  });

  criterion("alignment-format round-trip", [&](Check& c) {
    std::mt19937 rng(404);
    for (int i = 0; i < 50; ++i) {
      auto a = oracle::random_alignment(rng);
      auto xml = to_alignment_xml(a);
      auto back = parse_alignment(xml);
      c.expect(back.same_correspondences(a), "alignment " + std::to_string(i) + " changed");
      c.expect(to_alignment_xml(back) == xml, "alignment " + std::to_string(i) + " not byte-stable");
    }
  });

  return failed == 0 ? 0 : 1;
}
