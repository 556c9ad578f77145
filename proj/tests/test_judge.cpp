#include <gtest/gtest.h>

#include <random>

#include "kgmatch/judge.hpp"
#include "oracles.hpp"

using namespace kgmatch;

namespace {

TokenStep step(const std::string& chosen, const std::map<std::string, double>& slice) {
  TokenStep s;
  s.token = chosen;
  for (const auto& [t, p] : slice) s.top.emplace_back(t, p);
  auto it = slice.find(chosen);
  s.probability = it == slice.end() ? 0.0 : it->second;
  return s;
}

const std::set<std::string> kPos{"yes", "true"};
const std::set<std::string> kNeg{"no", "false"};

Correspondence corr(const std::string& s, const std::string& t) {
  return Correspondence{Iri("http://a/" + s), Iri("http://b/" + t), Relation::equivalence, 0.0};
}

std::vector<std::pair<Correspondence, std::string>> options(const std::vector<std::string>& texts) {
  std::vector<std::pair<Correspondence, std::string>> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.emplace_back(corr("src", "t" + std::to_string(i)), texts[i]);
  return out;
}

}  // namespace

TEST(Prompts, BinaryRender) {
  auto t = builtin_prompt(2);
  EXPECT_EQ(render_binary_prompt(t, "heart", "Heart"), "Is heart and Heart the same? The answer which can be yes or no is");
  EXPECT_EQ(render_binary_prompt(t, "", ""), "Is  and  the same? The answer which can be yes or no is");
}

TEST(Prompts, SubstitutedTextIsNotRescanned) {
  auto t = builtin_prompt(2);
  EXPECT_EQ(render_binary_prompt(t, "{right}", "x"), "Is {right} and x the same? The answer which can be yes or no is");
}

TEST(Prompts, FewShotLengthArithmetic) {
  auto t = builtin_prompt(7);
  std::string l = "spinal cord grey matter", r = "Spinal Cord Grey Matter";
  auto p = render_binary_prompt(t, l, r);
  EXPECT_EQ(p.size(), t.body.size() - kLeft.size() - kRight.size() + l.size() + r.size());
  EXPECT_EQ(std::count(p.begin(), p.end(), '\n'), 7);
  EXPECT_TRUE(p.ends_with("### Concept one: spinal cord grey matter ### Concept two: Spinal Cord Grey Matter ### Answer:"));
}

TEST(Prompts, AllBuiltinsValidate) {
  for (int id = 0; id < kBuiltinPromptCount; ++id) EXPECT_NO_THROW(builtin_prompt(id).validate()) << id;
  EXPECT_EQ(builtin_prompt(8).mode, DecisionMode::multiple_choice);
  EXPECT_EQ(builtin_prompt(9).mode, DecisionMode::multiple_choice);
  EXPECT_THROW(builtin_prompt(10), std::out_of_range);
}

TEST(Prompts, TemplateFileParsing) {
  auto t = parse_prompt_template("Same? {left} vs {right}\\nAnswer:\n", "mine");
  EXPECT_EQ(t.body, "Same? {left} vs {right}\nAnswer:");
  EXPECT_EQ(t.mode, DecisionMode::binary);
  EXPECT_EQ(parse_prompt_template("{left}?\n{candidates}", "c").mode, DecisionMode::multiple_choice);
  EXPECT_THROW(parse_prompt_template("only {left}", "bad"), MissingPlaceholder);
}

TEST(Prompts, ChoiceBlockMatchesCatalogExample) {
  auto t = builtin_prompt(9);
  auto ex = default_choice_example();
  auto block = format_choice_block(ex.candidates);
  EXPECT_EQ(block,
            "\t a) Islet of Langerhans\n\t b) Pancreatic Secretion\n\t c) Pancreatic Endocrine Secretion\n\t d) Delta Cell of the "
            "Pancreas\n");
  EXPECT_NE(t.body.find(block), std::string::npos);
  auto rendered = render_choice_prompt(t, ex.left, ex.candidates);
  EXPECT_EQ(rendered.letter_map.size(), 4u);
}

TEST(Prompts, ChoiceLettersAreABijection) {
  auto t = builtin_prompt(8);
  auto single = render_choice_prompt(t, "heart", {"Heart"});
  EXPECT_EQ(single.letter_map, (std::map<char, std::size_t>{{'a', 0}}));
  EXPECT_NE(single.prompt.find("\t a) Heart\n"), std::string::npos);

  std::vector<std::string> many;
  for (int i = 0; i < 26; ++i) many.push_back("c" + std::to_string(i));
  auto full = render_choice_prompt(t, "x", many);
  std::set<std::size_t> indices;
  for (const auto& [letter, index] : full.letter_map) {
    EXPECT_EQ(letter, 'a' + static_cast<char>(index));
    indices.insert(index);
  }
  EXPECT_EQ(indices.size(), 26u);
  many.push_back("overflow");
  EXPECT_THROW(render_choice_prompt(t, "x", many), TooManyCandidates);
}

TEST(NormalizeToken, MarkersCaseAndPunctuation) {
  EXPECT_EQ(normalize_token(" Yes"), "yes");
  EXPECT_EQ(normalize_token("\xE2\x96\x81yes"), "yes");
  EXPECT_EQ(normalize_token("\xC4\xA0No"), "no");
  EXPECT_EQ(normalize_token("(c)", true), "c");
  EXPECT_EQ(normalize_token(" c.", true), "c");
  EXPECT_EQ(normalize_token("c)", false), "c)");
}

TEST(BinaryConfidence, KnownValues) {
  EXPECT_NEAR(extract_binary_confidence({step("yes", {{"yes", 0.4}, {"no", 0.1}})}, kPos, kNeg).confidence, 0.8, 1e-12);
  EXPECT_NEAR(extract_binary_confidence({step("no", {{"no", 0.9}, {"maybe", 0.1}})}, kPos, kNeg).confidence, 0.0, 1e-12);
  EXPECT_NEAR(extract_binary_confidence({step(" Yes", {{" Yes", 0.5}, {"true", 0.7}, {" no", 0.1}})}, kPos, kNeg).confidence,
              0.875, 1e-12);
}

TEST(BinaryConfidence, FirstClassTokenPosition) {
  TokenDistribution d{step(" The", {{" The", 0.9}, {" yes", 0.05}}), step(" answer", {{" answer", 1.0}}),
                      step(" yes", {{" yes", 0.6}, {" no", 0.2}})};
  auto bc = extract_binary_confidence(d, kPos, kNeg);
  ASSERT_TRUE(bc.position);
  EXPECT_EQ(*bc.position, 2u);
  EXPECT_NEAR(bc.confidence, 0.75, 1e-12);
}

TEST(BinaryConfidence, FallbackToFirstPosition) {
  TokenDistribution d{step(" maybe", {{" maybe", 0.5}, {" yes", 0.3}, {" no", 0.1}}), step(" so", {{" so", 1.0}})};
  auto bc = extract_binary_confidence(d, kPos, kNeg);
  EXPECT_FALSE(bc.position);
  EXPECT_NEAR(bc.confidence, 0.75, 1e-12);
  auto degenerate = extract_binary_confidence({step("hmm", {{"hmm", 1.0}})}, kPos, kNeg);
  EXPECT_TRUE(degenerate.degenerate);
  EXPECT_DOUBLE_EQ(degenerate.confidence, 0.5);
  EXPECT_THROW(extract_binary_confidence({}, kPos, kNeg), std::invalid_argument);
}

TEST(BinaryConfidence, RandomDistributionsAgreeWithOracle) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  const std::vector<std::string> vocab{"yes", "no", "true", "false", "maybe", "the"};
  for (int i = 0; i < 200; ++i) {
    std::map<std::string, double> slice;
    for (const auto& t : vocab)
      if (u(rng) < 0.7) slice[t] = u(rng);
    slice["yes"] = u(rng);
    auto bc = extract_binary_confidence({step("yes", slice)}, kPos, kNeg);
    EXPECT_NEAR(bc.confidence, oracle::binary_confidence(slice, kPos, kNeg), 1e-12);
    EXPECT_GE(bc.confidence, 0.0);
    EXPECT_LE(bc.confidence, 1.0);
  }
}

TEST(JudgeBinary, ConfidenceFromScriptAndDeterminism) {
  ScriptedBackend b;
  b.on("heart", ScriptedBackend::answer(" yes", {{" yes", 0.4}, {" no", 0.1}}));
  auto t = builtin_prompt(2);
  auto r1 = judge_binary(corr("h", "H"), "heart", "Heart", t, b);
  auto r2 = judge_binary(corr("h", "H"), "heart", "Heart", t, b);
  EXPECT_NEAR(r1.confidence, 0.8, 1e-12);
  EXPECT_EQ(r1.confidence, r2.confidence);
  EXPECT_EQ(r1.decision_position, std::optional<std::size_t>(0));
  EXPECT_EQ(r1.raw_completion, " yes");
}

TEST(JudgeBinary, TruncatesAfterFirstClassToken) {
  ScriptedBackend::Reply r;
  r.tokens = {{" yes", {{" yes", 0.9}, {" no", 0.1}}}, {" no", {{" no", 1.0}}}};
  ScriptedBackend b;
  b.otherwise(r);
  JudgeOptions o;
  o.stop_hints = false;
  auto res = judge_binary(corr("a", "b"), "a", "b", builtin_prompt(2), b, o);
  EXPECT_EQ(res.raw_completion, " yes");
  EXPECT_NEAR(res.confidence, 0.9, 1e-12);
}

TEST(JudgeBinary, BackendFailureNamesCorrespondence) {
  ScriptedBackend b;
  try {
    judge_binary(corr("a", "b"), "a", "b", builtin_prompt(2), b);
    FAIL() << "expected JudgeError";
  } catch (const JudgeError& e) {
    EXPECT_EQ(e.source().value, "http://a/a");
    EXPECT_EQ(e.target().value, "http://b/b");
  }
  ScriptedBackend empty;
  empty.otherwise(ScriptedBackend::Reply{});
  EXPECT_THROW(judge_binary(corr("a", "b"), "a", "b", builtin_prompt(2), empty), JudgeError);
}

TEST(JudgeChoice, LetterSelectedAndNormalized) {
  ScriptedBackend b;
  b.otherwise(ScriptedBackend::answer(" c", {{" c", 0.6}, {" a", 0.1}, {" none", 0.05}}));
  auto results = judge_choice(Iri("http://a/src"), "endocrine pancreas secretion",
                              options({"Islet of Langerhans", "Pancreatic Secretion", "Pancreatic Endocrine Secretion"}),
                              builtin_prompt(8), b);
  ASSERT_EQ(results.size(), 3u);
  EXPECT_FALSE(results[0].kept);
  EXPECT_FALSE(results[1].kept);
  EXPECT_TRUE(results[2].kept);
  EXPECT_NEAR(results[2].confidence, 0.8, 1e-12);
  EXPECT_EQ(results[2].correspondence.target.value, "http://b/t2");
}

TEST(JudgeChoice, NoneRemovesAll) {
  ScriptedBackend b;
  b.otherwise(ScriptedBackend::answer(" none", {{" none", 0.9}, {" a", 0.05}}));
  auto results = judge_choice(Iri("http://a/src"), "x", options({"p", "q"}), builtin_prompt(8), b);
  for (const auto& r : results) EXPECT_FALSE(r.kept);
}

TEST(JudgeChoice, DegenerateRemovesAllWithWarning) {
  ScriptedBackend b;
  b.otherwise(ScriptedBackend::answer(" hmm", {{" hmm", 1.0}}));
  auto results = judge_choice(Iri("http://a/src"), "x", options({"p", "q"}), builtin_prompt(8), b);
  for (const auto& r : results) {
    EXPECT_FALSE(r.kept);
    EXPECT_FALSE(r.warning.empty());
  }
}

TEST(JudgeChoice, FewShotPromptSelectsThirdCandidate) {
  auto t = builtin_prompt(9);
  auto ex = default_choice_example();
  ScriptedBackend b;
  b.on("Answer:$", ScriptedBackend::answer(" c", {{" c", 0.7}, {" b", 0.2}, {" none", 0.1}}));
  auto results = judge_choice(Iri("http://a/src"), ex.left, options(ex.candidates), t, b);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < results.size(); ++i)
    if (results[i].kept) kept.push_back(i);
  EXPECT_EQ(kept, std::vector<std::size_t>{2});
}
