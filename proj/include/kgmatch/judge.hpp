#pragma once

// Turning completions into correspondence confidences: binary yes/no
// judging and multiple-choice selection among the candidates of one source.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgmatch/alignment.hpp"
#include "kgmatch/inference.hpp"
#include "kgmatch/prompts.hpp"

namespace kgmatch {

/// Case-folded, trimmed surface form of a generated token. Tokenizer word
/// markers ("▁", "Ġ") are dropped. In choice mode a letter answer
/// such as "(c)" or "c." reduces to "c".
inline std::string normalize_token(std::string_view token, bool choice = false) {
  std::string s(text::trim(token));
  for (bool again = true; again;) {
    again = false;
    for (std::string_view marker : {std::string_view("\xE2\x96\x81"), std::string_view("\xC4\xA0")}) {
      if (s.compare(0, marker.size(), marker) == 0) {
        s.erase(0, marker.size());
        again = true;
      }
    }
  }
  s = text::to_lower(text::trim(s));
  if (choice) {
    while (!s.empty() && (s.back() == ')' || s.back() == '.' || s.back() == ':')) s.pop_back();
    while (!s.empty() && s.front() == '(') s.erase(0, 1);
  }
  return s;
}

struct BinaryConfidence {
  double confidence = 0.5;
  std::optional<std::size_t> position;  // nullopt: first-token fallback
  bool degenerate = false;              // no class mass at the decision position
};

namespace detail {

inline double class_max(const TokenStep& step, const std::set<std::string>& tokens, bool choice = false) {
  double best = 0;
  for (const auto& [tok, p] : step.top)
    if (tokens.count(normalize_token(tok, choice))) best = std::max(best, p);
  if (tokens.count(normalize_token(step.token, choice))) best = std::max(best, step.probability);
  return best;
}

}  // namespace detail

/// Confidence = max positive probability / (max positive + max negative) at
/// the first position that generated a class token, or at position 0 when
/// none did. Zero mass on both classes yields 0.5 with `degenerate` set.
inline BinaryConfidence extract_binary_confidence(const TokenDistribution& dist, const std::set<std::string>& pos,
                                                  const std::set<std::string>& neg) {
  if (dist.empty()) throw std::invalid_argument("token distribution has no positions");
  BinaryConfidence out;
  std::size_t at = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    auto tok = normalize_token(dist[i].token);
    if (pos.count(tok) || neg.count(tok)) {
      out.position = i;
      at = i;
      break;
    }
  }
  double p = detail::class_max(dist[at], pos);
  double n = detail::class_max(dist[at], neg);
  if (p + n <= 0) {
    out.degenerate = true;
    out.confidence = 0.5;
    return out;
  }
  out.confidence = std::clamp(p / (p + n), 0.0, 1.0);
  return out;
}

struct JudgeResult {
  Correspondence correspondence;
  double confidence = 0;
  std::optional<std::size_t> decision_position;
  std::string raw_completion;
  bool kept = true;
  std::string warning;
};

/// Backend failure while judging one correspondence.
class JudgeError : public BackendError {
 public:
  JudgeError(Iri source, Iri target, const std::string& what)
      : BackendError("judging " + source.value + " = " + target.value + ": " + what),
        source_(std::move(source)),
        target_(std::move(target)) {}
  const Iri& source() const { return source_; }
  const Iri& target() const { return target_; }

 private:
  Iri source_;
  Iri target_;
};

struct JudgeOptions {
  GenerationParams params{};
  /// Ask the backend to stop on the class tokens. The answer is always
  /// also cut client side at the first class token.
  bool stop_hints = true;
};

namespace detail {

inline GenerationParams judge_params(const JudgeOptions& o, const std::set<std::string>& a, const std::set<std::string>& b) {
  auto params = o.params;
  params.temperature = 0.0;
  if (o.stop_hints) {
    for (const auto* set : {&a, &b})
      for (const auto& t : *set)
        if (std::find(params.stop_sequences.begin(), params.stop_sequences.end(), t) == params.stop_sequences.end())
          params.stop_sequences.push_back(t);
  }
  params.validate();
  return params;
}

/// Drops every position after the first one whose token satisfies `is_target`.
template <typename Pred>
void truncate_after_first(Completion& c, Pred is_target) {
  for (std::size_t i = 0; i < c.tokens.size(); ++i) {
    if (is_target(c.tokens[i].token)) {
      c.tokens.resize(i + 1);
      c.text.clear();
      for (const auto& s : c.tokens) c.text += s.token;
      return;
    }
  }
}

}  // namespace detail

inline JudgeResult judge_binary(const Correspondence& c, std::string_view left_text, std::string_view right_text,
                                const PromptTemplate& t, InferenceBackend& backend, const JudgeOptions& options = {}) {
  if (t.mode != DecisionMode::binary) throw std::invalid_argument("template " + t.id + " is not a binary template");
  auto prompt = render_binary_prompt(t, left_text, right_text);
  auto params = detail::judge_params(options, t.positive_tokens, t.negative_tokens);
  Completion completion;
  try {
    completion = backend.complete(prompt, params);
  } catch (const std::exception& e) {
    throw JudgeError(c.source, c.target, e.what());
  }
  if (completion.tokens.empty()) throw JudgeError(c.source, c.target, "backend returned no tokens");
  detail::truncate_after_first(completion, [&](const std::string& tok) {
    auto n = normalize_token(tok);
    return t.positive_tokens.count(n) || t.negative_tokens.count(n);
  });
  auto bc = extract_binary_confidence(completion.tokens, t.positive_tokens, t.negative_tokens);
  JudgeResult r;
  r.correspondence = c;
  r.correspondence.confidence = bc.confidence;
  r.confidence = bc.confidence;
  r.decision_position = bc.position;
  r.raw_completion = completion.text;
  if (bc.degenerate) r.warning = "no class token probability for " + c.source.value + " = " + c.target.value + "; confidence 0.5";
  return r;
}

/// One result per candidate, in the given order. Confidences are the letter
/// probabilities normalized over all letters plus the "none" answer; the top
/// letter is kept unless "none" strictly outranks every letter.
inline std::vector<JudgeResult> judge_choice(const Iri& source, std::string_view left_text,
                                             const std::vector<std::pair<Correspondence, std::string>>& candidates,
                                             const PromptTemplate& t, InferenceBackend& backend,
                                             const JudgeOptions& options = {}) {
  if (t.mode != DecisionMode::multiple_choice) throw std::invalid_argument("template " + t.id + " is not a multiple-choice template");
  if (candidates.empty()) throw std::invalid_argument("judge_choice needs at least one candidate");
  std::vector<std::string> texts;
  for (const auto& [_, text] : candidates) texts.push_back(text);
  auto rendered = render_choice_prompt(t, left_text, texts);

  std::set<std::string> letters;
  for (const auto& [letter, _] : rendered.letter_map) letters.insert(std::string(1, letter));
  const auto& none = t.negative_tokens;
  auto params = detail::judge_params(options, {}, {});
  Completion completion;
  try {
    completion = backend.complete(rendered.prompt, params);
  } catch (const std::exception& e) {
    throw JudgeError(source, candidates.front().first.target, e.what());
  }
  if (completion.tokens.empty()) throw JudgeError(source, candidates.front().first.target, "backend returned no tokens");
  auto is_answer = [&](const std::string& tok) {
    auto n = normalize_token(tok, true);
    return letters.count(n) || none.count(n);
  };
  detail::truncate_after_first(completion, is_answer);
  std::optional<std::size_t> position;
  for (std::size_t i = 0; i < completion.tokens.size(); ++i) {
    if (is_answer(completion.tokens[i].token)) {
      position = i;
      break;
    }
  }
  const auto& step = completion.tokens[position.value_or(0)];

  std::vector<double> mass(candidates.size());
  double total = 0;
  for (const auto& [letter, index] : rendered.letter_map) {
    mass[index] = detail::class_max(step, {std::string(1, letter)}, true);
    total += mass[index];
  }
  double none_mass = detail::class_max(step, none, true);
  total += none_mass;

  std::vector<JudgeResult> out(candidates.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& r = out[i];
    r.correspondence = candidates[i].first;
    r.confidence = total > 0 ? std::clamp(mass[i] / total, 0.0, 1.0) : 0.0;
    r.correspondence.confidence = r.confidence;
    r.decision_position = position;
    r.raw_completion = completion.text;
    r.kept = false;
    if (mass[i] > mass[best]) best = i;
  }
  if (total <= 0) {
    for (auto& r : out) r.warning = "no answer probability for " + source.value + "; all candidates removed";
    return out;
  }
  if (!(none_mass > mass[best])) out[best].kept = true;
  return out;
}

}  // namespace kgmatch
