#pragma once

// Prompt templates: the ten built-in prompts (0-4 zero-shot binary, 5-7
// few-shot binary, 8-9 multiple choice) and user templates loaded from
// text files.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgmatch/rdf.hpp"
#include "kgmatch/text.hpp"

namespace kgmatch {

enum class DecisionMode { binary, multiple_choice };

inline std::string to_string(DecisionMode m) { return m == DecisionMode::binary ? "binary" : "multiple_choice"; }

inline DecisionMode parse_decision_mode(std::string_view s) {
  if (s == "binary") return DecisionMode::binary;
  if (s == "multiple_choice" || s == "choice" || s == "multiple-choice") return DecisionMode::multiple_choice;
  throw std::invalid_argument("unknown decision mode: " + std::string(s));
}

class MissingPlaceholder : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TooManyCandidates : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::string_view kLeft = "{left}";
inline constexpr std::string_view kRight = "{right}";
inline constexpr std::string_view kCandidates = "{candidates}";
inline constexpr std::size_t kMaxChoices = 26;

struct PromptTemplate {
  std::string id;
  std::string body;
  DecisionMode mode = DecisionMode::binary;
  std::set<std::string> positive_tokens{"yes", "true"};
  std::set<std::string> negative_tokens{"no", "false"};

  /// Throws MissingPlaceholder or std::invalid_argument.
  void validate() const {
    auto need = [&](std::string_view p) {
      if (body.find(p) == std::string::npos)
        throw MissingPlaceholder("template " + id + " lacks placeholder " + std::string(p));
    };
    need(kLeft);
    if (mode == DecisionMode::binary) need(kRight);
    else need(kCandidates);
    for (const auto& t : positive_tokens)
      if (negative_tokens.count(t)) throw std::invalid_argument("token '" + t + "' is both positive and negative");
  }
};

namespace detail {

/// Replaces placeholders in one left-to-right pass, so substituted text is
/// never re-scanned.
inline std::string substitute(std::string_view body, const std::map<std::string_view, std::string_view>& values) {
  std::string out;
  out.reserve(body.size());
  std::size_t i = 0;
  while (i < body.size()) {
    bool replaced = false;
    if (body[i] == '{') {
      for (const auto& [key, value] : values) {
        if (body.compare(i, key.size(), key) == 0) {
          out += value;
          i += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += body[i++];
  }
  return out;
}

}  // namespace detail

inline std::string render_binary_prompt(const PromptTemplate& t, std::string_view left_text, std::string_view right_text) {
  if (t.mode != DecisionMode::binary) throw std::invalid_argument("template " + t.id + " is not a binary template");
  if (t.body.find(kLeft) == std::string::npos || t.body.find(kRight) == std::string::npos)
    throw MissingPlaceholder("template " + t.id + " needs {left} and {right}");
  return detail::substitute(t.body, {{kLeft, left_text}, {kRight, right_text}});
}

inline char choice_letter(std::size_t index) { return static_cast<char>('a' + index); }

/// The lettered candidate block: one "\t a) text\n" line per candidate.
inline std::string format_choice_block(const std::vector<std::string>& candidates) {
  if (candidates.size() > kMaxChoices)
    throw TooManyCandidates(std::to_string(candidates.size()) + " candidates exceed the " + std::to_string(kMaxChoices) + " letters");
  std::string out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out += "\t ";
    out += choice_letter(i);
    out += ") ";
    out += candidates[i];
    out += '\n';
  }
  return out;
}

struct ChoicePrompt {
  std::string prompt;
  std::map<char, std::size_t> letter_map;  // letter -> candidate index
};

inline ChoicePrompt render_choice_prompt(const PromptTemplate& t, std::string_view left_text,
                                         const std::vector<std::string>& candidate_texts) {
  if (t.mode != DecisionMode::multiple_choice) throw std::invalid_argument("template " + t.id + " is not a multiple-choice template");
  if (candidate_texts.empty()) throw std::invalid_argument("multiple-choice prompt needs at least one candidate");
  if (t.body.find(kLeft) == std::string::npos || t.body.find(kCandidates) == std::string::npos)
    throw MissingPlaceholder("template " + t.id + " needs {left} and {candidates}");
  auto block = format_choice_block(candidate_texts);
  ChoicePrompt out;
  out.prompt = detail::substitute(t.body, {{kLeft, left_text}, {kCandidates, block}});
  for (std::size_t i = 0; i < candidate_texts.size(); ++i) out.letter_map[choice_letter(i)] = i;
  return out;
}

/// A worked example inside a few-shot prompt. The IRIs, when known, let the
/// example be re-verbalized with the active text extractor.
struct FewShotExample {
  std::string left;
  std::string right;
  bool match = false;
  std::optional<Iri> left_iri;
  std::optional<Iri> right_iri;
};

/// The six default anatomy examples of the few-shot prompts.
inline std::vector<FewShotExample> default_few_shot_examples() {
  return {
      {"endocrine pancreas secretion", "Pancreatic Endocrine Secretion", true, {}, {}},
      {"urinary bladder urothelium", "Transitional Epithelium", false, {}, {}},
      {"trigeminal V nerve ophthalmic division", "Ophthalmic Nerve", true, {}, {}},
      {"foot digit 1 phalanx", "", false, {}, {}},
      {"large intestine", "Colon", false, {}, {}},
      {"ocular refractive media", "Refractile Media", true, {}, {}},
  };
}

struct ChoiceExample {
  std::string left;
  std::vector<std::string> candidates;
  std::string answer;  // a letter or "none"
};

inline ChoiceExample default_choice_example() {
  return {"endocrine pancreas secretion",
          {"Islet of Langerhans", "Pancreatic Secretion", "Pancreatic Endocrine Secretion", "Delta Cell of the Pancreas"},
          "c"};
}

/// The few-shot example block: one "### Concept one: ... ### Answer: yes|no"
/// line per example followed by the test line.
inline std::string few_shot_block(const std::vector<FewShotExample>& examples) {
  std::string out;
  for (const auto& e : examples)
    out += "### Concept one: " + e.left + " ### Concept two: " + e.right + " ### Answer: " + (e.match ? "yes" : "no") + "\n";
  out += "### Concept one: {left} ### Concept two: {right} ### Answer:";
  return out;
}

inline constexpr std::string_view kChoiceQuestion = "Which of the following descriptions fits best to this description: ";
inline constexpr std::string_view kChoiceInstruction =
    "Answer with the corresponding letter or \"none\" if no description fits. Answer:";
inline constexpr std::string_view kChoiceTask =
    "The task is ontology matching (find the description which refer to the same real world entity). ";

inline constexpr int kDefaultPromptId = 7;
inline constexpr int kBuiltinPromptCount = 10;

/// Built-in prompt `id` (0-9). Few-shot prompts (5, 6, 7, 9) are assembled
/// from the given examples (default: the six anatomy examples).
inline PromptTemplate builtin_prompt(int id, const std::vector<FewShotExample>& examples = default_few_shot_examples(),
                                     const ChoiceExample& choice_example = default_choice_example()) {
  PromptTemplate t;
  t.id = std::to_string(id);
  switch (id) {
    case 0:
      t.body = "Classify if the following two concepts are the same.\n### First concept:\n{left}\n### Second concept:\n{right}\n### Answer:";
      break;
    case 1:
      t.body =
          "Classify if two concepts refer to the same real word entity. This is an ontology matching task between the "
          "anatomy of human and mouse.\nFirst concept:{left}\n Second concept:{right}\nAnswer:";
      break;
    case 2:
      t.body = "Is {left} and {right} the same? The answer which can be yes or no is";
      break;
    case 3:
      t.body =
          "The task is ontology matching. Given two concepts, the task is to classify if they are the same or not.\n"
          "The first concept is:{left}\n The second concept is:{right}\nThe answer which can be yes or no is:";
      break;
    case 4:
      t.body = "Given two concepts decide if they match or not.\nFirst concept:{left}\n Second concept:{right}\nAnswer(yes or no):";
      break;
    case 5: {
      std::vector<FewShotExample> two(examples.begin(), examples.begin() + std::min<std::size_t>(2, examples.size()));
      t.body = few_shot_block(two);
      break;
    }
    case 6:
      t.body = few_shot_block(examples);
      break;
    case 7:
      t.body = "Classify if two descriptions refer to the same real world entity (ontology matching).\n" + few_shot_block(examples);
      break;
    case 8:
      t.mode = DecisionMode::multiple_choice;
      t.body = std::string(kChoiceTask) + std::string(kChoiceQuestion) + "{left}?\n{candidates}" + std::string(kChoiceInstruction);
      break;
    case 9:
      t.mode = DecisionMode::multiple_choice;
      t.body = std::string(kChoiceTask) + std::string(kChoiceQuestion) + choice_example.left + "?\n" +
               format_choice_block(choice_example.candidates) + std::string(kChoiceInstruction) + " " +
               choice_example.answer + "\n" + std::string(kChoiceQuestion) + "{left}?\n{candidates}" +
               std::string(kChoiceInstruction);
      break;
    default:
      throw std::out_of_range("no built-in prompt with id " + std::to_string(id));
  }
  if (t.mode == DecisionMode::multiple_choice) {
    t.positive_tokens.clear();
    t.negative_tokens = {"none"};
  }
  return t;
}

/// Parses a template file: "\n" and "\t" escapes become newline and tab;
/// a trailing newline is dropped. The mode follows the placeholders.
inline PromptTemplate parse_prompt_template(std::string_view content, std::string id) {
  std::string body(content);
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  PromptTemplate t;
  t.id = std::move(id);
  t.body = text::unescape_template(body);
  if (t.body.find(kCandidates) != std::string::npos) {
    t.mode = DecisionMode::multiple_choice;
    t.positive_tokens.clear();
    t.negative_tokens = {"none"};
  }
  t.validate();
  return t;
}

inline PromptTemplate load_prompt_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open prompt template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_prompt_template(buf.str(), path.filename().string());
}

}  // namespace kgmatch
