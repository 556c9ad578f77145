#pragma once

// Text-completion backends that report per-token probabilities.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kgmatch/http.hpp"
#include "kgmatch/text.hpp"

namespace kgmatch {

struct GenerationParams {
  int max_new_tokens = 10;
  double temperature = 0.0;
  std::vector<std::string> stop_sequences;
  int logprob_top_n = 20;

  void validate() const {
    if (max_new_tokens <= 0) throw std::invalid_argument("max_new_tokens must be positive");
    if (!(temperature >= 0)) throw std::invalid_argument("temperature must be non-negative");
    if (logprob_top_n <= 0) throw std::invalid_argument("logprob_top_n must be positive");
  }
};

inline void to_json(nlohmann::json& j, const GenerationParams& p) {
  j = {{"max_new_tokens", p.max_new_tokens}, {"temperature", p.temperature}, {"stop", p.stop_sequences}, {"logprob_top_n", p.logprob_top_n}};
}
inline void from_json(const nlohmann::json& j, GenerationParams& p) {
  p.max_new_tokens = j.value("max_new_tokens", 10);
  p.temperature = j.value("temperature", 0.0);
  p.stop_sequences = j.value("stop", std::vector<std::string>{});
  p.logprob_top_n = j.value("logprob_top_n", 20);
}

/// Probability slice at one generated position: the chosen token and the
/// top-N alternatives sorted by descending probability.
struct TokenStep {
  std::string token;
  double probability = 0.0;
  std::vector<std::pair<std::string, double>> top;
};

using TokenDistribution = std::vector<TokenStep>;

enum class FinishReason { stop, length, error };

inline std::string to_string(FinishReason r) {
  switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "error";
}

inline FinishReason parse_finish_reason(const std::string& s) {
  if (s == "length") return FinishReason::length;
  if (s == "error") return FinishReason::error;
  return FinishReason::stop;
}

struct Completion {
  std::string text;
  TokenDistribution tokens;
  FinishReason finish_reason = FinishReason::stop;

  friend bool operator==(const Completion& a, const Completion& b) {
    if (a.text != b.text || a.finish_reason != b.finish_reason || a.tokens.size() != b.tokens.size()) return false;
    for (std::size_t i = 0; i < a.tokens.size(); ++i) {
      const auto &x = a.tokens[i], &y = b.tokens[i];
      if (x.token != y.token || x.probability != y.probability || x.top != y.top) return false;
    }
    return true;
  }
};

inline void to_json(nlohmann::json& j, const Completion& c) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : c.tokens) {
    nlohmann::json top = nlohmann::json::array();
    for (const auto& [tok, p] : t.top) top.push_back({tok, p});
    tokens.push_back({{"token", t.token}, {"p", t.probability}, {"top", top}});
  }
  j = {{"text", c.text}, {"tokens", tokens}, {"finish_reason", to_string(c.finish_reason)}};
}
inline void from_json(const nlohmann::json& j, Completion& c) {
  c.text = j.at("text").get<std::string>();
  c.finish_reason = parse_finish_reason(j.value("finish_reason", "stop"));
  c.tokens.clear();
  for (const auto& t : j.at("tokens")) {
    TokenStep step;
    step.token = t.at("token").get<std::string>();
    step.probability = t.at("p").get<double>();
    for (const auto& pair : t.at("top")) step.top.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<double>());
    c.tokens.push_back(std::move(step));
  }
}

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoScriptEntry : public BackendError {
 public:
  using BackendError::BackendError;
};

class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;
  virtual Completion complete(const std::string& prompt, const GenerationParams& params) = 0;
  /// Maximum concurrent complete() calls the backend tolerates.
  virtual std::size_t max_concurrency() const { return std::numeric_limits<std::size_t>::max(); }
  virtual std::string name() const = 0;
};

/// Stable key for a (prompt, params) request.
inline std::string request_key(const std::string& prompt, const GenerationParams& params) {
  nlohmann::json j = params;
  auto h = text::fnv1a64(prompt);
  h = text::fnv1a64(j.dump(), h);
  return text::hex64(h);
}

inline std::string prompt_hash(const std::string& prompt) { return text::hex64(text::fnv1a64(prompt)); }

/// Sorts the slice by descending probability (ties by token) and trims it
/// to `top_n` entries.
inline void normalize_slice(TokenStep& step, std::size_t top_n) {
  std::stable_sort(step.top.begin(), step.top.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (step.top.size() > top_n) step.top.resize(top_n);
}

/// Backend answering from a script of (pattern -> reply) rules, tried in
/// order against the prompt with regex_search; an optional default applies
/// when nothing matches.
class ScriptedBackend final : public InferenceBackend {
 public:
  struct Reply {
    /// Generated tokens, each with its probability slice (token -> p). A
    /// chosen token missing from its slice is added with probability 0.
    std::vector<std::pair<std::string, std::map<std::string, double>>> tokens;
    FinishReason finish_reason = FinishReason::stop;
  };

  struct Rule {
    std::function<bool(const std::string&)> matches;
    Reply reply;
  };

  ScriptedBackend() = default;

  ScriptedBackend& on(const std::string& pattern, Reply reply, bool icase = false) {
    auto flags = std::regex::ECMAScript | (icase ? std::regex::icase : std::regex::ECMAScript);
    std::regex re(pattern, flags);
    rules_.push_back(Rule{[re](const std::string& prompt) { return std::regex_search(prompt, re); }, std::move(reply)});
    return *this;
  }

  ScriptedBackend& on(std::function<bool(const std::string&)> predicate, Reply reply) {
    rules_.push_back(Rule{std::move(predicate), std::move(reply)});
    return *this;
  }

  ScriptedBackend& otherwise(Reply reply) {
    default_ = std::move(reply);
    return *this;
  }

  /// Single-token reply: `token` chosen, `slice` its distribution.
  static Reply answer(const std::string& token, std::map<std::string, double> slice) {
    return Reply{{{token, std::move(slice)}}, FinishReason::stop};
  }

  /// Loads a script file:
  /// {"rules": [{"pattern": "...", "icase": bool, "tokens": [{"token": "yes", "top": {"yes": 0.9, "no": 0.1}}]}],
  ///  "default": {"tokens": [...]}}
  static ScriptedBackend from_json(const nlohmann::json& j) {
    ScriptedBackend b;
    auto parse_reply = [](const nlohmann::json& r) {
      Reply reply;
      for (const auto& t : r.at("tokens"))
        reply.tokens.emplace_back(t.at("token").get<std::string>(), t.value("top", std::map<std::string, double>{}));
      reply.finish_reason = parse_finish_reason(r.value("finish_reason", "stop"));
      return reply;
    };
    for (const auto& rule : j.value("rules", nlohmann::json::array()))
      b.on(rule.at("pattern").get<std::string>(), parse_reply(rule), rule.value("icase", false));
    if (j.contains("default")) b.otherwise(parse_reply(j.at("default")));
    return b;
  }

  static ScriptedBackend from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open script " + path.string());
    return from_json(nlohmann::json::parse(in));
  }

  Completion complete(const std::string& prompt, const GenerationParams& params) override {
    const Reply* reply = nullptr;
    for (const auto& rule : rules_) {
      if (rule.matches(prompt)) {
        reply = &rule.reply;
        break;
      }
    }
    if (!reply && default_) reply = &*default_;
    if (!reply) throw NoScriptEntry("no script entry matches prompt " + prompt_hash(prompt));

    Completion c;
    c.finish_reason = reply->finish_reason;
    for (const auto& [token, slice] : reply->tokens) {
      if (static_cast<int>(c.tokens.size()) >= params.max_new_tokens) {
        c.finish_reason = FinishReason::length;
        break;
      }
      TokenStep step;
      step.token = token;
      for (const auto& [t, p] : slice) step.top.emplace_back(t, p);
      auto it = slice.find(token);
      step.probability = it == slice.end() ? 0.0 : it->second;
      if (it == slice.end()) step.top.emplace_back(token, 0.0);
      normalize_slice(step, static_cast<std::size_t>(params.logprob_top_n));
      c.text += token;
      c.tokens.push_back(std::move(step));
      bool stopped = std::any_of(params.stop_sequences.begin(), params.stop_sequences.end(),
                                 [&](const std::string& s) { return !s.empty() && c.text.find(s) != std::string::npos; });
      if (stopped) {
        c.finish_reason = FinishReason::stop;
        break;
      }
    }
    return c;
  }

  std::string name() const override { return "scripted"; }

 private:
  std::vector<Rule> rules_;
  std::optional<Reply> default_;
};

/// Client for a completion endpoint speaking the common JSON contract:
/// request {prompt, max_tokens, temperature, stop, logprobs: N}, response
/// {choices: [{text, finish_reason, logprobs: {tokens, token_logprobs,
/// top_logprobs}}]}. Each position's top-N log-probabilities are
/// exponentiated and renormalized over the returned slice.
class HttpBackend final : public InferenceBackend {
 public:
  struct Options {
    http::ClientOptions client;
    std::string model;
    std::size_t max_concurrency = 4;
  };

  HttpBackend(std::string url, Options options)
      : url_(std::move(url)), endpoint_(http::parse_endpoint(url_)), options_(std::move(options)) {}

  Completion complete(const std::string& prompt, const GenerationParams& params) override {
    params.validate();
    nlohmann::json body = {{"prompt", prompt},
                           {"max_tokens", params.max_new_tokens},
                           {"temperature", params.temperature},
                           {"stop", params.stop_sequences},
                           {"logprobs", params.logprob_top_n}};
    if (!options_.model.empty()) body["model"] = options_.model;
    if (!params.stop_sequences.empty()) body["include_stop_str_in_output"] = true;
    try {
      return http::post_json(endpoint_, body, options_.client, request_key(prompt, params),
                             [&](const nlohmann::json& j) { return parse_completion_response(j, params); });
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError(e.what());
    }
  }

  /// Decodes one completion response; throws http::MalformedResponse.
  static Completion parse_completion_response(const nlohmann::json& j, const GenerationParams& params) {
    const auto& choices = j.at("choices");
    if (!choices.is_array() || choices.empty()) throw http::MalformedResponse("response has no choices");
    const auto& choice = choices.at(0);
    Completion c;
    c.text = choice.value("text", std::string());
    c.finish_reason = parse_finish_reason(choice.value("finish_reason", std::string("stop")));
    if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
      if (!c.text.empty()) throw http::MalformedResponse("response has no logprobs");
      return c;
    }
    const auto& lp = choice.at("logprobs");
    auto tokens = lp.value("tokens", std::vector<std::string>{});
    std::vector<std::optional<double>> chosen_lp;
    if (lp.contains("token_logprobs") && lp.at("token_logprobs").is_array())
      for (const auto& v : lp.at("token_logprobs"))
        chosen_lp.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    const auto& top = lp.contains("top_logprobs") ? lp.at("top_logprobs") : nlohmann::json::array();
    if (static_cast<int>(tokens.size()) > params.max_new_tokens) tokens.resize(params.max_new_tokens);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      TokenStep step;
      step.token = tokens[i];
      std::map<std::string, double> logprobs;
      if (i < top.size() && top[i].is_object())
        for (const auto& [tok, v] : top[i].items()) logprobs[tok] = v.get<double>();
      if (i < chosen_lp.size() && chosen_lp[i]) logprobs.try_emplace(step.token, *chosen_lp[i]);
      if (logprobs.empty()) throw http::MalformedResponse("no probabilities for token " + std::to_string(i));
      double mass = 0;
      for (const auto& [_, v] : logprobs) {
        if (!std::isfinite(v) && v != -std::numeric_limits<double>::infinity())
          throw http::MalformedResponse("invalid logprob");
        mass += std::exp(v);
      }
      if (!(mass > 0)) throw http::MalformedResponse("zero probability mass at token " + std::to_string(i));
      for (const auto& [tok, v] : logprobs) step.top.emplace_back(tok, std::exp(v) / mass);
      normalize_slice(step, static_cast<std::size_t>(params.logprob_top_n));
      auto it = std::find_if(step.top.begin(), step.top.end(), [&](const auto& p) { return p.first == step.token; });
      step.probability = it == step.top.end() ? 0.0 : it->second;
      c.tokens.push_back(std::move(step));
    }
    return c;
  }

  std::size_t max_concurrency() const override { return std::max<std::size_t>(1, options_.max_concurrency); }
  std::string name() const override { return "http:" + url_; }

 private:
  std::string url_;
  http::Endpoint endpoint_;
  Options options_;
};

/// Wraps a backend and appends every exchange to a newline-delimited JSON
/// transcript: {"prompt_hash", "params", "completion"}.
class RecordingBackend final : public InferenceBackend {
 public:
  RecordingBackend(InferenceBackend& inner, const std::filesystem::path& path) : inner_(inner), out_(path, std::ios::app) {
    if (!out_) throw std::runtime_error("cannot open transcript " + path.string());
  }

  Completion complete(const std::string& prompt, const GenerationParams& params) override {
    auto c = inner_.complete(prompt, params);
    nlohmann::json record = {{"prompt_hash", request_key(prompt, params)}, {"params", params}, {"completion", c}};
    std::lock_guard lock(mutex_);
    out_ << record.dump() << '\n';
    out_.flush();
    return c;
  }

  std::size_t max_concurrency() const override { return inner_.max_concurrency(); }
  std::string name() const override { return "recording(" + inner_.name() + ")"; }

 private:
  InferenceBackend& inner_;
  std::ofstream out_;
  std::mutex mutex_;
};

/// Serves completions from a recorded transcript, keyed by prompt and params.
class ReplayBackend final : public InferenceBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open transcript " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line);
      records_[j.at("prompt_hash").get<std::string>()] = j.at("completion").get<Completion>();
    }
  }

  Completion complete(const std::string& prompt, const GenerationParams& params) override {
    auto it = records_.find(request_key(prompt, params));
    if (it == records_.end()) throw NoScriptEntry("transcript has no record for prompt " + prompt_hash(prompt));
    return it->second;
  }

  std::string name() const override { return "replay"; }

 private:
  std::map<std::string, Completion> records_;
};

}  // namespace kgmatch
