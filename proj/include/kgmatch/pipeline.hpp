#pragma once

// Configuration and orchestration of a full matching run:
// candidates -> LLM judge -> high-precision merge -> cardinality -> threshold.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "kgmatch/alignment.hpp"
#include "kgmatch/alignment_io.hpp"
#include "kgmatch/assignment.hpp"
#include "kgmatch/blocker.hpp"
#include "kgmatch/embedding.hpp"
#include "kgmatch/inference.hpp"
#include "kgmatch/judge.hpp"
#include "kgmatch/matching.hpp"
#include "kgmatch/prompts.hpp"
#include "kgmatch/rdf_io.hpp"
#include "kgmatch/verbalizer.hpp"

namespace kgmatch {

struct FewShotSpec {
  std::string left;
  std::string right;
  bool match = false;
  std::string left_iri;   // re-verbalized from the source graph when set
  std::string right_iri;  // re-verbalized from the target graph when set
};

struct PipelineConfig {
  std::string source;
  std::string target;
  std::string source_format = "auto";
  std::string target_format = "auto";
  TextExtractorKind extractor = TextExtractorKind::only_labels;
  std::size_t k = 5;
  int prompt_id = kDefaultPromptId;
  std::string prompt_file;
  std::optional<DecisionMode> mode;
  std::vector<std::string> positive_tokens;  // empty: template default
  std::vector<std::string> negative_tokens;
  double threshold = 0.5;
  std::string backend = "auto";  // auto | http | scripted | replay
  std::string llm_endpoint;
  std::string llm_model;
  std::string script;
  std::string record_transcript;
  std::string replay_transcript;
  std::string embedder = "auto";  // auto | hashed | exact | http
  std::string embed_endpoint;
  std::size_t parallelism = 4;
  std::set<EntityKind> entity_kinds{EntityKind::klass, EntityKind::property, EntityKind::instance};
  std::string reference;
  bool use_llm = true;
  bool use_high_precision = true;
  bool use_cardinality = true;
  int max_new_tokens = 10;
  int logprob_top_n = 20;
  std::vector<FewShotSpec> few_shot;
  LabelPropertyConfig labels;

  void validate() const {
    labels.validate();
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in [0,1]");
    if (parallelism == 0) throw std::invalid_argument("parallelism must be at least 1");
    if (prompt_file.empty() && (prompt_id < 0 || prompt_id >= kBuiltinPromptCount))
      throw std::invalid_argument("prompt id must be between 0 and " + std::to_string(kBuiltinPromptCount - 1));
    if (entity_kinds.empty()) throw std::invalid_argument("at least one entity kind is required");
    static const std::set<std::string> backends{"auto", "http", "scripted", "replay"};
    static const std::set<std::string> embedders{"auto", "hashed", "exact", "http"};
    if (!backends.count(backend)) throw std::invalid_argument("unknown backend: " + backend);
    if (!embedders.count(embedder)) throw std::invalid_argument("unknown embedder: " + embedder);
    GenerationParams{max_new_tokens, 0.0, {}, logprob_top_n}.validate();
  }
};

namespace detail {

inline std::vector<std::string> iri_strings(const std::vector<Iri>& iris) {
  std::vector<std::string> out;
  for (const auto& i : iris) out.push_back(i.value);
  return out;
}

inline std::vector<Iri> iri_list(const nlohmann::json& v) {
  std::vector<Iri> out;
  for (const auto& s : v) out.emplace_back(s.get<std::string>());
  return out;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
  using detail::iri_strings;
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : c.entity_kinds) kinds.push_back(to_string(k));
  nlohmann::json few = nlohmann::json::array();
  for (const auto& f : c.few_shot) {
    nlohmann::json e = {{"left", f.left}, {"right", f.right}, {"match", f.match}};
    if (!f.left_iri.empty()) e["left_iri"] = f.left_iri;
    if (!f.right_iri.empty()) e["right_iri"] = f.right_iri;
    few.push_back(e);
  }
  j = nlohmann::json{
      {"source", c.source},
      {"target", c.target},
      {"source_format", c.source_format},
      {"target_format", c.target_format},
      {"extractor", to_string(c.extractor)},
      {"k", c.k},
      {"prompt", c.prompt_id},
      {"prompt_file", c.prompt_file},
      {"mode", c.mode ? to_string(*c.mode) : std::string("template")},
      {"positive_tokens", c.positive_tokens},
      {"negative_tokens", c.negative_tokens},
      {"threshold", c.threshold},
      {"backend", c.backend},
      {"llm_endpoint", c.llm_endpoint},
      {"llm_model", c.llm_model},
      {"script", c.script},
      {"record_transcript", c.record_transcript},
      {"replay_transcript", c.replay_transcript},
      {"embedder", c.embedder},
      {"embed_endpoint", c.embed_endpoint},
      {"parallelism", c.parallelism},
      {"entity_kinds", kinds},
      {"reference", c.reference},
      {"use_llm", c.use_llm},
      {"use_high_precision", c.use_high_precision},
      {"use_cardinality", c.use_cardinality},
      {"max_new_tokens", c.max_new_tokens},
      {"logprob_top_n", c.logprob_top_n},
      {"few_shot", few},
      {"label_props", iri_strings(c.labels.label_props)},
      {"description_props", iri_strings(c.labels.description_props)},
  };
}

/// Applies the keys present in `j` on top of `c`. Unknown keys are errors.
inline void apply_config_json(PipelineConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "source") c.source = v.get<std::string>();
    else if (key == "target") c.target = v.get<std::string>();
    else if (key == "source_format") c.source_format = v.get<std::string>();
    else if (key == "target_format") c.target_format = v.get<std::string>();
    else if (key == "extractor") c.extractor = parse_extractor_kind(v.get<std::string>());
    else if (key == "k") c.k = v.get<std::size_t>();
    else if (key == "prompt") c.prompt_id = v.get<int>();
    else if (key == "prompt_file") c.prompt_file = v.get<std::string>();
    else if (key == "mode") {
      auto m = v.get<std::string>();
      if (m == "template" || m.empty()) c.mode.reset();
      else c.mode = parse_decision_mode(m);
    } else if (key == "positive_tokens") c.positive_tokens = v.get<std::vector<std::string>>();
    else if (key == "negative_tokens") c.negative_tokens = v.get<std::vector<std::string>>();
    else if (key == "threshold") c.threshold = v.get<double>();
    else if (key == "backend") c.backend = v.get<std::string>();
    else if (key == "llm_endpoint") c.llm_endpoint = v.get<std::string>();
    else if (key == "llm_model") c.llm_model = v.get<std::string>();
    else if (key == "script") c.script = v.get<std::string>();
    else if (key == "record_transcript") c.record_transcript = v.get<std::string>();
    else if (key == "replay_transcript") c.replay_transcript = v.get<std::string>();
    else if (key == "embedder") c.embedder = v.get<std::string>();
    else if (key == "embed_endpoint") c.embed_endpoint = v.get<std::string>();
    else if (key == "parallelism") c.parallelism = v.get<std::size_t>();
    else if (key == "entity_kinds") {
      c.entity_kinds.clear();
      for (const auto& k : v) c.entity_kinds.insert(parse_entity_kind(k.get<std::string>()));
    } else if (key == "reference") c.reference = v.get<std::string>();
    else if (key == "use_llm") c.use_llm = v.get<bool>();
    else if (key == "use_high_precision") c.use_high_precision = v.get<bool>();
    else if (key == "use_cardinality") c.use_cardinality = v.get<bool>();
    else if (key == "max_new_tokens") c.max_new_tokens = v.get<int>();
    else if (key == "logprob_top_n") c.logprob_top_n = v.get<int>();
    else if (key == "few_shot") {
      c.few_shot.clear();
      for (const auto& e : v)
        c.few_shot.push_back(FewShotSpec{e.value("left", std::string()), e.value("right", std::string()),
                                         e.value("match", false), e.value("left_iri", std::string()),
                                         e.value("right_iri", std::string())});
    } else if (key == "label_props") c.labels.label_props = detail::iri_list(v);
    else if (key == "description_props") c.labels.description_props = detail::iri_list(v);
    else
      throw std::invalid_argument("unknown config key: " + key);
  }
}

/// Relative paths in a config file resolve against the file's directory.
inline PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  apply_config_json(base, j);
  auto dir = path.parent_path();
  auto resolve = [&](const char* key, std::string& value) {
    if (j.contains(key) && !value.empty() && std::filesystem::path(value).is_relative()) value = (dir / value).string();
  };
  resolve("source", base.source);
  resolve("target", base.target);
  resolve("prompt_file", base.prompt_file);
  resolve("script", base.script);
  resolve("record_transcript", base.record_transcript);
  resolve("replay_transcript", base.replay_transcript);
  resolve("reference", base.reference);
  return base;
}

/// Endpoint and token environment variables fill settings not yet set.
inline void apply_environment(PipelineConfig& c, std::string* bearer_token = nullptr) {
  if (const char* v = std::getenv("KGMATCH_LLM_ENDPOINT"); v && c.llm_endpoint.empty()) c.llm_endpoint = v;
  if (const char* v = std::getenv("KGMATCH_EMBED_ENDPOINT"); v && c.embed_endpoint.empty()) c.embed_endpoint = v;
  if (const char* v = std::getenv("KGMATCH_LLM_TOKEN"); v && bearer_token) *bearer_token = v;
}

struct StageReport {
  std::string name;
  std::size_t size = 0;
  double seconds = 0;
};

struct RunReport {
  std::vector<StageReport> stages;
  std::vector<std::string> warnings;
  std::size_t skipped_source = 0;
  std::size_t skipped_target = 0;
  std::optional<EvalResult> evaluation;
  double total_seconds = 0;
  nlohmann::json effective_config;
  std::string failure;

  const StageReport* stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }

  std::string to_text() const {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-24s | %8s | %9s\n", "stage", "size", "seconds");
    out << line;
    for (const auto& s : stages) {
      std::snprintf(line, sizeof line, "%-24s | %8zu | %9.3f\n", s.name.c_str(), s.size, s.seconds);
      out << line;
    }
    out << "total time " << format_hms(std::chrono::duration<double>(total_seconds)) << '\n';
    out << "skipped entities without text: source " << skipped_source << ", target " << skipped_target << '\n';
    if (evaluation) {
      const auto& e = *evaluation;
      std::snprintf(line, sizeof line, "Prec %.3f Rec %.3f F1 %.3f Size %zu Time %s\n", e.precision, e.recall, e.f1,
                    e.system_size, format_hms(e.runtime).c_str());
      out << line;
    }
    if (!failure.empty()) out << "FAILED: " << failure << '\n';
    for (const auto& w : warnings) out << "warning: " << w << '\n';
    out << "config " << effective_config.dump() << '\n';
    return out.str();
  }
};

class PipelineError : public std::runtime_error {
 public:
  PipelineError(const std::string& what, RunReport report) : std::runtime_error(what), report_(std::move(report)) {}
  const RunReport& report() const { return report_; }

 private:
  RunReport report_;
};

struct PipelineResult {
  Alignment alignment;
  RunReport report;
};

/// Built-in or file template, with token overrides and the few-shot
/// examples re-verbalized from the graphs where IRIs are given.
inline PromptTemplate resolve_template(const PipelineConfig& c, const Graph* g1 = nullptr, const Graph* g2 = nullptr,
                                       std::vector<std::string>* warnings = nullptr) {
  PromptTemplate t;
  if (!c.prompt_file.empty()) {
    t = load_prompt_template(c.prompt_file);
  } else {
    auto examples = default_few_shot_examples();
    if (!c.few_shot.empty()) {
      examples.clear();
      for (const auto& f : c.few_shot) {
        FewShotExample e{f.left, f.right, f.match, {}, {}};
        if (!f.left_iri.empty()) e.left_iri = Iri(f.left_iri);
        if (!f.right_iri.empty()) e.right_iri = Iri(f.right_iri);
        auto reverbalize = [&](const std::optional<Iri>& iri, const Graph* g, std::string& text) {
          if (!iri || !g) return;
          if (!g->has_subject(*iri)) {
            if (warnings) warnings->push_back("few-shot entity " + iri->value + " not found; keeping its given text");
            return;
          }
          text = extract_text(c.extractor, *g, *iri, c.labels);
        };
        reverbalize(e.left_iri, g1, e.left);
        reverbalize(e.right_iri, g2, e.right);
        examples.push_back(std::move(e));
      }
    }
    t = builtin_prompt(c.prompt_id, examples);
  }
  if (c.mode && *c.mode != t.mode)
    throw std::invalid_argument("prompt " + t.id + " is a " + to_string(t.mode) + " template but mode " + to_string(*c.mode) +
                                " was requested");
  if (!c.positive_tokens.empty()) t.positive_tokens = {c.positive_tokens.begin(), c.positive_tokens.end()};
  if (!c.negative_tokens.empty()) t.negative_tokens = {c.negative_tokens.begin(), c.negative_tokens.end()};
  for (auto* set : {&t.positive_tokens, &t.negative_tokens}) {
    std::set<std::string> normalized;
    for (const auto& tok : *set) normalized.insert(normalize_token(tok, t.mode == DecisionMode::multiple_choice));
    *set = std::move(normalized);
  }
  t.validate();
  return t;
}

inline std::unique_ptr<Embedder> make_embedder(const PipelineConfig& c) {
  std::string kind = c.embedder;
  if (kind == "auto") kind = c.embed_endpoint.empty() ? "hashed" : "http";
  if (kind == "hashed") return std::make_unique<HashedNgramEmbedder>();
  if (kind == "exact") return std::make_unique<ExactMatchEmbedder>();
  if (kind == "http") {
    if (c.embed_endpoint.empty()) throw std::invalid_argument("http embedder needs an embedding endpoint");
    return std::make_unique<HttpEmbedder>(c.embed_endpoint);
  }
  throw std::invalid_argument("unknown embedder: " + c.embedder);
}

/// Owns the configured backend and an optional recording wrapper.
struct BackendHandle {
  std::unique_ptr<InferenceBackend> inner;
  std::unique_ptr<InferenceBackend> recorder;
  InferenceBackend& get() { return recorder ? *recorder : *inner; }
};

inline BackendHandle make_backend(const PipelineConfig& c, const std::string& bearer_token = {}) {
  std::string kind = c.backend;
  if (kind == "auto") {
    if (!c.replay_transcript.empty()) kind = "replay";
    else if (!c.script.empty()) kind = "scripted";
    else if (!c.llm_endpoint.empty()) kind = "http";
    else throw std::invalid_argument("no inference backend configured: give an LLM endpoint, a script or a transcript");
  }
  BackendHandle h;
  if (kind == "http") {
    if (c.llm_endpoint.empty()) throw std::invalid_argument("http backend needs an LLM endpoint");
    HttpBackend::Options o;
    o.client.bearer_token = bearer_token;
    o.model = c.llm_model;
    o.max_concurrency = c.parallelism;
    h.inner = std::make_unique<HttpBackend>(c.llm_endpoint, o);
  } else if (kind == "scripted") {
    if (c.script.empty()) throw std::invalid_argument("scripted backend needs a script file");
    h.inner = std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(c.script));
  } else if (kind == "replay") {
    if (c.replay_transcript.empty()) throw std::invalid_argument("replay backend needs a transcript file");
    h.inner = std::make_unique<ReplayBackend>(c.replay_transcript);
  } else {
    throw std::invalid_argument("unknown backend: " + c.backend);
  }
  if (!c.record_transcript.empty()) h.recorder = std::make_unique<RecordingBackend>(*h.inner, c.record_transcript);
  return h;
}

namespace detail {

class Stopwatch {
 public:
  double lap() {
    auto now = std::chrono::steady_clock::now();
    double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

/// Runs `task(i)` for i in [0, n) on up to `parallelism` threads. The first
/// exception stops further work and is rethrown.
template <typename Task>
void parallel_for(std::size_t n, std::size_t parallelism, Task task) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::size_t threads = std::max<std::size_t>(1, std::min(parallelism, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Stage names as they appear in the run report.
namespace stage {
inline constexpr const char* candidates = "candidates";
inline constexpr const char* llm = "llm";
inline constexpr const char* high_precision = "high_precision";
inline constexpr const char* merged = "merge";
inline constexpr const char* cardinality = "cardinality";
inline constexpr const char* confidence = "confidence";
}  // namespace stage

/// The full matching run. Any stage failure throws PipelineError carrying
/// the report up to that point; no partial alignment is returned.
inline PipelineResult run_pipeline(const Graph& g1, const Graph& g2, const PipelineConfig& config, Embedder& embedder,
                                   InferenceBackend* backend, const Alignment* reference = nullptr) {
  PipelineResult result;
  auto& report = result.report;
  report.effective_config = config;
  detail::Stopwatch total;
  detail::Stopwatch watch;
  const char* current = "config";
  Alignment current_alignment;
  try {
    config.validate();
    const LabelPropertyConfig& labels = config.labels;

    current = stage::candidates;
    auto gen = generate_candidates(g1, g2, embedder, config.k, labels, config.entity_kinds, config.parallelism);
    report.skipped_source = gen.skipped_source.size();
    report.skipped_target = gen.skipped_target.size();
    report.stages.push_back({stage::candidates, gen.alignment.size(), watch.lap()});
    current_alignment = gen.alignment;

    if (config.use_llm) {
      current = stage::llm;
      if (!backend) throw std::invalid_argument("LLM stage enabled but no inference backend given");
      auto tmpl = resolve_template(config, &g1, &g2, &report.warnings);
      JudgeOptions options;
      options.params.max_new_tokens = config.max_new_tokens;
      options.params.logprob_top_n = config.logprob_top_n;
      std::size_t fan_out = std::max<std::size_t>(1, std::min(config.parallelism, backend->max_concurrency()));

      std::map<Iri, std::string> left_text, right_text;
      for (const auto& c : gen.candidates) {
        left_text.try_emplace(c.source);
        right_text.try_emplace(c.target);
      }
      for (auto& [iri, t] : left_text) t = extract_text(config.extractor, g1, iri, labels);
      for (auto& [iri, t] : right_text) t = extract_text(config.extractor, g2, iri, labels);
      for (const auto* side : {&left_text, &right_text})
        for (const auto& [iri, t] : *side)
          if (text::trim(t).empty()) report.warnings.push_back("empty verbalization for " + iri.value);

      Alignment judged;
      if (tmpl.mode == DecisionMode::binary) {
        std::vector<JudgeResult> results(gen.candidates.size());
        detail::parallel_for(gen.candidates.size(), fan_out, [&](std::size_t i) {
          const auto& c = gen.candidates[i];
          Correspondence corr{c.source, c.target, Relation::equivalence, 0.0};
          results[i] = judge_binary(corr, left_text.at(c.source), right_text.at(c.target), tmpl, *backend, options);
        });
        for (const auto& r : results) {
          if (!r.warning.empty()) report.warnings.push_back(r.warning);
          judged.add(r.correspondence.source, r.correspondence.target, r.confidence, Provenance::candidate | Provenance::llm);
        }
      } else {
        std::map<Iri, std::vector<const Candidate*>> groups;
        for (const auto& c : gen.candidates) groups[c.source].push_back(&c);
        std::vector<std::pair<Iri, std::vector<const Candidate*>>> work(groups.begin(), groups.end());
        for (auto& [source, members] : work) {
          std::stable_sort(members.begin(), members.end(), [](const Candidate* a, const Candidate* b) {
            if (a->similarity != b->similarity) return a->similarity > b->similarity;
            return a->target < b->target;
          });
          if (members.size() > kMaxChoices) {
            report.warnings.push_back(source.value + " has " + std::to_string(members.size()) + " candidates; only the top " +
                                      std::to_string(kMaxChoices) + " are offered");
            members.resize(kMaxChoices);
          }
        }
        std::vector<std::vector<JudgeResult>> results(work.size());
        detail::parallel_for(work.size(), fan_out, [&](std::size_t i) {
          const auto& [source, members] = work[i];
          std::vector<std::pair<Correspondence, std::string>> options_list;
          for (const auto* c : members)
            options_list.emplace_back(Correspondence{c->source, c->target, Relation::equivalence, 0.0}, right_text.at(c->target));
          results[i] = judge_choice(source, left_text.at(source), options_list, tmpl, *backend, options);
        });
        for (const auto& group : results)
          for (const auto& r : group) {
            if (!r.warning.empty() && (&r == &group.front())) report.warnings.push_back(r.warning);
            if (r.kept)
              judged.add(r.correspondence.source, r.correspondence.target, r.confidence, Provenance::candidate | Provenance::llm);
          }
      }
      current_alignment = std::move(judged);
      report.stages.push_back({stage::llm, current_alignment.size(), watch.lap()});
    }

    if (config.use_high_precision) {
      current = stage::high_precision;
      auto hp = high_precision_match(g1, g2, labels, config.entity_kinds);
      report.stages.push_back({stage::high_precision, hp.size(), watch.lap()});
      current_alignment = merge_alignments(current_alignment, hp);
      report.stages.push_back({stage::merged, current_alignment.size(), watch.lap()});
    }

    if (config.use_cardinality) {
      current = stage::cardinality;
      auto before = current_alignment.size();
      current_alignment = max_weight_bipartite_extract(current_alignment);
      if (current_alignment.size() > before) throw std::logic_error("cardinality extraction grew the alignment");
      report.stages.push_back({stage::cardinality, current_alignment.size(), watch.lap()});
    }

    current = stage::confidence;
    auto before = current_alignment.size();
    current_alignment = confidence_filter(current_alignment, config.threshold);
    if (current_alignment.size() > before) throw std::logic_error("confidence filter grew the alignment");
    report.stages.push_back({stage::confidence, current_alignment.size(), watch.lap()});
  } catch (const std::exception& e) {
    report.total_seconds = total.lap();
    report.failure = std::string(current) + ": " + e.what();
    throw PipelineError(report.failure, report);
  }
  report.total_seconds = total.lap();
  if (reference) {
    report.evaluation = evaluate(current_alignment, *reference);
    report.evaluation->runtime = std::chrono::duration<double>(report.total_seconds);
  }
  result.alignment = std::move(current_alignment);
  return result;
}

}  // namespace kgmatch
