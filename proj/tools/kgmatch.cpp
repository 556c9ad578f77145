// kgmatch: match two ontologies, generate candidates only, or evaluate an
// alignment against a reference.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kgmatch/alignment_io.hpp"
#include "kgmatch/pipeline.hpp"

namespace {

using namespace kgmatch;

struct Overrides {
  std::string config;
  std::optional<std::string> source, target, source_format, target_format, extractor, prompt, mode;
  std::optional<std::size_t> k, parallelism;
  std::optional<double> threshold;
  std::optional<std::string> backend, llm_endpoint, llm_model, script, record, replay, embedder, embed_endpoint, reference;
  std::vector<std::string> entity_kinds, positive_tokens, negative_tokens;
  std::optional<int> max_new_tokens, logprob_top_n;
  bool no_llm = false, no_hp = false, no_cardinality = false;
  std::string out;
  std::string report;
};

void add_common_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config, "JSON config file; flags override its values");
  cmd.add_option("--source", o.source, "source ontology (.ttl, .nt, .rdf, .owl)");
  cmd.add_option("--target", o.target, "target ontology");
  cmd.add_option("--source-format", o.source_format, "auto, turtle, ntriples or rdfxml");
  cmd.add_option("--target-format", o.target_format, "auto, turtle, ntriples or rdfxml");
  cmd.add_option("--extractor", o.extractor, "set, only_labels, verbalized_rdf or description_in_rdf");
  cmd.add_option("--k", o.k, "candidates per entity and direction");
  cmd.add_option("--parallelism", o.parallelism, "worker threads and in-flight LLM requests");
  cmd.add_option("--embedder", o.embedder, "auto, hashed, exact or http");
  cmd.add_option("--embed-endpoint", o.embed_endpoint, "embedding service URL");
  cmd.add_option("--entity-kinds", o.entity_kinds, "class, property, instance")->delimiter(',');
  cmd.add_option("--reference", o.reference, "reference alignment for evaluation");
  cmd.add_option("--out", o.out, "output alignment file (default stdout)");
  cmd.add_option("--report", o.report, "run report file (default stderr)");
}

void add_llm_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--prompt", o.prompt, "built-in prompt id 0-9 or a template file");
  cmd.add_option("--mode", o.mode, "binary or multiple_choice; must agree with the prompt");
  cmd.add_option("--threshold", o.threshold, "confidence filter threshold (inclusive)");
  cmd.add_option("--backend", o.backend, "auto, http, scripted or replay");
  cmd.add_option("--llm-endpoint", o.llm_endpoint, "completion endpoint URL");
  cmd.add_option("--model", o.llm_model, "model name sent to the endpoint");
  cmd.add_option("--script", o.script, "scripted backend rules (JSON)");
  cmd.add_option("--record", o.record, "append every LLM exchange to this transcript");
  cmd.add_option("--replay", o.replay, "answer from a recorded transcript");
  cmd.add_option("--positive-tokens", o.positive_tokens, "tokens meaning a match")->delimiter(',');
  cmd.add_option("--negative-tokens", o.negative_tokens, "tokens meaning no match")->delimiter(',');
  cmd.add_option("--max-new-tokens", o.max_new_tokens, "generation length limit");
  cmd.add_option("--logprob-top-n", o.logprob_top_n, "probability slice size per position");
  cmd.add_flag("--no-llm", o.no_llm, "skip the LLM stage");
  cmd.add_flag("--no-hp", o.no_hp, "skip the high-precision matcher");
  cmd.add_flag("--no-cardinality", o.no_cardinality, "skip one-to-one extraction");
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

PipelineConfig effective_config(const Overrides& o, std::string& token) {
  PipelineConfig c;
  if (!o.config.empty()) c = load_config_file(o.config);
  apply_environment(c, &token);
  auto set = [](auto& field, const auto& value) {
    if (value) field = *value;
  };
  set(c.source, o.source);
  set(c.target, o.target);
  set(c.source_format, o.source_format);
  set(c.target_format, o.target_format);
  if (o.extractor) c.extractor = parse_extractor_kind(*o.extractor);
  set(c.k, o.k);
  set(c.parallelism, o.parallelism);
  set(c.threshold, o.threshold);
  if (o.prompt) {
    if (all_digits(*o.prompt)) {
      c.prompt_id = std::stoi(*o.prompt);
      c.prompt_file.clear();
    } else {
      c.prompt_file = *o.prompt;
    }
  }
  if (o.mode) c.mode = parse_decision_mode(*o.mode);
  set(c.backend, o.backend);
  set(c.llm_endpoint, o.llm_endpoint);
  set(c.llm_model, o.llm_model);
  set(c.script, o.script);
  set(c.record_transcript, o.record);
  set(c.replay_transcript, o.replay);
  set(c.embedder, o.embedder);
  set(c.embed_endpoint, o.embed_endpoint);
  set(c.reference, o.reference);
  set(c.max_new_tokens, o.max_new_tokens);
  set(c.logprob_top_n, o.logprob_top_n);
  if (!o.entity_kinds.empty()) {
    c.entity_kinds.clear();
    for (const auto& k : o.entity_kinds) c.entity_kinds.insert(parse_entity_kind(k));
  }
  if (!o.positive_tokens.empty()) c.positive_tokens = o.positive_tokens;
  if (!o.negative_tokens.empty()) c.negative_tokens = o.negative_tokens;
  if (o.no_llm) c.use_llm = false;
  if (o.no_hp) c.use_high_precision = false;
  if (o.no_cardinality) c.use_cardinality = false;
  if (c.source.empty()) throw std::invalid_argument("no source ontology given (--source)");
  if (c.target.empty()) throw std::invalid_argument("no target ontology given (--target)");
  c.validate();
  return c;
}

Graph load(const std::string& path, const std::string& format) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("no such file: " + path);
  try {
    return load_graph(path, parse_rdf_format(format));
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ":" + std::to_string(e.line()) + ": " + e.message());
  }
}

Alignment load_alignment(const std::string& path, std::vector<std::string>& warnings) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("no such file: " + path);
  try {
    return read_alignment(path, &warnings);
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ":" + std::to_string(e.line()) + ": " + e.message());
  }
}

void emit_alignment(const Alignment& a, const std::string& out) {
  if (out.empty() || out == "-") write_alignment(a, std::cout);
  else write_alignment(a, std::filesystem::path(out));
}

void emit_report(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cerr << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write report " + path);
  f << text;
}

int cmd_match(const Overrides& o) {
  std::string token;
  auto config = effective_config(o, token);
  auto g1 = load(config.source, config.source_format);
  auto g2 = load(config.target, config.target_format);
  std::vector<std::string> ref_warnings;
  std::optional<Alignment> reference;
  if (!config.reference.empty()) reference = load_alignment(config.reference, ref_warnings);
  auto embedder = make_embedder(config);
  std::optional<BackendHandle> backend;
  if (config.use_llm) backend = make_backend(config, token);
  try {
    auto result = run_pipeline(g1, g2, config, *embedder, backend ? &backend->get() : nullptr,
                               reference ? &*reference : nullptr);
    for (auto& w : ref_warnings) result.report.warnings.push_back(std::move(w));
    emit_alignment(result.alignment, o.out);
    emit_report(result.report.to_text(), o.report);
    if (result.report.evaluation) {
      std::FILE* sink = (o.out.empty() || o.out == "-") ? stderr : stdout;
      std::fprintf(sink, "Prec Rec F1 Size\n%s\n", format_eval_row(*result.report.evaluation).c_str());
    }
    return 0;
  } catch (const PipelineError& e) {
    emit_report(e.report().to_text(), o.report);
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_candidates(const Overrides& o) {
  std::string token;
  auto config = effective_config(o, token);
  auto g1 = load(config.source, config.source_format);
  auto g2 = load(config.target, config.target_format);
  auto embedder = make_embedder(config);
  auto gen = generate_candidates(g1, g2, *embedder, config.k, {}, config.entity_kinds, config.parallelism);
  emit_alignment(gen.alignment, o.out);
  std::FILE* sink = (o.out.empty() || o.out == "-") ? stderr : stdout;
  std::fprintf(sink, "candidates %zu\nskipped source %zu target %zu\n", gen.alignment.size(), gen.skipped_source.size(),
               gen.skipped_target.size());
  if (!config.reference.empty()) {
    std::vector<std::string> warnings;
    auto reference = load_alignment(config.reference, warnings);
    auto r = evaluate(gen.alignment, reference);
    std::fprintf(sink, "recall %.3f\n", r.recall);
  }
  return 0;
}

int cmd_eval(const std::string& system_path, const std::string& reference_path) {
  std::vector<std::string> warnings;
  auto system = load_alignment(system_path, warnings);
  auto reference = load_alignment(reference_path, warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "Prec Rec F1 Size\n" << format_eval_row(evaluate(system, reference)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ontology and knowledge graph matching with LLM judging"};
  app.require_subcommand(1);

  Overrides match_opts, cand_opts;
  auto* match = app.add_subcommand("match", "run the full matching pipeline");
  add_common_options(*match, match_opts);
  add_llm_options(*match, match_opts);

  auto* candidates = app.add_subcommand("candidates", "write the candidate alignment only");
  add_common_options(*candidates, cand_opts);

  std::string system_path, reference_path;
  auto* eval = app.add_subcommand("eval", "score an alignment against a reference");
  eval->add_option("system", system_path, "system alignment")->required();
  eval->add_option("reference", reference_path, "reference alignment")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*match) return cmd_match(match_opts);
    if (*candidates) return cmd_candidates(cand_opts);
    if (*eval) return cmd_eval(system_path, reference_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
