#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "longsteer/analysis.hpp"
#include "longsteer/binary_io.hpp"
#include "longsteer/error.hpp"
#include "longsteer/log.hpp"
#include "longsteer/memory.hpp"
#include "longsteer/pipeline.hpp"
#include "longsteer/vector_io.hpp"

namespace longsteer::cli {

namespace fs = std::filesystem;

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw Error(Errc::kConfigError, std::string("no ") + what + " given");
  if (!fs::is_regular_file(path)) throw MissingInput(path);
}

namespace {

void require_out(const fs::path& out, const char* what) {
  if (out.empty()) throw Error(Errc::kConfigError, std::string("no output path for ") + what);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
}

void require_out_dir(const fs::path& out) {
  if (out.empty()) throw Error(Errc::kConfigError, "no output directory given (--out)");
  fs::create_directories(out);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  bin::write_file(path, j.dump(2) + "\n");
}

// Pins "middle" to a concrete layer so the snapshot reproduces the run.
void pin_layer(RunConfig& cfg, const ModelBackend& backend) {
  cfg.layer = cfg.resolved_layer(backend.num_layers());
  backend.check_layer(*cfg.layer);
}

std::map<std::string, DomainMemory> load_memories(const RunConfig& cfg) {
  std::map<std::string, DomainMemory> out;
  for (const auto& [domain, path] : cfg.memories) {
    require_file(path, "memory file");
    out.emplace(domain, load_memory(path));
  }
  return out;
}

std::optional<SteeringVector> load_pattern(const RunConfig& cfg) {
  if (cfg.pattern.empty()) return std::nullopt;
  require_file(cfg.pattern, "pattern vector");
  auto v = load_steering_vector(cfg.pattern);
  if (v.kind != VectorKind::kPattern) {
    throw Error(Errc::kConfigError, cfg.pattern.string() + " holds a domain vector, not a pattern");
  }
  return v;
}

}  // namespace

std::unique_ptr<ModelBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend != "mock" && cfg.model_id.empty()) {
    throw Error(Errc::kConfigError, "no model given (--model or model_id in the config)");
  }
  auto backend = create_backend(cfg.backend, {cfg.model_id, cfg.backend_options});
  backend->settings().max_new_tokens = cfg.max_new_tokens;
  if (cfg.backend_options.contains("chat_template")) {
    backend->set_chat_template(cfg.backend_options["chat_template"].get<std::string>());
  }
  return backend;
}

nlohmann::json cmd_extract(RunConfig cfg, const ExtractOptions& opts) {
  cfg.validate();
  require_file(cfg.examples, "examples file");
  require_out(cfg.out, "extract");
  const auto examples = load_examples(cfg.examples);
  auto backend = make_backend(cfg);
  pin_layer(cfg, *backend);

  ExtractionOptions eo;
  eo.include_instruction = cfg.include_instruction;
  auto result = extract_all(examples, *backend, *cfg.layer, opts.kinds, eo);
  result.manifest.input_digest = sha256_file(cfg.examples);

  save_records(cfg.out, result.records);
  auto manifest = result.manifest.to_json();
  manifest["records"] = result.records.size();
  manifest["examples"] = cfg.examples.string();
  auto manifest_path = cfg.out;
  manifest_path += ".manifest.json";
  write_json(manifest_path, manifest);
  write_config_snapshot(cfg, cfg.out);
  return manifest;
}

SteeringVector cmd_pattern(RunConfig cfg, const PatternOptions& opts) {
  cfg.validate();
  require_file(cfg.records, "record container");
  require_out(cfg.out, "pattern");
  const auto records = load_records(cfg.records);

  std::vector<RepresentationRecord> at_layer;
  for (const auto& r : records) {
    if (!cfg.layer || r.layer == *cfg.layer) at_layer.push_back(r);
  }
  auto pairs = pair_by_example(at_layer);
  if (pairs.empty()) {
    throw Error(Errc::kEmptyInput, cfg.records.string() + " has no complete long/vanilla pairs" +
                                       (cfg.layer ? " at layer " + std::to_string(*cfg.layer) : ""));
  }
  if (opts.limit > 0 && pairs.size() > static_cast<std::size_t>(opts.limit)) {
    pairs = std::vector<ContrastPair>(pairs.begin(), pairs.begin() + opts.limit);
  }
  auto pattern = contrastive_pattern(pairs);
  cfg.layer = pattern.layer;

  std::string model_id = cfg.model_id;
  const auto manifest_path = fs::path(cfg.records.string() + ".manifest.json");
  if (fs::exists(manifest_path)) {
    const auto m = nlohmann::json::parse(bin::read_file(manifest_path), nullptr, false);
    if (m.is_object()) model_id = m.value("model_id", model_id);
  }
  nlohmann::json extra = {{"records", cfg.records.string()}};
  save_steering_vector(cfg.out, pattern, model_id, extra);
  write_config_snapshot(cfg, cfg.out);
  return pattern;
}

std::size_t cmd_memory_build(RunConfig cfg, const MemoryOptions& opts) {
  cfg.validate();
  require_file(cfg.examples, "examples file");
  require_out(cfg.out, "memory build");
  auto examples = load_examples(cfg.examples);
  if (!opts.domain.empty()) {
    std::erase_if(examples, [&](const CoTExample& e) { return e.domain != opts.domain; });
  }
  auto backend = make_backend(cfg);
  pin_layer(cfg, *backend);
  ExtractionOptions eo;
  eo.include_instruction = cfg.include_instruction;
  const auto mem = memory_build(examples, *backend, *cfg.layer, eo);
  save_memory(cfg.out, mem);
  write_config_snapshot(cfg, cfg.out, {{"domain", opts.domain}});
  return mem.size();
}

nlohmann::json GenerateOutput::to_json() const {
  return {{"prompt", prompt},
          {"text", generation.text},
          {"token_ids", generation.token_ids},
          {"num_tokens", generation.num_tokens},
          {"stopped_at_eos", generation.stopped_at_eos}};
}

std::vector<GenerateOutput> cmd_generate(RunConfig cfg, const GenerateOptions& opts) {
  cfg.validate();
  if (opts.prompts.empty()) throw Error(Errc::kEmptyInput, "no prompts given");
  std::optional<SteeringVector> pattern;
  std::map<std::string, DomainMemory> memories;
  if (opts.steer) {
    pattern = load_pattern(cfg);
    memories = load_memories(cfg);
    if (!pattern && !memories.empty()) {
      throw Error(Errc::kConfigError, "domain memories need a pattern vector as well");
    }
  }
  const DomainMemory* memory = nullptr;
  if (!memories.empty()) {
    if (!opts.domain.empty()) {
      const auto it = memories.find(opts.domain);
      if (it == memories.end()) {
        warn("no memory configured for domain '" + opts.domain + "', using the pattern vector only");
      } else {
        memory = &it->second;
      }
    } else if (memories.size() == 1) {
      memory = &memories.begin()->second;
    } else {
      throw Error(Errc::kConfigError, "several memories configured; choose one with --domain");
    }
  }

  auto backend = make_backend(cfg);
  pin_layer(cfg, *backend);
  const auto inj = cfg.injection(backend->num_layers());

  std::vector<GenerateOutput> out;
  for (const auto& prompt : opts.prompts) {
    GenerateOutput g;
    g.prompt = prompt;
    if (pattern) {
      std::optional<SteeringVector> domain;
      if (memory != nullptr) {
        domain = retrieve_domain_vector(*memory, backend->hidden_state(prompt, memory->layer()), inj.k);
      }
      const auto edits = build_edits(*pattern, domain ? &*domain : nullptr, inj);
      g.generation = backend->generate_with_edits(prompt, edits);
    } else {
      g.generation = backend->generate(prompt);
    }
    out.push_back(std::move(g));
  }

  if (!cfg.out.empty()) {
    require_out(cfg.out, "generate");
    std::ostringstream lines;
    for (const auto& g : out) lines << g.to_json().dump() << '\n';
    bin::write_file(cfg.out, lines.str());
    write_config_snapshot(cfg, cfg.out, {{"steer", opts.steer}, {"domain", opts.domain}});
  }
  return out;
}

nlohmann::json cmd_eval(RunConfig cfg, const EvalOptions& opts) {
  cfg.validate();
  require_file(cfg.items, "benchmark items");
  require_out_dir(cfg.out);
  auto items = load_items(cfg.items);
  if (opts.limit > 0 && items.size() > opts.limit) items.resize(opts.limit);

  SteeringArtifacts artifacts;
  const bool any_steered =
      std::find(opts.methods.begin(), opts.methods.end(), "steered") != opts.methods.end();
  if (any_steered) {
    artifacts.pattern = load_pattern(cfg);
    artifacts.memories = load_memories(cfg);
  }

  auto backend = make_backend(cfg);
  pin_layer(cfg, *backend);

  nlohmann::json summary = nlohmann::json::array();
  for (const auto& method : opts.methods) {
    EvalConfig ec;
    ec.method = method;
    if (method == "steered") {
      ec.mode = PromptMode::kSteered;
    } else if (method != "zero_shot_cot") {
      throw Error(Errc::kConfigError, "unknown method '" + method + "'");
    }
    ec.injection = cfg.injection(backend->num_layers());
    if (opts.math_equivalence) ec.equivalence = basic_math_equivalence;

    std::ofstream stream(cfg.out / (method + ".jsonl"), std::ios::trunc);
    if (!stream) throw Error(Errc::kIoError, "cannot write " + (cfg.out / (method + ".jsonl")).string());
    const auto progress = [&](const EvalRecord& r, std::size_t i, std::size_t n) {
      stream << r.to_json().dump() << '\n';
      stream.flush();
      if (opts.verbose) {
        std::cerr << method << " " << (i + 1) << "/" << n << " " << r.item_id << " tokens="
                  << r.output_tokens << (r.correct ? " correct" : "") << '\n';
      }
    };
    const auto result = run_eval(items, *backend, ec, artifacts, progress);
    summary.push_back(result.summary.to_json());
  }
  nlohmann::json doc = {{"model_id", backend->model_id()},
                        {"layer", *cfg.layer},
                        {"items", cfg.items.string()},
                        {"summary", summary}};
  write_json(cfg.out / "summary.json", doc);
  write_config_snapshot(cfg, cfg.out);
  return doc;
}

nlohmann::json cmd_analyze(RunConfig cfg, const AnalyzeOptions& opts) {
  cfg.validate();
  require_file(cfg.records, "record container");
  for (const auto& p : opts.eval_records) require_file(p, "evaluation records");
  require_out_dir(cfg.out);
  const auto records = load_records(cfg.records);
  if (records.empty()) throw Error(Errc::kEmptyInput, cfg.records.string() + " holds no records");

  nlohmann::json doc = nlohmann::json::object();
  nlohmann::json entropy = nlohmann::json::array();
  for (const auto& rep : entropy_by_layer(records, opts.by_domain)) entropy.push_back(rep.to_json());
  write_json(cfg.out / "entropy.json", entropy);
  doc["entropy"] = entropy;

  int layer = records.front().layer;
  if (cfg.layer) {
    layer = *cfg.layer;
  } else {
    for (const auto& r : records) {
      if (r.layer != layer) {
        throw Error(Errc::kConfigError, "records span several layers; choose one with --layer");
      }
    }
  }
  cfg.layer = layer;
  std::vector<RepresentationRecord> selected;
  for (const auto& r : records) {
    if (r.layer == layer && r.cot_kind != CotKind::kNone) selected.push_back(r);
  }
  const auto method = parse_projection_method(opts.projection);
  Reducer reducer;
  if (method == ProjectionMethod::kExternalTsne) {
    if (opts.reducer_command.empty()) {
      throw Error(Errc::kConfigError, "t-SNE needs --reducer-command");
    }
    reducer = external_command_reducer(opts.reducer_command, opts.perplexity, cfg.seed);
  }
  const auto projection = project_2d(selected, method, reducer);
  write_projection_csv(cfg.out / "projection.csv", projection);
  const auto sep = group_separation(projection, CotKind::kLong, CotKind::kVanilla);
  auto sep_json = sep.to_json();
  sep_json["layer"] = layer;
  sep_json["method"] = std::string(to_string(method));
  sep_json["params"] = projection.params;
  write_json(cfg.out / "separation.json", sep_json);
  doc["separation"] = sep_json;

  if (!opts.eval_records.empty()) {
    std::vector<EvalRecord> evals;
    for (const auto& p : opts.eval_records) {
      std::ifstream in(p);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(Errc::kParseError, p.string() + ": malformed record");
        EvalRecord r;
        r.item_id = j.value("item_id", "");
        r.method = j.value("method", "");
        r.output_tokens = j.value("output_tokens", 0);
        evals.push_back(std::move(r));
      }
    }
    nlohmann::json lengths = nlohmann::json::array();
    for (const auto& s : output_length_stats(evals)) lengths.push_back(s.to_json());
    write_json(cfg.out / "lengths.json", lengths);
    doc["lengths"] = lengths;
  }
  write_config_snapshot(cfg, cfg.out);
  return doc;
}

nlohmann::json cmd_sweep(RunConfig cfg, const SweepOptions& opts) {
  cfg.validate();
  require_out_dir(cfg.out);
  if (opts.target != "p" && opts.target != "d" && opts.target != "both") {
    throw Error(Errc::kConfigError, "sweep target must be p, d or both");
  }
  const auto root = cfg.out;
  nlohmann::json points = nlohmann::json::array();
  for (double lambda : opts.lambdas) {
    for (int k : opts.ks) {
      RunConfig point = cfg;
      if (opts.target != "d") point.lambda_p = lambda;
      if (opts.target != "p") point.lambda_d = lambda;
      point.k = k;
      std::ostringstream name;
      name << "lp" << point.lambda_p << "_ld" << point.lambda_d << "_k" << k;
      point.out = root / name.str();
      EvalOptions eo;
      eo.methods = {"steered"};
      eo.limit = opts.limit;
      const auto doc = cmd_eval(point, eo);
      nlohmann::json row = doc["summary"][0];
      row["lambda_p"] = point.lambda_p;
      row["lambda_d"] = point.lambda_d;
      row["k"] = k;
      row["dir"] = point.out.string();
      points.push_back(row);
    }
  }
  nlohmann::json doc = {{"target", opts.target}, {"points", points}};
  write_json(root / "sweep.json", doc);
  write_config_snapshot(cfg, root);
  return doc;
}

}  // namespace longsteer::cli
