#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "longsteer/error.hpp"

namespace longsteer::cli {

namespace {

// Flags shared by every subcommand. Anything left unset keeps the value
// from --config, which in turn overrides the built-in defaults.
struct CommonFlags {
  std::string config;
  std::optional<std::string> backend, model, layer, domain_phase;
  std::optional<double> lambda_p, lambda_d;
  std::optional<int> k, max_new_tokens;
  std::optional<unsigned> seed;
  std::optional<std::string> out;
  bool include_instruction = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--backend", backend, "Backend adapter (transformer, mock)");
    app->add_option("--model", model, "Model id or checkpoint directory");
    app->add_option("--layer", layer, "Layer index or 'middle'");
    app->add_option("--lambda-p", lambda_p, "Pattern vector strength");
    app->add_option("--lambda-d", lambda_d, "Domain vector strength");
    app->add_option("--k", k, "Memory entries averaged per query");
    app->add_option("--domain-phase", domain_phase, "prefill_only or every_step");
    app->add_option("--max-new-tokens", max_new_tokens, "Generation budget");
    app->add_option("--seed", seed, "Seed for seeded plug-ins");
    app->add_option("--out", out, "Output file or directory");
    app->add_flag("--include-instruction", include_instruction,
                  "Prefix the zero-shot instruction when extracting");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config.empty()) {
      require_file(config, "config file");
      cfg = RunConfig::load(config);
    }
    if (backend) cfg.backend = *backend;
    if (model) cfg.model_id = *model;
    if (layer) {
      if (*layer == "middle") {
        cfg.layer.reset();
      } else {
        try {
          cfg.layer = std::stoi(*layer);
        } catch (const std::exception&) {
          throw Error(Errc::kConfigError, "--layer must be an integer or 'middle'");
        }
      }
    }
    if (lambda_p) cfg.lambda_p = *lambda_p;
    if (lambda_d) cfg.lambda_d = *lambda_d;
    if (k) cfg.k = *k;
    if (domain_phase) cfg.domain_phase = parse_edit_phase(*domain_phase);
    if (max_new_tokens) cfg.max_new_tokens = *max_new_tokens;
    if (seed) cfg.seed = *seed;
    if (out) cfg.out = std::filesystem::absolute(*out);
    if (include_instruction) cfg.include_instruction = true;
    return cfg;
  }
};

void set_path(const std::optional<std::string>& flag, std::filesystem::path& field) {
  if (flag) field = std::filesystem::absolute(*flag);
}

void add_memories(const std::vector<std::string>& specs, RunConfig& cfg) {
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(Errc::kConfigError, "--memory expects domain=path, got '" + spec + "'");
    }
    cfg.memories[spec.substr(0, eq)] = std::filesystem::absolute(spec.substr(eq + 1));
  }
}

std::vector<std::string> read_prompt_file(const std::filesystem::path& path) {
  require_file(path, "prompt file");
  std::ifstream in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("prompt")) {
      out.push_back(j["prompt"].get<std::string>());
    } else if (!j.is_discarded() && j.is_string()) {
      out.push_back(j.get<std::string>());
    } else {
      out.push_back(line);
    }
  }
  return out;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Reasoning-pattern steering toolkit"};
  app.require_subcommand(1);

  // extract
  CommonFlags extract_flags;
  std::optional<std::string> extract_examples;
  std::vector<std::string> extract_kinds{"none", "vanilla", "long"};
  auto* extract = app.add_subcommand("extract", "Read hidden states for every example");
  extract_flags.attach(extract);
  extract->add_option("--examples", extract_examples, "CoT examples (JSONL)");
  extract->add_option("--kinds", extract_kinds, "Subset of none, vanilla, long")->delimiter(',');

  // pattern
  CommonFlags pattern_flags;
  std::optional<std::string> pattern_records;
  int pattern_limit = 0;
  auto* pattern = app.add_subcommand("pattern", "Average long-minus-vanilla differences");
  pattern_flags.attach(pattern);
  pattern->add_option("--records", pattern_records, "Record container from extract");
  pattern->add_option("--limit", pattern_limit, "Use at most this many pairs");

  // memory build
  auto* memory = app.add_subcommand("memory", "Domain memory tools");
  memory->require_subcommand(1);
  CommonFlags memory_flags;
  std::optional<std::string> memory_examples;
  std::string memory_domain;
  auto* memory_build_cmd = memory->add_subcommand("build", "Build a question-keyed memory");
  memory_flags.attach(memory_build_cmd);
  memory_build_cmd->add_option("--examples", memory_examples, "CoT examples (JSONL)");
  memory_build_cmd->add_option("--domain", memory_domain, "Keep only this domain");

  // generate
  CommonFlags gen_flags;
  std::vector<std::string> gen_prompts;
  std::optional<std::string> gen_prompt_file, gen_pattern;
  std::vector<std::string> gen_memories;
  std::string gen_domain;
  bool gen_baseline = false;
  auto* generate = app.add_subcommand("generate", "Greedy generation, optionally steered");
  gen_flags.attach(generate);
  generate->add_option("--prompt", gen_prompts, "Prompt text (repeatable)");
  generate->add_option("--prompts", gen_prompt_file, "File with one prompt per line or JSONL");
  generate->add_option("--pattern", gen_pattern, "Pattern vector file");
  generate->add_option("--memory", gen_memories, "domain=path (repeatable)");
  generate->add_option("--domain", gen_domain, "Memory to retrieve from");
  generate->add_flag("--baseline", gen_baseline, "Ignore all steering artifacts");

  // eval
  CommonFlags eval_flags;
  std::optional<std::string> eval_items, eval_pattern;
  std::vector<std::string> eval_memories;
  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Score a benchmark file");
  eval_flags.attach(eval);
  eval->add_option("--items", eval_items, "Benchmark items (JSONL)");
  eval->add_option("--pattern", eval_pattern, "Pattern vector file");
  eval->add_option("--memory", eval_memories, "domain=path (repeatable)");
  eval->add_option("--methods", eval_opts.methods, "zero_shot_cot and/or steered")->delimiter(',');
  eval->add_option("--limit", eval_opts.limit, "Evaluate only the first N items");
  eval->add_flag("--math-equivalence", eval_opts.math_equivalence,
                 "Accept numerically equal fraction/decimal forms");
  eval->add_flag("--verbose", eval_opts.verbose, "Per-item progress on stderr");

  // analyze
  CommonFlags analyze_flags;
  std::optional<std::string> analyze_records;
  AnalyzeOptions analyze_opts;
  std::vector<std::string> analyze_evals;
  auto* analyze = app.add_subcommand("analyze", "Entropy, 2D projection and length statistics");
  analyze_flags.attach(analyze);
  analyze->add_option("--records", analyze_records, "Record container from extract");
  analyze->add_option("--projection", analyze_opts.projection, "pca or tsne");
  analyze->add_option("--reducer-command", analyze_opts.reducer_command,
                      "External reducer, e.g. 'python3 tools/tsne_reduce.py'");
  analyze->add_option("--perplexity", analyze_opts.perplexity, "Passed to the reducer");
  analyze->add_flag("--by-domain", analyze_opts.by_domain, "Split entropy groups by domain");
  analyze->add_option("--eval-records", analyze_evals, "Evaluation JSONL files for length stats");

  // sweep
  CommonFlags sweep_flags;
  std::optional<std::string> sweep_items, sweep_pattern;
  std::vector<std::string> sweep_memories;
  SweepOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Steered evaluation over a strength x k grid");
  sweep_flags.attach(sweep);
  sweep->add_option("--items", sweep_items, "Benchmark items (JSONL)");
  sweep->add_option("--pattern", sweep_pattern, "Pattern vector file");
  sweep->add_option("--memory", sweep_memories, "domain=path (repeatable)");
  sweep->add_option("--lambdas", sweep_opts.lambdas, "Strengths to try")->delimiter(',');
  sweep->add_option("--ks", sweep_opts.ks, "k values to try")->delimiter(',');
  sweep->add_option("--target", sweep_opts.target, "Strength varied: p, d or both");
  sweep->add_option("--limit", sweep_opts.limit, "Evaluate only the first N items");

  // plot
  std::string plot_input, plot_out, plot_title;
  auto* plot = app.add_subcommand("plot", "Render projection.csv, entropy.json or lengths.json to SVG");
  plot->add_option("--input", plot_input, "Analysis output")->required();
  plot->add_option("--out", plot_out, "SVG path")->required();
  plot->add_option("--title", plot_title, "Chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const char* command = "";
  try {
    if (*extract) {
      command = "extract";
      auto cfg = extract_flags.resolve();
      set_path(extract_examples, cfg.examples);
      ExtractOptions opts;
      opts.kinds.clear();
      for (const auto& k : extract_kinds) opts.kinds.push_back(parse_cot_kind(k));
      const auto manifest = cmd_extract(cfg, opts);
      std::cout << manifest.dump(2) << '\n';
    } else if (*pattern) {
      command = "pattern";
      auto cfg = pattern_flags.resolve();
      set_path(pattern_records, cfg.records);
      const auto v = cmd_pattern(cfg, {pattern_limit});
      std::cout << "pattern vector: layer " << v.layer << ", dim " << v.dim() << ", pairs "
                << v.source_count << '\n';
    } else if (*memory_build_cmd) {
      command = "memory build";
      auto cfg = memory_flags.resolve();
      set_path(memory_examples, cfg.examples);
      const auto n = cmd_memory_build(cfg, {memory_domain});
      std::cout << "memory entries: " << n << '\n';
    } else if (*generate) {
      command = "generate";
      auto cfg = gen_flags.resolve();
      set_path(gen_pattern, cfg.pattern);
      add_memories(gen_memories, cfg);
      GenerateOptions opts;
      opts.prompts = gen_prompts;
      if (gen_prompt_file) {
        const auto more = read_prompt_file(*gen_prompt_file);
        opts.prompts.insert(opts.prompts.end(), more.begin(), more.end());
      }
      opts.domain = gen_domain;
      opts.steer = !gen_baseline;
      const auto outputs = cmd_generate(cfg, opts);
      if (cfg.out.empty()) {
        for (const auto& o : outputs) std::cout << o.generation.text << '\n';
      } else {
        std::cout << "wrote " << outputs.size() << " generations to " << cfg.out.string() << '\n';
      }
    } else if (*eval) {
      command = "eval";
      auto cfg = eval_flags.resolve();
      set_path(eval_items, cfg.items);
      set_path(eval_pattern, cfg.pattern);
      add_memories(eval_memories, cfg);
      const auto doc = cmd_eval(cfg, eval_opts);
      std::cout << doc["summary"].dump(2) << '\n';
    } else if (*analyze) {
      command = "analyze";
      auto cfg = analyze_flags.resolve();
      set_path(analyze_records, cfg.records);
      for (const auto& p : analyze_evals) analyze_opts.eval_records.push_back(std::filesystem::absolute(p));
      const auto doc = cmd_analyze(cfg, analyze_opts);
      std::cout << doc["separation"].dump(2) << '\n';
    } else if (*sweep) {
      command = "sweep";
      auto cfg = sweep_flags.resolve();
      set_path(sweep_items, cfg.items);
      set_path(sweep_pattern, cfg.pattern);
      add_memories(sweep_memories, cfg);
      const auto doc = cmd_sweep(cfg, sweep_opts);
      std::cout << doc["points"].dump(2) << '\n';
    } else if (*plot) {
      command = "plot";
      cmd_plot(std::filesystem::absolute(plot_input), std::filesystem::absolute(plot_out), plot_title);
    }
  } catch (const MissingInput& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace longsteer::cli
