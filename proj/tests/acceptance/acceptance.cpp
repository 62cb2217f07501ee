// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/QR>

#include "commands.hpp"
#include "longsteer/analysis.hpp"
#include "longsteer/backend.hpp"
#include "longsteer/error.hpp"
#include "longsteer/log.hpp"
#include "longsteer/memory.hpp"
#include "longsteer/pipeline.hpp"
#include "longsteer/repr.hpp"
#include "longsteer/vector_io.hpp"
#include "oracles.hpp"

namespace ls = longsteer;
namespace fs = std::filesystem;

namespace {

const fs::path kModelDir = LONGSTEER_MODEL_DIR;
const fs::path kDataDir = LONGSTEER_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Collects failures inside one criterion without stopping at the first.
struct Checks {
  int failed = 0;
  std::ostringstream first;
  void expect(bool ok, const std::string& what) {
    if (!ok && failed++ == 0) first << what;
  }
  Outcome outcome(const std::string& summary) const {
    return {failed == 0, failed == 0 ? summary : summary + "; " + std::to_string(failed) +
                                                       " check(s) failed, first: " + first.str()};
  }
};

bool same_bits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

long double norm_ld(std::span<const float> v) {
  long double s = 0.0L;
  for (float x : v) s += static_cast<long double>(x) * x;
  return std::sqrt(s);
}

// ---- 1. injection math ----

Outcome injection_math() {
  Checks c;
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> lambda_dist(0.0, 2.0), log_scale(-2.0, 2.0);
  const std::size_t dims[] = {8, 64, 4096};
  double worst = 0.0;
  int exact_cases = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = dims[t % 3];
    const auto h0 = oracle::random_vector(rng, d, std::pow(10.0, log_scale(rng)));
    const auto v = oracle::random_vector(rng, d, std::pow(10.0, log_scale(rng)));
    const double lambda = lambda_dist(rng);

    auto h = h0;
    if (ls::apply_norm_preserving_edit(h, v, lambda)) {
      const long double before = norm_ld(h0), after = norm_ld(h);
      const double rel = static_cast<double>(std::fabs(after - before) / before);
      worst = std::max(worst, rel);
      c.expect(rel <= 1e-5, "norm drift " + std::to_string(rel) + " at trial " + std::to_string(t));
      // Direction follows h + lambda v.
      long double dot = 0.0L, nd = 0.0L;
      for (std::size_t i = 0; i < d; ++i) {
        const long double target = static_cast<long double>(h0[i]) + lambda * v[i];
        dot += target * h[i];
        nd += target * target;
      }
      c.expect(std::fabs(1.0L - dot / (std::sqrt(nd) * after)) < 1e-5L,
               "direction off at trial " + std::to_string(t));
    }

    auto zero = h0;
    ls::apply_norm_preserving_edit(zero, v, 0.0);
    c.expect(same_bits(zero, h0), "lambda=0 changed h at trial " + std::to_string(t));

    const float scale = std::ldexp(1.0f, static_cast<int>(rng() % 9) - 4);
    std::vector<float> collinear(h0.size());
    for (std::size_t i = 0; i < d; ++i) collinear[i] = scale * h0[i];
    auto col = h0;
    ls::apply_norm_preserving_edit(col, collinear, lambda);
    c.expect(same_bits(col, h0), "collinear v changed h at trial " + std::to_string(t));
    exact_cases += 2;
  }
  std::ostringstream s;
  s << "1000 triples over dims {8,64,4096}, worst relative norm drift " << std::scientific
    << std::setprecision(2) << worst << " (tol 1e-5), " << exact_cases << " exact-identity cases";
  return c.outcome(s.str());
}

// ---- 2. contrastive pattern ----

Outcome contrastive_oracle() {
  Checks c;
  std::mt19937_64 rng(2002);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 10, d = 1 + rng() % 8;
    std::vector<ls::RepresentationRecord> recs;
    std::vector<std::vector<float>> longs, vans;
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = "x" + std::to_string(i);
      longs.push_back(oracle::random_vector(rng, d, 4.0));
      vans.push_back(oracle::random_vector(rng, d, 4.0));
      recs.push_back({id, "math", 7, ls::CotKind::kLong, longs.back()});
      recs.push_back({id, "math", 7, ls::CotKind::kVanilla, vans.back()});
    }
    const auto p = ls::contrastive_pattern(ls::pair_by_example(recs));
    c.expect(same_bits(p.vector, oracle::mean_of_differences(longs, vans)),
             "mismatch on pair-set " + std::to_string(t));
    c.expect(p.source_count == static_cast<int>(n) && p.layer == 7, "metadata on pair-set " + std::to_string(t));
  }
  return c.outcome("50 pair-sets (<=10 pairs, dim<=8) equal the mean-of-differences oracle bit for bit");
}

// ---- 3. retrieval ----

Outcome retrieval_oracle() {
  Checks c;
  std::mt19937_64 rng(3003);
  for (int m = 0; m < 20; ++m) {
    ls::DomainMemory mem("acceptance", 2, 16);
    std::vector<std::vector<float>> keys, values;
    for (int i = 0; i < 100; ++i) {
      keys.push_back(oracle::random_vector(rng, 16));
      values.push_back(oracle::random_vector(rng, 16));
      mem.add({keys.back(), values.back(), std::to_string(i), "math"});
    }
    const auto q = oracle::random_vector(rng, 16);
    for (int k : {1, 8, 100, 101}) {
      ls::WarningCapture warnings;
      const auto got = ls::top_k(mem, q, k);
      const auto want = oracle::exhaustive_top_k(keys, q, static_cast<std::size_t>(k));
      bool same = got.size() == want.size();
      for (std::size_t i = 0; same && i < got.size(); ++i) {
        same = got[i].index == want[i].index && got[i].similarity == want[i].similarity;
      }
      const auto tag = "memory " + std::to_string(m) + " k=" + std::to_string(k);
      c.expect(same, "top-k differs, " + tag);
      c.expect(same_bits(ls::retrieve_domain_vector(mem, q, k).vector, oracle::mean_of_rows(values, want)),
               "averaged value differs, " + tag);
      c.expect(warnings.contains("exceeds memory size") == (k > 100), "clamp warning, " + tag);
    }
  }

  // Duplicate keys: equal similarity must rank by insertion order, every time.
  ls::DomainMemory dup("acceptance", 0, 4);
  std::vector<std::vector<float>> keys;
  const std::vector<float> a{1.f, 2.f, 3.f, 4.f}, b{-4.f, 3.f, -2.f, 1.f};
  for (int i = 0; i < 12; ++i) {
    keys.push_back(i % 3 == 0 ? b : a);
    dup.add({keys.back(), std::vector<float>(4, static_cast<float>(i)), std::to_string(i), ""});
  }
  const auto first = ls::top_k(dup, a, 8);
  const auto want = oracle::exhaustive_top_k(keys, a, 8);
  for (int rep = 0; rep < 5; ++rep) {
    const auto again = ls::top_k(dup, a, 8);
    for (std::size_t i = 0; i < 8; ++i) c.expect(again[i].index == first[i].index, "tie order varies");
  }
  for (std::size_t i = 0; i < 8; ++i) {
    c.expect(first[i].index == want[i].index, "tie order differs from stable scan");
    c.expect(i == 0 || first[i - 1].index < first[i].index, "ties not in insertion order");
  }
  return c.outcome("20 memories x k in {1,8,100,101->100} match the exhaustive scan; duplicate keys rank by insertion order");
}

// ---- 4. entropy ----

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> d;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = d(rng);
  return m;
}

Outcome entropy_suite() {
  Checks c;
  std::mt19937_64 rng(4004);
  double worst_rank1 = 0.0, worst_id = 0.0, worst_inv = 0.0, worst_oracle = 0.0;
  for (int n : {2, 10, 50, 200}) {
    const Eigen::MatrixXd z = random_matrix(rng, n, 1) * random_matrix(rng, 1, 32);
    worst_rank1 = std::max(worst_rank1, std::fabs(ls::matrix_entropy(z)));
    const double id = std::fabs(ls::matrix_entropy(Eigen::MatrixXd::Identity(n, n)) - std::log(n));
    worst_id = std::max(worst_id, id);
  }
  c.expect(worst_rank1 <= 1e-10, "rank-1 entropy " + std::to_string(worst_rank1));
  c.expect(worst_id <= 1e-8, "identity entropy off by " + std::to_string(worst_id));

  for (int t = 0; t < 20; ++t) {
    const int n = 3 + static_cast<int>(rng() % 30), d = 2 + static_cast<int>(rng() % 40);
    const Eigen::MatrixXd z = random_matrix(rng, n, d);
    const double h = ls::matrix_entropy(z);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, d, d));
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + n, rng);
    for (double other : {ls::matrix_entropy(z * q), ls::matrix_entropy(perm * z), ls::matrix_entropy(0.01 * z),
                         ls::matrix_entropy(250.0 * z)}) {
      worst_inv = std::max(worst_inv, std::fabs(other - h));
    }
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = z(i, j);
    worst_oracle = std::max(worst_oracle, std::fabs(h - oracle::gram_entropy(rows)));
  }
  c.expect(worst_inv <= 1e-6, "invariance drift " + std::to_string(worst_inv));
  c.expect(worst_oracle <= 1e-8, "Jacobi disagreement " + std::to_string(worst_oracle));
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << "rank-1 " << worst_rank1 << " (1e-10), identity "
    << worst_id << " (1e-8), invariance " << worst_inv << " (1e-6), Jacobi oracle " << worst_oracle
    << " (1e-8)";
  return c.outcome(s.str());
}

// ---- 5. serialization ----

template <typename F>
bool rejects(F&& f, ls::Errc code) {
  try {
    f();
  } catch (const ls::Error& e) {
    return e.code() == code;
  }
  return false;
}

Outcome serialization(const fs::path& work) {
  Checks c;
  std::mt19937_64 rng(5005);
  for (int t = 0; t < 20; ++t) {
    ls::SteeringVector v{t % 2 ? ls::VectorKind::kDomain : ls::VectorKind::kPattern, t,
                         oracle::random_vector(rng, 1 + rng() % 512), 1 + t};
    const auto bytes = ls::encode_steering_vector(v);
    const auto back = ls::decode_steering_vector(bytes);
    c.expect(same_bits(back.vector, v.vector) && back.kind == v.kind && back.layer == v.layer &&
                 back.source_count == v.source_count,
             "GLRV vector round trip");
    c.expect(ls::encode_steering_vector(back) == bytes, "GLRV re-encode differs");

    std::vector<ls::RepresentationRecord> recs;
    for (int i = 0; i < 5; ++i) {
      recs.push_back({"e" + std::to_string(i), i % 2 ? "math" : "", t, static_cast<ls::CotKind>(i % 3),
                      oracle::random_vector(rng, 32)});
    }
    const auto rbytes = ls::encode_records(recs);
    c.expect(ls::encode_records(ls::decode_records(rbytes)) == rbytes, "GLRV record set round trip");

    ls::DomainMemory mem("model-" + std::to_string(t), t, 16);
    for (int i = 0; i < 30; ++i) {
      mem.add({oracle::random_vector(rng, 16), oracle::random_vector(rng, 16), std::to_string(i), "math"});
    }
    const auto mbytes = ls::encode_memory(mem);
    const auto side = ls::encode_memory_sidecar(mem);
    const auto mback = ls::decode_memory(mbytes, side);
    c.expect(mback == mem, "GLRM round trip");
    c.expect(ls::encode_memory(mback) == mbytes, "GLRM re-encode differs");
  }

  ls::SteeringVector v{ls::VectorKind::kPattern, 3, oracle::random_vector(rng, 64), 100};
  ls::save_steering_vector(work / "s.glrv", v, "acceptance");
  c.expect(same_bits(ls::load_steering_vector(work / "s.glrv").vector, v.vector), "GLRV file round trip");
  ls::DomainMemory mem("acceptance", 3, 8);
  mem.add({oracle::random_vector(rng, 8), oracle::random_vector(rng, 8), "a", "math"});
  ls::save_memory(work / "s.glrm", mem);
  c.expect(ls::load_memory(work / "s.glrm") == mem, "GLRM file round trip");

  const auto good_v = ls::encode_steering_vector(v);
  const auto good_m = ls::encode_memory(mem);
  const auto side = ls::encode_memory_sidecar(mem);
  int rejected = 0;
  const auto corrupt = [&](std::string bytes, std::size_t at, char value) {
    bytes[at] = value;
    return bytes;
  };
  for (const auto& bad : {corrupt(good_v, 0, 'X'), corrupt(good_v, 4, 9), corrupt(good_v, 8, 5),
                          good_v.substr(0, 10), good_v.substr(0, good_v.size() - 1)}) {
    const bool ok = rejects([&] { ls::decode_steering_vector(bad); }, ls::Errc::kCorruptVector);
    c.expect(ok, "corrupt GLRV accepted");
    rejected += ok;
  }
  for (const auto& bad : {corrupt(good_m, 3, 'V'), corrupt(good_m, 5, 1), good_m.substr(0, 9),
                          good_m.substr(0, good_m.size() - 2), good_v}) {
    const bool ok = rejects([&] { ls::decode_memory(bad, side); }, ls::Errc::kCorruptMemory);
    c.expect(ok, "corrupt GLRM accepted");
    rejected += ok;
  }
  return c.outcome("GLRV vectors, record sets and GLRM memories round-trip bit-exact; " +
                   std::to_string(rejected) + "/10 corrupted containers rejected");
}

// ---- 6-8. small model ----

struct ModelArtifacts {
  bool ready = false;
  std::string error;
  ls::RunConfig cfg;  // model, layer, pattern and memory filled in
  fs::path records;
};

std::string math_prompt(const ls::BenchmarkItem& item) { return ls::render_prompt(item); }

ModelArtifacts build_artifacts(const fs::path& work) {
  ModelArtifacts a;
  try {
    if (!fs::exists(kModelDir / "model.safetensors")) {
      a.error = "no checkpoint at " + kModelDir.string();
      return a;
    }
    ls::RunConfig cfg;
    cfg.backend = "transformer";
    cfg.model_id = kModelDir.string();
    cfg.examples = kDataDir / "math_cot.jsonl";
    cfg.out = work / "math.glrv";
    ls::cli::cmd_extract(cfg);

    cfg.records = work / "math.glrv";
    cfg.out = work / "pattern.glrv";
    ls::cli::cmd_pattern(cfg, {100});

    cfg.out = work / "math.glrm";
    ls::cli::cmd_memory_build(cfg);

    cfg.pattern = work / "pattern.glrv";
    cfg.memories = {{"math", work / "math.glrm"}};
    a.records = work / "math.glrv";
    a.cfg = cfg;
    a.ready = true;
  } catch (const std::exception& e) {
    a.error = e.what();
  }
  return a;
}

Outcome zero_strength(const ModelArtifacts& art, const fs::path& work) {
  if (!art.ready) return {false, art.error};
  auto cfg = art.cfg;
  cfg.lambda_p = 0.0;
  cfg.lambda_d = 0.0;
  cfg.max_new_tokens = 256;
  cfg.out = work / "zero_strength.jsonl";
  const auto items = ls::load_items(kDataDir / "math_eval.jsonl");
  ls::cli::GenerateOptions opts;
  for (std::size_t i = 0; i < 10 && i < items.size(); ++i) opts.prompts.push_back(math_prompt(items[i]));
  opts.domain = "math";
  opts.steer = true;
  const auto steered = ls::cli::cmd_generate(cfg, opts);
  opts.steer = false;
  cfg.out = work / "baseline.jsonl";
  const auto base = ls::cli::cmd_generate(cfg, opts);
  int identical = 0, tokens = 0;
  for (std::size_t i = 0; i < steered.size(); ++i) {
    if (steered[i].generation.token_ids == base[i].generation.token_ids) ++identical;
    tokens += base[i].generation.num_tokens;
  }
  const bool pass = opts.prompts.size() == 10 && identical == 10;
  return {pass, std::to_string(identical) + "/" + std::to_string(opts.prompts.size()) +
                    " prompts token-identical with pattern and memory at strength 0 (" +
                    std::to_string(tokens) + " baseline tokens)"};
}

Outcome steering_direction(const ModelArtifacts& art, const fs::path& work) {
  if (!art.ready) return {false, art.error};
  auto cfg = art.cfg;
  cfg.lambda_p = 0.1;
  cfg.memories.clear();  // the pattern vector alone
  cfg.max_new_tokens = 512;
  cfg.items = kDataDir / "math_eval.jsonl";
  cfg.out = work / "direction";
  const auto doc = ls::cli::cmd_eval(cfg);
  const auto& zs = doc.at("summary").at(0);
  const auto& st = doc.at("summary").at(1);
  const std::size_t n = zs.at("n").get<std::size_t>();
  const double base_len = zs.at("mean_output_tokens").get<double>();
  const double steer_len = st.at("mean_output_tokens").get<double>();
  const double base_acc = zs.at("accuracy").get<double>();
  const double steer_acc = st.at("accuracy").get<double>();
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << n << " math prompts, layer " << doc.at("layer")
    << ": mean output tokens steered " << steer_len << " vs zero-shot " << base_len
    << "; accuracy " << steer_acc << " vs " << base_acc << " (recorded, not gated)";
  return {n >= 20 && steer_len > base_len, s.str()};
}

Outcome pca_separation(const ModelArtifacts& art, const fs::path& work) {
  if (!art.ready) return {false, art.error};
  auto cfg = art.cfg;
  cfg.out = work / "analysis";
  const auto doc = ls::cli::cmd_analyze(cfg);
  const auto& sep = doc.at("separation");
  const double between = sep.at("centroid_distance").get<double>();
  const double within = sep.at("mean_within_distance").get<double>();
  const bool finite = std::isfinite(between) && std::isfinite(within);
  const bool counts = sep.at("n_a") == 100 && sep.at("n_b") == 100;
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << "layer " << sep.at("layer") << ", " << sep.at("n_a")
    << " long + " << sep.at("n_b") << " vanilla: centroid distance " << between
    << ", mean within-group distance " << within << " -> "
    << (between > within ? "separated (pass)" : "not separated (observe)");
  return {finite && counts, s.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run"};
  fs::path work = fs::temp_directory_path() / "longsteer-acceptance";
  app.add_option("--work-dir", work, "scratch directory for artifacts");
  CLI11_PARSE(app, argc, argv);
  fs::remove_all(work);
  fs::create_directories(work);
  ls::set_warning_sink([](const std::string&) {});

  struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
  };
  ModelArtifacts art;
  double artifact_s = 0.0;
  const auto with_model = [&](std::function<Outcome()> f) {
    return [&, f]() {
      if (!art.ready && art.error.empty()) {
        const auto t0 = std::chrono::steady_clock::now();
        art = build_artifacts(work);
        artifact_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "  (extraction, pattern and memory build: " << std::fixed << std::setprecision(1)
                  << artifact_s << " s)" << std::endl;
      }
      return f();
    };
  };
  const std::vector<Criterion> criteria{
      {1, "injection math", 5.0, injection_math},
      {2, "contrastive pattern", 1.0, contrastive_oracle},
      {3, "retrieval", 5.0, retrieval_oracle},
      {4, "entropy", 10.0, entropy_suite},
      {5, "serialization", 1.0, [&] { return serialization(work); }},
      {6, "zero-strength transparency", 600.0, with_model([&] { return zero_strength(art, work); })},
      {7, "steering direction", 7200.0, with_model([&] { return steering_direction(art, work); })},
      {8, "PCA separation", 600.0, with_model([&] { return pca_separation(art, work); })},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
              << " [" << std::fixed << std::setprecision(3) << secs << " s, limit " << std::setprecision(0)
              << c.limit_s << " s" << (in_time ? "" : ", over limit") << "]" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
