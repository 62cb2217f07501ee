#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "longsteer/eval.hpp"
#include "longsteer/repr.hpp"

namespace longsteer {

// Renyi entropy of order alpha of the normalized spectrum of K = Z Z^T.
// alpha == 1 is the Shannon limit. Rows of Z are samples.
double matrix_entropy(const Eigen::MatrixXd& z, double alpha = 1.0);

// Rows of the matrix are the record vectors, in order.
Eigen::MatrixXd stack_vectors(std::span<const RepresentationRecord> records);

struct EntropyReport {
  int layer = 0;
  CotKind cot_kind = CotKind::kNone;
  std::string domain;  // empty when groups span domains
  std::size_t n = 0;
  double entropy = 0.0;

  std::string group() const;
  nlohmann::json to_json() const;
};

// One report per (layer, cot_kind[, domain]) group, sorted by layer then
// kind then domain. Groups with fewer than two records are skipped.
std::vector<EntropyReport> entropy_by_layer(std::span<const RepresentationRecord> records,
                                            bool split_by_domain = false, double alpha = 1.0);

enum class ProjectionMethod : std::uint8_t { kLinearPca, kExternalTsne };

std::string_view to_string(ProjectionMethod m);
ProjectionMethod parse_projection_method(std::string_view s);

struct PointLabel {
  CotKind cot_kind = CotKind::kNone;
  std::string domain;
  std::string example_id;
};

struct ProjectionResult {
  ProjectionMethod method = ProjectionMethod::kLinearPca;
  Eigen::MatrixX2d points;
  std::vector<PointLabel> labels;
  nlohmann::json params = nlohmann::json::object();
};

// Maps an n x d matrix to n x 2 and may record its settings in `params`.
using Reducer = std::function<Eigen::MatrixX2d(const Eigen::MatrixXd& x, nlohmann::json& params)>;

// Top-2 principal component scores of the mean-centered rows. Each
// component's loading vector is signed so its largest-magnitude entry is
// positive. Missing components (rank < 2) are zero columns, with a warning.
Eigen::MatrixX2d pca_2d(const Eigen::MatrixXd& x);

ProjectionResult project_2d(std::span<const RepresentationRecord> records, ProjectionMethod method,
                            const Reducer& reducer = {});

// Runs `command input.csv output.csv` with the extra arguments, where the
// input is one row per sample and the output is one "x,y" row per sample.
Reducer external_command_reducer(std::string command, double perplexity, unsigned seed);

struct SeparationStats {
  double centroid_distance = 0.0;
  // Mean Euclidean distance over all unordered pairs inside the same group,
  // pooled across both groups.
  double mean_within_distance = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;

  bool separated() const { return centroid_distance > mean_within_distance; }
  nlohmann::json to_json() const;
};

SeparationStats group_separation(const ProjectionResult& projection, CotKind a, CotKind b);

struct LengthStats {
  std::string group;
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  int min = 0;
  int max = 0;

  nlohmann::json to_json() const;
};

LengthStats length_stats(std::string group, std::span<const int> lengths);
// Grouped by method, in first-appearance order.
std::vector<LengthStats> output_length_stats(std::span<const EvalRecord> records);

// Columns x, y, cot_kind, domain, example_id.
void write_projection_csv(const std::filesystem::path& path, const ProjectionResult& projection);

}  // namespace longsteer
