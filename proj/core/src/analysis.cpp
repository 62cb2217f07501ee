#include "longsteer/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <unistd.h>

#include "longsteer/error.hpp"
#include "longsteer/log.hpp"

namespace longsteer {

double matrix_entropy(const Eigen::MatrixXd& z, double alpha) {
  if (z.rows() < 1 || z.cols() < 1) throw Error(Errc::kEmptyInput, "entropy of an empty matrix");
  if (!z.allFinite()) throw Error(Errc::kInvalidVector, "entropy input has non-finite entries");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(Errc::kInvalidInput, "alpha must be positive and finite");
  }
  // Z Z^T and Z^T Z share their nonzero spectrum; take the smaller one.
  const Eigen::MatrixXd k = z.rows() <= z.cols() ? Eigen::MatrixXd(z * z.transpose())
                                                 : Eigen::MatrixXd(z.transpose() * z);
  const double trace = k.trace();
  if (!(trace > 0.0)) throw Error(Errc::kDegenerateInput, "entropy of an all-zero matrix");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error(Errc::kDegenerateInput, "eigensolver failed");
  Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd p = lambda / trace;

  if (std::abs(alpha - 1.0) < 1e-12) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
    }
    return std::max(h, 0.0);
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += std::pow(p[i], alpha);
  }
  return std::log(s) / (1.0 - alpha);
}

Eigen::MatrixXd stack_vectors(std::span<const RepresentationRecord> records) {
  if (records.empty()) return {};
  const auto d = records.front().vector.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].vector.size() != d) {
      throw Error(Errc::kDimensionError, "record " + records[i].example_id + " has length " +
                                             std::to_string(records[i].vector.size()) +
                                             ", expected " + std::to_string(d));
    }
    for (std::size_t j = 0; j < d; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records[i].vector[j];
    }
  }
  return m;
}

std::string EntropyReport::group() const {
  std::string g(to_string(cot_kind));
  if (!domain.empty()) g += "/" + domain;
  return g;
}

nlohmann::json EntropyReport::to_json() const {
  return {{"layer", layer},
          {"group", group()},
          {"cot_kind", std::string(to_string(cot_kind))},
          {"domain", domain},
          {"n", n},
          {"entropy", entropy}};
}

std::vector<EntropyReport> entropy_by_layer(std::span<const RepresentationRecord> records,
                                            bool split_by_domain, double alpha) {
  using Key = std::tuple<int, CotKind, std::string>;
  std::map<Key, std::vector<RepresentationRecord>> groups;
  for (const auto& r : records) {
    groups[{r.layer, r.cot_kind, split_by_domain ? r.domain : std::string()}].push_back(r);
  }
  std::vector<EntropyReport> out;
  for (const auto& [key, members] : groups) {
    EntropyReport rep;
    std::tie(rep.layer, rep.cot_kind, rep.domain) = key;
    rep.n = members.size();
    if (rep.n < 2) {
      warn("skipping entropy group " + rep.group() + " at layer " + std::to_string(rep.layer) +
           ": needs at least 2 records");
      continue;
    }
    rep.entropy = matrix_entropy(stack_vectors(members), alpha);
    out.push_back(std::move(rep));
  }
  return out;
}

std::string_view to_string(ProjectionMethod m) {
  return m == ProjectionMethod::kExternalTsne ? "tsne" : "pca";
}

ProjectionMethod parse_projection_method(std::string_view s) {
  if (s == "pca" || s == "linear_pca") return ProjectionMethod::kLinearPca;
  if (s == "tsne" || s == "external_tsne") return ProjectionMethod::kExternalTsne;
  throw Error(Errc::kInvalidInput, "unknown projection method '" + std::string(s) + "'");
}

Eigen::MatrixX2d pca_2d(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixX2d out = Eigen::MatrixX2d::Zero(x.rows(), 2);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double tol = s.size() > 0 ? std::max(s[0], 1.0) * 1e-10 : 0.0;
  int usable = 0;
  for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, s.size()); ++c) {
    if (s[c] > tol) ++usable;
  }
  for (int c = 0; c < usable; ++c) {
    Eigen::VectorXd axis = svd.matrixV().col(c);
    Eigen::Index at = 0;
    axis.cwiseAbs().maxCoeff(&at);
    if (axis[at] < 0) axis = -axis;
    out.col(c) = centered * axis;
  }
  if (usable < 2) {
    warn("PCA input has rank " + std::to_string(usable) + "; padding missing component with zeros");
  }
  return out;
}

ProjectionResult project_2d(std::span<const RepresentationRecord> records, ProjectionMethod method,
                            const Reducer& reducer) {
  if (records.size() < 3) throw Error(Errc::kInvalidInput, "projection needs at least 3 records");
  const auto x = stack_vectors(records);
  if (!x.allFinite()) throw Error(Errc::kInvalidVector, "projection input has non-finite entries");

  ProjectionResult out;
  out.method = method;
  if (method == ProjectionMethod::kLinearPca) {
    out.points = pca_2d(x);
  } else {
    if (!reducer) throw Error(Errc::kConfigError, "t-SNE projection needs an external reducer");
    out.points = reducer(x, out.params);
    if (out.points.rows() != x.rows()) {
      throw Error(Errc::kBackendError, "reducer returned " + std::to_string(out.points.rows()) +
                                           " points for " + std::to_string(x.rows()) + " inputs");
    }
  }
  if (!out.points.allFinite()) throw Error(Errc::kInvalidVector, "projection produced non-finite points");
  out.labels.reserve(records.size());
  for (const auto& r : records) out.labels.push_back({r.cot_kind, r.domain, r.example_id});
  return out;
}

Reducer external_command_reducer(std::string command, double perplexity, unsigned seed) {
  return [command = std::move(command), perplexity, seed](const Eigen::MatrixXd& x,
                                                           nlohmann::json& params) {
    namespace fs = std::filesystem;
    static std::atomic<int> counter{0};
    const auto dir = fs::temp_directory_path() / ("longsteer-reduce-" + std::to_string(::getpid()) +
                                                  "-" + std::to_string(counter++));
    fs::create_directories(dir);
    const auto in = dir / "input.csv";
    const auto out = dir / "output.csv";
    {
      std::ofstream f(in);
      f.precision(17);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) f << (j ? "," : "") << x(i, j);
        f << '\n';
      }
    }
    std::ostringstream cmd;
    cmd << command << " '" << in.string() << "' '" << out.string() << "' --perplexity "
        << perplexity << " --seed " << seed;
    const int rc = std::system(cmd.str().c_str());
    if (rc != 0) {
      fs::remove_all(dir);
      throw Error(Errc::kBackendError, "reducer command failed (" + std::to_string(rc) + "): " + cmd.str());
    }
    std::ifstream f(out);
    std::vector<std::pair<double, double>> pts;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw Error(Errc::kParseError, "reducer output row: " + line);
      pts.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    }
    fs::remove_all(dir);
    Eigen::MatrixX2d m(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      m(static_cast<Eigen::Index>(i), 0) = pts[i].first;
      m(static_cast<Eigen::Index>(i), 1) = pts[i].second;
    }
    params = {{"command", command}, {"perplexity", perplexity}, {"seed", seed}};
    return m;
  };
}

nlohmann::json SeparationStats::to_json() const {
  return {{"centroid_distance", centroid_distance},
          {"mean_within_distance", mean_within_distance},
          {"n_a", n_a},
          {"n_b", n_b},
          {"separated", separated()}};
}

SeparationStats group_separation(const ProjectionResult& projection, CotKind a, CotKind b) {
  std::vector<Eigen::Index> ia, ib;
  for (std::size_t i = 0; i < projection.labels.size(); ++i) {
    if (projection.labels[i].cot_kind == a) ia.push_back(static_cast<Eigen::Index>(i));
    else if (projection.labels[i].cot_kind == b) ib.push_back(static_cast<Eigen::Index>(i));
  }
  if (ia.size() < 2 || ib.size() < 2) {
    throw Error(Errc::kEmptyInput, "separation needs at least two points in each group");
  }
  const auto& p = projection.points;
  const auto centroid = [&](const std::vector<Eigen::Index>& idx) {
    Eigen::RowVector2d c = Eigen::RowVector2d::Zero();
    for (auto i : idx) c += p.row(i);
    return Eigen::RowVector2d(c / static_cast<double>(idx.size()));
  };
  double sum = 0.0;
  std::size_t pairs = 0;
  for (const auto* idx : {&ia, &ib}) {
    for (std::size_t i = 0; i < idx->size(); ++i) {
      for (std::size_t j = i + 1; j < idx->size(); ++j) {
        sum += (p.row((*idx)[i]) - p.row((*idx)[j])).norm();
        ++pairs;
      }
    }
  }
  SeparationStats s;
  s.n_a = ia.size();
  s.n_b = ib.size();
  s.centroid_distance = (centroid(ia) - centroid(ib)).norm();
  s.mean_within_distance = sum / static_cast<double>(pairs);
  return s;
}

nlohmann::json LengthStats::to_json() const {
  return {{"group", group}, {"n", n}, {"mean", mean}, {"median", median}, {"min", min}, {"max", max}};
}

LengthStats length_stats(std::string group, std::span<const int> lengths) {
  if (lengths.empty()) throw Error(Errc::kEmptyInput, "length statistics of an empty group");
  std::vector<int> v(lengths.begin(), lengths.end());
  std::sort(v.begin(), v.end());
  LengthStats s;
  s.group = std::move(group);
  s.n = v.size();
  double total = 0.0;
  for (int x : v) total += x;
  s.mean = total / static_cast<double>(v.size());
  const auto mid = v.size() / 2;
  s.median = v.size() % 2 ? v[mid] : 0.5 * (static_cast<double>(v[mid - 1]) + v[mid]);
  s.min = v.front();
  s.max = v.back();
  return s;
}

std::vector<LengthStats> output_length_stats(std::span<const EvalRecord> records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<int>> groups;
  for (const auto& r : records) {
    auto [it, inserted] = groups.try_emplace(r.method);
    if (inserted) order.push_back(r.method);
    it->second.push_back(r.output_tokens);
  }
  std::vector<LengthStats> out;
  for (const auto& m : order) out.push_back(length_stats(m, groups[m]));
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_projection_csv(const std::filesystem::path& path, const ProjectionResult& projection) {
  std::ofstream f(path);
  if (!f) throw Error(Errc::kIoError, "cannot write " + path.string());
  f.precision(10);
  f << "x,y,cot_kind,domain,example_id\n";
  for (std::size_t i = 0; i < projection.labels.size(); ++i) {
    const auto& l = projection.labels[i];
    f << projection.points(static_cast<Eigen::Index>(i), 0) << ','
      << projection.points(static_cast<Eigen::Index>(i), 1) << ',' << to_string(l.cot_kind) << ','
      << csv_field(l.domain) << ',' << csv_field(l.example_id) << '\n';
  }
}

}  // namespace longsteer
