#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/QR>

#include "longsteer/analysis.hpp"
#include "longsteer/error.hpp"
#include "longsteer/log.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace ls = longsteer;
using test_util::error_code;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> d;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = d(rng);
  return m;
}

Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, int n) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n, n));
  return qr.householderQ();
}

oracle::Matrix to_rows(const Eigen::MatrixXd& m) {
  oracle::Matrix out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

ls::RepresentationRecord rec(std::string id, ls::CotKind kind, std::vector<float> v, int layer = 1,
                             std::string domain = "math") {
  return {std::move(id), std::move(domain), layer, kind, std::move(v)};
}

}  // namespace

TEST(Entropy, RankOneIsZero) {
  std::mt19937_64 rng(1);
  for (int n : {2, 5, 20}) {
    Eigen::VectorXd u = random_matrix(rng, n, 1).col(0);
    Eigen::RowVectorXd w = random_matrix(rng, 1, 7).row(0);
    EXPECT_NEAR(ls::matrix_entropy(u * w), 0.0, 1e-10);
  }
}

TEST(Entropy, IdentityIsLogN) {
  for (int n : {1, 2, 8, 64}) {
    EXPECT_NEAR(ls::matrix_entropy(Eigen::MatrixXd::Identity(n, n)), std::log(n), 1e-8);
    EXPECT_NEAR(ls::matrix_entropy(3.5 * Eigen::MatrixXd::Identity(n, n), 2.0), std::log(n), 1e-8);
  }
}

TEST(Entropy, Invariances) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 10), d = 2 + static_cast<int>(rng() % 12);
    const Eigen::MatrixXd z = random_matrix(rng, n, d);
    const double h = ls::matrix_entropy(z);
    EXPECT_NEAR(ls::matrix_entropy(z * random_orthogonal(rng, d)), h, 1e-6);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + n, rng);
    EXPECT_NEAR(ls::matrix_entropy(perm * z), h, 1e-6);
    EXPECT_NEAR(ls::matrix_entropy(7.25 * z), h, 1e-6);
    EXPECT_NEAR(ls::matrix_entropy(z.transpose()), h, 1e-6);
  }
}

TEST(Entropy, AgreesWithJacobiOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 20), d = 1 + static_cast<int>(rng() % 30);
    const Eigen::MatrixXd z = random_matrix(rng, n, d);
    EXPECT_NEAR(ls::matrix_entropy(z), oracle::gram_entropy(to_rows(z)), 1e-8);
  }
}

TEST(Entropy, RenyiTendsToShannon) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd z = random_matrix(rng, 6, 4);
  EXPECT_NEAR(ls::matrix_entropy(z, 1.0 + 1e-7), ls::matrix_entropy(z), 1e-5);
  EXPECT_LE(ls::matrix_entropy(z, 2.0), ls::matrix_entropy(z));
}

TEST(Entropy, Errors) {
  EXPECT_EQ(error_code([] { ls::matrix_entropy(Eigen::MatrixXd(0, 3)); }), ls::Errc::kEmptyInput);
  EXPECT_EQ(error_code([] { ls::matrix_entropy(Eigen::MatrixXd::Zero(3, 3)); }), ls::Errc::kDegenerateInput);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 2);
  bad(0, 1) = NAN;
  EXPECT_EQ(error_code([&] { ls::matrix_entropy(bad); }), ls::Errc::kInvalidVector);
  EXPECT_EQ(error_code([] { ls::matrix_entropy(Eigen::MatrixXd::Ones(2, 2), 0.0); }), ls::Errc::kInvalidInput);
}

TEST(EntropyByLayer, GroupsAndSkipsSingletons) {
  std::vector<ls::RepresentationRecord> recs;
  for (int layer : {2, 0}) {
    for (int i = 0; i < 3; ++i) {
      const auto id = std::to_string(i);
      recs.push_back(rec(id, ls::CotKind::kLong, {1.f * i, 1.f}, layer, i ? "math" : "bio"));
      recs.push_back(rec(id, ls::CotKind::kVanilla, {1.f, 2.f * i}, layer, i ? "math" : "bio"));
    }
  }
  const auto all = ls::entropy_by_layer(recs);
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0].layer, 0);
  EXPECT_EQ(all[0].cot_kind, ls::CotKind::kVanilla);
  EXPECT_EQ(all[1].cot_kind, ls::CotKind::kLong);
  EXPECT_EQ(all[3].layer, 2);
  EXPECT_EQ(all[0].n, 3u);

  ls::WarningCapture warnings;
  const auto split = ls::entropy_by_layer(recs, true);
  ASSERT_EQ(split.size(), 4u);  // the single "bio" records are skipped
  EXPECT_EQ(split[0].domain, "math");
  EXPECT_EQ(split[0].group(), "vanilla/math");
  EXPECT_TRUE(warnings.contains("needs at least 2"));
}

TEST(Pca, ScoresMatchCovarianceSpectrum) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 10 + static_cast<int>(rng() % 20), d = 3 + static_cast<int>(rng() % 6);
    const Eigen::MatrixXd x = random_matrix(rng, n, d);
    const Eigen::MatrixX2d s = ls::pca_2d(x);
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    auto eig = oracle::jacobi_eigenvalues(to_rows(c.transpose() * c));
    std::sort(eig.rbegin(), eig.rend());
    EXPECT_NEAR(s.col(0).squaredNorm(), eig[0], 1e-8 * eig[0]);
    EXPECT_NEAR(s.col(1).squaredNorm(), eig[1], 1e-8 * eig[0]);
    EXPECT_NEAR(s.col(0).dot(s.col(1)), 0.0, 1e-8 * eig[0]);
    EXPECT_NEAR(s.col(0).sum(), 0.0, 1e-9 * n);
  }
}

TEST(Pca, IsometricOnPlanarData) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd plane = random_matrix(rng, 12, 2);
  const Eigen::MatrixXd embed = random_orthogonal(rng, 5).leftCols(2).transpose();
  const Eigen::MatrixXd x = plane * embed;
  const Eigen::MatrixX2d s = ls::pca_2d(x);
  for (int i = 0; i < 12; ++i) {
    for (int j = i + 1; j < 12; ++j) {
      EXPECT_NEAR((s.row(i) - s.row(j)).norm(), (x.row(i) - x.row(j)).norm(), 1e-9);
    }
  }
}

TEST(Pca, SignConventionIsDeterministic) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd x = random_matrix(rng, 9, 4);
  const Eigen::MatrixX2d a = ls::pca_2d(x);
  const Eigen::MatrixX2d b = ls::pca_2d(-x);
  // Negating the data flips the scores' sign only through the centered data,
  // since the loading convention pins each axis.
  EXPECT_TRUE(a.isApprox(-b, 1e-9));
  EXPECT_TRUE(ls::pca_2d(x).isApprox(a, 0.0));
}

TEST(Pca, CollinearPadsWithZeros) {
  Eigen::MatrixXd x(4, 3);
  for (int i = 0; i < 4; ++i) x.row(i) << i, 2.0 * i, -1.0 * i;
  ls::WarningCapture warnings;
  const Eigen::MatrixX2d s = ls::pca_2d(x);
  EXPECT_TRUE(warnings.contains("rank 1"));
  EXPECT_EQ(s.col(1).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(std::abs(s(3, 0) - s(0, 0)), std::sqrt(6.0) * 3.0, 1e-9);
}

TEST(Projection, LabelsAndReducer) {
  std::vector<ls::RepresentationRecord> recs{rec("a", ls::CotKind::kLong, {1.f, 0.f, 0.f}),
                                             rec("b", ls::CotKind::kVanilla, {0.f, 1.f, 0.f}),
                                             rec("c", ls::CotKind::kVanilla, {0.f, 0.f, 1.f})};
  const auto pca = ls::project_2d(recs, ls::ProjectionMethod::kLinearPca);
  ASSERT_EQ(pca.points.rows(), 3);
  EXPECT_EQ(pca.labels[1].example_id, "b");
  EXPECT_EQ(pca.labels[0].cot_kind, ls::CotKind::kLong);

  EXPECT_EQ(error_code([&] { ls::project_2d(recs, ls::ProjectionMethod::kExternalTsne); }),
            ls::Errc::kConfigError);
  const ls::Reducer fake = [](const Eigen::MatrixXd& x, nlohmann::json& params) {
    params["called"] = true;
    return Eigen::MatrixX2d(x.leftCols(2));
  };
  const auto ts = ls::project_2d(recs, ls::ProjectionMethod::kExternalTsne, fake);
  EXPECT_EQ(ts.params.at("called"), true);
  EXPECT_EQ(ts.points(1, 1), 1.0);
  EXPECT_EQ(error_code([&] { ls::project_2d(std::span(recs).first(2), ls::ProjectionMethod::kLinearPca); }),
            ls::Errc::kInvalidInput);
  EXPECT_EQ(ls::parse_projection_method("tsne"), ls::ProjectionMethod::kExternalTsne);
}

TEST(Separation, CentroidVersusPooledWithin) {
  ls::ProjectionResult p;
  p.points.resize(5, 2);
  p.points << 0, 0, 2, 0, 10, 0, 10, 2, 10, 4;
  p.labels = {{ls::CotKind::kVanilla, "", "a"}, {ls::CotKind::kVanilla, "", "b"},
              {ls::CotKind::kLong, "", "c"}, {ls::CotKind::kLong, "", "d"}, {ls::CotKind::kLong, "", "e"}};
  const auto s = ls::group_separation(p, ls::CotKind::kLong, ls::CotKind::kVanilla);
  // Centroids (10, 2) and (1, 0).
  EXPECT_NEAR(s.centroid_distance, std::sqrt(81.0 + 4.0), 1e-12);
  // Same-group pairs: vanilla {2}, long {2, 4, 2}.
  EXPECT_NEAR(s.mean_within_distance, 10.0 / 4.0, 1e-12);
  EXPECT_EQ(s.n_a, 3u);
  EXPECT_EQ(s.n_b, 2u);
  EXPECT_TRUE(s.separated());
  p.labels[1].cot_kind = ls::CotKind::kLong;
  EXPECT_EQ(error_code([&] { ls::group_separation(p, ls::CotKind::kLong, ls::CotKind::kVanilla); }),
            ls::Errc::kEmptyInput);
}

TEST(Lengths, Stats) {
  const std::vector<int> two{10, 20};
  const auto s = ls::length_stats("x", two);
  EXPECT_EQ(s.mean, 15.0);
  EXPECT_EQ(s.median, 15.0);
  EXPECT_EQ(s.min, 10);
  EXPECT_EQ(s.max, 20);
  const std::vector<int> odd{7, 1, 4};
  EXPECT_EQ(ls::length_stats("y", odd).median, 4.0);

  std::vector<ls::EvalRecord> recs(3);
  recs[0].method = "steered";
  recs[0].output_tokens = 30;
  recs[1].method = "zero_shot_cot";
  recs[1].output_tokens = 10;
  recs[2].method = "steered";
  recs[2].output_tokens = 50;
  const auto groups = ls::output_length_stats(recs);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].group, "steered");
  EXPECT_EQ(groups[0].mean, 40.0);
  EXPECT_EQ(groups[1].n, 1u);
}

TEST(ProjectionCsv, WritesHeaderAndRows) {
  ls::ProjectionResult p;
  p.points.resize(1, 2);
  p.points << 1.5, -2;
  p.labels = {{ls::CotKind::kLong, "math", "q1"}};
  const auto dir = test_util::fresh_dir("csv");
  ls::write_projection_csv(dir / "p.csv", p);
  const auto text = test_util::read_text(dir / "p.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "x,y,cot_kind,domain,example_id");
  EXPECT_NE(text.find("1.5,-2,long,math,q1"), std::string::npos) << text;
}
