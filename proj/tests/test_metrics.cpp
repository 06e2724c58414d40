#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dbvae/error.hpp"
#include "dbvae/metrics/metrics.hpp"
#include "oracles.hpp"

using namespace dbvae;
using metrics::CodeTable;

namespace {

// N x F uniform factor values with the given cardinalities.
Eigen::MatrixXi random_factors(int n, const std::vector<int>& cards, Rng& rng) {
  Eigen::MatrixXi f(n, static_cast<Eigen::Index>(cards.size()));
  for (int r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < cards.size(); ++k) f(r, k) = rng.uniform_int(cards[k]);
  }
  return f;
}

CodeTable make_table(Eigen::MatrixXd codes, Eigen::MatrixXi factors, const std::vector<int>& cards,
                     model::LatentPartition partition) {
  CodeTable t{std::move(codes), std::move(factors), {}, std::move(partition)};
  const char* names[] = {"shape", "color", "extra"};
  for (std::size_t k = 0; k < cards.size(); ++k) t.factor_info.push_back({names[k], cards[k], k < 2});
  return t;
}

Eigen::MatrixXd noise(int n, int m, Rng& rng) {
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

std::vector<int> column(const Eigen::MatrixXi& m, int k) { return {m.col(k).data(), m.col(k).data() + m.rows()}; }

std::vector<double> column(const Eigen::MatrixXd& m, int k) { return {m.col(k).data(), m.col(k).data() + m.rows()}; }

// Codes dim k = factor k + small noise for the first two dims.
Eigen::MatrixXd perfect_codes(const Eigen::MatrixXi& f, int extra_dims, double jitter, Rng& rng) {
  Eigen::MatrixXd codes = noise(static_cast<int>(f.rows()), 2 + extra_dims, rng);
  codes.leftCols(2) = f.leftCols(2).cast<double>() + jitter * codes.leftCols(2);
  return codes;
}

}  // namespace

TEST(MutualInformation, MatchesExactJointOracle) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const int ka = 2 + rng.uniform_int(4), kb = 2 + rng.uniform_int(4);
    const int n = 5 + rng.uniform_int(200);
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.uniform_int(ka);
      b[i] = rng.uniform() < 0.5 ? a[i] % kb : rng.uniform_int(kb);
    }
    EXPECT_NEAR(metrics::discrete_mutual_information(a, b), oracle::mutual_information(a, b), 1e-9);
    EXPECT_NEAR(metrics::discrete_entropy(a), oracle::entropy(a), 1e-9);
  }
}

TEST(MutualInformation, IdenticalVariablesGiveEntropy) {
  const std::vector<int> a = {0, 1, 2, 3, 0, 1, 2, 3};
  EXPECT_NEAR(metrics::discrete_mutual_information(a, a), std::log(4.0), 1e-12);
  EXPECT_NEAR(metrics::discrete_mutual_information(a, std::vector<int>(8, 0)), 0.0, 1e-12);
}

TEST(MutualInformation, HistogramMatrixMatchesOracle) {
  Rng rng(2);
  const auto f = random_factors(500, {4, 3}, rng);
  Eigen::MatrixXd codes = noise(500, 3, rng);
  codes.col(0) += f.col(0).cast<double>();
  const auto t = make_table(codes, f, {4, 3}, model::LatentPartition(3, {{"shape", 0, 1}, {"color", 1, 2}}));
  const auto mi = metrics::mutual_information_matrix(t, {0, 1}, 5);
  const auto expected = oracle::mi_matrix({column(codes, 0), column(codes, 1), column(codes, 2)},
                                          {column(f, 0), column(f, 1)}, 5);
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(mi(j, k), expected[j][k], 1e-9);
  }
  for (int j = 0; j < 3; ++j) {
    const auto bins = metrics::discretize(codes.col(j), 5);
    EXPECT_EQ(bins, oracle::histogram_bins(column(codes, j), 5));
  }
  EXPECT_EQ(metrics::discretize(Eigen::VectorXd::Constant(4, 2.0), 5), std::vector<int>(4, 0));
}

TEST(Mig, MatchesOraclesOnRandomTables) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto f = random_factors(300, {3, 4}, rng);
    Eigen::MatrixXd codes = noise(300, 3, rng);
    for (int j = 0; j < 3; ++j) codes.col(j) += rng.uniform() * f.col(rng.uniform_int(2)).cast<double>();
    const model::LatentPartition part(3, {{"shape", 0, 1}, {"color", 1, 2}});
    const auto table = make_table(codes, f, {3, 4}, part);
    const auto mi = oracle::mi_matrix({column(codes, 0), column(codes, 1), column(codes, 2)},
                                      {column(f, 0), column(f, 1)}, 20);
    const std::vector<double> h = {oracle::entropy(column(f, 0)), oracle::entropy(column(f, 1))};
    EXPECT_NEAR(metrics::mig_original(table).value, oracle::mig(mi, h), 1e-9);
    const double raw = oracle::adapted_mig_raw(mi, h, {{0}, {1}});
    const auto adapted = metrics::adapted_mig(table);
    EXPECT_NEAR(adapted.raw, raw, 1e-9);
    EXPECT_NEAR(adapted.value, std::clamp(raw, 0.0, 1.0), 1e-9);
  }
}

TEST(Mig, SingleDimBlocksCoveringAllDimsCoincide) {
  Rng rng(4);
  const auto f = random_factors(1000, {5, 5}, rng);
  const auto codes = perfect_codes(f, 0, 0.01, rng);
  const auto table = make_table(codes, f, {5, 5}, model::LatentPartition(2, {{"shape", 0, 1}, {"color", 1, 2}}));
  EXPECT_NEAR(metrics::adapted_mig(table).raw, metrics::mig_original(table).raw, 1e-12);
  // The other factor's dim keeps a small plug-in MI bias.
  EXPECT_NEAR(metrics::mig_original(table).value, 1.0, 0.02);
}

TEST(Mig, DuplicatePerfectDimsHaveNoGap) {
  Rng rng(5);
  const auto f = random_factors(500, {4, 4}, rng);
  Eigen::MatrixXd codes(500, 4);
  codes.col(0) = codes.col(1) = f.col(0).cast<double>();
  codes.col(2) = codes.col(3) = f.col(1).cast<double>();
  const auto table = make_table(codes, f, {4, 4}, model::LatentPartition(4, {{"shape", 0, 2}, {"color", 2, 4}}));
  EXPECT_NEAR(metrics::mig_original(table).value, 0.0, 1e-12);
  EXPECT_NEAR(metrics::adapted_mig(table).value, 1.0, 0.02);
}

TEST(Dci, HandComputedImportance) {
  Eigen::MatrixXd r(4, 2);
  r << 1, 0, 0, 1, 1, 1, 0, 0;
  const auto d = metrics::dci_from_importance(r);
  EXPECT_NEAR(d.disentanglement, 0.5, 1e-12);  // rows 0, 1 pure with weight 1/4 each
  EXPECT_NEAR(d.completeness, 0.5, 1e-12);     // each column split over 2 of 4 dims
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(4, 2);
  EXPECT_EQ(metrics::dci_from_importance(z).disentanglement, 0.0);
}

TEST(Dci, MatchesOracleAndIsPermutationInvariant) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd r(5, 3);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    std::vector<std::vector<double>> rv(5, std::vector<double>(3));
    for (int j = 0; j < 5; ++j) {
      for (int k = 0; k < 3; ++k) rv[j][k] = r(j, k);
    }
    const auto d = metrics::dci_from_importance(r);
    const auto o = oracle::dci(rv);
    EXPECT_NEAR(d.disentanglement, o.disentanglement, 1e-9);
    EXPECT_NEAR(d.completeness, o.completeness, 1e-9);
    Eigen::PermutationMatrix<Eigen::Dynamic> rows(5), cols(3);
    rows.indices() << 3, 0, 4, 1, 2;
    cols.indices() << 2, 0, 1;
    const auto p = metrics::dci_from_importance(rows * r * cols);
    EXPECT_NEAR(p.disentanglement, d.disentanglement, 1e-12);
    EXPECT_NEAR(p.completeness, d.completeness, 1e-12);
  }
}

TEST(Dci, PerfectCodesScoreHigh) {
  Rng rng(7);
  const auto f = random_factors(2000, {4, 4}, rng);
  const auto table =
      make_table(perfect_codes(f, 2, 0.05, rng), f, {4, 4}, model::LatentPartition(4, {{"shape", 0, 1}, {"color", 1, 2}}));
  const auto d = metrics::dci(table);
  EXPECT_GT(d.disentanglement, 0.9);
  EXPECT_GT(d.completeness, 0.9);
}

TEST(FactorVae, PerfectCodesScoreOne) {
  Rng rng(8);
  const auto f = random_factors(3000, {10, 10}, rng);
  const auto table = make_table(perfect_codes(f, 2, 0.0, rng), f, {10, 10},
                                model::LatentPartition(4, {{"shape", 0, 1}, {"color", 1, 2}}));
  Rng r(1);
  EXPECT_EQ(metrics::factorvae_score(table, r), 1.0);
}

TEST(FactorVae, NoiseCodesNearChance) {
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto f = random_factors(3000, {10, 10}, rng);
    const auto table = make_table(noise(3000, 6, rng), f, {10, 10},
                                  model::LatentPartition(6, {{"shape", 0, 2}, {"color", 2, 4}}));
    const double s = metrics::factorvae_score(table, rng);
    EXPECT_NEAR(s, 0.5, 0.1) << "seed " << seed;
    sum += s;
  }
  EXPECT_NEAR(sum / 20, 0.5, 0.1);
}

TEST(FactorVae, InvariantToPerDimAffineMaps) {
  Rng rng(9);
  const auto f = random_factors(2000, {5, 5}, rng);
  const auto codes = perfect_codes(f, 2, 0.7, rng);
  Eigen::MatrixXd mapped = codes;
  const double scales[] = {3.0, 0.25, 11.0, 0.5};
  for (int j = 0; j < 4; ++j) mapped.col(j) = scales[j] * codes.col(j).array() + (j - 1.5);
  const model::LatentPartition part(4, {{"shape", 0, 1}, {"color", 1, 2}});
  Rng a(3), b(3);
  EXPECT_EQ(metrics::factorvae_score(make_table(codes, f, {5, 5}, part), a),
            metrics::factorvae_score(make_table(mapped, f, {5, 5}, part), b));
}

TEST(FactorVae, CollapsedCodesAreDegenerate) {
  Rng rng(10);
  const auto f = random_factors(100, {3, 3}, rng);
  Eigen::MatrixXd codes = Eigen::MatrixXd::Zero(100, 3);
  codes.col(0) = f.col(0).cast<double>();
  try {
    metrics::factorvae_score(make_table(codes, f, {3, 3}, model::LatentPartition(3, {{"shape", 0, 1}})), rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerate);
  }
}

TEST(Downstream, OneHotCodesTransferAcrossShift) {
  Rng rng(11);
  const model::LatentPartition part(20, {{"shape", 0, 10}, {"color", 10, 20}});
  const auto one_hot = [](const Eigen::MatrixXi& f) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(f.rows(), 20);
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      c(r, f(r, 0)) = 1;
      c(r, 10 + f(r, 1)) = 1;
    }
    return c;
  };
  Eigen::MatrixXi train_f(500, 2), test_f(500, 2);
  for (int r = 0; r < 500; ++r) {
    train_f(r, 0) = r % 10;
    train_f(r, 1) = r % 10;  // diagonal
    test_f(r, 0) = r % 10;
    test_f(r, 1) = (r + 3) % 10;  // shifted
  }
  const auto train = make_table(one_hot(train_f), train_f, {10, 10}, part);
  const auto test = make_table(one_hot(test_f), test_f, {10, 10}, part);
  const auto acc = metrics::downstream_accuracy(train, test, {0, 1e-3, 500});
  EXPECT_EQ(acc.at("shape"), 1.0);
  EXPECT_EQ(acc.at("color"), 1.0);
}

TEST(Downstream, IndependentCodesAtChance) {
  Rng rng(12);
  const model::LatentPartition part(6, {{"shape", 0, 2}, {"color", 2, 4}});
  const auto tf = random_factors(2000, {10, 10}, rng);
  const auto sf = random_factors(5000, {10, 10}, rng);
  const auto acc = metrics::downstream_accuracy(make_table(noise(2000, 6, rng), tf, {10, 10}, part),
                                                make_table(noise(5000, 6, rng), sf, {10, 10}, part));
  EXPECT_NEAR(acc.at("shape"), 0.1, 0.03);
  EXPECT_NEAR(acc.at("color"), 0.1, 0.03);
}

TEST(Downstream, SingleClassTrainIsDegenerate) {
  Rng rng(13);
  const model::LatentPartition part(4, {{"shape", 0, 2}, {"color", 2, 4}});
  Eigen::MatrixXi f = random_factors(50, {3, 3}, rng);
  f.col(0).setZero();
  const auto t = make_table(noise(50, 4, rng), f, {3, 3}, part);
  try {
    metrics::downstream_accuracy(t, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerate);
  }
}

namespace {

const datasets::FactorSpec& two_factor_spec() {
  static const auto spec = datasets::FactorSpec::preset(datasets::Family::kGlyphs10, 1);
  return spec;
}

const model::LatentPartition& two_block_partition() {
  static const model::LatentPartition p(4, {{"shape", 0, 1}, {"color", 1, 2}});
  return p;
}

// Synthetic encoder: dims (shape, color, nuisance...) computed from factors.
metrics::CodeFunction synthetic(std::function<Eigen::RowVector4d(const std::vector<int>&)> f) {
  return [f](const std::vector<std::vector<int>>& rows) {
    Eigen::MatrixXd codes(static_cast<Eigen::Index>(rows.size()), 4);
    for (std::size_t r = 0; r < rows.size(); ++r) codes.row(static_cast<Eigen::Index>(r)) = f(rows[r]);
    return codes;
  };
}

}  // namespace

TEST(Estimators, ConstantEncoderIsTriviallyConsistent) {
  Rng rng(14);
  const auto constant = synthetic([](const std::vector<int>&) { return Eigen::RowVector4d::Constant(1.5); });
  const auto c = metrics::consistency_estimator(constant, two_factor_spec(), two_block_partition(), "shape", 200, rng);
  EXPECT_EQ(c.value, 0.0);
  EXPECT_TRUE(c.degenerate);
}

TEST(Estimators, IdentityEncoderIsZeroOnBoth) {
  Rng rng(15);
  const auto identity = synthetic([](const std::vector<int>& s) { return Eigen::RowVector4d(s[0], s[1], 0, 0); });
  for (const std::string f : {"shape", "color"}) {
    EXPECT_EQ(metrics::consistency_estimator(identity, two_factor_spec(), two_block_partition(), f, 500, rng).value, 0.0);
    EXPECT_EQ(metrics::restrictiveness_estimator(identity, two_factor_spec(), two_block_partition(), f, 500, rng).value,
              0.0);
  }
}

TEST(Estimators, SwappedBlocksGiveTwo) {
  // Variance algebra: E(S - S')^2 = 2 Var S for independent copies.
  Rng rng(16);
  const auto swapped = synthetic([](const std::vector<int>& s) { return Eigen::RowVector4d(s[1], s[0], 0, 0); });
  const auto c = metrics::consistency_estimator(swapped, two_factor_spec(), two_block_partition(), "shape", 10000, rng);
  EXPECT_NEAR(c.value, 2.0, 0.2);
  // The complement of shape holds a copy of shape.
  const auto r =
      metrics::restrictiveness_estimator(swapped, two_factor_spec(), two_block_partition(), "shape", 10000, rng);
  // Only one of the three complement dims varies; all of its variance moves.
  EXPECT_NEAR(r.value, 2.0, 0.2);
  EXPECT_FALSE(r.degenerate);
}

TEST(Nontriviality, CopyConstantAndRandomBlocks) {
  Rng rng(17);
  const int n = 10000;
  const auto f = random_factors(n, {10, 10}, rng);
  const model::LatentPartition part(3, {{"shape", 0, 1}, {"color", 1, 2}});
  Eigen::MatrixXd codes = noise(n, 3, rng);
  codes.col(0) = f.col(0).cast<double>();
  codes.col(1).setZero();
  const auto table = make_table(codes, f, {10, 10}, part);
  EXPECT_NEAR(metrics::nontriviality(table, "shape"), 1.0, 1e-12);
  EXPECT_NEAR(metrics::nontriviality(table, "color"), 0.0, 1e-12);
  Eigen::MatrixXd random_codes = noise(n, 3, rng);
  EXPECT_LE(metrics::nontriviality(make_table(random_codes, f, {10, 10}, part), "color"), 0.05);
}

TEST(Counterexample, TrivialEncoderWitnessesBothRows) {
  const auto report = metrics::counterexample_suite();
  ASSERT_FALSE(report.checks.empty());
  for (const auto& c : report.checks) {
    EXPECT_TRUE(c.passed) << c.name << " value " << c.value << " expected " << c.expected << " tol " << c.tolerance;
  }
  EXPECT_TRUE(report.passed());
}
