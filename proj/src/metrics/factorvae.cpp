#include <cmath>
#include <vector>

#include "dbvae/error.hpp"
#include "dbvae/metrics/metrics.hpp"

namespace dbvae::metrics {

namespace {

struct Vote {
  int dim = 0;     // index into the active dims
  int factor = 0;  // index into the target columns
};

}  // namespace

double factorvae_score(const CodeTable& table, Rng& rng, const FactorVaeOptions& options) {
  table.validate();
  require(options.train_votes >= 1 && options.test_votes >= 1 && options.samples_per_vote >= 2,
          "factorvae_score: needs positive vote counts and >= 2 samples per vote");
  const auto targets = table.target_columns();
  require(!targets.empty(), "factorvae_score: no target factors");
  require(table.rows() >= 2, "factorvae_score: table too small");

  const Eigen::RowVectorXd mean = table.codes.colwise().mean();
  const Eigen::RowVectorXd std =
      ((table.codes.rowwise() - mean).array().square().colwise().sum() / table.rows()).sqrt();
  const double mean_std = std.mean();
  std::vector<int> active;
  for (int j = 0; j < table.dims(); ++j) {
    if (std(j) > 0.0 && std(j) >= options.prune_threshold * mean_std) active.push_back(j);
  }
  if (active.size() < 2) {
    throw Error(ErrorKind::kDegenerate, "factorvae_score: fewer than 2 active code dims after pruning");
  }

  // Rows per (target, value).
  std::vector<std::vector<std::vector<int>>> rows(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    rows[k].resize(table.factor_info[targets[k]].cardinality);
    for (int r = 0; r < table.rows(); ++r) rows[k][table.factors(r, targets[k])].push_back(r);
  }

  const auto draw_vote = [&]() {
    const int k = rng.uniform_int(static_cast<int>(targets.size()));
    std::vector<int> present;
    for (std::size_t v = 0; v < rows[k].size(); ++v) {
      if (!rows[k][v].empty()) present.push_back(static_cast<int>(v));
    }
    const auto& pool = rows[k][present[rng.uniform_int(static_cast<int>(present.size()))]];
    const int l = options.samples_per_vote;
    Eigen::MatrixXd sample(l, active.size());
    for (int s = 0; s < l; ++s) {
      const int r = pool[rng.uniform_int(static_cast<int>(pool.size()))];
      for (std::size_t a = 0; a < active.size(); ++a) sample(s, a) = table.codes(r, active[a]) / std(active[a]);
    }
    const Eigen::RowVectorXd m = sample.colwise().mean();
    const Eigen::RowVectorXd var = (sample.rowwise() - m).array().square().colwise().sum() / (l - 1);
    Eigen::Index best = 0;
    var.minCoeff(&best);
    return Vote{static_cast<int>(best), k};
  };

  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(active.size()),
                                                 static_cast<Eigen::Index>(targets.size()));
  for (int v = 0; v < options.train_votes; ++v) {
    const Vote vote = draw_vote();
    ++counts(vote.dim, vote.factor);
  }
  std::vector<int> assigned(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    Eigen::Index f = 0;
    counts.row(a).maxCoeff(&f);
    assigned[a] = static_cast<int>(f);
  }
  int correct = 0;
  for (int v = 0; v < options.test_votes; ++v) {
    const Vote vote = draw_vote();
    if (assigned[vote.dim] == vote.factor) ++correct;
  }
  return static_cast<double>(correct) / options.test_votes;
}

}  // namespace dbvae::metrics
