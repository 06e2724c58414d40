#include <algorithm>
#include <cmath>
#include <numeric>

#include "dbvae/error.hpp"
#include "dbvae/losses/losses.hpp"
#include "dbvae/metrics/metrics.hpp"
#include "dbvae/model/probes.hpp"
#include "dbvae/nn/adam.hpp"

namespace dbvae::metrics {

namespace {

std::vector<int> random_row(const datasets::FactorSpec& spec, Rng& rng) {
  std::vector<int> row(spec.factors.size());
  for (std::size_t f = 0; f < row.size(); ++f) row[f] = rng.uniform_int(spec.factors[f].cardinality);
  return row;
}

// Pairs (S, S') where S' redraws either every factor but `factor`
// (keep_factor) or only `factor`; returns the normalized mean squared change
// of the selected code dims.
EstimatorResult paired_change(const CodeFunction& encoder, const datasets::FactorSpec& spec,
                              const std::vector<int>& dims, const std::string& factor, bool keep_factor,
                              int trials, Rng& rng) {
  require(trials >= 1, "estimator: trials must be positive");
  require(!dims.empty(), "estimator: no code dims selected");
  const int fi = spec.index_of(factor);
  std::vector<std::vector<int>> rows;
  rows.reserve(2 * static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    auto a = random_row(spec, rng);
    auto b = a;
    for (int f = 0; f < spec.num_factors(); ++f) {
      if ((f == fi) != keep_factor) b[f] = rng.uniform_int(spec.factors[f].cardinality);
    }
    rows.push_back(std::move(a));
    rows.push_back(std::move(b));
  }
  const Eigen::MatrixXd codes = encoder(rows);
  require(codes.rows() == static_cast<Eigen::Index>(rows.size()), "estimator: encoder returned wrong row count");
  Eigen::MatrixXd sel(codes.rows(), static_cast<Eigen::Index>(dims.size()));
  for (std::size_t k = 0; k < dims.size(); ++k) {
    require(dims[k] >= 0 && dims[k] < codes.cols(), "estimator: code dim out of range");
    sel.col(k) = codes.col(dims[k]);
  }
  require(sel.allFinite(), "estimator: non-finite codes");
  double change = 0.0;
  for (int t = 0; t < trials; ++t) change += (sel.row(2 * t) - sel.row(2 * t + 1)).squaredNorm();
  change /= trials;
  const Eigen::RowVectorXd mean = sel.colwise().mean();
  const double variance = (sel.rowwise() - mean).array().square().sum() / static_cast<double>(sel.rows());
  EstimatorResult r;
  if (!(variance > 1e-12)) {
    r.degenerate = true;
    r.value = change > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return r;
  }
  r.value = change / variance;
  return r;
}

}  // namespace

EstimatorResult consistency_estimator(const CodeFunction& encoder, const datasets::FactorSpec& spec,
                                      const model::LatentPartition& partition, const std::string& factor,
                                      int trials, Rng& rng) {
  return paired_change(encoder, spec, partition.indices(factor), factor, true, trials, rng);
}

EstimatorResult restrictiveness_estimator(const CodeFunction& encoder, const datasets::FactorSpec& spec,
                                          const model::LatentPartition& partition, const std::string& factor,
                                          int trials, Rng& rng) {
  return paired_change(encoder, spec, partition.complement(factor), factor, false, trials, rng);
}

CodeFunction model_code_function(model::VaeModel<float>& vae, const datasets::FactorSpec& spec,
                                 std::uint64_t render_seed) {
  return [&vae, spec, render_seed](const std::vector<std::vector<int>>& factor_rows) {
    constexpr int kBatch = 256;
    Eigen::MatrixXd codes(static_cast<Eigen::Index>(factor_rows.size()), vae.latent_dims());
    for (std::size_t begin = 0; begin < factor_rows.size(); begin += kBatch) {
      const std::size_t count = std::min<std::size_t>(kBatch, factor_rows.size() - begin);
      datasets::Dataset ds;
      ds.spec = spec;
      ds.split = datasets::SplitTag::kUnbiased;
      for (std::size_t i = 0; i < count; ++i) ds.append(factor_rows[begin + i], derive_seed(render_seed, begin + i));
      std::vector<int> rows(count);
      std::iota(rows.begin(), rows.end(), 0);
      const auto post = vae.encode(model::image_batch<float>(ds, rows));
      codes.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) =
          post.mean.transpose().cast<double>();
    }
    return codes;
  };
}

bool CounterexampleReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

namespace {

// Fits the probes of `bank` on fixed codes and returns the positive-probe
// cross-entropy for `factor`.
double fitted_positive_ce(model::ProbeBank<double>& bank, const model::Matrix<double>& codes,
                          const losses::LabelTable& labels, const std::string& factor, int steps) {
  nn::Adam<double> opt(bank.parameters(), {0.05});
  for (int s = 0; s < steps; ++s) {
    bank.zero_grad();
    losses::probe_update_loss<double>(bank, codes, labels);
    opt.step();
  }
  return losses::classification_loss_on_codes<double>(bank, codes, factor, labels.at(factor)).positive;
}

}  // namespace

CounterexampleReport counterexample_suite(int samples, int classes, std::uint64_t seed) {
  require(samples >= 2 * classes && classes >= 2, "counterexample: needs classes >= 2 and enough samples");
  require(samples % classes == 0, "counterexample: samples must split into equal-count bins");
  Rng rng(seed);
  std::vector<double> s1(samples), s2(samples), s2_alt(samples);
  for (int i = 0; i < samples; ++i) {
    s1[i] = rng.normal();
    s2[i] = rng.normal();
    s2_alt[i] = rng.normal();
  }
  // Equal-count bins of S1 (class labels) and S2.
  const auto bin = [&](const std::vector<double>& v) {
    std::vector<int> order(samples), label(samples);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
    for (int r = 0; r < samples; ++r) label[order[r]] = static_cast<int>(static_cast<long>(r) * classes / samples);
    return label;
  };
  const auto s1_label = bin(s1);
  const auto s2_label = bin(s2);

  const model::LatentPartition partition(2, {{"s1", 0, 1}, {"s2", 1, 2}});
  // Codes are 2 x N: row 0 is z1, row 1 is z2.
  model::Matrix<double> trivial(2, samples), trivial_pair(2, samples), informative(2, samples),
      informative_pair(2, samples);
  double recon_error = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = s1[i] * s2[i];
    const double x_pair = s1[i] * s2_alt[i];  // shares S1 only
    trivial.col(i) << 0.0, x;
    trivial_pair.col(i) << 0.0, x_pair;
    informative.col(i) << s1[i], x;
    informative_pair.col(i) << s1[i], x_pair;
    recon_error = std::max(recon_error, std::abs(trivial(1, i) - x));  // decoder g(z) = z2
  }
  const model::LatentBlock& block = partition.block("s1");

  CodeTable table;
  table.codes = trivial.transpose();
  table.factors.resize(samples, 2);
  for (int i = 0; i < samples; ++i) table.factors.row(i) << s1_label[i], s2_label[i];
  table.factor_info = {{"s1", classes, true}, {"s2", classes, true}};
  table.partition = partition;

  losses::LabelTable labels{{"s1", s1_label}};
  model::ProbeBank<double> trivial_bank(partition, {{"s1", classes}}, seed);
  model::ProbeBank<double> informative_bank(partition, {{"s1", classes}}, seed);
  constexpr int kProbeSteps = 300;
  const double ln_k = std::log(static_cast<double>(classes));
  const double ce_trivial = fitted_positive_ce(trivial_bank, trivial, labels, "s1", kProbeSteps);
  const double ce_informative = fitted_positive_ce(informative_bank, informative, labels, "s1", kProbeSteps);

  CounterexampleReport report;
  const auto add = [&](std::string name, double value, double expected, double tol) {
    report.checks.push_back({std::move(name), value, expected, tol, std::abs(value - expected) <= tol});
  };
  add("trivial encoder reconstructs X", recon_error, 0.0, 0.0);
  add("match pairing loss of trivial z1", losses::squared_block_distance<double>(trivial, trivial_pair, block), 0.0,
      0.0);
  add("match pairing loss of informative z1",
      losses::squared_block_distance<double>(informative, informative_pair, block), 0.0, 0.0);
  add("nontriviality of trivial z1", nontriviality(table, "s1"), 0.0, 1e-9);
  add("positive probe loss of trivial z1", ce_trivial, ln_k, 1e-6);
  // The probe loss separates the two encoders that match pairing cannot.
  report.checks.push_back({"positive probe gap (trivial - informative)", ce_trivial - ce_informative, 0.0, 0.0,
                           ce_trivial - ce_informative > 0.1});
  return report;
}

}  // namespace dbvae::metrics
