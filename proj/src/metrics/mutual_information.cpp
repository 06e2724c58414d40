#include <algorithm>
#include <cmath>
#include <map>

#include "dbvae/error.hpp"
#include "dbvae/metrics/metrics.hpp"

namespace dbvae::metrics {

std::vector<int> discretize(const Eigen::Ref<const Eigen::VectorXd>& values, int bins) {
  require(bins >= 1, "discretize: bins must be positive");
  std::vector<int> out(static_cast<std::size_t>(values.size()), 0);
  if (values.size() == 0) return out;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (!(hi > lo)) return out;
  const double width = (hi - lo) / bins;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const int b = static_cast<int>(std::floor((values(i) - lo) / width));
    out[i] = std::clamp(b, 0, bins - 1);
  }
  return out;
}

double discrete_entropy(std::span<const int> labels) {
  require(!labels.empty(), "entropy of an empty sample");
  std::map<int, long> counts;
  for (int v : labels) ++counts[v];
  const double n = static_cast<double>(labels.size());
  double h = 0.0;
  for (const auto& [v, c] : counts) h -= (c / n) * std::log(c / n);
  return h;
}

double discrete_mutual_information(std::span<const int> a, std::span<const int> b) {
  require(a.size() == b.size() && !a.empty(), "mutual information: samples must be non-empty and aligned");
  std::map<int, long> ca, cb;
  std::map<std::pair<int, int>, long> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++joint[{a[i], b[i]}];
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    mi += (c / n) * std::log(c * n / (static_cast<double>(ca[key.first]) * cb[key.second]));
  }
  return std::max(mi, 0.0);
}

Eigen::MatrixXd mutual_information_matrix(const CodeTable& table, const std::vector<int>& columns, int bins) {
  table.validate();
  require(table.rows() > 0, "mutual information on an empty table");
  Eigen::MatrixXd mi(table.dims(), static_cast<Eigen::Index>(columns.size()));
  std::vector<std::vector<int>> factor_values;
  for (int c : columns) {
    factor_values.emplace_back(table.factors.col(c).data(), table.factors.col(c).data() + table.rows());
  }
  for (int j = 0; j < table.dims(); ++j) {
    const auto binned = discretize(table.codes.col(j), bins);
    for (std::size_t k = 0; k < columns.size(); ++k) mi(j, k) = discrete_mutual_information(binned, factor_values[k]);
  }
  return mi;
}

namespace {

double factor_entropy(const CodeTable& table, int column) {
  const auto col = table.factors.col(column);
  const std::vector<int> values(col.data(), col.data() + table.rows());
  const double h = discrete_entropy(values);
  if (!(h > 0.0)) {
    throw Error(ErrorKind::kDegenerate, "factor '" + table.factor_info[column].name + "' is constant in the table");
  }
  return h;
}

MigResult finish(std::map<std::string, double> per_factor) {
  MigResult r;
  for (const auto& [f, v] : per_factor) r.raw += v;
  r.raw /= static_cast<double>(per_factor.size());
  r.value = std::clamp(r.raw, 0.0, 1.0);
  r.per_factor = std::move(per_factor);
  return r;
}

}  // namespace

MigResult adapted_mig(const CodeTable& table, int bins) {
  const auto columns = table.target_columns();
  require(!columns.empty(), "adapted MIG needs target factors");
  const Eigen::MatrixXd mi = mutual_information_matrix(table, columns, bins);
  std::map<std::string, double> per_factor;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& name = table.factor_info[columns[k]].name;
    const auto& block = table.partition.block(name);
    double inside = 0.0, outside = 0.0;
    for (int j = 0; j < table.dims(); ++j) {
      if (j >= block.begin && j < block.end) {
        inside = std::max(inside, mi(j, k));
      } else {
        outside = std::max(outside, mi(j, k));
      }
    }
    per_factor[name] = (inside - outside) / factor_entropy(table, columns[k]);
  }
  return finish(std::move(per_factor));
}

MigResult mig_original(const CodeTable& table, int bins) {
  const auto columns = table.target_columns();
  require(!columns.empty(), "MIG needs target factors");
  require(table.dims() >= 2, "MIG needs at least two code dims");
  const Eigen::MatrixXd mi = mutual_information_matrix(table, columns, bins);
  std::map<std::string, double> per_factor;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    std::vector<double> col(mi.col(k).data(), mi.col(k).data() + mi.rows());
    std::partial_sort(col.begin(), col.begin() + 2, col.end(), std::greater<>());
    per_factor[table.factor_info[columns[k]].name] = (col[0] - col[1]) / factor_entropy(table, columns[k]);
  }
  return finish(std::move(per_factor));
}

double nontriviality(const CodeTable& table, const std::string& factor, int bins) {
  const int column = table.factor_index(factor);
  const auto& block = table.partition.block(factor);
  const Eigen::MatrixXd mi = mutual_information_matrix(table, {column}, bins);
  double best = 0.0;
  for (int j = block.begin; j < block.end; ++j) best = std::max(best, mi(j, 0));
  return std::clamp(best / factor_entropy(table, column), 0.0, 1.0);
}

}  // namespace dbvae::metrics
