#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>

#include "dbvae/error.hpp"
#include "dbvae/metrics/metrics.hpp"

namespace dbvae::metrics {

Eigen::MatrixXd SoftmaxModel::standardize(const Eigen::MatrixXd& x) const {
  require(x.cols() == mean.size(), "softmax probe: feature count mismatch");
  Eigen::MatrixXd out = x.rowwise() - mean;
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) *= scale(j) > 0.0 ? 1.0 / scale(j) : 0.0;
  return out;
}

std::vector<int> SoftmaxModel::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd logits = (standardize(x) * weight.transpose()).rowwise() + bias.transpose();
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

double SoftmaxModel::accuracy(const Eigen::MatrixXd& x, std::span<const int> labels) const {
  require(static_cast<Eigen::Index>(labels.size()) == x.rows() && x.rows() > 0, "accuracy: label count mismatch");
  const auto pred = predict(x);
  long correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

SoftmaxModel fit_softmax(const Eigen::MatrixXd& x, std::span<const int> labels, int classes,
                         const SoftmaxOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  require(n > 0 && static_cast<Eigen::Index>(labels.size()) == n, "fit_softmax: label count mismatch");
  require(classes >= 2, "fit_softmax: needs at least two classes");
  require(options.l1 >= 0.0 && options.l2 >= 0.0 && options.iterations >= 1, "fit_softmax: bad options");

  SoftmaxModel m;
  m.mean = x.colwise().mean();
  m.scale = ((x.rowwise() - m.mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(m.scale(j) > 1e-12)) m.scale(j) = 0.0;
  }
  const Eigen::MatrixXd xs = m.standardize(x);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(labels[i] >= 0 && labels[i] < classes, "fit_softmax: label out of range");
    y(i, labels[i]) = 1.0;
  }

  // Lipschitz bound of the mean cross-entropy gradient: the softmax Hessian is
  // below I/2, so L <= lambda_max([x 1]^T [x 1] / n) / 2.
  Eigen::MatrixXd aug(n, d + 1);
  aug << xs, Eigen::VectorXd::Ones(n);
  const Eigen::MatrixXd gram = aug.transpose() * aug / static_cast<double>(n);
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double lipschitz = 0.5 * lmax + options.l2;
  const double step = 1.0 / lipschitz;

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(classes, d), w_prev = w, w_y = w;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(classes), b_prev = b, b_y = b;
  double t = 1.0;
  for (int it = 0; it < options.iterations; ++it) {
    Eigen::MatrixXd logits = (xs * w_y.transpose()).rowwise() + b_y.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double top = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - top).exp();
      logits.row(i) /= logits.row(i).sum();
    }
    const Eigen::MatrixXd delta = (logits - y) / static_cast<double>(n);
    const Eigen::MatrixXd gw = delta.transpose() * xs + options.l2 * w_y;
    const Eigen::VectorXd gb = delta.colwise().sum().transpose();
    w_prev = w;
    b_prev = b;
    w = w_y - step * gw;
    if (options.l1 > 0.0) {
      const double thr = step * options.l1;
      w = w.unaryExpr([thr](double v) { return v > thr ? v - thr : (v < -thr ? v + thr : 0.0); });
    }
    b = b_y - step * gb;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    w_y = w + momentum * (w - w_prev);
    b_y = b + momentum * (b - b_prev);
    t = t_next;
  }
  m.weight = std::move(w);
  m.bias = std::move(b);
  return m;
}

namespace {

// Entropy of a normalized non-negative vector in base `base`.
double normalized_entropy(const Eigen::Ref<const Eigen::VectorXd>& v, double base) {
  const double total = v.sum();
  double h = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double p = v(i) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(base);
}

}  // namespace

DciResult dci_from_importance(const Eigen::MatrixXd& importance) {
  require(importance.rows() >= 2 && importance.cols() >= 2, "dci: needs at least two dims and two factors");
  require(importance.allFinite() && importance.minCoeff() >= 0.0, "dci: importance must be finite and >= 0");
  DciResult r;
  r.importance = importance;
  const double total = importance.sum();
  if (!(total > 0.0)) return r;
  const double m = static_cast<double>(importance.rows());
  const double n = static_cast<double>(importance.cols());
  for (Eigen::Index j = 0; j < importance.rows(); ++j) {
    const double row = importance.row(j).sum();
    if (row > 0.0) r.disentanglement += (row / total) * (1.0 - normalized_entropy(importance.row(j).transpose(), n));
  }
  for (Eigen::Index k = 0; k < importance.cols(); ++k) {
    if (importance.col(k).sum() > 0.0) r.completeness += 1.0 - normalized_entropy(importance.col(k), m);
  }
  // Both are convex combinations of values in [0, 1]; clamp rounding.
  r.disentanglement = std::clamp(r.disentanglement, 0.0, 1.0);
  r.completeness = std::clamp(r.completeness / n, 0.0, 1.0);
  return r;
}

DciResult dci(const CodeTable& table, const DciOptions& options) {
  table.validate();
  const auto targets = table.target_columns();
  require(targets.size() >= 2, "dci: needs at least two target factors");
  Eigen::MatrixXd importance(table.dims(), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto col = table.factors.col(targets[k]);
    const std::vector<int> labels(col.data(), col.data() + table.rows());
    const auto fit = fit_softmax(table.codes, labels, table.factor_info[targets[k]].cardinality,
                                 {options.l1, 0.0, options.iterations});
    importance.col(k) = fit.weight.cwiseAbs().colwise().sum().transpose();
  }
  return dci_from_importance(importance);
}

std::map<std::string, double> downstream_accuracy(const CodeTable& train, const CodeTable& test,
                                                  const SoftmaxOptions& options) {
  train.validate();
  test.validate();
  require(train.dims() == test.dims(), "downstream_accuracy: code widths differ");
  require(train.rows() > 0 && test.rows() > 0, "downstream_accuracy: empty table");
  std::map<std::string, double> out;
  for (int c : train.target_columns()) {
    const auto& info = train.factor_info[c];
    const auto& block = train.partition.block(info.name);
    const auto train_col = train.factors.col(c);
    const std::vector<int> y(train_col.data(), train_col.data() + train.rows());
    if (std::set<int>(y.begin(), y.end()).size() < 2) {
      throw Error(ErrorKind::kDegenerate, "downstream_accuracy: factor '" + info.name + "' has a single class");
    }
    const int tc = test.factor_index(info.name);
    const auto test_col = test.factors.col(tc);
    const std::vector<int> y_test(test_col.data(), test_col.data() + test.rows());
    const auto fit = fit_softmax(train.codes.middleCols(block.begin, block.size()), y, info.cardinality, options);
    out[info.name] = fit.accuracy(test.codes.middleCols(block.begin, block.size()), y_test);
  }
  return out;
}

}  // namespace dbvae::metrics
