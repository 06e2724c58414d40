#include "dbvae/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dbvae/error.hpp"

namespace dbvae::losses {

using model::LatentBlock;
using model::LinearProbe;
using model::ProbeBank;
using model::VaeModel;

LossWeights LossWeights::proposed(double lambda_mp_pos, double lambda_neg) {
  return {lambda_mp_pos, lambda_mp_pos, lambda_neg, 1.0};
}

LossWeights LossWeights::beta_vae(double beta) { return {0.0, 0.0, 0.0, beta}; }

void LossWeights::validate() const {
  const auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!ok(lambda_mp) || !ok(lambda_pos) || !ok(lambda_neg)) {
    throw Error(ErrorKind::kInvalidArgument, "loss weights must be finite and non-negative");
  }
  if (!std::isfinite(beta) || beta <= 0.0) throw Error(ErrorKind::kInvalidArgument, "beta must be positive");
}

bool LossWeights::in_recommended_set() const {
  return lambda_mp == lambda_pos && (lambda_neg == 1.0 || lambda_neg == 10.0);
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda_mp", w.lambda_mp}, {"lambda_pos", w.lambda_pos}, {"lambda_neg", w.lambda_neg}, {"beta", w.beta}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w = LossWeights{};
  w.lambda_mp = j.value("lambda_mp", w.lambda_mp);
  w.lambda_pos = j.value("lambda_pos", w.lambda_pos);
  w.lambda_neg = j.value("lambda_neg", w.lambda_neg);
  w.beta = j.value("beta", w.beta);
}

double LossBreakdown::recompute_total(const LossWeights& w) const {
  double t = neg_elbo;
  for (const auto& [f, v] : mp) t += w.lambda_mp * v;
  for (const auto& [f, v] : cl_pos) t += w.lambda_pos * v;
  for (const auto& [f, v] : cl_neg) t -= w.lambda_neg * v;
  return t;
}

template <typename T>
double bernoulli_cross_entropy(const Matrix<T>& logits, const Matrix<T>& targets, Matrix<T>* dlogits, T scale) {
  require(logits.rows() == targets.rows() && logits.cols() == targets.cols() && logits.cols() > 0,
          "bernoulli_cross_entropy: shape mismatch");
  const double n = static_cast<double>(logits.cols());
  double sum = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double x = logits(i, j);
      const double t = targets(i, j);
      sum += std::max(x, 0.0) - t * x + std::log1p(std::exp(-std::abs(x)));
    }
  }
  if (dlogits) {
    const T s = scale / static_cast<T>(n);
    dlogits->array() += s * ((T(1) / (T(1) + (-logits.array()).exp())) - targets.array());
  }
  return sum / n;
}

template <typename T>
double gaussian_kl(const Matrix<T>& mean, const Matrix<T>& logvar, Matrix<T>* dmean, Matrix<T>* dlogvar, T scale) {
  require(mean.rows() == logvar.rows() && mean.cols() == logvar.cols() && mean.cols() > 0,
          "gaussian_kl: shape mismatch");
  const double n = static_cast<double>(mean.cols());
  double sum = 0.0;
  for (Eigen::Index j = 0; j < mean.cols(); ++j) {
    for (Eigen::Index i = 0; i < mean.rows(); ++i) {
      const double mu = mean(i, j);
      const double lv = logvar(i, j);
      sum += 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv);
    }
  }
  const T s = scale / static_cast<T>(n);
  if (dmean) *dmean += s * mean;
  if (dlogvar) dlogvar->array() += s * T(0.5) * (logvar.array().exp() - T(1));
  return sum / n;
}

template <typename T>
double squared_block_distance(const Matrix<T>& first, const Matrix<T>& second, const LatentBlock& block,
                              Matrix<T>* dfirst, Matrix<T>* dsecond, T scale) {
  require(first.rows() == second.rows() && first.cols() == second.cols() && first.cols() > 0,
          "match pairing: both sides need the same non-empty shape");
  require(block.begin >= 0 && block.end <= first.rows() && block.size() > 0, "match pairing: bad block");
  const Matrix<T> diff = first.middleRows(block.begin, block.size()) - second.middleRows(block.begin, block.size());
  const double n = static_cast<double>(first.cols());
  double sum = 0.0;
  for (Eigen::Index j = 0; j < diff.cols(); ++j) {
    for (Eigen::Index i = 0; i < diff.rows(); ++i) sum += static_cast<double>(diff(i, j)) * diff(i, j);
  }
  const T s = T(2) * scale / static_cast<T>(n);
  if (dfirst) dfirst->middleRows(block.begin, block.size()) += s * diff;
  if (dsecond) dsecond->middleRows(block.begin, block.size()) -= s * diff;
  return sum / n;
}

template <typename T>
double softmax_cross_entropy(const Matrix<T>& logits, std::span<const int> labels, Matrix<T>* dlogits, T scale,
                             std::optional<double> clip) {
  require(logits.cols() > 0, "cross-entropy on an empty batch");
  require(static_cast<Eigen::Index>(labels.size()) == logits.cols(), "cross-entropy: label count mismatch");
  const double n = static_cast<double>(logits.cols());
  double sum = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int y = labels[j];
    require(y >= 0 && y < logits.rows(), "cross-entropy: label out of range");
    const double top = logits.col(j).maxCoeff();
    double z = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) z += std::exp(logits(i, j) - top);
    const double lse = top + std::log(z);
    double ce = lse - logits(y, j);
    const bool clipped = clip && ce >= *clip;
    if (clipped) ce = *clip;
    sum += ce;
    if (dlogits && !clipped) {
      const T s = scale / static_cast<T>(n);
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double p = std::exp(logits(i, j) - lse);
        (*dlogits)(i, j) += s * static_cast<T>(p - (i == y ? 1.0 : 0.0));
      }
    }
  }
  return sum / n;
}

namespace {

// Cross-entropy of one probe; optional gradients into the codes and/or the
// probe's own parameter gradients.
template <typename T>
double probe_loss(const LinearProbe<T>& probe, const Matrix<T>& codes, std::span<const int> labels,
                  std::optional<double> clip, T scale, Matrix<T>* dcodes, LinearProbe<T>* param_grads) {
  const Matrix<T> logits = probe.logits(codes);
  if (!dcodes && !param_grads) return softmax_cross_entropy<T>(logits, labels, nullptr, scale, clip);
  Matrix<T> dlogits = Matrix<T>::Zero(logits.rows(), logits.cols());
  const double value = softmax_cross_entropy<T>(logits, labels, &dlogits, scale, clip);
  if (dcodes) model::scatter_add_rows<T>(*dcodes, probe.inputs, probe.weight.value.transpose() * dlogits);
  if (param_grads) {
    param_grads->weight.grad += dlogits * model::gather_rows(codes, probe.inputs).transpose();
    param_grads->bias.grad += dlogits.rowwise().sum();
  }
  return value;
}

// Columns with a known label for `factor`, and those labels.
struct Labelled {
  std::vector<int> columns;
  std::vector<int> labels;
};

Labelled labelled_columns(const LabelTable& table, const std::string& factor) {
  Labelled out;
  const auto it = table.find(factor);
  if (it == table.end()) return out;
  for (std::size_t j = 0; j < it->second.size(); ++j) {
    if (it->second[j] >= 0) {
      out.columns.push_back(static_cast<int>(j));
      out.labels.push_back(it->second[j]);
    }
  }
  return out;
}

template <typename T>
Matrix<T> gather_cols(const Matrix<T>& m, const std::vector<int>& cols) {
  Matrix<T> out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = m.col(cols[j]);
  return out;
}

template <typename T>
Matrix<T> sample_codes(VaeModel<T>& vae, const Matrix<T>& images, Rng& rng) {
  const auto post = vae.encode(images);
  return model::reparameterize<T>(post.mean, post.logvar, rng);
}

}  // namespace

template <typename T>
NegElbo neg_elbo(VaeModel<T>& vae, const Matrix<T>& images, double beta, Rng& rng) {
  require(beta > 0.0, "neg_elbo: beta must be positive");
  const auto post = vae.encode(images);
  const Matrix<T> z = model::reparameterize<T>(post.mean, post.logvar, rng);
  NegElbo out;
  out.reconstruction = bernoulli_cross_entropy<T>(vae.decode_logits(z), images);
  out.kl = gaussian_kl<T>(post.mean, post.logvar);
  out.value = out.reconstruction + beta * out.kl;
  return out;
}

template <typename T>
double match_pairing_loss(VaeModel<T>& vae, const Matrix<T>& first, const Matrix<T>& second,
                          const std::string& factor, Rng& rng_a, Rng& rng_b) {
  require(first.cols() == second.cols(), "match pairing: unequal pair counts");
  const auto& block = vae.partition().block(factor);
  const Matrix<T> za = sample_codes(vae, first, rng_a);
  const Matrix<T> zb = sample_codes(vae, second, rng_b);
  return squared_block_distance<T>(za, zb, block);
}

template <typename T>
double match_pairing_loss(VaeModel<T>& vae, const Matrix<T>& first, const Matrix<T>& second,
                          const std::string& factor, Rng& rng) {
  return match_pairing_loss<T>(vae, first, second, factor, rng, rng);
}

template <typename T>
double match_pairing_loss_means(VaeModel<T>& vae, const Matrix<T>& first, const Matrix<T>& second,
                                const std::string& factor) {
  require(first.cols() == second.cols(), "match pairing: unequal pair counts");
  const auto& block = vae.partition().block(factor);
  const Matrix<T> za = vae.encode(first).mean;
  const Matrix<T> zb = vae.encode(second).mean;
  return squared_block_distance<T>(za, zb, block);
}

template <typename T>
ClassificationLoss classification_loss_on_codes(const ProbeBank<T>& probes, const Matrix<T>& codes,
                                                const std::string& factor, std::span<const int> labels) {
  const auto& e = probes.entry(factor);
  ClassificationLoss out;
  out.positive = probe_loss<T>(e.positive, codes, labels, std::nullopt, T(1), nullptr, nullptr);
  out.negative = probe_loss<T>(e.negative, codes, labels, std::log(static_cast<double>(e.cardinality)), T(1),
                               nullptr, nullptr);
  return out;
}

template <typename T>
ClassificationLoss classification_loss(VaeModel<T>& vae, const ProbeBank<T>& probes, const Matrix<T>& images,
                                       const std::string& factor, std::span<const int> labels, Rng& rng) {
  return classification_loss_on_codes<T>(probes, sample_codes(vae, images, rng), factor, labels);
}

template <typename T>
double probe_update_loss(ProbeBank<T>& probes, const Matrix<T>& codes, const LabelTable& labels,
                         bool accumulate_gradients) {
  double total = 0.0;
  bool any = false;
  for (auto& e : probes.entries()) {
    const auto sel = labelled_columns(labels, e.factor);
    if (sel.columns.empty()) continue;
    any = true;
    const Matrix<T> sub = gather_cols(codes, sel.columns);
    total += probe_loss<T>(e.positive, sub, sel.labels, std::nullopt, T(1), nullptr,
                           accumulate_gradients ? &e.positive : nullptr);
    total += probe_loss<T>(e.negative, sub, sel.labels, std::nullopt, T(1), nullptr,
                           accumulate_gradients ? &e.negative : nullptr);
  }
  if (!any) throw Error(ErrorKind::kInvalidArgument, "probe update on an empty labelled batch");
  return total;
}

template <typename T>
LossBreakdown total_loss(VaeModel<T>& vae, const ProbeBank<T>* probes, const Matrix<T>& train_images,
                         const std::vector<PairBatch<T>>& feedback, const LossWeights& weights, Rng& rng,
                         const TotalLossOptions<T>& options) {
  weights.validate();
  const Eigen::Index n_train = train_images.cols();
  Eigen::Index n_total = n_train;
  for (const auto& fb : feedback) {
    require(fb.first.cols() == fb.second.cols() && fb.first.cols() > 0, "feedback batch needs matched pairs");
    n_total += 2 * fb.first.cols();
  }
  require(n_total > 0, "total_loss: empty batch");

  // Column layout: train | first_0 | second_0 | first_1 | second_1 | ...
  Matrix<T> images(vae.image_size(), n_total);
  if (n_train > 0) images.leftCols(n_train) = train_images;
  LabelTable fb_labels;
  Eigen::Index col = n_train;
  const Eigen::Index n_fb = n_total - n_train;
  const auto append_labels = [&](const LabelTable& table, Eigen::Index offset, Eigen::Index count) {
    for (const auto& [factor, values] : table) {
      require(static_cast<Eigen::Index>(values.size()) == count, "feedback labels must cover every member");
      auto& dst = fb_labels[factor];
      dst.resize(static_cast<std::size_t>(n_fb), -1);
      for (Eigen::Index j = 0; j < count; ++j) dst[offset + j] = values[j];
    }
  };
  for (const auto& fb : feedback) {
    const Eigen::Index p = fb.first.cols();
    images.middleCols(col, p) = fb.first;
    images.middleCols(col + p, p) = fb.second;
    append_labels(fb.first_labels, col - n_train, p);
    append_labels(fb.second_labels, col - n_train + p, p);
    col += 2 * p;
  }

  const bool grad = options.backpropagate;
  const auto post = vae.encode(images);
  Matrix<T> eps;
  const Matrix<T> z = model::reparameterize<T>(post.mean, post.logvar, rng, &eps);
  const Matrix<T> logits = vae.decode_logits(z);

  const int m = vae.latent_dims();
  Matrix<T> dlogits, dz, dmean, dlogvar;
  if (grad) {
    dlogits = Matrix<T>::Zero(logits.rows(), logits.cols());
    dz = Matrix<T>::Zero(m, n_total);
    dmean = Matrix<T>::Zero(m, n_total);
    dlogvar = Matrix<T>::Zero(m, n_total);
  }

  LossBreakdown out;
  out.reconstruction = bernoulli_cross_entropy<T>(logits, images, grad ? &dlogits : nullptr, T(1));
  out.kl = gaussian_kl<T>(post.mean, post.logvar, grad ? &dmean : nullptr, grad ? &dlogvar : nullptr,
                          static_cast<T>(weights.beta));
  out.neg_elbo = out.reconstruction + weights.beta * out.kl;

  col = n_train;
  for (const auto& fb : feedback) {
    const Eigen::Index p = fb.first.cols();
    const auto& block = vae.partition().block(fb.factor);
    Matrix<T> dza, dzb;
    if (grad) {
      dza = Matrix<T>::Zero(m, p);
      dzb = Matrix<T>::Zero(m, p);
    }
    const double v = squared_block_distance<T>(z.middleCols(col, p), z.middleCols(col + p, p), block,
                                               grad ? &dza : nullptr, grad ? &dzb : nullptr,
                                               static_cast<T>(weights.lambda_mp));
    out.mp[fb.factor] += v;
    if (grad) {
      dz.middleCols(col, p) += dza;
      dz.middleCols(col + p, p) += dzb;
    }
    col += 2 * p;
  }

  const bool use_probes = probes && n_fb > 0 && (weights.lambda_pos != 0.0 || weights.lambda_neg != 0.0);
  if (use_probes) {
    const Matrix<T> fb_codes = z.rightCols(n_fb);
    if (options.before_probes) options.before_probes(fb_codes, fb_labels);
    Matrix<T> dfb;
    if (grad) dfb = Matrix<T>::Zero(m, n_fb);
    for (const auto& e : probes->entries()) {
      const auto sel = labelled_columns(fb_labels, e.factor);
      if (sel.columns.empty()) continue;
      const Matrix<T> sub = gather_cols(fb_codes, sel.columns);
      Matrix<T> dsub;
      if (grad) dsub = Matrix<T>::Zero(m, sub.cols());
      out.cl_pos[e.factor] = probe_loss<T>(e.positive, sub, sel.labels, std::nullopt,
                                           static_cast<T>(weights.lambda_pos), grad ? &dsub : nullptr, nullptr);
      out.cl_neg[e.factor] =
          probe_loss<T>(e.negative, sub, sel.labels, std::log(static_cast<double>(e.cardinality)),
                        static_cast<T>(-weights.lambda_neg), grad ? &dsub : nullptr, nullptr);
      if (grad) {
        for (std::size_t j = 0; j < sel.columns.size(); ++j) dfb.col(sel.columns[j]) += dsub.col(j);
      }
    }
    if (grad) dz.rightCols(n_fb) += dfb;
  }
  out.total = out.recompute_total(weights);

  if (grad) {
    dz += vae.backward_decoder(dlogits);
    // z = mean + exp(logvar / 2) * eps
    dmean += dz;
    dlogvar.array() += dz.array() * eps.array() * T(0.5) * (post.logvar.array() * T(0.5)).exp();
    vae.backward_encoder(dmean, dlogvar);
  }
  return out;
}

#define DBVAE_INSTANTIATE(T)                                                                                    \
  template double bernoulli_cross_entropy<T>(const Matrix<T>&, const Matrix<T>&, Matrix<T>*, T);                \
  template double gaussian_kl<T>(const Matrix<T>&, const Matrix<T>&, Matrix<T>*, Matrix<T>*, T);                \
  template double squared_block_distance<T>(const Matrix<T>&, const Matrix<T>&, const LatentBlock&, Matrix<T>*, \
                                            Matrix<T>*, T);                                                     \
  template double softmax_cross_entropy<T>(const Matrix<T>&, std::span<const int>, Matrix<T>*, T,               \
                                           std::optional<double>);                                              \
  template NegElbo neg_elbo<T>(VaeModel<T>&, const Matrix<T>&, double, Rng&);                                   \
  template double match_pairing_loss<T>(VaeModel<T>&, const Matrix<T>&, const Matrix<T>&, const std::string&,   \
                                        Rng&, Rng&);                                                            \
  template double match_pairing_loss<T>(VaeModel<T>&, const Matrix<T>&, const Matrix<T>&, const std::string&,   \
                                        Rng&);                                                                  \
  template double match_pairing_loss_means<T>(VaeModel<T>&, const Matrix<T>&, const Matrix<T>&,                 \
                                              const std::string&);                                              \
  template ClassificationLoss classification_loss<T>(VaeModel<T>&, const ProbeBank<T>&, const Matrix<T>&,       \
                                                     const std::string&, std::span<const int>, Rng&);           \
  template ClassificationLoss classification_loss_on_codes<T>(const ProbeBank<T>&, const Matrix<T>&,            \
                                                              const std::string&, std::span<const int>);        \
  template double probe_update_loss<T>(ProbeBank<T>&, const Matrix<T>&, const LabelTable&, bool);               \
  template LossBreakdown total_loss<T>(VaeModel<T>&, const ProbeBank<T>*, const Matrix<T>&,                     \
                                       const std::vector<PairBatch<T>>&, const LossWeights&, Rng&,              \
                                       const TotalLossOptions<T>&);

DBVAE_INSTANTIATE(float)
DBVAE_INSTANTIATE(double)
#undef DBVAE_INSTANTIATE

}  // namespace dbvae::losses
