#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbvae/model/probes.hpp"
#include "dbvae/model/vae.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::losses {

using model::Matrix;

// lambda_mp weighs match pairing, lambda_pos / lambda_neg the positive and
// negative probe losses, beta the KL term.
struct LossWeights {
  double lambda_mp = 10.0;
  double lambda_pos = 10.0;
  double lambda_neg = 1.0;
  double beta = 1.0;

  static LossWeights proposed(double lambda_mp_pos = 10.0, double lambda_neg = 1.0);
  static LossWeights beta_vae(double beta);

  void validate() const;
  // lambda_mp == lambda_pos and lambda_neg in {1, 10}.
  bool in_recommended_set() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

struct LossBreakdown {
  double neg_elbo = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
  std::map<std::string, double> mp;
  std::map<std::string, double> cl_pos;
  std::map<std::string, double> cl_neg;  // clipped at ln(cardinality) per sample
  double total = 0.0;

  // neg_elbo + sum lambda_mp * mp + sum (lambda_pos * cl_pos - lambda_neg * cl_neg).
  double recompute_total(const LossWeights& w) const;
};

// --- kernels on codes / logits --------------------------------------------
// Each returns the batch-mean loss and, when the gradient pointer is given,
// accumulates `scale` times its gradient.

// Per-sample sum over pixels of Bernoulli cross-entropy with logits.
template <typename T>
double bernoulli_cross_entropy(const Matrix<T>& logits, const Matrix<T>& targets,
                               Matrix<T>* dlogits = nullptr, T scale = T(1));

// Per-sample KL(N(mean, exp(logvar)) || N(0, I)), summed over dims.
template <typename T>
double gaussian_kl(const Matrix<T>& mean, const Matrix<T>& logvar, Matrix<T>* dmean = nullptr,
                   Matrix<T>* dlogvar = nullptr, T scale = T(1));

// Mean over pairs of || first[rows] - second[rows] ||^2.
template <typename T>
double squared_block_distance(const Matrix<T>& first, const Matrix<T>& second, const model::LatentBlock& block,
                              Matrix<T>* dfirst = nullptr, Matrix<T>* dsecond = nullptr,
                              T scale = T(1));

// Softmax cross-entropy; per-sample values above `clip` are capped and pass
// no gradient.
template <typename T>
double softmax_cross_entropy(const Matrix<T>& logits, std::span<const int> labels,
                             Matrix<T>* dlogits = nullptr, T scale = T(1),
                             std::optional<double> clip = std::nullopt);

// --- losses on the model ----------------------------------------------------

struct NegElbo {
  double value = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

template <typename T>
NegElbo neg_elbo(model::VaeModel<T>& vae, const Matrix<T>& images, double beta, Rng& rng);

// Codes of both sides are sampled from the posterior, the first with rng_a
// and the second with rng_b.
template <typename T>
double match_pairing_loss(model::VaeModel<T>& vae, const Matrix<T>& first, const Matrix<T>& second,
                          const std::string& factor, Rng& rng_a, Rng& rng_b);
template <typename T>
double match_pairing_loss(model::VaeModel<T>& vae, const Matrix<T>& first, const Matrix<T>& second,
                          const std::string& factor, Rng& rng);
// Deterministic-encoder variant on posterior means.
template <typename T>
double match_pairing_loss_means(model::VaeModel<T>& vae, const Matrix<T>& first,
                                const Matrix<T>& second, const std::string& factor);

struct ClassificationLoss {
  double positive = 0.0;
  double negative = 0.0;  // clipped
};

// Probe cross-entropies on sampled codes for labelled images.
template <typename T>
ClassificationLoss classification_loss(model::VaeModel<T>& vae, const model::ProbeBank<T>& probes,
                                       const Matrix<T>& images, const std::string& factor,
                                       std::span<const int> labels, Rng& rng);

// Same on given codes.
template <typename T>
ClassificationLoss classification_loss_on_codes(const model::ProbeBank<T>& probes, const Matrix<T>& codes,
                                                const std::string& factor, std::span<const int> labels);

// Labels per factor for the columns of a code matrix; -1 marks unknown.
using LabelTable = std::map<std::string, std::vector<int>>;

// Sum over factors of positive + negative probe cross-entropy on detached
// codes. Accumulates gradients into the probe parameters only.
template <typename T>
double probe_update_loss(model::ProbeBank<T>& probes, const Matrix<T>& codes, const LabelTable& labels,
                         bool accumulate_gradients = true);

// Match pairs sharing `factor`; labels cover any factor known for a member.
template <typename T>
struct PairBatch {
  std::string factor;
  Matrix<T> first;
  Matrix<T> second;
  LabelTable first_labels;
  LabelTable second_labels;
};

template <typename T>
struct TotalLossOptions {
  bool backpropagate = false;
  // Runs on the detached sampled codes of all feedback columns before any
  // probe is evaluated; the trainer updates the probes here.
  std::function<void(const Matrix<T>& codes, const LabelTable& labels)> before_probes;
};

// Full objective over one train batch plus feedback pair batches. Without
// feedback (or with all lambdas zero) the total equals -ELBO. Probes are
// evaluated only when `probes` is given and a probe weight is nonzero.
template <typename T>
LossBreakdown total_loss(model::VaeModel<T>& vae, const model::ProbeBank<T>* probes,
                         const Matrix<T>& train_images, const std::vector<PairBatch<T>>& feedback,
                         const LossWeights& weights, Rng& rng, const TotalLossOptions<T>& options = {});

}  // namespace dbvae::losses
