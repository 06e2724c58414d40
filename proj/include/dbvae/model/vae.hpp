#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "dbvae/datasets/dataset.hpp"
#include "dbvae/model/partition.hpp"
#include "dbvae/nn/layers.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::model {

struct ConvLayerSpec {
  int channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

// Encoder: the conv stack, an optional hidden fully connected layer, then a
// linear head producing mean and log-variance. The decoder mirrors it with
// transposed convolutions.
struct Architecture {
  datasets::ImageDims input;
  std::vector<ConvLayerSpec> conv;
  int hidden = 0;
  int latent_dims = 16;

  static Architecture preset(datasets::Family family);
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

void to_json(nlohmann::json& j, const Architecture& a);
void from_json(const nlohmann::json& j, Architecture& a);

// Default partition for a family: 4 dims per target factor, rest nuisance.
LatentPartition default_partition(const datasets::FactorSpec& spec, int latent_dims);

inline constexpr double kLogvarMin = -8.0;
inline constexpr double kLogvarMax = 8.0;

// Convolutional VAE with diagonal Gaussian posterior and per-pixel Bernoulli
// decoder. Codes and images are column-per-sample matrices: images are
// (C*H*W) x B in [0, 1], codes are m x B.
template <typename T>
class VaeModel {
 public:
  static constexpr const char* kVersionTag = "dbvae-vae-v1";

  struct Posterior {
    Matrix<T> mean;
    Matrix<T> logvar;  // clamped to [kLogvarMin, kLogvarMax]
  };

  VaeModel(Architecture arch, LatentPartition partition, std::uint64_t init_seed);
  VaeModel(const VaeModel&) = delete;
  VaeModel& operator=(const VaeModel&) = delete;

  // Forward passes cache activations; each backward_* call consumes the
  // most recent matching forward pass.
  Posterior encode(const Matrix<T>& images);
  void backward_encoder(const Matrix<T>& dmean, const Matrix<T>& dlogvar);

  Matrix<T> decode_logits(const Matrix<T>& codes);
  Matrix<T> decode(const Matrix<T>& codes);
  // Returns the gradient with respect to the decoded codes.
  Matrix<T> backward_decoder(const Matrix<T>& dlogits);

  std::vector<nn::Parameter<T>*> parameters();
  std::vector<nn::Parameter<T>*> encoder_parameters() { return encoder_.parameters(); }
  std::vector<nn::Parameter<T>*> decoder_parameters() { return decoder_.parameters(); }
  void zero_grad();

  const Architecture& architecture() const { return arch_; }
  const LatentPartition& partition() const { return partition_; }
  int latent_dims() const { return arch_.latent_dims; }
  int image_size() const { return arch_.input.pixels(); }

 private:
  void check_images(const Matrix<T>& images) const;

  Architecture arch_;
  LatentPartition partition_;
  nn::Sequential<T> encoder_;
  nn::Sequential<T> decoder_;
  Matrix<T> raw_logvar_;
};

// z = mean + exp(logvar / 2) * eps, eps ~ N(0, I) drawn column by column.
template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mean, const Matrix<T>& logvar, Rng& rng,
                         Matrix<T>* noise = nullptr);

// Selected rows of a dataset as a normalized image matrix.
template <typename T>
Matrix<T> image_batch(const datasets::Dataset& ds, std::span<const int> rows);

// Probabilities (C*H*W) x 1 back to interleaved bytes.
std::vector<std::uint8_t> to_bytes(const Eigen::VectorXf& probabilities, datasets::ImageDims dims);

}  // namespace dbvae::model
