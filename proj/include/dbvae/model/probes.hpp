#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbvae/model/partition.hpp"
#include "dbvae/nn/layers.hpp"

namespace dbvae::model {

// Softmax-linear classifier on a fixed subset of latent rows.
template <typename T>
struct LinearProbe {
  std::vector<int> inputs;  // latent rows read by the probe
  nn::Parameter<T> weight;  // classes x |inputs|
  nn::Parameter<T> bias;    // classes x 1

  int classes() const { return static_cast<int>(weight.value.rows()); }
  // Class logits for codes (m x B); probe parameters are read, never written.
  Matrix<T> logits(const Matrix<T>& codes) const;
};

// Per target factor: a positive probe on the factor's block and a negative
// probe on every other latent dimension.
template <typename T>
class ProbeBank {
 public:
  struct Entry {
    std::string factor;
    int cardinality = 0;
    LinearProbe<T> positive;
    LinearProbe<T> negative;
  };

  ProbeBank(const LatentPartition& partition,
            const std::vector<std::pair<std::string, int>>& factor_cardinalities, std::uint64_t seed);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  // Throws kInvalidArgument for a factor without probes.
  const Entry& entry(const std::string& factor) const;
  Entry& entry(const std::string& factor);

  std::vector<nn::Parameter<T>*> parameters();
  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

}  // namespace dbvae::model
