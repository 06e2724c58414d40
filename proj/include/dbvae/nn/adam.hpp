#pragma once

#include <string>
#include <vector>

#include "dbvae/nn/layers.hpp"

namespace dbvae::nn {

template <typename T>
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam(std::vector<Parameter<T>*> params, Options options);

  void zero_grad();
  // Applies one update from the accumulated gradients.
  void step();

  long steps() const { return steps_; }
  const Options& options() const { return options_; }

  // Moment buffers, named "<param>.m" / "<param>.v", for checkpoints.
  std::vector<std::pair<std::string, const Matrix<T>*>> state() const;
  void load_state(const std::vector<std::pair<std::string, Matrix<T>>>& moments, long steps);

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<Matrix<T>> first_;
  std::vector<Matrix<T>> second_;
  Options options_;
  long steps_ = 0;
};

}  // namespace dbvae::nn
