#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dbvae/model/vae.hpp"
#include "dbvae/nn/layers.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::test_support {

using model::Matrix;

inline Matrix<double> random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix<double> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

// 12x12x3 images, 6 latent dims: shape [0,2), color [2,4), nuisance [4,6).
inline model::Architecture small_arch() {
  model::Architecture a;
  a.input = {12, 12, 3};
  a.conv = {{4, 4, 2, 1}, {6, 3, 2, 1}};
  a.hidden = 10;
  a.latent_dims = 6;
  return a;
}

inline model::LatentPartition small_partition() {
  return model::LatentPartition(6, {{"shape", 0, 2}, {"color", 2, 4}});
}

inline Matrix<double> random_images(int batch, Rng& rng) {
  Matrix<double> x(12 * 12 * 3, batch);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = rng.uniform();
  }
  return x;
}

// Central differences at `picks` random coordinates against the gradients
// already accumulated in `params`.
inline void expect_gradients_match(const std::vector<nn::Parameter<double>*>& params,
                                   const std::function<double()>& loss, int picks, double step, double rel_tol,
                                   Rng& rng) {
  for (int n = 0; n < picks; ++n) {
    auto* p = params[rng.uniform_int(static_cast<int>(params.size()))];
    const int i = rng.uniform_int(static_cast<int>(p->value.size()));
    const double analytic = p->grad.data()[i];
    const double saved = p->value.data()[i];
    p->value.data()[i] = saved + step;
    const double up = loss();
    p->value.data()[i] = saved - step;
    const double down = loss();
    p->value.data()[i] = saved;
    const double numeric = (up - down) / (2 * step);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    EXPECT_LE(std::abs(analytic - numeric) / scale, rel_tol)
        << p->name << "[" << i << "] analytic " << analytic << " numeric " << numeric;
  }
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dbvae_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dbvae::test_support
