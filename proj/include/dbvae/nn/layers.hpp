#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dbvae/rng.hpp"

namespace dbvae::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

// Channels x height x width of one sample.
struct Geometry {
  int channels = 0;
  int height = 0;
  int width = 0;
  int size() const { return channels * height * width; }
  int spatial() const { return height * width; }
};

// Two activation layouts are used:
//   sample-major: (C*H*W) x B, one flattened CHW sample per column;
//   planar:       C x (B*H*W), one channel per row, columns ordered (b, y, x).
// Convolutions run on planar activations so a whole batch is one GEMM.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Matrix<T> forward(const Matrix<T>& x) = 0;
  // Accumulates parameter gradients and returns the input gradient.
  virtual Matrix<T> backward(const Matrix<T>& dy) = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(int in, int out, const std::string& name, Rng& rng);
  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> backward(const Matrix<T>& dy) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

 private:
  Parameter<T> weight_;  // out x in
  Parameter<T> bias_;    // out x 1
  Matrix<T> input_;
};

struct ConvGeometry {
  Geometry input;
  Geometry output;
  int kernel = 0;
  int stride = 1;
  int padding = 0;

  // Output spatial size of a convolution over `input`.
  static ConvGeometry make(Geometry input, int out_channels, int kernel, int stride, int padding);
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(const ConvGeometry& geom, const std::string& name, Rng& rng);
  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> backward(const Matrix<T>& dy) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

 private:
  ConvGeometry geom_;
  Parameter<T> weight_;  // out_channels x (k*k*in_channels)
  Parameter<T> bias_;
  Matrix<T> columns_;
  int batch_ = 0;
};

// Adjoint of Conv2d over `geom`: maps geom.output back to geom.input with
// `out_channels` = geom.input.channels.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(const ConvGeometry& geom, const std::string& name, Rng& rng);
  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> backward(const Matrix<T>& dy) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }

 private:
  ConvGeometry geom_;
  Parameter<T> weight_;  // in_channels(geom.output) x (k*k*geom.input.channels)
  Parameter<T> bias_;
  Matrix<T> input_;
  int batch_ = 0;
};

template <typename T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(T slope = T(0.02)) : slope_(slope) {}
  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> backward(const Matrix<T>& dy) override;

 private:
  T slope_;
  Matrix<T> input_;
};

// sample-major -> planar
template <typename T>
class ToPlanar final : public Layer<T> {
 public:
  explicit ToPlanar(Geometry g) : g_(g) {}
  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> backward(const Matrix<T>& dy) override;

 private:
  Geometry g_;
};

// planar -> sample-major
template <typename T>
class ToSampleMajor final : public Layer<T> {
 public:
  explicit ToSampleMajor(Geometry g) : g_(g) {}
  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> backward(const Matrix<T>& dy) override;

 private:
  Geometry g_;
};

template <typename T>
class Sequential {
 public:
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  Matrix<T> forward(const Matrix<T>& x);
  Matrix<T> backward(const Matrix<T>& dy);
  std::vector<Parameter<T>*> parameters();

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Layout conversions, exposed for tests.
template <typename T>
Matrix<T> to_planar(const Matrix<T>& sample_major, Geometry g);
template <typename T>
Matrix<T> to_sample_major(const Matrix<T>& planar, Geometry g);

template <typename T>
void im2col(const Matrix<T>& x, int batch, const ConvGeometry& g, Matrix<T>& columns);
template <typename T>
void col2im(const Matrix<T>& columns, int batch, const ConvGeometry& g, Matrix<T>& x);

}  // namespace dbvae::nn
