#include "dbvae/nn/layers.hpp"

#include <cmath>

#include "dbvae/error.hpp"

namespace dbvae::nn {
namespace {

template <typename T>
void init_uniform(Matrix<T>& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <typename T>
Parameter<T> make_param(const std::string& name, int rows, int cols) {
  return {name, Matrix<T>::Zero(rows, cols), Matrix<T>::Zero(rows, cols)};
}

void check_rows(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + ": expected " + std::to_string(want) +
                                                 " rows, got " + std::to_string(got));
  }
}

}  // namespace

ConvGeometry ConvGeometry::make(Geometry input, int out_channels, int kernel, int stride, int padding) {
  ConvGeometry g;
  g.input = input;
  g.kernel = kernel;
  g.stride = stride;
  g.padding = padding;
  g.output.channels = out_channels;
  g.output.height = (input.height + 2 * padding - kernel) / stride + 1;
  g.output.width = (input.width + 2 * padding - kernel) / stride + 1;
  require(g.output.height > 0 && g.output.width > 0, "convolution output is empty");
  return g;
}

template <typename T>
Linear<T>::Linear(int in, int out, const std::string& name, Rng& rng)
    : weight_(make_param<T>(name + ".weight", out, in)), bias_(make_param<T>(name + ".bias", out, 1)) {
  init_uniform(weight_.value, std::sqrt(6.0 / in), rng);
  init_uniform(bias_.value, 1.0 / std::sqrt(in), rng);
}

template <typename T>
Matrix<T> Linear<T>::forward(const Matrix<T>& x) {
  check_rows(x.rows(), weight_.value.cols(), "Linear");
  input_ = x;
  Matrix<T> y = weight_.value * x;
  y.colwise() += bias_.value.col(0);
  return y;
}

template <typename T>
Matrix<T> Linear<T>::backward(const Matrix<T>& dy) {
  weight_.grad.noalias() += dy * input_.transpose();
  bias_.grad += dy.rowwise().sum();
  return weight_.value.transpose() * dy;
}

template <typename T>
void im2col(const Matrix<T>& x, int batch, const ConvGeometry& g, Matrix<T>& columns) {
  const int c = g.input.channels, k = g.kernel;
  const int ih = g.input.height, iw = g.input.width;
  const int oh = g.output.height, ow = g.output.width;
  columns.setZero(static_cast<Eigen::Index>(k) * k * c, static_cast<Eigen::Index>(batch) * oh * ow);
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < oh; ++y) {
      for (int xo = 0; xo < ow; ++xo) {
        const Eigen::Index n = (static_cast<Eigen::Index>(b) * oh + y) * ow + xo;
        T* dst = columns.col(n).data();
        for (int ki = 0; ki < k; ++ki) {
          const int sy = y * g.stride - g.padding + ki;
          if (sy < 0 || sy >= ih) continue;
          for (int kj = 0; kj < k; ++kj) {
            const int sx = xo * g.stride - g.padding + kj;
            if (sx < 0 || sx >= iw) continue;
            const T* src = x.col((static_cast<Eigen::Index>(b) * ih + sy) * iw + sx).data();
            std::copy(src, src + c, dst + (ki * k + kj) * c);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const Matrix<T>& columns, int batch, const ConvGeometry& g, Matrix<T>& x) {
  const int c = g.input.channels, k = g.kernel;
  const int ih = g.input.height, iw = g.input.width;
  const int oh = g.output.height, ow = g.output.width;
  x.setZero(c, static_cast<Eigen::Index>(batch) * ih * iw);
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < oh; ++y) {
      for (int xo = 0; xo < ow; ++xo) {
        const Eigen::Index n = (static_cast<Eigen::Index>(b) * oh + y) * ow + xo;
        const T* src = columns.col(n).data();
        for (int ki = 0; ki < k; ++ki) {
          const int sy = y * g.stride - g.padding + ki;
          if (sy < 0 || sy >= ih) continue;
          for (int kj = 0; kj < k; ++kj) {
            const int sx = xo * g.stride - g.padding + kj;
            if (sx < 0 || sx >= iw) continue;
            T* dst = x.col((static_cast<Eigen::Index>(b) * ih + sy) * iw + sx).data();
            const T* s = src + (ki * k + kj) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += s[ch];
          }
        }
      }
    }
  }
}

template <typename T>
Conv2d<T>::Conv2d(const ConvGeometry& geom, const std::string& name, Rng& rng)
    : geom_(geom),
      weight_(make_param<T>(name + ".weight", geom.output.channels,
                            geom.kernel * geom.kernel * geom.input.channels)),
      bias_(make_param<T>(name + ".bias", geom.output.channels, 1)) {
  const int fan_in = geom.kernel * geom.kernel * geom.input.channels;
  init_uniform(weight_.value, std::sqrt(6.0 / fan_in), rng);
  init_uniform(bias_.value, 1.0 / std::sqrt(fan_in), rng);
}

template <typename T>
Matrix<T> Conv2d<T>::forward(const Matrix<T>& x) {
  check_rows(x.rows(), geom_.input.channels, "Conv2d");
  batch_ = static_cast<int>(x.cols() / geom_.input.spatial());
  im2col(x, batch_, geom_, columns_);
  Matrix<T> y = weight_.value * columns_;
  y.colwise() += bias_.value.col(0);
  return y;
}

template <typename T>
Matrix<T> Conv2d<T>::backward(const Matrix<T>& dy) {
  weight_.grad.noalias() += dy * columns_.transpose();
  bias_.grad += dy.rowwise().sum();
  const Matrix<T> dcols = weight_.value.transpose() * dy;
  Matrix<T> dx;
  col2im(dcols, batch_, geom_, dx);
  return dx;
}

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(const ConvGeometry& geom, const std::string& name, Rng& rng)
    : geom_(geom),
      weight_(make_param<T>(name + ".weight", geom.output.channels,
                            geom.kernel * geom.kernel * geom.input.channels)),
      bias_(make_param<T>(name + ".bias", geom.input.channels, 1)) {
  // Each output pixel receives about (k/stride)^2 * in_channels terms.
  const double taps = std::max(1.0, static_cast<double>(geom.kernel * geom.kernel) /
                                        (geom.stride * geom.stride));
  const double fan_in = taps * geom.output.channels;
  init_uniform(weight_.value, std::sqrt(6.0 / fan_in), rng);
  init_uniform(bias_.value, 1.0 / std::sqrt(fan_in), rng);
}

template <typename T>
Matrix<T> ConvTranspose2d<T>::forward(const Matrix<T>& x) {
  check_rows(x.rows(), geom_.output.channels, "ConvTranspose2d");
  batch_ = static_cast<int>(x.cols() / geom_.output.spatial());
  input_ = x;
  const Matrix<T> cols = weight_.value.transpose() * x;
  Matrix<T> y;
  col2im(cols, batch_, geom_, y);
  y.colwise() += bias_.value.col(0);
  return y;
}

template <typename T>
Matrix<T> ConvTranspose2d<T>::backward(const Matrix<T>& dy) {
  Matrix<T> dcols;
  im2col(dy, batch_, geom_, dcols);
  weight_.grad.noalias() += input_ * dcols.transpose();
  bias_.grad += dy.rowwise().sum();
  return weight_.value * dcols;
}

template <typename T>
Matrix<T> LeakyRelu<T>::forward(const Matrix<T>& x) {
  input_ = x;
  const T s = slope_;
  return x.unaryExpr([s](T v) { return v > T(0) ? v : s * v; });
}

template <typename T>
Matrix<T> LeakyRelu<T>::backward(const Matrix<T>& dy) {
  const T s = slope_;
  return dy.binaryExpr(input_, [s](T g, T v) { return v > T(0) ? g : s * g; });
}

template <typename T>
Matrix<T> to_planar(const Matrix<T>& x, Geometry g) {
  check_rows(x.rows(), g.size(), "to_planar");
  const Eigen::Index batch = x.cols();
  const int hw = g.spatial();
  Matrix<T> y(g.channels, batch * hw);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < g.channels; ++c) {
      for (int p = 0; p < hw; ++p) y(c, b * hw + p) = x(static_cast<Eigen::Index>(c) * hw + p, b);
    }
  }
  return y;
}

template <typename T>
Matrix<T> to_sample_major(const Matrix<T>& x, Geometry g) {
  check_rows(x.rows(), g.channels, "to_sample_major");
  const int hw = g.spatial();
  const Eigen::Index batch = x.cols() / hw;
  Matrix<T> y(g.size(), batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < g.channels; ++c) {
      for (int p = 0; p < hw; ++p) y(static_cast<Eigen::Index>(c) * hw + p, b) = x(c, b * hw + p);
    }
  }
  return y;
}

template <typename T>
Matrix<T> ToPlanar<T>::forward(const Matrix<T>& x) {
  return to_planar(x, g_);
}
template <typename T>
Matrix<T> ToPlanar<T>::backward(const Matrix<T>& dy) {
  return to_sample_major(dy, g_);
}
template <typename T>
Matrix<T> ToSampleMajor<T>::forward(const Matrix<T>& x) {
  return to_sample_major(x, g_);
}
template <typename T>
Matrix<T> ToSampleMajor<T>::backward(const Matrix<T>& dy) {
  return to_planar(dy, g_);
}

template <typename T>
Matrix<T> Sequential<T>::forward(const Matrix<T>& x) {
  Matrix<T> h = x;
  for (auto& layer : layers_) h = layer->forward(h);
  return h;
}

template <typename T>
Matrix<T> Sequential<T>::backward(const Matrix<T>& dy) {
  Matrix<T> g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& layer : layers_) {
    for (auto* p : layer->parameters()) out.push_back(p);
  }
  return out;
}

#define DBVAE_INSTANTIATE(T)                                                              \
  template class Linear<T>;                                                               \
  template class Conv2d<T>;                                                               \
  template class ConvTranspose2d<T>;                                                      \
  template class LeakyRelu<T>;                                                            \
  template class ToPlanar<T>;                                                             \
  template class ToSampleMajor<T>;                                                        \
  template class Sequential<T>;                                                           \
  template Matrix<T> to_planar<T>(const Matrix<T>&, Geometry);                            \
  template Matrix<T> to_sample_major<T>(const Matrix<T>&, Geometry);                      \
  template void im2col<T>(const Matrix<T>&, int, const ConvGeometry&, Matrix<T>&);        \
  template void col2im<T>(const Matrix<T>&, int, const ConvGeometry&, Matrix<T>&);

DBVAE_INSTANTIATE(float)
DBVAE_INSTANTIATE(double)
#undef DBVAE_INSTANTIATE

}  // namespace dbvae::nn
