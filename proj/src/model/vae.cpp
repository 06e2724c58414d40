#include "dbvae/model/vae.hpp"

#include <algorithm>
#include <cmath>

#include "dbvae/error.hpp"

namespace dbvae::model {

using datasets::Family;

Architecture Architecture::preset(Family family) {
  Architecture a;
  switch (family) {
    case Family::kGlyphs10:
      a.input = {28, 28, 3};
      a.conv = {{16, 4, 2, 1}, {32, 4, 2, 1}, {32, 3, 2, 1}, {64, 4, 1, 0}};
      a.hidden = 0;
      a.latent_dims = 16;
      break;
    case Family::kSprites:
      a.input = {64, 64, 3};
      a.conv = {{16, 4, 2, 1}, {32, 4, 2, 1}, {32, 4, 2, 1}, {64, 4, 2, 1}};
      a.hidden = 128;
      a.latent_dims = 20;
      break;
    case Family::kScene:
      a.input = {64, 64, 3};
      a.conv = {{16, 4, 2, 1}, {32, 4, 2, 1}, {32, 4, 2, 1}, {64, 4, 2, 1}};
      a.hidden = 128;
      a.latent_dims = 50;
      break;
  }
  return a;
}

void to_json(nlohmann::json& j, const Architecture& a) {
  nlohmann::json conv = nlohmann::json::array();
  for (const auto& c : a.conv) conv.push_back({c.channels, c.kernel, c.stride, c.padding});
  j = {{"input", {a.input.height, a.input.width, a.input.channels}},
       {"conv", conv},
       {"hidden", a.hidden},
       {"latent_dims", a.latent_dims}};
}

void from_json(const nlohmann::json& j, Architecture& a) {
  const auto& in = j.at("input");
  a.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
  a.conv.clear();
  for (const auto& c : j.at("conv")) {
    a.conv.push_back({c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>(), c.at(3).get<int>()});
  }
  a.hidden = j.at("hidden").get<int>();
  a.latent_dims = j.at("latent_dims").get<int>();
}

LatentPartition default_partition(const datasets::FactorSpec& spec, int latent_dims) {
  return LatentPartition::contiguous(latent_dims, spec.target_names(), 4);
}

template <typename T>
VaeModel<T>::VaeModel(Architecture arch, LatentPartition partition, std::uint64_t init_seed)
    : arch_(std::move(arch)), partition_(std::move(partition)) {
  require(partition_.total_dims() == arch_.latent_dims, "partition does not match latent dims");
  require(!arch_.conv.empty(), "architecture needs at least one conv layer");
  Rng rng(init_seed);
  const int m = arch_.latent_dims;

  std::vector<nn::ConvGeometry> geoms;
  nn::Geometry g{arch_.input.channels, arch_.input.height, arch_.input.width};
  const nn::Geometry image_geom = g;
  for (const auto& c : arch_.conv) {
    geoms.push_back(nn::ConvGeometry::make(g, c.channels, c.kernel, c.stride, c.padding));
    g = geoms.back().output;
  }
  const nn::Geometry top = g;

  encoder_.add(std::make_unique<nn::ToPlanar<T>>(image_geom));
  for (std::size_t i = 0; i < geoms.size(); ++i) {
    encoder_.add(std::make_unique<nn::Conv2d<T>>(geoms[i], "enc.conv" + std::to_string(i), rng));
    encoder_.add(std::make_unique<nn::LeakyRelu<T>>());
  }
  encoder_.add(std::make_unique<nn::ToSampleMajor<T>>(top));
  int width = top.size();
  if (arch_.hidden > 0) {
    encoder_.add(std::make_unique<nn::Linear<T>>(width, arch_.hidden, "enc.fc", rng));
    encoder_.add(std::make_unique<nn::LeakyRelu<T>>());
    width = arch_.hidden;
  }
  encoder_.add(std::make_unique<nn::Linear<T>>(width, 2 * m, "enc.head", rng));

  int dec_width = m;
  if (arch_.hidden > 0) {
    decoder_.add(std::make_unique<nn::Linear<T>>(m, arch_.hidden, "dec.fc", rng));
    decoder_.add(std::make_unique<nn::LeakyRelu<T>>());
    dec_width = arch_.hidden;
  }
  decoder_.add(std::make_unique<nn::Linear<T>>(dec_width, top.size(), "dec.head", rng));
  decoder_.add(std::make_unique<nn::LeakyRelu<T>>());
  decoder_.add(std::make_unique<nn::ToPlanar<T>>(top));
  for (std::size_t i = geoms.size(); i-- > 0;) {
    decoder_.add(std::make_unique<nn::ConvTranspose2d<T>>(geoms[i], "dec.deconv" + std::to_string(i), rng));
    if (i > 0) decoder_.add(std::make_unique<nn::LeakyRelu<T>>());
  }
  decoder_.add(std::make_unique<nn::ToSampleMajor<T>>(image_geom));
}

template <typename T>
void VaeModel<T>::check_images(const Matrix<T>& images) const {
  if (images.rows() != arch_.input.pixels() || images.cols() < 1) {
    throw Error(ErrorKind::kInvalidArgument, "encode: expected " + std::to_string(arch_.input.pixels()) +
                                                 " x B images, got " + std::to_string(images.rows()) +
                                                 " x " + std::to_string(images.cols()));
  }
}

template <typename T>
typename VaeModel<T>::Posterior VaeModel<T>::encode(const Matrix<T>& images) {
  check_images(images);
  const Matrix<T> head = encoder_.forward(images);
  const int m = arch_.latent_dims;
  raw_logvar_ = head.bottomRows(m);
  Posterior post;
  post.mean = head.topRows(m);
  post.logvar = raw_logvar_.cwiseMax(T(kLogvarMin)).cwiseMin(T(kLogvarMax));
  return post;
}

template <typename T>
void VaeModel<T>::backward_encoder(const Matrix<T>& dmean, const Matrix<T>& dlogvar) {
  const int m = arch_.latent_dims;
  Matrix<T> dhead(2 * m, dmean.cols());
  dhead.topRows(m) = dmean;
  dhead.bottomRows(m) = dlogvar.binaryExpr(raw_logvar_, [](T g, T raw) {
    return (raw < T(kLogvarMin) || raw > T(kLogvarMax)) ? T(0) : g;
  });
  encoder_.backward(dhead);
}

template <typename T>
Matrix<T> VaeModel<T>::decode_logits(const Matrix<T>& codes) {
  if (codes.rows() != arch_.latent_dims || codes.cols() < 1) {
    throw Error(ErrorKind::kInvalidArgument, "decode: expected " + std::to_string(arch_.latent_dims) +
                                                 " x B codes, got " + std::to_string(codes.rows()) +
                                                 " x " + std::to_string(codes.cols()));
  }
  return decoder_.forward(codes);
}

template <typename T>
Matrix<T> VaeModel<T>::decode(const Matrix<T>& codes) {
  static constexpr T kEdge = T(1e-6);
  return decode_logits(codes).unaryExpr([](T v) {
    const T p = T(1) / (T(1) + std::exp(-v));
    return std::min(std::max(p, kEdge), T(1) - kEdge);
  });
}

template <typename T>
Matrix<T> VaeModel<T>::backward_decoder(const Matrix<T>& dlogits) {
  return decoder_.backward(dlogits);
}

template <typename T>
std::vector<nn::Parameter<T>*> VaeModel<T>::parameters() {
  auto out = encoder_.parameters();
  for (auto* p : decoder_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
void VaeModel<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.setZero();
}

template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mean, const Matrix<T>& logvar, Rng& rng, Matrix<T>* noise) {
  require(mean.rows() == logvar.rows() && mean.cols() == logvar.cols(),
          "reparameterize: mean and logvar shapes differ");
  Matrix<T> eps(mean.rows(), mean.cols());
  for (Eigen::Index j = 0; j < eps.cols(); ++j) {
    for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = static_cast<T>(rng.normal());
  }
  Matrix<T> z = mean + ((logvar.array() * T(0.5)).exp() * eps.array()).matrix();
  if (noise) *noise = std::move(eps);
  return z;
}

template <typename T>
Matrix<T> image_batch(const datasets::Dataset& ds, std::span<const int> rows) {
  const auto& d = ds.spec.dims;
  const int hw = d.height * d.width;
  Matrix<T> out(d.pixels(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t b = 0; b < rows.size(); ++b) {
    require(rows[b] >= 0 && rows[b] < ds.size, "image_batch: row out of range");
    const auto img = ds.image(rows[b]);
    for (int p = 0; p < hw; ++p) {
      for (int c = 0; c < d.channels; ++c) {
        out(static_cast<Eigen::Index>(c) * hw + p, b) = static_cast<T>(img[p * d.channels + c]) / T(255);
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> to_bytes(const Eigen::VectorXf& probabilities, datasets::ImageDims dims) {
  const int hw = dims.height * dims.width;
  std::vector<std::uint8_t> out(dims.pixels());
  for (int p = 0; p < hw; ++p) {
    for (int c = 0; c < dims.channels; ++c) {
      const float v = probabilities(c * hw + p);
      out[p * dims.channels + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }
  }
  return out;
}

template class VaeModel<float>;
template class VaeModel<double>;
template Matrix<float> reparameterize<float>(const Matrix<float>&, const Matrix<float>&, Rng&, Matrix<float>*);
template Matrix<double> reparameterize<double>(const Matrix<double>&, const Matrix<double>&, Rng&, Matrix<double>*);
template Matrix<float> image_batch<float>(const datasets::Dataset&, std::span<const int>);
template Matrix<double> image_batch<double>(const datasets::Dataset&, std::span<const int>);

}  // namespace dbvae::model
