#include "dbvae/evalgen/evalgen.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dbvae/error.hpp"

namespace dbvae::evalgen {
namespace fs = std::filesystem;
using nlohmann::json;

Image Image::blank(int width, int height) {
  require(width >= 0 && height >= 0, "image: negative size");
  return {width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3, 0)};
}

Image Image::from_bytes(std::vector<std::uint8_t> hwc, datasets::ImageDims dims) {
  require(dims.channels == 3, "image: only RGB rasters are supported");
  require(static_cast<int>(hwc.size()) == dims.pixels(), "image: byte count does not match dims");
  return {dims.width, dims.height, std::move(hwc)};
}

Image tile_grid(const std::vector<Image>& tiles, int columns, int gap) {
  require(!tiles.empty() && columns >= 1 && gap >= 0, "tile_grid: needs tiles and a positive column count");
  const int w = tiles[0].width, h = tiles[0].height;
  for (const auto& t : tiles) require(t.width == w && t.height == h, "tile_grid: tiles differ in size");
  const int cols = std::min(columns, static_cast<int>(tiles.size()));
  const int rows = (static_cast<int>(tiles.size()) + columns - 1) / columns;
  Image out = Image::blank(cols * w + (cols - 1) * gap, rows * h + (rows - 1) * gap);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const int x0 = static_cast<int>(i) % columns * (w + gap);
    const int y0 = static_cast<int>(i) / columns * (h + gap);
    for (int y = 0; y < h; ++y) {
      std::copy_n(tiles[i].pixels.begin() + static_cast<std::ptrdiff_t>(y) * w * 3, w * 3,
                  out.pixels.begin() + (static_cast<std::ptrdiff_t>(y0 + y) * out.width + x0) * 3);
    }
  }
  return out;
}

void write_png(const Image& image, const fs::path& path) {
  require(image.width > 0 && image.height > 0, "write_png: empty image");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorKind::kIo, "write_png " + path.string() + ": " + msg);
  }
}

Image read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error(ErrorKind::kFormat, "read_png " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image out = Image::blank(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorKind::kFormat, "read_png " + path.string() + ": " + msg);
  }
  return out;
}

void write_artifact(const Image& image, const json& sidecar, const fs::path& stem) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  write_png(image, fs::path(stem).concat(".png"));
  std::ofstream out(fs::path(stem).concat(".json"));
  out << sidecar.dump(2) << "\n";
  if (!out) throw Error(ErrorKind::kIo, "cannot write sidecar for " + stem.string());
}

int dominant_palette_index(const Image& image, std::span<const datasets::Rgb> palette, double threshold) {
  double r = 0, g = 0, b = 0;
  long n = 0;
  for (std::size_t p = 0; p + 2 < image.pixels.size(); p += 3) {
    const auto* px = &image.pixels[p];
    if (std::max({px[0], px[1], px[2]}) > threshold * 255.0) {
      r += px[0];
      g += px[1];
      b += px[2];
      ++n;
    }
  }
  if (n == 0) return -1;
  return datasets::nearest_palette_index(palette, r / n, g / n, b / n);
}

std::vector<int> representatives(const datasets::Dataset& data, const std::string& factor) {
  const int f = data.spec.index_of(factor);
  const int card = data.spec.factors[f].cardinality;
  std::vector<int> rows(card, -1);
  for (int r = 0; r < data.size; ++r) {
    int& slot = rows[data.factor(r, f)];
    if (slot < 0) slot = r;
  }
  for (int v = 0; v < card; ++v) {
    require(rows[v] >= 0, "representatives: no row with " + factor + "=" + std::to_string(v));
  }
  return rows;
}

namespace {

Image decode_image(model::VaeModel<float>& vae, const Eigen::VectorXf& z, datasets::ImageDims dims) {
  const model::Matrix<float> zm = z;
  return Image::from_bytes(model::to_bytes(vae.decode(zm).col(0), dims), dims);
}

Image dataset_image(const datasets::Dataset& data, int row) {
  const auto bytes = data.image(row);
  return Image::from_bytes({bytes.begin(), bytes.end()}, data.spec.dims);
}

model::Matrix<float> posterior_means(model::VaeModel<float>& vae, const datasets::Dataset& data,
                                     const std::vector<int>& rows) {
  return vae.encode(model::image_batch<float>(data, rows)).mean;
}

}  // namespace

ReconstructionGrid reconstruction_grid(model::VaeModel<float>& vae, const datasets::Dataset& data,
                                       const std::vector<int>& rows) {
  require(!rows.empty(), "reconstruction_grid: no rows");
  const auto means = posterior_means(vae, data, rows);
  ReconstructionGrid g;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    g.originals.push_back(dataset_image(data, rows[i]));
    g.reconstructions.push_back(decode_image(vae, means.col(static_cast<Eigen::Index>(i)), data.spec.dims));
  }
  std::vector<Image> tiles = g.originals;
  tiles.insert(tiles.end(), g.reconstructions.begin(), g.reconstructions.end());
  g.image = tile_grid(tiles, static_cast<int>(rows.size()));
  g.sidecar = {{"kind", "reconstruction_grid"}, {"dataset", data.id()}, {"rows", rows},
               {"layout", "top: originals, bottom: decoded posterior means"}};
  return g;
}

Eigen::VectorXf hybrid_latent(const model::LatentPartition& partition, const Eigen::VectorXf& a,
                              const Eigen::VectorXf& b, const std::string& first_factor,
                              const std::string& second_factor) {
  require(a.size() == partition.total_dims() && b.size() == a.size(), "hybrid_latent: code width mismatch");
  require(first_factor != second_factor, "hybrid_latent: factors must differ");
  Eigen::VectorXf z = 0.5f * (a + b);
  const auto& fa = partition.block(first_factor);
  const auto& fb = partition.block(second_factor);
  z.segment(fa.begin, fa.size()) = a.segment(fa.begin, fa.size());
  z.segment(fb.begin, fb.size()) = b.segment(fb.begin, fb.size());
  return z;
}

Image hybridize(model::VaeModel<float>& vae, const datasets::Dataset& data, int shape_row, int color_row,
                const std::string& shape_factor, const std::string& color_factor) {
  const auto means = posterior_means(vae, data, {shape_row, color_row});
  return decode_image(vae, hybrid_latent(vae.partition(), means.col(0), means.col(1), shape_factor, color_factor),
                      data.spec.dims);
}

HybridGrid hybrid_grid(model::VaeModel<float>& vae, const datasets::Dataset& data,
                       const std::vector<int>& shape_rows, const std::vector<int>& color_rows,
                       const std::string& shape_factor, const std::string& color_factor) {
  require(!shape_rows.empty() && !color_rows.empty(), "hybrid_grid: needs source rows");
  const auto s_means = posterior_means(vae, data, shape_rows);
  const auto c_means = posterior_means(vae, data, color_rows);
  const auto palette = datasets::color_palette(data.spec);
  const int cf = data.spec.index_of(color_factor);
  HybridGrid g;
  std::vector<Image> tiles;
  for (std::size_t i = 0; i < shape_rows.size(); ++i) {
    g.cells.emplace_back();
    g.intended_color.emplace_back();
    g.recovered_color.emplace_back();
    for (std::size_t j = 0; j < color_rows.size(); ++j) {
      const auto z = hybrid_latent(vae.partition(), s_means.col(static_cast<Eigen::Index>(i)),
                                   c_means.col(static_cast<Eigen::Index>(j)), shape_factor, color_factor);
      Image cell = decode_image(vae, z, data.spec.dims);
      const int intended = data.factor(color_rows[j], cf);
      const int recovered = dominant_palette_index(cell, palette);
      g.intended_color.back().push_back(intended);
      g.recovered_color.back().push_back(recovered);
      g.correct += intended == recovered;
      ++g.total;
      tiles.push_back(cell);
      g.cells.back().push_back(std::move(cell));
    }
  }
  g.image = tile_grid(tiles, static_cast<int>(color_rows.size()));
  g.sidecar = {{"kind", "hybrid_grid"},
               {"dataset", data.id()},
               {"shape_rows", shape_rows},
               {"color_rows", color_rows},
               {"assembly", {{"first", shape_factor}, {"second", color_factor}, {"rest", "mean of both sources"}}},
               {"intended_color", g.intended_color},
               {"recovered_color", g.recovered_color},
               {"correct", g.correct},
               {"total", g.total}};
  return g;
}

std::vector<double> traversal_values(int steps, double range) {
  require(steps >= 1 && range >= 0.0, "traversal_values: needs steps >= 1 and range >= 0");
  if (steps == 1) return {0.0};
  std::vector<double> v(steps);
  for (int i = 0; i < steps; ++i) v[i] = -range + 2.0 * range * i / (steps - 1);
  return v;
}

std::vector<Image> traverse(model::VaeModel<float>& vae, const datasets::Dataset& data, int row, int dim,
                            const std::vector<double>& values) {
  require(dim >= 0 && dim < vae.latent_dims(), "traverse: dim out of range");
  const Eigen::VectorXf base = posterior_means(vae, data, {row}).col(0);
  std::vector<Image> out;
  for (const double v : values) {
    Eigen::VectorXf z = base;
    z(dim) = static_cast<float>(v);
    out.push_back(decode_image(vae, z, data.spec.dims));
  }
  return out;
}

TraversalGrid traversal_grid(model::VaeModel<float>& vae, const datasets::Dataset& data, int row,
                             const std::vector<int>& dims, const std::vector<double>& values) {
  require(!dims.empty() && !values.empty(), "traversal_grid: needs dims and values");
  TraversalGrid g;
  std::vector<Image> tiles;
  for (const int d : dims) {
    g.rows.push_back(traverse(vae, data, row, d, values));
    tiles.insert(tiles.end(), g.rows.back().begin(), g.rows.back().end());
  }
  g.image = tile_grid(tiles, static_cast<int>(values.size()));
  g.sidecar = {{"kind", "traversal_grid"}, {"dataset", data.id()}, {"row", row}, {"dims", dims}, {"values", values}};
  return g;
}

}  // namespace dbvae::evalgen
