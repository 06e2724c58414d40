#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbvae/datasets/dataset.hpp"
#include "dbvae/datasets/render.hpp"
#include "dbvae/model/vae.hpp"

namespace dbvae::evalgen {

// 8-bit RGB raster, row-major HWC.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  static Image blank(int width, int height);
  static Image from_bytes(std::vector<std::uint8_t> hwc, datasets::ImageDims dims);
  friend bool operator==(const Image&, const Image&) = default;
};

// Tiles of equal size laid out in `columns` columns with `gap` black pixels
// between them; the last row may be partial.
Image tile_grid(const std::vector<Image>& tiles, int columns, int gap = 2);

// Deterministic PNG (fixed compression, no time or text chunks).
void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

// Writes <stem>.png and <stem>.json.
void write_artifact(const Image& image, const nlohmann::json& sidecar, const std::filesystem::path& stem);

// Foreground = pixels whose brightest channel exceeds `threshold`; returns the
// palette index nearest their mean color, or -1 without foreground.
int dominant_palette_index(const Image& image, std::span<const datasets::Rgb> palette, double threshold = 0.3);

// First row holding each value of `factor`, in value order; throws kInvalidArgument
// when a value is missing.
std::vector<int> representatives(const datasets::Dataset& data, const std::string& factor);

// Top row originals, bottom row reconstructions from the posterior means.
struct ReconstructionGrid {
  Image image;
  std::vector<Image> originals;
  std::vector<Image> reconstructions;
  nlohmann::json sidecar;
};
ReconstructionGrid reconstruction_grid(model::VaeModel<float>& vae, const datasets::Dataset& data,
                                       const std::vector<int>& rows);

// Latent with the `first_factor` block of a, the `second_factor` block of b
// and every other dim the mean of both (all posterior means).
Eigen::VectorXf hybrid_latent(const model::LatentPartition& partition, const Eigen::VectorXf& a,
                              const Eigen::VectorXf& b, const std::string& first_factor,
                              const std::string& second_factor);
Image hybridize(model::VaeModel<float>& vae, const datasets::Dataset& data, int shape_row, int color_row,
                const std::string& shape_factor = "shape", const std::string& color_factor = "color");

// K x K cross product: cell (i, j) takes the shape of shape_rows[i] and the
// color of color_rows[j]; the palette oracle scores each cell.
struct HybridGrid {
  Image image;
  std::vector<std::vector<Image>> cells;
  std::vector<std::vector<int>> intended_color;
  std::vector<std::vector<int>> recovered_color;
  int correct = 0;
  int total = 0;
  nlohmann::json sidecar;
};
HybridGrid hybrid_grid(model::VaeModel<float>& vae, const datasets::Dataset& data,
                       const std::vector<int>& shape_rows, const std::vector<int>& color_rows,
                       const std::string& shape_factor = "shape", const std::string& color_factor = "color");

// Evenly spaced values from -range to range.
std::vector<double> traversal_values(int steps = 7, double range = 3.0);

// Decodes the posterior mean of `row` with `dim` overwritten by each value.
std::vector<Image> traverse(model::VaeModel<float>& vae, const datasets::Dataset& data, int row, int dim,
                            const std::vector<double>& values);

struct TraversalGrid {
  Image image;
  std::vector<std::vector<Image>> rows;  // one per dim
  nlohmann::json sidecar;
};
TraversalGrid traversal_grid(model::VaeModel<float>& vae, const datasets::Dataset& data, int row,
                             const std::vector<int>& dims, const std::vector<double>& values);

}  // namespace dbvae::evalgen
