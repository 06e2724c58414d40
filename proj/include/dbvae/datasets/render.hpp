#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dbvae/datasets/factor_spec.hpp"

namespace dbvae::datasets {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Interleaved H x W x C bytes.
struct Image {
  ImageDims dims;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * dims.width + x) * dims.channels + c];
  }
};

struct RenderedSample {
  Image image;
  std::vector<std::uint8_t> foreground;  // H x W, 1 where the object was drawn
};

// Palette indexed by the value of the "color" factor. Glyph and sprite
// palettes are permuted by spec.palette_seed; the scene palette is fixed.
std::vector<Rgb> color_palette(const FactorSpec& spec);

// Index of the palette entry closest (Euclidean RGB) to the given color.
int nearest_palette_index(std::span<const Rgb> palette, double r, double g, double b);

// The ten 28 x 28 binary glyph templates, rows of '#' and '.'.
const std::vector<std::vector<std::string>>& glyph_templates();

// Deterministic in (spec, values, seed). The built-in families carry all of
// their variation in explicit factors, so `seed` only has to be reproducible.
Image render_sample(const FactorSpec& spec, std::span<const int> values, std::uint64_t seed);
RenderedSample render_sample_with_mask(const FactorSpec& spec, std::span<const int> values,
                                       std::uint64_t seed);

}  // namespace dbvae::datasets
