#include "dbvae/datasets/render.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "dbvae/error.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::datasets {
namespace detail {
extern const char* const kGlyphAssetText;
}

namespace {

constexpr int kGlyphSize = 28;

const std::array<Rgb, 10> kGlyphColors = {{{255, 0, 0},
                                           {0, 255, 0},
                                           {0, 0, 255},
                                           {255, 255, 0},
                                           {255, 0, 255},
                                           {0, 255, 255},
                                           {255, 255, 255},
                                           {255, 128, 0},
                                           {128, 0, 255},
                                           {0, 255, 128}}};
const std::array<Rgb, 3> kSpriteColors = {{{255, 0, 0}, {0, 255, 0}, {0, 0, 255}}};
const std::array<Rgb, 4> kSceneObjectColors = {{{230, 30, 30}, {240, 210, 30}, {30, 200, 60}, {50, 80, 240}}};
const std::array<Rgb, 4> kSceneWallColors = {{{90, 110, 140}, {140, 90, 110}, {110, 140, 90}, {135, 135, 135}}};
const std::array<Rgb, 4> kSceneFloorColors = {{{70, 55, 45}, {45, 70, 60}, {60, 50, 80}, {95, 95, 70}}};

template <std::size_t N>
std::vector<Rgb> permuted(const std::array<Rgb, N>& base, std::uint64_t palette_seed) {
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(palette_seed, 0x9a1e77e));
  rng.shuffle(std::span<int>(order));
  std::vector<Rgb> out(N);
  for (std::size_t i = 0; i < N; ++i) out[i] = base[order[i]];
  return out;
}

// Shape predicates in object-local coordinates (dx right, dy down), radius r.
bool inside_shape(const std::string& kind, double dx, double dy, double r) {
  if (kind == "square") return std::abs(dx) <= 0.9 * r && std::abs(dy) <= 0.9 * r;
  if (kind == "ellipse") return (dx * dx) / (r * r) + (dy * dy) / (0.36 * r * r) <= 1.0;
  if (kind == "circle") return dx * dx + dy * dy <= r * r;
  if (kind == "triangle") return dy >= -r && dy <= r && std::abs(dx) <= 0.5 * (dy + r);
  if (kind == "diamond") return std::abs(dx) + std::abs(dy) <= r;
  if (kind == "heart") {
    const double u = 1.2 * dx / r;
    const double v = -1.2 * dy / r + 0.25;
    const double a = u * u + v * v - 1.0;
    return a * a * a - u * u * v * v * v <= 0.0;
  }
  return false;
}

void check_values(const FactorSpec& spec, std::span<const int> values) {
  require(static_cast<int>(values.size()) == spec.num_factors(),
          "render: expected " + std::to_string(spec.num_factors()) + " factor values");
  for (int i = 0; i < spec.num_factors(); ++i) {
    require(values[i] >= 0 && values[i] < spec.factors[i].cardinality,
            "render: value " + std::to_string(values[i]) + " out of range for factor '" +
                spec.factors[i].name + "'");
  }
}

void paint(RenderedSample& out, int y, int x, Rgb color) {
  const auto& d = out.image.dims;
  auto* px = &out.image.pixels[(static_cast<std::size_t>(y) * d.width + x) * d.channels];
  px[0] = color.r;
  px[1] = color.g;
  px[2] = color.b;
}

void draw_object(RenderedSample& out, const std::string& kind, double cx, double cy, double r,
                 Rgb color) {
  const auto& d = out.image.dims;
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      if (inside_shape(kind, x + 0.5 - cx, y + 0.5 - cy, r)) {
        paint(out, y, x, color);
        out.foreground[static_cast<std::size_t>(y) * d.width + x] = 1;
      }
    }
  }
}

RenderedSample render_glyph(const FactorSpec& spec, std::span<const int> v) {
  RenderedSample out{{spec.dims, std::vector<std::uint8_t>(spec.dims.pixels(), 0)},
                     std::vector<std::uint8_t>(spec.dims.height * spec.dims.width, 0)};
  const Rgb color = color_palette(spec)[v[spec.index_of("color")]];
  const auto& glyph = glyph_templates()[v[spec.index_of("shape")]];
  for (int y = 0; y < kGlyphSize; ++y) {
    for (int x = 0; x < kGlyphSize; ++x) {
      if (glyph[y][x] == '#') {
        paint(out, y, x, color);
        out.foreground[y * kGlyphSize + x] = 1;
      }
    }
  }
  return out;
}

RenderedSample render_sprite(const FactorSpec& spec, std::span<const int> v) {
  static const std::array<std::string, 3> kShapes = {"square", "ellipse", "heart"};
  static const std::array<double, 4> kRadii = {6.0, 7.5, 9.0, 10.5};
  RenderedSample out{{spec.dims, std::vector<std::uint8_t>(spec.dims.pixels(), 0)},
                     std::vector<std::uint8_t>(spec.dims.height * spec.dims.width, 0)};
  const double cx = 14.0 + v[spec.index_of("x_position")] * 36.0 / 7.0;
  const double cy = 14.0 + v[spec.index_of("y_position")] * 36.0 / 7.0;
  draw_object(out, kShapes[v[spec.index_of("shape")]], cx, cy, kRadii[v[spec.index_of("scale")]],
              color_palette(spec)[v[spec.index_of("color")]]);
  return out;
}

RenderedSample render_scene(const FactorSpec& spec, std::span<const int> v) {
  static const std::array<std::string, 4> kShapes = {"square", "circle", "triangle", "diamond"};
  static const std::array<double, 4> kRadii = {7.0, 9.0, 11.0, 13.0};
  constexpr int kHorizon = 40;
  RenderedSample out{{spec.dims, std::vector<std::uint8_t>(spec.dims.pixels(), 0)},
                     std::vector<std::uint8_t>(spec.dims.height * spec.dims.width, 0)};
  const Rgb wall = kSceneWallColors[v[spec.index_of("wall_hue")]];
  const Rgb floor = kSceneFloorColors[v[spec.index_of("floor_hue")]];
  for (int y = 0; y < spec.dims.height; ++y) {
    for (int x = 0; x < spec.dims.width; ++x) paint(out, y, x, y < kHorizon ? wall : floor);
  }
  const double r = kRadii[v[spec.index_of("scale")]];
  draw_object(out, kShapes[v[spec.index_of("shape")]], 32.0, 54.0 - r, r,
              color_palette(spec)[v[spec.index_of("color")]]);
  return out;
}

}  // namespace

std::vector<Rgb> color_palette(const FactorSpec& spec) {
  switch (spec.family) {
    case Family::kGlyphs10: return permuted(kGlyphColors, spec.palette_seed);
    case Family::kSprites: return permuted(kSpriteColors, spec.palette_seed);
    case Family::kScene: return {kSceneObjectColors.begin(), kSceneObjectColors.end()};
  }
  return {};
}

int nearest_palette_index(std::span<const Rgb> palette, double r, double g, double b) {
  int best = -1;
  double best_d = 0.0;
  for (std::size_t i = 0; i < palette.size(); ++i) {
    const double dr = r - palette[i].r, dg = g - palette[i].g, db = b - palette[i].b;
    const double d = dr * dr + dg * dg + db * db;
    if (best < 0 || d < best_d) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  return best;
}

const std::vector<std::vector<std::string>>& glyph_templates() {
  static const std::vector<std::vector<std::string>> templates = [] {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(detail::kGlyphAssetText);
    std::string line;
    while (std::getline(in, line)) {
      if (line.starts_with("glyph")) {
        out.emplace_back();
      } else if (!line.empty()) {
        if (out.empty() || line.size() != kGlyphSize) {
          throw Error(ErrorKind::kFormat, "glyph asset is malformed");
        }
        out.back().push_back(line);
      }
    }
    if (out.size() != 10) throw Error(ErrorKind::kFormat, "glyph asset must hold 10 templates");
    for (const auto& g : out) {
      if (g.size() != kGlyphSize) throw Error(ErrorKind::kFormat, "glyph template has wrong height");
    }
    return out;
  }();
  return templates;
}

RenderedSample render_sample_with_mask(const FactorSpec& spec, std::span<const int> values,
                                       std::uint64_t /*seed*/) {
  check_values(spec, values);
  switch (spec.family) {
    case Family::kGlyphs10: return render_glyph(spec, values);
    case Family::kSprites: return render_sprite(spec, values);
    case Family::kScene: return render_scene(spec, values);
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown family");
}

Image render_sample(const FactorSpec& spec, std::span<const int> values, std::uint64_t seed) {
  return render_sample_with_mask(spec, values, seed).image;
}

}  // namespace dbvae::datasets
