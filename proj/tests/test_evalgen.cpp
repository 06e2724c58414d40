#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <map>

#include "dbvae/datasets/bias_rule.hpp"
#include "dbvae/datasets/feedback.hpp"
#include "dbvae/datasets/render.hpp"
#include "dbvae/error.hpp"
#include "dbvae/evalgen/evalgen.hpp"
#include "dbvae/trainer/trainer.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace dbvae;

namespace {

const datasets::FactorSpec& spec() {
  static const auto s = datasets::FactorSpec::preset(datasets::Family::kGlyphs10, 1);
  return s;
}

model::VaeModel<float>& fresh_model() {
  static model::VaeModel<float> vae(model::Architecture::preset(datasets::Family::kGlyphs10),
                                    model::default_partition(spec(), 16), 3);
  return vae;
}

const datasets::Dataset& unbiased() {
  static const auto ds = datasets::generate_split(spec(), std::nullopt, 400, 4, datasets::SplitTag::kUnbiased);
  return ds;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Oracle: the palette color holding the most foreground pixels by nearest match.
int majority_palette_color(const evalgen::Image& img, const std::vector<datasets::Rgb>& palette) {
  std::map<int, int> votes;
  for (std::size_t p = 0; p < img.pixels.size(); p += 3) {
    const int r = img.pixels[p], g = img.pixels[p + 1], b = img.pixels[p + 2];
    if (std::max({r, g, b}) < 128) continue;
    int best = 0;
    long best_d = -1;
    for (std::size_t k = 0; k < palette.size(); ++k) {
      const long d = (r - palette[k].r) * (r - palette[k].r) + (g - palette[k].g) * (g - palette[k].g) +
                     (b - palette[k].b) * (b - palette[k].b);
      if (best_d < 0 || d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    ++votes[best];
  }
  int arg = -1, most = 0;
  for (const auto& [k, n] : votes) {
    if (n > most) {
      most = n;
      arg = k;
    }
  }
  return arg;
}

}  // namespace

TEST(Png, RoundTripAndByteIdenticalReemission) {
  const auto dir = test_support::scratch_dir("png");
  Rng rng(1);
  auto img = evalgen::Image::blank(5, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(256));
  evalgen::write_png(img, dir / "a.png");
  evalgen::write_png(evalgen::read_png(dir / "a.png"), dir / "b.png");
  EXPECT_EQ(evalgen::read_png(dir / "a.png"), img);
  EXPECT_EQ(bytes(dir / "a.png"), bytes(dir / "b.png"));
  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(evalgen::read_png(dir / "bad.png"), Error);
}

TEST(TileGrid, LayoutAndSizeChecks) {
  auto red = evalgen::Image::blank(2, 2);
  for (std::size_t p = 0; p < red.pixels.size(); p += 3) red.pixels[p] = 255;
  const auto g = evalgen::tile_grid({red, red, red}, 2, 1);
  EXPECT_EQ(g.width, 5);
  EXPECT_EQ(g.height, 5);
  EXPECT_EQ(g.pixels[(0 * 5 + 2) * 3], 0);    // gap column
  EXPECT_EQ(g.pixels[(3 * 5 + 0) * 3], 255);  // second row, first tile
  EXPECT_EQ(g.pixels[(3 * 5 + 3) * 3], 0);    // missing fourth tile
  EXPECT_THROW(evalgen::tile_grid({red, evalgen::Image::blank(3, 2)}, 2), Error);
}

TEST(Reconstruction, GridHasTwoRowsOfBatchTiles) {
  const std::vector<int> rows = {0, 5, 9, 17};
  const auto g = evalgen::reconstruction_grid(fresh_model(), unbiased(), rows);
  EXPECT_EQ(g.originals.size(), 4u);
  EXPECT_EQ(g.reconstructions.size(), 4u);
  EXPECT_EQ(g.image.width, 4 * 28 + 3 * 2);
  EXPECT_EQ(g.image.height, 2 * 28 + 2);
  const auto again = evalgen::reconstruction_grid(fresh_model(), unbiased(), rows);
  EXPECT_EQ(again.image, g.image);
  EXPECT_EQ(g.sidecar.at("rows"), nlohmann::json(rows));
}

TEST(Hybrid, LatentAssemblyTakesBlocksAndAveragesRest) {
  const auto part = model::default_partition(spec(), 16);
  Eigen::VectorXf a = Eigen::VectorXf::LinSpaced(16, 0, 15);
  Eigen::VectorXf b = Eigen::VectorXf::Constant(16, 100);
  const auto z = evalgen::hybrid_latent(part, a, b, "shape", "color");
  for (int d : part.indices("shape")) EXPECT_EQ(z(d), a(d));
  for (int d : part.indices("color")) EXPECT_EQ(z(d), b(d));
  for (int d : part.nuisance()) EXPECT_EQ(z(d), 0.5f * (a(d) + b(d)));
  EXPECT_EQ(evalgen::hybrid_latent(part, a, a, "shape", "color"), a);
  EXPECT_THROW(evalgen::hybrid_latent(part, a, b, "shape", "shape"), Error);
}

TEST(Hybrid, SameSourceEqualsReconstruction) {
  const auto recon = evalgen::reconstruction_grid(fresh_model(), unbiased(), {7});
  EXPECT_EQ(evalgen::hybridize(fresh_model(), unbiased(), 7, 7), recon.reconstructions[0]);
}

TEST(Hybrid, FullCrossProductGrid) {
  const auto shapes = evalgen::representatives(unbiased(), "shape");
  const auto colors = evalgen::representatives(unbiased(), "color");
  ASSERT_EQ(shapes.size(), 10u);
  const auto g = evalgen::hybrid_grid(fresh_model(), unbiased(), shapes, colors);
  EXPECT_EQ(g.total, 100);
  EXPECT_EQ(g.cells.size(), 10u);
  for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(g.intended_color[0][j], static_cast<int>(j));
  EXPECT_EQ(g.image.width, 10 * 28 + 9 * 2);
  const auto biased = datasets::generate_split(spec(), datasets::BiasRule::parse("diag", spec()), 5, 1,
                                               datasets::SplitTag::kTrain);
  if (biased.size < 10) EXPECT_THROW(evalgen::representatives(biased, "shape"), Error);
}

TEST(Traverse, ValuesAndIdentityAtMean) {
  const auto v = evalgen::traversal_values();
  ASSERT_EQ(v.size(), 7u);
  EXPECT_EQ(v.front(), -3.0);
  EXPECT_EQ(v[3], 0.0);
  EXPECT_EQ(v.back(), 3.0);
  const auto mean = fresh_model().encode(model::image_batch<float>(unbiased(), std::vector<int>{11})).mean;
  const auto recon = evalgen::reconstruction_grid(fresh_model(), unbiased(), {11}).reconstructions[0];
  const auto row = evalgen::traverse(fresh_model(), unbiased(), 11, 2, {mean(2, 0)});
  EXPECT_EQ(row[0], recon);
  const auto grid = evalgen::traversal_grid(fresh_model(), unbiased(), 11, {0, 1, 2, 3, 4, 5, 6, 7}, v);
  EXPECT_EQ(grid.rows.size(), 8u);
  EXPECT_EQ(grid.image.height, 8 * 28 + 7 * 2);
  EXPECT_THROW(evalgen::traverse(fresh_model(), unbiased(), 11, 16, v), Error);
}

TEST(Artifact, WritesPngAndSidecar) {
  const auto dir = test_support::scratch_dir("artifact");
  const auto g = evalgen::reconstruction_grid(fresh_model(), unbiased(), {1, 2});
  evalgen::write_artifact(g.image, g.sidecar, dir / "recon");
  EXPECT_EQ(evalgen::read_png(dir / "recon.png"), g.image);
  std::ifstream in(dir / "recon.json");
  EXPECT_EQ(nlohmann::json::parse(in), g.sidecar);
  const auto first = bytes(dir / "recon.png");
  evalgen::write_artifact(g.image, g.sidecar, dir / "recon");
  EXPECT_EQ(bytes(dir / "recon.png"), first);
}

TEST(Reconstruction, TrainedModelKeepsForegroundColor) {
  const auto data = datasets::generate_split(spec(), datasets::BiasRule::parse("diag", spec()), 4000, 5,
                                             datasets::SplitTag::kTrain);
  auto c = trainer::TrainingConfig::beta_vae(1.0);
  c.epochs = 12;
  auto trained = trainer::train(c, data, nullptr);
  const auto rows = evalgen::representatives(data, "color");
  const auto g = evalgen::reconstruction_grid(*trained.model, data, rows);
  const auto palette = datasets::color_palette(spec());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(majority_palette_color(g.reconstructions[i], palette), data.factor(rows[i], 1)) << "row " << rows[i];
    EXPECT_EQ(evalgen::dominant_palette_index(g.reconstructions[i], palette), data.factor(rows[i], 1));
  }
}
