#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "dbvae/datasets/bias_rule.hpp"
#include "dbvae/datasets/dataset.hpp"
#include "dbvae/datasets/feedback.hpp"
#include "dbvae/datasets/io.hpp"
#include "dbvae/datasets/render.hpp"
#include "dbvae/error.hpp"

namespace fs = std::filesystem;
using namespace dbvae;
using namespace dbvae::datasets;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dbvae_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected dbvae::Error";
  return ErrorKind::kInvalidArgument;
}

// Oracle: nearest palette entry to the mean of the non-background pixels.
int mean_foreground_color(const Image& img, const std::vector<Rgb>& palette) {
  double r = 0, g = 0, b = 0;
  int n = 0;
  for (int y = 0; y < img.dims.height; ++y) {
    for (int x = 0; x < img.dims.width; ++x) {
      if (img.at(y, x, 0) == 0 && img.at(y, x, 1) == 0 && img.at(y, x, 2) == 0) continue;
      r += img.at(y, x, 0);
      g += img.at(y, x, 1);
      b += img.at(y, x, 2);
      ++n;
    }
  }
  if (n == 0) return -1;
  int best = -1;
  double best_d = 1e300;
  for (std::size_t i = 0; i < palette.size(); ++i) {
    const double d = std::pow(r / n - palette[i].r, 2) + std::pow(g / n - palette[i].g, 2) +
                     std::pow(b / n - palette[i].b, 2);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::set<std::pair<int, int>> combinations(const Dataset& ds, int a, int b) {
  std::set<std::pair<int, int>> out;
  for (int r = 0; r < ds.size; ++r) out.insert({ds.factor(r, a), ds.factor(r, b)});
  return out;
}

double chi_square_uniform(const Dataset& ds, int column) {
  const int k = ds.spec.factors[column].cardinality;
  std::vector<double> counts(k, 0.0);
  for (int r = 0; r < ds.size; ++r) counts[ds.factor(r, column)] += 1.0;
  const double expected = static_cast<double>(ds.size) / k;
  double chi = 0.0;
  for (double c : counts) chi += (c - expected) * (c - expected) / expected;
  return chi;
}

// Upper 0.001 quantiles of the chi-square distribution.
double chi_square_critical(int df) {
  static const std::map<int, double> table = {{2, 13.816}, {3, 16.266}, {7, 24.322}, {9, 27.877}};
  return table.at(df);
}

}  // namespace

TEST(Render, GlyphForegroundCarriesPaletteColor) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10, 7);
  const auto palette = color_palette(spec);
  for (int s = 0; s < 10; ++s) {
    for (int c = 0; c < 10; ++c) {
      const std::vector<int> v = {s, c};
      const Image img = render_sample(spec, v, 123);
      int lit = 0;
      for (int y = 0; y < 28; ++y) {
        for (int x = 0; x < 28; ++x) {
          const Rgb px{img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
          if (px == Rgb{}) continue;
          ++lit;
          ASSERT_EQ(px, palette[c]) << "shape " << s << " color " << c;
        }
      }
      EXPECT_GT(lit, 20);
    }
  }
}

TEST(Render, DeterministicForSameInputs) {
  for (auto family : {Family::kGlyphs10, Family::kSprites, Family::kScene}) {
    const auto spec = FactorSpec::preset(family, 3);
    std::vector<int> v(spec.num_factors(), 1);
    EXPECT_EQ(render_sample(spec, v, 99).pixels, render_sample(spec, v, 99).pixels);
  }
}

TEST(Render, SpritePaletteOracleRecoversColor) {
  const auto spec = FactorSpec::preset(Family::kSprites, 11);
  const auto palette = color_palette(spec);
  for (int s = 0; s < 3; ++s) {
    for (int c = 0; c < 3; ++c) {
      std::vector<int> v(spec.num_factors(), 0);
      v[spec.index_of("shape")] = s;
      v[spec.index_of("color")] = c;
      v[spec.index_of("x_position")] = 3;
      v[spec.index_of("y_position")] = 4;
      v[spec.index_of("scale")] = 2;
      EXPECT_EQ(mean_foreground_color(render_sample(spec, v, 5), palette), c);
    }
  }
}

TEST(Render, ForegroundPixelsArePureForEveryFamily) {
  for (auto family : {Family::kGlyphs10, Family::kSprites, Family::kScene}) {
    const auto spec = FactorSpec::preset(family, 2);
    const auto palette = color_palette(spec);
    const Dataset ds = generate_split(spec, std::nullopt, 60, 4, SplitTag::kUnbiased);
    const int color = spec.index_of("color");
    for (int r = 0; r < ds.size; ++r) {
      const auto rendered = render_sample_with_mask(spec, ds.factor_row(r), 0);
      const auto& img = rendered.image;
      int lit = 0;
      for (int y = 0; y < img.dims.height; ++y) {
        for (int x = 0; x < img.dims.width; ++x) {
          if (!rendered.foreground[y * img.dims.width + x]) continue;
          ++lit;
          ASSERT_EQ(nearest_palette_index(palette, img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)),
                    ds.factor(r, color));
        }
      }
      EXPECT_GT(lit, 0);
    }
  }
}

TEST(Render, SceneBandsFollowNuisanceFactors) {
  const auto spec = FactorSpec::preset(Family::kScene);
  std::vector<int> a = {0, 0, 0, 0, 0};
  std::vector<int> b = a;
  b[spec.index_of("wall_hue")] = 2;
  const auto ra = render_sample_with_mask(spec, a, 0);
  const auto rb = render_sample_with_mask(spec, b, 0);
  // Top-left corner is wall in every scene; bottom-left is floor.
  EXPECT_NE(ra.image.at(0, 0, 0) * 65536 + ra.image.at(0, 0, 1) * 256 + ra.image.at(0, 0, 2),
            rb.image.at(0, 0, 0) * 65536 + rb.image.at(0, 0, 1) * 256 + rb.image.at(0, 0, 2));
  EXPECT_EQ(ra.image.at(63, 0, 0), rb.image.at(63, 0, 0));
}

TEST(Render, RejectsOutOfRangeValues) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10);
  const std::vector<int> bad = {10, 0};
  EXPECT_EQ(kind_of([&] { render_sample(spec, bad, 0); }), ErrorKind::kInvalidArgument);
  const std::vector<int> short_row = {1};
  EXPECT_EQ(kind_of([&] { render_sample(spec, short_row, 0); }), ErrorKind::kInvalidArgument);
}

TEST(Render, UnknownFamilyRejected) {
  EXPECT_EQ(kind_of([] { family_from_string("mnist"); }), ErrorKind::kInvalidArgument);
}

TEST(FactorSpec, PresetsAreValid) {
  for (auto family : {Family::kGlyphs10, Family::kSprites, Family::kScene}) {
    const auto spec = FactorSpec::preset(family);
    EXPECT_NO_THROW(spec.validate());
    EXPECT_GE(spec.target_indices().size(), 2u);
  }
  auto spec = FactorSpec::preset(Family::kGlyphs10);
  spec.factors[1].name = "shape";
  EXPECT_THROW(spec.validate(), Error);
  spec = FactorSpec::preset(Family::kGlyphs10);
  spec.factors[1].cardinality = 1;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(BiasRule, OffsetThenInverseIsIdentity) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10);
  const auto rule = *BiasRule::parse("diag", spec);
  for (int k = -12; k <= 12; ++k) {
    const auto back = rule.shifted(k).shifted(-k);
    for (int v = 0; v < 10; ++v) EXPECT_EQ(back.apply(v), rule.apply(v));
  }
}

TEST(BiasRule, RejectsCardinalityMismatch) {
  const auto spec = FactorSpec::preset(Family::kSprites);
  const auto rule = BiasRule::diagonal("shape", "x_position", 3);
  EXPECT_THROW(rule.validate(spec), Error);
  BiasRule broken = BiasRule::diagonal("shape", "color", 3);
  broken.mapping = {0, 0, 1};
  EXPECT_THROW(broken.validate(spec), Error);
}

TEST(GenerateSplit, FullSizeColoredGlyphTrainSet) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10, 1);
  const Dataset ds = generate_split(spec, BiasRule::parse("diag", spec), 60000, 1, SplitTag::kTrain);
  EXPECT_EQ(ds.size, 60000);
  EXPECT_EQ(ds.spec.dims, (ImageDims{28, 28, 3}));
  EXPECT_EQ(ds.spec.factor("shape").cardinality, 10);
  EXPECT_EQ(ds.spec.factor("color").cardinality, 10);
  EXPECT_EQ(combinations(ds, 0, 1).size(), 10u);
  EXPECT_NO_THROW(ds.check_invariants());
}

TEST(GenerateSplit, ReverseRuleSharesNoCombinationWithTrain) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10, 1);
  const Dataset train = generate_split(spec, BiasRule::parse("diag", spec), 2000, 1, SplitTag::kTrain);
  const Dataset test = generate_split(spec, BiasRule::parse("reverse", spec), 10000, 2, SplitTag::kTest);
  const auto seen = combinations(train, 0, 1);
  for (const auto& c : combinations(test, 0, 1)) EXPECT_FALSE(seen.count(c)) << c.first << "," << c.second;
  for (int k = 1; k < 10; ++k) {
    const auto shifted = generate_split(spec, BiasRule::parse("offset:" + std::to_string(k), spec), 500, 3,
                                        SplitTag::kTest);
    for (const auto& c : combinations(shifted, 0, 1)) EXPECT_FALSE(seen.count(c));
  }
}

TEST(GenerateSplit, RejectsEmptyRequest) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10);
  EXPECT_EQ(kind_of([&] { generate_split(spec, BiasRule::parse("diag", spec), 0, 1, SplitTag::kTrain); }),
            ErrorKind::kInvalidArgument);
}

TEST(GenerateSplit, MarginalsPassChiSquareAndDeviationBound) {
  for (auto family : {Family::kGlyphs10, Family::kSprites, Family::kScene}) {
    const auto spec = FactorSpec::preset(family, 5);
    for (const auto& rule_text : {"diag", "none"}) {
      const int n = 10000;
      const Dataset ds = generate_split(spec, BiasRule::parse(rule_text, spec), n, 17,
                                        std::string(rule_text) == "diag" ? SplitTag::kTrain : SplitTag::kUnbiased);
      for (int f = 0; f < spec.num_factors(); ++f) {
        const int k = spec.factors[f].cardinality;
        EXPECT_LT(chi_square_uniform(ds, f), chi_square_critical(k - 1)) << spec.factors[f].name;
        std::vector<int> counts(k, 0);
        for (int r = 0; r < n; ++r) ++counts[ds.factor(r, f)];
        for (int c : counts) EXPECT_LE(std::abs(static_cast<double>(c) / n - 1.0 / k), 2.0 / std::sqrt(n));
      }
    }
  }
}

TEST(GenerateSplit, SeedDeterminesContent) {
  const auto spec = FactorSpec::preset(Family::kSprites, 5);
  const auto a = generate_split(spec, BiasRule::parse("diag", spec), 300, 9, SplitTag::kTrain);
  const auto b = generate_split(spec, BiasRule::parse("diag", spec), 300, 9, SplitTag::kTrain);
  const auto c = generate_split(spec, BiasRule::parse("diag", spec), 300, 10, SplitTag::kTrain);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.factors, b.factors);
  EXPECT_NE(a.factors, c.factors);
}

TEST(Feedback, BudgetsMatchReferencedSamples) {
  const auto glyphs = FactorSpec::preset(Family::kGlyphs10, 1);
  FeedbackOptions o;
  o.budget = 600;
  o.seed = 3;
  const auto fb = build_feedback(glyphs, o);
  EXPECT_EQ(fb.samples.size, 600);
  EXPECT_EQ(fb.pairs.size(), 300u);
  EXPECT_EQ(fb.pairs_for("shape").size(), 150u);

  const auto sprites = FactorSpec::preset(Family::kSprites, 1);
  o.budget = 1000;
  EXPECT_EQ(build_feedback(sprites, o).samples.size, 1000);
}

TEST(Feedback, PairsAgreeAndLabelsMatchGroundTruth) {
  for (auto geometry : {FeedbackGeometry::kAnchor, FeedbackGeometry::kRandom}) {
    const auto spec = FactorSpec::preset(Family::kSprites, 1);
    FeedbackOptions o;
    o.budget = 1000;
    o.geometry = geometry;
    o.seed = 4;
    const auto fb = build_feedback(spec, o);
    for (const auto& p : fb.pairs) {
      const int f = spec.index_of(p.shared_factor);
      ASSERT_EQ(fb.samples.factor(p.idx_a, f), fb.samples.factor(p.idx_b, f));
    }
    for (const auto& l : fb.labels) {
      ASSERT_EQ(fb.samples.factor(l.idx, spec.index_of(l.factor)), l.value);
    }
    EXPECT_NO_THROW(fb.check_invariants());
    if (geometry == FeedbackGeometry::kAnchor) {
      for (const auto& p : fb.pairs) {
        EXPECT_EQ(fb.samples.factor(p.idx_a, spec.index_of(p.shared_factor)), fb.anchors.at(p.shared_factor));
      }
    }
  }
}

TEST(Feedback, PairsDifferOutsideSharedFactorAtExpectedRate) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10, 1);
  FeedbackOptions o;
  o.budget = 40000;
  o.seed = 8;
  const auto fb = build_feedback(spec, o);
  // Non-shared factor has 10 values: P(differ) = 0.9 per pair.
  int differ = 0;
  for (const auto& p : fb.pairs) {
    const int other = p.shared_factor == "shape" ? 1 : 0;
    differ += fb.samples.factor(p.idx_a, other) != fb.samples.factor(p.idx_b, other);
  }
  const double n = static_cast<double>(fb.pairs.size());
  const double sigma = std::sqrt(0.9 * 0.1 / n);
  EXPECT_NEAR(differ / n, 0.9, 4 * sigma);
}

TEST(Feedback, RejectsTooSmallBudget) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10);
  FeedbackOptions o;
  o.budget = 3;
  EXPECT_EQ(kind_of([&] { build_feedback(spec, o); }), ErrorKind::kInvalidArgument);
}

TEST(DatasetIo, RoundTripIsLossless) {
  const auto spec = FactorSpec::preset(Family::kSprites, 3);
  const auto ds = generate_split(spec, BiasRule::parse("diag", spec), 50, 2, SplitTag::kTrain);
  const auto dir = scratch_dir("roundtrip");
  write_dataset(ds, dir);
  const auto back = read_dataset(dir);
  EXPECT_EQ(back.images, ds.images);
  EXPECT_EQ(back.factors, ds.factors);
  EXPECT_EQ(back.spec, ds.spec);
  EXPECT_EQ(back.rule, ds.rule);
  EXPECT_EQ(back.split, ds.split);
  EXPECT_EQ(back.seed, ds.seed);
}

TEST(DatasetIo, CorruptMagicIsFormatError) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10);
  const auto ds = generate_split(spec, BiasRule::parse("diag", spec), 5, 2, SplitTag::kTrain);
  const auto dir = scratch_dir("magic");
  write_dataset(ds, dir);
  {
    std::fstream f(dir / "images.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XBVAE001", 8);
  }
  EXPECT_EQ(kind_of([&] { read_dataset(dir); }), ErrorKind::kFormat);
}

TEST(DatasetIo, TruncatedPayloadIsFormatError) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10);
  const auto ds = generate_split(spec, BiasRule::parse("diag", spec), 5, 2, SplitTag::kTrain);
  const auto dir = scratch_dir("truncated");
  write_dataset(ds, dir);
  fs::resize_file(dir / "images.bin", fs::file_size(dir / "images.bin") - 10);
  EXPECT_EQ(kind_of([&] { read_dataset(dir); }), ErrorKind::kFormat);
}

TEST(DatasetIo, FactorRowCountMismatchIsConsistencyError) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10);
  const auto ds = generate_split(spec, BiasRule::parse("diag", spec), 5, 2, SplitTag::kTrain);
  const auto dir = scratch_dir("rows");
  write_dataset(ds, dir);
  {
    std::ofstream f(dir / "factors.csv", std::ios::app);
    f << "1,1\n";
  }
  EXPECT_EQ(kind_of([&] { read_dataset(dir); }), ErrorKind::kConsistency);
}

TEST(DatasetIo, FeedbackRoundTrip) {
  const auto spec = FactorSpec::preset(Family::kGlyphs10, 1);
  FeedbackOptions o;
  o.seed = 2;
  const auto fb = build_feedback(spec, o);
  const auto dir = scratch_dir("feedback");
  write_feedback(fb, dir);
  const auto back = read_feedback(dir);
  EXPECT_EQ(back.pairs, fb.pairs);
  EXPECT_EQ(back.labels, fb.labels);
  EXPECT_EQ(back.anchors, fb.anchors);
  EXPECT_EQ(back.samples.images, fb.samples.images);
  EXPECT_EQ(back.source_dataset_id, fb.source_dataset_id);
}
