#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dbvae/datasets/bias_rule.hpp"
#include "dbvae/datasets/factor_spec.hpp"

namespace dbvae::datasets {

// train/test are the biased and shifted splits; feedback holds the samples a
// FeedbackSet references; unbiased covers the whole factor spectrum.
enum class SplitTag { kTrain, kTest, kFeedback, kUnbiased };

std::string_view to_string(SplitTag tag);
SplitTag split_from_string(std::string_view name);

struct Dataset {
  FactorSpec spec;
  std::optional<BiasRule> rule;
  std::uint64_t seed = 0;
  SplitTag split = SplitTag::kTrain;
  int size = 0;
  std::vector<std::uint8_t> images;  // size x H x W x C
  std::vector<int> factors;          // size x num_factors, row-major

  std::span<const std::uint8_t> image(int row) const {
    const std::size_t stride = static_cast<std::size_t>(spec.dims.pixels());
    return {images.data() + stride * row, stride};
  }
  std::span<const int> factor_row(int row) const {
    const std::size_t f = spec.factors.size();
    return {factors.data() + f * row, f};
  }
  int factor(int row, int index) const { return factors[spec.factors.size() * row + index]; }

  // Appends one rendered sample; returns its row index.
  int append(std::span<const int> values, std::uint64_t render_seed);

  // Identifier recorded by feedback sets and reports.
  std::string id() const;

  // Checks factor ranges, buffer sizes and the bias rule; throws kConsistency.
  void check_invariants() const;
};

// Draws `n` samples: factor_a of the rule is balanced over its values, factor_b
// follows the rule, every other factor is i.i.d. uniform. Without a rule all
// factors are i.i.d. uniform.
Dataset generate_split(const FactorSpec& spec, const std::optional<BiasRule>& rule, int n,
                       std::uint64_t seed, SplitTag split);

}  // namespace dbvae::datasets
