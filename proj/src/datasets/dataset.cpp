#include "dbvae/datasets/dataset.hpp"

#include <algorithm>

#include "dbvae/datasets/render.hpp"
#include "dbvae/error.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::datasets {

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kTest: return "test";
    case SplitTag::kFeedback: return "feedback";
    case SplitTag::kUnbiased: return "unbiased";
  }
  return "unknown";
}

SplitTag split_from_string(std::string_view name) {
  if (name == "train") return SplitTag::kTrain;
  if (name == "test") return SplitTag::kTest;
  if (name == "feedback") return SplitTag::kFeedback;
  if (name == "unbiased") return SplitTag::kUnbiased;
  throw Error(ErrorKind::kInvalidArgument, "unknown split tag '" + std::string(name) + "'");
}

int Dataset::append(std::span<const int> values, std::uint64_t render_seed) {
  const Image img = render_sample(spec, values, render_seed);
  images.insert(images.end(), img.pixels.begin(), img.pixels.end());
  factors.insert(factors.end(), values.begin(), values.end());
  return size++;
}

std::string Dataset::id() const {
  return std::string(to_string(spec.family)) + "-" + std::string(to_string(split)) + "-seed" +
         std::to_string(seed) + "-n" + std::to_string(size);
}

void Dataset::check_invariants() const {
  const std::size_t nf = spec.factors.size();
  if (images.size() != static_cast<std::size_t>(size) * spec.dims.pixels() ||
      factors.size() != static_cast<std::size_t>(size) * nf) {
    throw Error(ErrorKind::kConsistency, "dataset buffers do not match its size");
  }
  for (int n = 0; n < size; ++n) {
    for (std::size_t i = 0; i < nf; ++i) {
      const int v = factor(n, static_cast<int>(i));
      if (v < 0 || v >= spec.factors[i].cardinality) {
        throw Error(ErrorKind::kConsistency, "factor code out of range in row " + std::to_string(n));
      }
    }
  }
  if (rule) {
    const int a = spec.index_of(rule->factor_a);
    const int b = spec.index_of(rule->factor_b);
    for (int n = 0; n < size; ++n) {
      if (factor(n, b) != rule->apply(factor(n, a))) {
        throw Error(ErrorKind::kConsistency, "row " + std::to_string(n) + " violates the bias rule");
      }
    }
  }
}

Dataset generate_split(const FactorSpec& spec, const std::optional<BiasRule>& rule, int n,
                       std::uint64_t seed, SplitTag split) {
  spec.validate();
  require(n >= 1, "generate_split: n must be at least 1");
  if (rule) rule->validate(spec);

  Dataset ds;
  ds.spec = spec;
  ds.rule = rule;
  ds.seed = seed;
  ds.split = split;
  ds.images.reserve(static_cast<std::size_t>(n) * spec.dims.pixels());
  ds.factors.reserve(static_cast<std::size_t>(n) * spec.factors.size());

  Rng rng(seed);
  const int a = rule ? spec.index_of(rule->factor_a) : -1;
  const int b = rule ? spec.index_of(rule->factor_b) : -1;

  // Balanced codes for the driving factor keep its marginal uniform.
  std::vector<int> driver;
  if (rule) {
    const int k = spec.factors[a].cardinality;
    driver.resize(n);
    for (int i = 0; i < n; ++i) driver[i] = i % k;
    std::vector<int> extra(k);
    for (int v = 0; v < k; ++v) extra[v] = v;
    rng.shuffle(std::span<int>(extra));
    // The remainder n mod k gets a random subset of values rather than 0..r-1.
    for (int i = n - n % k, j = 0; i < n; ++i, ++j) driver[i] = extra[j];
    rng.shuffle(std::span<int>(driver));
  }

  std::vector<int> values(spec.factors.size());
  for (int row = 0; row < n; ++row) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = rng.uniform_int(spec.factors[i].cardinality);
    }
    if (rule) {
      values[a] = driver[row];
      values[b] = rule->apply(driver[row]);
    }
    ds.append(values, derive_seed(seed, static_cast<std::uint64_t>(row)));
  }
  return ds;
}

}  // namespace dbvae::datasets
