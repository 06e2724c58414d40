#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dbvae/datasets/dataset.hpp"

namespace dbvae::datasets {

struct FeedbackPair {
  int idx_a = 0;
  int idx_b = 0;
  std::string shared_factor;
  friend bool operator==(const FeedbackPair&, const FeedbackPair&) = default;
};

struct FactorLabel {
  int idx = 0;
  std::string factor;
  int value = 0;
  friend bool operator==(const FactorLabel&, const FactorLabel&) = default;
};

// anchor: every pair for factor i shares one fixed value of S_i (one row and
// one column of the shape x color grid). random: the shared value is drawn
// per pair.
enum class FeedbackGeometry { kAnchor, kRandom };

std::string to_string(FeedbackGeometry geometry);
FeedbackGeometry geometry_from_string(const std::string& name);

struct FeedbackOptions {
  int budget = 600;                  // total referenced samples
  std::vector<std::string> targets;  // empty: all target factors
  FeedbackGeometry geometry = FeedbackGeometry::kAnchor;
  std::uint64_t seed = 0;
};

// Emulated human feedback: match pairs drawn into `samples` plus labels of
// every target factor for each referenced sample.
struct FeedbackSet {
  std::vector<FeedbackPair> pairs;
  std::vector<FactorLabel> labels;
  std::string source_dataset_id;
  std::map<std::string, int> anchors;  // only for the anchor geometry
  FeedbackGeometry geometry = FeedbackGeometry::kAnchor;
  Dataset samples;

  std::vector<const FeedbackPair*> pairs_for(const std::string& factor) const;

  // Pairs agree on their shared factor, labels match the generating
  // factors and indices are in range; throws kConsistency.
  void check_invariants() const;
};

FeedbackSet build_feedback(const FactorSpec& spec, const FeedbackOptions& options);

}  // namespace dbvae::datasets
