#include "dbvae/datasets/feedback.hpp"

#include "dbvae/error.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::datasets {

std::string to_string(FeedbackGeometry geometry) {
  return geometry == FeedbackGeometry::kAnchor ? "anchor" : "random";
}

FeedbackGeometry geometry_from_string(const std::string& name) {
  if (name == "anchor") return FeedbackGeometry::kAnchor;
  if (name == "random") return FeedbackGeometry::kRandom;
  throw Error(ErrorKind::kInvalidArgument, "unknown feedback geometry '" + name + "'");
}

std::vector<const FeedbackPair*> FeedbackSet::pairs_for(const std::string& factor) const {
  std::vector<const FeedbackPair*> out;
  for (const auto& p : pairs) {
    if (p.shared_factor == factor) out.push_back(&p);
  }
  return out;
}

void FeedbackSet::check_invariants() const {
  samples.check_invariants();
  for (const auto& p : pairs) {
    if (p.idx_a < 0 || p.idx_a >= samples.size || p.idx_b < 0 || p.idx_b >= samples.size) {
      throw Error(ErrorKind::kConsistency, "feedback pair index out of range");
    }
    const int f = samples.spec.index_of(p.shared_factor);
    if (samples.factor(p.idx_a, f) != samples.factor(p.idx_b, f)) {
      throw Error(ErrorKind::kConsistency, "feedback pair disagrees on '" + p.shared_factor + "'");
    }
  }
  for (const auto& l : labels) {
    if (l.idx < 0 || l.idx >= samples.size) {
      throw Error(ErrorKind::kConsistency, "feedback label index out of range");
    }
    if (samples.factor(l.idx, samples.spec.index_of(l.factor)) != l.value) {
      throw Error(ErrorKind::kConsistency, "feedback label does not match ground truth");
    }
  }
}

FeedbackSet build_feedback(const FactorSpec& spec, const FeedbackOptions& options) {
  spec.validate();
  std::vector<std::string> targets = options.targets.empty() ? spec.target_names() : options.targets;
  for (const auto& t : targets) {
    require(spec.factor(t).is_target, "feedback factor '" + t + "' is not a target factor");
  }
  const int num_targets = static_cast<int>(targets.size());
  require(num_targets >= 1, "feedback needs at least one target factor");
  if (options.budget < 2 * num_targets) {
    throw Error(ErrorKind::kInvalidArgument,
                "feedback budget " + std::to_string(options.budget) + " is below 2 x " +
                    std::to_string(num_targets) + " targets");
  }

  FeedbackSet fs;
  fs.geometry = options.geometry;
  fs.samples.spec = spec;
  fs.samples.seed = options.seed;
  fs.samples.split = SplitTag::kFeedback;
  fs.source_dataset_id = std::string(to_string(spec.family)) + "-feedback-seed" +
                         std::to_string(options.seed);

  Rng rng(options.seed);
  for (const auto& t : targets) {
    fs.anchors[t] = options.geometry == FeedbackGeometry::kAnchor
                        ? rng.uniform_int(spec.factor(t).cardinality)
                        : -1;
  }

  // Split budget/2 pairs as evenly as possible over the targets.
  const int total_pairs = options.budget / 2;
  const std::vector<int> target_indices = spec.target_indices();
  std::vector<int> values(spec.factors.size());
  std::uint64_t render_stream = 0;
  for (int t = 0; t < num_targets; ++t) {
    const int shared = spec.index_of(targets[t]);
    const int count = total_pairs / num_targets + (t < total_pairs % num_targets ? 1 : 0);
    for (int p = 0; p < count; ++p) {
      const int shared_value = options.geometry == FeedbackGeometry::kAnchor
                                   ? fs.anchors[targets[t]]
                                   : rng.uniform_int(spec.factors[shared].cardinality);
      int members[2];
      for (int& member : members) {
        for (std::size_t i = 0; i < values.size(); ++i) {
          values[i] = rng.uniform_int(spec.factors[i].cardinality);
        }
        values[shared] = shared_value;
        member = fs.samples.append(values, derive_seed(options.seed, render_stream++));
        for (int ti : target_indices) {
          fs.labels.push_back({member, spec.factors[ti].name, values[ti]});
        }
      }
      fs.pairs.push_back({members[0], members[1], targets[t]});
    }
  }
  return fs;
}

}  // namespace dbvae::datasets
