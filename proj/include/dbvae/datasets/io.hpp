#pragma once

#include <filesystem>

#include "dbvae/datasets/dataset.hpp"
#include "dbvae/datasets/feedback.hpp"

namespace dbvae::datasets {

// Directory layout:
//   meta.json    spec, rule, seed, split_tag, N
//   images.bin   "DBVAE001", u32 LE N, H, W, C, then N*H*W*C bytes
//   factors.csv  header = factor names, one row of integer codes per sample
// Malformed bytes raise kFormat; files that disagree raise kConsistency.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

// A dataset directory for the referenced samples plus pairs.csv
// (idx_a,idx_b,shared_factor), labels.csv (idx,factor,value) and
// feedback.json.
void write_feedback(const FeedbackSet& fs, const std::filesystem::path& dir);
FeedbackSet read_feedback(const std::filesystem::path& dir);

}  // namespace dbvae::datasets
