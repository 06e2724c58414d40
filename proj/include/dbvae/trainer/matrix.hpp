#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dbvae/datasets/feedback.hpp"
#include "dbvae/metrics/metrics.hpp"
#include "dbvae/trainer/trainer.hpp"

namespace dbvae::trainer {

// How each seed's data is generated. Every config of a seed sees the same
// splits and feedback.
struct MatrixData {
  std::string family = "glyphs10";
  std::string train_rule = "diag";
  std::string test_rule = "reverse";
  int train_size = 10000;
  int test_size = 2000;
  int unbiased_size = 5000;
  int feedback_budget = 600;
  datasets::FeedbackGeometry geometry = datasets::FeedbackGeometry::kAnchor;
};

struct CellResult {
  std::string config;
  std::string variant;
  std::uint64_t seed = 0;
  std::string status;  // "done", "skipped" (already done) or "failed"
  std::string error;
  metrics::MetricsReport report;
  std::filesystem::path dir;

  bool succeeded() const { return status != "failed"; }
};

struct MatrixOptions {
  std::filesystem::path out_dir;
  MatrixData data;
  // The seed is replaced per cell.
  metrics::EvaluationOptions evaluation;
  std::function<void(const CellResult&)> on_cell;
};

struct MatrixResult {
  std::vector<CellResult> cells;
  std::filesystem::path aggregate_csv;
  std::filesystem::path means_csv;
};

inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kCellFile = "cell.json";
inline constexpr const char* kErrorFile = "error.json";
inline constexpr const char* kAggregateFile = "aggregate.csv";
inline constexpr const char* kMeansFile = "aggregate_means.csv";

// Trains and evaluates every (config, seed) cell under
// out_dir/<config name>_s<seed>. Cells holding metrics.json are loaded, not
// rerun; a failing cell records error.json and the matrix continues.
MatrixResult run_matrix(const std::vector<TrainingConfig>& configs, const std::vector<std::uint64_t>& seeds,
                        const MatrixOptions& options);

// Cells found below `dir` (one level), sorted by (config, seed).
std::vector<CellResult> collect_cells(const std::filesystem::path& dir);

// One row per cell: config,variant,seed,status then flattened metrics
// (empty for failed cells).
void write_aggregate_csv(const std::vector<CellResult>& cells, const std::filesystem::path& path);

// One row per config: config,variant,cells then the mean of each metric over
// its successful cells.
void write_means_csv(const std::vector<CellResult>& cells, const std::filesystem::path& path);

}  // namespace dbvae::trainer
