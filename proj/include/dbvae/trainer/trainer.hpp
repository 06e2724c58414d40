#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbvae/datasets/dataset.hpp"
#include "dbvae/datasets/feedback.hpp"
#include "dbvae/losses/losses.hpp"
#include "dbvae/model/probes.hpp"
#include "dbvae/model/vae.hpp"

namespace dbvae::trainer {

enum class Variant { kProposed, kNoLabels, kBaselineBetaVae };

std::string to_string(Variant v);

struct TrainingConfig {
  std::string name = "proposed";
  losses::LossWeights weights;
  int batch_size = 128;
  int feedback_batch_size = 16;  // pairs per target factor per step
  int epochs = 20;
  double learning_rate = 1e-3;
  double probe_learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::string preset = "glyphs10";
  int latent_dims = 0;  // 0: preset default
  bool no_labels = false;
  bool baseline_beta_vae = false;

  static TrainingConfig proposed(double lambda_mp_pos = 10.0, double lambda_neg = 1.0);
  static TrainingConfig no_labels_ablation(double lambda_mp = 10.0);
  static TrainingConfig beta_vae(double beta);

  Variant variant() const;
  // Throws kInvalidArgument; returns non-fatal warnings.
  std::vector<std::string> validate() const;
};

void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);
TrainingConfig load_config(const std::filesystem::path& path);
void save_config(const TrainingConfig& config, const std::filesystem::path& path);

struct LogRow {
  int epoch = 0;
  long step = 0;
  losses::LossBreakdown loss;
};

// One optimizer update: which optimizer ran and the parameters it touched.
struct StepEvent {
  long step = 0;
  std::string optimizer;  // "probe" or "vae"
  std::vector<std::string> parameters;
};

struct TrainOptions {
  // Checkpoint, log and config are written here when set.
  std::filesystem::path out_dir;
  // Continue from out_dir/checkpoint.bin when present.
  bool resume = false;
  std::function<void(const StepEvent&)> on_step;
  std::function<void(int epoch, const LogRow& mean)> on_epoch;
};

struct TrainResult {
  std::unique_ptr<model::VaeModel<float>> model;
  std::unique_ptr<model::ProbeBank<float>> probes;  // null unless proposed
  std::vector<LogRow> log;
  std::vector<std::string> warnings;
};

inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kLogFile = "training_log.csv";
inline constexpr const char* kConfigFile = "config.json";

// Alternating schedule per step: probes are fitted on the detached codes of
// the feedback members, then the VAE takes one step on the full objective
// with the probes frozen. A non-finite loss throws kNumeric and leaves the
// last epoch checkpoint in place.
TrainResult train(const TrainingConfig& config, const datasets::Dataset& data,
                  const datasets::FeedbackSet* feedback, const TrainOptions& options = {});

// Mean breakdown per epoch.
std::vector<LogRow> epoch_means(const std::vector<LogRow>& log);

void write_log_csv(const std::vector<LogRow>& rows, const std::vector<std::string>& factors,
                   const std::filesystem::path& path);

}  // namespace dbvae::trainer
