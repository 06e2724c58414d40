#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbvae/model/probes.hpp"
#include "dbvae/model/vae.hpp"
#include "dbvae/nn/adam.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::model {

struct NamedArray {
  std::string name;
  Matrix<float> values;
};

// Binary container: "DBVAECKP", u32 LE format version, u64 LE JSON length and
// bytes, u64 LE rng-state length and bytes, u32 LE array count, then per
// array u32 name length, name, u32 rows, u32 cols and column-major f32 LE.
struct CheckpointArchive {
  static constexpr std::uint32_t kFormatVersion = 1;

  nlohmann::json meta;
  std::string rng_state;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

// Writes atomically (temp file + rename) so a crash keeps the previous file.
void write_archive(const CheckpointArchive& archive, const std::filesystem::path& path);
CheckpointArchive read_archive(const std::filesystem::path& path);

// Full training snapshot. `probes` and the optimizers may be null.
struct CheckpointRefs {
  VaeModel<float>* model = nullptr;
  ProbeBank<float>* probes = nullptr;
  nn::Adam<float>* vae_optimizer = nullptr;
  nn::Adam<float>* probe_optimizer = nullptr;
  const Rng* rng = nullptr;
  nlohmann::json extra;
};

void save_checkpoint(const CheckpointRefs& refs, const std::filesystem::path& path);

struct LoadedCheckpoint {
  std::unique_ptr<VaeModel<float>> model;
  std::unique_ptr<ProbeBank<float>> probes;
  Rng rng;
  nlohmann::json extra;
  CheckpointArchive archive;
};

// Refuses archives whose version tag differs from the current model version.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Restores optimizer moments saved under `prefix` ("vae_opt" / "probe_opt").
void restore_optimizer(const CheckpointArchive& archive, const std::string& prefix,
                       nn::Adam<float>& optimizer);

}  // namespace dbvae::model
