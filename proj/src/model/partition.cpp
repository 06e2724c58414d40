#include "dbvae/model/partition.hpp"

#include "dbvae/error.hpp"

namespace dbvae::model {

LatentPartition::LatentPartition(int total_dims, std::vector<LatentBlock> blocks)
    : total_dims_(total_dims), blocks_(std::move(blocks)) {
  require(total_dims_ >= static_cast<int>(blocks_.size()),
          "latent dims must be at least the number of target factors");
  std::vector<bool> used(total_dims_, false);
  for (const auto& b : blocks_) {
    require(b.begin >= 0 && b.end <= total_dims_ && b.begin < b.end,
            "latent block for '" + b.factor + "' is out of range");
    for (int d = b.begin; d < b.end; ++d) {
      require(!used[d], "latent blocks overlap at dim " + std::to_string(d));
      used[d] = true;
    }
  }
}

LatentPartition LatentPartition::contiguous(int total_dims, const std::vector<std::string>& targets,
                                            int block_size) {
  require(block_size >= 1, "block size must be positive");
  require(static_cast<int>(targets.size()) * block_size <= total_dims,
          "latent dims too small for the requested blocks");
  std::vector<LatentBlock> blocks;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int begin = static_cast<int>(i) * block_size;
    blocks.push_back({targets[i], begin, begin + block_size});
  }
  return LatentPartition(total_dims, std::move(blocks));
}

bool LatentPartition::has_block(std::string_view factor) const {
  for (const auto& b : blocks_) {
    if (b.factor == factor) return true;
  }
  return false;
}

const LatentBlock& LatentPartition::block(std::string_view factor) const {
  for (const auto& b : blocks_) {
    if (b.factor == factor) return b;
  }
  throw Error(ErrorKind::kInvalidArgument, "factor '" + std::string(factor) + "' has no latent block");
}

std::vector<int> LatentPartition::indices(std::string_view factor) const {
  const auto& b = block(factor);
  std::vector<int> out;
  for (int d = b.begin; d < b.end; ++d) out.push_back(d);
  return out;
}

std::vector<int> LatentPartition::complement(std::string_view factor) const {
  const auto& b = block(factor);
  std::vector<int> out;
  for (int d = 0; d < total_dims_; ++d) {
    if (d < b.begin || d >= b.end) out.push_back(d);
  }
  return out;
}

std::vector<int> LatentPartition::nuisance() const {
  std::vector<bool> used(total_dims_, false);
  for (const auto& b : blocks_) {
    for (int d = b.begin; d < b.end; ++d) used[d] = true;
  }
  std::vector<int> out;
  for (int d = 0; d < total_dims_; ++d) {
    if (!used[d]) out.push_back(d);
  }
  return out;
}

void to_json(nlohmann::json& j, const LatentPartition& p) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : p.blocks()) blocks.push_back({{"factor", b.factor}, {"begin", b.begin}, {"end", b.end}});
  j = {{"total_dims", p.total_dims()}, {"blocks", blocks}};
}

void from_json(const nlohmann::json& j, LatentPartition& p) {
  std::vector<LatentBlock> blocks;
  for (const auto& b : j.at("blocks")) {
    blocks.push_back({b.at("factor").get<std::string>(), b.at("begin").get<int>(), b.at("end").get<int>()});
  }
  p = LatentPartition(j.at("total_dims").get<int>(), std::move(blocks));
}

}  // namespace dbvae::model
