#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dbvae/error.hpp"
#include "dbvae/nn/layers.hpp"

namespace dbvae::model {

using nn::Matrix;

struct LatentBlock {
  std::string factor;
  int begin = 0;
  int end = 0;  // exclusive
  int size() const { return end - begin; }
  friend bool operator==(const LatentBlock&, const LatentBlock&) = default;
};

// One block of latent dimensions per target factor; every dimension not in
// a block belongs to the nuisance block.
class LatentPartition {
 public:
  LatentPartition() = default;
  LatentPartition(int total_dims, std::vector<LatentBlock> blocks);

  // Consecutive blocks of `block_size` dims in target order, nuisance last.
  static LatentPartition contiguous(int total_dims, const std::vector<std::string>& targets,
                                    int block_size);

  int total_dims() const { return total_dims_; }
  const std::vector<LatentBlock>& blocks() const { return blocks_; }
  bool has_block(std::string_view factor) const;
  // Throws kInvalidArgument when the factor has no block.
  const LatentBlock& block(std::string_view factor) const;

  std::vector<int> indices(std::string_view factor) const;
  std::vector<int> complement(std::string_view factor) const;
  std::vector<int> nuisance() const;

  // Rows of `codes` (m x B) per block, then the nuisance rows.
  template <typename T>
  std::vector<Matrix<T>> split(const Matrix<T>& codes) const;
  // Inverse of split.
  template <typename T>
  Matrix<T> assemble(const std::vector<Matrix<T>>& parts) const;

  friend bool operator==(const LatentPartition&, const LatentPartition&) = default;

 private:
  int total_dims_ = 0;
  std::vector<LatentBlock> blocks_;
};

void to_json(nlohmann::json& j, const LatentPartition& p);
void from_json(const nlohmann::json& j, LatentPartition& p);

template <typename T>
Matrix<T> gather_rows(const Matrix<T>& m, const std::vector<int>& rows) {
  Matrix<T> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

template <typename T>
void scatter_add_rows(Matrix<T>& m, const std::vector<int>& rows, const Matrix<T>& values) {
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(rows[i]) += values.row(i);
}

template <typename T>
std::vector<Matrix<T>> LatentPartition::split(const Matrix<T>& codes) const {
  std::vector<Matrix<T>> parts;
  for (const auto& b : blocks_) parts.push_back(codes.middleRows(b.begin, b.size()));
  parts.push_back(gather_rows(codes, nuisance()));
  return parts;
}

template <typename T>
Matrix<T> LatentPartition::assemble(const std::vector<Matrix<T>>& parts) const {
  require(parts.size() == blocks_.size() + 1, "assemble: wrong number of parts");
  const Eigen::Index cols = parts.front().cols();
  Matrix<T> codes = Matrix<T>::Zero(total_dims_, cols);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    require(parts[i].rows() == blocks_[i].size() && parts[i].cols() == cols, "assemble: block shape");
    codes.middleRows(blocks_[i].begin, blocks_[i].size()) = parts[i];
  }
  const auto rest = nuisance();
  require(parts.back().rows() == static_cast<Eigen::Index>(rest.size()), "assemble: nuisance shape");
  for (std::size_t i = 0; i < rest.size(); ++i) codes.row(rest[i]) = parts.back().row(i);
  return codes;
}

}  // namespace dbvae::model
