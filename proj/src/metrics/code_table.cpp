#include <algorithm>
#include <cmath>
#include <numeric>

#include "dbvae/error.hpp"
#include "dbvae/metrics/metrics.hpp"

namespace dbvae::metrics {

int CodeTable::factor_index(const std::string& name) const {
  for (std::size_t i = 0; i < factor_info.size(); ++i) {
    if (factor_info[i].name == name) return static_cast<int>(i);
  }
  throw Error(ErrorKind::kInvalidArgument, "code table has no factor '" + name + "'");
}

std::vector<int> CodeTable::target_columns() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < factor_info.size(); ++i) {
    if (factor_info[i].is_target) out.push_back(static_cast<int>(i));
  }
  return out;
}

void CodeTable::validate() const {
  const auto fail = [](const std::string& msg) { throw Error(ErrorKind::kConsistency, "code table: " + msg); };
  if (codes.rows() != factors.rows()) fail("code and factor row counts differ");
  if (factors.cols() != static_cast<Eigen::Index>(factor_info.size())) fail("factor columns do not match names");
  if (!codes.allFinite()) fail("non-finite codes");
  if (partition.total_dims() != 0 && partition.total_dims() != codes.cols()) fail("partition size mismatch");
  for (Eigen::Index c = 0; c < factors.cols(); ++c) {
    const int card = factor_info[c].cardinality;
    if (factors.rows() > 0 && (factors.col(c).minCoeff() < 0 || factors.col(c).maxCoeff() >= card)) {
      fail("factor '" + factor_info[c].name + "' out of range");
    }
  }
}

CodeTable encode_table(model::VaeModel<float>& vae, const datasets::Dataset& data, int batch) {
  require(batch >= 1, "encode_table: batch must be positive");
  CodeTable t;
  t.codes.resize(data.size, vae.latent_dims());
  t.factors.resize(data.size, data.spec.num_factors());
  t.factor_info = data.spec.factors;
  t.partition = vae.partition();
  t.split = data.split;
  std::vector<int> rows;
  for (int begin = 0; begin < data.size; begin += batch) {
    const int count = std::min(batch, data.size - begin);
    rows.resize(count);
    std::iota(rows.begin(), rows.end(), begin);
    const auto post = vae.encode(model::image_batch<float>(data, rows));
    t.codes.middleRows(begin, count) = post.mean.transpose().cast<double>();
  }
  for (int r = 0; r < data.size; ++r) {
    for (int c = 0; c < data.spec.num_factors(); ++c) t.factors(r, c) = data.factor(r, c);
  }
  t.validate();
  return t;
}

}  // namespace dbvae::metrics
