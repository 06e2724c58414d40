#include "dbvae/model/probes.hpp"

#include <cmath>

#include "dbvae/error.hpp"
#include "dbvae/rng.hpp"

namespace dbvae::model {
namespace {

template <typename T>
LinearProbe<T> make_probe(std::vector<int> inputs, int classes, const std::string& name, Rng& rng) {
  const int in = static_cast<int>(inputs.size());
  LinearProbe<T> probe{std::move(inputs),
                       {name + ".weight", Matrix<T>::Zero(classes, in), Matrix<T>::Zero(classes, in)},
                       {name + ".bias", Matrix<T>::Zero(classes, 1), Matrix<T>::Zero(classes, 1)}};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index j = 0; j < probe.weight.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < probe.weight.value.rows(); ++i) {
      probe.weight.value(i, j) = static_cast<T>(rng.uniform(-bound, bound));
    }
  }
  return probe;
}

}  // namespace

template <typename T>
Matrix<T> LinearProbe<T>::logits(const Matrix<T>& codes) const {
  Matrix<T> out = weight.value * gather_rows(codes, inputs);
  out.colwise() += bias.value.col(0);
  return out;
}

template <typename T>
ProbeBank<T>::ProbeBank(const LatentPartition& partition,
                        const std::vector<std::pair<std::string, int>>& factor_cardinalities,
                        std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& [factor, card] : factor_cardinalities) {
    require(card >= 2, "probe factor '" + factor + "' needs cardinality >= 2");
    entries_.push_back({factor, card,
                        make_probe<T>(partition.indices(factor), card, "probe." + factor + ".pos", rng),
                        make_probe<T>(partition.complement(factor), card, "probe." + factor + ".neg", rng)});
  }
}

template <typename T>
const typename ProbeBank<T>::Entry& ProbeBank<T>::entry(const std::string& factor) const {
  for (const auto& e : entries_) {
    if (e.factor == factor) return e;
  }
  throw Error(ErrorKind::kInvalidArgument, "no probes for factor '" + factor + "'");
}

template <typename T>
typename ProbeBank<T>::Entry& ProbeBank<T>::entry(const std::string& factor) {
  return const_cast<Entry&>(std::as_const(*this).entry(factor));
}

template <typename T>
std::vector<nn::Parameter<T>*> ProbeBank<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  for (auto& e : entries_) {
    out.push_back(&e.positive.weight);
    out.push_back(&e.positive.bias);
    out.push_back(&e.negative.weight);
    out.push_back(&e.negative.bias);
  }
  return out;
}

template <typename T>
void ProbeBank<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.setZero();
}

template struct LinearProbe<float>;
template struct LinearProbe<double>;
template class ProbeBank<float>;
template class ProbeBank<double>;

}  // namespace dbvae::model
