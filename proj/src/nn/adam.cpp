#include "dbvae/nn/adam.hpp"

#include <cmath>
#include <map>

#include "dbvae/error.hpp"

namespace dbvae::nn {

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, Options options)
    : params_(std::move(params)), options_(options) {
  for (auto* p : params_) {
    first_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    second_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->grad.setZero();
}

template <typename T>
void Adam<T>::step() {
  ++steps_;
  const T b1 = static_cast<T>(options_.beta1);
  const T b2 = static_cast<T>(options_.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(options_.beta1, steps_));
  const T correction2 = static_cast<T>(1.0 - std::pow(options_.beta2, steps_));
  const T lr = static_cast<T>(options_.learning_rate);
  const T eps = static_cast<T>(options_.epsilon);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& g = params_[i]->grad;
    first_[i] = b1 * first_[i] + (T(1) - b1) * g;
    second_[i] = b2 * second_[i] + (T(1) - b2) * g.cwiseProduct(g);
    params_[i]->value.array() -=
        lr * (first_[i].array() / correction1) /
        ((second_[i].array() / correction2).sqrt() + eps);
  }
}

template <typename T>
std::vector<std::pair<std::string, const Matrix<T>*>> Adam<T>::state() const {
  std::vector<std::pair<std::string, const Matrix<T>*>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back(params_[i]->name + ".m", &first_[i]);
    out.emplace_back(params_[i]->name + ".v", &second_[i]);
  }
  return out;
}

template <typename T>
void Adam<T>::load_state(const std::vector<std::pair<std::string, Matrix<T>>>& moments, long steps) {
  std::map<std::string, const Matrix<T>*> by_name;
  for (const auto& [name, m] : moments) by_name[name] = &m;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto [suffix, target] : {std::pair{".m", &first_[i]}, std::pair{".v", &second_[i]}}) {
      const auto it = by_name.find(params_[i]->name + suffix);
      if (it == by_name.end() || it->second->rows() != target->rows() ||
          it->second->cols() != target->cols()) {
        throw Error(ErrorKind::kConsistency, "optimizer state missing or mis-shaped for " +
                                                 params_[i]->name + suffix);
      }
      *target = *it->second;
    }
  }
  steps_ = steps;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace dbvae::nn
