#include "dbvae/datasets/bias_rule.hpp"

#include <charconv>
#include <numeric>

#include "dbvae/error.hpp"

namespace dbvae::datasets {

BiasRule BiasRule::diagonal(std::string a, std::string b, int cardinality) {
  BiasRule rule{std::move(a), std::move(b), std::vector<int>(cardinality), 0};
  std::iota(rule.mapping.begin(), rule.mapping.end(), 0);
  return rule;
}

BiasRule BiasRule::reverse(std::string a, std::string b, int cardinality) {
  BiasRule rule{std::move(a), std::move(b), std::vector<int>(cardinality), 0};
  for (int v = 0; v < cardinality; ++v) rule.mapping[v] = cardinality - 1 - v;
  return rule;
}

std::optional<BiasRule> BiasRule::parse(std::string_view text, const FactorSpec& spec) {
  if (text == "none") return std::nullopt;
  const auto targets = spec.target_names();
  require(targets.size() >= 2, "bias rule needs two target factors");
  const int card = spec.factor(targets[0]).cardinality;
  if (text == "diag") return diagonal(targets[0], targets[1], card);
  if (text == "reverse") return reverse(targets[0], targets[1], card);
  if (text.starts_with("offset:")) {
    const auto digits = text.substr(7);
    int k = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    require(ec == std::errc() && ptr == digits.data() + digits.size(),
            "bad offset in rule '" + std::string(text) + "'");
    return diagonal(targets[0], targets[1], card).shifted(k);
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown bias rule '" + std::string(text) + "'");
}

int BiasRule::apply(int value_a) const {
  const int k = cardinality();
  require(value_a >= 0 && value_a < k, "bias rule input out of range");
  return ((mapping[value_a] + offset) % k + k) % k;
}

BiasRule BiasRule::shifted(int k) const {
  BiasRule out = *this;
  out.offset += k;
  return out;
}

void BiasRule::validate(const FactorSpec& spec) const {
  const int ca = spec.factor(factor_a).cardinality;
  const int cb = spec.factor(factor_b).cardinality;
  require(factor_a != factor_b, "bias rule must couple two distinct factors");
  if (ca != cb || ca != cardinality()) {
    throw Error(ErrorKind::kInvalidArgument,
                "bias rule cardinality mismatch between '" + factor_a + "' and '" + factor_b + "'");
  }
  std::vector<bool> seen(ca, false);
  for (int v : mapping) {
    require(v >= 0 && v < ca && !seen[v], "bias rule mapping is not a bijection");
    seen[v] = true;
  }
}

void to_json(nlohmann::json& j, const BiasRule& rule) {
  j = {{"factor_a", rule.factor_a},
       {"factor_b", rule.factor_b},
       {"mapping", rule.mapping},
       {"offset", rule.offset}};
}

void from_json(const nlohmann::json& j, BiasRule& rule) {
  rule.factor_a = j.at("factor_a").get<std::string>();
  rule.factor_b = j.at("factor_b").get<std::string>();
  rule.mapping = j.at("mapping").get<std::vector<int>>();
  rule.offset = j.at("offset").get<int>();
}

}  // namespace dbvae::datasets
