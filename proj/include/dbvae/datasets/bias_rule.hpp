#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dbvae/datasets/factor_spec.hpp"

namespace dbvae::datasets {

// Deterministic coupling b = (mapping[a] + offset) mod K between two factors
// of equal cardinality. The train split uses offset 0; shifted test splits
// use a nonzero offset or the reversed mapping.
struct BiasRule {
  std::string factor_a;
  std::string factor_b;
  std::vector<int> mapping;
  int offset = 0;

  static BiasRule diagonal(std::string a, std::string b, int cardinality);
  static BiasRule reverse(std::string a, std::string b, int cardinality);

  // Accepts "diag", "reverse" or "offset:<k>" (diagonal mapping plus k);
  // "none" yields an empty optional (independent factors). The rule couples
  // the first two target factors of `spec`.
  static std::optional<BiasRule> parse(std::string_view text, const FactorSpec& spec);

  int cardinality() const { return static_cast<int>(mapping.size()); }
  int apply(int value_a) const;
  BiasRule shifted(int k) const;

  // Throws on unknown factors, cardinality mismatch or a non-bijective mapping.
  void validate(const FactorSpec& spec) const;

  friend bool operator==(const BiasRule&, const BiasRule&) = default;
};

void to_json(nlohmann::json& j, const BiasRule& rule);
void from_json(const nlohmann::json& j, BiasRule& rule);

}  // namespace dbvae::datasets
