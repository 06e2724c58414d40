#include "dbvae/datasets/factor_spec.hpp"

#include <set>

#include "dbvae/error.hpp"

namespace dbvae::datasets {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::kGlyphs10: return "glyphs10";
    case Family::kSprites: return "sprites";
    case Family::kScene: return "scene";
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  if (name == "glyphs10") return Family::kGlyphs10;
  if (name == "sprites") return Family::kSprites;
  if (name == "scene") return Family::kScene;
  throw Error(ErrorKind::kInvalidArgument, "unknown family '" + std::string(name) + "'");
}

FactorSpec FactorSpec::preset(Family family, std::uint64_t palette_seed) {
  FactorSpec spec;
  spec.family = family;
  spec.palette_seed = palette_seed;
  switch (family) {
    case Family::kGlyphs10:
      spec.factors = {{"shape", 10, true}, {"color", 10, true}};
      spec.dims = {28, 28, 3};
      break;
    case Family::kSprites:
      spec.factors = {{"shape", 3, true},
                      {"color", 3, true},
                      {"x_position", 8, false},
                      {"y_position", 8, false},
                      {"scale", 4, false}};
      spec.dims = {64, 64, 3};
      break;
    case Family::kScene:
      spec.factors = {{"shape", 4, true},
                      {"color", 4, true},
                      {"wall_hue", 4, false},
                      {"floor_hue", 4, false},
                      {"scale", 4, false}};
      spec.dims = {64, 64, 3};
      break;
  }
  return spec;
}

int FactorSpec::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].name == name) return static_cast<int>(i);
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown factor '" + std::string(name) + "'");
}

std::vector<int> FactorSpec::target_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].is_target) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<std::string> FactorSpec::target_names() const {
  std::vector<std::string> out;
  for (const auto& f : factors) {
    if (f.is_target) out.push_back(f.name);
  }
  return out;
}

void FactorSpec::validate() const {
  std::set<std::string> names;
  int targets = 0;
  for (const auto& f : factors) {
    require(f.cardinality >= 2, "factor '" + f.name + "' needs cardinality >= 2");
    require(names.insert(f.name).second, "duplicate factor name '" + f.name + "'");
    targets += f.is_target ? 1 : 0;
  }
  require(targets >= 2, "a factor spec needs at least two target factors");
  require(dims.height > 0 && dims.width > 0 && dims.channels > 0, "image dims must be positive");
}

bool operator==(const FactorSpec& a, const FactorSpec& b) {
  if (a.family != b.family || !(a.dims == b.dims) || a.palette_seed != b.palette_seed ||
      a.factors.size() != b.factors.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.factors.size(); ++i) {
    const auto& fa = a.factors[i];
    const auto& fb = b.factors[i];
    if (fa.name != fb.name || fa.cardinality != fb.cardinality || fa.is_target != fb.is_target) {
      return false;
    }
  }
  return true;
}

void to_json(nlohmann::json& j, const FactorSpec& spec) {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : spec.factors) {
    factors.push_back({{"name", f.name}, {"cardinality", f.cardinality}, {"is_target", f.is_target}});
  }
  j = {{"family", std::string(to_string(spec.family))},
       {"factors", factors},
       {"image_dims", {spec.dims.height, spec.dims.width, spec.dims.channels}},
       {"palette_seed", spec.palette_seed}};
}

void from_json(const nlohmann::json& j, FactorSpec& spec) {
  spec.family = family_from_string(j.at("family").get<std::string>());
  spec.factors.clear();
  for (const auto& f : j.at("factors")) {
    spec.factors.push_back(
        {f.at("name").get<std::string>(), f.at("cardinality").get<int>(), f.at("is_target").get<bool>()});
  }
  const auto& dims = j.at("image_dims");
  spec.dims = {dims.at(0).get<int>(), dims.at(1).get<int>(), dims.at(2).get<int>()};
  spec.palette_seed = j.value("palette_seed", std::uint64_t{0});
  spec.validate();
}

}  // namespace dbvae::datasets
