#include "gdoe/json_io.hpp"

#include "gdoe/error.hpp"

namespace gdoe {

using nlohmann::json;

json to_json(const Level& level) {
  if (const auto* number = std::get_if<double>(&level)) return *number;
  return std::get<std::string>(level);
}

Level level_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorCode::kValidation, "a level must be a number or a string");
}

json to_json(const FactorSpec& factor) {
  json levels = json::array();
  for (const auto& level : factor.levels) levels.push_back(to_json(level));
  json out = {{"name", factor.name}, {"kind", to_string(factor.kind)}, {"levels", levels}};
  if (factor.is_numeric()) out["transform"] = to_string(factor.transform);
  return out;
}

FactorSpec factor_from_json(const json& j) {
  FactorSpec factor;
  factor.name = j.at("name").get<std::string>();
  factor.kind = factor_kind_from_string(j.at("kind").get<std::string>());
  factor.transform = transform_from_string(j.value("transform", std::string("identity")));
  for (const auto& level : j.at("levels")) factor.levels.push_back(level_from_json(level));
  factor.validate();
  return factor;
}

json to_json(const ColumnMap& map) {
  json factors = json::array();
  json blocks = json::array();
  for (std::size_t i = 0; i < map.factors.size(); ++i) {
    factors.push_back(to_json(map.factors[i]));
    blocks.push_back({{"factor", map.factors[i].name},
                      {"offset", map.blocks[i].offset},
                      {"width", map.blocks[i].width},
                      {"rule", to_string(map.blocks[i].rule)}});
  }
  return {{"factors", factors}, {"blocks", blocks}};
}

ColumnMap column_map_from_json(const json& j) {
  std::vector<FactorSpec> factors;
  for (const auto& item : j.at("factors")) factors.push_back(factor_from_json(item));
  ColumnMap map = ColumnMap::from_factors(factors);
  // The stored blocks must agree with what the factors imply.
  const auto& blocks = j.at("blocks");
  if (blocks.size() != map.blocks.size()) {
    throw Error(ErrorCode::kValidation, "column map block count does not match its factors");
  }
  for (std::size_t i = 0; i < map.blocks.size(); ++i) {
    if (blocks[i].at("offset").get<std::size_t>() != map.blocks[i].offset ||
        blocks[i].at("width").get<std::size_t>() != map.blocks[i].width ||
        encoding_rule_from_string(blocks[i].at("rule").get<std::string>()) != map.blocks[i].rule) {
      throw Error(ErrorCode::kValidation,
                  "column map block for '" + map.factors[i].name + "' is inconsistent");
    }
  }
  return map;
}

json to_json(const Design& design) {
  json factors = json::array();
  for (const auto& factor : design.factors) factors.push_back(to_json(factor));
  json trials = json::array();
  for (const auto& trial : design.trials) {
    json row = json::array();
    for (const auto& level : trial) row.push_back(to_json(level));
    trials.push_back(std::move(row));
  }
  return {{"provenance", to_string(design.provenance)},
          {"factors", factors},
          {"trial_ids", design.trial_ids},
          {"trials", trials}};
}

Design design_from_json(const json& j) {
  Design design;
  design.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  for (const auto& item : j.at("factors")) design.factors.push_back(factor_from_json(item));
  design.trial_ids = j.at("trial_ids").get<std::vector<std::int64_t>>();
  for (const auto& row : j.at("trials")) {
    Trial trial;
    for (const auto& level : row) trial.push_back(level_from_json(level));
    design.trials.push_back(std::move(trial));
  }
  design.validate();
  return design;
}

json to_json(const NoiseConfig& noise) {
  return {{"enabled", noise.enabled}, {"alpha", noise.alpha}};
}

NoiseConfig noise_from_json(const json& j) {
  NoiseConfig noise;
  noise.enabled = j.value("enabled", false);
  noise.alpha = j.value("alpha", 0.0);
  noise.validate();
  return noise;
}

json to_json(const Point2& p) { return json::array({p.x, p.y}); }

Point2 point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw Error(ErrorCode::kValidation, "a latent point must be a [x, y] array");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace gdoe
