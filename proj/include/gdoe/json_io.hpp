#pragma once

// JSON forms of the design-core types, shared by the model and project files.

#include <json.hpp>

#include "gdoe/design.hpp"
#include "gdoe/geometry_types.hpp"

namespace gdoe {

nlohmann::json to_json(const Level& level);
Level level_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FactorSpec& factor);
FactorSpec factor_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ColumnMap& map);
ColumnMap column_map_from_json(const nlohmann::json& j);

/// Trials stored as arrays of raw levels, plus ids and provenance. Factors
/// are stored alongside so the object is self-describing.
nlohmann::json to_json(const Design& design);
Design design_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NoiseConfig& noise);
NoiseConfig noise_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Point2& p);
Point2 point_from_json(const nlohmann::json& j);

}  // namespace gdoe
