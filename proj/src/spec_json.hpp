#pragma once

#include <nlohmann/json.hpp>

#include "sppb/regressor.hpp"

namespace sppb::detail {

nlohmann::ordered_json spec_to_json(const RegressorSpec& spec);
RegressorSpec spec_from_json(const nlohmann::ordered_json& j);

}  // namespace sppb::detail
