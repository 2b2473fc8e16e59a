#pragma once

// Internal JSON conversions shared between data and harness sources.

#include <json.hpp>

#include "tailfuse/data.hpp"

namespace tailfuse::detail {

nlohmann::json generator_to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_from_json(const nlohmann::json& j);

}  // namespace tailfuse::detail
