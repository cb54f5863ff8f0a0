#pragma once

#include <string_view>

namespace stresskit::resources {

/// JSON schema every pipeline report is validated against (schemas/pipeline_report.schema.json).
std::string_view report_schema();

/// Versioned built-in hyperparameter grids (data/default_grids.json).
std::string_view default_grids();

}  // namespace stresskit::resources
