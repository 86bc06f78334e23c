#pragma once

#include "glmb/filter.hpp"

namespace glmb {

/// Untruncated prediction followed by an untruncated update, enumerating
/// every surviving subset, birth subset and positive 1-1 association map.
/// Intended as a reference for small instances: throws std::length_error
/// when more than `max_children` children would be generated.
[[nodiscard]] GlmbDensity two_stage_oracle(const GlmbDensity& density, const MeasurementSet& measurements,
                                           const Models& models, const BackendOptions& backend = {},
                                           std::size_t max_children = 100000);

}  // namespace glmb
