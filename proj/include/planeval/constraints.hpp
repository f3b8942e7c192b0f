#pragma once

#include "planeval/core.hpp"

namespace planeval {

// Lists exactly the metrics with raw strictly above the limit (equality
// passes), in canonical metric_id order. Zero tolerance: limits are hard
// ceilings.
ViolationReport check_constraints(const PlanRecord& plan, const ProtocolSpec& spec);

}  // namespace planeval
