#include "planeval/constraints.hpp"

#include "planeval/scoring.hpp"

namespace planeval {

ViolationReport check_constraints(const PlanRecord& plan, const ProtocolSpec& spec) {
  validate_plan(plan, spec);
  ViolationReport report;
  for (const auto& c : spec.constraints) {
    const double raw = plan.metrics.at(c.metric_id);
    if (raw > c.limit) {
      report.violations.push_back(
          Violation{c.metric_id, raw, c.limit, raw / c.limit * 100.0 + kNormalizationEpsilon});
    }
  }
  return report;
}

}  // namespace planeval
