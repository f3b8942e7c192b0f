#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "planeval/core.hpp"

namespace planeval {

// Constant added after the x100 scaling so zero-dose metrics stay positive
// under the geometric mean.
constexpr double kNormalizationEpsilon = 1e-6;

struct NormalizedPlan {
  std::string plan_id;
  std::map<std::string, double> normalized;  // metric_id -> raw/limit*100 + eps
  double gm_score = 0.0;
};

// normalized_i = raw_i / limit_i * 100 + eps. Plan must already be validated.
std::map<std::string, double> normalize_metrics(const PlanRecord& plan,
                                                const ProtocolSpec& spec);

// Geometric mean, computed in log space.
double geometric_mean(std::span<const double> values);

NormalizedPlan score_plan(const PlanRecord& plan, const ProtocolSpec& spec);

// Midrank percentile of `gm` within `cohort_gms`; lower gm maps to a higher
// percentile. With member=true the plan itself is one of the cohort values
// and is excluded from its own tie count; with member=false the plan is
// virtually inserted (N grows by one).
double percentile_rank(double gm, std::span<const double> cohort_gms, bool member);

// Scores every plan against the full input cohort (member=true). Output
// order matches input order.
std::vector<KBEntry> score_cohort(std::span<const PlanRecord> plans,
                                  const ProtocolSpec& spec);

}  // namespace planeval
