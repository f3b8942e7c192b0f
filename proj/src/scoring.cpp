#include "planeval/scoring.hpp"

#include <cmath>

namespace planeval {

std::map<std::string, double> normalize_metrics(const PlanRecord& plan,
                                                const ProtocolSpec& spec) {
  std::map<std::string, double> out;
  for (const auto& c : spec.constraints) {
    const double raw = plan.metrics.at(c.metric_id);
    out[c.metric_id] = raw / c.limit * 100.0 + kNormalizationEpsilon;
  }
  return out;
}

double geometric_mean(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::EmptyInput, "geometric mean of an empty list");
  }
  double log_sum = 0.0;
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::NonPositiveValue, "geometric mean requires positive values");
    }
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(values.size()));
}

NormalizedPlan score_plan(const PlanRecord& plan, const ProtocolSpec& spec) {
  NormalizedPlan out;
  out.plan_id = plan.plan_id;
  out.normalized = normalize_metrics(plan, spec);
  std::vector<double> values;
  values.reserve(out.normalized.size());
  for (const auto& [id, v] : out.normalized) values.push_back(v);
  out.gm_score = geometric_mean(values);
  return out;
}

double percentile_rank(double gm, std::span<const double> cohort_gms, bool member) {
  if (cohort_gms.empty()) {
    throw Error(ErrorCode::EmptyCohort, "percentile rank over an empty cohort");
  }
  std::size_t greater = 0;
  std::size_t equal = 0;
  for (double g : cohort_gms) {
    if (g > gm) ++greater;
    else if (g == gm) ++equal;
  }
  std::size_t n = cohort_gms.size();
  if (member) {
    if (equal == 0) {
      throw Error(ErrorCode::MemberNotFound, "gm_score not present in its cohort");
    }
    --equal;  // self does not count toward its own tie group
  } else {
    ++n;  // virtual insertion
  }
  return 100.0 / static_cast<double>(n) *
         (static_cast<double>(greater) + 0.5 * static_cast<double>(equal) + 0.5);
}

std::vector<KBEntry> score_cohort(std::span<const PlanRecord> plans,
                                  const ProtocolSpec& spec) {
  std::vector<KBEntry> entries;
  entries.reserve(plans.size());
  std::vector<double> gms;
  gms.reserve(plans.size());
  for (const auto& plan : plans) {
    validate_plan(plan, spec);
    NormalizedPlan scored = score_plan(plan, spec);
    KBEntry entry;
    entry.plan_id = plan.plan_id;
    entry.protocol_name = plan.protocol_name;
    entry.raw_metrics = plan.metrics;
    entry.normalized_metrics = std::move(scored.normalized);
    entry.gm_score = scored.gm_score;
    gms.push_back(entry.gm_score);
    entries.push_back(std::move(entry));
  }
  for (auto& entry : entries) {
    entry.percentile = percentile_rank(entry.gm_score, gms, /*member=*/true);
  }
  return entries;
}

}  // namespace planeval
