#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "planeval/error.hpp"

namespace planeval {

enum class MetricKind {
  MaxDose,
  MeanDose,
  DoseAtVolumePct,
  DoseAtVolumeCc,
  VolumeAtDosePct,
  VolumeAtDoseGy,
};

const char* metric_kind_name(MetricKind kind);
MetricKind metric_kind_from_name(std::string_view name);

// One protocol-mandated dose-volume endpoint with its upper limit. All limits
// are ceilings; the plan value and the limit share `unit`.
struct ConstraintSpec {
  std::string metric_id;
  std::string structure;
  MetricKind kind = MetricKind::MaxDose;
  double limit = 0.0;
  std::string unit;  // "Gy" | "%" | "cc"

  bool operator==(const ConstraintSpec&) const = default;
};

struct ProtocolSpec {
  std::string name;
  std::vector<ConstraintSpec> constraints;  // canonical: sorted by metric_id

  const ConstraintSpec* find(std::string_view metric_id) const;

  bool operator==(const ProtocolSpec&) const = default;
};

struct PlanRecord {
  std::string plan_id;
  std::string protocol_name;
  std::map<std::string, double> metrics;  // metric_id -> raw value

  bool operator==(const PlanRecord&) const = default;
};

// A scored plan as stored in the knowledge base.
struct KBEntry {
  std::string plan_id;
  std::string protocol_name;
  std::map<std::string, double> raw_metrics;
  std::map<std::string, double> normalized_metrics;
  double gm_score = 0.0;
  double percentile = 0.0;

  bool operator==(const KBEntry&) const = default;
};

struct RetrievalConfig {
  double alpha = 0.0;
  double beta_norm = 1.0;
  double beta_raw = 0.0;
  int k = 4;

  // Weights scaled onto the simplex. Throws InvalidConfig on negative
  // weights, zero weight sum, or k outside [3, 10].
  RetrievalConfig normalized() const;

  bool operator==(const RetrievalConfig&) const = default;
};

constexpr int kRetrievalDepthMin = 3;
constexpr int kRetrievalDepthMax = 10;

struct ScoredNeighbor {
  std::string plan_id;
  double s_text = 0.0;
  double s_norm = 0.0;
  double s_raw = 0.0;
  double combined = 0.0;
  double percentile = 0.0;

  bool operator==(const ScoredNeighbor&) const = default;
};

struct PredictionResult {
  double nn_percentile = 0.0;
  double weighted_avg_percentile = 0.0;
  double weighted_median_percentile = 0.0;
  std::vector<ScoredNeighbor> neighbors;  // combined descending

  bool operator==(const PredictionResult&) const = default;
};

struct Violation {
  std::string metric_id;
  double raw = 0.0;
  double limit = 0.0;
  double normalized = 0.0;

  bool operator==(const Violation&) const = default;
};

struct ViolationReport {
  std::vector<Violation> violations;  // canonical metric_id order

  bool empty() const { return violations.empty(); }
  std::vector<std::string> violated_ids() const;

  bool operator==(const ViolationReport&) const = default;
};

// Canonicalizes (sorts constraints by metric_id) and checks invariants.
ProtocolSpec validate_protocol(const ProtocolSpec& spec);

// Accepts the plan iff its metric set equals the protocol's and all values
// are finite and non-negative. Returns the plan unchanged.
PlanRecord validate_plan(const PlanRecord& plan, const ProtocolSpec& spec);

}  // namespace planeval
