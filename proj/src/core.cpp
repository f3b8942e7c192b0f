#include "planeval/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace planeval {

namespace {

bool unit_matches_kind(MetricKind kind, const std::string& unit) {
  switch (kind) {
    case MetricKind::MaxDose:
    case MetricKind::MeanDose:
    case MetricKind::DoseAtVolumePct:
    case MetricKind::DoseAtVolumeCc:
      return unit == "Gy";
    case MetricKind::VolumeAtDosePct:
    case MetricKind::VolumeAtDoseGy:
      return unit == "%" || unit == "cc";
  }
  return false;
}

}  // namespace

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateMetricId: return "DuplicateMetricId";
    case ErrorCode::NonPositiveLimit: return "NonPositiveLimit";
    case ErrorCode::EmptyProtocol: return "EmptyProtocol";
    case ErrorCode::InvalidUnit: return "InvalidUnit";
    case ErrorCode::MissingMetric: return "MissingMetric";
    case ErrorCode::ExtraMetric: return "ExtraMetric";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::MemberNotFound: return "MemberNotFound";
    case ErrorCode::UnknownProtocol: return "UnknownProtocol";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::EmbeddingProviderFailure: return "EmbeddingProviderFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InsufficientCohort: return "InsufficientCohort";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::SingularKernel: return "SingularKernel";
    case ErrorCode::LexiconExhausted: return "LexiconExhausted";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::TurnLimitExceeded: return "TurnLimitExceeded";
  }
  return "UnknownError";
}

const char* metric_kind_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::MaxDose: return "MaxDose";
    case MetricKind::MeanDose: return "MeanDose";
    case MetricKind::DoseAtVolumePct: return "DoseAtVolumePct";
    case MetricKind::DoseAtVolumeCc: return "DoseAtVolumeCc";
    case MetricKind::VolumeAtDosePct: return "VolumeAtDosePct";
    case MetricKind::VolumeAtDoseGy: return "VolumeAtDoseGy";
  }
  return "MaxDose";
}

MetricKind metric_kind_from_name(std::string_view name) {
  if (name == "MaxDose") return MetricKind::MaxDose;
  if (name == "MeanDose") return MetricKind::MeanDose;
  if (name == "DoseAtVolumePct") return MetricKind::DoseAtVolumePct;
  if (name == "DoseAtVolumeCc") return MetricKind::DoseAtVolumeCc;
  if (name == "VolumeAtDosePct") return MetricKind::VolumeAtDosePct;
  if (name == "VolumeAtDoseGy") return MetricKind::VolumeAtDoseGy;
  throw Error(ErrorCode::CorruptFile, "unknown metric kind '" + std::string(name) + "'");
}

const ConstraintSpec* ProtocolSpec::find(std::string_view metric_id) const {
  for (const auto& c : constraints) {
    if (c.metric_id == metric_id) return &c;
  }
  return nullptr;
}

std::vector<std::string> ViolationReport::violated_ids() const {
  std::vector<std::string> ids;
  ids.reserve(violations.size());
  for (const auto& v : violations) ids.push_back(v.metric_id);
  return ids;
}

RetrievalConfig RetrievalConfig::normalized() const {
  if (alpha < 0.0 || beta_norm < 0.0 || beta_raw < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "similarity weights must be non-negative");
  }
  const double sum = alpha + beta_norm + beta_raw;
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw Error(ErrorCode::InvalidConfig, "similarity weights must have a positive finite sum");
  }
  if (k < kRetrievalDepthMin || k > kRetrievalDepthMax) {
    throw Error(ErrorCode::InvalidConfig,
                "retrieval depth k=" + std::to_string(k) + " outside [3,10]");
  }
  return RetrievalConfig{alpha / sum, beta_norm / sum, beta_raw / sum, k};
}

ProtocolSpec validate_protocol(const ProtocolSpec& spec) {
  if (spec.constraints.empty()) {
    throw Error(ErrorCode::EmptyProtocol, "protocol '" + spec.name + "' has no constraints");
  }
  ProtocolSpec out = spec;
  std::sort(out.constraints.begin(), out.constraints.end(),
            [](const ConstraintSpec& a, const ConstraintSpec& b) {
              return a.metric_id < b.metric_id;
            });
  for (std::size_t i = 0; i < out.constraints.size(); ++i) {
    const ConstraintSpec& c = out.constraints[i];
    if (i > 0 && c.metric_id == out.constraints[i - 1].metric_id) {
      throw Error(ErrorCode::DuplicateMetricId,
                  "metric '" + c.metric_id + "' appears twice in protocol '" + spec.name + "'");
    }
    if (!(c.limit > 0.0) || !std::isfinite(c.limit)) {
      throw Error(ErrorCode::NonPositiveLimit,
                  "metric '" + c.metric_id + "' has limit " + std::to_string(c.limit));
    }
    if (!unit_matches_kind(c.kind, c.unit)) {
      throw Error(ErrorCode::InvalidUnit,
                  "metric '" + c.metric_id + "' pairs unit '" + c.unit + "' with kind " +
                      metric_kind_name(c.kind));
    }
  }
  return out;
}

PlanRecord validate_plan(const PlanRecord& plan, const ProtocolSpec& spec) {
  if (plan.plan_id.empty()) {
    throw Error(ErrorCode::InvalidConfig, "plan has an empty plan_id");
  }
  for (const auto& c : spec.constraints) {
    auto it = plan.metrics.find(c.metric_id);
    if (it == plan.metrics.end()) {
      throw Error(ErrorCode::MissingMetric,
                  "plan '" + plan.plan_id + "' lacks metric '" + c.metric_id + "'");
    }
    if (!std::isfinite(it->second) || it->second < 0.0) {
      throw Error(ErrorCode::NonFiniteValue,
                  "plan '" + plan.plan_id + "' metric '" + c.metric_id +
                      "' is not a finite non-negative value");
    }
  }
  if (plan.metrics.size() != spec.constraints.size()) {
    for (const auto& [id, value] : plan.metrics) {
      if (spec.find(id) == nullptr) {
        throw Error(ErrorCode::ExtraMetric,
                    "plan '" + plan.plan_id + "' carries metric '" + id +
                        "' not in protocol '" + spec.name + "'");
      }
    }
  }
  return plan;
}

}  // namespace planeval
