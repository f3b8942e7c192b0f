#include "planeval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "planeval/scoring.hpp"

namespace planeval {

std::vector<std::size_t> candidate_select(double query_gm, const ProtocolIndex& index, int k) {
  const std::size_t n = index.gm_scores.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error(ErrorCode::InsufficientCohort,
                "need k=" + std::to_string(k) + " candidates, cohort has " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = std::fabs(index.gm_scores[a] - query_gm);
    const double db = std::fabs(index.gm_scores[b] - query_gm);
    if (da != db) return da < db;
    return index.plan_ids[a] < index.plan_ids[b];
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

double metric_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.empty()) {
    throw Error(ErrorCode::EmptyInput, "metric_similarity on empty vectors");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sq += diff * diff;
  }
  const double d = std::sqrt(sq);
  return 1.0 / (1.0 + d / std::sqrt(static_cast<double>(a.size())));
}

std::vector<ScoredNeighbor> rerank(const ProtocolIndex& index,
                                   std::span<const std::size_t> candidates,
                                   const QueryVectors& query,
                                   const RetrievalConfig& config) {
  if (candidates.empty()) {
    throw Error(ErrorCode::EmptyInput, "rerank over empty candidate set");
  }
  std::vector<ScoredNeighbor> out;
  out.reserve(candidates.size());
  for (std::size_t pos : candidates) {
    if (pos >= index.plan_ids.size()) {
      throw Error(ErrorCode::OutOfBounds, "candidate position " + std::to_string(pos));
    }
    ScoredNeighbor n;
    n.plan_id = index.plan_ids[pos];
    n.s_text = std::clamp(cosine_similarity(query.text, index.text_vectors[pos]), 0.0, 1.0);
    n.s_norm = metric_similarity(query.norm, index.norm_vectors[pos]);
    n.s_raw = metric_similarity(query.raw, index.raw_vectors[pos]);
    n.combined = config.alpha * n.s_text + config.beta_norm * n.s_norm + config.beta_raw * n.s_raw;
    n.percentile = index.percentiles[pos];
    out.push_back(std::move(n));
  }
  std::sort(out.begin(), out.end(), [](const ScoredNeighbor& a, const ScoredNeighbor& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    return a.plan_id < b.plan_id;
  });
  return out;
}

double weighted_median(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(values.size()) + " values, " + std::to_string(weights.size()) + " weights");
  }
  if (values.empty()) {
    throw Error(ErrorCode::EmptyInput, "weighted_median of nothing");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw Error(ErrorCode::InvalidConfig, "weights must be finite and nonnegative");
    }
    total += w;
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const bool uniform = (total == 0.0);
  const double denom = uniform ? static_cast<double>(values.size()) : total;
  double cumulative = 0.0;
  for (std::size_t idx : order) {
    cumulative += uniform ? 1.0 : weights[idx];
    if (cumulative >= denom / 2.0) return values[idx];
  }
  return values[order.back()];
}

PredictionResult predict(const PlanRecord& plan, const KnowledgeBase& kb,
                         const std::map<std::string, ProtocolIndex>& indexes,
                         const RetrievalConfig& config, Embedder& embedder) {
  const RetrievalConfig cfg = config.normalized();
  auto proto_it = kb.protocols.find(plan.protocol_name);
  if (proto_it == kb.protocols.end()) {
    throw Error(ErrorCode::UnknownProtocol, "protocol '" + plan.protocol_name + "'");
  }
  auto index_it = indexes.find(plan.protocol_name);
  if (index_it == indexes.end()) {
    throw Error(ErrorCode::InsufficientCohort,
                "no index for protocol '" + plan.protocol_name + "'");
  }
  const ProtocolSpec& spec = proto_it->second;
  const ProtocolIndex& index = index_it->second;
  validate_plan(plan, spec);

  const NormalizedPlan scored = score_plan(plan, spec);

  QueryVectors query;
  query.text = embedder.embed(render_plan_text(plan, spec));
  query.norm = metric_vector(scored.normalized, spec);
  query.raw = metric_vector(plan.metrics, spec);

  const std::vector<std::size_t> candidates = candidate_select(scored.gm_score, index, cfg.k);
  std::vector<ScoredNeighbor> neighbors = rerank(index, candidates, query, cfg);

  PredictionResult result;
  result.nn_percentile = neighbors.front().percentile;

  double weight_sum = 0.0;
  for (const auto& n : neighbors) weight_sum += n.combined;
  std::vector<double> percentiles;
  std::vector<double> weights;
  percentiles.reserve(neighbors.size());
  weights.reserve(neighbors.size());
  for (const auto& n : neighbors) {
    percentiles.push_back(n.percentile);
    weights.push_back(weight_sum == 0.0 ? 1.0 : n.combined);
  }
  double wp = 0.0;
  double w = 0.0;
  for (std::size_t i = 0; i < percentiles.size(); ++i) {
    wp += weights[i] * percentiles[i];
    w += weights[i];
  }
  result.weighted_avg_percentile = wp / w;
  result.weighted_median_percentile = weighted_median(percentiles, weights);
  result.neighbors = std::move(neighbors);
  return result;
}

}  // namespace planeval
