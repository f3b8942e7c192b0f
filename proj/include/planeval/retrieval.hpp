#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "planeval/core.hpp"
#include "planeval/embedding.hpp"
#include "planeval/knowledge_base.hpp"

namespace planeval {

// Positions of the k entries whose gm_score is closest to query_gm, ordered
// by |gm - query_gm| ascending, ties by ascending plan_id.
std::vector<std::size_t> candidate_select(double query_gm, const ProtocolIndex& index, int k);

// 1 / (1 + d/sqrt(n)) with d the Euclidean distance; 1 iff a == b.
double metric_similarity(std::span<const double> a, std::span<const double> b);

struct QueryVectors {
  EmbeddingVector text;
  std::vector<double> norm;
  std::vector<double> raw;
};

// Scores each candidate on the three components and sorts by the convex
// combination, descending; ties by ascending plan_id. The candidate set is
// never changed, only reordered.
std::vector<ScoredNeighbor> rerank(const ProtocolIndex& index,
                                   std::span<const std::size_t> candidates,
                                   const QueryVectors& query,
                                   const RetrievalConfig& config);

// Lower weighted median: sort by value ascending, return the first value
// whose cumulative weight reaches half the total. All-zero weights fall back
// to uniform.
double weighted_median(std::span<const double> values, std::span<const double> weights);

PredictionResult predict(const PlanRecord& plan, const KnowledgeBase& kb,
                         const std::map<std::string, ProtocolIndex>& indexes,
                         const RetrievalConfig& config, Embedder& embedder);

}  // namespace planeval
