#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>

#include "planeval/core.hpp"
#include "planeval/embedding.hpp"
#include "planeval/knowledge_base.hpp"

namespace planeval {

double mae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);

// Correlations are nullopt when either input has zero variance; never a
// silent 0.
std::optional<double> pearson_r(std::span<const double> pred, std::span<const double> truth);
std::optional<double> spearman_rho(std::span<const double> pred, std::span<const double> truth);

// Regression definition 1 - SS_res/SS_tot (can be negative); nullopt when
// the truth is constant.
std::optional<double> r2(std::span<const double> pred, std::span<const double> truth);

// 100 * count(|pred - truth| <= threshold) / N. Boundary inclusive.
double pct_within(std::span<const double> pred, std::span<const double> truth, double threshold);

// L = RMSE_avg + MAE_nn + (100 - %<=5pt_nn)/100 + (100 - %<=10pt_avg)/100
double scalarized_loss(double rmse_avg, double mae_nn, double pct5_nn, double pct10_avg);

struct MethodMetrics {
  std::optional<double> pearson_r;
  std::optional<double> spearman_rho;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> r2;
  double pct_within_5 = 0.0;
  double pct_within_10 = 0.0;
};

struct EvaluationReport {
  MethodMetrics nearest_neighbor;
  MethodMetrics weighted_average;
  MethodMetrics weighted_median;
  double loss = 0.0;
};

// Runs predict() on every test plan and scores all three aggregation
// methods against the true percentiles.
EvaluationReport evaluate_system(const KnowledgeBase& kb,
                                 const std::map<std::string, ProtocolIndex>& indexes,
                                 std::span<const HeldOutPlan> test_set,
                                 const RetrievalConfig& config, Embedder& embedder);

}  // namespace planeval
