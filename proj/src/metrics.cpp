#include "planeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "planeval/retrieval.hpp"

namespace planeval {

namespace {

void require_paired(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(pred.size()) + " predictions, " + std::to_string(truth.size()) +
                    " truths");
  }
  if (pred.empty()) {
    throw Error(ErrorCode::EmptyInput, "metric over empty series");
  }
}

double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Mean ranks for ties, 1-based.
std::vector<double> midranks(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = shared;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  require_paired(pred, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  require_paired(pred, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

std::optional<double> pearson_r(std::span<const double> pred, std::span<const double> truth) {
  require_paired(pred, truth);
  const double mp = mean(pred);
  const double mt = mean(truth);
  double spt = 0.0, spp = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mp;
    const double dt = truth[i] - mt;
    spt += dp * dt;
    spp += dp * dp;
    stt += dt * dt;
  }
  if (spp == 0.0 || stt == 0.0) return std::nullopt;
  return spt / std::sqrt(spp * stt);
}

std::optional<double> spearman_rho(std::span<const double> pred, std::span<const double> truth) {
  require_paired(pred, truth);
  const std::vector<double> rp = midranks(pred);
  const std::vector<double> rt = midranks(truth);
  return pearson_r(rp, rt);
}

std::optional<double> r2(std::span<const double> pred, std::span<const double> truth) {
  require_paired(pred, truth);
  const double mt = mean(truth);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dr = truth[i] - pred[i];
    const double dt = truth[i] - mt;
    ss_res += dr * dr;
    ss_tot += dt * dt;
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

double pct_within(std::span<const double> pred, std::span<const double> truth, double threshold) {
  require_paired(pred, truth);
  if (threshold < 0.0 || !std::isfinite(threshold)) {
    throw Error(ErrorCode::InvalidConfig, "threshold must be finite and nonnegative");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::fabs(pred[i] - truth[i]) <= threshold) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

double scalarized_loss(double rmse_avg, double mae_nn, double pct5_nn, double pct10_avg) {
  return rmse_avg + mae_nn + (100.0 - pct5_nn) / 100.0 + (100.0 - pct10_avg) / 100.0;
}

namespace {

MethodMetrics method_metrics(std::span<const double> pred, std::span<const double> truth) {
  MethodMetrics m;
  m.pearson_r = pearson_r(pred, truth);
  m.spearman_rho = spearman_rho(pred, truth);
  m.mae = mae(pred, truth);
  m.rmse = rmse(pred, truth);
  m.r2 = r2(pred, truth);
  m.pct_within_5 = pct_within(pred, truth, 5.0);
  m.pct_within_10 = pct_within(pred, truth, 10.0);
  return m;
}

}  // namespace

EvaluationReport evaluate_system(const KnowledgeBase& kb,
                                 const std::map<std::string, ProtocolIndex>& indexes,
                                 std::span<const HeldOutPlan> test_set,
                                 const RetrievalConfig& config, Embedder& embedder) {
  if (test_set.empty()) {
    throw Error(ErrorCode::EmptyInput, "evaluate_system over empty test set");
  }
  std::vector<double> truth, nn, avg, med;
  truth.reserve(test_set.size());
  for (const auto& h : test_set) {
    const PredictionResult p = predict(h.plan, kb, indexes, config, embedder);
    truth.push_back(h.true_percentile);
    nn.push_back(p.nn_percentile);
    avg.push_back(p.weighted_avg_percentile);
    med.push_back(p.weighted_median_percentile);
  }
  EvaluationReport report;
  report.nearest_neighbor = method_metrics(nn, truth);
  report.weighted_average = method_metrics(avg, truth);
  report.weighted_median = method_metrics(med, truth);
  report.loss = scalarized_loss(report.weighted_average.rmse, report.nearest_neighbor.mae,
                                report.nearest_neighbor.pct_within_5,
                                report.weighted_average.pct_within_10);
  return report;
}

}  // namespace planeval
