#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <utility>
#include <vector>

#include "planeval/core.hpp"
#include "planeval/embedding.hpp"
#include "planeval/knowledge_base.hpp"
#include "planeval/retrieval.hpp"
#include "planeval/scoring.hpp"

namespace testutil {

using namespace planeval;

// Protocol of MeanDose/Gy constraints, enough for most tests.
inline ProtocolSpec make_protocol(std::string name,
                                  std::initializer_list<std::pair<const char*, double>> limits) {
  ProtocolSpec spec;
  spec.name = std::move(name);
  for (const auto& [id, limit] : limits) {
    spec.constraints.push_back(ConstraintSpec{id, "Organ", MetricKind::MeanDose, limit, "Gy"});
  }
  return validate_protocol(spec);
}

inline PlanRecord make_plan(std::string id, std::string protocol,
                            std::initializer_list<std::pair<const char*, double>> metrics) {
  PlanRecord plan;
  plan.plan_id = std::move(id);
  plan.protocol_name = std::move(protocol);
  for (const auto& [metric, value] : metrics) plan.metrics[metric] = value;
  return plan;
}

// Reference predict(): same math, no ProtocolIndex, direct scan over the
// protocol's KB entries. Used for the zero-tolerance equivalence checks.
inline PredictionResult brute_force_predict(const PlanRecord& plan, const KnowledgeBase& kb,
                                            const RetrievalConfig& raw_config,
                                            Embedder& embedder) {
  const RetrievalConfig config = raw_config.normalized();
  const ProtocolSpec& spec = kb.protocols.at(plan.protocol_name);
  const std::vector<KBEntry>& cohort = kb.entries.at(plan.protocol_name);

  double query_log_sum = 0.0;
  std::vector<double> query_norm;
  std::vector<double> query_raw;
  for (const auto& c : spec.constraints) {
    const double normalized = plan.metrics.at(c.metric_id) / c.limit * 100.0 + 1e-6;
    query_log_sum += std::log(normalized);
    query_norm.push_back(normalized);
    query_raw.push_back(plan.metrics.at(c.metric_id));
  }
  const double query_gm =
      std::exp(query_log_sum / static_cast<double>(spec.constraints.size()));

  std::vector<std::size_t> order(cohort.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = std::fabs(cohort[a].gm_score - query_gm);
    const double db = std::fabs(cohort[b].gm_score - query_gm);
    if (da != db) return da < db;
    return cohort[a].plan_id < cohort[b].plan_id;
  });
  order.resize(static_cast<std::size_t>(config.k));

  const EmbeddingVector query_text = embedder.embed(render_plan_text(plan, spec));
  std::vector<ScoredNeighbor> neighbors;
  for (std::size_t pos : order) {
    const KBEntry& entry = cohort[pos];
    const EmbeddingVector entry_text = embedder.embed(render_plan_text(entry, spec));
    double dot = 0.0, qn = 0.0, en = 0.0;
    for (std::size_t i = 0; i < query_text.size(); ++i) {
      dot += query_text[i] * entry_text[i];
      qn += query_text[i] * query_text[i];
      en += entry_text[i] * entry_text[i];
    }
    const double cosine = (qn == 0.0 || en == 0.0) ? 0.0 : dot / (std::sqrt(qn) * std::sqrt(en));

    double norm_sq = 0.0, raw_sq = 0.0;
    std::size_t i = 0;
    for (const auto& c : spec.constraints) {
      const double dn = query_norm[i] - entry.normalized_metrics.at(c.metric_id);
      const double dr = query_raw[i] - entry.raw_metrics.at(c.metric_id);
      norm_sq += dn * dn;
      raw_sq += dr * dr;
      ++i;
    }
    const double root_n = std::sqrt(static_cast<double>(spec.constraints.size()));
    ScoredNeighbor n;
    n.plan_id = entry.plan_id;
    n.s_text = std::clamp(cosine, 0.0, 1.0);
    n.s_norm = 1.0 / (1.0 + std::sqrt(norm_sq) / root_n);
    n.s_raw = 1.0 / (1.0 + std::sqrt(raw_sq) / root_n);
    n.combined = config.alpha * n.s_text + config.beta_norm * n.s_norm + config.beta_raw * n.s_raw;
    n.percentile = entry.percentile;
    neighbors.push_back(std::move(n));
  }
  std::sort(neighbors.begin(), neighbors.end(), [](const ScoredNeighbor& a, const ScoredNeighbor& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    return a.plan_id < b.plan_id;
  });

  PredictionResult result;
  result.nn_percentile = neighbors.front().percentile;
  double weight_sum = 0.0;
  for (const auto& n : neighbors) weight_sum += n.combined;
  double wp = 0.0, w = 0.0;
  std::vector<std::pair<double, double>> by_value;  // (percentile, weight)
  for (const auto& n : neighbors) {
    const double weight = weight_sum == 0.0 ? 1.0 : n.combined;
    wp += weight * n.percentile;
    w += weight;
    by_value.emplace_back(n.percentile, weight);
  }
  result.weighted_avg_percentile = wp / w;
  std::sort(by_value.begin(), by_value.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double cumulative = 0.0;
  for (const auto& [value, weight] : by_value) {
    cumulative += weight;
    if (cumulative >= w / 2.0) {
      result.weighted_median_percentile = value;
      break;
    }
  }
  result.neighbors = std::move(neighbors);
  return result;
}

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

// Runs the planeval binary with the given arguments.
inline CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(PLANEVAL_BIN) + " " + args + " 2>&1";
  CliResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return result;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, got);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

// Fresh scratch directory under the system temp root; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("planeval_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path path_;
};

}  // namespace testutil
