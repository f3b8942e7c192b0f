#pragma once

#include <memory>
#include <string>

#include "planeval/core.hpp"
#include "planeval/embedding.hpp"
#include "planeval/knowledge_base.hpp"
#include "planeval/orchestrator.hpp"

namespace planeval {

// Read-only HTTP facade over a loaded knowledge base.
//
//   POST /v1/score     {"plan": {...}}                 -> normalized metrics, gm, percentile
//   POST /v1/retrieve  {"plan": {...}, "config"?: {}}  -> PredictionResult
//   POST /v1/check     {"plan": {...}}                 -> ViolationReport
//   POST /v1/explain   {"plan": {...}, "config"?: {}}  -> session summary + agreement
//   GET  /v1/kb/stats                                  -> per-protocol entry counts, metric lists
//   GET  /healthz
class PlanService {
 public:
  PlanService(KnowledgeBase kb, RetrievalConfig default_config,
              std::unique_ptr<Embedder> embedder, std::unique_ptr<ChatBackend> backend);
  ~PlanService();

  // Binds host:port (port 0 picks an ephemeral port); returns the bound port.
  int bind(const std::string& host, int port);
  // Serves the bound socket until stop(); returns false on listener failure.
  bool run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace planeval
