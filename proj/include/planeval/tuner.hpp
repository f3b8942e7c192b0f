#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "planeval/core.hpp"
#include "planeval/embedding.hpp"
#include "planeval/knowledge_base.hpp"
#include "planeval/metrics.hpp"

namespace planeval {

// Search space: three weight coordinates in [0,1] normalized onto the
// simplex at decode time, plus a fourth coordinate mapped to k in [3,10].
using TunerPoint = std::array<double, 4>;

RetrievalConfig decode_point(const TunerPoint& p);
TunerPoint encode_config(const RetrievalConfig& config);

struct TraceEntry {
  RetrievalConfig config;
  double loss = 0.0;
};

struct TunerTrace {
  std::vector<TraceEntry> entries;
  std::vector<TunerPoint> points;  // raw unit-cube points, parallel to entries
  RetrievalConfig best_config;
  double best_loss = 0.0;
  std::uint64_t seed = 0;
  int n_calls = 0;
};

// Thrown when the objective fails mid-run; carries everything observed so far.
class TunerAborted : public std::runtime_error {
 public:
  TunerAborted(std::string message, TunerTrace partial)
      : std::runtime_error(std::move(message)), partial_trace(std::move(partial)) {}

  TunerTrace partial_trace;
};

// Gaussian-Process surrogate over unit-cube points with a Matern 5/2 kernel.
// Losses are standardized internally; the length scale comes from a fixed
// grid by maximum log marginal likelihood.
class GpModel {
 public:
  static GpModel fit(std::span<const TunerPoint> points, std::span<const double> losses);
  ~GpModel();
  GpModel(GpModel&&) noexcept;
  GpModel& operator=(GpModel&&) noexcept;

  struct Posterior {
    double mean = 0.0;      // standardized units
    double variance = 0.0;  // >= 0
  };
  Posterior posterior(const TunerPoint& x) const;

  double standardize(double raw_loss) const;
  double length_scale() const;
  double jitter() const;

 private:
  GpModel();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// EI in standardized loss units for a minimization problem; best_loss is the
// standardized incumbent.
double expected_improvement(const GpModel& model, const TunerPoint& x, double best_loss);

// Seeded GP minimization: n_init uniform draws, then EI-maximizing proposals
// over seeded random candidates. Points decoding to an already-evaluated
// config reuse the cached loss (still recorded in the trace), so the
// objective runs at most n_calls times.
TunerTrace gp_minimize(const std::function<double(const TunerPoint&)>& objective,
                       int n_calls, int n_init, std::uint64_t seed);

TunerTrace tune_retrieval(const KnowledgeBase& kb,
                          const std::map<std::string, ProtocolIndex>& indexes,
                          std::span<const HeldOutPlan> test_set, Embedder& embedder,
                          int n_calls, std::uint64_t seed, int n_init = 10);

}  // namespace planeval
