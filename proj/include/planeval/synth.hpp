#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "planeval/core.hpp"

namespace planeval {

struct SynthProtocol {
  std::string name;
  int metric_count = 8;  // ignored when explicit constraints are given
  std::optional<std::vector<ConstraintSpec>> constraints;
  std::optional<int> plan_count;  // overrides SynthConfig::plans_per_protocol
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::vector<SynthProtocol> protocols;
  int plans_per_protocol = 68;
  double violation_rate = 0.1;  // per-metric exceedance probability, in [0,1)
  double sigma_log = 0.35;      // lognormal spread of metric values
};

struct SynthOutput {
  std::vector<ProtocolSpec> protocols;
  std::vector<PlanRecord> plans;
};

// Number of distinct endpoints in the built-in structure/metric lexicon.
int synth_lexicon_size();

// Seeded synthetic protocols and plan cohorts. Metric names are drawn
// without replacement from a fixed clinical lexicon; limits are log-uniform
// per unit family; plan values are lognormal around each limit with the
// exceedance probability calibrated to violation_rate.
SynthOutput generate(const SynthConfig& config);

// Convenience shape used by the CLI: n protocols named P01.., metric counts
// drawn per protocol from the seed.
SynthConfig default_synth_config(std::uint64_t seed, int n_protocols, int plans_per_protocol,
                                 double violation_rate);

}  // namespace planeval
