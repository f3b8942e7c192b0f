#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "planeval/core.hpp"
#include "planeval/embedding.hpp"

namespace planeval {

inline constexpr const char* kKbFormatVersion = "1";

struct EmbeddingMeta {
  std::string provider;
  int dimension = 0;

  bool operator==(const EmbeddingMeta&) const = default;
};

struct KnowledgeBase {
  std::string version = kKbFormatVersion;
  std::map<std::string, ProtocolSpec> protocols;
  std::map<std::string, std::vector<KBEntry>> entries;  // protocol -> scored plans
  EmbeddingMeta embedding_meta;

  bool operator==(const KnowledgeBase&) const = default;
};

struct HeldOutPlan {
  PlanRecord plan;
  double true_percentile = 0.0;  // frozen from the full pre-split cohort

  bool operator==(const HeldOutPlan&) const = default;
};

struct KBBuildResult {
  KnowledgeBase kb;
  std::vector<HeldOutPlan> held_out;
};

// Scores each protocol's plans over its FULL cohort, then holds out
// ceil(split_fraction * N) plans per protocol via a seeded shuffle. Held-out
// plans keep the percentile they had before the split.
KBBuildResult build_kb(std::span<const PlanRecord> plans,
                       std::span<const ProtocolSpec> protocols,
                       double split_fraction, std::uint64_t seed,
                       const EmbeddingMeta& embedding_meta = {"fallback-hash-256", 256});

// Deterministic prose rendering of a plan's metrics in canonical order,
// values at 6 significant digits. This is the text the text index embeds.
std::string render_plan_text(const std::string& protocol_name,
                             const std::map<std::string, double>& raw_metrics,
                             const ProtocolSpec& spec);
std::string render_plan_text(const PlanRecord& plan, const ProtocolSpec& spec);
std::string render_plan_text(const KBEntry& entry, const ProtocolSpec& spec);

// Per-protocol parallel arrays over KB entries; row i of every array refers
// to entry plan_ids[i].
struct ProtocolIndex {
  std::vector<std::string> plan_ids;
  std::vector<double> gm_scores;
  std::vector<double> percentiles;
  std::vector<EmbeddingVector> text_vectors;
  std::vector<std::vector<double>> norm_vectors;  // canonical metric order
  std::vector<std::vector<double>> raw_vectors;   // canonical metric order
};

std::map<std::string, ProtocolIndex> build_indexes(const KnowledgeBase& kb, Embedder& embedder);

// Flattens a metric map into canonical (metric_id-sorted) order.
std::vector<double> metric_vector(const std::map<std::string, double>& metrics,
                                  const ProtocolSpec& spec);

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);
KnowledgeBase load_kb(const std::filesystem::path& path);

}  // namespace planeval
