#include "planeval/knowledge_base.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "planeval/json_io.hpp"
#include "planeval/rng.hpp"
#include "planeval/scoring.hpp"

namespace planeval {

namespace {

std::string format_sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%#.6g", v);
  return buf;
}

}  // namespace

KBBuildResult build_kb(std::span<const PlanRecord> plans,
                       std::span<const ProtocolSpec> protocols,
                       double split_fraction, std::uint64_t seed,
                       const EmbeddingMeta& embedding_meta) {
  if (split_fraction < 0.0 || split_fraction >= 1.0 || !std::isfinite(split_fraction)) {
    throw Error(ErrorCode::InvalidConfig, "split_fraction must lie in [0, 1)");
  }
  KBBuildResult result;
  result.kb.version = kKbFormatVersion;
  result.kb.embedding_meta = embedding_meta;

  std::vector<std::string> protocol_order;
  for (const auto& spec : protocols) {
    ProtocolSpec validated = validate_protocol(spec);
    if (result.kb.protocols.count(validated.name) != 0) {
      throw Error(ErrorCode::InvalidConfig, "protocol '" + validated.name + "' listed twice");
    }
    protocol_order.push_back(validated.name);
    result.kb.protocols.emplace(validated.name, std::move(validated));
  }

  // Group plans per protocol, preserving input order within each group.
  std::map<std::string, std::vector<PlanRecord>> cohorts;
  for (const auto& plan : plans) {
    if (result.kb.protocols.count(plan.protocol_name) == 0) {
      throw Error(ErrorCode::UnknownProtocol,
                  "plan '" + plan.plan_id + "' references protocol '" + plan.protocol_name + "'");
    }
    cohorts[plan.protocol_name].push_back(plan);
  }

  for (const auto& name : protocol_order) {
    auto cohort_it = cohorts.find(name);
    if (cohort_it == cohorts.end()) continue;
    const auto& cohort = cohort_it->second;
    const ProtocolSpec& spec = result.kb.protocols.at(name);

    std::vector<KBEntry> scored = score_cohort(cohort, spec);

    const std::size_t n = scored.size();
    const auto n_held = static_cast<std::size_t>(std::ceil(split_fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng = Rng::stream(seed, "split:" + name);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
      std::swap(order[i - 1], order[j]);
    }

    std::vector<bool> held(n, false);
    for (std::size_t i = 0; i < n_held; ++i) held[order[i]] = true;

    std::vector<KBEntry> kept;
    kept.reserve(n - n_held);
    for (std::size_t i = 0; i < n; ++i) {
      if (held[i]) {
        result.held_out.push_back(HeldOutPlan{cohort[i], scored[i].percentile});
      } else {
        kept.push_back(std::move(scored[i]));
      }
    }
    result.kb.entries.emplace(name, std::move(kept));
  }
  return result;
}

std::string render_plan_text(const std::string& protocol_name,
                             const std::map<std::string, double>& raw_metrics,
                             const ProtocolSpec& spec) {
  std::string text = "Protocol " + protocol_name + ".";
  for (const auto& c : spec.constraints) {
    auto it = raw_metrics.find(c.metric_id);
    if (it == raw_metrics.end()) {
      throw Error(ErrorCode::MissingMetric, "metric '" + c.metric_id + "' absent from plan");
    }
    text += " " + c.metric_id + " = " + format_sig6(it->second) + " " + c.unit + " (limit " +
            format_sig6(c.limit) + " " + c.unit + ").";
  }
  return text;
}

std::string render_plan_text(const PlanRecord& plan, const ProtocolSpec& spec) {
  return render_plan_text(plan.protocol_name, plan.metrics, spec);
}

std::string render_plan_text(const KBEntry& entry, const ProtocolSpec& spec) {
  return render_plan_text(entry.protocol_name, entry.raw_metrics, spec);
}

std::vector<double> metric_vector(const std::map<std::string, double>& metrics,
                                  const ProtocolSpec& spec) {
  std::vector<double> out;
  out.reserve(spec.constraints.size());
  for (const auto& c : spec.constraints) {
    auto it = metrics.find(c.metric_id);
    if (it == metrics.end()) {
      throw Error(ErrorCode::MissingMetric, "metric '" + c.metric_id + "' absent from plan");
    }
    out.push_back(it->second);
  }
  return out;
}

std::map<std::string, ProtocolIndex> build_indexes(const KnowledgeBase& kb, Embedder& embedder) {
  std::map<std::string, ProtocolIndex> indexes;
  for (const auto& [name, entries] : kb.entries) {
    const ProtocolSpec& spec = kb.protocols.at(name);
    ProtocolIndex index;
    std::vector<std::string> texts;
    texts.reserve(entries.size());
    for (const auto& entry : entries) {
      index.plan_ids.push_back(entry.plan_id);
      index.gm_scores.push_back(entry.gm_score);
      index.percentiles.push_back(entry.percentile);
      index.norm_vectors.push_back(metric_vector(entry.normalized_metrics, spec));
      index.raw_vectors.push_back(metric_vector(entry.raw_metrics, spec));
      texts.push_back(render_plan_text(entry, spec));
    }
    index.text_vectors = embedder.embed_batch(texts);
    indexes.emplace(name, std::move(index));
  }
  return indexes;
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
  io::write_json_file(path, io::kb_to_json(kb));
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  return io::kb_from_json(io::read_json_file(path));
}

}  // namespace planeval
