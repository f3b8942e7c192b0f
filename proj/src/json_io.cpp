#include "planeval/json_io.hpp"

#include <fstream>

namespace planeval::io {

namespace {

const json& require(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) {
    throw Error(ErrorCode::CorruptFile, std::string("missing field '") + field + "'");
  }
  return *it;
}

double require_number(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_number()) {
    throw Error(ErrorCode::CorruptFile, std::string("field '") + field + "' is not a number");
  }
  return v.get<double>();
}

std::string require_string(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_string()) {
    throw Error(ErrorCode::CorruptFile, std::string("field '") + field + "' is not a string");
  }
  return v.get<std::string>();
}

std::map<std::string, double> metric_map_from_json(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_object()) {
    throw Error(ErrorCode::CorruptFile, std::string("field '") + field + "' is not an object");
  }
  std::map<std::string, double> out;
  for (const auto& [key, value] : v.items()) {
    if (!value.is_number()) {
      throw Error(ErrorCode::CorruptFile, "metric '" + key + "' is not a number");
    }
    out[key] = value.get<double>();
  }
  return out;
}

}  // namespace

json protocol_to_json(const ProtocolSpec& spec) {
  json constraints = json::array();
  for (const auto& c : spec.constraints) {
    constraints.push_back({{"metric_id", c.metric_id},
                           {"structure", c.structure},
                           {"kind", metric_kind_name(c.kind)},
                           {"limit", c.limit},
                           {"unit", c.unit}});
  }
  return json{{"name", spec.name}, {"constraints", std::move(constraints)}};
}

ProtocolSpec protocol_from_json(const json& j) {
  ProtocolSpec spec;
  spec.name = require_string(j, "name");
  const json& constraints = require(j, "constraints");
  if (!constraints.is_array()) {
    throw Error(ErrorCode::CorruptFile, "'constraints' is not an array");
  }
  for (const auto& jc : constraints) {
    ConstraintSpec c;
    c.metric_id = require_string(jc, "metric_id");
    c.structure = require_string(jc, "structure");
    c.kind = metric_kind_from_name(require_string(jc, "kind"));
    c.limit = require_number(jc, "limit");
    c.unit = require_string(jc, "unit");
    spec.constraints.push_back(std::move(c));
  }
  return validate_protocol(spec);
}

json plan_to_json(const PlanRecord& plan) {
  return json{{"plan_id", plan.plan_id},
              {"protocol_name", plan.protocol_name},
              {"metrics", plan.metrics}};
}

PlanRecord plan_from_json(const json& j) {
  PlanRecord plan;
  plan.plan_id = require_string(j, "plan_id");
  plan.protocol_name = require_string(j, "protocol_name");
  plan.metrics = metric_map_from_json(j, "metrics");
  return plan;
}

json entry_to_json(const KBEntry& entry) {
  return json{{"plan_id", entry.plan_id},
              {"protocol_name", entry.protocol_name},
              {"raw_metrics", entry.raw_metrics},
              {"normalized_metrics", entry.normalized_metrics},
              {"gm_score", entry.gm_score},
              {"percentile", entry.percentile}};
}

KBEntry entry_from_json(const json& j) {
  KBEntry entry;
  entry.plan_id = require_string(j, "plan_id");
  entry.protocol_name = require_string(j, "protocol_name");
  entry.raw_metrics = metric_map_from_json(j, "raw_metrics");
  entry.normalized_metrics = metric_map_from_json(j, "normalized_metrics");
  entry.gm_score = require_number(j, "gm_score");
  entry.percentile = require_number(j, "percentile");
  return entry;
}

json kb_to_json(const KnowledgeBase& kb) {
  json protocols = json::object();
  for (const auto& [name, spec] : kb.protocols) protocols[name] = protocol_to_json(spec);
  json entries = json::object();
  for (const auto& [name, list] : kb.entries) {
    json arr = json::array();
    for (const auto& entry : list) arr.push_back(entry_to_json(entry));
    entries[name] = std::move(arr);
  }
  return json{{"version", kb.version},
              {"embedding_meta",
               {{"provider", kb.embedding_meta.provider},
                {"dimension", kb.embedding_meta.dimension}}},
              {"protocols", std::move(protocols)},
              {"entries", std::move(entries)}};
}

KnowledgeBase kb_from_json(const json& j) {
  const std::string version = require_string(j, "version");
  if (version != kKbFormatVersion) {
    throw Error(ErrorCode::FormatVersionMismatch,
                "knowledge base version '" + version + "' (expected '" + kKbFormatVersion + "')");
  }
  KnowledgeBase kb;
  kb.version = version;
  const json& meta = require(j, "embedding_meta");
  kb.embedding_meta.provider = require_string(meta, "provider");
  kb.embedding_meta.dimension = static_cast<int>(require_number(meta, "dimension"));

  const json& protocols = require(j, "protocols");
  if (!protocols.is_object()) throw Error(ErrorCode::CorruptFile, "'protocols' is not an object");
  for (const auto& [name, jp] : protocols.items()) {
    ProtocolSpec spec = protocol_from_json(jp);
    if (spec.name != name) {
      throw Error(ErrorCode::CorruptFile, "protocol key '" + name + "' names spec '" + spec.name + "'");
    }
    kb.protocols.emplace(name, std::move(spec));
  }

  const json& entries = require(j, "entries");
  if (!entries.is_object()) throw Error(ErrorCode::CorruptFile, "'entries' is not an object");
  for (const auto& [name, arr] : entries.items()) {
    auto proto_it = kb.protocols.find(name);
    if (proto_it == kb.protocols.end()) {
      throw Error(ErrorCode::CorruptFile, "entries reference unknown protocol '" + name + "'");
    }
    if (!arr.is_array()) throw Error(ErrorCode::CorruptFile, "entry list is not an array");
    std::vector<KBEntry> list;
    for (const auto& je : arr) {
      KBEntry entry = entry_from_json(je);
      validate_plan(PlanRecord{entry.plan_id, entry.protocol_name, entry.raw_metrics},
                    proto_it->second);
      for (const auto& other : list) {
        if (other.plan_id == entry.plan_id) {
          throw Error(ErrorCode::CorruptFile,
                      "duplicate plan '" + entry.plan_id + "' in protocol '" + name + "'");
        }
      }
      list.push_back(std::move(entry));
    }
    kb.entries.emplace(name, std::move(list));
  }
  return kb;
}

json config_to_json(const RetrievalConfig& config) {
  return json{{"alpha", config.alpha},
              {"beta_norm", config.beta_norm},
              {"beta_raw", config.beta_raw},
              {"k", config.k}};
}

RetrievalConfig config_from_json(const json& j) {
  RetrievalConfig config;
  config.alpha = require_number(j, "alpha");
  config.beta_norm = require_number(j, "beta_norm");
  config.beta_raw = require_number(j, "beta_raw");
  config.k = static_cast<int>(require_number(j, "k"));
  return config.normalized();
}

json prediction_to_json(const PredictionResult& result) {
  json neighbors = json::array();
  for (const auto& n : result.neighbors) {
    neighbors.push_back({{"plan_id", n.plan_id},
                         {"s_text", n.s_text},
                         {"s_norm", n.s_norm},
                         {"s_raw", n.s_raw},
                         {"combined", n.combined},
                         {"percentile", n.percentile}});
  }
  return json{{"nn_percentile", result.nn_percentile},
              {"weighted_avg_percentile", result.weighted_avg_percentile},
              {"weighted_median_percentile", result.weighted_median_percentile},
              {"neighbors", std::move(neighbors)}};
}

json violations_to_json(const ViolationReport& report) {
  json violations = json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"metric_id", v.metric_id},
                          {"raw", v.raw},
                          {"limit", v.limit},
                          {"normalized", v.normalized}});
  }
  return json{{"violations", std::move(violations)}};
}

namespace {

json method_to_json(const MethodMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"pearson_r", opt(m.pearson_r)}, {"spearman_rho", opt(m.spearman_rho)},
              {"mae", m.mae},                  {"rmse", m.rmse},
              {"r2", opt(m.r2)},               {"pct_within_5", m.pct_within_5},
              {"pct_within_10", m.pct_within_10}};
}

}  // namespace

json report_to_json(const EvaluationReport& report) {
  return json{{"nearest_neighbor", method_to_json(report.nearest_neighbor)},
              {"weighted_average", method_to_json(report.weighted_average)},
              {"weighted_median", method_to_json(report.weighted_median)},
              {"loss", report.loss}};
}

json trace_to_json(const TunerTrace& trace) {
  json entries = json::array();
  for (std::size_t i = 0; i < trace.entries.size(); ++i) {
    json e{{"config", config_to_json(trace.entries[i].config)}, {"loss", trace.entries[i].loss}};
    if (i < trace.points.size()) e["point"] = trace.points[i];
    entries.push_back(std::move(e));
  }
  return json{{"version", "1"},
              {"seed", trace.seed},
              {"n_calls", trace.n_calls},
              {"best_loss", trace.best_loss},
              {"best_config", config_to_json(trace.best_config)},
              {"entries", std::move(entries)}};
}

TunerTrace trace_from_json(const json& j) {
  TunerTrace trace;
  trace.seed = static_cast<std::uint64_t>(require_number(j, "seed"));
  trace.n_calls = static_cast<int>(require_number(j, "n_calls"));
  trace.best_loss = require_number(j, "best_loss");
  trace.best_config = config_from_json(require(j, "best_config"));
  const json& entries = require(j, "entries");
  if (!entries.is_array()) throw Error(ErrorCode::CorruptFile, "'entries' is not an array");
  for (const auto& je : entries) {
    TraceEntry e;
    e.config = config_from_json(require(je, "config"));
    e.loss = require_number(je, "loss");
    trace.entries.push_back(std::move(e));
    if (je.contains("point")) {
      trace.points.push_back(je["point"].get<TunerPoint>());
    }
  }
  return trace;
}

json heldout_manifest_to_json(const std::vector<std::string>& plan_files,
                              const std::vector<HeldOutPlan>& held_out) {
  if (plan_files.size() != held_out.size()) {
    throw Error(ErrorCode::LengthMismatch, "manifest file list and held-out list disagree");
  }
  json truths = json::object();
  for (const auto& h : held_out) truths[h.plan.plan_id] = h.true_percentile;
  return json{{"version", "1"}, {"plans", plan_files}, {"true_percentiles", std::move(truths)}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, "'" + path.string() + "': " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw Error(ErrorCode::IoFailure, "failed writing '" + path.string() + "'");
  }
}

std::vector<HeldOutPlan> load_test_dir(const std::filesystem::path& dir) {
  const json manifest = read_json_file(dir / "manifest.json");
  const json& files = require(manifest, "plans");
  const json& truths = require(manifest, "true_percentiles");
  if (!files.is_array() || !truths.is_object()) {
    throw Error(ErrorCode::CorruptFile, "held-out manifest has malformed plans/true_percentiles");
  }
  std::vector<HeldOutPlan> out;
  for (const auto& f : files) {
    if (!f.is_string()) throw Error(ErrorCode::CorruptFile, "plan file name is not a string");
    HeldOutPlan h;
    h.plan = plan_from_json(read_json_file(dir / f.get<std::string>()));
    auto it = truths.find(h.plan.plan_id);
    if (it == truths.end() || !it->is_number()) {
      throw Error(ErrorCode::CorruptFile,
                  "manifest lacks a true percentile for plan '" + h.plan.plan_id + "'");
    }
    h.true_percentile = it->get<double>();
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace planeval::io
