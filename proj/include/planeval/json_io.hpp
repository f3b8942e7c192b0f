#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "planeval/core.hpp"
#include "planeval/knowledge_base.hpp"
#include "planeval/metrics.hpp"
#include "planeval/tuner.hpp"

namespace planeval::io {

using nlohmann::json;

// Malformed documents raise CorruptFile with a field-level message; all
// numbers round-trip at full double precision.

json protocol_to_json(const ProtocolSpec& spec);
ProtocolSpec protocol_from_json(const json& j);

json plan_to_json(const PlanRecord& plan);
PlanRecord plan_from_json(const json& j);

json entry_to_json(const KBEntry& entry);
KBEntry entry_from_json(const json& j);

json kb_to_json(const KnowledgeBase& kb);
KnowledgeBase kb_from_json(const json& j);

json config_to_json(const RetrievalConfig& config);
RetrievalConfig config_from_json(const json& j);

json prediction_to_json(const PredictionResult& result);
json violations_to_json(const ViolationReport& report);

json report_to_json(const EvaluationReport& report);

json trace_to_json(const TunerTrace& trace);
TunerTrace trace_from_json(const json& j);

// Held-out manifest: plan file names relative to the manifest directory plus
// the frozen true percentiles.
json heldout_manifest_to_json(const std::vector<std::string>& plan_files,
                              const std::vector<HeldOutPlan>& held_out);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

// Loads a held-out test directory written by `kb build` (manifest.json plus
// one plan file per held-out plan).
std::vector<HeldOutPlan> load_test_dir(const std::filesystem::path& dir);

}  // namespace planeval::io
