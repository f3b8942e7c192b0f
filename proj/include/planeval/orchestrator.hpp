#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "planeval/core.hpp"
#include "planeval/embedding.hpp"
#include "planeval/knowledge_base.hpp"

namespace planeval {

inline constexpr const char* kToolRetrieve = "retrieve_and_predict";
inline constexpr const char* kToolCheck = "check_constraints";
inline constexpr int kSessionTurnLimit = 8;

struct ToolSchema {
  std::string name;
  nlohmann::json parameters;
  nlohmann::json result;
};

// The two tools the chat backend may call, in the expected order.
std::vector<ToolSchema> tool_schemas();

struct ToolCall {
  std::string name;
  nlohmann::json arguments;
};

enum class Role { System, User, AssistantText, AssistantToolCall, ToolResult };

struct Message {
  Role role = Role::System;
  std::string text;                     // System / User / AssistantText
  std::optional<ToolCall> call;         // AssistantToolCall
  std::string tool_name;                // ToolResult
  std::optional<nlohmann::json> result; // ToolResult, structured value
};

using Conversation = std::vector<Message>;

// A backend reply is exactly one of: a tool call, or final assistant text.
struct BackendReply {
  std::optional<ToolCall> tool_call;
  std::optional<std::string> content;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendReply next(const Conversation& conversation,
                            std::span<const ToolSchema> tools) = 0;
  virtual std::string backend_id() const = 0;
};

// Deterministic in-process backend: emits retrieve_and_predict, then
// check_constraints, then a templated summary echoing the tool results with
// percentiles at 4 decimal places.
std::unique_ptr<ChatBackend> scripted_mock_backend();

// Client for an external chat service:
//   POST {base_url}/chat  {"messages": [...], "tools": [...]}
//     -> {"tool_call": {"name", "arguments"}} | {"content": "..."}
std::unique_ptr<ChatBackend> remote_chat_backend(std::string base_url, std::string model,
                                                 int timeout_sec = 60);

struct ParsedSummary {
  bool malformed = true;
  double nn = 0.0;
  double weighted_avg = 0.0;
  double weighted_median = 0.0;
  std::vector<std::string> violated;  // metric ids, order as parsed
};

// Extracts the three labeled percentiles and the violated-constraint list;
// tolerant of surrounding prose. Any missing label marks the summary
// malformed rather than aborting.
ParsedSummary parse_summary(const std::string& text);

struct SessionOutcome {
  std::string summary_text;
  Conversation trace;
  std::vector<std::string> sequence_violations;  // recorded, never masked
  bool turn_limit_exceeded = false;
  ParsedSummary parsed;
};

// Drives one tool-augmented evaluation session: system prompt + plan payload
// in, backend-issued tool calls executed against the real modules, final
// summary out. Terminates on final text or after kSessionTurnLimit turns.
SessionOutcome run_session(const PlanRecord& plan, const KnowledgeBase& kb,
                           const std::map<std::string, ProtocolIndex>& indexes,
                           const RetrievalConfig& config, Embedder& embedder,
                           ChatBackend& backend);

struct AgreementRecord {
  bool nn = false;
  bool weighted_avg = false;
  bool weighted_median = false;
  bool violations = false;
  bool overall = false;
};

// Percentiles agree within 0.005 (the 4-decimal template rounding);
// violation sets must match exactly.
AgreementRecord verify_consistency(const SessionOutcome& outcome,
                                   const PredictionResult& reference_prediction,
                                   const ViolationReport& reference_violations);

nlohmann::json outcome_to_json(const SessionOutcome& outcome);
nlohmann::json agreement_to_json(const AgreementRecord& record);

}  // namespace planeval
