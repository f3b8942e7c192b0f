#include "planeval/orchestrator.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <regex>

#include "planeval/constraints.hpp"
#include "planeval/json_io.hpp"
#include "planeval/retrieval.hpp"

namespace planeval {

using nlohmann::json;

std::vector<ToolSchema> tool_schemas() {
  ToolSchema retrieve;
  retrieve.name = kToolRetrieve;
  retrieve.parameters = json{
      {"type", "object"},
      {"properties", json::object()},
      {"description", "Retrieve similar plans for the plan under evaluation and predict its "
                      "percentile. The session is bound to one plan; no arguments."}};
  retrieve.result = json{
      {"type", "object"},
      {"properties",
       {{"nn_percentile", {{"type", "number"}}},
        {"weighted_avg_percentile", {{"type", "number"}}},
        {"weighted_median_percentile", {{"type", "number"}}},
        {"neighbors", {{"type", "array"}}}}}};

  ToolSchema check;
  check.name = kToolCheck;
  check.parameters = json{
      {"type", "object"},
      {"properties", json::object()},
      {"description", "Check the plan under evaluation against its protocol's constraints."}};
  check.result = json{{"type", "object"},
                      {"properties", {{"violations", {{"type", "array"}}}}}};
  return {std::move(retrieve), std::move(check)};
}

namespace {

std::string format_fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

const Message* find_tool_result(const Conversation& conversation, const char* name) {
  for (const auto& m : conversation) {
    if (m.role == Role::ToolResult && m.tool_name == name) return &m;
  }
  return nullptr;
}

class MockBackend final : public ChatBackend {
 public:
  BackendReply next(const Conversation& conversation, std::span<const ToolSchema>) override {
    const Message* retrieved = find_tool_result(conversation, kToolRetrieve);
    if (retrieved == nullptr) {
      return BackendReply{ToolCall{kToolRetrieve, json::object()}, std::nullopt};
    }
    const Message* checked = find_tool_result(conversation, kToolCheck);
    if (checked == nullptr) {
      return BackendReply{ToolCall{kToolCheck, json::object()}, std::nullopt};
    }
    return BackendReply{std::nullopt, compose(conversation, *retrieved, *checked)};
  }

  std::string backend_id() const override { return "scripted-mock"; }

 private:
  static std::string compose(const Conversation& conversation, const Message& retrieved,
                             const Message& checked) {
    std::string plan_id = "?";
    std::string protocol = "?";
    for (const auto& m : conversation) {
      if (m.role != Role::User) continue;
      try {
        const json payload = json::parse(m.text);
        plan_id = payload.value("plan_id", plan_id);
        protocol = payload.value("protocol_name", protocol);
      } catch (const json::exception&) {
      }
      break;
    }
    const json& pred = *retrieved.result;
    std::string violated = "none";
    const json& violations = (*checked.result)["violations"];
    if (violations.is_array() && !violations.empty()) {
      violated.clear();
      for (const auto& v : violations) {
        if (!violated.empty()) violated += ", ";
        violated += v["metric_id"].get<std::string>();
      }
    }
    return "Plan " + plan_id + " (" + protocol + "): nearest-neighbor percentile " +
           format_fixed4(pred["nn_percentile"].get<double>()) + "; weighted average " +
           format_fixed4(pred["weighted_avg_percentile"].get<double>()) + "; weighted median " +
           format_fixed4(pred["weighted_median_percentile"].get<double>()) +
           ". Violated constraints: " + violated + ".";
  }
};

class RemoteBackend final : public ChatBackend {
 public:
  RemoteBackend(std::string base_url, std::string model, int timeout_sec)
      : base_url_(std::move(base_url)), model_(std::move(model)), timeout_sec_(timeout_sec) {
    if (base_url_.empty()) {
      throw Error(ErrorCode::InvalidConfig, "remote chat backend requires a base URL");
    }
  }

  BackendReply next(const Conversation& conversation, std::span<const ToolSchema> tools) override {
    json body;
    body["model"] = model_;
    body["messages"] = json::array();
    for (const auto& m : conversation) {
      switch (m.role) {
        case Role::System:
          body["messages"].push_back({{"role", "system"}, {"content", m.text}});
          break;
        case Role::User:
          body["messages"].push_back({{"role", "user"}, {"content", m.text}});
          break;
        case Role::AssistantText:
          body["messages"].push_back({{"role", "assistant"}, {"content", m.text}});
          break;
        case Role::AssistantToolCall:
          body["messages"].push_back(
              {{"role", "assistant"},
               {"tool_call", {{"name", m.call->name}, {"arguments", m.call->arguments}}}});
          break;
        case Role::ToolResult:
          body["messages"].push_back(
              {{"role", "tool"}, {"name", m.tool_name}, {"result", *m.result}});
          break;
      }
    }
    body["tools"] = json::array();
    for (const auto& t : tools) {
      body["tools"].push_back(
          {{"name", t.name}, {"parameters", t.parameters}, {"result", t.result}});
    }

    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_sec_, 0);
    client.set_read_timeout(timeout_sec_, 0);
    auto res = client.Post("/chat", body.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::BackendFailure, "no response from chat backend at " + base_url_);
    }
    if (res->status != 200) {
      throw Error(ErrorCode::BackendFailure,
                  "chat backend returned HTTP " + std::to_string(res->status));
    }
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::BackendFailure, std::string("malformed chat reply: ") + e.what());
    }
    BackendReply out;
    if (reply.contains("tool_call")) {
      const json& call = reply["tool_call"];
      if (!call.contains("name") || !call["name"].is_string()) {
        throw Error(ErrorCode::BackendFailure, "tool_call reply lacks a name");
      }
      out.tool_call = ToolCall{call["name"].get<std::string>(),
                               call.value("arguments", json::object())};
    }
    if (reply.contains("content")) {
      if (!reply["content"].is_string()) {
        throw Error(ErrorCode::BackendFailure, "content reply is not a string");
      }
      out.content = reply["content"].get<std::string>();
    }
    if (out.tool_call.has_value() == out.content.has_value()) {
      throw Error(ErrorCode::BackendFailure,
                  "chat reply must carry exactly one of tool_call or content");
    }
    return out;
  }

  std::string backend_id() const override { return "remote:" + base_url_; }

 private:
  std::string base_url_;
  std::string model_;
  int timeout_sec_;
};

const char kSystemPrompt[] =
    "You are a radiotherapy plan evaluation assistant. Evaluate the plan in the user "
    "message. First call retrieve_and_predict to obtain its percentile estimates, then call "
    "check_constraints to list protocol violations, then reply with one final summary: "
    "\"Plan {id} ({protocol}): nearest-neighbor percentile {nn}; weighted average {avg}; "
    "weighted median {med}. Violated constraints: {comma-separated metric ids or none}.\" "
    "Render percentiles with 4 decimal places.";

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool extract_labeled_number(const std::string& text, const char* label, double& out) {
  const std::regex re(std::string(label) + R"([^0-9+\-]{0,20}([+-]?[0-9]+(?:\.[0-9]+)?))",
                      std::regex::icase);
  std::smatch m;
  if (!std::regex_search(text, m, re)) return false;
  out = std::stod(m[1].str());
  return true;
}

}  // namespace

std::unique_ptr<ChatBackend> scripted_mock_backend() { return std::make_unique<MockBackend>(); }

std::unique_ptr<ChatBackend> remote_chat_backend(std::string base_url, std::string model,
                                                 int timeout_sec) {
  return std::make_unique<RemoteBackend>(std::move(base_url), std::move(model), timeout_sec);
}

ParsedSummary parse_summary(const std::string& text) {
  ParsedSummary parsed;
  const bool have_nn = extract_labeled_number(text, R"(nearest[\- ]neighbor percentile)", parsed.nn);
  const bool have_avg = extract_labeled_number(text, R"(weighted average)", parsed.weighted_avg);
  const bool have_med = extract_labeled_number(text, R"(weighted median)", parsed.weighted_median);
  parsed.malformed = !(have_nn && have_avg && have_med);

  const std::regex viol_re(R"(violated constraints?\s*:?\s*([^.]*))", std::regex::icase);
  std::smatch m;
  if (std::regex_search(text, m, viol_re)) {
    const std::string list = trim(m[1].str());
    std::string lowered = list;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (!list.empty() && lowered != "none") {
      std::size_t start = 0;
      while (start <= list.size()) {
        const std::size_t comma = list.find(',', start);
        const std::string item =
            trim(comma == std::string::npos ? list.substr(start)
                                            : list.substr(start, comma - start));
        if (!item.empty()) parsed.violated.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
  }
  return parsed;
}

SessionOutcome run_session(const PlanRecord& plan, const KnowledgeBase& kb,
                           const std::map<std::string, ProtocolIndex>& indexes,
                           const RetrievalConfig& config, Embedder& embedder,
                           ChatBackend& backend) {
  auto proto_it = kb.protocols.find(plan.protocol_name);
  if (proto_it == kb.protocols.end()) {
    throw Error(ErrorCode::UnknownProtocol, "protocol '" + plan.protocol_name + "'");
  }
  validate_plan(plan, proto_it->second);

  const std::vector<ToolSchema> schemas = tool_schemas();
  SessionOutcome outcome;
  outcome.trace.push_back(Message{Role::System, kSystemPrompt, {}, {}, {}});
  outcome.trace.push_back(Message{Role::User, io::plan_to_json(plan).dump(), {}, {}, {}});

  int tool_calls_seen = 0;
  bool finished = false;
  for (int turn = 0; turn < kSessionTurnLimit; ++turn) {
    BackendReply reply = backend.next(outcome.trace, schemas);
    if (reply.tool_call.has_value() == reply.content.has_value()) {
      throw Error(ErrorCode::BackendFailure,
                  "backend reply must carry exactly one of tool_call or content");
    }
    if (reply.content) {
      outcome.summary_text = *reply.content;
      outcome.trace.push_back(Message{Role::AssistantText, *reply.content, {}, {}, {}});
      finished = true;
      break;
    }

    const ToolCall& call = *reply.tool_call;
    outcome.trace.push_back(Message{Role::AssistantToolCall, {}, call, {}, {}});

    json result;
    if (call.name == kToolRetrieve) {
      if (tool_calls_seen != 0) {
        outcome.sequence_violations.push_back("retrieve_and_predict at tool position " +
                                              std::to_string(tool_calls_seen) + ", expected 0");
      }
      result = io::prediction_to_json(predict(plan, kb, indexes, config, embedder));
    } else if (call.name == kToolCheck) {
      if (tool_calls_seen != 1) {
        outcome.sequence_violations.push_back("check_constraints at tool position " +
                                              std::to_string(tool_calls_seen) + ", expected 1");
      }
      result = io::violations_to_json(check_constraints(plan, proto_it->second));
    } else {
      outcome.sequence_violations.push_back("unknown tool '" + call.name + "'");
      result = json{{"error", "unknown tool '" + call.name + "'"}};
    }
    ++tool_calls_seen;
    outcome.trace.push_back(Message{Role::ToolResult, {}, {}, call.name, std::move(result)});
  }

  outcome.turn_limit_exceeded = !finished;
  if (finished && tool_calls_seen == 0) {
    // A summary with no tool calls behind it carries no verifiable values.
    outcome.sequence_violations.push_back("final text with no tool calls");
    outcome.parsed = ParsedSummary{};
  } else {
    outcome.parsed = finished ? parse_summary(outcome.summary_text) : ParsedSummary{};
  }
  return outcome;
}

json outcome_to_json(const SessionOutcome& outcome) {
  json trace = json::array();
  for (const auto& m : outcome.trace) {
    switch (m.role) {
      case Role::System:
        trace.push_back({{"role", "system"}, {"content", m.text}});
        break;
      case Role::User:
        trace.push_back({{"role", "user"}, {"content", m.text}});
        break;
      case Role::AssistantText:
        trace.push_back({{"role", "assistant"}, {"content", m.text}});
        break;
      case Role::AssistantToolCall:
        trace.push_back({{"role", "assistant"},
                         {"tool_call", {{"name", m.call->name}, {"arguments", m.call->arguments}}}});
        break;
      case Role::ToolResult:
        trace.push_back({{"role", "tool"}, {"name", m.tool_name}, {"result", *m.result}});
        break;
    }
  }
  json parsed;
  if (outcome.parsed.malformed) {
    parsed = json{{"malformed", true}};
  } else {
    parsed = json{{"malformed", false},
                  {"nn", outcome.parsed.nn},
                  {"weighted_avg", outcome.parsed.weighted_avg},
                  {"weighted_median", outcome.parsed.weighted_median},
                  {"violated", outcome.parsed.violated}};
  }
  return json{{"summary", outcome.summary_text},
              {"trace", std::move(trace)},
              {"sequence_violations", outcome.sequence_violations},
              {"turn_limit_exceeded", outcome.turn_limit_exceeded},
              {"parsed", std::move(parsed)}};
}

json agreement_to_json(const AgreementRecord& record) {
  return json{{"nn", record.nn},
              {"weighted_avg", record.weighted_avg},
              {"weighted_median", record.weighted_median},
              {"violations", record.violations},
              {"overall", record.overall}};
}

AgreementRecord verify_consistency(const SessionOutcome& outcome,
                                   const PredictionResult& reference_prediction,
                                   const ViolationReport& reference_violations) {
  AgreementRecord record;
  if (outcome.parsed.malformed) return record;
  constexpr double kTol = 0.005;
  record.nn = std::fabs(outcome.parsed.nn - reference_prediction.nn_percentile) <= kTol;
  record.weighted_avg =
      std::fabs(outcome.parsed.weighted_avg - reference_prediction.weighted_avg_percentile) <= kTol;
  record.weighted_median =
      std::fabs(outcome.parsed.weighted_median - reference_prediction.weighted_median_percentile) <=
      kTol;

  std::vector<std::string> parsed_ids = outcome.parsed.violated;
  std::vector<std::string> reference_ids = reference_violations.violated_ids();
  std::sort(parsed_ids.begin(), parsed_ids.end());
  std::sort(reference_ids.begin(), reference_ids.end());
  record.violations = parsed_ids == reference_ids;

  record.overall =
      record.nn && record.weighted_avg && record.weighted_median && record.violations;
  return record;
}

}  // namespace planeval
