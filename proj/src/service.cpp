#include "planeval/service.hpp"

#include <httplib.h>

#include <functional>

#include "planeval/constraints.hpp"
#include "planeval/json_io.hpp"
#include "planeval/retrieval.hpp"
#include "planeval/scoring.hpp"

namespace planeval {

using nlohmann::json;

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownProtocol:
      return 404;
    case ErrorCode::IoFailure:
    case ErrorCode::EmbeddingProviderFailure:
    case ErrorCode::BackendFailure:
      return 502;
    default:
      return 400;
  }
}

json error_body(ErrorCode code, const std::string& message) {
  return json{{"error", error_code_name(code)}, {"message", message}};
}

}  // namespace

struct PlanService::Impl {
  KnowledgeBase kb;
  std::map<std::string, ProtocolIndex> indexes;
  RetrievalConfig config;
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<ChatBackend> backend;
  httplib::Server server;
  std::string host;
  int port = 0;

  void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
  }

  // Runs a handler that produces the 200 body, mapping module errors onto
  // status codes with a machine-readable error category.
  void guarded(httplib::Response& res, const std::function<json()>& produce) {
    try {
      reply_json(res, 200, produce());
    } catch (const Error& e) {
      reply_json(res, status_for(e.code()), error_body(e.code(), e.message()));
    } catch (const json::exception& e) {
      reply_json(res, 400, error_body(ErrorCode::CorruptFile, e.what()));
    } catch (const std::exception& e) {
      reply_json(res, 500, json{{"error", "Internal"}, {"message", e.what()}});
    }
  }

  PlanRecord plan_from_request(const std::string& body) {
    json parsed;
    try {
      parsed = json::parse(body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, std::string("malformed request body: ") + e.what());
    }
    if (!parsed.contains("plan")) {
      throw Error(ErrorCode::CorruptFile, "request body lacks a 'plan' field");
    }
    return io::plan_from_json(parsed["plan"]);
  }

  RetrievalConfig config_from_request(const std::string& body) {
    const json parsed = json::parse(body, nullptr, false);
    if (parsed.is_object() && parsed.contains("config")) {
      return io::config_from_json(parsed["config"]);
    }
    return config;
  }

  const ProtocolSpec& spec_for(const PlanRecord& plan) {
    auto it = kb.protocols.find(plan.protocol_name);
    if (it == kb.protocols.end()) {
      throw Error(ErrorCode::UnknownProtocol, "protocol '" + plan.protocol_name + "'");
    }
    return it->second;
  }

  void wire_routes() {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("ok\n", "text/plain");
    });

    server.Get("/v1/kb/stats", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [this] {
        json protocols = json::object();
        for (const auto& [name, spec] : kb.protocols) {
          json metrics = json::array();
          for (const auto& c : spec.constraints) metrics.push_back(c.metric_id);
          const auto entry_it = kb.entries.find(name);
          const std::size_t count = entry_it == kb.entries.end() ? 0 : entry_it->second.size();
          protocols[name] = json{{"entries", count}, {"metrics", std::move(metrics)}};
        }
        return json{{"version", kb.version},
                    {"embedding", {{"provider", kb.embedding_meta.provider},
                                   {"dimension", kb.embedding_meta.dimension}}},
                    {"protocols", std::move(protocols)}};
      });
    });

    server.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const PlanRecord plan = plan_from_request(req.body);
        const ProtocolSpec& spec = spec_for(plan);
        validate_plan(plan, spec);
        const NormalizedPlan scored = score_plan(plan, spec);
        json out{{"plan_id", plan.plan_id},
                 {"protocol_name", plan.protocol_name},
                 {"normalized_metrics", scored.normalized},
                 {"gm_score", scored.gm_score}};
        auto it = indexes.find(plan.protocol_name);
        if (it != indexes.end() && !it->second.gm_scores.empty()) {
          out["percentile"] = percentile_rank(scored.gm_score, it->second.gm_scores, false);
        }
        return out;
      });
    });

    server.Post("/v1/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const PlanRecord plan = plan_from_request(req.body);
        const RetrievalConfig cfg = config_from_request(req.body);
        return io::prediction_to_json(predict(plan, kb, indexes, cfg, *embedder));
      });
    });

    server.Post("/v1/check", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const PlanRecord plan = plan_from_request(req.body);
        return io::violations_to_json(check_constraints(plan, spec_for(plan)));
      });
    });

    server.Post("/v1/explain", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const PlanRecord plan = plan_from_request(req.body);
        const RetrievalConfig cfg = config_from_request(req.body);
        const SessionOutcome outcome = run_session(plan, kb, indexes, cfg, *embedder, *backend);
        const PredictionResult reference = predict(plan, kb, indexes, cfg, *embedder);
        const ViolationReport violations = check_constraints(plan, spec_for(plan));
        const AgreementRecord agreement = verify_consistency(outcome, reference, violations);
        json out = outcome_to_json(outcome);
        out["agreement"] = agreement_to_json(agreement);
        return out;
      });
    });
  }
};

PlanService::PlanService(KnowledgeBase kb, RetrievalConfig default_config,
                         std::unique_ptr<Embedder> embedder, std::unique_ptr<ChatBackend> backend)
    : impl_(std::make_unique<Impl>()) {
  impl_->kb = std::move(kb);
  impl_->config = default_config.normalized();
  impl_->embedder = std::move(embedder);
  impl_->backend = std::move(backend);
  impl_->indexes = build_indexes(impl_->kb, *impl_->embedder);
  impl_->wire_routes();
}

PlanService::~PlanService() = default;

int PlanService::bind(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    if (!impl_->server.bind_to_port(host, port)) {
      throw Error(ErrorCode::IoFailure,
                  "cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->port = port;
  }
  if (impl_->port <= 0) {
    throw Error(ErrorCode::IoFailure, "cannot bind " + host);
  }
  return impl_->port;
}

bool PlanService::run() { return impl_->server.listen_after_bind(); }

void PlanService::stop() { impl_->server.stop(); }

}  // namespace planeval
