#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "planeval/constraints.hpp"
#include "planeval/json_io.hpp"
#include "planeval/metrics.hpp"
#include "planeval/orchestrator.hpp"
#include "planeval/retrieval.hpp"
#include "planeval/scoring.hpp"
#include "planeval/service.hpp"
#include "planeval/synth.hpp"
#include "planeval/tuner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace planeval;

namespace {

// Published best configuration (MiniLM row); overridable per subcommand.
constexpr double kDefaultAlpha = 0.004313;
constexpr double kDefaultBetaNorm = 0.983081;
constexpr double kDefaultBetaRaw = 0.012606;
constexpr int kDefaultK = 4;

struct AppConfig {
  std::string embedder = "fallback";  // fallback | remote
  std::string embed_url;
  std::string backend = "mock";  // mock | remote
  std::string chat_url;
  std::string chat_model = "default";
  int http_timeout_sec = 30;
  RetrievalConfig retrieval{kDefaultAlpha, kDefaultBetaNorm, kDefaultBetaRaw, kDefaultK};
  std::uint64_t seed = 0;

  void load_env() {
    if (const char* v = std::getenv("PLANEVAL_EMBED_URL")) {
      embed_url = v;
      embedder = "remote";
    }
    if (const char* v = std::getenv("PLANEVAL_CHAT_URL")) {
      chat_url = v;
    }
  }

  std::unique_ptr<Embedder> make_embedder() const {
    if (embedder == "remote") {
      if (embed_url.empty()) {
        throw Error(ErrorCode::InvalidConfig, "remote embedder selected without a URL");
      }
      return std::make_unique<RemoteEmbedder>(embed_url, http_timeout_sec);
    }
    if (embedder != "fallback") {
      throw Error(ErrorCode::InvalidConfig, "unknown embedder '" + embedder + "'");
    }
    return std::make_unique<FallbackEmbedder>();
  }

  std::unique_ptr<ChatBackend> make_backend() const {
    if (backend == "remote") {
      if (chat_url.empty()) {
        throw Error(ErrorCode::InvalidConfig, "remote backend selected without a URL");
      }
      return remote_chat_backend(chat_url, chat_model, http_timeout_sec);
    }
    if (backend != "mock") {
      throw Error(ErrorCode::InvalidConfig, "unknown backend '" + backend + "'");
    }
    return scripted_mock_backend();
  }
};

// Files of a directory with a given extension, sorted by filename.
std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::IoFailure, "'" + dir.string() + "' is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return files;
}

std::vector<PlanRecord> load_plans_dir(const fs::path& dir) {
  std::vector<PlanRecord> plans;
  for (const auto& f : sorted_files(dir, ".json")) {
    plans.push_back(io::plan_from_json(io::read_json_file(f)));
  }
  if (plans.empty()) {
    throw Error(ErrorCode::EmptyInput, "no plan files under '" + dir.string() + "'");
  }
  return plans;
}

std::vector<ProtocolSpec> load_protocols_dir(const fs::path& dir) {
  std::vector<ProtocolSpec> protocols;
  for (const auto& f : sorted_files(dir, ".json")) {
    protocols.push_back(io::protocol_from_json(io::read_json_file(f)));
  }
  if (protocols.empty()) {
    throw Error(ErrorCode::EmptyInput, "no protocol files under '" + dir.string() + "'");
  }
  return protocols;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "undefined"; }

void print_report_table(const EvaluationReport& report) {
  auto row = [](const char* name, const MethodMetrics& m) {
    std::printf("%-17s %10s %10s %10s %10s %10s %9s %9s\n", name, fmt_opt(m.pearson_r).c_str(),
                fmt_opt(m.spearman_rho).c_str(), fmt(m.mae).c_str(), fmt(m.rmse).c_str(),
                fmt_opt(m.r2).c_str(), fmt(m.pct_within_5).c_str(), fmt(m.pct_within_10).c_str());
  };
  std::printf("%-17s %10s %10s %10s %10s %10s %9s %9s\n", "Method", "Pearson r", "Spearman",
              "MAE", "RMSE", "R2", "%<=5pt", "%<=10pt");
  row("Nearest Neighbor", report.nearest_neighbor);
  row("Weighted Average", report.weighted_average);
  row("Weighted Median", report.weighted_median);
  std::printf("Loss %s\n", fmt(report.loss).c_str());
}

void print_config_table(const RetrievalConfig& config, const EvaluationReport& report) {
  std::printf("%3s %10s %10s %10s %10s %10s %9s %10s %10s\n", "k", "alpha", "beta_norm",
              "beta_raw", "RMSE_AVG", "MAE_NN", "%<=5_NN", "%<=10_AVG", "Loss");
  std::printf("%3d %10s %10s %10s %10s %10s %9s %10s %10s\n", config.k, fmt(config.alpha).c_str(),
              fmt(config.beta_norm).c_str(), fmt(config.beta_raw).c_str(),
              fmt(report.weighted_average.rmse).c_str(), fmt(report.nearest_neighbor.mae).c_str(),
              fmt(report.nearest_neighbor.pct_within_5).c_str(),
              fmt(report.weighted_average.pct_within_10).c_str(), fmt(report.loss).c_str());
}

int run(int argc, char** argv) {
  CLI::App app{"Protocol-aware radiotherapy plan evaluation engine"};
  app.require_subcommand(1);

  AppConfig cfg;
  cfg.load_env();
  app.add_option("--embedder", cfg.embedder, "Embedding provider: fallback | remote");
  app.add_option("--embed-url", cfg.embed_url, "Remote embedding service base URL");
  app.add_option("--chat-url", cfg.chat_url, "Remote chat backend base URL");
  app.add_option("--chat-model", cfg.chat_model, "Remote chat model identifier");
  app.add_option("--http-timeout", cfg.http_timeout_sec, "HTTP timeout in seconds");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic protocols and plans");
  std::uint64_t synth_seed = 1;
  int synth_protocols = 9;
  int synth_plans = 68;
  double synth_rate = 0.1;
  std::string synth_out;
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--protocols", synth_protocols, "Number of protocols");
  synth_cmd->add_option("--plans-per-protocol", synth_plans, "Plans per protocol");
  synth_cmd->add_option("--violation-rate", synth_rate, "Per-metric exceedance probability");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  // kb build
  auto* kb_cmd = app.add_subcommand("kb", "Knowledge base operations");
  auto* kb_build = kb_cmd->add_subcommand("build", "Score plans and build the knowledge base");
  std::string kbb_plans, kbb_protocols, kbb_out, kbb_test_out;
  double kbb_split = 0.1;
  std::uint64_t kbb_seed = 1;
  kb_build->add_option("--plans", kbb_plans, "Directory of plan files")->required();
  kb_build->add_option("--protocols", kbb_protocols, "Directory of protocol files")->required();
  kb_build->add_option("--split", kbb_split, "Held-out fraction in [0,1)");
  kb_build->add_option("--seed", kbb_seed, "Split seed");
  kb_build->add_option("--out", kbb_out, "Knowledge base output file")->required();
  kb_build->add_option("--test-out", kbb_test_out,
                       "Held-out output directory (default: <out dir>/heldout)");

  // score
  auto* score_cmd = app.add_subcommand("score", "Normalize and score one plan");
  std::string score_plan_path, score_protocol_path, score_kb_path;
  score_cmd->add_option("--plan", score_plan_path, "Plan file")->required();
  score_cmd->add_option("--protocol", score_protocol_path, "Protocol file")->required();
  score_cmd->add_option("--kb", score_kb_path, "Knowledge base for the percentile lookup");

  // retrieve
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Retrieve neighbors and predict percentiles");
  std::string ret_plan, ret_kb;
  RetrievalConfig ret_cfg = cfg.retrieval;
  retrieve_cmd->add_option("--plan", ret_plan, "Plan file")->required();
  retrieve_cmd->add_option("--kb", ret_kb, "Knowledge base file")->required();
  retrieve_cmd->add_option("--alpha", ret_cfg.alpha, "Text similarity weight");
  retrieve_cmd->add_option("--beta-norm", ret_cfg.beta_norm, "Normalized-metric weight");
  retrieve_cmd->add_option("--beta-raw", ret_cfg.beta_raw, "Raw-metric weight");
  retrieve_cmd->add_option("-k,--k", ret_cfg.k, "Retrieval depth");

  // check
  auto* check_cmd = app.add_subcommand("check", "Check a plan against protocol constraints");
  std::string check_plan, check_protocol;
  check_cmd->add_option("--plan", check_plan, "Plan file")->required();
  check_cmd->add_option("--protocol", check_protocol, "Protocol file")->required();

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "Tune retrieval hyperparameters");
  std::string tune_kb, tune_test, tune_trace_out = "tuner_trace.json";
  std::string tune_config_out = "best_config.json";
  int tune_calls = 50;
  int tune_init = 10;
  std::uint64_t tune_seed = 1;
  tune_cmd->add_option("--kb", tune_kb, "Knowledge base file")->required();
  tune_cmd->add_option("--test", tune_test, "Held-out directory")->required();
  tune_cmd->add_option("--calls", tune_calls, "Objective evaluation budget");
  tune_cmd->add_option("--init", tune_init, "Random initial draws");
  tune_cmd->add_option("--seed", tune_seed, "Tuner seed");
  tune_cmd->add_option("--trace-out", tune_trace_out, "Trace output file");
  tune_cmd->add_option("--config-out", tune_config_out, "Best-config output file");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate prediction quality on held-out plans");
  std::string eval_kb, eval_test, eval_config;
  eval_cmd->add_option("--kb", eval_kb, "Knowledge base file")->required();
  eval_cmd->add_option("--test", eval_test, "Held-out directory")->required();
  eval_cmd->add_option("--config", eval_config, "Retrieval config file");

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "Run a tool-augmented evaluation session");
  std::string exp_plan, exp_kb, exp_config;
  explain_cmd->add_option("--plan", exp_plan, "Plan file")->required();
  explain_cmd->add_option("--kb", exp_kb, "Knowledge base file")->required();
  explain_cmd->add_option("--backend", cfg.backend, "Chat backend: mock | remote");
  explain_cmd->add_option("--config", exp_config, "Retrieval config file");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve the knowledge base over HTTP");
  std::string serve_kb, serve_addr = "127.0.0.1:8080";
  serve_cmd->add_option("--kb", serve_kb, "Knowledge base file")->required();
  serve_cmd->add_option("--addr", serve_addr, "HOST:PORT listen address");

  CLI11_PARSE(app, argc, argv);

  if (*synth_cmd) {
    const SynthConfig config =
        default_synth_config(synth_seed, synth_protocols, synth_plans, synth_rate);
    const SynthOutput out = generate(config);
    const fs::path root(synth_out);
    fs::create_directories(root / "protocols");
    fs::create_directories(root / "plans");
    for (const auto& spec : out.protocols) {
      io::write_json_file(root / "protocols" / ("protocol_" + spec.name + ".json"),
                          io::protocol_to_json(spec));
    }
    for (const auto& plan : out.plans) {
      io::write_json_file(root / "plans" / ("plan_" + plan.plan_id + ".json"),
                          io::plan_to_json(plan));
    }
    std::printf("wrote %zu protocols, %zu plans under %s\n", out.protocols.size(),
                out.plans.size(), synth_out.c_str());
    return 0;
  }

  if (*kb_build) {
    const auto plans = load_plans_dir(kbb_plans);
    const auto protocols = load_protocols_dir(kbb_protocols);
    const KBBuildResult built = build_kb(plans, protocols, kbb_split, kbb_seed);
    const fs::path out_path(kbb_out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_kb(built.kb, out_path);

    const fs::path test_dir = kbb_test_out.empty()
                                  ? (out_path.has_parent_path() ? out_path.parent_path() : ".") /
                                        "heldout"
                                  : fs::path(kbb_test_out);
    fs::create_directories(test_dir);
    std::vector<std::string> files;
    for (const auto& h : built.held_out) {
      const std::string file = "plan_" + h.plan.plan_id + ".json";
      io::write_json_file(test_dir / file, io::plan_to_json(h.plan));
      files.push_back(file);
    }
    io::write_json_file(test_dir / "manifest.json",
                        io::heldout_manifest_to_json(files, built.held_out));
    std::size_t kept = 0;
    for (const auto& [name, entries] : built.kb.entries) kept += entries.size();
    std::printf("knowledge base: %zu entries across %zu protocols -> %s\n", kept,
                built.kb.protocols.size(), kbb_out.c_str());
    std::printf("held out: %zu plans -> %s\n", built.held_out.size(), test_dir.string().c_str());
    return 0;
  }

  if (*score_cmd) {
    const PlanRecord plan = io::plan_from_json(io::read_json_file(score_plan_path));
    const ProtocolSpec spec = io::protocol_from_json(io::read_json_file(score_protocol_path));
    validate_plan(plan, spec);
    const NormalizedPlan scored = score_plan(plan, spec);
    json out{{"plan_id", plan.plan_id},
             {"protocol_name", plan.protocol_name},
             {"normalized_metrics", scored.normalized},
             {"gm_score", scored.gm_score}};
    if (!score_kb_path.empty()) {
      const KnowledgeBase kb = load_kb(score_kb_path);
      auto it = kb.entries.find(plan.protocol_name);
      if (it == kb.entries.end() || it->second.empty()) {
        throw Error(ErrorCode::UnknownProtocol,
                    "knowledge base holds no cohort for protocol '" + plan.protocol_name + "'");
      }
      std::vector<double> gms;
      gms.reserve(it->second.size());
      for (const auto& e : it->second) gms.push_back(e.gm_score);
      out["percentile"] = percentile_rank(scored.gm_score, gms, false);
    }
    print_json(out);
    return 0;
  }

  if (*retrieve_cmd) {
    const PlanRecord plan = io::plan_from_json(io::read_json_file(ret_plan));
    const KnowledgeBase kb = load_kb(ret_kb);
    auto embedder = cfg.make_embedder();
    const auto indexes = build_indexes(kb, *embedder);
    print_json(io::prediction_to_json(predict(plan, kb, indexes, ret_cfg, *embedder)));
    return 0;
  }

  if (*check_cmd) {
    const PlanRecord plan = io::plan_from_json(io::read_json_file(check_plan));
    const ProtocolSpec spec = io::protocol_from_json(io::read_json_file(check_protocol));
    const ViolationReport report = check_constraints(plan, spec);
    print_json(io::violations_to_json(report));
    return report.empty() ? 0 : 3;
  }

  if (*tune_cmd) {
    const KnowledgeBase kb = load_kb(tune_kb);
    const auto test_set = io::load_test_dir(tune_test);
    auto embedder = cfg.make_embedder();
    const auto indexes = build_indexes(kb, *embedder);
    const TunerTrace trace =
        tune_retrieval(kb, indexes, test_set, *embedder, tune_calls, tune_seed, tune_init);
    io::write_json_file(tune_trace_out, io::trace_to_json(trace));
    io::write_json_file(tune_config_out, io::config_to_json(trace.best_config));
    const EvaluationReport best =
        evaluate_system(kb, indexes, test_set, trace.best_config, *embedder);
    print_config_table(trace.best_config, best);
    std::printf("best loss %s after %d calls (trace -> %s, config -> %s)\n",
                fmt(trace.best_loss).c_str(), trace.n_calls, tune_trace_out.c_str(),
                tune_config_out.c_str());
    return 0;
  }

  if (*eval_cmd) {
    const KnowledgeBase kb = load_kb(eval_kb);
    const auto test_set = io::load_test_dir(eval_test);
    auto embedder = cfg.make_embedder();
    const auto indexes = build_indexes(kb, *embedder);
    RetrievalConfig config = cfg.retrieval;
    if (!eval_config.empty()) {
      config = io::config_from_json(io::read_json_file(eval_config));
    }
    const EvaluationReport report = evaluate_system(kb, indexes, test_set, config, *embedder);
    print_report_table(report);
    return 0;
  }

  if (*explain_cmd) {
    const PlanRecord plan = io::plan_from_json(io::read_json_file(exp_plan));
    const KnowledgeBase kb = load_kb(exp_kb);
    auto embedder = cfg.make_embedder();
    auto backend = cfg.make_backend();
    const auto indexes = build_indexes(kb, *embedder);
    RetrievalConfig config = cfg.retrieval;
    if (!exp_config.empty()) {
      config = io::config_from_json(io::read_json_file(exp_config));
    }
    const SessionOutcome outcome = run_session(plan, kb, indexes, config, *embedder, *backend);
    const PredictionResult reference = predict(plan, kb, indexes, config, *embedder);
    const ViolationReport violations = check_constraints(plan, kb.protocols.at(plan.protocol_name));
    const AgreementRecord agreement = verify_consistency(outcome, reference, violations);
    json out = outcome_to_json(outcome);
    out["agreement"] = agreement_to_json(agreement);
    print_json(out);
    return agreement.overall ? 0 : 1;
  }

  if (*serve_cmd) {
    const auto colon = serve_addr.rfind(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "--addr must look like HOST:PORT");
    }
    const std::string host = serve_addr.substr(0, colon);
    const int port = std::stoi(serve_addr.substr(colon + 1));
    PlanService service(load_kb(serve_kb), cfg.retrieval, cfg.make_embedder(), cfg.make_backend());
    const int bound = service.bind(host, port);
    std::printf("listening on %s:%d\n", host.c_str(), bound);
    std::fflush(stdout);
    return service.run() ? 0 : 2;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 2;
  }
}
