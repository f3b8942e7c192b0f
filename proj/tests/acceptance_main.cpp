// Acceptance gate: every criterion prints exactly one PASS/FAIL line and the
// process exits nonzero if any of them fail.
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "planeval/constraints.hpp"
#include "planeval/json_io.hpp"
#include "planeval/metrics.hpp"
#include "planeval/orchestrator.hpp"
#include "planeval/retrieval.hpp"
#include "planeval/rng.hpp"
#include "planeval/scoring.hpp"
#include "planeval/synth.hpp"
#include "planeval/tuner.hpp"

using namespace planeval;
using nlohmann::json;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;       // first failure description
  std::string serialized;   // determinism fingerprint (criteria 2, 5, 7)

  void fail(const std::string& message) {
    if (ok) detail = message;
    ok = false;
  }
};

std::string hexd(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1
Outcome criterion1_loss_formula() {
  Outcome out;
  struct Row {
    const char* model;
    double rmse_avg, mae_nn, pct5_nn, pct10_avg, loss;
  };
  const Row rows[] = {
      {"all-mpnet-base-v2", 3.777993, 1.770161, 100.0, 98.387097, 5.564283},
      {"all-MiniLM-L6-v2", 3.777999, 1.738065, 100.0, 98.387097, 5.532193},
      {"all-distilroberta-v1", 3.777993, 1.770161, 100.0, 98.387097, 5.564284},
      {"msmarco-distilbert-base-tas-b", 3.777997, 1.770161, 100.0, 98.387097, 5.564287},
      {"stsb-roberta-large", 3.778000, 1.738065, 100.0, 98.387097, 5.532194},
  };
  for (const Row& r : rows) {
    const double got = scalarized_loss(r.rmse_avg, r.mae_nn, r.pct5_nn, r.pct10_avg);
    if (std::fabs(got - r.loss) > 1e-6) {
      out.fail(std::string(r.model) + ": got " + std::to_string(got) + ", published " +
               std::to_string(r.loss));
    }
  }
  return out;
}

// ---------------------------------------------------------------- criterion 2
Outcome criterion2_self_retrieval() {
  Outcome out;
  const SynthOutput synth = generate(default_synth_config(2024, 9, 69, 0.15));
  if (synth.plans.size() < 600) {
    out.fail("corpus too small: " + std::to_string(synth.plans.size()));
    return out;
  }
  const KBBuildResult built = build_kb(synth.plans, synth.protocols, 0.0, 2024);
  FallbackEmbedder embedder;
  const auto indexes = build_indexes(built.kb, embedder);
  const RetrievalConfig config{0.004313, 0.983081, 0.012606, 4};

  std::ostringstream fingerprint;
  double abs_err_sum = 0.0;
  std::size_t n = 0, within5 = 0;
  for (const auto& [name, entries] : built.kb.entries) {
    for (const auto& entry : entries) {
      PlanRecord plan;
      plan.plan_id = entry.plan_id;
      plan.protocol_name = entry.protocol_name;
      plan.metrics = entry.raw_metrics;
      const PredictionResult r = predict(plan, built.kb, indexes, config, embedder);
      if (r.nn_percentile != entry.percentile) {
        out.fail(entry.plan_id + ": nn " + std::to_string(r.nn_percentile) + " != stored " +
                 std::to_string(entry.percentile));
      }
      abs_err_sum += std::fabs(r.nn_percentile - entry.percentile);
      if (std::fabs(r.nn_percentile - entry.percentile) <= 5.0) ++within5;
      ++n;
      fingerprint << entry.plan_id << ' ' << hexd(r.nn_percentile) << ' '
                  << hexd(r.weighted_avg_percentile) << ' '
                  << hexd(r.weighted_median_percentile) << '\n';
    }
  }
  if (abs_err_sum / static_cast<double>(n) != 0.0) out.fail("MAE_NN nonzero");
  if (within5 != n) out.fail("%<=5pt_NN below 100");
  out.serialized = fingerprint.str();
  return out;
}

// ---------------------------------------------------------------- criterion 3
Outcome criterion3_oracle_equivalence() {
  Outcome out;
  FallbackEmbedder embedder;
  const RetrievalConfig configs[] = {
      {0.004313, 0.983081, 0.012606, 4}, {0.3, 0.4, 0.3, 7}, {1.0, 1.0, 1.0, 3}};
  int queries = 0;
  for (int corpus = 0; corpus < 5 && queries < 100; ++corpus) {
    const int cohort = 40 + corpus * 40;  // 40..200
    const SynthOutput synth =
        generate(default_synth_config(3000 + corpus, 1, cohort, 0.2));
    const KBBuildResult built =
        build_kb(synth.plans, synth.protocols, 0.1, 3000 + corpus);
    const auto indexes = build_indexes(built.kb, embedder);

    std::vector<PlanRecord> probes;
    for (const auto& h : built.held_out) probes.push_back(h.plan);
    const auto& entries = built.kb.entries.begin()->second;
    for (std::size_t i = 0; i < entries.size() && probes.size() < 20; ++i) {
      PlanRecord plan;
      plan.plan_id = entries[i].plan_id;
      plan.protocol_name = entries[i].protocol_name;
      plan.metrics = entries[i].raw_metrics;
      probes.push_back(plan);
    }
    for (std::size_t i = 0; i < probes.size() && queries < 100; ++i, ++queries) {
      const RetrievalConfig& config = configs[queries % 3];
      const PredictionResult got = predict(probes[i], built.kb, indexes, config, embedder);
      const PredictionResult want =
          testutil::brute_force_predict(probes[i], built.kb, config, embedder);
      if (!(got == want)) {
        out.fail("query " + probes[i].plan_id + " diverged from the brute-force oracle");
        return out;
      }
    }
  }
  if (queries < 100) out.fail("only " + std::to_string(queries) + " queries run");
  return out;
}

// ---------------------------------------------------------------- criterion 4
Outcome criterion4_percentile_properties() {
  Outcome out;
  Rng rng = Rng::stream(4, "acceptance:percentiles");
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.next_below(50);
    const bool force_ties = trial % 4 == 0;
    std::vector<double> gms;
    std::set<double> distinct;
    for (std::size_t i = 0; i < n; ++i) {
      double g = 1.0 + 99.0 * rng.next_unit();
      if (force_ties) g = std::round(g);  // coarse grid produces duplicates
      gms.push_back(g);
      distinct.insert(g);
    }
    std::vector<double> pct;
    double sum = 0.0;
    for (double g : gms) {
      const double p = percentile_rank(g, gms, true);
      if (!(p > 0.0 && p < 100.0)) {
        out.fail("percentile out of (0,100): " + std::to_string(p));
        return out;
      }
      pct.push_back(p);
      sum += p;
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (gms[i] < gms[j] && !(pct[i] > pct[j])) {
          out.fail("monotonicity violated");
          return out;
        }
        if (gms[i] == gms[j] && pct[i] != pct[j]) {
          out.fail("equal gms got different percentiles");
          return out;
        }
      }
    }
    if (distinct.size() == n &&
        std::fabs(sum - 50.0 * static_cast<double>(n)) > 1e-9) {
      out.fail("midrank sum identity off by " +
               std::to_string(sum - 50.0 * static_cast<double>(n)));
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------- criterion 5
// Rigged cohort: one metric carries the whole percentile signal, the other is
// noise whose raw scale dwarfs the signal while its normalized spread stays
// negligible. Normalized-vector distance therefore tracks the score gap while
// raw-vector distance tracks noise. Queries are small perturbations of cohort
// members, so concentrating rerank weight on the true nearest neighbor is
// genuinely optimal and weight-flattening admixtures hurt the loss.
struct RiggedSetup {
  KnowledgeBase kb;
  std::map<std::string, ProtocolIndex> indexes;
  std::vector<HeldOutPlan> test_set;
};

RiggedSetup build_rigged_setup(Embedder& embedder) {
  ProtocolSpec spec;
  spec.name = "RIG";
  spec.constraints = {
      ConstraintSpec{"A_mean_Gy", "A", MetricKind::MeanDose, 50.0, "Gy"},
      ConstraintSpec{"Noise_mean_Gy", "Noise", MetricKind::MeanDose, 50000.0, "Gy"}};
  spec = validate_protocol(spec);

  Rng rng = Rng::stream(5, "acceptance:rig");
  auto draw_plan = [&](const std::string& id) {
    PlanRecord plan;
    plan.plan_id = id;
    plan.protocol_name = "RIG";
    plan.metrics["A_mean_Gy"] = 50.0 * (0.10 + 0.80 * rng.next_unit());
    plan.metrics["Noise_mean_Gy"] = 50000.0 * (0.498 + 0.004 * rng.next_unit());
    return plan;
  };

  std::vector<PlanRecord> cohort;
  for (int i = 0; i < 60; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "rig-%03d", i);
    cohort.push_back(draw_plan(id));
  }

  RiggedSetup setup;
  setup.kb.protocols["RIG"] = spec;
  setup.kb.entries["RIG"] = score_cohort(cohort, spec);
  setup.indexes = build_indexes(setup.kb, embedder);

  std::vector<double> gms;
  for (const auto& e : setup.kb.entries["RIG"]) gms.push_back(e.gm_score);
  for (int i = 0; i < 40; ++i) {
    char id[20];
    std::snprintf(id, sizeof(id), "query-%02d", i);
    const PlanRecord& source = cohort[rng.next_below(cohort.size())];
    HeldOutPlan h;
    h.plan = draw_plan(id);
    h.plan.metrics["A_mean_Gy"] =
        source.metrics.at("A_mean_Gy") + (rng.next_unit() - 0.5) * 0.4;
    h.true_percentile =
        percentile_rank(score_plan(h.plan, spec).gm_score, gms, false);
    setup.test_set.push_back(h);
  }
  return setup;
}

Outcome criterion5_tuner_vs_grid() {
  Outcome out;
  FallbackEmbedder embedder;
  const RiggedSetup setup = build_rigged_setup(embedder);

  // Exhaustive lattice: 21-point simplex grid over the weights, k in [3,10].
  double grid_best = 1e300;
  RetrievalConfig grid_best_config;
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j + i <= 20; ++j) {
      const double alpha = i / 20.0;
      const double beta_norm = j / 20.0;
      const double beta_raw = (20 - i - j) / 20.0;
      if (alpha + beta_norm + beta_raw <= 0.0) continue;
      for (int k = kRetrievalDepthMin; k <= kRetrievalDepthMax; ++k) {
        RetrievalConfig config{alpha, beta_norm, beta_raw, k};
        const EvaluationReport report =
            evaluate_system(setup.kb, setup.indexes, setup.test_set, config, embedder);
        if (report.loss < grid_best) {
          grid_best = report.loss;
          grid_best_config = config;
        }
      }
    }
  }
  if (grid_best_config.normalized().beta_norm < 0.8) {
    out.fail("rig failed: grid optimum beta_norm = " +
             std::to_string(grid_best_config.normalized().beta_norm));
  }

  const TunerTrace trace =
      tune_retrieval(setup.kb, setup.indexes, setup.test_set, embedder, 50, 505);
  for (const auto& e : trace.entries) {
    const double sum = e.config.alpha + e.config.beta_norm + e.config.beta_raw;
    if (e.config.alpha < 0 || e.config.beta_norm < 0 || e.config.beta_raw < 0 ||
        std::fabs(sum - 1.0) > 1e-12 || e.config.k < kRetrievalDepthMin ||
        e.config.k > kRetrievalDepthMax) {
      out.fail("trace config out of bounds");
    }
  }
  if (trace.entries.size() != 50) out.fail("trace length != n_calls");
  if (trace.best_loss > grid_best * 1.05) {
    out.fail("tuner best " + std::to_string(trace.best_loss) + " vs grid best " +
             std::to_string(grid_best));
  }
  out.serialized = io::trace_to_json(trace).dump();
  return out;
}

// ---------------------------------------------------------------- criterion 6
Outcome criterion6_metric_suite() {
  Outcome out;
  auto expect = [&out](bool cond, const std::string& what) {
    if (!cond) out.fail(what);
  };
  auto near = [](std::optional<double> got, double want) {
    return got.has_value() && std::fabs(*got - want) <= 1e-12;
  };

  const std::vector<double> truth = {1.0, 2.0, 3.0};
  const std::vector<double> swapped = {1.0, 3.0, 2.0};
  const std::vector<double> spiky = {1.0, 2.0, 33.0};
  expect(std::fabs(mae(spiky, truth) - 10.0) <= 1e-12, "mae hand case");
  expect(std::fabs(rmse(spiky, truth) - std::sqrt(300.0)) <= 1e-12, "rmse hand case");
  expect(near(pearson_r(truth, truth), 1.0), "pearson identity");
  expect(near(pearson_r(std::vector<double>{-1.0, -2.0, -3.0}, truth), -1.0),
         "pearson reversal");
  expect(near(spearman_rho(swapped, truth), 0.5), "spearman rho=0.5 rank case");
  expect(near(r2(truth, truth), 1.0), "r2 identity");
  expect(std::fabs(pct_within(std::vector<double>{15.0, 20.0},
                              std::vector<double>{10.0, 20.0}, 5.0) -
                   100.0) <= 1e-12,
         "inclusive boundary");
  expect(std::fabs(pct_within(std::vector<double>{10.0, 27.0},
                              std::vector<double>{10.0, 20.0}, 5.0) -
                   50.0) <= 1e-12,
         "pct_within half case");

  const std::vector<double> flat = {4.0, 4.0, 4.0};
  expect(!pearson_r(flat, truth).has_value(), "pearson degenerate marker");
  expect(!pearson_r(truth, flat).has_value(), "pearson degenerate marker (truth)");
  expect(!spearman_rho(flat, truth).has_value(), "spearman degenerate marker");
  expect(!r2(truth, flat).has_value(), "r2 degenerate marker");
  return out;
}

// ---------------------------------------------------------------- criterion 7
Outcome criterion7_mock_agreement() {
  Outcome out;
  testutil::TempDir dir("acceptance7");
  const auto data = dir.path() / "data";
  const auto kb_file = dir.path() / "kb.json";
  const auto heldout = dir.path() / "heldout";

  SynthConfig config = default_synth_config(777, 9, 69, 0.25);
  config.protocols.back().plan_count = 55;  // 8x69 + 55 -> 62 held out at 0.1
  const SynthOutput synth = generate(config);

  std::filesystem::create_directories(data / "protocols");
  std::filesystem::create_directories(data / "plans");
  for (const auto& spec : synth.protocols) {
    io::write_json_file(data / "protocols" / ("protocol_" + spec.name + ".json"),
                        io::protocol_to_json(spec));
  }
  for (const auto& plan : synth.plans) {
    io::write_json_file(data / "plans" / ("plan_" + plan.plan_id + ".json"),
                        io::plan_to_json(plan));
  }

  auto q = [](const std::filesystem::path& p) { return "\"" + p.string() + "\""; };
  const testutil::CliResult build =
      testutil::run_cli("kb build --plans " + q(data / "plans") + " --protocols " +
                        q(data / "protocols") + " --split 0.1 --seed 777 --out " + q(kb_file) +
                        " --test-out " + q(heldout));
  if (build.exit_code != 0) {
    out.fail("kb build exited " + std::to_string(build.exit_code));
    return out;
  }
  const json manifest = io::read_json_file(heldout / "manifest.json");
  if (manifest.at("plans").size() != 62) {
    out.fail("expected 62 held-out plans, got " + std::to_string(manifest.at("plans").size()));
    return out;
  }

  std::ostringstream fingerprint;
  int agreed = 0;
  for (const auto& file : manifest.at("plans")) {
    const testutil::CliResult explain = testutil::run_cli(
        "explain --plan " + q(heldout / file.get<std::string>()) + " --kb " + q(kb_file) +
        " --backend mock");
    fingerprint << explain.output;
    if (explain.exit_code != 0) {
      out.fail(file.get<std::string>() + ": explain exited " +
               std::to_string(explain.exit_code));
      continue;
    }
    const json session = json::parse(explain.output);
    if (session.at("agreement").at("overall").get<bool>()) ++agreed;
  }
  if (agreed != 62) {
    out.fail("agreement on " + std::to_string(agreed) + "/62 plans");
  }
  out.serialized = fingerprint.str();
  return out;
}

// ---------------------------------------------------------------- criterion 8
Outcome criterion8_constraint_exactness() {
  Outcome out;
  Rng rng = Rng::stream(8, "acceptance:constraints");
  for (int draw = 0; draw < 10000; ++draw) {
    const int n_metrics = 3 + static_cast<int>(rng.next_below(5));
    ProtocolSpec spec;
    spec.name = "C";
    for (int m = 0; m < n_metrics; ++m) {
      char id[24];
      std::snprintf(id, sizeof(id), "M%02d_mean_Gy", m);
      spec.constraints.push_back(ConstraintSpec{id, "Organ", MetricKind::MeanDose,
                                                5.0 + 75.0 * rng.next_unit(), "Gy"});
    }
    spec = validate_protocol(spec);

    PlanRecord plan;
    plan.plan_id = "c";
    plan.protocol_name = "C";
    std::vector<std::string> expected;
    for (const auto& c : spec.constraints) {
      const std::uint64_t mode = rng.next_below(4);
      double value;
      if (mode == 0) {
        value = c.limit;  // exactly at the limit: must never flag
      } else if (mode == 1) {
        value = c.limit * (1.0 + 0.5 * rng.next_unit());
      } else {
        value = c.limit * rng.next_unit();
      }
      plan.metrics[c.metric_id] = value;
      if (value > c.limit) expected.push_back(c.metric_id);
    }
    const ViolationReport report = check_constraints(plan, spec);
    if (report.violated_ids() != expected) {
      out.fail("violation set mismatch on a random draw");
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------- criterion 9
Outcome criterion9_determinism(const Outcome& c2, const Outcome& c5, const Outcome& c7) {
  Outcome out;
  const Outcome c2b = criterion2_self_retrieval();
  if (c2b.serialized != c2.serialized) out.fail("criterion 2 rerun diverged");
  const Outcome c5b = criterion5_tuner_vs_grid();
  if (c5b.serialized != c5.serialized) out.fail("criterion 5 rerun diverged");
  const Outcome c7b = criterion7_mock_agreement();
  if (c7b.serialized != c7.serialized) out.fail("criterion 7 rerun diverged");
  return out;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&failures](int id, const char* title, const Outcome& r) {
    std::printf("%s  %d  %s%s%s\n", r.ok ? "PASS" : "FAIL", id, title,
                r.ok ? "" : " -- ", r.ok ? "" : r.detail.c_str());
    std::fflush(stdout);
    if (!r.ok) ++failures;
  };

  const Outcome c1 = criterion1_loss_formula();
  report(1, "loss-formula cross-check against the published rows", c1);

  const Outcome c2 = criterion2_self_retrieval();
  report(2, "self-retrieval: exact nn percentile, MAE_NN 0, %<=5pt 100", c2);

  const Outcome c3 = criterion3_oracle_equivalence();
  report(3, "indexed predict identical to the brute-force oracle (100 queries)", c3);

  const Outcome c4 = criterion4_percentile_properties();
  report(4, "percentile bounds, monotonicity, and midrank sum identity", c4);

  const Outcome c5 = criterion5_tuner_vs_grid();
  report(5, "GP tuner within 5% of the exhaustive lattice optimum", c5);

  const Outcome c6 = criterion6_metric_suite();
  report(6, "metric suite closed forms and degenerate markers", c6);

  const Outcome c7 = criterion7_mock_agreement();
  report(7, "mock-backend explain agrees on all 62 held-out plans", c7);

  const Outcome c8 = criterion8_constraint_exactness();
  report(8, "constraint checker exact over 10^4 random draws", c8);

  const Outcome c9 = criterion9_determinism(c2, c5, c7);
  report(9, "criteria 2, 5, and 7 reproduce bit-identically", c9);

  return failures == 0 ? 0 : 1;
}
