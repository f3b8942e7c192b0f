#include "planeval/synth.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <set>

#include "planeval/rng.hpp"

namespace planeval {

namespace {

struct LexiconEntry {
  const char* structure;
  const char* suffix;  // metric token, e.g. "mean", "V65pct"
  MetricKind kind;
  const char* unit;
};

// Structure/endpoint vocabulary modeled on common thoracic, head-and-neck,
// breast, and pelvic protocol sheets.
constexpr LexiconEntry kLexicon[] = {
    {"Cord", "max", MetricKind::MaxDose, "Gy"},
    {"BrainStem", "max", MetricKind::MaxDose, "Gy"},
    {"Mandible", "max", MetricKind::MaxDose, "Gy"},
    {"BrachialPlexus", "max", MetricKind::MaxDose, "Gy"},
    {"Skin", "max", MetricKind::MaxDose, "Gy"},
    {"SmallBowel", "max", MetricKind::MaxDose, "Gy"},
    {"LargeBowel", "max", MetricKind::MaxDose, "Gy"},
    {"BreastSkin", "max", MetricKind::MaxDose, "Gy"},
    {"Heart", "max", MetricKind::MaxDose, "Gy"},
    {"Heart", "mean", MetricKind::MeanDose, "Gy"},
    {"Lips", "mean", MetricKind::MeanDose, "Gy"},
    {"OralCavity", "mean", MetricKind::MeanDose, "Gy"},
    {"Parotid", "mean", MetricKind::MeanDose, "Gy"},
    {"Esophagus", "mean", MetricKind::MeanDose, "Gy"},
    {"Submandibular", "mean", MetricKind::MeanDose, "Gy"},
    {"Larynx", "mean", MetricKind::MeanDose, "Gy"},
    {"Pharynx", "mean", MetricKind::MeanDose, "Gy"},
    {"CervicalEsophagus", "mean", MetricKind::MeanDose, "Gy"},
    {"Liver", "mean", MetricKind::MeanDose, "Gy"},
    {"Esophagus", "D33pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Esophagus", "D67pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Esophagus", "D100pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Liver", "D50pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Liver", "D100pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Heart", "D33pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Heart", "D67pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Heart", "D100pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Rectum", "D2pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Bladder", "D2pct", MetricKind::DoseAtVolumePct, "Gy"},
    {"Cord", "D2cc", MetricKind::DoseAtVolumeCc, "Gy"},
    {"BrainStem", "D2cc", MetricKind::DoseAtVolumeCc, "Gy"},
    {"Rectum", "D5cc", MetricKind::DoseAtVolumeCc, "Gy"},
    {"Bladder", "D5cc", MetricKind::DoseAtVolumeCc, "Gy"},
    {"Esophagus", "D5cc", MetricKind::DoseAtVolumeCc, "Gy"},
    {"BrachialPlexus", "D2cc", MetricKind::DoseAtVolumeCc, "Gy"},
    {"Rectum", "V65pct", MetricKind::VolumeAtDosePct, "%"},
    {"Rectum", "V90pct", MetricKind::VolumeAtDosePct, "%"},
    {"Bladder", "V90pct", MetricKind::VolumeAtDosePct, "%"},
    {"LungIpsilateral", "V40pct", MetricKind::VolumeAtDosePct, "%"},
    {"LungContralateral", "V40pct", MetricKind::VolumeAtDosePct, "%"},
    {"LungIpsilateral", "V50pct", MetricKind::VolumeAtDosePct, "%"},
    {"Pharynx", "V15pct", MetricKind::VolumeAtDosePct, "%"},
    {"Pharynx", "V33pct", MetricKind::VolumeAtDosePct, "%"},
    {"LungTotal", "V20Gy", MetricKind::VolumeAtDoseGy, "%"},
    {"LungTotal", "V30Gy", MetricKind::VolumeAtDoseGy, "%"},
    {"Rectum", "V30Gy", MetricKind::VolumeAtDoseGy, "%"},
    {"FemoralHeadL", "V40Gy", MetricKind::VolumeAtDoseGy, "cc"},
    {"FemoralHeadR", "V40Gy", MetricKind::VolumeAtDoseGy, "cc"},
    {"Bladder", "V30Gy", MetricKind::VolumeAtDoseGy, "cc"},
};

constexpr int kLexiconSize = static_cast<int>(std::size(kLexicon));

std::string unit_token(const char* unit) {
  if (std::string_view(unit) == "%") return "pct";
  return unit;
}

std::string lexicon_metric_id(const LexiconEntry& e) {
  return std::string(e.structure) + "_" + e.suffix + "_" + unit_token(e.unit);
}

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(rng.next_in(std::log(lo), std::log(hi)));
}

}  // namespace

int synth_lexicon_size() { return kLexiconSize; }

SynthOutput generate(const SynthConfig& config) {
  if (!(config.violation_rate >= 0.0 && config.violation_rate < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "violation_rate must lie in [0, 1)");
  }
  if (!(config.sigma_log > 0.0) || !std::isfinite(config.sigma_log)) {
    throw Error(ErrorCode::InvalidConfig, "sigma_log must be positive");
  }
  if (config.protocols.empty()) {
    throw Error(ErrorCode::InvalidConfig, "no protocols to generate");
  }

  // mu such that P(limit * exp(Normal(mu, sigma)) > limit) = violation_rate.
  double mu;
  if (config.violation_rate == 0.0) {
    mu = -4.0 * config.sigma_log;
  } else {
    const boost::math::normal_distribution<double> unit_normal;
    mu = config.sigma_log * boost::math::quantile(unit_normal, config.violation_rate);
  }

  SynthOutput out;
  std::set<std::string> names;
  for (const auto& sp : config.protocols) {
    if (!names.insert(sp.name).second) {
      throw Error(ErrorCode::InvalidConfig, "protocol '" + sp.name + "' listed twice");
    }
    const int plan_count = sp.plan_count.value_or(config.plans_per_protocol);
    if (plan_count < kRetrievalDepthMax + 1) {
      throw Error(ErrorCode::InvalidConfig,
                  "protocol '" + sp.name + "' needs at least " +
                      std::to_string(kRetrievalDepthMax + 1) + " plans for retrieval");
    }

    ProtocolSpec spec;
    spec.name = sp.name;
    if (sp.constraints) {
      spec.constraints = *sp.constraints;
    } else {
      if (sp.metric_count < 1 || sp.metric_count > kLexiconSize) {
        throw Error(ErrorCode::LexiconExhausted,
                    "protocol '" + sp.name + "' wants " + std::to_string(sp.metric_count) +
                        " metrics, lexicon holds " + std::to_string(kLexiconSize));
      }
      Rng rng = Rng::stream(config.seed, "synth:protocol:" + sp.name);
      int picks[kLexiconSize];
      for (int i = 0; i < kLexiconSize; ++i) picks[i] = i;
      for (int i = 0; i < sp.metric_count; ++i) {
        const int j = i + static_cast<int>(rng.next_below(
                              static_cast<std::uint64_t>(kLexiconSize - i)));
        std::swap(picks[i], picks[j]);
      }
      for (int i = 0; i < sp.metric_count; ++i) {
        const LexiconEntry& e = kLexicon[picks[i]];
        ConstraintSpec c;
        c.metric_id = lexicon_metric_id(e);
        c.structure = e.structure;
        c.kind = e.kind;
        c.unit = e.unit;
        c.limit = std::string_view(e.unit) == "Gy" ? log_uniform(rng, 5.0, 80.0)
                                                   : log_uniform(rng, 10.0, 100.0);
        spec.constraints.push_back(std::move(c));
      }
    }
    spec = validate_protocol(spec);

    Rng rng = Rng::stream(config.seed, "synth:plans:" + sp.name);
    for (int i = 1; i <= plan_count; ++i) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%04d", sp.name.c_str(), i);
      PlanRecord plan;
      plan.plan_id = id;
      plan.protocol_name = sp.name;
      for (const auto& c : spec.constraints) {
        plan.metrics[c.metric_id] =
            c.limit * std::exp(mu + config.sigma_log * rng.next_normal());
      }
      out.plans.push_back(std::move(plan));
    }
    out.protocols.push_back(std::move(spec));
  }
  return out;
}

SynthConfig default_synth_config(std::uint64_t seed, int n_protocols, int plans_per_protocol,
                                 double violation_rate) {
  if (n_protocols < 1) {
    throw Error(ErrorCode::InvalidConfig, "need at least one protocol");
  }
  SynthConfig config;
  config.seed = seed;
  config.plans_per_protocol = plans_per_protocol;
  config.violation_rate = violation_rate;
  Rng rng = Rng::stream(seed, "synth:shapes");
  for (int i = 1; i <= n_protocols; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "P%02d", i);
    SynthProtocol sp;
    sp.name = name;
    sp.metric_count = 5 + static_cast<int>(rng.next_below(8));  // 5..12 endpoints
    config.protocols.push_back(std::move(sp));
  }
  return config;
}

}  // namespace planeval
