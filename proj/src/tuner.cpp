#include "planeval/tuner.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "planeval/retrieval.hpp"
#include "planeval/rng.hpp"

namespace planeval {

namespace {

constexpr double kLengthScaleGrid[] = {0.05, 0.1, 0.2, 0.4, 0.8, 1.6};
constexpr double kJitterInitial = 1e-8;
constexpr double kJitterMax = 1e-4;

double matern52(double r, double ell) {
  const double s = std::sqrt(5.0) * r / ell;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double point_distance(const TunerPoint& a, const TunerPoint& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

RetrievalConfig decode_point(const TunerPoint& p) {
  for (double x : p) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw Error(ErrorCode::OutOfBounds, "tuner point coordinate outside [0, 1]");
    }
  }
  RetrievalConfig config;
  const double sum = p[0] + p[1] + p[2];
  if (sum < 1e-12) {
    config.alpha = config.beta_norm = config.beta_raw = 1.0 / 3.0;
  } else {
    config.alpha = p[0] / sum;
    config.beta_norm = p[1] / sum;
    config.beta_raw = p[2] / sum;
  }
  const int k = static_cast<int>(std::lround(3.0 + 7.0 * p[3]));
  config.k = std::clamp(k, kRetrievalDepthMin, kRetrievalDepthMax);
  return config;
}

TunerPoint encode_config(const RetrievalConfig& config) {
  const RetrievalConfig c = config.normalized();
  return TunerPoint{c.alpha, c.beta_norm, c.beta_raw,
                    (static_cast<double>(c.k) - 3.0) / 7.0};
}

struct GpModel::Impl {
  std::vector<TunerPoint> points;
  Eigen::VectorXd alpha;          // K^{-1} y over standardized losses
  Eigen::MatrixXd chol_lower;
  double loss_mean = 0.0;
  double loss_std = 1.0;
  double ell = 0.0;
  double jitter = 0.0;
};

GpModel::GpModel() = default;
GpModel::~GpModel() = default;
GpModel::GpModel(GpModel&&) noexcept = default;
GpModel& GpModel::operator=(GpModel&&) noexcept = default;

GpModel GpModel::fit(std::span<const TunerPoint> points, std::span<const double> losses) {
  if (points.size() != losses.size()) {
    throw Error(ErrorCode::LengthMismatch, "points and losses disagree in length");
  }
  if (points.size() < 2) {
    throw Error(ErrorCode::InvalidConfig, "GP fit needs at least 2 observations");
  }

  // Exact duplicates make the kernel singular regardless of jitter; keep the
  // first observation of each point.
  std::vector<TunerPoint> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool seen = false;
    for (const auto& kept : xs) {
      if (kept == points[i]) {
        seen = true;
        break;
      }
    }
    if (!seen) {
      xs.push_back(points[i]);
      ys.push_back(losses[i]);
    }
  }

  const auto n = static_cast<Eigen::Index>(xs.size());
  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(ys.size());
  double var = 0.0;
  for (double y : ys) var += (y - mean) * (y - mean);
  var /= static_cast<double>(ys.size());
  const double stddev = var > 0.0 ? std::sqrt(var) : 1.0;

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = (ys[static_cast<std::size_t>(i)] - mean) / stddev;
  }

  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d = point_distance(xs[static_cast<std::size_t>(i)],
                                      xs[static_cast<std::size_t>(j)]);
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  auto impl = std::make_unique<Impl>();
  impl->points = std::move(xs);
  impl->loss_mean = mean;
  impl->loss_std = stddev;

  double best_lml = -std::numeric_limits<double>::infinity();
  bool fitted = false;
  for (double ell : kLengthScaleGrid) {
    Eigen::MatrixXd k_base(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double v = matern52(dist(i, j), ell);
        k_base(i, j) = v;
        k_base(j, i) = v;
      }
    }
    for (double jitter = kJitterInitial; jitter <= kJitterMax * 1.0000001; jitter *= 10.0) {
      Eigen::MatrixXd k = k_base;
      k.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(k);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::VectorXd alpha = llt.solve(y);
      const Eigen::MatrixXd lower = llt.matrixL();
      const double log_det_half = lower.diagonal().array().log().sum();
      const double lml = -0.5 * y.dot(alpha) - log_det_half -
                         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
      if (lml > best_lml) {
        best_lml = lml;
        impl->alpha = alpha;
        impl->chol_lower = lower;
        impl->ell = ell;
        impl->jitter = jitter;
        fitted = true;
      }
      break;  // smallest workable jitter for this length scale
    }
  }
  if (!fitted) {
    throw Error(ErrorCode::SingularKernel,
                "kernel matrix not positive definite at any jitter up to 1e-4");
  }
  GpModel model;
  model.impl_ = std::move(impl);
  return model;
}

GpModel::Posterior GpModel::posterior(const TunerPoint& x) const {
  const Impl& im = *impl_;
  const auto n = static_cast<Eigen::Index>(im.points.size());
  Eigen::VectorXd k_star(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k_star(i) = matern52(point_distance(x, im.points[static_cast<std::size_t>(i)]), im.ell);
  }
  Posterior post;
  post.mean = k_star.dot(im.alpha);
  const Eigen::VectorXd v =
      im.chol_lower.triangularView<Eigen::Lower>().solve(k_star);
  post.variance = std::max(0.0, 1.0 - v.squaredNorm());
  return post;
}

double GpModel::standardize(double raw_loss) const {
  return (raw_loss - impl_->loss_mean) / impl_->loss_std;
}

double GpModel::length_scale() const { return impl_->ell; }
double GpModel::jitter() const { return impl_->jitter; }

double expected_improvement(const GpModel& model, const TunerPoint& x, double best_loss) {
  const GpModel::Posterior post = model.posterior(x);
  const double sigma = std::sqrt(post.variance);
  const double improvement = best_loss - post.mean;
  if (sigma < 1e-12) return std::max(0.0, improvement);
  const double z = improvement / sigma;
  return improvement * normal_cdf(z) + sigma * normal_pdf(z);
}

namespace {

using ConfigKey = std::tuple<double, double, double, int>;

ConfigKey config_key(const RetrievalConfig& c) {
  return {c.alpha, c.beta_norm, c.beta_raw, c.k};
}

TunerPoint draw_point(Rng& rng) {
  return TunerPoint{rng.next_unit(), rng.next_unit(), rng.next_unit(), rng.next_unit()};
}

}  // namespace

TunerTrace gp_minimize(const std::function<double(const TunerPoint&)>& objective,
                       int n_calls, int n_init, std::uint64_t seed) {
  if (n_init < 2 || n_calls < n_init) {
    throw Error(ErrorCode::InvalidConfig, "gp_minimize requires n_calls >= n_init >= 2");
  }
  Rng rng = Rng::stream(seed, "tuner");
  TunerTrace trace;
  trace.seed = seed;
  trace.n_calls = n_calls;

  std::map<ConfigKey, double> cache;
  std::size_t best_index = 0;

  auto evaluate = [&](const TunerPoint& point) {
    const RetrievalConfig config = decode_point(point);
    const ConfigKey key = config_key(config);
    double loss;
    if (auto it = cache.find(key); it != cache.end()) {
      loss = it->second;
    } else {
      try {
        loss = objective(point);
      } catch (const std::exception& e) {
        throw TunerAborted(std::string("objective failed: ") + e.what(), std::move(trace));
      }
      cache.emplace(key, loss);
    }
    trace.entries.push_back(TraceEntry{config, loss});
    trace.points.push_back(point);
    if (trace.entries.size() == 1 || loss < trace.entries[best_index].loss) {
      best_index = trace.entries.size() - 1;
    }
  };

  for (int i = 0; i < n_init; ++i) evaluate(draw_point(rng));

  for (int call = n_init; call < n_calls; ++call) {
    const GpModel model = GpModel::fit(trace.points, [&] {
      std::vector<double> losses;
      losses.reserve(trace.entries.size());
      for (const auto& e : trace.entries) losses.push_back(e.loss);
      return losses;
    }());
    const double best_std = model.standardize(trace.entries[best_index].loss);
    const TunerPoint& incumbent = trace.points[best_index];

    TunerPoint best_candidate{};
    double best_ei = -1.0;
    auto consider = [&](const TunerPoint& candidate) {
      const double ei = expected_improvement(model, candidate, best_std);
      if (ei > best_ei) {
        best_ei = ei;
        best_candidate = candidate;
      }
    };
    for (int i = 0; i < 2048; ++i) consider(draw_point(rng));
    for (int i = 0; i < 64; ++i) {
      TunerPoint p = incumbent;
      for (double& x : p) {
        x = std::clamp(x + 0.05 * rng.next_normal(), 0.0, 1.0);
      }
      consider(p);
    }
    evaluate(best_candidate);
  }

  trace.best_config = trace.entries[best_index].config;
  trace.best_loss = trace.entries[best_index].loss;
  return trace;
}

TunerTrace tune_retrieval(const KnowledgeBase& kb,
                          const std::map<std::string, ProtocolIndex>& indexes,
                          std::span<const HeldOutPlan> test_set, Embedder& embedder,
                          int n_calls, std::uint64_t seed, int n_init) {
  auto objective = [&](const TunerPoint& point) {
    const RetrievalConfig config = decode_point(point);
    return evaluate_system(kb, indexes, test_set, config, embedder).loss;
  };
  return gp_minimize(objective, n_calls, n_init, seed);
}

}  // namespace planeval
