#include <doctest.h>

#include <functional>
#include <limits>

#include "helpers.hpp"
#include "planeval/core.hpp"

using namespace planeval;
using testutil::make_plan;
using testutil::make_protocol;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a planeval::Error");
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("validate_protocol sorts constraints into canonical order") {
  ProtocolSpec spec;
  spec.name = "P";
  spec.constraints = {ConstraintSpec{"B", "S", MetricKind::MeanDose, 25.0, "Gy"},
                      ConstraintSpec{"A", "S", MetricKind::MeanDose, 50.0, "Gy"}};
  const ProtocolSpec out = validate_protocol(spec);
  REQUIRE(out.constraints.size() == 2);
  CHECK(out.constraints[0].metric_id == "A");
  CHECK(out.constraints[0].limit == 50.0);
  CHECK(out.constraints[1].metric_id == "B");
  CHECK(out.constraints[1].limit == 25.0);
}

TEST_CASE("validate_protocol rejects duplicates, bad limits, empty protocols") {
  ProtocolSpec dup;
  dup.name = "P";
  dup.constraints = {ConstraintSpec{"Heart_mean", "Heart", MetricKind::MeanDose, 25.0, "Gy"},
                     ConstraintSpec{"Heart_mean", "Heart", MetricKind::MeanDose, 30.0, "Gy"}};
  CHECK(code_of([&] { validate_protocol(dup); }) == ErrorCode::DuplicateMetricId);

  ProtocolSpec zero;
  zero.name = "P";
  zero.constraints = {ConstraintSpec{"A", "S", MetricKind::MeanDose, 0.0, "Gy"}};
  CHECK(code_of([&] { validate_protocol(zero); }) == ErrorCode::NonPositiveLimit);

  ProtocolSpec negative;
  negative.name = "P";
  negative.constraints = {ConstraintSpec{"A", "S", MetricKind::MeanDose, -1.0, "Gy"}};
  CHECK(code_of([&] { validate_protocol(negative); }) == ErrorCode::NonPositiveLimit);

  CHECK(code_of([&] { validate_protocol(ProtocolSpec{"P", {}}); }) == ErrorCode::EmptyProtocol);
}

TEST_CASE("validate_protocol enforces unit/kind consistency") {
  ProtocolSpec dose_pct;
  dose_pct.name = "P";
  dose_pct.constraints = {ConstraintSpec{"A", "S", MetricKind::MaxDose, 25.0, "%"}};
  CHECK(code_of([&] { validate_protocol(dose_pct); }) == ErrorCode::InvalidUnit);

  ProtocolSpec vol_gy;
  vol_gy.name = "P";
  vol_gy.constraints = {ConstraintSpec{"A", "S", MetricKind::VolumeAtDoseGy, 25.0, "Gy"}};
  CHECK(code_of([&] { validate_protocol(vol_gy); }) == ErrorCode::InvalidUnit);

  ProtocolSpec vol_cc;
  vol_cc.name = "P";
  vol_cc.constraints = {ConstraintSpec{"A", "S", MetricKind::VolumeAtDoseGy, 25.0, "cc"}};
  CHECK_NOTHROW(validate_protocol(vol_cc));
}

TEST_CASE("validate_plan checks the metric set and value domain") {
  const ProtocolSpec spec = make_protocol("P", {{"A", 50.0}, {"B", 25.0}});

  CHECK_NOTHROW(validate_plan(make_plan("p1", "P", {{"A", 10.0}, {"B", 0.0}}), spec));

  CHECK(code_of([&] { validate_plan(make_plan("p1", "P", {{"A", 10.0}}), spec); }) ==
        ErrorCode::MissingMetric);
  CHECK(code_of([&] {
          validate_plan(make_plan("p1", "P", {{"A", 1.0}, {"B", 1.0}, {"C", 1.0}}), spec);
        }) == ErrorCode::ExtraMetric);
  CHECK(code_of([&] {
          validate_plan(make_plan("p1", "P", {{"A", -0.5}, {"B", 1.0}}), spec);
        }) == ErrorCode::NonFiniteValue);
  CHECK(code_of([&] {
          validate_plan(make_plan("p1", "P",
                                  {{"A", std::numeric_limits<double>::quiet_NaN()}, {"B", 1.0}}),
                        spec);
        }) == ErrorCode::NonFiniteValue);
  CHECK(code_of([&] {
          validate_plan(make_plan("p1", "P",
                                  {{"A", std::numeric_limits<double>::infinity()}, {"B", 1.0}}),
                        spec);
        }) == ErrorCode::NonFiniteValue);
  CHECK(code_of([&] { validate_plan(make_plan("", "P", {{"A", 1.0}, {"B", 1.0}}), spec); }) ==
        ErrorCode::InvalidConfig);
}

TEST_CASE("RetrievalConfig::normalized scales weights onto the simplex") {
  const RetrievalConfig scaled = RetrievalConfig{2.0, 6.0, 2.0, 5}.normalized();
  CHECK(scaled.alpha == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(scaled.beta_norm == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(scaled.beta_raw == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(scaled.k == 5);

  ErrorCode code = ErrorCode::InvalidConfig;
  try {
    RetrievalConfig{-0.1, 1.0, 0.0, 4}.normalized();
  } catch (const Error& e) {
    code = e.code();
  }
  CHECK(code == ErrorCode::InvalidConfig);
  CHECK_THROWS_AS((RetrievalConfig{0.0, 0.0, 0.0, 4}.normalized()), Error);
  CHECK_THROWS_AS((RetrievalConfig{0.0, 1.0, 0.0, 2}.normalized()), Error);
  CHECK_THROWS_AS((RetrievalConfig{0.0, 1.0, 0.0, 11}.normalized()), Error);
  CHECK_NOTHROW((RetrievalConfig{0.0, 1.0, 0.0, 3}.normalized()));
  CHECK_NOTHROW((RetrievalConfig{0.0, 1.0, 0.0, 10}.normalized()));
}

TEST_CASE("metric kind names round-trip") {
  for (MetricKind kind : {MetricKind::MaxDose, MetricKind::MeanDose, MetricKind::DoseAtVolumePct,
                          MetricKind::DoseAtVolumeCc, MetricKind::VolumeAtDosePct,
                          MetricKind::VolumeAtDoseGy}) {
    CHECK(metric_kind_from_name(metric_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(metric_kind_from_name("Bogus"), Error);
}

TEST_CASE("error text carries the code name") {
  const Error e(ErrorCode::UnknownProtocol, "nope");
  CHECK(std::string(e.what()) == "UnknownProtocol: nope");
  CHECK(e.code() == ErrorCode::UnknownProtocol);
}
