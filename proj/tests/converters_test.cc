#include "pbcnet/converters.hpp"
#include "pbcnet/errors.hpp"

#include <gtest/gtest.h>

#include "support/fixtures.hpp"

namespace pbcnet {
namespace {

Vector duty(double mu) { return Vector::Constant(1, mu); }

TEST(Boost, FullDutyDecouplesStages) {
  ConverterParams p = testing::boost_params();
  p.virtual_load = 36.923;
  const ConverterModel m = make_boost(p);
  EXPECT_EQ(m.interconnection(duty(1.0)), Matrix::Zero(2, 2));
  EXPECT_TRUE(validate_model(m).ok());
  EXPECT_EQ(m.inertia(0, 0), 470e-6);
  EXPECT_EQ(m.inertia(1, 1), 10e-6);
}

TEST(Buck, ZeroDutyHasNoInput) {
  ConverterParams p = testing::buck_params();
  p.virtual_load = 9.876;
  const ConverterModel m = make_buck(p);
  EXPECT_EQ(m.input_map(duty(0.0)) * m.source, Vector::Zero(2));
  EXPECT_EQ(m.interconnection(duty(0.0)), m.interconnection(duty(1.0)));
  EXPECT_TRUE(validate_model(m).ok());
}

TEST(BuckBoost, ReferenceValues) {
  ConverterParams p = testing::buckboost_params();
  p.virtual_load = 7.901;
  const ConverterModel m = make_buckboost(p);
  const Matrix j = m.interconnection(duty(0.4));
  EXPECT_NEAR(j(0, 1), -0.6, 1e-15);
  EXPECT_NEAR(j(1, 0), 0.6, 1e-15);
  const Vector gu = m.input_map(duty(0.4)) * m.source;
  EXPECT_NEAR(gu(0), 9.6, 1e-12);
  EXPECT_EQ(gu(1), 0.0);
  EXPECT_EQ(m.interconnection(duty(1.0)), Matrix::Zero(2, 2));
  const Vector full = m.input_map(duty(1.0)) * m.source;
  EXPECT_EQ(full(0), 24.0);
  EXPECT_TRUE(validate_model(m).ok());
}

TEST(Params, NonPositiveValuesAreRejected) {
  ConverterParams p = testing::boost_params();
  p.inductance = 0.0;
  EXPECT_THROW(make_boost(p), DomainError);
  p = testing::buck_params();
  p.virtual_load = -1.0;
  EXPECT_THROW(make_buck(p), DomainError);
}

TEST(WithVirtualLoad, RebuildsDissipation) {
  const ConverterModel m = with_virtual_load(make_boost(testing::boost_params()), 8.0);
  EXPECT_EQ(m.virtual_load, 8.0);
  EXPECT_DOUBLE_EQ(m.dissipation(1, 1), 1.0 / 8.0);
  EXPECT_EQ(m.dissipation(0, 0), 0.0);
}

TEST(Dispatch, TopologyIsRecorded) {
  for (Topology t : {Topology::Boost, Topology::Buck, Topology::BuckBoost}) {
    const ConverterModel m = make_converter({t, 1e-4, 1e-5, 10.0, 5.0});
    ASSERT_TRUE(m.topology.has_value());
    EXPECT_EQ(*m.topology, t);
  }
}

TEST(TopologyNames, RoundTrip) {
  for (Topology t : {Topology::Boost, Topology::Buck, Topology::BuckBoost})
    EXPECT_EQ(topology_from_string(to_string(t)), t);
  EXPECT_EQ(topology_from_string("buck-boost"), Topology::BuckBoost);
  EXPECT_FALSE(topology_from_string("cuk").has_value());
}

}  // namespace
}  // namespace pbcnet
