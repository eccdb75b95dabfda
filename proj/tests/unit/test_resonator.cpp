#include "doctest.h"

#include "qnl/error.hpp"
#include "qnl/resonator.hpp"
#include "qnl/units.hpp"

#include <cmath>

using namespace qnl;
using namespace qnl::resonator;

TEST_CASE("kinetic inductance of the TiN film") {
  const double lk = kinetic_inductance({3.8, 64.42});
  CHECK(lk == doctest::Approx(2.341895228562824e-11).epsilon(1e-12));
  CHECK(std::abs(lk / 23.4e-12 - 1.0) < 0.005);
  CHECK(kinetic_inductance({3.8, 2 * 64.42}) == doctest::Approx(2 * lk).epsilon(1e-15));
  CHECK(kinetic_inductance({1.9, 64.42}) == doctest::Approx(2 * lk).epsilon(1e-15));
  CHECK(kinetic_inductance({1.9, 64.42}) == doctest::Approx(46.8e-12).epsilon(0.005));
  CHECK_THROWS_AS(kinetic_inductance({0.0, 64.42}), DomainError);
}

TEST_CASE("lumped model of the differential mode") {
  const auto m = lumped_model(23.4e-12, 0.3e-6, 1061e-6, 5.6681e9);
  CHECK(m.l_per_length == doctest::Approx(7.8e-5).epsilon(1e-12));
  CHECK(m.l_diff == doctest::Approx(1.68e-8).epsilon(0.01));
  CHECK(m.c_diff == doctest::Approx(4.69e-14).epsilon(0.01));
  CHECK(m.z_diff == doctest::Approx(598.5).epsilon(0.01));

  const double w = to_angular(m.f_diff);
  CHECK(w * w * m.l_diff * m.c_diff == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.z_diff * w * m.c_diff == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.z_diff == doctest::Approx(std::sqrt(m.l_diff / m.c_diff)).epsilon(1e-9));

  const auto half = lumped_model(23.4e-12, 0.15e-6, 1061e-6, 5.6681e9);
  CHECK(half.l_per_length == doctest::Approx(2 * m.l_per_length));
  CHECK(half.l_diff == doctest::Approx(2 * m.l_diff));
  CHECK(half.z_diff == doctest::Approx(2.0 * m.z_diff));
  CHECK_THROWS_AS(lumped_model(0.0, 1e-6, 1e-3, 5e9), DomainError);
}

TEST_CASE("coupling ratio from omega sqrt(Z)") {
  CHECK(coupling_ratio(598.5, 5.6681e9, 57.3, 6.42e9) == doctest::Approx(2.853364423512898).epsilon(1e-12));
  CHECK(coupling_ratio(50, 5e9, 50, 5e9) == 1.0);
  CHECK(coupling_ratio(200, 5e9, 50, 5e9) == doctest::Approx(2.0));
}
