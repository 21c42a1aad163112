#include <catch_amalgamated.hpp>

#include "seeknet/core.hpp"
#include "seeknet/rng.hpp"

using namespace seeknet;

TEST_CASE("distance_between matches hand values") {
  CHECK(distance_between({0, 0}, {0, 0}) == 0.0);
  CHECK(distance_between({0, 0}, {3, 4}) == Catch::Approx(5.0));
  CHECK(distance_between({100, 0}, {-50, 0}) == Catch::Approx(150.0));
}

TEST_CASE("distance_between is a metric") {
  Rng rng(42);
  const auto pt = [&rng] {
    return GeoPosition{rng.u01() * 4000 - 2000, rng.u01() * 4000 - 2000};
  };
  for (int i = 0; i < 2000; ++i) {
    const GeoPosition a = pt(), b = pt(), c = pt();
    const double dab = distance_between(a, b);
    CHECK(dab >= 0.0);
    CHECK(dab == distance_between(b, a));
    if (a == b) {
      CHECK(dab == 0.0);
    } else {
      CHECK(dab > 0.0);
    }
    CHECK(distance_between(a, c) <= dab + distance_between(b, c) + 1e-9);
  }
  CHECK(distance_between({12.5, -3.25}, {12.5, -3.25}) == 0.0);
}

TEST_CASE("energy drains with a floor and never exceeds initial") {
  EnergyState e{100.0, 100.0};
  e.drain(30.0);
  CHECK(e.residual_j == Catch::Approx(70.0));
  e.drain(1000.0);
  CHECK(e.residual_j == 0.0);
  CHECK(e.depleted());

  Rng rng(7);
  EnergyState f{50.0, 50.0};
  for (int i = 0; i < 1000; ++i) {
    f.drain(rng.u01());
    CHECK(f.residual_j >= 0.0);
    CHECK(f.residual_j <= f.initial_j);
  }

  f.set_ratio(0.10);
  CHECK(f.residual_j == Catch::Approx(5.0));
  CHECK(f.ratio() == Catch::Approx(0.10));
  f.set_ratio(3.0);  // clamped
  CHECK(f.residual_j == Catch::Approx(50.0));
}

TEST_CASE("packet uid is stable and unique per (src, seq)") {
  Packet a{7, 3, 9, 1000, 0.0, {}};
  Packet b{7, 4, 9, 1000, 0.0, {}};
  Packet c{8, 3, 9, 1000, 0.0, {}};
  CHECK(a.uid() != b.uid());
  CHECK(a.uid() != c.uid());
  CHECK(a.uid() == Packet{7, 3, 5, 500, 1.0, {}}.uid());
}

TEST_CASE("rng below is exact for small ranges") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.below(16);
    CHECK(v < 16);
  }
  CHECK(Rng(5).below(1) == 0);
}
