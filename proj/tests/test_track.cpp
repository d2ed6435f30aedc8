#include <cmath>
#include <filesystem>
#include <numbers>
#include <atomic>
#include <random>
#include <thread>

#include "doctest.h"
#include "race/track.hpp"

using namespace race;
using namespace race::track;

namespace {

constexpr double kPi = std::numbers::pi;

Track circle(double r, double width = 12.0) {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::circle;
  spec.radius = r;
  spec.width = width;
  return generate_track(spec, 1);
}

Track straight_road(double length, double half) {
  TrackDefinition def;
  def.id = "straight";
  def.closed = false;
  def.n_segments = 4;
  for (int i = 0; i <= 10; ++i) def.points.push_back({{length * i / 10.0, 0.0}, half, half});
  return Track::build(def);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("race_test_" + name);
}

double lap_diff(const Track& t, double a, double b) { return std::abs(t.delta_s(a, b)); }

}  // namespace

TEST_CASE("load_track: circle file has length 2 pi R") {
  const Track t = circle(200.0);
  const auto path = temp_file("circle.json");
  save_track(t, path);
  const Track loaded = load_track(path);
  CHECK(std::abs(loaded.total_length() - 2 * kPi * 200.0) / (2 * kPi * 200.0) < 1e-3);
  std::filesystem::remove(path);
}

TEST_CASE("load_track: duplicated centerline point is reported") {
  TrackDefinition def = circle(100.0).definition();
  def.points.insert(def.points.begin() + 5, def.points[5]);
  try {
    Track::build(def);
    FAIL("expected TrackError");
  } catch (const TrackError& e) {
    CHECK(std::string(e.what()).find("non-increasing arc length") != std::string::npos);
    CHECK(e.field() == "points[6]");
  }
}

TEST_CASE("load_track: malformed documents name the field") {
  auto field_of = [](const std::string& text) {
    try {
      parse_track_definition(text);
    } catch (const TrackError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of("{") == "document");
  CHECK(field_of(R"({"id": 3, "closed": true, "n_segments": 10, "points": []})") == "id");
  CHECK(field_of(R"({"id": "a", "closed": 1, "n_segments": 10, "points": []})") == "closed");
  CHECK(field_of(R"({"id": "a", "closed": true, "n_segments": 1.5, "points": []})") == "n_segments");
  CHECK(field_of(R"({"id": "a", "closed": true, "n_segments": 10, "points": {}})") == "points");
}

TEST_CASE("load_track: half-width below the minimum is rejected") {
  TrackDefinition def = circle(100.0).definition();
  def.points[3].half_width_left = 0.5;
  try {
    Track::build(def);
    FAIL("expected TrackError");
  } catch (const TrackError& e) {
    CHECK(e.field() == "points[3].half_width_left");
  }
}

TEST_CASE("load(save(track)) is field-for-field equal") {
  for (const char* name : {"circle", "stadium", "vegas_standin"}) {
    const Track t = standin_track(name, 3);
    const auto path = temp_file(std::string(name) + ".json");
    save_track(t, path);
    const Track back = load_track(path);
    CHECK(back == t);
    CHECK(back.definition() == t.definition());
    CHECK(back.total_length() == t.total_length());
    std::filesystem::remove(path);
  }
}

TEST_CASE("generate_track: circle R=200 and thruxton length") {
  CHECK(circle(200.0).total_length() == doctest::Approx(1256.64).epsilon(1e-4));
  const Track thruxton = standin_track("thruxton_standin", 7);
  CHECK(std::abs(thruxton.total_length() - 3800.0) <= 1.0);
  CHECK(std::abs(standin_track("thruxton_standin", 11).total_length() - 3800.0) <= 1.0);
}

TEST_CASE("generate_track: deterministic for fixed spec and seed") {
  for (const char* name : {"thruxton_standin", "anglesey_standin", "vegas_standin", "stadium"}) {
    const auto a = serialize_track_definition(standin_track(name, 42).definition());
    const auto b = serialize_track_definition(standin_track(name, 42).definition());
    CHECK(a == b);
  }
  CHECK(serialize_track_definition(standin_track("vegas_standin", 1).definition()) !=
        serialize_track_definition(standin_track("vegas_standin", 2).definition()));
}

TEST_CASE("generate_track: width too small for the footprint") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::circle;
  spec.width = 1.5;
  CHECK_THROWS_AS(generate_track(spec, 0), TrackError);
}

TEST_CASE("project: centerline points and the inside of a circle") {
  const Track t = circle(50.0);
  for (double s : {0.0, 10.0, 123.4, 300.0}) {
    const auto f = t.project(t.sample(s).point);
    REQUIRE(f);
    CHECK(std::abs(f->d) < 1e-6);
    CHECK(lap_diff(t, f->s, s) < 1e-3);
  }
  // counter-clockwise circle: the centre lies to the left
  const Vec2 p = t.sample(40.0).point * (49.0 / 50.0);
  const auto f = t.project(p);
  REQUIRE(f);
  CHECK(f->d == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_FALSE(t.project({1000.0, 1000.0}));
}

TEST_CASE("project: matches exhaustive 1 cm search on random points") {
  const Track t = standin_track("anglesey_standin", 7);
  // oracle: dense 1 cm sampling of the smoothed centerline
  const double L = t.total_length();
  const auto n = static_cast<std::size_t>(L / 0.01);
  std::vector<Vec2> dense(n);
  for (std::size_t i = 0; i < n; ++i) dense[i] = t.sample(L * i / n).point;

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> us(0.0, L), ud(-1.0, 1.0);
  int checked = 0;
  for (int k = 0; k < 1000; ++k) {
    const double s0 = us(rng);
    const CenterlineSample c = t.sample(s0);
    const Vec2 n0{-std::sin(c.heading), std::cos(c.heading)};
    const double d0 = ud(rng) > 0 ? ud(rng) * t.half_width_left_at(s0) : ud(rng) * t.half_width_right_at(s0);
    const Vec2 p = c.point + n0 * d0;

    std::size_t best = 0;
    double best_d = 1e18;
    for (std::size_t i = 0; i < n; ++i) {
      const double dd = distance(dense[i], p);
      if (dd < best_d) {
        best_d = dd;
        best = i;
      }
    }
    const auto f = t.project(p);
    REQUIRE(f);
    CHECK(lap_diff(t, f->s, L * best / n) < 0.02);
    CHECK(std::abs(std::abs(f->d) - best_d) < 0.02);
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("sample: curvature of circle and straight") {
  const Track c = circle(200.0);
  for (double s = 0.0; s < c.total_length(); s += 7.3) {
    CHECK(std::abs(c.sample(s).curvature - 0.005) < 1e-4);
  }
  const Track st = straight_road(100.0, 6.0);
  for (double s = 0.0; s < 100.0; s += 2.5) CHECK(std::abs(st.sample(s).curvature) < 1e-6);
  CHECK_THROWS(st.sample(150.0));
}

TEST_CASE("sample: curvature matches finite difference of heading") {
  for (const char* name : {"thruxton_standin", "vegas_standin"}) {
    const Track t = standin_track(name, 7);
    const double h = 0.25;  // central difference over 0.5 m
    for (double s = 1.0; s < t.total_length() - 1.0; s += 3.7) {
      const double fd = wrap_angle(t.sample(s + h).heading - t.sample(s - h).heading) / (2 * h);
      const double k = t.sample(s).curvature;
      CHECK(std::abs(fd - k) <= 0.05 * std::abs(k) + 2e-5);
    }
  }
}

TEST_CASE("is_drivable: centerline, beyond the edge and obstacles") {
  TrackDefinition def = circle(100.0).definition();
  const Track plain = Track::build(def);
  const CenterlineSample c = plain.sample(50.0);
  const Vec2 left{-std::sin(c.heading), std::cos(c.heading)};
  CHECK(plain.is_drivable(c.point));
  CHECK_FALSE(plain.is_drivable(c.point + left * 8.0));  // 6 m half-width + 2 m
  CHECK(plain.is_drivable(c.point + left * 5.9));
  CHECK_FALSE(plain.is_drivable({5000.0, 0.0}));

  def.obstacles.push_back({c.point + left * 2.0, 1.0});
  const Track blocked = Track::build(def);
  CHECK_FALSE(blocked.is_drivable(c.point + left * 2.5));
  CHECK(blocked.is_drivable(c.point + left * 3.1));
}

TEST_CASE("segment_index: boundaries") {
  const Track t = standin_track("thruxton_standin", 7);
  const double seg = t.total_length() / 10.0;
  CHECK(t.segment_index(0.0) == 0);
  CHECK(t.segment_index(seg - 1.0) == 0);
  CHECK(t.segment_index(seg + 1.0) == 1);
  CHECK(t.segment_index(std::nextafter(t.total_length(), 0.0)) == 9);
  CHECK(t.with_segments(4).segment_starts().size() == 4);
}

TEST_CASE("track invariants on generated tracks") {
  for (const char* name : {"circle", "stadium", "thruxton_standin", "anglesey_standin", "vegas_standin"}) {
    CAPTURE(name);
    const Track t = standin_track(name, 7);
    const auto cum = t.cum_s();
    CHECK(cum.front() == 0.0);
    for (std::size_t i = 1; i < cum.size(); ++i) REQUIRE(cum[i] > cum[i - 1]);
    CHECK(t.total_length() > cum.back());  // closing edge

    const auto starts = t.segment_starts();
    REQUIRE(static_cast<int>(starts.size()) == t.n_segments());
    CHECK(starts.front() == 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const double end = i + 1 < starts.size() ? starts[i + 1] : t.total_length();
      REQUIRE(end > starts[i]);
      sum += end - starts[i];
    }
    CHECK(std::abs(sum - t.total_length()) <= 1e-6 * t.total_length());

    for (double w : t.half_width_left()) REQUIRE(w > 1.0);
    for (double w : t.half_width_right()) REQUIRE(w > 1.0);

    double prev_heading = t.sample(0.0).heading;
    int bad_drivable = 0, bad_project = 0, bad_heading = 0, bad_kappa = 0;
    for (double s = 0.0; s < t.total_length(); s += 0.5) {
      const CenterlineSample c = t.sample(s);
      if (!t.is_drivable(c.point)) ++bad_drivable;
      const auto f = t.project(c.point);
      if (!f || lap_diff(t, f->s, s) >= 0.02 || std::abs(f->d) > 1e-6) ++bad_project;
      if (std::abs(wrap_angle(c.heading - prev_heading)) > 0.1) ++bad_heading;
      prev_heading = c.heading;
      const double hw = std::min(t.half_width_left_at(s), t.half_width_right_at(s));
      if (!(std::abs(c.curvature) < 1.0 / hw)) ++bad_kappa;
    }
    CHECK(bad_drivable == 0);
    CHECK(bad_project == 0);
    CHECK(bad_heading == 0);
    CHECK(bad_kappa == 0);
  }
}

TEST_CASE("Track is safe to share across threads") {
  const Track t = standin_track("vegas_standin", 7);
  std::vector<std::thread> pool;
  std::atomic<int> mismatches{0};
  for (int k = 0; k < 4; ++k) {
    pool.emplace_back([&, k] {
      for (double s = k; s < t.total_length(); s += 4.1) {
        const auto f = t.project(t.sample(s).point);
        if (!f || lap_diff(t, f->s, s) > 0.02) ++mismatches;
      }
    });
  }
  for (auto& th : pool) th.join();
  CHECK(mismatches == 0);
}
