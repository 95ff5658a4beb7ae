#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "quill/calibration.hpp"
#include "quill/error.hpp"
#include "quill/rng.hpp"

using namespace quill;
using testing::StubTranslator;

TEST_CASE("four-event example") {
  // bins 7 and 10 each hold one hit and one miss: gaps 0.15 and 0.45
  const std::vector<TokenEvent> events = {{0.65, false}, {0.65, true}, {0.95, true}, {0.95, false}};
  const CalibrationReport r = calibration_report(events, 10);
  CHECK(r.n == 4);
  REQUIRE(r.bins.size() == 10);
  CHECK(r.bins[6].count == 2);
  CHECK(r.bins[9].count == 2);
  CHECK(r.bins[6].accuracy == 0.5);
  CHECK(r.bins[6].mean_confidence == doctest::Approx(0.65));
  CHECK(r.ece == doctest::Approx(0.5 * 0.15 + 0.5 * 0.45));
  CHECK(r.mce == doctest::Approx(0.45));
}

TEST_CASE("hand example with equal gaps") {
  const std::vector<TokenEvent> events = {{0.9, true}, {0.9, false}, {0.6, true}, {0.6, true}};
  const CalibrationReport r = calibration_report(events, 10);
  CHECK(r.bins[8].count == 2);
  CHECK(r.bins[5].count == 2);
  CHECK(r.ece == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(r.mce == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("perfect calibration scores zero") {
  const std::vector<TokenEvent> events = {{0.5, true}, {0.5, false}, {1.0, true}};
  const CalibrationReport r = calibration_report(events, 10);
  CHECK(r.ece == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.mce == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bin edges") {
  const std::vector<TokenEvent> events = {{0.0, false}, {0.1, true}, {0.1000001, true}, {1.0, true}};
  const CalibrationReport r = calibration_report(events, 10);
  CHECK(r.bins[0].count == 2);  // 0 and 0.1 share the first bin
  CHECK(r.bins[1].count == 1);
  CHECK(r.bins[9].count == 1);
  CHECK(r.bins[0].lower == 0.0);
  CHECK(r.bins[0].upper == doctest::Approx(0.1));
}

TEST_CASE("a single bin compares mean confidence with accuracy") {
  Rng rng(3);
  std::vector<TokenEvent> events;
  double conf = 0.0;
  double acc = 0.0;
  for (int i = 0; i < 200; ++i) {
    const TokenEvent e{rng.uniform(0.2, 1.0), rng.bernoulli(0.6)};
    conf += e.confidence;
    acc += e.correct ? 1.0 : 0.0;
    events.push_back(e);
  }
  const CalibrationReport r = calibration_report(events, 1);
  CHECK(r.ece == doctest::Approx(std::abs(acc / 200.0 - conf / 200.0)));
  CHECK(r.mce == doctest::Approx(r.ece));
}

TEST_CASE("ECE never exceeds MCE and ignores order") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenEvent> events;
    const std::size_t n = 1 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) events.push_back({rng.uniform(), rng.bernoulli(0.5)});
    const CalibrationReport a = calibration_report(events, 10);
    CHECK(a.ece <= a.mce + 1e-12);
    CHECK(a.ece >= 0.0);
    CHECK(a.mce <= 1.0);
    rng.shuffle(events);
    const CalibrationReport b = calibration_report(events, 10);
    CHECK(b.ece == doctest::Approx(a.ece).epsilon(1e-12));
    CHECK(b.mce == doctest::Approx(a.mce).epsilon(1e-12));
  }
}

TEST_CASE("calibration report rejects bad input") {
  CHECK_THROWS_AS(calibration_report(std::vector<TokenEvent>{}, 10), InvalidArgument);
  const std::vector<TokenEvent> one = {{0.5, true}};
  CHECK_THROWS_AS(calibration_report(one, 0), InvalidArgument);
}

namespace {

// Every step emits softmax(scale * log q) with q = (PAD ~0, BOS ~0, EOS .5, a .3, b .2).
StubTranslator scaled_stub(double scale) {
  return StubTranslator(5, 8, [scale](std::span<const TokenId>, std::span<const TokenId>) {
    return std::vector<double>{scale * std::log(1e-9), scale * std::log(1e-9),
                               scale * std::log(0.5), scale * std::log(0.3), scale * std::log(0.2)};
  });
}

// Targets drawn in proportion to q: 3 of "a, EOS" then 2 of "b, EOS",
// giving empirical frequencies EOS 5/10, a 3/10, b 2/10.
std::vector<EncodedPair> matching_pairs() {
  std::vector<EncodedPair> pairs;
  for (int i = 0; i < 5; ++i) {
    const TokenId t = i < 3 ? 3 : 4;
    pairs.push_back({{t, Vocab::kEos}, {Vocab::kBos, t}, {t, Vocab::kEos}});
  }
  return pairs;
}

}  // namespace

TEST_CASE("a calibrated stub keeps T = 1") {
  const auto stub = scaled_stub(1.0);
  const auto pairs = matching_pairs();
  const TemperatureScaler t = fit_temperature(stub, pairs);
  CHECK(t.temperature == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("doubled logits are undone by T = 2") {
  const auto stub = scaled_stub(2.0);
  const auto pairs = matching_pairs();
  const TeacherForcedSet set = teacher_forced_set(stub, pairs);
  const TemperatureScaler golden = fit_temperature(set);
  CHECK(golden.temperature == doctest::Approx(2.0).epsilon(5e-3));
  CHECK(temperature_nll(set, golden.temperature) <= temperature_nll(set, 1.0));

  TemperatureFitOptions grid;
  grid.use_grid = true;
  const TemperatureScaler g = fit_temperature(set, grid);
  // grid spacing in log T is log(200) / 49, about 0.108
  CHECK(std::abs(std::log(g.temperature / 2.0)) < 0.06);
  CHECK(temperature_nll(set, g.temperature) <= temperature_nll(set, 1.0));
}

TEST_CASE("temperature NLL is the mean token loss") {
  const auto stub = scaled_stub(1.0);
  const auto pairs = matching_pairs();
  const TeacherForcedSet set = teacher_forced_set(stub, pairs);
  const double expected = -(3 * std::log(0.3) + 2 * std::log(0.2) + 5 * std::log(0.5)) / 10.0;
  CHECK(temperature_nll(set, 1.0) == doctest::Approx(expected).epsilon(1e-6));
  CHECK_THROWS_AS(temperature_nll(set, 0.0), InvalidArgument);
}

TEST_CASE("token events") {
  const auto stub = testing::spelling_stub(6, {4, 5});
  std::vector<EncodedPair> pairs = {{{4, Vocab::kEos}, {Vocab::kBos, 4, 5}, {4, 5, Vocab::kEos}},
                                    {{4, Vocab::kEos}, {Vocab::kBos, 4}, {4, Vocab::kEos}}};
  const auto events = collect_token_events(stub, pairs);
  // one event per target position: (2 + 1) + (1 + 1)
  REQUIRE(events.size() == 5);
  CHECK(events[0].confidence == doctest::Approx(1.0));
  CHECK(events[0].correct);
  CHECK(events[1].correct);
  CHECK(events[2].correct);
  CHECK(events[3].correct);
  // second pair's reference ends early; the stub still says 5
  CHECK_FALSE(events[4].correct);
}

TEST_CASE("raising T lowers confidence and keeps correctness") {
  const auto stub = scaled_stub(1.0);
  const auto pairs = matching_pairs();
  const auto cold = collect_token_events(stub, pairs, 1.0);
  const auto warm = collect_token_events(stub, pairs, 3.0);
  REQUIRE(cold.size() == warm.size());
  for (std::size_t i = 0; i < cold.size(); ++i) {
    CHECK(warm[i].confidence < cold[i].confidence);
    CHECK(warm[i].correct == cold[i].correct);
    CHECK(cold[i].confidence == doctest::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("rejection curve hand example") {
  const std::vector<ScoredItem> items = {{-0.1, 0.0}, {-2.0, 0.5}};
  const std::vector<double> grid = {0.0, 0.5};
  const RejectionCurve c = rejection_curve(items, Aggregate::kMean, grid, "ned");
  CHECK(c.metric == "ned");
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].value == 0.25);
  CHECK(c.points[0].retained == 2);
  CHECK(c.points[1].value == 0.0);
  CHECK(c.points[1].retained == 1);
}

TEST_CASE("rejection keeps the most confident ceil((1 - r) N)") {
  std::vector<ScoredItem> items;
  for (int i = 0; i < 10; ++i) items.push_back({static_cast<double>(i), static_cast<double>(i)});
  const std::vector<double> grid = {0.0, 0.25, 0.5, 0.95};
  const RejectionCurve c = rejection_curve(items, Aggregate::kMean, grid);
  CHECK(c.points[0].retained == 10);
  CHECK(c.points[1].retained == 8);  // ceil(7.5)
  CHECK(c.points[2].retained == 5);
  CHECK(c.points[3].retained == 1);
  CHECK(c.points[1].value == doctest::Approx((2 + 3 + 4 + 5 + 6 + 7 + 8 + 9) / 8.0));
  CHECK(c.points[3].value == 9.0);
}

TEST_CASE("mae aggregation and constant curves") {
  const std::vector<ScoredItem> signed_errors = {{0.9, -2.0}, {0.8, 1.0}, {0.1, 4.0}};
  const std::vector<double> grid = {0.0, 0.5};
  const RejectionCurve c = rejection_curve(signed_errors, Aggregate::kMae, grid);
  CHECK(c.points[0].value == doctest::Approx(7.0 / 3.0));
  CHECK(c.points[1].value == 1.5);

  const std::vector<ScoredItem> flat = {{0.3, 0.2}, {0.9, 0.2}, {0.5, 0.2}};
  const auto full = default_rejection_grid();
  for (const auto& p : rejection_curve(flat, Aggregate::kMean, full).points) {
    CHECK(p.value == doctest::Approx(0.2));
  }
}

TEST_CASE("rejection ties are stable") {
  const std::vector<ScoredItem> items = {{0.5, 1.0}, {0.5, 2.0}, {0.5, 3.0}};
  const std::vector<double> grid = {0.5};
  CHECK(rejection_curve(items, Aggregate::kMean, grid).points[0].value == 1.5);
}

TEST_CASE("rejection grid and errors") {
  const auto g = default_rejection_grid();
  REQUIRE(g.size() == 20);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(0.95));
  const std::vector<ScoredItem> one = {{0.0, 1.0}};
  CHECK_THROWS_AS(rejection_curve(std::vector<ScoredItem>{}, Aggregate::kMean, g), InvalidArgument);
  const std::vector<double> bad = {1.0};
  CHECK_THROWS_AS(rejection_curve(one, Aggregate::kMean, bad), InvalidArgument);
}
