#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qmx/errors.hpp"
#include "qmx/recovery.hpp"

using namespace qmx;
using namespace qmx::protocol;
using namespace qmx::recovery;

namespace {

constexpr double pi = std::numbers::pi;

MessageAngles random_message(RandomStream& rng) {
  // Away from the degenerate poles.
  return {rng.uniform(0.2, pi / 2 - 0.2), rng.uniform(0.0, 2 * pi)};
}

Observables exact_two_party(const MessageAngles& a, const MessageAngles& b) {
  return exact_observables(
      Scenario::two_party,
      prob_table(two_party_coeffs(encode_message(a), encode_message(b))));
}

bool contains_truth(const RecoveryResult& r, const std::vector<double>& truth,
                    Scenario scenario, double tol) {
  for (const auto& c : r.candidates)
    if (param_distance(scenario, c.params, truth) < tol) return true;
  return false;
}

}  // namespace

TEST_CASE("qubit partner recovery: worked example") {
  const MessageAngles alice{pi / 6, 0.0};
  const MessageAngles bob{pi / 3, 0.0};
  const auto obs = exact_two_party(alice, bob);
  CHECK(obs.classes.at("10,10") == doctest::Approx(3.0 / 32.0));
  CHECK(obs.classes.at("10,11") == doctest::Approx(0.0).epsilon(1e-12));

  const auto result = recover_qubit_partner(alice, obs, 1e-9);
  CHECK(contains_truth(result, {bob.theta, bob.phi}, Scenario::two_party,
                       1e-6));
  CHECK(result.candidates.front().residual < 1e-15);
}

TEST_CASE("qubit partner recovery: random round-trips") {
  RandomStream rng(101);
  for (int t = 0; t < 15; ++t) {
    const auto alice = random_message(rng);
    const auto bob = random_message(rng);
    const auto result =
        recover_qubit_partner(alice, exact_two_party(alice, bob), 1e-9);
    CHECK(contains_truth(result, {bob.theta, bob.phi}, Scenario::two_party,
                         1e-6));
  }
}

TEST_CASE("qubit partner recovery: degenerate known side flags continuum") {
  const MessageAngles alice{0.0, 0.0};
  const MessageAngles bob{0.7, 2.0};
  const auto result =
      recover_qubit_partner(alice, exact_two_party(alice, bob), 1e-9);
  CHECK(result.ambiguity == Ambiguity::continuum);
}

TEST_CASE("qubit partner recovery: corrupted data raises NoSolution") {
  const MessageAngles alice{pi / 6, 0.0};
  const MessageAngles bob{pi / 3, 0.0};
  auto obs = exact_two_party(alice, bob);
  obs.classes["10,10"] = 0.9;  // impossible: classes are bounded by 1/8
  CHECK_THROWS_AS(recover_qubit_partner(alice, obs, 1e-9), NoSolutionError);
}

TEST_CASE("reported residual matches a recompute") {
  const MessageAngles alice{0.5, 1.0};
  const MessageAngles bob{0.9, 5.5};
  const auto obs = exact_two_party(alice, bob);
  const auto result = recover_qubit_partner(alice, obs, 1e-9);
  for (const auto& c : result.candidates) {
    const auto b = encode_message({c.params[0], c.params[1]});
    const auto table =
        prob_table(two_party_coeffs(encode_message(alice), b));
    const double e1 = table.entries[flat_from_label("10,10", 2, 2)];
    const double e2 = table.entries[flat_from_label("10,11", 2, 2)];
    const double d1 = e1 - obs.classes.at("10,10");
    const double d2 = e2 - obs.classes.at("10,11");
    CHECK(std::abs(c.residual - (d1 * d1 + d2 * d2)) < 1e-12);
  }
}

TEST_CASE("misaligned recovery: theta = 0 reduction") {
  const MessageAngles alice{0.6, 0.0};
  const MessageAngles bob{1.1, 0.0};
  const auto table = prob_table(
      misaligned_coeffs(encode_message(alice), encode_message(bob), 0.0));
  const auto obs = exact_observables(Scenario::misaligned, table);
  const auto result = recover_misaligned(alice, obs, 1e-9);
  CHECK(contains_truth(result, {bob.theta, bob.phi, 0.0},
                       Scenario::misaligned, 1e-4));
}

TEST_CASE("misaligned recovery: random round-trips") {
  RandomStream rng(202);
  for (int t = 0; t < 6; ++t) {
    const auto alice = random_message(rng);
    const auto bob = random_message(rng);
    const double align = rng.uniform(0.1, pi - 0.1);
    const auto table = prob_table(misaligned_coeffs(
        encode_message(alice), encode_message(bob), align));
    const auto obs = exact_observables(Scenario::misaligned, table);
    const auto result = recover_misaligned(alice, obs, 1e-9);
    CHECK(contains_truth(result, {bob.theta, bob.phi, align},
                         Scenario::misaligned, 1e-4));
  }
}

TEST_CASE("misaligned recovery: inconsistent observables raise NoSolution") {
  const MessageAngles alice{pi / 5, 0.0};
  const MessageAngles bob{pi / 7, 0.0};
  const auto table = prob_table(misaligned_coeffs(
      encode_message(alice), encode_message(bob), pi / 9));
  auto obs = exact_observables(Scenario::misaligned, table);
  obs.classes["11,11"] += 0.1;
  CHECK_THROWS_AS(recover_misaligned(alice, obs, 1e-9), NoSolutionError);
}

TEST_CASE("qudit3 recovery: uniform worked example") {
  const double r3 = 1.0 / std::sqrt(3.0);
  const auto uniform = make_state({{r3, 0.0}, {r3, 0.0}, {r3, 0.0}});
  const auto obs = exact_observables(
      Scenario::qudit3, prob_table(two_party_coeffs(uniform, uniform)));
  const auto result = recover_qudit3(uniform, obs, 1e-9);
  // truth: chi1 = atan2(sqrt(2/3), sqrt(1/3)), chi2 = pi/4, phases 0.
  const double chi1 = std::atan2(std::sqrt(2.0 / 3.0), r3);
  CHECK(contains_truth(result, {chi1, pi / 4, 0.0, 0.0}, Scenario::qudit3,
                       1e-4));
}

TEST_CASE("qudit3 recovery: random real round-trips") {
  RandomStream rng(303);
  for (int t = 0; t < 4; ++t) {
    std::vector<Amplitude> a_amps, b_amps;
    for (int k = 0; k < 3; ++k) {
      a_amps.push_back({rng.uniform(0.2, 1.0), 0.0});
      b_amps.push_back({rng.uniform(0.2, 1.0), 0.0});
    }
    const auto a = make_state(a_amps);
    const auto b = make_state(b_amps);
    const auto obs = exact_observables(Scenario::qudit3,
                                       prob_table(two_party_coeffs(a, b)));
    const auto result = recover_qudit3(a, obs, 1e-9);
    const double m1 = std::abs(b.amps[1]), m2 = std::abs(b.amps[2]);
    const std::vector<double> truth = {
        std::atan2(std::hypot(m1, m2), b.amps[0].real()),
        std::atan2(m2, m1), 0.0, 0.0};
    CHECK(contains_truth(result, truth, Scenario::qudit3, 1e-4));
  }
}

TEST_CASE("qudit3 recovery: all-zero observables are infeasible") {
  const double r3 = 1.0 / std::sqrt(3.0);
  const auto a = make_state({{r3, 0.0}, {r3, 0.0}, {r3, 0.0}});
  Observables obs;
  obs.scenario = Scenario::qudit3;
  // Zeroing every announced class contradicts normalization: a full
  // axis grid scan never drives all four residuals to zero.
  obs.classes = {{"00,00", 0.0}, {"21,21", 0.0}, {"00,21", 0.0},
                 {"21,00", 0.0}};
  bool feasible = false;
  try {
    const auto r = recover_qudit3(a, obs, 1e-9);
    feasible = !r.candidates.empty();
  } catch (const NoSolutionError&) {
  }
  CHECK_FALSE(feasible);
}

TEST_CASE("ghz3 recovery: degenerate known recovers product magnitudes") {
  const auto a = MessageAngles{0.0, 0.0};  // alice = (1, 0)
  const auto b = MessageAngles{0.8, 0.0};
  const auto c = MessageAngles{0.4, 0.0};
  const auto table = prob_table(ghz_coeffs(
      {encode_message(a), encode_message(b), encode_message(c)}));
  const auto obs = exact_observables(Scenario::ghz3, table);
  const auto result = recover_ghz3(a, obs, 1e-9);
  CHECK(result.ambiguity == Ambiguity::continuum);
  const auto truth = ghz_products(b.theta, b.phi, c.theta, c.phi);
  bool found = false;
  for (const auto& cand : result.candidates) {
    const auto p = ghz_products(cand.params[0], cand.params[1],
                                cand.params[2], cand.params[3]);
    // With a = (1,0) only |p00| and |p01| are constrained.
    if (std::abs(std::abs(p[0]) - std::abs(truth[0])) < 1e-4 &&
        std::abs(std::abs(p[2]) - std::abs(truth[2])) < 1e-4)
      found = true;
  }
  CHECK(found);
}

TEST_CASE("ghz3 recovery: random real round-trips at product level") {
  RandomStream rng(404);
  for (int t = 0; t < 5; ++t) {
    const auto a = random_message(rng);
    const MessageAngles b{rng.uniform(0.2, pi / 2 - 0.2), 0.0};
    const MessageAngles c{rng.uniform(0.2, pi / 2 - 0.2), 0.0};
    const auto table = prob_table(ghz_coeffs(
        {encode_message(a), encode_message(b), encode_message(c)}));
    const auto obs = exact_observables(Scenario::ghz3, table);
    const auto result = recover_ghz3(a, obs, 1e-9);
    const auto truth = ghz_products(b.theta, b.phi, c.theta, c.phi);
    bool found = false;
    for (const auto& cand : result.candidates) {
      const auto p = ghz_products(cand.params[0], cand.params[1],
                                  cand.params[2], cand.params[3]);
      double d = 0.0;
      for (int k = 0; k < 4; ++k)
        d = std::max(d, std::abs(p[static_cast<std::size_t>(k)] -
                                 truth[static_cast<std::size_t>(k)]));
      if (d < 1e-4) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("ghz3 restricted variant recovers the joint phase") {
  RandomStream rng(505);
  for (int t = 0; t < 5; ++t) {
    const auto a = random_message(rng);
    const auto b = random_message(rng);
    const auto c = random_message(rng);
    const auto table = prob_table(ghz_coeffs(
        {encode_message(a), encode_message(b), encode_message(c)}));
    const auto obs = exact_observables(Scenario::ghz3_restricted, table);
    const auto result = recover_ghz3_restricted(
        a, std::cos(b.theta), std::cos(c.theta), obs, 1e-9);
    const double truth = std::fmod(b.phi + c.phi, 2 * pi);
    bool found = false;
    for (const auto& cand : result.candidates) {
      double d = std::abs(cand.params[0] - truth);
      d = std::min(d, 2 * pi - d);
      if (d < 1e-4) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("underdetermination witness: swap-symmetric instances") {
  RandomStream rng(606);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_message(rng);
    const auto b = random_message(rng);
    const auto obs = exact_two_party(a, b);
    const auto pair = underdetermination_witness(obs, 1e-8);
    CHECK(pair.first.residual < 1e-8);
    CHECK(pair.second.residual < 1e-8);
    double d = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
      d = std::max(d, std::abs(pair.first.params[k] - pair.second.params[k]));
    CHECK(d > 10 * kMergeTol);
  }
}

TEST_CASE("statistical recovery reaches one-decimal accuracy") {
  RandomStream rng(707);
  const auto alice = MessageAngles{0.7, 0.3};
  const auto bob = MessageAngles{1.0, 5.0};
  const ScenarioSpec spec{
      ScenarioSpec::Kind::two_party,
      {encode_message(alice), encode_message(bob)},
      0.0};
  auto child = rng.child(1);
  const auto tally =
      run_exchange(spec, policy_two_party_standard(), 1000, child);
  const auto obs = observables_from_tally(Scenario::two_party, tally);
  const auto result = recover_qubit_partner(alice, obs, 1e-9);
  CHECK(std::abs(std::cos(result.candidates.front().params[0]) -
                 std::cos(bob.theta)) < 0.1);
}

TEST_CASE("serial and parallel grid scans agree") {
  const MessageAngles alice{0.5, 1.0};
  const MessageAngles bob{0.9, 2.5};
  const auto obs = exact_two_party(alice, bob);
  RecoverOptions serial{false}, parallel{true};
  const auto rs = recover_qubit_partner(alice, obs, 1e-9, serial);
  const auto rp = recover_qubit_partner(alice, obs, 1e-9, parallel);
  REQUIRE(rs.candidates.size() == rp.candidates.size());
  for (std::size_t k = 0; k < rs.candidates.size(); ++k) {
    CHECK(rs.candidates[k].params == rp.candidates[k].params);
    CHECK(rs.candidates[k].residual == rp.candidates[k].residual);
  }
}

TEST_CASE("observables_from_tally averages class members") {
  TallyTable tally;
  tally.dim = 2;
  tally.parties = 2;
  tally.rounds_total = 400;
  tally.counts[flat_from_label("10,10", 2, 2)] = 40;
  tally.counts[flat_from_label("11,11", 2, 2)] = 60;
  tally.counts[flat_from_label("10,11", 2, 2)] = 20;
  tally.discarded = 280;
  const auto obs = observables_from_tally(Scenario::two_party, tally);
  CHECK(obs.classes.at("10,10") == doctest::Approx(0.125));
  CHECK(obs.classes.at("10,11") == doctest::Approx(0.025));
  CHECK(obs.rounds == 400);
}
