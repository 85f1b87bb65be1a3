// qmx: simulate the entanglement-plus-Bell-measurement message exchange
// end to end and emit a replayable report.

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numbers>
#include <string>

#include "qmx/errors.hpp"
#include "qmx/protocol.hpp"
#include "qmx/recovery.hpp"
#include "qmx/rng.hpp"

using json = nlohmann::json;
using namespace qmx;
using namespace qmx::protocol;
namespace rec = qmx::recovery;

namespace {

constexpr double pi = std::numbers::pi;

constexpr int kExitBadArgs = 2;
constexpr int kExitNoSolution = 3;
constexpr int kExitIo = 4;

struct RunConfig {
  std::string scenario;
  long long rounds = 1000;
  std::uint64_t seed = 1;
  int trials = 1;
  double theta_a = 0.0, phi_a = 0.0;
  double theta_b = 0.0, phi_b = 0.0;
  double theta_c = 0.0, phi_c = 0.0;
  double chi_a = 0.0, phi2_a = 0.0;  // qudit3 second angles
  double chi_b = 0.0, phi2_b = 0.0;
  double alignment = 0.0;
  std::string policy = "standard";
  std::string output;
  std::string format = "json";
};

json config_json(const RunConfig& cfg) {
  json j;
  j["scenario"] = cfg.scenario;
  j["rounds"] = cfg.rounds;
  j["seed"] = cfg.seed;
  j["trials"] = cfg.trials;
  j["policy"] = cfg.policy;
  j["format"] = cfg.format;
  j["theta_a"] = cfg.theta_a;
  j["phi_a"] = cfg.phi_a;
  if (cfg.scenario != "baseline") {
    j["theta_b"] = cfg.theta_b;
    j["phi_b"] = cfg.phi_b;
  }
  if (cfg.scenario == "ghz3") {
    j["theta_c"] = cfg.theta_c;
    j["phi_c"] = cfg.phi_c;
  }
  if (cfg.scenario == "qudit3") {
    j["chi_a"] = cfg.chi_a;
    j["phi2_a"] = cfg.phi2_a;
    j["chi_b"] = cfg.chi_b;
    j["phi2_b"] = cfg.phi2_b;
  }
  if (cfg.scenario == "misaligned" || cfg.scenario == "baseline")
    j["alignment"] = cfg.alignment;
  return j;
}

void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(cfg.output, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + cfg.output);
  out << text;
  if (!out) throw std::ios_base::failure("write failed: " + cfg.output);
}

QuditState qudit3_state(double chi1, double chi2, double phi1, double phi2) {
  const double s1 = std::sin(chi1);
  return make_state({{std::cos(chi1), 0.0},
                     std::polar(s1 * std::cos(chi2), phi1),
                     std::polar(s1 * std::sin(chi2), phi2)});
}

json candidates_json(const rec::RecoveryResult& result,
                     const std::vector<std::string>& names) {
  json out = json::array();
  for (const auto& c : result.candidates) {
    json item;
    json params;
    for (std::size_t k = 0; k < names.size(); ++k) params[names[k]] = c.params[k];
    item["params"] = params;
    item["residual"] = c.residual;
    out.push_back(item);
  }
  return out;
}

const char* ambiguity_name(rec::Ambiguity a) {
  switch (a) {
    case rec::Ambiguity::unique: return "unique";
    case rec::Ambiguity::discrete_set: return "discrete_set";
    case rec::Ambiguity::continuum: return "continuum";
  }
  return "unknown";
}

std::string to_csv(const json& report, int dim, int parties) {
  std::string csv = "label,exact,count,estimate,bound\n";
  const auto& exact = report.at("exact_probabilities");
  const auto& tally = report.at("tally");
  const auto& est = report.at("estimates");
  const auto& bounds = report.at("bounds");
  const std::size_t total = exact.size();
  for (std::size_t flat = 0; flat < total; ++flat) {
    const std::string label = outcome_label(flat, dim, parties);
    csv += '"' + label + "\"," + json(exact.at(label)).dump() + ',';
    csv += tally.contains(label) ? json(tally.at(label)).dump() : "0";
    csv += ',';
    csv += est.contains(label) ? json(est.at(label)).dump() : "";
    csv += ',';
    csv += bounds.contains(label) ? json(bounds.at(label)).dump() : "";
    csv += '\n';
  }
  return csv;
}

int run_scenario(const RunConfig& cfg) {
  ScenarioSpec spec;
  rec::Scenario rscenario = rec::Scenario::two_party;
  AnnouncementPolicy policy;
  if (cfg.scenario == "exchange") {
    spec.kind = ScenarioSpec::Kind::two_party;
    spec.states = {encode_message({cfg.theta_a, cfg.phi_a}),
                   encode_message({cfg.theta_b, cfg.phi_b})};
    policy = policy_two_party_standard();
    rscenario = rec::Scenario::two_party;
  } else if (cfg.scenario == "qudit3") {
    spec.kind = ScenarioSpec::Kind::qudit;
    spec.states = {qudit3_state(cfg.theta_a, cfg.chi_a, cfg.phi_a, cfg.phi2_a),
                   qudit3_state(cfg.theta_b, cfg.chi_b, cfg.phi_b, cfg.phi2_b)};
    policy = policy_qudit3();
    rscenario = rec::Scenario::qudit3;
  } else if (cfg.scenario == "ghz3") {
    spec.kind = ScenarioSpec::Kind::ghz;
    spec.states = {encode_message({cfg.theta_a, cfg.phi_a}),
                   encode_message({cfg.theta_b, cfg.phi_b}),
                   encode_message({cfg.theta_c, cfg.phi_c})};
    policy = cfg.policy == "linear-optics" ? policy_ghz3_linear_optics()
                                           : policy_ghz3_standard();
    rscenario = cfg.policy == "linear-optics" ? rec::Scenario::ghz3_restricted
                                              : rec::Scenario::ghz3;
  } else {  // misaligned
    spec.kind = ScenarioSpec::Kind::misaligned;
    spec.states = {encode_message({cfg.theta_a, cfg.phi_a}),
                   encode_message({cfg.theta_b, cfg.phi_b})};
    spec.alignment = cfg.alignment;
    policy = policy_two_party_standard();
    rscenario = rec::Scenario::misaligned;
  }

  const ProbabilityTable table = exact_table(spec);
  RandomStream rng(cfg.seed);

  TallyTable pooled;
  pooled.dim = table.dim;
  pooled.parties = table.parties;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    auto child = rng.child(static_cast<std::uint64_t>(trial));
    const auto tally = run_exchange(spec, policy, cfg.rounds, child);
    pooled.rounds_total += tally.rounds_total;
    pooled.discarded += tally.discarded;
    for (const auto& [flat, count] : tally.counts) pooled.counts[flat] += count;
  }

  json report;
  report["config"] = config_json(cfg);

  json exact;
  for (std::size_t flat = 0; flat < table.entries.size(); ++flat)
    exact[outcome_label(flat, table.dim, table.parties)] = table.entries[flat];
  report["exact_probabilities"] = exact;

  json tally_j;
  for (const auto& [flat, count] : pooled.counts)
    tally_j[outcome_label(flat, table.dim, table.parties)] = count;
  tally_j["discarded"] = pooled.discarded;
  report["tally"] = tally_j;

  json est_j, bounds_j;
  const auto est = estimate(pooled);
  for (const auto& [flat, value] : est) {
    const std::string label = outcome_label(flat, table.dim, table.parties);
    est_j[label] = value;
    bounds_j[label] =
        stat_bound(table.entries[flat], pooled.rounds_total).half_width;
  }
  report["estimates"] = est_j;
  report["bounds"] = bounds_j;

  const auto obs = rec::observables_from_tally(rscenario, pooled);
  const MessageAngles alice{cfg.theta_a, cfg.phi_a};
  json recovery_j;
  if (rscenario == rec::Scenario::two_party) {
    const auto r = rec::recover_qubit_partner(alice, obs, 1e-9);
    recovery_j["candidates"] = candidates_json(r, {"theta_b", "phi_b"});
    recovery_j["ambiguity"] = ambiguity_name(r.ambiguity);
  } else if (rscenario == rec::Scenario::misaligned) {
    const auto r = rec::recover_misaligned(alice, obs, 1e-9);
    recovery_j["candidates"] =
        candidates_json(r, {"theta_b", "phi_b", "alignment"});
    recovery_j["ambiguity"] = ambiguity_name(r.ambiguity);
  } else if (rscenario == rec::Scenario::qudit3) {
    const auto r = rec::recover_qudit3(spec.states[0], obs, 1e-9);
    recovery_j["candidates"] =
        candidates_json(r, {"chi1", "chi2", "phi1", "phi2"});
    recovery_j["ambiguity"] = ambiguity_name(r.ambiguity);
  } else if (rscenario == rec::Scenario::ghz3) {
    const auto r = rec::recover_ghz3(alice, obs, 1e-9);
    recovery_j["candidates"] =
        candidates_json(r, {"theta_b", "phi_b", "theta_c", "phi_c"});
    recovery_j["ambiguity"] = ambiguity_name(r.ambiguity);
  } else {
    const auto r = rec::recover_ghz3_restricted(
        alice, std::cos(cfg.theta_b), std::cos(cfg.theta_c), obs, 1e-9);
    recovery_j["candidates"] = candidates_json(r, {"phi_sum"});
    recovery_j["ambiguity"] = ambiguity_name(r.ambiguity);
  }
  report["recovery"] = recovery_j;

  if (cfg.format == "csv")
    emit(cfg, to_csv(report, table.dim, table.parties));
  else
    emit(cfg, report.dump(2) + "\n");
  return 0;
}

int run_baseline(const RunConfig& cfg) {
  RandomStream rng(cfg.seed);
  const double fraction = baseline_direction(cfg.alignment, cfg.rounds, rng);
  const double c = std::cos(cfg.alignment);
  const double expected = c * c;
  const double band = 3.0 * std::sqrt(2.0 * expected * (1.0 - expected) /
                                      static_cast<double>(cfg.rounds));
  json report;
  report["config"] = config_json(cfg);
  report["fraction_same"] = fraction;
  report["expected"] = expected;
  report["bound"] = band;
  if (cfg.format == "csv") {
    std::string csv = "key,value\n";
    csv += "fraction_same," + json(fraction).dump() + "\n";
    csv += "expected," + json(expected).dump() + "\n";
    csv += "bound," + json(band).dump() + "\n";
    emit(cfg, csv);
  } else {
    emit(cfg, report.dump(2) + "\n");
  }
  return 0;
}

int run_verify() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& name) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };
  RandomStream rng(20240817);
  auto random_qubit = [&]() {
    return make_state({{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)},
                       {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}});
  };
  const auto std2 = standard_bell_basis(2);
  const auto std3 = standard_bell_basis(3);

  bool normalized = true, oracle_ok = true, identities = true,
       marginals = true;
  for (int t = 0; t < 20; ++t) {
    const auto a = random_qubit();
    const auto b = random_qubit();
    const auto c = random_qubit();
    const double theta = rng.uniform(0.0, 2 * pi);
    std::vector<Amplitude> a3v, b3v;
    for (int k = 0; k < 3; ++k) {
      a3v.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
      b3v.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    }
    const auto a3 = make_state(a3v);
    const auto b3 = make_state(b3v);

    const struct {
      CoeffTable closed;
      CoeffTable oracle;
    } cases[] = {
        {two_party_coeffs(a, b),
         oracle_coeffs(two_party_initial(a, b), {std2, std2})},
        {two_party_coeffs(a3, b3),
         oracle_coeffs(two_party_initial(a3, b3), {std3, std3})},
        {ghz_coeffs({a, b, c}),
         oracle_coeffs(ghz_initial({a, b, c}), {std2, std2, std2})},
        {misaligned_coeffs(a, b, theta),
         oracle_coeffs(misaligned_initial(a, b, theta),
                       {std2, rotated_bell_basis(theta)})},
    };
    for (const auto& cs : cases) {
      double sum = 0.0, diff = 0.0;
      const auto p = prob_table(cs.closed);
      for (std::size_t k = 0; k < p.entries.size(); ++k) {
        sum += p.entries[k];
        diff = std::max(diff,
                        std::abs(cs.closed.entries[k] - cs.oracle.entries[k]));
      }
      if (std::abs(sum - 1.0) > 1e-12) normalized = false;
      if (diff > 1e-12) oracle_ok = false;
      for (int party = 0; party < p.parties; ++party)
        for (int i = 0; i < p.dim; ++i)
          for (int j = 0; j < p.dim; ++j)
            if (std::abs(marginal_probability(p, party, i, j) -
                         1.0 / (p.dim * p.dim)) > 1e-12)
              marginals = false;
    }
    const auto pm = prob_table(misaligned_coeffs(a, b, theta));
    auto at = [&](const char* l) {
      return pm.entries[flat_from_label(l, 2, 2)];
    };
    const double p1 = 2 * at("00,00"), p2 = 2 * at("00,01");
    const double p3 = 2 * at("00,10"), p4 = 2 * at("00,11");
    const double p5 = 2 * at("01,00"), p6 = 2 * at("01,01");
    const double p7 = 2 * at("01,10"), p8 = 2 * at("01,11");
    if (std::abs(p1 + p2 + p3 + p4 - 0.5) > 1e-12) identities = false;
    if (std::abs(p2 + p3 - p5 - p8) > 1e-12) identities = false;
    if (std::abs(p1 + p4 - p6 - p7) > 1e-12) identities = false;
  }
  check(normalized, "probability tables normalized");
  check(oracle_ok, "closed forms equal brute-force oracle");
  check(identities, "misaligned probability identities");
  check(marginals, "single-party marginals uniform");

  // Round-trip recovery spot check.
  bool roundtrip = true;
  try {
    const MessageAngles alice{0.55, 1.2}, bob{1.05, 4.2};
    const auto obs = rec::exact_observables(
        rec::Scenario::two_party,
        prob_table(two_party_coeffs(encode_message(alice),
                                    encode_message(bob))));
    const auto r = rec::recover_qubit_partner(alice, obs, 1e-9);
    bool found = false;
    for (const auto& cand : r.candidates)
      if (rec::param_distance(rec::Scenario::two_party, cand.params,
                              {bob.theta, bob.phi}) < 1e-6)
        found = true;
    roundtrip = found;
  } catch (const std::exception&) {
    roundtrip = false;
  }
  check(roundtrip, "partner recovery round-trip");

  std::cout << (failures == 0 ? "verify: all checks passed\n"
                              : "verify: FAILURES\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entanglement-based message exchange simulator"};
  app.require_subcommand(1);

  RunConfig cfg;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--rounds", cfg.rounds, "Measurement rounds per trial");
    sub->add_option("--seed", cfg.seed, "RNG seed (echoed in the report)");
    sub->add_option("--trials", cfg.trials, "Independent seeded trials");
    sub->add_option("--output", cfg.output, "Report path (default stdout)");
    sub->add_option("--format", cfg.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--policy", cfg.policy, "Announcement policy")
        ->check(CLI::IsMember({"standard", "linear-optics"}));
  };
  auto add_pair_angles = [&](CLI::App* sub) {
    sub->add_option("--theta-a", cfg.theta_a, "Alice theta (radians)");
    sub->add_option("--phi-a", cfg.phi_a, "Alice phi (radians)");
    sub->add_option("--theta-b", cfg.theta_b, "Bob theta (radians)");
    sub->add_option("--phi-b", cfg.phi_b, "Bob phi (radians)");
  };

  auto* exchange = app.add_subcommand("exchange", "Two-party qubit exchange");
  add_common(exchange);
  add_pair_angles(exchange);

  auto* qudit3 = app.add_subcommand("qudit3", "Two-party d=3 exchange");
  add_common(qudit3);
  add_pair_angles(qudit3);
  qudit3->add_option("--chi-a", cfg.chi_a, "Alice second magnitude angle");
  qudit3->add_option("--phi2-a", cfg.phi2_a, "Alice second phase");
  qudit3->add_option("--chi-b", cfg.chi_b, "Bob second magnitude angle");
  qudit3->add_option("--phi2-b", cfg.phi2_b, "Bob second phase");

  auto* ghz3 = app.add_subcommand("ghz3", "Three-party GHZ exchange");
  add_common(ghz3);
  add_pair_angles(ghz3);
  ghz3->add_option("--theta-c", cfg.theta_c, "Charlie theta (radians)");
  ghz3->add_option("--phi-c", cfg.phi_c, "Charlie phi (radians)");

  auto* misaligned =
      app.add_subcommand("misaligned", "Two-party exchange, rotated frames");
  add_common(misaligned);
  add_pair_angles(misaligned);
  misaligned->add_option("--alignment", cfg.alignment,
                         "Frame misalignment angle (radians)");

  auto* baseline =
      app.add_subcommand("baseline", "Direction-sharing baseline protocol");
  add_common(baseline);
  baseline->add_option("--alignment", cfg.alignment,
                       "Angle between the two axes (radians)");

  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  (void)verify;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadArgs;
  }

  try {
    if (cfg.rounds < 1 && !verify->parsed()) {
      std::cerr << "error: --rounds must be >= 1\n";
      return kExitBadArgs;
    }
    if (cfg.trials < 1) {
      std::cerr << "error: --trials must be >= 1\n";
      return kExitBadArgs;
    }
    if (exchange->parsed()) cfg.scenario = "exchange";
    if (qudit3->parsed()) cfg.scenario = "qudit3";
    if (ghz3->parsed()) cfg.scenario = "ghz3";
    if (misaligned->parsed()) cfg.scenario = "misaligned";
    if (baseline->parsed()) cfg.scenario = "baseline";

    if (verify->parsed()) return run_verify();
    if (baseline->parsed()) return run_baseline(cfg);
    return run_scenario(cfg);
  } catch (const NoSolutionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoSolution;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadArgs;
  }
}
