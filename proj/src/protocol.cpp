#include "qmx/protocol.hpp"

#include <cmath>
#include <numbers>

#include "qmx/errors.hpp"

namespace qmx::protocol {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_2pi(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0) r += kTwoPi;
  return r;
}

}  // namespace

MessageAngles canonical_angles(double theta, double phi) {
  return angles_from_qubit(
      make_state({{std::cos(theta), 0.0},
                  std::polar(std::sin(theta), phi)}));
}

QuditState encode_message(const MessageAngles& m) {
  return make_state(
      {{std::cos(m.theta), 0.0}, std::polar(std::sin(m.theta), m.phi)});
}

MessageAngles angles_from_qubit(const QuditState& s) {
  if (s.dim != 2) throw DimensionMismatchError("angles_from_qubit: qubit only");
  const double a0 = s.amps[0].real();
  const double a1 = std::abs(s.amps[1]);
  MessageAngles m;
  m.theta = std::atan2(a1, a0);
  m.phi = a1 > kTol ? wrap_2pi(std::arg(s.amps[1])) : 0.0;
  return m;
}

AnnouncementPolicy policy_two_party_standard() {
  AnnouncementPolicy p;
  p.dim = 2;
  p.announceable = {{2, 3}, {2, 3}};  // Phi_10, Phi_11
  return p;
}

AnnouncementPolicy policy_qudit3() {
  AnnouncementPolicy p;
  p.dim = 3;
  p.announceable = {{0, 7}, {0, 7}};  // Phi_00, Phi_21 (flat 2*3+1)
  return p;
}

AnnouncementPolicy policy_ghz3_standard() {
  AnnouncementPolicy p;
  p.dim = 2;
  p.announceable = {{2, 3}, {2, 3}, {0, 2, 3}};
  p.last_announcer = 2;
  p.last_conditional = true;
  return p;
}

AnnouncementPolicy policy_ghz3_linear_optics() {
  AnnouncementPolicy p;
  p.dim = 2;
  p.announceable = {{2, 3}, {2, 3}, {2, 3}};
  p.last_announcer = 2;
  p.last_conditional = true;
  return p;
}

bool apply_policy(const JointOutcome& outcome,
                  const AnnouncementPolicy& policy) {
  if (outcome.parties.size() != policy.announceable.size())
    throw DimensionMismatchError("apply_policy: party count mismatch");
  for (std::size_t k = 0; k < outcome.parties.size(); ++k) {
    const auto& o = outcome.parties[k];
    if (o.dim != policy.dim)
      throw DimensionMismatchError("apply_policy: dim mismatch");
    // The designated last announcer only speaks when all others did,
    // so a recorded round needs every outcome announceable regardless
    // of ordering.
    if (!policy.announceable[k].count(o.i * policy.dim + o.j)) return false;
  }
  return true;
}

ProbabilityTable exact_table(const ScenarioSpec& spec) {
  switch (spec.kind) {
    case ScenarioSpec::Kind::two_party:
    case ScenarioSpec::Kind::qudit:
      return prob_table(two_party_coeffs(spec.states.at(0), spec.states.at(1)));
    case ScenarioSpec::Kind::ghz:
      return prob_table(ghz_coeffs(spec.states));
    case ScenarioSpec::Kind::misaligned:
      return prob_table(misaligned_coeffs(spec.states.at(0), spec.states.at(1),
                                          spec.alignment));
  }
  throw DomainError("exact_table: unknown scenario");
}

JointOutcome sample_round(const ProbabilityTable& table, RandomStream& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t pick = table.entries.size() - 1;
  for (std::size_t k = 0; k < table.entries.size(); ++k) {
    cum += table.entries[k];
    if (u < cum) {
      pick = k;
      break;
    }
  }
  return outcome_from_flat(pick, table.dim, table.parties);
}

TallyTable run_exchange(const ScenarioSpec& spec,
                        const AnnouncementPolicy& policy, long long rounds,
                        RandomStream& rng) {
  if (rounds < 1) throw DomainError("run_exchange: rounds must be >= 1");
  const ProbabilityTable table = exact_table(spec);
  TallyTable tally;
  tally.dim = table.dim;
  tally.parties = table.parties;
  tally.rounds_total = rounds;
  for (long long r = 0; r < rounds; ++r) {
    const JointOutcome outcome = sample_round(table, rng);
    if (apply_policy(outcome, policy))
      ++tally.counts[flat_index(outcome)];
    else
      ++tally.discarded;
  }
  return tally;
}

std::map<std::size_t, double> estimate(const TallyTable& tally) {
  if (tally.rounds_total < 1) throw EmptyRunError("estimate: empty run");
  std::map<std::size_t, double> est;
  for (const auto& [flat, count] : tally.counts)
    est[flat] = static_cast<double>(count) /
                static_cast<double>(tally.rounds_total);
  return est;
}

StatBound stat_bound(double p, long long n) {
  if (p < 0.0 || p > 1.0) throw DomainError("stat_bound: p out of [0,1]");
  if (n < 1) throw DomainError("stat_bound: n must be >= 1");
  StatBound b;
  b.p = p;
  b.n = n;
  const double dn = static_cast<double>(n);
  b.half_width = std::sqrt(2.0 * dn * p * (1.0 - p)) / dn;
  b.coarse_bound = 1.0 / std::sqrt(dn);
  return b;
}

double baseline_direction(double theta, long long n, RandomStream& rng) {
  if (n < 1) throw DomainError("baseline_direction: n must be >= 1");
  const double c = std::cos(theta);
  const double p_same = c * c;  // polarized photons
  long long same = 0;
  for (long long r = 0; r < n; ++r)
    if (rng.uniform() < p_same) ++same;
  return static_cast<double>(same) / static_cast<double>(n);
}

}  // namespace qmx::protocol
