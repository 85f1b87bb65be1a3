#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "qmx/qstate.hpp"
#include "qmx/rng.hpp"

namespace qmx::protocol {

/// Secret message as state angles: amps = (cos theta, sin theta e^{i phi}),
/// theta in [0, pi/2], phi in [0, 2 pi).
struct MessageAngles {
  double theta = 0.0;
  double phi = 0.0;
};

/// Reduce arbitrary angles to the canonical ranges.
MessageAngles canonical_angles(double theta, double phi);

QuditState encode_message(const MessageAngles& m);

/// Angles of a canonical qubit state (phi = 0 when unidentifiable).
MessageAngles angles_from_qubit(const QuditState& s);

/// Which Bell outcomes each party announces publicly, plus the optional
/// ordering rule where one designated party only announces after
/// everyone else did.
struct AnnouncementPolicy {
  int dim = 2;
  std::vector<std::set<int>> announceable;  // per party, flat i*d+j
  std::optional<int> last_announcer;
  bool last_conditional = true;
};

/// Two-party qubit policy: announce only Phi_10 or Phi_11.
AnnouncementPolicy policy_two_party_standard();
/// d=3 policy: announce only Phi_00 or Phi_21.
AnnouncementPolicy policy_qudit3();
/// Three-party policy: Alice/Bob announce Phi_10 or Phi_11, Charlie
/// announces last and may also announce Phi_00.
AnnouncementPolicy policy_ghz3_standard();
/// Linear-optics-restricted three-party policy: everyone limited to
/// Phi_10 / Phi_11.
AnnouncementPolicy policy_ghz3_linear_optics();

bool apply_policy(const JointOutcome& outcome,
                  const AnnouncementPolicy& policy);

struct TallyTable {
  int dim = 2;
  int parties = 2;
  long long rounds_total = 0;
  std::map<std::size_t, long long> counts;  // flat outcome -> count
  long long discarded = 0;
};

struct ScenarioSpec {
  enum class Kind { two_party, qudit, ghz, misaligned };
  Kind kind = Kind::two_party;
  std::vector<QuditState> states;
  double alignment = 0.0;  // misaligned only
};

ProbabilityTable exact_table(const ScenarioSpec& spec);

/// One categorical draw by cumulative sums; consumes exactly one
/// uniform from the stream.
JointOutcome sample_round(const ProbabilityTable& table, RandomStream& rng);

TallyTable run_exchange(const ScenarioSpec& spec,
                        const AnnouncementPolicy& policy, long long rounds,
                        RandomStream& rng);

/// P^exp = count / rounds_total per recorded outcome.
std::map<std::size_t, double> estimate(const TallyTable& tally);

struct StatBound {
  double p = 0.0;
  long long n = 0;
  double half_width = 0.0;   // sqrt(2 n p (1-p)) / n
  double coarse_bound = 0.0; // 1 / sqrt(n)
};

StatBound stat_bound(double p, long long n);

/// Direction-sharing baseline: n projection rounds, per-round agreement
/// with probability cos^2(theta); returns the agreeing fraction.
double baseline_direction(double theta, long long n, RandomStream& rng);

}  // namespace qmx::protocol
