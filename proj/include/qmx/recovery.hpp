#pragma once

#include <array>
#include <complex>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qmx/protocol.hpp"
#include "qmx/qstate.hpp"

namespace qmx::recovery {

enum class Scenario { two_party, qudit3, ghz3, ghz3_restricted, misaligned };

/// Estimated values of the probability classes reachable under the
/// scenario's announcement policy, keyed by a representative outcome
/// label. rounds = 0 means exact (analytic) values.
struct Observables {
  Scenario scenario = Scenario::two_party;
  std::map<std::string, double> classes;
  long long rounds = 0;
};

/// Representative label per observable class, in canonical order.
const std::vector<std::string>& class_labels(Scenario scenario);
/// All outcome labels belonging to each class (same order).
const std::vector<std::vector<std::string>>& class_members(Scenario scenario);

Observables exact_observables(Scenario scenario, const ProbabilityTable& table);
Observables observables_from_tally(Scenario scenario,
                                   const protocol::TallyTable& tally);

/// Parameter order per scenario:
///   two_party:  {theta_b, phi_b}
///   misaligned: {theta_b, phi_b, alignment}
///   qudit3:     {chi1, chi2, phi1, phi2}
///   ghz3:       {theta_b, phi_b, theta_c, phi_c}
///   ghz3_restricted: {phi_b + phi_c}
struct Candidate {
  std::vector<double> params;
  double residual = 0.0;
};

enum class Ambiguity { unique, discrete_set, continuum };

struct RecoveryResult {
  std::vector<Candidate> candidates;  // sorted by residual ascending
  Ambiguity ambiguity = Ambiguity::unique;
};

struct RecoverOptions {
  bool parallel = true;  // OpenMP grid scan; the serial path is the reference
};

RecoveryResult recover_qubit_partner(const protocol::MessageAngles& known,
                                     const Observables& obs, double tol,
                                     const RecoverOptions& opt = {});

RecoveryResult recover_misaligned(const protocol::MessageAngles& known,
                                  const Observables& obs, double tol,
                                  const RecoverOptions& opt = {});

RecoveryResult recover_qudit3(const QuditState& known, const Observables& obs,
                              double tol, const RecoverOptions& opt = {});

RecoveryResult recover_ghz3(const protocol::MessageAngles& known,
                            const Observables& obs, double tol,
                            const RecoverOptions& opt = {});

/// Linear-optics-restricted variant: b0 and c0 publicly announced, only
/// the two i=1 classes observable; recovers the joint phase of b1 c1.
RecoveryResult recover_ghz3_restricted(const protocol::MessageAngles& known,
                                       double b0, double c0,
                                       const Observables& obs, double tol,
                                       const RecoverOptions& opt = {});

struct WitnessPair {
  Candidate first;   // params {theta_a, phi_a, theta_b, phi_b}
  Candidate second;
};

/// Two distinct full assignments matching the same two-party
/// observables: what a third party is left with.
WitnessPair underdetermination_witness(const Observables& obs,
                                       double tol = 1e-8,
                                       const RecoverOptions& opt = {});

/// Products (b0 c0, b1 c1, b0 c1, b1 c0) for canonical qubit angles.
std::array<std::complex<double>, 4> ghz_products(double theta_b, double phi_b,
                                                 double theta_c, double phi_c);

/// Max per-axis distance between parameter vectors, periodic axes wrapped.
double param_distance(Scenario scenario, const std::vector<double>& x,
                      const std::vector<double>& y);

// --- grid machinery, exposed for the serial-vs-OpenMP benchmark ---

struct GridAxis {
  double lo = 0.0;
  double step = 0.0;
  int count = 0;
  bool periodic = false;
  double period = 0.0;
};

using ObjectiveFn = std::function<double(const std::vector<double>&)>;

/// Evaluates f at every grid point (row-major over the axes).
/// parallel = true uses an OpenMP loop; results are identical either way.
std::vector<double> grid_values(const std::vector<GridAxis>& axes,
                                const ObjectiveFn& f, bool parallel);

inline constexpr double kMergeTol = 1e-3;

}  // namespace qmx::recovery
