#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace qmx {

using Amplitude = std::complex<double>;

inline constexpr double kTol = 1e-12;

/// Normalized d-level state with the global phase fixed: the first
/// amplitude above threshold is real and positive.
struct QuditState {
  int dim = 0;
  std::vector<Amplitude> amps;
};

/// One generalized Bell outcome |Phi_ij> of a d^2-element Bell basis.
struct BellOutcome {
  int i = 0;
  int j = 0;
  int dim = 2;

  friend bool operator==(const BellOutcome&, const BellOutcome&) = default;
};

/// One Bell outcome per measuring party.
struct JointOutcome {
  std::vector<BellOutcome> parties;

  friend bool operator==(const JointOutcome&, const JointOutcome&) = default;
};

/// Dense expansion-coefficient table, d^(2*parties) complex entries.
/// Flat index: party 0 most significant, digit per party = i*d + j.
struct CoeffTable {
  int dim = 0;
  int parties = 0;
  std::vector<Amplitude> entries;

  std::size_t size() const { return entries.size(); }
};

struct ProbabilityTable {
  int dim = 0;
  int parties = 0;
  std::vector<double> entries;

  std::size_t size() const { return entries.size(); }
};

/// A full two-qudit measurement basis: d^2 vectors of d^2 amplitudes,
/// indexed by i*d + j. Feeds the brute-force oracle.
struct BellBasis {
  int dim = 0;
  std::vector<std::vector<Amplitude>> vectors;
};

std::size_t flat_index(const JointOutcome& outcome);
JointOutcome outcome_from_flat(std::size_t flat, int dim, int parties);
std::string outcome_label(std::size_t flat, int dim, int parties);
std::size_t flat_from_label(const std::string& label, int dim, int parties);

/// Normalizes and phase-canonicalizes. Throws ZeroVectorError /
/// NonFiniteError on degenerate input.
QuditState make_state(std::vector<Amplitude> amps);

/// Coefficient vector of |Phi_ij> in the product basis (first qudit
/// major): amplitude omega^(j*q)/sqrt(d) at position q*d + (q+i mod d).
std::vector<Amplitude> bell_vector(int d, int i, int j);

BellBasis standard_bell_basis(int d);

/// Qubit Bell basis whose pair is expressed in a frame rotated by theta:
/// |0'> = cos(theta)|0> - sin(theta)|1>, |1'> = sin(theta)|0> + cos(theta)|1>.
BellBasis rotated_bell_basis(double theta);

/// Closed-form coefficients for two parties sharing |Phi_00>, any d.
CoeffTable two_party_coeffs(const QuditState& a, const QuditState& b);

/// Closed-form coefficients for N qubit parties sharing a GHZ state.
CoeffTable ghz_coeffs(const std::vector<QuditState>& states);

/// Closed-form coefficients when Bob's frame is rotated by theta
/// relative to Alice's (qubits only). theta = 0 reduces to
/// two_party_coeffs exactly.
CoeffTable misaligned_coeffs(const QuditState& a, const QuditState& b,
                             double theta);

/// Brute-force oracle: every coefficient computed as the conjugated
/// inner product of the product of Bell vectors with the initial
/// state, by explicit summation. Qudit order is pairwise:
/// (secret_1, shared_1, secret_2, shared_2, ...).
CoeffTable oracle_coeffs(const std::vector<Amplitude>& initial,
                         const std::vector<BellBasis>& bases);

/// Full 4-qudit initial vector for two parties sharing |Phi_00>.
std::vector<Amplitude> two_party_initial(const QuditState& a,
                                         const QuditState& b);

/// Full 2N-qubit initial vector for N parties sharing a GHZ state.
std::vector<Amplitude> ghz_initial(const std::vector<QuditState>& states);

/// Initial vector for the misaligned-frame scenario, written in
/// Alice's basis; pair with {standard_bell_basis(2),
/// rotated_bell_basis(theta)} in the oracle.
std::vector<Amplitude> misaligned_initial(const QuditState& a,
                                          const QuditState& b, double theta);

ProbabilityTable prob_table(const CoeffTable& coeffs);

/// Marginal probability that `party` observes outcome (i, j).
double marginal_probability(const ProbabilityTable& table, int party, int i,
                            int j);

}  // namespace qmx
