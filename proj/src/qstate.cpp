#include "qmx/qstate.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qmx/errors.hpp"

namespace qmx {

namespace {

/// omega^e for omega = exp(i*2*pi/d), e reduced mod d. The half- and
/// quarter-period cases are returned exactly so that the sign-level
/// equalities of the qubit tables hold bitwise.
Amplitude unit_phase(int d, long long e) {
  long long r = e % d;
  if (r < 0) r += d;
  if (r == 0) return {1.0, 0.0};
  if (2 * r == d) return {-1.0, 0.0};
  if (4 * r == d) return {0.0, 1.0};
  if (4 * r == 3 * d) return {0.0, -1.0};
  return std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(r) /
                             static_cast<double>(d));
}

std::size_t pow_sz(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int k = 0; k < exp; ++k) r *= base;
  return r;
}

int mod(int x, int d) {
  int r = x % d;
  return r < 0 ? r + d : r;
}

}  // namespace

std::size_t flat_index(const JointOutcome& outcome) {
  std::size_t idx = 0;
  for (const auto& o : outcome.parties) {
    const std::size_t d = static_cast<std::size_t>(o.dim);
    idx = idx * d * d + static_cast<std::size_t>(o.i) * d +
          static_cast<std::size_t>(o.j);
  }
  return idx;
}

JointOutcome outcome_from_flat(std::size_t flat, int dim, int parties) {
  JointOutcome out;
  out.parties.resize(static_cast<std::size_t>(parties));
  const std::size_t dd = static_cast<std::size_t>(dim) * dim;
  for (int k = parties - 1; k >= 0; --k) {
    const std::size_t digit = flat % dd;
    flat /= dd;
    out.parties[static_cast<std::size_t>(k)] = {
        static_cast<int>(digit) / dim, static_cast<int>(digit) % dim, dim};
  }
  return out;
}

std::string outcome_label(std::size_t flat, int dim, int parties) {
  const JointOutcome out = outcome_from_flat(flat, dim, parties);
  std::string s;
  for (std::size_t k = 0; k < out.parties.size(); ++k) {
    if (k > 0) s += ',';
    s += std::to_string(out.parties[k].i);
    s += std::to_string(out.parties[k].j);
  }
  return s;
}

std::size_t flat_from_label(const std::string& label, int dim, int parties) {
  JointOutcome out;
  std::size_t pos = 0;
  for (int k = 0; k < parties; ++k) {
    if (pos + 1 >= label.size() + 1) throw DomainError("bad outcome label");
    const int i = label[pos] - '0';
    const int j = label[pos + 1] - '0';
    if (i < 0 || i >= dim || j < 0 || j >= dim)
      throw IndexOutOfRangeError("bad outcome label: " + label);
    out.parties.push_back({i, j, dim});
    pos += 2;
    if (k + 1 < parties) {
      if (pos >= label.size() || label[pos] != ',')
        throw DomainError("bad outcome label: " + label);
      ++pos;
    }
  }
  return flat_index(out);
}

QuditState make_state(std::vector<Amplitude> amps) {
  if (amps.size() < 2) throw DimensionMismatchError("state needs dim >= 2");
  double norm2 = 0.0;
  for (const auto& a : amps) {
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
      throw NonFiniteError("non-finite amplitude");
    norm2 += std::norm(a);
  }
  if (norm2 < kTol) throw ZeroVectorError("zero state vector");
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& a : amps) a *= inv;

  // Fix global phase: first amplitude above threshold becomes real > 0.
  for (auto& a : amps) {
    const double m = std::abs(a);
    if (m > kTol) {
      const Amplitude phase = std::conj(a) / m;
      for (auto& b : amps) b *= phase;
      a = {m, 0.0};
      break;
    }
  }
  return {static_cast<int>(amps.size()), std::move(amps)};
}

std::vector<Amplitude> bell_vector(int d, int i, int j) {
  if (d < 2) throw DimensionMismatchError("bell_vector: dim must be >= 2");
  if (i < 0 || i >= d || j < 0 || j >= d)
    throw IndexOutOfRangeError("bell_vector: index out of range");
  std::vector<Amplitude> v(static_cast<std::size_t>(d) * d, {0.0, 0.0});
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  for (int q = 0; q < d; ++q) {
    v[static_cast<std::size_t>(q) * d + mod(q + i, d)] =
        unit_phase(d, static_cast<long long>(j) * q) * inv;
  }
  return v;
}

BellBasis standard_bell_basis(int d) {
  BellBasis basis;
  basis.dim = d;
  basis.vectors.reserve(static_cast<std::size_t>(d) * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) basis.vectors.push_back(bell_vector(d, i, j));
  return basis;
}

BellBasis rotated_bell_basis(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // Primed basis vectors in unprimed components.
  const double e[2][2] = {{c, -s}, {s, c}};
  BellBasis basis;
  basis.dim = 2;
  const double inv = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      std::vector<Amplitude> v(4, {0.0, 0.0});
      for (int q = 0; q < 2; ++q) {
        const double sign = (j == 1 && q == 1) ? -inv : inv;
        const int qb = (q + i) & 1;
        for (int x = 0; x < 2; ++x)
          for (int y = 0; y < 2; ++y)
            v[static_cast<std::size_t>(x) * 2 + y] +=
                sign * e[q][x] * e[qb][y];
      }
      basis.vectors.push_back(std::move(v));
    }
  }
  return basis;
}

CoeffTable two_party_coeffs(const QuditState& a, const QuditState& b) {
  if (a.dim != b.dim) throw DimensionMismatchError("state dims differ");
  const int d = a.dim;
  CoeffTable t;
  t.dim = d;
  t.parties = 2;
  t.entries.resize(pow_sz(static_cast<std::size_t>(d), 4));
  const double scale = 1.0 / (d * std::sqrt(static_cast<double>(d)));
  std::size_t idx = 0;
  for (int i1 = 0; i1 < d; ++i1)
    for (int j1 = 0; j1 < d; ++j1)
      for (int i2 = 0; i2 < d; ++i2)
        for (int j2 = 0; j2 < d; ++j2) {
          Amplitude sum{0.0, 0.0};
          for (int m = 0; m < d; ++m) {
            sum += unit_phase(d, -static_cast<long long>(j1 + j2) * m) *
                   a.amps[static_cast<std::size_t>(mod(m - i1, d))] *
                   b.amps[static_cast<std::size_t>(mod(m - i2, d))];
          }
          t.entries[idx++] =
              unit_phase(d, static_cast<long long>(i1) * j1 +
                                static_cast<long long>(i2) * j2) *
              sum * scale;
        }
  return t;
}

CoeffTable ghz_coeffs(const std::vector<QuditState>& states) {
  const int n = static_cast<int>(states.size());
  if (n < 2) throw TooFewPartiesError("ghz_coeffs: need at least 2 parties");
  for (const auto& s : states)
    if (s.dim != 2) throw DimensionMismatchError("ghz_coeffs: qubits only");

  CoeffTable t;
  t.dim = 2;
  t.parties = n;
  t.entries.resize(pow_sz(4, n));
  const double scale = std::pow(1.0 / std::sqrt(2.0), n + 1);
  for (std::size_t idx = 0; idx < t.entries.size(); ++idx) {
    std::size_t rest = idx;
    int ij_sum = 0, j_sum = 0;
    Amplitude p0{1.0, 0.0}, p1{1.0, 0.0};
    for (int k = n - 1; k >= 0; --k) {
      const int digit = static_cast<int>(rest & 3u);
      rest >>= 2;
      const int i = digit >> 1, j = digit & 1;
      ij_sum += i * j;
      j_sum += j;
      p0 *= states[static_cast<std::size_t>(k)].amps[static_cast<std::size_t>(i)];
      p1 *= states[static_cast<std::size_t>(k)]
                .amps[static_cast<std::size_t>(1 - i)];
    }
    const double front = (ij_sum & 1) ? -scale : scale;
    t.entries[idx] = front * ((j_sum & 1) ? p0 - p1 : p0 + p1);
  }
  return t;
}

CoeffTable misaligned_coeffs(const QuditState& a, const QuditState& b,
                             double theta) {
  if (a.dim != 2 || b.dim != 2)
    throw DimensionMismatchError("misaligned_coeffs: qubits only");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // rot[q][r]: component of Alice-basis |q> along Bob's primed |r'>.
  const double rot[2][2] = {{c, s}, {-s, c}};
  CoeffTable t;
  t.dim = 2;
  t.parties = 2;
  t.entries.resize(16);
  const double scale = 1.0 / (2.0 * std::sqrt(2.0));
  std::size_t idx = 0;
  for (int i1 = 0; i1 < 2; ++i1)
    for (int j1 = 0; j1 < 2; ++j1)
      for (int i2 = 0; i2 < 2; ++i2)
        for (int j2 = 0; j2 < 2; ++j2) {
          Amplitude sum{0.0, 0.0};
          for (int p = 0; p < 2; ++p)
            for (int r = 0; r < 2; ++r) {
              const double sign = ((j1 * p + j2 * r) & 1) ? -1.0 : 1.0;
              sum += sign * a.amps[static_cast<std::size_t>(p)] *
                     b.amps[static_cast<std::size_t>(r)] *
                     rot[(p + i1) & 1][(r + i2) & 1];
            }
          t.entries[idx++] = sum * scale;
        }
  return t;
}

CoeffTable oracle_coeffs(const std::vector<Amplitude>& initial,
                         const std::vector<BellBasis>& bases) {
  const int n = static_cast<int>(bases.size());
  if (n < 1) throw TooFewPartiesError("oracle_coeffs: no bases");
  const int d = bases[0].dim;
  for (const auto& b : bases)
    if (b.dim != d) throw DimensionMismatchError("oracle_coeffs: mixed dims");
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  const std::size_t total = pow_sz(dd, n);
  if (initial.size() != total)
    throw DimensionMismatchError("oracle_coeffs: initial vector size");

  CoeffTable t;
  t.dim = d;
  t.parties = n;
  t.entries.assign(total, {0.0, 0.0});
  std::vector<std::size_t> digits(static_cast<std::size_t>(n));
  for (std::size_t out = 0; out < total; ++out) {
    std::size_t rest = out;
    for (int k = n - 1; k >= 0; --k) {
      digits[static_cast<std::size_t>(k)] = rest % dd;
      rest /= dd;
    }
    Amplitude v{0.0, 0.0};
    // Explicit sum over every product-basis index of the 2n qudits.
    for (std::size_t x = 0; x < total; ++x) {
      Amplitude w{1.0, 0.0};
      std::size_t xr = x;
      for (int k = n - 1; k >= 0; --k) {
        const std::size_t pair = xr % dd;
        xr /= dd;
        w *= bases[static_cast<std::size_t>(k)]
                 .vectors[digits[static_cast<std::size_t>(k)]][pair];
      }
      v += std::conj(w) * initial[x];
    }
    t.entries[out] = v;
  }
  return t;
}

std::vector<Amplitude> two_party_initial(const QuditState& a,
                                         const QuditState& b) {
  if (a.dim != b.dim) throw DimensionMismatchError("state dims differ");
  const int d = a.dim;
  const std::size_t sd = static_cast<std::size_t>(d);
  std::vector<Amplitude> psi(sd * sd * sd * sd, {0.0, 0.0});
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  // Qudit order (alpha, A, beta, B); shared pair in |Phi_00>.
  for (std::size_t m = 0; m < sd; ++m)
    for (std::size_t q = 0; q < sd; ++q)
      for (std::size_t nn = 0; nn < sd; ++nn)
        psi[((m * sd + q) * sd + nn) * sd + q] = a.amps[m] * b.amps[nn] * inv;
  return psi;
}

std::vector<Amplitude> ghz_initial(const std::vector<QuditState>& states) {
  const int n = static_cast<int>(states.size());
  if (n < 2) throw TooFewPartiesError("ghz_initial: need at least 2 parties");
  for (const auto& s : states)
    if (s.dim != 2) throw DimensionMismatchError("ghz_initial: qubits only");
  const std::size_t total = pow_sz(4, n);
  std::vector<Amplitude> psi(total, {0.0, 0.0});
  const double inv = 1.0 / std::sqrt(2.0);
  for (int shared = 0; shared < 2; ++shared) {
    const std::size_t limit = pow_sz(2, n);
    for (std::size_t sec = 0; sec < limit; ++sec) {
      Amplitude amp{inv, 0.0};
      std::size_t idx = 0;
      for (int k = 0; k < n; ++k) {
        const std::size_t bit = (sec >> (n - 1 - k)) & 1u;
        amp *= states[static_cast<std::size_t>(k)].amps[bit];
        idx = (idx * 2 + bit) * 2 + static_cast<std::size_t>(shared);
      }
      psi[idx] += amp;
    }
  }
  return psi;
}

std::vector<Amplitude> misaligned_initial(const QuditState& a,
                                          const QuditState& b, double theta) {
  if (a.dim != 2 || b.dim != 2)
    throw DimensionMismatchError("misaligned_initial: qubits only");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // Bob prepares b in his primed basis; express beta in Alice's basis.
  QuditState bu;
  bu.dim = 2;
  bu.amps = {b.amps[0] * c + b.amps[1] * s, -b.amps[0] * s + b.amps[1] * c};
  return two_party_initial(a, bu);
}

ProbabilityTable prob_table(const CoeffTable& coeffs) {
  ProbabilityTable p;
  p.dim = coeffs.dim;
  p.parties = coeffs.parties;
  p.entries.resize(coeffs.entries.size());
  for (std::size_t k = 0; k < coeffs.entries.size(); ++k)
    p.entries[k] = std::norm(coeffs.entries[k]);
  return p;
}

double marginal_probability(const ProbabilityTable& table, int party, int i,
                            int j) {
  if (party < 0 || party >= table.parties)
    throw IndexOutOfRangeError("marginal_probability: bad party");
  if (i < 0 || i >= table.dim || j < 0 || j >= table.dim)
    throw IndexOutOfRangeError("marginal_probability: bad outcome");
  const std::size_t dd = static_cast<std::size_t>(table.dim) * table.dim;
  const std::size_t stride = pow_sz(dd, table.parties - 1 - party);
  const std::size_t want = static_cast<std::size_t>(i) * table.dim + j;
  double sum = 0.0;
  for (std::size_t k = 0; k < table.entries.size(); ++k)
    if ((k / stride) % dd == want) sum += table.entries[k];
  return sum;
}

}  // namespace qmx
