#include "qmx/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qmx/errors.hpp"

namespace qmx::recovery {

namespace {

using std::complex;
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDegenerate = 1e-6;

double wrap(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0) r += period;
  return r;
}

double axis_dist(double a, double b, bool periodic, double period) {
  double d = std::abs(a - b);
  if (periodic) {
    d = std::fmod(d, period);
    d = std::min(d, period - d);
  }
  return d;
}

// ---- observable class tables -------------------------------------------

const std::vector<std::string> kTwoPartyLabels = {"10,10", "10,11"};
const std::vector<std::vector<std::string>> kTwoPartyMembers = {
    {"10,10", "11,11"}, {"10,11", "11,10"}};

const std::vector<std::string> kMisalignedLabels = {"10,10", "11,11", "10,11",
                                                    "11,10"};
const std::vector<std::vector<std::string>> kMisalignedMembers = {
    {"10,10"}, {"11,11"}, {"10,11"}, {"11,10"}};

const std::vector<std::string> kQudit3Labels = {"00,00", "21,21", "00,21",
                                                "21,00"};
const std::vector<std::vector<std::string>> kQudit3Members = {
    {"00,00"}, {"21,21"}, {"00,21"}, {"21,00"}};

const std::vector<std::string> kGhz3Labels = {"10,10,10", "11,10,10",
                                              "10,11,00", "10,10,00"};
const std::vector<std::vector<std::string>> kGhz3Members = {
    {"10,10,10", "10,11,11", "11,11,10", "11,10,11"},
    {"11,10,10", "10,11,10", "10,10,11", "11,11,11"},
    {"10,11,00", "11,10,00"},
    {"10,10,00", "11,11,00"}};

const std::vector<std::string> kGhz3RestrictedLabels = {"10,10,10",
                                                        "11,10,10"};
const std::vector<std::vector<std::string>> kGhz3RestrictedMembers = {
    kGhz3Members[0], kGhz3Members[1]};

int scenario_parties(Scenario s) {
  return (s == Scenario::ghz3 || s == Scenario::ghz3_restricted) ? 3 : 2;
}

int scenario_dim(Scenario s) { return s == Scenario::qudit3 ? 3 : 2; }

/// Ordered class values; members present in the map are averaged.
std::vector<double> class_values(const Observables& obs) {
  const auto& members = class_members(obs.scenario);
  std::vector<double> vals;
  vals.reserve(members.size());
  for (const auto& group : members) {
    double sum = 0.0;
    int found = 0;
    for (const auto& label : group) {
      auto it = obs.classes.find(label);
      if (it != obs.classes.end()) {
        sum += it->second;
        ++found;
      }
    }
    if (found == 0)
      throw DomainError("observables missing class " + group.front());
    vals.push_back(sum / found);
  }
  return vals;
}

/// Per-class acceptance threshold: explicit tol, widened to the
/// 3-half-width band when the values are sample estimates.
std::vector<double> class_thresholds(const Observables& obs,
                                     const std::vector<double>& vals,
                                     double tol) {
  std::vector<double> thr(vals.size(), tol);
  if (obs.rounds > 0) {
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const double p =
          std::clamp(std::max(vals[k], 1.0 / obs.rounds), 0.0, 1.0);
      thr[k] = std::max(
          tol, 3.0 * protocol::stat_bound(p, obs.rounds).half_width);
    }
  }
  return thr;
}

/// Inverse-variance residual weights for sample estimates (binomial
/// variance is proportional to p/N); uniform for exact data.
std::vector<double> class_weights(const Observables& obs,
                                  const std::vector<double>& vals) {
  std::vector<double> w(vals.size(), 1.0);
  if (obs.rounds > 0)
    for (std::size_t k = 0; k < vals.size(); ++k)
      w[k] = 1.0 / std::max(vals[k], 1.0 / static_cast<double>(obs.rounds));
  return w;
}

// ---- predicted class values per scenario --------------------------------

std::array<complex<double>, 2> qubit_amps(double theta, double phi) {
  return {complex<double>{std::cos(theta), 0.0},
          std::polar(std::sin(theta), phi)};
}

void predict_two_party(const std::array<complex<double>, 2>& a,
                       const std::array<complex<double>, 2>& b,
                       double* out) {
  out[0] = std::norm(a[0] * b[0] + a[1] * b[1]) / 8.0;
  out[1] = std::norm(a[0] * b[0] - a[1] * b[1]) / 8.0;
}

void predict_misaligned(const std::array<complex<double>, 2>& a,
                        const std::array<complex<double>, 2>& b,
                        double alignment, double* out) {
  const double c = std::cos(alignment);
  const double s = std::sin(alignment);
  const double rot[2][2] = {{c, s}, {-s, c}};
  // V_{1 j1 1 j2}, announced classes (10,10), (11,11), (10,11), (11,10).
  const int idx[4][2] = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
  for (int k = 0; k < 4; ++k) {
    const int j1 = idx[k][0], j2 = idx[k][1];
    complex<double> v{0.0, 0.0};
    for (int p = 0; p < 2; ++p)
      for (int r = 0; r < 2; ++r) {
        const double sign = ((j1 * p + j2 * r) & 1) ? -1.0 : 1.0;
        v += sign * a[p] * b[r] * rot[(p + 1) & 1][(r + 1) & 1];
      }
    out[k] = std::norm(v) / 8.0;
  }
}

std::array<complex<double>, 3> qudit3_amps(double chi1, double chi2,
                                           double phi1, double phi2) {
  const double s1 = std::sin(chi1);
  return {complex<double>{std::cos(chi1), 0.0},
          std::polar(s1 * std::cos(chi2), phi1),
          std::polar(s1 * std::sin(chi2), phi2)};
}

void predict_qudit3(const std::array<complex<double>, 3>& a,
                    const std::array<complex<double>, 3>& b, double* out) {
  static const complex<double> w = std::polar(1.0, kTwoPi / 3.0);
  static const complex<double> w2 = std::polar(1.0, 2.0 * kTwoPi / 3.0);
  out[0] = std::norm(a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / 27.0;
  out[1] = std::norm(a[0] * b[0] + a[1] * b[1] * w + a[2] * b[2] * w2) / 27.0;
  out[2] = std::norm(a[2] * b[0] + a[0] * b[1] * w2 + a[1] * b[2] * w) / 27.0;
  out[3] = std::norm(a[1] * b[0] * w2 + a[2] * b[1] * w + a[0] * b[2]) / 27.0;
}

void predict_ghz3(const std::array<complex<double>, 2>& a,
                  const std::array<complex<double>, 4>& products,
                  double* out) {
  const auto& [p00, p11, p01, p10] = products;
  out[0] = std::norm(a[0] * p00 + a[1] * p11) / 16.0;
  out[1] = std::norm(a[0] * p00 - a[1] * p11) / 16.0;
  out[2] = std::norm(a[0] * p01 - a[1] * p10) / 16.0;
  out[3] = std::norm(a[0] * p01 + a[1] * p10) / 16.0;
}

// ---- local minima, Nelder-Mead, search pipeline --------------------------

std::vector<std::size_t> local_minima(const std::vector<GridAxis>& axes,
                                      const std::vector<double>& values) {
  const int n = static_cast<int>(axes.size());
  std::vector<std::size_t> strides(axes.size());
  std::size_t stride = 1;
  for (int k = n - 1; k >= 0; --k) {
    strides[static_cast<std::size_t>(k)] = stride;
    stride *= static_cast<std::size_t>(axes[static_cast<std::size_t>(k)].count);
  }
  std::vector<std::size_t> minima;
  std::vector<int> digits(axes.size());
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    std::size_t rest = idx;
    for (int k = 0; k < n; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      digits[ks] = static_cast<int>(rest / strides[ks]);
      rest %= strides[ks];
    }
    bool is_min = true;
    for (int k = 0; k < n && is_min; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const int count = axes[ks].count;
      for (int dir = -1; dir <= 1; dir += 2) {
        int nb = digits[ks] + dir;
        if (nb < 0 || nb >= count) {
          if (!axes[ks].periodic) continue;
          nb = (nb + count) % count;
        }
        const std::size_t nidx =
            idx + (static_cast<std::size_t>(nb) - digits[ks]) * strides[ks];
        if (values[nidx] < values[idx]) {
          is_min = false;
          break;
        }
      }
    }
    if (is_min) minima.push_back(idx);
  }
  return minima;
}

std::vector<double> point_from_flat(const std::vector<GridAxis>& axes,
                                    std::size_t idx) {
  std::vector<double> p(axes.size());
  for (int k = static_cast<int>(axes.size()) - 1; k >= 0; --k) {
    const auto ks = static_cast<std::size_t>(k);
    const std::size_t count = static_cast<std::size_t>(axes[ks].count);
    p[ks] = axes[ks].lo + axes[ks].step * static_cast<double>(idx % count);
    idx /= count;
  }
  return p;
}

/// Derivative-free simplex descent.
std::pair<std::vector<double>, double> nelder_mead(
    const ObjectiveFn& f, std::vector<double> start, double initial_step,
    int max_iter) {
  const std::size_t n = start.size();
  std::vector<std::pair<double, std::vector<double>>> simplex;
  simplex.reserve(n + 1);
  simplex.emplace_back(f(start), start);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> v = start;
    v[k] += initial_step;
    simplex.emplace_back(f(v), std::move(v));
  }
  std::vector<double> centroid(n), trial(n);
  for (int it = 0; it < max_iter; ++it) {
    std::sort(simplex.begin(), simplex.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double size = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      size = std::max(size,
                      std::abs(simplex.back().second[k] - simplex[0].second[k]));
    if (size < 1e-12 && simplex.back().first - simplex[0].first < 1e-30) break;

    for (std::size_t k = 0; k < n; ++k) {
      centroid[k] = 0.0;
      for (std::size_t v = 0; v < n; ++v) centroid[k] += simplex[v].second[k];
      centroid[k] /= static_cast<double>(n);
    }
    auto& worst = simplex.back();
    for (std::size_t k = 0; k < n; ++k)
      trial[k] = centroid[k] + (centroid[k] - worst.second[k]);
    double f_trial = f(trial);
    if (f_trial < simplex[0].first) {
      std::vector<double> expanded(n);
      for (std::size_t k = 0; k < n; ++k)
        expanded[k] = centroid[k] + 2.0 * (centroid[k] - worst.second[k]);
      const double f_exp = f(expanded);
      if (f_exp < f_trial) {
        worst = {f_exp, expanded};
      } else {
        worst = {f_trial, trial};
      }
    } else if (f_trial < simplex[n - 1].first) {
      worst = {f_trial, trial};
    } else {
      for (std::size_t k = 0; k < n; ++k)
        trial[k] = centroid[k] + 0.5 * (worst.second[k] - centroid[k]);
      f_trial = f(trial);
      if (f_trial < worst.first) {
        worst = {f_trial, trial};
      } else {
        for (std::size_t v = 1; v <= n; ++v) {
          for (std::size_t k = 0; k < n; ++k)
            simplex[v].second[k] =
                simplex[0].second[k] +
                0.5 * (simplex[v].second[k] - simplex[0].second[k]);
          simplex[v].first = f(simplex[v].second);
        }
      }
    }
  }
  std::sort(simplex.begin(), simplex.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return {simplex[0].second, simplex[0].first};
}

using Canonicalize = std::function<std::vector<double>(std::vector<double>)>;
using Distance = std::function<double(const std::vector<double>&,
                                      const std::vector<double>&)>;

/// Coarse grid scan, refinement from every retained grid minimum,
/// canonicalization, dedup, ascending sort.
std::vector<Candidate> search(const std::vector<GridAxis>& axes,
                              const ObjectiveFn& f,
                              const Canonicalize& canonicalize,
                              const Distance& distance, bool parallel) {
  const std::vector<double> values = grid_values(axes, f, parallel);
  const double best = *std::min_element(values.begin(), values.end());
  // Coarse grids leave basin minima around the discretization error, so
  // keep everything below max(10 x best, grid slack).
  const double threshold = std::max(10.0 * best, 1e-3);

  std::vector<std::size_t> seeds;
  for (std::size_t idx : local_minima(axes, values))
    if (values[idx] <= threshold) seeds.push_back(idx);
  std::sort(seeds.begin(), seeds.end(), [&](std::size_t a, std::size_t b) {
    return values[a] != values[b] ? values[a] < values[b] : a < b;
  });
  if (seeds.size() > 128) seeds.resize(128);

  double max_step = 0.0;
  for (const auto& ax : axes) max_step = std::max(max_step, ax.step);

  std::vector<Candidate> refined;
  for (std::size_t idx : seeds) {
    auto [point, value] =
        nelder_mead(f, point_from_flat(axes, idx), max_step * 0.5, 2000);
    // Restarts with progressively smaller simplexes escape the
    // near-degenerate shapes the first pass can collapse into.
    std::tie(point, value) = nelder_mead(f, point, 1e-3, 600);
    std::tie(point, value) = nelder_mead(f, point, 1e-6, 300);
    std::vector<double> canon = canonicalize(std::move(point));
    const double residual = f(canon);
    refined.push_back({std::move(canon), residual});
  }

  std::sort(refined.begin(), refined.end(), [](const auto& a, const auto& b) {
    return a.residual != b.residual ? a.residual < b.residual
                                    : a.params < b.params;
  });
  std::vector<Candidate> dedup;
  for (auto& c : refined) {
    bool merged = false;
    for (const auto& kept : dedup)
      if (distance(c.params, kept.params) < kMergeTol) {
        merged = true;
        break;
      }
    if (!merged) dedup.push_back(std::move(c));
  }
  return dedup;
}

std::vector<Candidate> accept_candidates(
    std::vector<Candidate> candidates,
    const std::function<void(const std::vector<double>&, double*)>& predict,
    const std::vector<double>& obs_vals, const std::vector<double>& thr,
    const char* what) {
  std::vector<Candidate> accepted;
  std::vector<double> pred(obs_vals.size());
  double closest_miss = std::numeric_limits<double>::infinity();
  for (auto& c : candidates) {
    predict(c.params, pred.data());
    bool ok = true;
    double worst = 0.0;
    for (std::size_t k = 0; k < obs_vals.size(); ++k) {
      const double err = std::abs(pred[k] - obs_vals[k]);
      worst = std::max(worst, err);
      if (err > thr[k]) ok = false;
    }
    if (ok)
      accepted.push_back(std::move(c));
    else
      closest_miss = std::min(closest_miss, worst);
  }
  if (accepted.empty())
    throw NoSolutionError(
        std::string(what) +
        ": no parameters reproduce the observables (closest miss " +
        std::to_string(closest_miss) + ")");
  return accepted;
}

std::vector<double> canon_qubit_pair(std::vector<double> p) {
  const auto m = protocol::canonical_angles(p[0], p[1]);
  p[0] = m.theta;
  p[1] = m.phi;
  return p;
}

bool known_degenerate(const protocol::MessageAngles& known) {
  return std::abs(std::sin(known.theta)) < kDegenerate ||
         std::abs(std::cos(known.theta)) < kDegenerate;
}

}  // namespace

// ---- public helpers -------------------------------------------------------

const std::vector<std::string>& class_labels(Scenario scenario) {
  switch (scenario) {
    case Scenario::two_party: return kTwoPartyLabels;
    case Scenario::misaligned: return kMisalignedLabels;
    case Scenario::qudit3: return kQudit3Labels;
    case Scenario::ghz3: return kGhz3Labels;
    case Scenario::ghz3_restricted: return kGhz3RestrictedLabels;
  }
  throw DomainError("class_labels: unknown scenario");
}

const std::vector<std::vector<std::string>>& class_members(Scenario scenario) {
  switch (scenario) {
    case Scenario::two_party: return kTwoPartyMembers;
    case Scenario::misaligned: return kMisalignedMembers;
    case Scenario::qudit3: return kQudit3Members;
    case Scenario::ghz3: return kGhz3Members;
    case Scenario::ghz3_restricted: return kGhz3RestrictedMembers;
  }
  throw DomainError("class_members: unknown scenario");
}

Observables exact_observables(Scenario scenario,
                              const ProbabilityTable& table) {
  Observables obs;
  obs.scenario = scenario;
  obs.rounds = 0;
  const int parties = scenario_parties(scenario);
  const int dim = scenario_dim(scenario);
  if (table.parties != parties || table.dim != dim)
    throw DimensionMismatchError("exact_observables: table shape");
  for (const auto& label : class_labels(scenario))
    obs.classes[label] = table.entries[flat_from_label(label, dim, parties)];
  return obs;
}

Observables observables_from_tally(Scenario scenario,
                                   const protocol::TallyTable& tally) {
  if (tally.rounds_total < 1)
    throw EmptyRunError("observables_from_tally: empty run");
  Observables obs;
  obs.scenario = scenario;
  obs.rounds = tally.rounds_total;
  const int parties = scenario_parties(scenario);
  const int dim = scenario_dim(scenario);
  const auto& labels = class_labels(scenario);
  const auto& members = class_members(scenario);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    double sum = 0.0;
    for (const auto& label : members[k]) {
      auto it = tally.counts.find(flat_from_label(label, dim, parties));
      if (it != tally.counts.end()) sum += static_cast<double>(it->second);
    }
    obs.classes[labels[k]] =
        sum / (static_cast<double>(members[k].size()) *
               static_cast<double>(tally.rounds_total));
  }
  return obs;
}

std::array<std::complex<double>, 4> ghz_products(double theta_b, double phi_b,
                                                 double theta_c,
                                                 double phi_c) {
  const auto b = qubit_amps(theta_b, phi_b);
  const auto c = qubit_amps(theta_c, phi_c);
  return {b[0] * c[0], b[1] * c[1], b[0] * c[1], b[1] * c[0]};
}

double param_distance(Scenario scenario, const std::vector<double>& x,
                      const std::vector<double>& y) {
  if (x.size() != y.size())
    throw DimensionMismatchError("param_distance: size mismatch");
  // Periodic axes are the phase angles.
  auto periodic = [&](std::size_t k) {
    switch (scenario) {
      case Scenario::two_party: return k == 1;
      case Scenario::misaligned: return k >= 1;
      case Scenario::qudit3: return k >= 2;
      case Scenario::ghz3: return k == 1 || k == 3;
      case Scenario::ghz3_restricted: return true;
    }
    return false;
  };
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double period =
        (scenario == Scenario::misaligned && k == 2) ? kPi : kTwoPi;
    d = std::max(d, axis_dist(x[k], y[k], periodic(k), period));
  }
  return d;
}

std::vector<double> grid_values(const std::vector<GridAxis>& axes,
                                const ObjectiveFn& f, bool parallel) {
  std::size_t total = 1;
  for (const auto& ax : axes) total *= static_cast<std::size_t>(ax.count);
  std::vector<double> values(total);
  const auto eval_range = [&](std::size_t begin, std::size_t end) {
    std::vector<double> point(axes.size());
    for (std::size_t idx = begin; idx < end; ++idx) {
      std::size_t rest = idx;
      for (int k = static_cast<int>(axes.size()) - 1; k >= 0; --k) {
        const auto ks = static_cast<std::size_t>(k);
        const std::size_t count = static_cast<std::size_t>(axes[ks].count);
        point[ks] =
            axes[ks].lo + axes[ks].step * static_cast<double>(rest % count);
        rest /= count;
      }
      values[idx] = f(point);
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < static_cast<long long>(total); ++idx) {
      // Per-iteration recompute keeps each slot independent of thread count.
      thread_local std::vector<double> point;
      point.resize(axes.size());
      std::size_t rest = static_cast<std::size_t>(idx);
      for (int k = static_cast<int>(axes.size()) - 1; k >= 0; --k) {
        const auto ks = static_cast<std::size_t>(k);
        const std::size_t count = static_cast<std::size_t>(axes[ks].count);
        point[ks] =
            axes[ks].lo + axes[ks].step * static_cast<double>(rest % count);
        rest /= count;
      }
      values[static_cast<std::size_t>(idx)] = f(point);
    }
  } else {
    eval_range(0, total);
  }
  return values;
}

// ---- recovery operations --------------------------------------------------

RecoveryResult recover_qubit_partner(const protocol::MessageAngles& known,
                                     const Observables& obs, double tol,
                                     const RecoverOptions& opt) {
  const auto vals = class_values(obs);
  const auto thr = class_thresholds(obs, vals, tol);
  const auto w = class_weights(obs, vals);
  const auto a = qubit_amps(known.theta, known.phi);

  auto predict = [&a](const std::vector<double>& p, double* out) {
    predict_two_party(a, qubit_amps(p[0], p[1]), out);
  };
  ObjectiveFn f = [&](const std::vector<double>& p) {
    double pred[2];
    predict(p, pred);
    double r = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double d = pred[k] - vals[static_cast<std::size_t>(k)];
      r += w[static_cast<std::size_t>(k)] * d * d;
    }
    return r;
  };
  const std::vector<GridAxis> axes = {
      {0.0, kPi / 200.0, 101, false, 0.0},
      {0.0, kPi / 200.0, 400, true, kTwoPi}};
  auto distance = [](const std::vector<double>& x,
                     const std::vector<double>& y) {
    return param_distance(Scenario::two_party, x, y);
  };
  auto candidates =
      search(axes, f, canon_qubit_pair, distance, opt.parallel);
  RecoveryResult result;
  result.candidates = accept_candidates(std::move(candidates), predict, vals,
                                        thr, "recover_qubit_partner");
  result.ambiguity = known_degenerate(known) ? Ambiguity::continuum
                     : result.candidates.size() > 1 ? Ambiguity::discrete_set
                                                    : Ambiguity::unique;
  return result;
}

RecoveryResult recover_misaligned(const protocol::MessageAngles& known,
                                  const Observables& obs, double tol,
                                  const RecoverOptions& opt) {
  const auto vals = class_values(obs);
  const auto thr = class_thresholds(obs, vals, tol);
  const auto w = class_weights(obs, vals);
  const auto a = qubit_amps(known.theta, known.phi);

  auto predict = [&a](const std::vector<double>& p, double* out) {
    predict_misaligned(a, qubit_amps(p[0], p[1]), p[2], out);
  };
  ObjectiveFn f = [&](const std::vector<double>& p) {
    double pred[4];
    predict(p, pred);
    double r = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double d = pred[k] - vals[static_cast<std::size_t>(k)];
      r += w[static_cast<std::size_t>(k)] * d * d;
    }
    return r;
  };
  const std::vector<GridAxis> axes = {
      {0.0, kPi / 50.0, 26, false, 0.0},
      {0.0, kPi / 50.0, 100, true, kTwoPi},
      {0.0, kPi / 50.0, 50, true, kPi}};
  auto canonicalize = [](std::vector<double> p) {
    const auto m = protocol::canonical_angles(p[0], p[1]);
    p[0] = m.theta;
    p[1] = m.phi;
    p[2] = wrap(p[2], kPi);
    return p;
  };
  auto distance = [](const std::vector<double>& x,
                     const std::vector<double>& y) {
    return param_distance(Scenario::misaligned, x, y);
  };
  auto candidates = search(axes, f, canonicalize, distance, opt.parallel);
  RecoveryResult result;
  result.candidates = accept_candidates(std::move(candidates), predict, vals,
                                        thr, "recover_misaligned");
  result.ambiguity = known_degenerate(known) ? Ambiguity::continuum
                     : result.candidates.size() > 1 ? Ambiguity::discrete_set
                                                    : Ambiguity::unique;
  return result;
}

RecoveryResult recover_qudit3(const QuditState& known, const Observables& obs,
                              double tol, const RecoverOptions& opt) {
  if (known.dim != 3)
    throw DimensionMismatchError("recover_qudit3: known state must be d=3");
  const auto vals = class_values(obs);
  const auto thr = class_thresholds(obs, vals, tol);
  const auto w = class_weights(obs, vals);
  const std::array<complex<double>, 3> a = {known.amps[0], known.amps[1],
                                            known.amps[2]};

  auto predict = [&a](const std::vector<double>& p, double* out) {
    predict_qudit3(a, qudit3_amps(p[0], p[1], p[2], p[3]), out);
  };
  ObjectiveFn f = [&](const std::vector<double>& p) {
    double pred[4];
    predict(p, pred);
    double r = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double d = pred[k] - vals[static_cast<std::size_t>(k)];
      r += w[static_cast<std::size_t>(k)] * d * d;
    }
    return r;
  };
  const std::vector<GridAxis> axes = {
      {0.0, kPi / 20.0, 11, false, 0.0},
      {0.0, kPi / 20.0, 11, false, 0.0},
      {0.0, kPi / 10.0, 20, true, kTwoPi},
      {0.0, kPi / 10.0, 20, true, kTwoPi}};
  auto canonicalize = [](std::vector<double> p) {
    const QuditState b = make_state(
        {qudit3_amps(p[0], p[1], p[2], p[3])[0],
         qudit3_amps(p[0], p[1], p[2], p[3])[1],
         qudit3_amps(p[0], p[1], p[2], p[3])[2]});
    const double m1 = std::abs(b.amps[1]);
    const double m2 = std::abs(b.amps[2]);
    p[0] = std::atan2(std::hypot(m1, m2), b.amps[0].real());
    p[1] = std::atan2(m2, m1);
    p[2] = m1 > kTol ? wrap(std::arg(b.amps[1]), kTwoPi) : 0.0;
    p[3] = m2 > kTol ? wrap(std::arg(b.amps[2]), kTwoPi) : 0.0;
    return p;
  };
  auto distance = [](const std::vector<double>& x,
                     const std::vector<double>& y) {
    return param_distance(Scenario::qudit3, x, y);
  };
  auto candidates = search(axes, f, canonicalize, distance, opt.parallel);
  RecoveryResult result;
  result.candidates = accept_candidates(std::move(candidates), predict, vals,
                                        thr, "recover_qudit3");
  double min_mag = 1.0;
  for (const auto& amp : known.amps) min_mag = std::min(min_mag, std::abs(amp));
  result.ambiguity = min_mag < kDegenerate ? Ambiguity::continuum
                     : result.candidates.size() > 1 ? Ambiguity::discrete_set
                                                    : Ambiguity::unique;
  return result;
}

RecoveryResult recover_ghz3(const protocol::MessageAngles& known,
                            const Observables& obs, double tol,
                            const RecoverOptions& opt) {
  const auto vals = class_values(obs);
  const auto thr = class_thresholds(obs, vals, tol);
  const auto w = class_weights(obs, vals);
  const auto a = qubit_amps(known.theta, known.phi);

  auto predict = [&a](const std::vector<double>& p, double* out) {
    predict_ghz3(a, ghz_products(p[0], p[1], p[2], p[3]), out);
  };
  ObjectiveFn f = [&](const std::vector<double>& p) {
    double pred[4];
    predict(p, pred);
    double r = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double d = pred[k] - vals[static_cast<std::size_t>(k)];
      r += w[static_cast<std::size_t>(k)] * d * d;
    }
    return r;
  };
  const std::vector<GridAxis> axes = {
      {0.0, kPi / 20.0, 11, false, 0.0},
      {0.0, kPi / 10.0, 20, true, kTwoPi},
      {0.0, kPi / 20.0, 11, false, 0.0},
      {0.0, kPi / 10.0, 20, true, kTwoPi}};
  auto canonicalize = [](std::vector<double> p) {
    const auto b = protocol::canonical_angles(p[0], p[1]);
    const auto c = protocol::canonical_angles(p[2], p[3]);
    return std::vector<double>{b.theta, b.phi, c.theta, c.phi};
  };
  // Only the products are constrained; dedup at product level.
  auto distance = [](const std::vector<double>& x,
                     const std::vector<double>& y) {
    const auto px = ghz_products(x[0], x[1], x[2], x[3]);
    const auto py = ghz_products(y[0], y[1], y[2], y[3]);
    double d = 0.0;
    for (int k = 0; k < 4; ++k)
      d = std::max(d, std::abs(px[static_cast<std::size_t>(k)] -
                               py[static_cast<std::size_t>(k)]));
    return d;
  };
  auto candidates = search(axes, f, canonicalize, distance, opt.parallel);
  RecoveryResult result;
  result.candidates = accept_candidates(std::move(candidates), predict, vals,
                                        thr, "recover_ghz3");
  result.ambiguity = known_degenerate(known) ? Ambiguity::continuum
                     : result.candidates.size() > 1 ? Ambiguity::discrete_set
                                                    : Ambiguity::unique;
  return result;
}

RecoveryResult recover_ghz3_restricted(const protocol::MessageAngles& known,
                                       double b0, double c0,
                                       const Observables& obs, double tol,
                                       const RecoverOptions& opt) {
  if (b0 < 0.0 || b0 > 1.0 || c0 < 0.0 || c0 > 1.0)
    throw DomainError("recover_ghz3_restricted: b0, c0 must be in [0, 1]");
  const auto vals = class_values(obs);
  const auto thr = class_thresholds(obs, vals, tol);
  const auto w = class_weights(obs, vals);
  const auto a = qubit_amps(known.theta, known.phi);
  const double mag11 =
      std::sqrt(std::max(0.0, 1.0 - b0 * b0)) *
      std::sqrt(std::max(0.0, 1.0 - c0 * c0));
  const complex<double> p00{b0 * c0, 0.0};

  auto predict = [&](const std::vector<double>& p, double* out) {
    const complex<double> p11 = std::polar(mag11, p[0]);
    out[0] = std::norm(a[0] * p00 + a[1] * p11) / 16.0;
    out[1] = std::norm(a[0] * p00 - a[1] * p11) / 16.0;
  };
  ObjectiveFn f = [&](const std::vector<double>& p) {
    double pred[2];
    predict(p, pred);
    const double d0 = pred[0] - vals[0];
    const double d1 = pred[1] - vals[1];
    return w[0] * d0 * d0 + w[1] * d1 * d1;
  };
  const std::vector<GridAxis> axes = {{0.0, kPi / 100.0, 200, true, kTwoPi}};
  auto canonicalize = [](std::vector<double> p) {
    p[0] = wrap(p[0], kTwoPi);
    return p;
  };
  auto distance = [](const std::vector<double>& x,
                     const std::vector<double>& y) {
    return param_distance(Scenario::ghz3_restricted, x, y);
  };
  auto candidates = search(axes, f, canonicalize, distance, opt.parallel);
  RecoveryResult result;
  result.candidates = accept_candidates(std::move(candidates), predict, vals,
                                        thr, "recover_ghz3_restricted");
  result.ambiguity = result.candidates.size() > 1 ? Ambiguity::discrete_set
                                                  : Ambiguity::unique;
  return result;
}

WitnessPair underdetermination_witness(const Observables& obs, double tol,
                                       const RecoverOptions& opt) {
  if (obs.scenario != Scenario::two_party)
    throw DomainError("underdetermination_witness: two-party qubit only");
  const auto vals = class_values(obs);
  const auto thr = class_thresholds(obs, vals, tol);
  const auto w = class_weights(obs, vals);

  auto predict = [](const std::vector<double>& p, double* out) {
    predict_two_party(qubit_amps(p[0], p[1]), qubit_amps(p[2], p[3]), out);
  };
  ObjectiveFn f = [&](const std::vector<double>& p) {
    double pred[2];
    predict(p, pred);
    const double d0 = pred[0] - vals[0];
    const double d1 = pred[1] - vals[1];
    return w[0] * d0 * d0 + w[1] * d1 * d1;
  };
  const std::vector<GridAxis> axes = {
      {0.0, kPi / 24.0, 13, false, 0.0},
      {0.0, kPi / 12.0, 24, true, kTwoPi},
      {0.0, kPi / 24.0, 13, false, 0.0},
      {0.0, kPi / 12.0, 24, true, kTwoPi}};
  auto canonicalize = [](std::vector<double> p) {
    const auto a = protocol::canonical_angles(p[0], p[1]);
    const auto b = protocol::canonical_angles(p[2], p[3]);
    return std::vector<double>{a.theta, a.phi, b.theta, b.phi};
  };
  auto distance = [](const std::vector<double>& x,
                     const std::vector<double>& y) {
    double d = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
      d = std::max(d, axis_dist(x[k], y[k], k % 2 == 1, kTwoPi));
    return d;
  };

  auto candidates = search(axes, f, canonicalize, distance, opt.parallel);
  std::vector<Candidate> accepted;
  {
    std::vector<double> pred(2);
    for (auto& c : candidates) {
      predict(c.params, pred.data());
      if (std::abs(pred[0] - vals[0]) <= thr[0] &&
          std::abs(pred[1] - vals[1]) <= thr[1])
        accepted.push_back(std::move(c));
    }
  }
  if (accepted.empty())
    throw WitnessNotFoundError("underdetermination_witness: infeasible");

  const double min_gap = 10.0 * kMergeTol;
  // Best-separated accepted pair.
  double best_d = 0.0;
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < accepted.size(); ++i)
    for (std::size_t j = i + 1; j < accepted.size(); ++j) {
      const double d = distance(accepted[i].params, accepted[j].params);
      if (d > best_d) {
        best_d = d;
        bi = i;
        bj = j;
      }
    }
  if (best_d > min_gap) return {accepted[bi], accepted[bj]};

  // Swap symmetry of Eqs. of the two-party table as a fallback start.
  const auto& base = accepted.front();
  std::vector<double> swapped = {base.params[2], base.params[3],
                                 base.params[0], base.params[1]};
  auto [point, value] = nelder_mead(f, swapped, 1e-6, 300);
  Candidate other{canonicalize(std::move(point)), 0.0};
  other.residual = f(other.params);
  std::vector<double> pred(2);
  predict(other.params, pred.data());
  if (std::abs(pred[0] - vals[0]) <= thr[0] &&
      std::abs(pred[1] - vals[1]) <= thr[1] &&
      distance(base.params, other.params) > min_gap)
    return {base, other};

  throw WitnessNotFoundError(
      "underdetermination_witness: no well-separated pair found");
}

}  // namespace qmx::recovery
