// Benchmark: serial vs OpenMP evaluation of a recovery objective over
// its search grid, with an equality check between the two result sets.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "qmx/protocol.hpp"
#include "qmx/qstate.hpp"
#include "qmx/recovery.hpp"

using namespace qmx;
using namespace qmx::protocol;
namespace rec = qmx::recovery;

namespace {

constexpr double pi = std::numbers::pi;

double run(const std::vector<rec::GridAxis>& axes, const rec::ObjectiveFn& f,
           bool parallel, std::vector<double>& out) {
  const auto t0 = std::chrono::steady_clock::now();
  out = rec::grid_values(axes, f, parallel);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

int main() {
  // Misaligned-frame objective on a deliberately fine 3-D grid: the
  // heaviest kernel the recovery search runs.
  const auto alice = encode_message({0.55, 1.2});
  const auto table = prob_table(
      misaligned_coeffs(alice, encode_message({1.05, 4.2}), 0.8));
  const auto obs = rec::exact_observables(rec::Scenario::misaligned, table);

  rec::ObjectiveFn objective = [&](const std::vector<double>& p) {
    const auto predicted = prob_table(misaligned_coeffs(
        alice, encode_message({p[0], p[1]}), p[2]));
    double r = 0.0;
    for (const auto& [label, value] : obs.classes) {
      const double diff =
          predicted.entries[flat_from_label(label, 2, 2)] - value;
      r += diff * diff;
    }
    return r;
  };

  const std::vector<rec::GridAxis> axes = {
      {0.0, pi / 160, 81, false, 0.0},
      {0.0, pi / 80, 160, true, 2 * pi},
      {0.0, pi / 160, 160, true, pi},
  };
  std::size_t total = 1;
  for (const auto& a : axes) total *= static_cast<std::size_t>(a.count);
  std::printf("grid points: %zu\n", total);

  std::vector<double> serial, parallel;
  const double ts = run(axes, objective, false, serial);
  const double tp = run(axes, objective, true, parallel);

  bool identical = serial.size() == parallel.size();
  for (std::size_t k = 0; identical && k < serial.size(); ++k)
    identical = serial[k] == parallel[k];

  std::printf("serial:   %.3f s\n", ts);
  std::printf("parallel: %.3f s\n", tp);
  std::printf("speedup:  %.2fx\n", ts / tp);
  std::printf("results identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
