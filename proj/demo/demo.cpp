// Walks the model zoo through the main checks and prints a one-line summary for each.
#include <cstdio>

#include "dpos/dpos.hpp"

using namespace dpos;

int main() {
  for (double k : {3.0, 1.5}) {
    const auto b = pendulum(k, 0.0);
    const auto r = check_theorem3(b.model, b.cone, b.default_region);
    std::printf("pendulum k=%.1f  strict check: %s  worst margin %+.4f\n", k, to_string(r.verdict), r.worst_margin);
  }

  Mat A(3, 3);
  A << -3, 1, 0.5, 0.25, -2, 1, 0, 0.75, -1;
  const auto m = metzler_linear(A);
  const auto inv = verify_invariance_along_flow(m.model, m.cone, m.default_region, 5.0, 1e-3, 10);
  const auto con = estimate_contraction(m.model, m.cone, m.default_region, 10.0, 1e-3, 5);
  std::printf("metzler 3x3      invariance: %s  contraction rate %.4f (r^2 %.4f)\n", to_string(inv.verdict),
              con.fitted_rate, con.r_squared);

  const auto coop = cooperative_demo(2.0);
  const auto bi = detect_bistable_convergence(coop.model, coop.cone, coop.default_region, 100, 40.0);
  std::printf("cooperative c=2  %s with %zu equilibria:", to_string(bi.kind), bi.fixed_points.size());
  for (const auto& e : bi.fixed_points) std::printf("  (%+.5f, %+.5f) %s", e.x[0], e.x[1], e.stability.c_str());
  std::printf("\n");

  const auto lc = pendulum(3.0, 1.5);
  const auto cyc = detect_limit_cycle(lc.model, lc.cone, lc.default_region, 100.0);
  if (cyc.cycle)
    std::printf("pendulum u=1.5   %s  period %.4f  closure %.2e\n", to_string(cyc.kind), cyc.cycle->period,
                cyc.cycle->closure_error);
  else
    std::printf("pendulum u=1.5   %s\n", to_string(cyc.kind));

  const auto sync = kuramoto_sync_analysis(5, max_gap_region(5, kPi / 2 - 0.1), 1.0, 50.0);
  std::printf("kuramoto n=5     %s", to_string(sync.kind));
  if (sync.sync)
    std::printf("  lambda %.3g  final spread %.2e", sync.sync->lambda_param, sync.sync->max_final_spread);
  std::printf("\n");
  return 0;
}
