// Simulate a contaminated sample, run the detector and compare with the truth.
#include <cstdio>

#include "odin/odin.hpp"

int main() {
  odin::SimConfig sim;
  sim.subjects = 200;
  sim.nodes = 30;
  sim.lobes_per_hemisphere = 3;
  sim.outlier_fraction = 0.1;
  sim.flip_fraction = 0.1;
  sim.seed = 42;
  const odin::LabeledDataset d = odin::simulate_model(sim);

  const odin::DetectionRun run = odin::run_odin(d.data, d.atlas);
  const odin::ConfusionSummary c = odin::confusion(run.flags.flag, d.is_outlier);

  std::printf("fit: %d iterations, converged=%s, objective %.6f\n", run.fit.iterations,
              run.fit.converged ? "true" : "false", run.fit.final_objective());
  std::printf("thresholds: IM1 %.4g, IM2 %.4g\n", run.flags.im1.threshold, run.flags.im2.threshold);
  std::printf("flagged %zu of %zu (true outliers %zu)\n", run.flags.count(), d.data.subjects(), d.outlier_count());
  std::printf("sensitivity %.3f, specificity %.3f\n", c.sensitivity(), c.specificity());
}
