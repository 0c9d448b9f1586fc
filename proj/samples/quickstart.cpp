#include <iomanip>
#include <iostream>

#include "pickstate/pipeline.hpp"

// Smallest useful end-to-end run: a reduced corpus and model budget so the
// whole program finishes in a couple of seconds.
using namespace pickstate;

int main() {
  PipelineConfig cfg;
  cfg.master_seed = RngSeed{7};
  cfg.n_success = 24;
  cfg.n_fail = 6;
  cfg.forest.n_trees = 30;
  cfg.mlp.hidden = {32};
  cfg.mlp.max_epochs = 40;

  const PipelineResult result = run_pipeline(cfg);

  std::cout << std::fixed << std::setprecision(3);
  std::cout << "config digest  " << result.config_digest << "\n";
  std::cout << "corpus         " << result.corpus.size() << " trials, onset threshold "
            << result.onset_threshold << " kPa\n";
  std::cout << "split          " << result.split.train.size() << " train / "
            << result.split.val.size() << " val / " << result.split.test.size()
            << " test\n";

  const struct {
    const char* name;
    const ModelEvaluation& ev;
  } models[] = {{"rf", result.rf_eval}, {"mlp", result.mlp_eval}};
  for (const auto& [name, ev] : models) {
    std::cout << name << " accuracy " << ev.metrics.accuracy;
    for (int s = 0; s < kStateCount; ++s) {
      const auto& m = ev.metrics.per_state[static_cast<std::size_t>(s)];
      if (m.defined)
        std::cout << "  " << state_name(state_from_code(s)) << " recall " << m.recall;
    }
    std::cout << "\n  events: " << ev.events.detected << " detected, "
              << ev.events.missed << " missed, mean abs error "
              << ev.events.mean_abs_error_s << " s\n";
  }

  std::cout << "rf per-state sensor importance (columns:";
  for (int g = 0; g < kGroupCount; ++g) std::cout << " " << kGroupNames[g];
  std::cout << ")\n";
  for (int s = 0; s < kStateCount; ++s) {
    std::cout << "  " << std::setw(12) << std::left << state_name(state_from_code(s))
              << std::right;
    for (int g = 0; g < kGroupCount; ++g)
      std::cout << " " << std::setw(6)
                << result.rf_eval.importance[static_cast<std::size_t>(s)]
                                            [static_cast<std::size_t>(g)];
    std::cout << "\n";
  }
  return 0;
}
