#pragma once

#include <string>
#include <string_view>

namespace tailfuse {

enum class GammaMode {
  constant,
  linear_decay,
  linear_growth,
  exp_decay,
  exp_growth,
};

GammaMode gamma_mode_from_string(std::string_view name);
std::string to_string(GammaMode mode);

/// Annealing profile for the focal-loss modulating factor. gamma is updated
/// once per epoch and held constant across the batches of that epoch.
struct GammaSchedule {
  GammaMode mode = GammaMode::exp_decay;
  double gamma_init = 2.0;
  double gamma_fin = 0.1;
  int total_epochs = 20;

  /// Validating factory; throws ConfigError on a violated invariant:
  /// exponential modes need strictly positive endpoints, decay modes need
  /// gamma_init >= gamma_fin (growth the reverse), total_epochs >= 1.
  static GammaSchedule make(GammaMode mode, double gamma_init, double gamma_fin,
                            int total_epochs);

  void validate() const;
};

/// gamma after `completed_epochs` epochs (0-based: 0 is the first epoch, so
/// gamma_at(s, 0) == gamma_init exactly). Throws ConfigError when
/// completed_epochs is outside [0, total_epochs].
double gamma_at(const GammaSchedule& schedule, int completed_epochs);

}  // namespace tailfuse
