#include "tailfuse/schedule.hpp"

#include <cmath>
#include <string>

#include "tailfuse/errors.hpp"

namespace tailfuse {

GammaMode gamma_mode_from_string(std::string_view name) {
  if (name == "constant") return GammaMode::constant;
  if (name == "linear_decay") return GammaMode::linear_decay;
  if (name == "linear_growth") return GammaMode::linear_growth;
  if (name == "exp_decay") return GammaMode::exp_decay;
  if (name == "exp_growth") return GammaMode::exp_growth;
  throw ConfigError("unknown gamma schedule mode: " + std::string(name));
}

std::string to_string(GammaMode mode) {
  switch (mode) {
    case GammaMode::constant: return "constant";
    case GammaMode::linear_decay: return "linear_decay";
    case GammaMode::linear_growth: return "linear_growth";
    case GammaMode::exp_decay: return "exp_decay";
    case GammaMode::exp_growth: return "exp_growth";
  }
  throw ConfigError("invalid gamma schedule mode value");
}

GammaSchedule GammaSchedule::make(GammaMode mode, double gamma_init,
                                  double gamma_fin, int total_epochs) {
  GammaSchedule s{mode, gamma_init, gamma_fin, total_epochs};
  s.validate();
  return s;
}

void GammaSchedule::validate() const {
  if (!(gamma_init >= 0.0) || !(gamma_fin >= 0.0)) {
    throw ConfigError("gamma endpoints must be non-negative");
  }
  if (total_epochs < 1) {
    throw ConfigError("total_epochs must be >= 1");
  }
  const bool exponential =
      mode == GammaMode::exp_decay || mode == GammaMode::exp_growth;
  if (exponential && (gamma_init <= 0.0 || gamma_fin <= 0.0)) {
    throw ConfigError(
        "exponential gamma modes need strictly positive endpoints");
  }
  if ((mode == GammaMode::linear_decay || mode == GammaMode::exp_decay) &&
      gamma_init < gamma_fin) {
    throw ConfigError("decay schedule needs gamma_init >= gamma_fin");
  }
  if ((mode == GammaMode::linear_growth || mode == GammaMode::exp_growth) &&
      gamma_init > gamma_fin) {
    throw ConfigError("growth schedule needs gamma_init <= gamma_fin");
  }
}

double gamma_at(const GammaSchedule& schedule, int completed_epochs) {
  if (completed_epochs < 0 || completed_epochs > schedule.total_epochs) {
    throw ConfigError("epoch index " + std::to_string(completed_epochs) +
                      " outside schedule horizon [0, " +
                      std::to_string(schedule.total_epochs) + "]");
  }
  if (schedule.mode == GammaMode::constant) return schedule.gamma_init;
  // Exact endpoints; the closed forms below agree within rounding.
  if (completed_epochs == 0) return schedule.gamma_init;
  if (completed_epochs == schedule.total_epochs) return schedule.gamma_fin;

  const double progress = static_cast<double>(completed_epochs) /
                          static_cast<double>(schedule.total_epochs);
  switch (schedule.mode) {
    case GammaMode::exp_decay:
    case GammaMode::exp_growth:
      return schedule.gamma_init *
             std::pow(schedule.gamma_fin / schedule.gamma_init, progress);
    case GammaMode::linear_decay:
    case GammaMode::linear_growth:
      return schedule.gamma_init +
             (schedule.gamma_fin - schedule.gamma_init) * progress;
    default:
      return schedule.gamma_init;
  }
}

}  // namespace tailfuse
