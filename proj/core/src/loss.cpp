#include "tailfuse/loss.hpp"

#include <algorithm>
#include <cmath>

#include "tailfuse/errors.hpp"

namespace tailfuse {

namespace {

double clamp_prob(double p, LossStats* stats) {
  if (p < kProbFloor) {
    if (stats != nullptr) ++stats->clamped;
    return kProbFloor;
  }
  return std::min(p, 1.0);
}

void check_label(const ProbVector& p, Label y) {
  if (y.class_index < 0 || y.class_index >= p.size()) {
    throw ShapeError("label index " + std::to_string(y.class_index) +
                     " out of range for " + std::to_string(p.size()) +
                     " classes");
  }
}

}  // namespace

bool is_on_simplex(std::span<const double> p, double tol) {
  if (p.size() < 2) return false;
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v <= 0.0 || v > 1.0) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

ProbVector ProbVector::checked(std::vector<double> values) {
  if (!is_on_simplex(values)) {
    throw DataError("probability vector is not on the simplex");
  }
  return ProbVector{std::move(values)};
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "ce") return LossKind::ce;
  if (name == "focal") return LossKind::focal;
  throw ConfigError("unknown loss kind: " + std::string(name));
}

std::string to_string(LossKind kind) {
  return kind == LossKind::ce ? "ce" : "focal";
}

double ce_loss(const ProbVector& p, Label y, LossStats* stats) {
  check_label(p, y);
  return -std::log(clamp_prob(p[y.class_index], stats));
}

double focal_loss(const ProbVector& p, Label y, double gamma,
                  LossStats* stats) {
  check_label(p, y);
  const double py = clamp_prob(p[y.class_index], stats);
  // pow(1-p, 0) == 1 exactly, so gamma == 0 reproduces ce_loss bit for bit.
  return -std::pow(1.0 - py, gamma) * std::log(py);
}

double focal_loss_all_class(const ProbVector& p, double gamma,
                            LossStats* stats) {
  double total = 0.0;
  for (int j = 0; j < p.size(); ++j) {
    const double pj = clamp_prob(p[j], stats);
    total += -std::pow(1.0 - pj, gamma) * std::log(pj);
  }
  return total;
}

double focal_loss_form(const ProbVector& p, Label y, double gamma,
                       FocalForm form, LossStats* stats) {
  return form == FocalForm::ground_truth
             ? focal_loss(p, y, gamma, stats)
             : focal_loss_all_class(p, gamma, stats);
}

namespace {

// d/dp of -(1-p)^gamma * ln p at one probability entry.
double focal_dp(double p, double gamma, LossStats* stats) {
  if (p >= 1.0) {
    if (gamma == 0.0) return -1.0;  // plain CE gradient at p == 1
    if (gamma < 1.0) {
      if (stats != nullptr) ++stats->singular_grad;
      return 0.0;  // perfect-prediction limit
    }
    return 0.0;  // both terms vanish for gamma >= 1
  }
  const double one_minus = 1.0 - p;
  const double term1 =
      gamma == 0.0
          ? 0.0
          : gamma * std::pow(one_minus, gamma - 1.0) * std::log(p);
  return term1 - std::pow(one_minus, gamma) / p;
}

}  // namespace

double focal_grad_prob(const ProbVector& p, Label y, double gamma,
                       LossStats* stats) {
  check_label(p, y);
  return focal_dp(clamp_prob(p[y.class_index], stats), gamma, stats);
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax over empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - m);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> loss_grad_logits(std::span<const double> logits, Label y,
                                     double gamma, FocalForm form,
                                     LossStats* stats) {
  const std::vector<double> p = softmax(logits);
  const int k_classes = static_cast<int>(p.size());
  if (y.class_index < 0 || y.class_index >= k_classes) {
    throw ShapeError("label index out of range in loss_grad_logits");
  }
  std::vector<double> grad(p.size(), 0.0);

  if (form == FocalForm::ground_truth) {
    // dL/dlogit_k = g * p_y * (delta_yk - p_k) with g = dL/dp_y.
    const double py = clamp_prob(p[static_cast<std::size_t>(y.class_index)],
                                 stats);
    const double g = focal_dp(py, gamma, stats);
    const double gpy = g * py;
    for (int k = 0; k < k_classes; ++k) {
      const double delta = k == y.class_index ? 1.0 : 0.0;
      grad[static_cast<std::size_t>(k)] =
          gpy * (delta - p[static_cast<std::size_t>(k)]);
    }
    return grad;
  }

  // All-class form: full softmax Jacobian,
  // dL/dlogit_k = p_k * (dL/dp_k - sum_j dL/dp_j * p_j).
  std::vector<double> dldp(p.size());
  double dot = 0.0;
  for (int j = 0; j < k_classes; ++j) {
    const double pj = clamp_prob(p[static_cast<std::size_t>(j)], stats);
    dldp[static_cast<std::size_t>(j)] = focal_dp(pj, gamma, stats);
    dot += dldp[static_cast<std::size_t>(j)] * p[static_cast<std::size_t>(j)];
  }
  for (int k = 0; k < k_classes; ++k) {
    grad[static_cast<std::size_t>(k)] =
        p[static_cast<std::size_t>(k)] *
        (dldp[static_cast<std::size_t>(k)] - dot);
  }
  return grad;
}

double batch_mean(std::span<const double> per_sample_losses) {
  if (per_sample_losses.empty()) {
    throw ShapeError("batch_mean over empty batch");
  }
  double sum = 0.0;
  for (double v : per_sample_losses) sum += v;
  return sum / static_cast<double>(per_sample_losses.size());
}

}  // namespace tailfuse
