#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tailfuse {

/// Floor applied to a probability before it enters a logarithm.
inline constexpr double kProbFloor = 1e-12;

/// Class-probability vector on the simplex: entries in (0, 1], sum 1 within
/// 1e-9, at least two classes.
struct ProbVector {
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }

  /// Validating factory; throws DataError when off the simplex.
  static ProbVector checked(std::vector<double> values);
};

bool is_on_simplex(std::span<const double> p, double tol = 1e-9);

/// Ground-truth class index for a K-class problem.
struct Label {
  int class_index = 0;
};

enum class LossKind { ce, focal };
LossKind loss_kind_from_string(std::string_view name);
std::string to_string(LossKind kind);

/// Which focal objective to evaluate: the ground-truth-class term (default),
/// or the sum of modulated log terms over all classes. The all-class sum is
/// kept selectable for comparison; it is not minimizable under a softmax
/// constraint and is off unless explicitly requested.
enum class FocalForm { ground_truth, all_class };

/// Counters for numeric edge events during loss evaluation.
struct LossStats {
  std::uint64_t clamped = 0;        ///< p[y] hit kProbFloor before log
  std::uint64_t singular_grad = 0;  ///< (1-p)^(gamma-1) singular at p == 1

  LossStats& operator+=(const LossStats& o) {
    clamped += o.clamped;
    singular_grad += o.singular_grad;
    return *this;
  }
};

/// -ln p[y]; the one-hot label collapses the class sum to the true-class term.
double ce_loss(const ProbVector& p, Label y, LossStats* stats = nullptr);

/// -(1-p[y])^gamma * ln p[y]. At gamma == 0 this equals ce_loss exactly.
double focal_loss(const ProbVector& p, Label y, double gamma,
                  LossStats* stats = nullptr);

/// All-class variant: -sum_j (1-p_j)^gamma * ln p_j.
double focal_loss_all_class(const ProbVector& p, double gamma,
                            LossStats* stats = nullptr);

/// Dispatch between the two focal forms.
double focal_loss_form(const ProbVector& p, Label y, double gamma,
                       FocalForm form, LossStats* stats = nullptr);

/// d(focal)/dp[y] for the ground-truth form:
///   gamma*(1-p)^(gamma-1)*ln p - (1-p)^gamma / p.
/// All other entries of p carry zero gradient. At p[y] == 1 with
/// 0 < gamma < 1 the first factor is singular; the perfect-prediction limit 0
/// is returned and the event counted in stats->singular_grad.
double focal_grad_prob(const ProbVector& p, Label y, double gamma,
                       LossStats* stats = nullptr);

/// Numerically stabilized softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);

/// Gradient of focal_loss(softmax(logits), y, gamma) w.r.t. the logits.
/// At gamma == 0 (ground-truth form) this is softmax(logits) - onehot(y).
std::vector<double> loss_grad_logits(std::span<const double> logits, Label y,
                                     double gamma,
                                     FocalForm form = FocalForm::ground_truth,
                                     LossStats* stats = nullptr);

/// Arithmetic mean of per-sample losses, summed sequentially in sample order
/// so batch reduction is deterministic run to run.
double batch_mean(std::span<const double> per_sample_losses);

}  // namespace tailfuse
