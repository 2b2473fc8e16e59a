#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tailfuse/loss.hpp"

namespace tailfuse {

/// One evaluated sample: id, ground truth, predicted class probabilities.
struct PredictionRow {
  std::string id;
  int label = 0;
  std::vector<double> probs;
};

struct PredictionTable {
  int num_classes = 0;
  std::vector<PredictionRow> rows;

  /// Unique ids, labels in range, rows on the simplex. Throws DataError.
  void validate() const;
};

/// K x K counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;  // row-major

  std::int64_t at(int true_class, int predicted) const {
    return counts[static_cast<std::size_t>(true_class) *
                      static_cast<std::size_t>(num_classes) +
                  static_cast<std::size_t>(predicted)];
  }
  std::int64_t& at(int true_class, int predicted) {
    return counts[static_cast<std::size_t>(true_class) *
                      static_cast<std::size_t>(num_classes) +
                  static_cast<std::size_t>(predicted)];
  }
  std::int64_t total() const;
  std::int64_t support(int true_class) const;  // row sum
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct WeightedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Full metric stack over one prediction table. top1/top5 are percentages in
/// [0, 100]; the weighted metrics are fractions in [0, 1], so
/// weighted.recall == top1 / 100 (prevalence-weighted recall identity).
struct EvalReport {
  double top1 = 0.0;
  double top5 = 0.0;
  int top5_effective_k = 5;  ///< min(5, K); reported k for the top5 column
  std::vector<ClassMetrics> per_class;
  WeightedMetrics weighted;
  ConfusionMatrix confusion;
  std::string fingerprint;
};

/// Elementwise mean of two probability vectors; stays on the simplex.
ProbVector late_fuse(const ProbVector& a, const ProbVector& b);

/// Row-wise late_fuse matched by sample id; output ordered by id. Throws
/// DataError naming the offending id when the id sets differ or labels
/// disagree.
PredictionTable fuse_tables(const PredictionTable& a, const PredictionTable& b);

/// Index of the largest entry; ties broken by lowest class index.
int argmax_lowest(std::span<const double> values);

ConfusionMatrix confusion(const PredictionTable& preds);

/// Percentage of rows whose true label ranks among the min(k, K) most
/// probable classes. Ties at the k-th rank break toward lower class indices.
double topk_accuracy(const PredictionTable& preds, int k);

/// precision_c = TP/(TP+FP), recall_c = TP/support, F1 harmonic mean; each is
/// 0 when its denominator is 0. Support comes from the row sums.
std::vector<ClassMetrics> per_class_prf(const ConfusionMatrix& cm);

/// Prevalence-weighted average: sum_c (support_c / N) * metric_c.
WeightedMetrics weighted_aggregate(std::span<const ClassMetrics> per_class);

EvalReport evaluate(const PredictionTable& preds, std::string fingerprint = "");

/// Per-class F1 difference report_b - report_a, ordered by class support
/// descending (head classes first). `recovered` marks classes where a scored
/// 0 and b scored > 0.
struct F1Delta {
  int class_index = 0;
  std::int64_t support = 0;
  double f1_a = 0.0;
  double f1_b = 0.0;
  double delta = 0.0;
  bool recovered = false;
};
std::vector<F1Delta> classwise_f1_delta(const EvalReport& report_a,
                                        const EvalReport& report_b);

/// Prediction-table file: comma-separated, header `id,label,p0..p{K-1}`.
/// Leading '#' lines carry metadata (config fingerprint).
void write_prediction_table(const PredictionTable& table,
                            const std::string& path,
                            const std::string& fingerprint);

struct LoadedPredictions {
  PredictionTable table;
  std::string fingerprint;
};
LoadedPredictions load_prediction_table(const std::string& path);

/// Machine- and human-readable report renderings.
std::string report_to_json(const EvalReport& report);
std::string report_to_text(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

}  // namespace tailfuse
