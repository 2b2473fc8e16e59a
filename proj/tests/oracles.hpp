#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "tailfuse/eval.hpp"

namespace oracles {

/// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double step) {
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

/// Central-difference gradient of f at x, one coordinate at a time.
inline std::vector<double> central_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double step) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// Gradient-vector comparison: infinity-norm error over the larger of the
/// reference's infinity norm and a floor.
inline double grad_error(const std::vector<double>& analytic,
                         const std::vector<double>& reference,
                         double floor = 1e-6) {
  double worst = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - reference[i]));
    scale = std::max(scale, std::abs(reference[i]));
  }
  return worst / scale;
}

struct BruteMetrics {
  std::vector<double> precision, recall, f1;
  std::vector<std::int64_t> support;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
  double top1 = 0.0;
};

/// Recompute every metric straight from (true, argmax) pairs, without going
/// through a confusion matrix.
inline BruteMetrics brute_metrics(const tailfuse::PredictionTable& table) {
  const int k = table.num_classes;
  std::vector<int> predicted(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (table.rows[i].probs[static_cast<std::size_t>(c)] >
          table.rows[i].probs[static_cast<std::size_t>(best)]) {
        best = c;
      }
    }
    predicted[i] = best;
  }

  BruteMetrics out;
  out.precision.resize(static_cast<std::size_t>(k));
  out.recall.resize(static_cast<std::size_t>(k));
  out.f1.resize(static_cast<std::size_t>(k));
  out.support.resize(static_cast<std::size_t>(k));
  std::int64_t correct = 0;
  for (int c = 0; c < k; ++c) {
    std::int64_t tp = 0, pred_c = 0, true_c = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const bool is_true = table.rows[i].label == c;
      const bool is_pred = predicted[i] == c;
      if (is_true) ++true_c;
      if (is_pred) ++pred_c;
      if (is_true && is_pred) ++tp;
    }
    const double p =
        pred_c > 0 ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    const double r =
        true_c > 0 ? static_cast<double>(tp) / static_cast<double>(true_c) : 0.0;
    out.precision[static_cast<std::size_t>(c)] = p;
    out.recall[static_cast<std::size_t>(c)] = r;
    out.f1[static_cast<std::size_t>(c)] =
        (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    out.support[static_cast<std::size_t>(c)] = true_c;
    correct += tp;
  }
  const double n = static_cast<double>(table.rows.size());
  for (int c = 0; c < k; ++c) {
    const double share =
        static_cast<double>(out.support[static_cast<std::size_t>(c)]) / n;
    out.weighted_precision += share * out.precision[static_cast<std::size_t>(c)];
    out.weighted_recall += share * out.recall[static_cast<std::size_t>(c)];
    out.weighted_f1 += share * out.f1[static_cast<std::size_t>(c)];
  }
  out.top1 = 100.0 * static_cast<double>(correct) / n;
  return out;
}

/// Largest-remainder rounding of the normalized rank^(-s) masses, minimum 1,
/// written as a direct transcription of the definition.
inline std::vector<int> brute_zipf_sizes(int k, double s, int total) {
  std::vector<double> mass(static_cast<std::size_t>(k));
  double z = 0.0;
  for (int c = 0; c < k; ++c) {
    mass[static_cast<std::size_t>(c)] = 1.0 / std::pow(c + 1.0, s);
    z += mass[static_cast<std::size_t>(c)];
  }
  std::vector<int> sizes(static_cast<std::size_t>(k));
  std::vector<std::pair<double, int>> frac;
  int used = 0;
  for (int c = 0; c < k; ++c) {
    const double exact = mass[static_cast<std::size_t>(c)] / z * total;
    sizes[static_cast<std::size_t>(c)] = static_cast<int>(exact);
    used += sizes[static_cast<std::size_t>(c)];
    frac.emplace_back(exact - sizes[static_cast<std::size_t>(c)], c);
  }
  std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  for (int r = 0; r < total - used; ++r) {
    sizes[static_cast<std::size_t>(frac[static_cast<std::size_t>(r)].second)]++;
  }
  for (int c = 0; c < k; ++c) {
    while (sizes[static_cast<std::size_t>(c)] == 0) {
      int biggest = 0;
      for (int j = 1; j < k; ++j) {
        if (sizes[static_cast<std::size_t>(j)] >
            sizes[static_cast<std::size_t>(biggest)]) {
          biggest = j;
        }
      }
      sizes[static_cast<std::size_t>(biggest)]--;
      sizes[static_cast<std::size_t>(c)]++;
    }
  }
  return sizes;
}

}  // namespace oracles
