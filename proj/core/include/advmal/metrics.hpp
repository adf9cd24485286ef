#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace advmal {

/// Rates for one class treated as positive. A rate whose denominator is
/// empty is reported as 0 and flagged.
struct BinaryMetrics {
  double fnr = 0.0;
  double fpr = 0.0;
  double accuracy = 0.0;
  bool fnr_undefined = false;
  bool fpr_undefined = false;
};

BinaryMetrics binary_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                             int positive_class = 1);

/// One-vs-rest counts per class.
struct ConfusionCounts {
  std::vector<std::size_t> tp;
  std::vector<std::size_t> fp;
  std::vector<std::size_t> fn;
  std::vector<std::size_t> tn;
  std::size_t total = 0;
};

ConfusionCounts confusion_counts(std::span<const int> y_true, std::span<const int> y_pred,
                                 int class_count);

/// Unweighted mean of per-class F1; a class with precision + recall = 0
/// contributes 0.
double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int class_count);

/// 2ab / (a + b), and 0 when both are 0.
double harmonic_mean(double a1, double a2);

}  // namespace advmal
