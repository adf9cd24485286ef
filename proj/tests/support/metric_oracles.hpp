#pragma once

// Brute-force metric oracles built from an explicit confusion matrix.

#include <vector>

namespace advmal::testing {

inline std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& y_true,
                                                       const std::vector<int>& y_pred, int o) {
  std::vector<std::vector<long>> m(o, std::vector<long>(o, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) ++m[y_true[i]][y_pred[i]];
  return m;
}

inline double oracle_macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                              int o) {
  const auto m = confusion_matrix(y_true, y_pred, o);
  double sum = 0.0;
  for (int c = 0; c < o; ++c) {
    long row = 0, col = 0;
    for (int k = 0; k < o; ++k) {
      row += m[c][k];
      col += m[k][c];
    }
    const double precision = col ? static_cast<double>(m[c][c]) / col : 0.0;
    const double recall = row ? static_cast<double>(m[c][c]) / row : 0.0;
    sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return sum / o;
}

struct OracleBinary {
  double fnr, fpr, accuracy;
};

inline OracleBinary oracle_binary(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                  int positive) {
  double pos = 0, neg = 0, missed = 0, false_alarm = 0, correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool is_pos = y_true[i] == positive;
    (is_pos ? pos : neg) += 1;
    if (is_pos && y_pred[i] != positive) missed += 1;
    if (!is_pos && y_pred[i] == positive) false_alarm += 1;
    if (y_true[i] == y_pred[i]) correct += 1;
  }
  return {pos ? missed / pos : 0.0, neg ? false_alarm / neg : 0.0,
          y_true.empty() ? 0.0 : correct / static_cast<double>(y_true.size())};
}

inline double oracle_harmonic(double a, double b) {
  return a + b == 0.0 ? 0.0 : 1.0 / ((1.0 / a + 1.0 / b) / 2.0);
}

}  // namespace advmal::testing
