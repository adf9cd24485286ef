#include "advmal/metrics.hpp"

#include <stdexcept>
#include <string>

#include "advmal/errors.hpp"

namespace advmal {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b)
    throw ShapeError("label vectors differ in length (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

BinaryMetrics binary_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                             int positive_class) {
  check_lengths(y_true.size(), y_pred.size());
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0, correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool pos = y_true[i] == positive_class;
    const bool pred_pos = y_pred[i] == positive_class;
    if (y_true[i] == y_pred[i]) ++correct;
    if (pos && pred_pos) ++tp;
    if (pos && !pred_pos) ++fn;
    if (!pos && pred_pos) ++fp;
    if (!pos && !pred_pos) ++tn;
  }
  BinaryMetrics m;
  m.fnr = ratio(fn, fn + tp);
  m.fpr = ratio(fp, fp + tn);
  m.accuracy = ratio(correct, y_true.size());
  m.fnr_undefined = fn + tp == 0;
  m.fpr_undefined = fp + tn == 0;
  return m;
}

ConfusionCounts confusion_counts(std::span<const int> y_true, std::span<const int> y_pred,
                                 int class_count) {
  check_lengths(y_true.size(), y_pred.size());
  if (class_count < 1) throw std::invalid_argument("class_count must be positive");
  const auto o = static_cast<std::size_t>(class_count);
  ConfusionCounts c{std::vector<std::size_t>(o, 0), std::vector<std::size_t>(o, 0),
                    std::vector<std::size_t>(o, 0), std::vector<std::size_t>(o, 0),
                    y_true.size()};
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= class_count || y_pred[i] < 0 || y_pred[i] >= class_count)
      throw std::out_of_range("label outside [0, " + std::to_string(class_count) + ")");
    const auto t = static_cast<std::size_t>(y_true[i]);
    const auto p = static_cast<std::size_t>(y_pred[i]);
    if (t == p) {
      ++c.tp[t];
    } else {
      ++c.fn[t];
      ++c.fp[p];
    }
  }
  for (std::size_t k = 0; k < o; ++k) c.tn[k] = c.total - c.tp[k] - c.fp[k] - c.fn[k];
  return c;
}

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int class_count) {
  const ConfusionCounts c = confusion_counts(y_true, y_pred, class_count);
  double sum = 0.0;
  for (std::size_t k = 0; k < c.tp.size(); ++k) {
    const double precision = ratio(c.tp[k], c.tp[k] + c.fp[k]);
    const double recall = ratio(c.tp[k], c.tp[k] + c.fn[k]);
    if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
  }
  return sum / static_cast<double>(c.tp.size());
}

double harmonic_mean(double a1, double a2) {
  if (a1 + a2 == 0.0) return 0.0;
  return 2.0 * a1 * a2 / (a1 + a2);
}

}  // namespace advmal
