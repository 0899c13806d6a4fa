#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gckn/types.hpp"

namespace gckn {

/// One-vs-all linear classifier with squared hinge loss. Binary problems
/// use a single head scoring class 1 against class 0.
struct LinearClassifier {
  Matrix weights;  // n_heads x dim
  Vector intercepts;
  double lambda = 0.0;
  int n_classes = 0;

  int n_heads() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }
};

/// Target (+1/-1) of sample label `y` for head `h`.
inline double head_target(int n_classes, int head, int y) {
  const int positive = n_classes == 2 ? 1 : head;
  return y == positive ? 1.0 : -1.0;
}

/// (1/n) sum max(0, 1 - t_i (<w, x_i> + b))^2 + lambda ||w||^2
double head_objective(const Matrix& x, std::span<const double> targets, const Vector& w, double b, double lambda);

/// Sum of head objectives.
double svm_objective(const LinearClassifier& clf, const Matrix& x, std::span<const int> y);

struct SvmOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-12;
};

/// Minimizes each head's objective by a finite Newton method with an
/// unregularized intercept. `n_classes` <= 0 infers max(y) + 1.
LinearClassifier train_squared_hinge(const Matrix& x, std::span<const int> y, double lambda, std::uint64_t seed = 0,
                                     int n_classes = 0, const SvmOptions& options = {});

/// n x n_heads head scores.
Matrix decision_function(const LinearClassifier& clf, const Matrix& x);

/// argmax over heads, ties to the lowest class; binary: score > 0 -> class 1.
std::vector<int> predict(const LinearClassifier& clf, const Matrix& x);
int predict_scores(const LinearClassifier& clf, const Vector& scores);

double accuracy(std::span<const int> predicted, std::span<const int> y);
double accuracy(const LinearClassifier& clf, const Matrix& x, std::span<const int> y);

/// (1/n) * logspace(-3, 4, 60)
std::vector<double> lambda_grid(std::size_t n_samples, int points = 60, double lo = -3.0, double hi = 4.0);

}  // namespace gckn
