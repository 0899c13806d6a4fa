#include "gckn/svm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <Eigen/Cholesky>

#include "gckn/error.hpp"

namespace gckn {

namespace {

struct HeadState {
  Vector w;
  double b = 0.0;
};

double objective_at(const Matrix& x, const Vector& t, const Vector& w, double b, double lambda, Vector* slack) {
  const Vector s = x * w;
  const auto n = static_cast<double>(x.rows());
  double loss = 0.0;
  if (slack) slack->resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double xi = std::max(0.0, 1.0 - t[i] * (s[i] + b));
    if (slack) (*slack)[i] = xi;
    loss += xi * xi;
  }
  return loss / n + lambda * w.squaredNorm();
}

HeadState train_head(const Matrix& x, const Vector& t, double lambda, const SvmOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double nn = static_cast<double>(n);
  HeadState st{Vector::Zero(d), 0.0};
  Vector slack;
  double f = objective_at(x, t, st.w, st.b, lambda, &slack);
  const double f0 = f;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (slack[i] > 0.0) active.push_back(i);
    }
    const auto na = static_cast<Eigen::Index>(active.size());
    Matrix xa(na, d);
    Vector ya(na), ra(na);
    for (Eigen::Index a = 0; a < na; ++a) {
      xa.row(a) = x.row(active[static_cast<std::size_t>(a)]);
      ya[a] = t[active[static_cast<std::size_t>(a)]];
      ra[a] = slack[active[static_cast<std::size_t>(a)]] * ya[a];
    }
    const Vector gw = -(2.0 / nn) * (xa.transpose() * ra) + 2.0 * lambda * st.w;
    const double gb = -(2.0 / nn) * ra.sum();
    const double gnorm = std::sqrt(gw.squaredNorm() + gb * gb);
    if (gnorm <= options.gradient_tolerance * std::max(1.0, f0)) break;

    // Solve [P h; h^T c] [dw; db] = -[gw; gb] with P = 2 lambda I + (2/n) Xa^T Xa.
    const Vector h = (2.0 / nn) * xa.transpose() * Vector::Ones(na);
    const double c = 2.0 * static_cast<double>(na) / nn;
    Matrix rhs(d, 2);
    rhs.col(0) = -gw;
    rhs.col(1) = h;
    Matrix sol(d, 2);
    if (na > d) {
      Matrix p = (2.0 / nn) * (xa.transpose() * xa);
      p.diagonal().array() += 2.0 * lambda;
      sol = p.ldlt().solve(rhs);
    } else {
      Matrix small = xa * xa.transpose();
      small.diagonal().array() += nn * lambda;
      const Matrix proj = small.ldlt().solve(xa * rhs);
      sol = (rhs - xa.transpose() * proj) / (2.0 * lambda);
    }
    const double schur = c - h.dot(sol.col(1));
    double db = 0.0;
    if (na > 0 && schur > 1e-14 * std::max(1.0, c)) db = (-gb - h.dot(sol.col(0))) / schur;
    const Vector dw = sol.col(0) - sol.col(1) * db;

    const double slope = gw.dot(dw) + gb * db;
    if (!(slope < 0.0)) break;
    double step = 1.0;
    Vector trial_slack;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      f_new = objective_at(x, t, st.w + step * dw, st.b + step * db, lambda, &trial_slack);
      if (f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    st.w += step * dw;
    st.b += step * db;
    const double decrease = f - f_new;
    f = f_new;
    slack = std::move(trial_slack);
    if (decrease <= 1e-15 * std::max(1.0, std::abs(f)) && step == 1.0) break;
  }
  return st;
}

}  // namespace

double head_objective(const Matrix& x, std::span<const double> targets, const Vector& w, double b, double lambda) {
  const Eigen::Map<const Vector> t(targets.data(), static_cast<Eigen::Index>(targets.size()));
  return objective_at(x, t, w, b, lambda, nullptr);
}

double svm_objective(const LinearClassifier& clf, const Matrix& x, std::span<const int> y) {
  double total = 0.0;
  Vector t(x.rows());
  for (int h = 0; h < clf.n_heads(); ++h) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) t[i] = head_target(clf.n_classes, h, y[static_cast<std::size_t>(i)]);
    total += objective_at(x, t, clf.weights.row(h).transpose(), clf.intercepts[h], clf.lambda, nullptr);
  }
  return total;
}

LinearClassifier train_squared_hinge(const Matrix& x, std::span<const int> y, double lambda, std::uint64_t,
                                     int n_classes, const SvmOptions& options) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be > 0");
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "embedding rows and labels differ in count");
  }
  if (!x.allFinite()) throw Error(ErrorKind::NonFinite, "training embeddings contain NaN/Inf");
  const std::set<int> present(y.begin(), y.end());
  if (present.size() < 2) throw Error(ErrorKind::SingleClass, "training data needs at least two classes");
  if (*present.begin() < 0) throw Error(ErrorKind::InvalidArgument, "class labels must be >= 0");
  if (n_classes <= 0) n_classes = *present.rbegin() + 1;
  if (*present.rbegin() >= n_classes) throw Error(ErrorKind::InvalidArgument, "label exceeds class count");

  LinearClassifier clf;
  clf.lambda = lambda;
  clf.n_classes = n_classes;
  const int heads = n_classes == 2 ? 1 : n_classes;
  clf.weights.resize(heads, x.cols());
  clf.intercepts.resize(heads);
  Vector t(x.rows());
  for (int h = 0; h < heads; ++h) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) t[i] = head_target(n_classes, h, y[static_cast<std::size_t>(i)]);
    const HeadState st = train_head(x, t, lambda, options);
    clf.weights.row(h) = st.w.transpose();
    clf.intercepts[h] = st.b;
  }
  return clf;
}

Matrix decision_function(const LinearClassifier& clf, const Matrix& x) {
  if (x.cols() != clf.weights.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "classifier expects " + std::to_string(clf.weights.cols()) +
                                                  " features, got " + std::to_string(x.cols()));
  }
  Matrix s = x * clf.weights.transpose();
  s.rowwise() += clf.intercepts.transpose();
  return s;
}

int predict_scores(const LinearClassifier& clf, const Vector& scores) {
  if (clf.n_classes == 2) return scores[0] > 0.0 ? 1 : 0;
  int best = 0;
  for (Eigen::Index h = 1; h < scores.size(); ++h) {
    if (scores[h] > scores[best]) best = static_cast<int>(h);
  }
  return best;
}

std::vector<int> predict(const LinearClassifier& clf, const Matrix& x) {
  const Matrix s = decision_function(clf, x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_scores(clf, s.row(i).transpose());
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> y) {
  if (predicted.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "prediction/label count mismatch");
  if (y.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += predicted[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

double accuracy(const LinearClassifier& clf, const Matrix& x, std::span<const int> y) {
  const auto p = predict(clf, x);
  return accuracy(p, y);
}

std::vector<double> lambda_grid(std::size_t n_samples, int points, double lo, double hi) {
  if (n_samples == 0 || points < 1) throw Error(ErrorKind::InvalidArgument, "lambda grid needs n > 0 and points > 0");
  std::vector<double> out;
  for (int i = 0; i < points; ++i) {
    const double e = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    out.push_back(std::pow(10.0, e) / static_cast<double>(n_samples));
  }
  return out;
}

}  // namespace gckn
