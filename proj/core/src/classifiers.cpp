#include "lal/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lal/dataset.hpp"

namespace lal {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_inputs(const Matrix& x, const Labels& y, std::span<const double> weights, int num_classes) {
  if (x.rows() < 1) throw Error("fit needs at least one sample");
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.size() != weights.size()) {
    throw ShapeError("fit: features, labels and sample weights differ in length");
  }
  if (!x.allFinite()) throw Error("fit: non-finite feature value");
  for (double w : weights) {
    if (!std::isfinite(w) || w <= 0) throw Error("fit: sample weights must be positive and finite");
  }
  for (int label : y) {
    if (label < 0 || label >= num_classes) throw Error("fit: label out of range");
  }
}

// Augmented design [X, 1].
Matrix with_bias(const Matrix& x) {
  Matrix a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  return a;
}

double logistic_objective(const Matrix& xa, const Vector& theta, std::span<const double> t,
                          std::span<const double> s, double l2) {
  const Vector z = xa * theta;
  double f = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    f += s[k] * (softplus(z[i]) - t[k] * z[i]);
  }
  const auto k = theta.size() - 1;
  return f + 0.5 * l2 * theta.head(k).squaredNorm();
}

Vector objective_gradient(const Matrix& xa, const Vector& theta, std::span<const double> t,
                          std::span<const double> s, double l2) {
  const Vector z = xa * theta;
  Vector r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    r[i] = s[k] * (sigmoid(z[i]) - t[k]);
  }
  Vector g = xa.transpose() * r;
  const auto k = theta.size() - 1;
  g.head(k) += l2 * theta.head(k);
  return g;
}

LogisticMachine fit_binary_logistic(const Matrix& xa, std::span<const double> t, std::span<const double> s,
                                    const LogisticConfig& cfg) {
  const Eigen::Index dim = xa.cols();
  Vector theta = Vector::Zero(dim);
  LogisticMachine m;
  // Newton converges quadratically, so polishing well below tol costs one or
  // two extra iterations and makes fits with equivalent inputs agree tightly.
  const double polish_tol = cfg.tol * 1e-4;
  double f = logistic_objective(xa, theta, t, s, cfg.l2_strength);
  Vector g = objective_gradient(xa, theta, t, s, cfg.l2_strength);
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= polish_tol) break;
    const Vector z = xa * theta;
    Vector d(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double p = sigmoid(z[i]);
      d[i] = s[static_cast<std::size_t>(i)] * p * (1.0 - p);
    }
    Matrix h = xa.transpose() * d.asDiagonal() * xa;
    h.diagonal().head(dim - 1).array() += cfg.l2_strength;
    Eigen::LDLT<Matrix> ldlt(h);
    Vector step;
    bool newton = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (newton) {
      step = ldlt.solve(-g);
      newton = step.allFinite() && step.dot(g) < 0;
    }
    if (!newton) step = -g;
    const double slope = step.dot(g);
    double eta = 1.0;
    Vector trial;
    double f_trial = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, eta *= 0.5) {
      trial = theta + eta * step;
      f_trial = logistic_objective(xa, trial, t, s, cfg.l2_strength);
      if (f_trial <= f + 1e-4 * eta * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no further decrease representable
    theta = trial;
    f = f_trial;
    g = objective_gradient(xa, theta, t, s, cfg.l2_strength);
  }
  m.w = theta.head(dim - 1);
  m.b = theta[dim - 1];
  m.iterations = it;
  m.grad_norm = g.lpNorm<Eigen::Infinity>();
  m.converged = m.grad_norm <= cfg.tol;
  return m;
}

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix k = a * b.transpose();
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      const double d2 = std::max(0.0, na[i] + nb[j] - 2.0 * k(i, j));
      k(i, j) = std::exp(-gamma * d2);
    }
  }
  return k;
}

// Two-variable SMO with second-order working-set selection (Fan, Chen, Lin).
SvmMachine smo_solve(const Matrix& x, const Matrix& kernel, const Labels& signs, std::span<const double> box,
                     const SvmConfig& cfg) {
  constexpr double tau = 1e-12;
  const auto n = static_cast<Eigen::Index>(signs.size());
  Vector alpha = Vector::Zero(n);
  Vector grad = Vector::Constant(n, -1.0);
  auto y = [&](Eigen::Index t) { return static_cast<double>(signs[static_cast<std::size_t>(t)]); };
  auto cap = [&](Eigen::Index t) { return box[static_cast<std::size_t>(t)]; };
  auto upper = [&](Eigen::Index t) { return alpha[t] >= cap(t); };
  auto lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };
  auto q = [&](Eigen::Index a, Eigen::Index b) { return y(a) * y(b) * kernel(a, b); };

  const long max_iter = static_cast<long>(cfg.max_passes) * std::max<long>(static_cast<long>(n), 50);
  SvmMachine m;
  double gap = std::numeric_limits<double>::infinity();
  long iter = 0;
  bool optimal = false;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (!upper(t) && -grad[t] >= gmax) gmax = -grad[t], i = t;
      } else {
        if (!lower(t) && grad[t] >= gmax) gmax = grad[t], i = t;
      }
    }
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n && i >= 0; ++t) {
      if (y(t) > 0) {
        if (lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0) {
          double quad = kernel(i, i) + kernel(t, t) - 2.0 * y(i) * q(i, t);
          if (quad <= 0) quad = tau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best_obj) best_obj = obj, j = t;
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          double quad = kernel(i, i) + kernel(t, t) + 2.0 * y(i) * q(i, t);
          if (quad <= 0) quad = tau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best_obj) best_obj = obj, j = t;
        }
      }
    }
    gap = (i >= 0) ? gmax + gmax2 : 0.0;
    if (i < 0 || j < 0 || gap < cfg.smo_tol) {
      optimal = true;
      break;
    }

    const double ci = cap(i), cj = cap(j);
    const double old_i = alpha[i], old_j = alpha[j];
    if (y(i) != y(j)) {
      double quad = kernel(i, i) + kernel(j, j) + 2.0 * q(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > ci - cj) {
        if (alpha[i] > ci) alpha[i] = ci, alpha[j] = ci - diff;
      } else {
        if (alpha[j] > cj) alpha[j] = cj, alpha[i] = cj + diff;
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * q(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > ci) {
        if (alpha[i] > ci) alpha[i] = ci, alpha[j] = sum - ci;
      } else {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = sum;
      }
      if (sum > cj) {
        if (alpha[j] > cj) alpha[j] = cj, alpha[i] = sum - cj;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (Eigen::Index t = 0; t < n; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
  }

  // b = -y_i G_i on free vectors; midpoint of the feasible interval otherwise.
  double sum_free = 0.0;
  long n_free = 0;
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad[t];
    if (upper(t)) {
      if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      sum_free += yg;
      ++n_free;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  m.b = -rho;
  m.alpha = alpha;
  m.signs = signs;
  m.kkt_gap = gap;
  m.iterations = iter;
  m.converged = optimal;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0) m.support.push_back(static_cast<std::size_t>(t));
  }
  m.support_x.resize(static_cast<Eigen::Index>(m.support.size()), x.cols());
  m.coef.resize(static_cast<Eigen::Index>(m.support.size()));
  for (std::size_t r = 0; r < m.support.size(); ++r) {
    const auto t = static_cast<Eigen::Index>(m.support[r]);
    m.support_x.row(static_cast<Eigen::Index>(r)) = x.row(t);
    m.coef[static_cast<Eigen::Index>(r)] = alpha[t] * y(t);
  }
  return m;
}

std::vector<int> machine_classes(int num_classes) {
  std::vector<int> out;
  if (num_classes <= 2) {
    out.push_back(1);
  } else {
    for (int c = 0; c < num_classes; ++c) out.push_back(c);
  }
  return out;
}

}  // namespace

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::logistic: return "logistic";
    case ClassifierKind::svm: return "svm";
    case ClassifierKind::constant: return "constant";
  }
  return "?";
}

bool ClassifierModel::converged() const {
  for (const auto& m : logistic) {
    if (!m.converged) return false;
  }
  for (const auto& m : svm) {
    if (!m.converged) return false;
  }
  return true;
}

Vector logistic_gradient(const Matrix& x, std::span<const double> targets, std::span<const double> weights,
                         const Vector& w, double b, double l2) {
  Vector theta(w.size() + 1);
  theta.head(w.size()) = w;
  theta[w.size()] = b;
  return objective_gradient(with_bias(x), theta, targets, weights, l2);
}

ClassifierModel fit_logistic(const Matrix& x, const Labels& y, std::span<const double> sample_weights,
                             int num_classes, const LogisticConfig& cfg) {
  if (!(cfg.l2_strength > 0) || cfg.max_iters <= 0 || !(cfg.tol > 0)) throw ConfigError("logistic config must be positive");
  check_inputs(x, y, sample_weights, num_classes);
  ClassifierModel model;
  model.kind = ClassifierKind::logistic;
  model.num_classes = num_classes;
  const Matrix xa = with_bias(x);
  std::vector<double> t(y.size());
  for (int c : machine_classes(num_classes)) {
    for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] == c ? 1.0 : 0.0;
    model.logistic.push_back(fit_binary_logistic(xa, t, sample_weights, cfg));
  }
  return model;
}

double rbf_gamma_scale(const Matrix& x) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  return var > 0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
}

ClassifierModel fit_svm_rbf(const Matrix& x, const Labels& y, std::span<const double> sample_weights,
                            int num_classes, const SvmConfig& cfg) {
  if (!(cfg.c > 0) || !(cfg.smo_tol > 0) || cfg.max_passes <= 0 || (cfg.gamma && !(*cfg.gamma > 0))) {
    throw ConfigError("svm config must be positive");
  }
  check_inputs(x, y, sample_weights, num_classes);
  if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); })) {
    throw Error("fit_svm_rbf needs at least two classes");
  }
  ClassifierModel model;
  model.kind = ClassifierKind::svm;
  model.num_classes = num_classes;
  model.gamma = cfg.gamma.value_or(rbf_gamma_scale(x));
  const Matrix kernel = rbf_kernel(x, x, model.gamma);
  std::vector<double> box(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) box[i] = cfg.c * sample_weights[i];
  Labels signs(y.size());
  for (int c : machine_classes(num_classes)) {
    for (std::size_t i = 0; i < y.size(); ++i) signs[i] = y[i] == c ? 1 : -1;
    model.svm.push_back(smo_solve(x, kernel, signs, box, cfg));
  }
  return model;
}

Matrix decision_values(const ClassifierModel& model, const Matrix& x) {
  if (model.kind == ClassifierKind::constant) {
    const Eigen::Index cols = model.num_classes <= 2 ? 1 : model.num_classes;
    Matrix out = Matrix::Constant(x.rows(), cols, -1.0);
    if (cols == 1) {
      out.setConstant(model.constant_class == 1 ? 1.0 : -1.0);
    } else {
      out.col(model.constant_class).setOnes();
    }
    return out;
  }
  if (model.kind != ClassifierKind::svm) throw UnsupportedOperation("decision_values requires an SVM model");
  Matrix out(x.rows(), static_cast<Eigen::Index>(model.svm.size()));
  for (std::size_t c = 0; c < model.svm.size(); ++c) {
    const auto& m = model.svm[c];
    if (m.support.empty()) {
      out.col(static_cast<Eigen::Index>(c)).setConstant(m.b);
      continue;
    }
    const Matrix k = rbf_kernel(x, m.support_x, model.gamma);
    out.col(static_cast<Eigen::Index>(c)) = (k * m.coef).array() + m.b;
  }
  return out;
}

Matrix predict_proba(const ClassifierModel& model, const Matrix& x) {
  if (model.kind == ClassifierKind::constant) {
    Matrix out = Matrix::Zero(x.rows(), model.num_classes);
    out.col(model.constant_class).setOnes();
    return out;
  }
  if (model.kind != ClassifierKind::logistic) throw UnsupportedOperation("predict_proba is not available for SVM models");
  if (!model.logistic.empty() && x.cols() != model.logistic.front().w.size()) throw ShapeError("predict_proba: wrong feature count");
  Matrix out(x.rows(), model.num_classes);
  if (model.num_classes <= 2) {
    const auto& m = model.logistic.front();
    const Vector z = (x * m.w).array() + m.b;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double p = sigmoid(z[i]);
      out(i, 1) = p;
      out(i, 0) = 1.0 - p;
    }
    return out;
  }
  for (std::size_t c = 0; c < model.logistic.size(); ++c) {
    const auto& m = model.logistic[c];
    const Vector z = (x * m.w).array() + m.b;
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, static_cast<Eigen::Index>(c)) = sigmoid(z[i]);
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s > 0) {
      out.row(i) /= s;
    } else {
      out.row(i).setConstant(1.0 / static_cast<double>(model.num_classes));
    }
  }
  return out;
}

Labels predict(const ClassifierModel& model, const Matrix& x) {
  Labels out(static_cast<std::size_t>(x.rows()));
  if (model.kind == ClassifierKind::constant) {
    std::fill(out.begin(), out.end(), model.constant_class);
    return out;
  }
  const Matrix scores = model.kind == ClassifierKind::svm ? decision_values(model, x) : predict_proba(model, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (model.kind == ClassifierKind::svm && scores.cols() == 1) {
      out[static_cast<std::size_t>(i)] = scores(i, 0) > 0 ? 1 : 0;
    } else if (scores.cols() == 2) {
      out[static_cast<std::size_t>(i)] = scores(i, 1) > scores(i, 0) ? 1 : 0;
    } else {
      Eigen::Index best = 0;
      scores.row(i).maxCoeff(&best);
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
  }
  return out;
}

std::string model_to_json(const ClassifierModel& model) {
  std::ostringstream o;
  o.precision(17);
  o << "{\"kind\":\"" << to_string(model.kind) << "\",\"num_classes\":" << model.num_classes;
  if (model.kind == ClassifierKind::logistic) {
    o << ",\"machines\":[";
    for (std::size_t c = 0; c < model.logistic.size(); ++c) {
      const auto& m = model.logistic[c];
      o << (c ? "," : "") << "{\"b\":" << m.b << ",\"w\":[";
      for (Eigen::Index j = 0; j < m.w.size(); ++j) o << (j ? "," : "") << m.w[j];
      o << "],\"converged\":" << (m.converged ? "true" : "false") << "}";
    }
    o << "]";
  } else if (model.kind == ClassifierKind::svm) {
    o << ",\"gamma\":" << model.gamma << ",\"machines\":[";
    for (std::size_t c = 0; c < model.svm.size(); ++c) {
      const auto& m = model.svm[c];
      o << (c ? "," : "") << "{\"b\":" << m.b << ",\"support\":[";
      for (std::size_t r = 0; r < m.support.size(); ++r) o << (r ? "," : "") << m.support[r];
      o << "],\"coef\":[";
      for (Eigen::Index r = 0; r < m.coef.size(); ++r) o << (r ? "," : "") << m.coef[r];
      o << "],\"converged\":" << (m.converged ? "true" : "false") << "}";
    }
    o << "]";
  } else {
    o << ",\"class\":" << model.constant_class;
  }
  o << "}";
  return o.str();
}

Trainer::Trainer(ClassifierSpec spec, int num_classes)
    : spec_(std::move(spec)), num_classes_(num_classes), counter_(std::make_shared<std::atomic<long>>(0)) {}

ClassifierModel Trainer::fit(const Matrix& x, const Labels& y) const {
  counter_->fetch_add(1, std::memory_order_relaxed);
  std::vector<double> weights(y.size(), 1.0);
  if (spec_.class_weighted) {
    const auto cw = present_class_weights(y, num_classes_);
    for (std::size_t i = 0; i < y.size(); ++i) weights[i] = cw[static_cast<std::size_t>(y[i])];
  }
  if (spec_.kind == ClassifierKind::svm) {
    const bool single = std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); });
    if (single && !y.empty()) {
      ClassifierModel model;
      model.kind = ClassifierKind::constant;
      model.num_classes = num_classes_;
      model.constant_class = y.front();
      return model;
    }
    return fit_svm_rbf(x, y, weights, num_classes_, spec_.svm);
  }
  return fit_logistic(x, y, weights, num_classes_, spec_.logistic);
}

}  // namespace lal
