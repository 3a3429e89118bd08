#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lal/types.hpp"

namespace lal {

struct LogisticConfig {
  double l2_strength = 1.0;
  int max_iters = 100;
  double tol = 1e-4;
};

struct SvmConfig {
  double c = 1.0;
  /// Unset selects gamma = 1 / (K * Var(X)).
  std::optional<double> gamma;
  double smo_tol = 1e-3;
  int max_passes = 200;
};

enum class ClassifierKind { logistic, svm, constant };

std::string to_string(ClassifierKind kind);

struct LogisticMachine {
  Vector w;
  double b = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;  // inf-norm of the objective gradient at return
  bool converged = false;
};

struct SvmMachine {
  IndexList support;   // rows of the training matrix with alpha > 0
  Matrix support_x;
  Vector coef;         // alpha_i * y_i for each support row
  Vector alpha;        // full dual vector, one entry per training row
  Labels signs;        // +1 / -1 per training row
  double b = 0.0;
  double kkt_gap = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// A fitted predictor. Binary problems use a single machine for class 1;
/// C > 2 uses one-vs-rest machines, one per class.
struct ClassifierModel {
  ClassifierKind kind = ClassifierKind::logistic;
  int num_classes = 2;
  std::vector<LogisticMachine> logistic;
  std::vector<SvmMachine> svm;
  double gamma = 0.0;
  int constant_class = 0;

  bool converged() const;
};

ClassifierModel fit_logistic(const Matrix& x, const Labels& y, std::span<const double> sample_weights,
                             int num_classes, const LogisticConfig& cfg = {});

ClassifierModel fit_svm_rbf(const Matrix& x, const Labels& y, std::span<const double> sample_weights,
                            int num_classes, const SvmConfig& cfg = {});

/// Rows sum to 1. Throws UnsupportedOperation for SVM models.
Matrix predict_proba(const ClassifierModel& model, const Matrix& x);

/// SVM margins: n x 1 for binary, n x C one-vs-rest otherwise. Throws
/// UnsupportedOperation for non-SVM models.
Matrix decision_values(const ClassifierModel& model, const Matrix& x);

Labels predict(const ClassifierModel& model, const Matrix& x);

double rbf_gamma_scale(const Matrix& x);

/// Objective gradient of one binary logistic problem (labels in {0,1}); used by
/// tests to check optimality.
Vector logistic_gradient(const Matrix& x, std::span<const double> targets, std::span<const double> weights,
                         const Vector& w, double b, double l2);

/// Debug dump; not a stable format.
std::string model_to_json(const ClassifierModel& model);

/// Which classifier to fit and how to weight training samples.
struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::logistic;
  LogisticConfig logistic;
  SvmConfig svm;
  /// Weight training samples by the class weights of the training labels.
  bool class_weighted = false;
};

/// Fits models from a spec and counts fits. Copies share the counter.
class Trainer {
 public:
  Trainer(ClassifierSpec spec, int num_classes);

  ClassifierModel fit(const Matrix& x, const Labels& y) const;
  ClassifierModel fit(const LabeledSet& set) const { return fit(set.x, set.y); }

  long fit_count() const { return counter_->load(); }
  void reset_count() const { counter_->store(0); }
  const ClassifierSpec& spec() const { return spec_; }
  int num_classes() const { return num_classes_; }
  bool probabilistic() const { return spec_.kind == ClassifierKind::logistic; }

 private:
  ClassifierSpec spec_;
  int num_classes_;
  std::shared_ptr<std::atomic<long>> counter_;
};

}  // namespace lal
