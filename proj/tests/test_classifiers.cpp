#include <random>

#include "doctest.h"
#include "lal/classifiers.hpp"
#include "reference.hpp"

using namespace lal;

namespace {

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

double accuracy(const Labels& a, const Labels& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

// Decision value recomputed from the dual variables and the training set.
double dual_decision(const SvmMachine& m, const Matrix& x, double gamma, const Eigen::RowVectorXd& point) {
  double f = m.b;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    f += m.alpha[i] * m.signs[static_cast<std::size_t>(i)] * std::exp(-gamma * (x.row(i) - point).squaredNorm());
  }
  return f;
}

}  // namespace

TEST_SUITE("classifiers") {
  TEST_CASE("logistic separates two points") {
    Matrix x(2, 1);
    x << -1, 1;
    const Labels y{0, 1};
    const auto m = fit_logistic(x, y, ones(2), 2);
    CHECK(predict(m, x) == y);
    CHECK(m.converged());
  }

  TEST_CASE("a weight of two equals a duplicated point") {
    std::mt19937_64 gen(1);
    const auto s = ref::blobs(gen, 30, 3);
    auto w = ones(30);
    w[4] = 2.0;
    const auto weighted = fit_logistic(s.x, s.y, w, 2);
    Matrix xd(31, 3);
    xd.topRows(30) = s.x;
    xd.row(30) = s.x.row(4);
    Labels yd = s.y;
    yd.push_back(s.y[4]);
    const auto dup = fit_logistic(xd, yd, ones(31), 2);
    CHECK((weighted.logistic[0].w - dup.logistic[0].w).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(weighted.logistic[0].b - dup.logistic[0].b) <= 1e-6);
  }

  TEST_CASE("doubling weights and l2 together leaves the optimum unchanged") {
    std::mt19937_64 gen(2);
    const auto s = ref::blobs(gen, 40, 4, 0.3, 0.6);
    const auto a = fit_logistic(s.x, s.y, std::vector<double>(40, 2.0), 2, {2.0, 100, 1e-4});
    const auto b = fit_logistic(s.x, s.y, ones(40), 2, {1.0, 100, 1e-4});
    CHECK((a.logistic[0].w - b.logistic[0].w).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(a.logistic[0].b - b.logistic[0].b) <= 1e-6);
  }

  TEST_CASE("logistic gradient vanishes at the returned optimum") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 10; ++trial) {
      const auto s = ref::blobs(gen, 25 + 5 * trial, 3, 0.2, 0.7);
      std::vector<double> w(s.y.size());
      std::uniform_real_distribution<double> u(0.5, 3.0);
      for (auto& v : w) v = u(gen);
      const LogisticConfig cfg{1.0, 100, 1e-4};
      const auto m = fit_logistic(s.x, s.y, w, 2, cfg);
      std::vector<double> t(s.y.begin(), s.y.end());
      const Vector g = logistic_gradient(s.x, t, w, m.logistic[0].w, m.logistic[0].b, cfg.l2_strength);
      CHECK(g.cwiseAbs().maxCoeff() <= 10 * cfg.tol);
    }
  }

  TEST_CASE("single-class logistic input predicts that class") {
    std::mt19937_64 gen(4);
    const Matrix x = ref::random_matrix(gen, 10, 2);
    const auto m = fit_logistic(x, Labels(10, 1), ones(10), 2);
    const Matrix probe = ref::random_matrix(gen, 50, 2, -3, 3);
    CHECK(predict_proba(m, probe).col(1).minCoeff() >= 0.99);
  }

  TEST_CASE("predict_proba basics") {
    ClassifierModel zero;
    zero.kind = ClassifierKind::logistic;
    zero.num_classes = 2;
    zero.logistic.push_back({Vector::Zero(3), 0.0, 0, 0.0, true});
    std::mt19937_64 gen(5);
    const Matrix x = ref::random_matrix(gen, 8, 3);
    const Matrix p = predict_proba(zero, x);
    CHECK(p.cwiseAbs().isApproxToConstant(0.5));

    ClassifierModel m = zero;
    m.logistic[0].w = Vector::Constant(3, 1.5);
    m.logistic[0].b = -0.2;
    const Matrix q = predict_proba(m, x);
    const Vector score = x * m.logistic[0].w;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.rows(); ++j) {
        if (score[i] > score[j]) CHECK(q(i, 1) > q(j, 1));
      }
    }

    // three classes, one-vs-rest
    Labels y3;
    Matrix x3 = ref::random_matrix(gen, 60, 2);
    for (Eigen::Index i = 0; i < 60; ++i) y3.push_back(x3(i, 0) < -0.3 ? 0 : x3(i, 0) < 0.3 ? 1 : 2);
    const auto m3 = fit_logistic(x3, y3, ones(60), 3);
    const Matrix p3 = predict_proba(m3, ref::random_matrix(gen, 30, 2));
    CHECK(p3.cols() == 3);
    CHECK((p3.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
    CHECK(accuracy(predict(m3, x3), y3) > 0.8);
  }

  TEST_CASE("unsupported operations and bad input") {
    Matrix x(4, 2);
    x << -1, -1, -1, 1, 1, -1, 1, 1;
    const Labels y{0, 1, 1, 0};
    const auto svm = fit_svm_rbf(x, y, ones(4), 2);
    CHECK_THROWS_AS(predict_proba(svm, x), UnsupportedOperation);
    const auto lr = fit_logistic(x, y, ones(4), 2);
    CHECK_THROWS_AS(decision_values(lr, x), UnsupportedOperation);
    CHECK_THROWS_AS(fit_svm_rbf(x, Labels(4, 0), ones(4), 2), Error);
    Matrix bad = x;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(fit_logistic(bad, y, ones(4), 2), Error);
    CHECK_THROWS_AS(fit_svm_rbf(bad, y, ones(4), 2), Error);
  }

  TEST_CASE("svm fits XOR") {
    Matrix x(4, 2);
    x << -1, -1, -1, 1, 1, -1, 1, 1;
    const Labels y{0, 1, 1, 0};
    const auto m = fit_svm_rbf(x, y, ones(4), 2, {10.0, 1.0, 1e-3, 200});
    CHECK(predict(m, x) == y);
  }

  TEST_CASE("svm decision signs, KKT conditions and feasibility") {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 8; ++trial) {
      const auto s = ref::blobs(gen, 40, 2, 0.5, trial < 4 ? 0.2 : 0.6);
      std::vector<double> w(40);
      std::uniform_real_distribution<double> u(0.5, 2.0);
      for (auto& v : w) v = u(gen);
      const SvmConfig cfg{1.0, std::nullopt, 1e-3, 200};
      const auto model = fit_svm_rbf(s.x, s.y, w, 2, cfg);
      REQUIRE(model.svm.size() == 1);
      const auto& m = model.svm[0];
      CHECK(m.converged);
      const Matrix f = decision_values(model, s.x);
      const Labels pred = predict(model, s.x);
      double sum_ay = 0.0;
      for (Eigen::Index i = 0; i < s.x.rows(); ++i) {
        CHECK((f(i, 0) > 0) == (pred[static_cast<std::size_t>(i)] == 1));
        const double box = cfg.c * w[static_cast<std::size_t>(i)];
        const double a = m.alpha[i];
        CHECK(a >= 0.0);
        CHECK(a <= box + 1e-12);
        sum_ay += a * m.signs[static_cast<std::size_t>(i)];
        const double yf = m.signs[static_cast<std::size_t>(i)] * dual_decision(m, s.x, model.gamma, s.x.row(i));
        CHECK(yf == doctest::Approx(m.signs[static_cast<std::size_t>(i)] * f(i, 0)).epsilon(1e-9));
        if (a <= 0.0) {
          CHECK(yf >= 1.0 - cfg.smo_tol);
        } else if (a >= box) {
          CHECK(yf <= 1.0 + cfg.smo_tol);
        } else {
          CHECK(std::abs(yf - 1.0) <= cfg.smo_tol);
        }
      }
      CHECK(std::abs(sum_ay) <= 1e-6);
      if (trial < 4) CHECK(accuracy(pred, s.y) == 1.0);
    }
  }

  TEST_CASE("svm decision value is continuous") {
    std::mt19937_64 gen(7);
    const auto s = ref::blobs(gen, 30, 3, 0.4, 0.5);
    const auto model = fit_svm_rbf(s.x, s.y, ones(30), 2);
    const Matrix probe = ref::random_matrix(gen, 20, 3);
    Matrix moved = probe.array() + 1e-8;
    CHECK((decision_values(model, probe) - decision_values(model, moved)).cwiseAbs().maxCoeff() <= 1e-4);
  }

  TEST_CASE("multiclass svm gives one column per class") {
    std::mt19937_64 gen(8);
    Matrix x = ref::random_matrix(gen, 45, 2);
    Labels y;
    for (Eigen::Index i = 0; i < 45; ++i) y.push_back(x(i, 1) < -0.33 ? 0 : x(i, 1) < 0.33 ? 1 : 2);
    const auto m = fit_svm_rbf(x, y, ones(45), 3, {10.0, std::nullopt, 1e-3, 200});
    const Matrix f = decision_values(m, x);
    CHECK(f.cols() == 3);
    const Labels pred = predict(m, x);
    for (Eigen::Index i = 0; i < 45; ++i) {
      Eigen::Index arg;
      f.row(i).maxCoeff(&arg);
      CHECK(pred[static_cast<std::size_t>(i)] == arg);
    }
    CHECK(accuracy(pred, y) > 0.9);
  }

  TEST_CASE("gamma scale uses the variance of all entries") {
    Matrix x(2, 2);
    x << 0, 0, 1, 1;
    CHECK(rbf_gamma_scale(x) == doctest::Approx(1.0 / (2 * 0.25)));
  }

  TEST_CASE("fits are bit-for-bit deterministic") {
    std::mt19937_64 gen(9);
    const auto s = ref::blobs(gen, 50, 5, 0.2, 0.8);
    const auto a = fit_logistic(s.x, s.y, ones(50), 2);
    const auto b = fit_logistic(s.x, s.y, ones(50), 2);
    CHECK(a.logistic[0].w == b.logistic[0].w);
    CHECK(a.logistic[0].b == b.logistic[0].b);
    const auto c = fit_svm_rbf(s.x, s.y, ones(50), 2);
    const auto d = fit_svm_rbf(s.x, s.y, ones(50), 2);
    CHECK(c.svm[0].alpha == d.svm[0].alpha);
    CHECK(c.svm[0].b == d.svm[0].b);
  }

  TEST_CASE("trainer counts fits and applies class weights") {
    std::mt19937_64 gen(10);
    auto s = ref::blobs(gen, 40, 2, 0.1, 0.6);
    for (std::size_t i = 0; i < 40; ++i) s.y[i] = i < 34 ? 0 : 1;
    ClassifierSpec spec;
    const Trainer plain(spec, 2);
    spec.class_weighted = true;
    const Trainer weighted(spec, 2);
    const Trainer copy = weighted;
    const auto mw = weighted.fit(s);
    copy.fit(s);
    CHECK(weighted.fit_count() == 2);
    CHECK(plain.fit_count() == 0);
    const auto cw = ref::weights_from_counts(s.y, 2);
    std::vector<double> sw;
    for (int v : s.y) sw.push_back(cw[static_cast<std::size_t>(v)]);
    const auto direct = fit_logistic(s.x, s.y, sw, 2);
    CHECK(mw.logistic[0].w == direct.logistic[0].w);
    weighted.reset_count();
    CHECK(copy.fit_count() == 0);

    ClassifierSpec svm_spec;
    svm_spec.kind = ClassifierKind::svm;
    const auto constant = Trainer(svm_spec, 2).fit(s.x, Labels(40, 1));
    CHECK(constant.kind == ClassifierKind::constant);
    CHECK(predict(constant, s.x) == Labels(40, 1));
  }
}
