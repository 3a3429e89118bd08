#include <random>

#include "doctest.h"
#include "lal/metrics.hpp"
#include "reference.hpp"

using namespace lal;

TEST_SUITE("metrics") {
  TEST_CASE("weighted accuracy examples") {
    const Labels truth{0, 1, 0, 1};
    CHECK(weighted_accuracy(truth, truth, present_class_weights(truth, 2)) == 1.0);

    Labels skew(90, 0);
    skew.insert(skew.end(), 10, 1);
    const Labels pred(100, 0);
    CHECK(weighted_accuracy(pred, skew, present_class_weights(skew, 2)) == doctest::Approx(0.5));
  }

  TEST_CASE("weighted accuracy on a balanced set is plain accuracy") {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 100; ++trial) {
      const int c = 2 + trial % 4;
      const std::size_t per = 5 + gen() % 20;
      Labels truth, pred;
      for (int k = 0; k < c; ++k) truth.insert(truth.end(), per, k);
      std::size_t hit = 0;
      for (int v : truth) {
        const int p = gen() % 3 == 0 ? static_cast<int>(gen() % c) : v;
        pred.push_back(p);
        hit += p == v;
      }
      const double plain = static_cast<double>(hit) / static_cast<double>(truth.size());
      CHECK(std::abs(weighted_accuracy(pred, truth, present_class_weights(truth, c)) - plain) <= 1e-12);
    }
  }

  TEST_CASE("weighted accuracy agrees with the reference and stays in [0, 1]") {
    std::mt19937_64 gen(2);
    for (int trial = 0; trial < 100; ++trial) {
      const int c = 2 + trial % 3;
      Labels truth, pred;
      for (int i = 0; i < 50; ++i) {
        truth.push_back(i < c ? i : static_cast<int>(gen() % c));
        pred.push_back(static_cast<int>(gen() % c));
      }
      const double w = weighted_accuracy(pred, truth, present_class_weights(truth, c));
      CHECK(w == ref::weighted_accuracy(pred, truth, c));
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
    }
  }

  TEST_CASE("weighted accuracy through a model uses the test-set weights") {
    ClassifierModel m;
    m.kind = ClassifierKind::constant;
    m.num_classes = 2;
    m.constant_class = 0;
    Dataset test;
    test.features = Matrix::Zero(100, 1);
    test.labels.assign(90, 0);
    test.labels.insert(test.labels.end(), 10, 1);
    test.num_classes = 2;
    test.class_weights = {1.0, 1.0};  // ignored: weights come from the labels
    CHECK(weighted_accuracy(m, test) == doctest::Approx(0.5));
  }

  TEST_CASE("auac") {
    CHECK(auac(std::vector<double>(11, 1.0)) == 10.0);
    std::vector<double> linear;
    for (int t = 0; t <= 10; ++t) linear.push_back(t / 10.0);
    CHECK(auac(linear) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(auac(std::vector<double>(11, 0.865)) == doctest::Approx(8.65).epsilon(1e-12));
    AcquisitionTrace trace;
    trace.scores = linear;
    CHECK(auac(trace) == auac(linear));
  }

  TEST_CASE("auac is linear and symmetric under reversal of palindromes") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> a(11), b(11), mix(11);
      for (int t = 0; t < 11; ++t) {
        a[t] = u(gen);
        b[t] = u(gen);
        mix[t] = 0.3 * a[t] + 0.7 * b[t];
      }
      CHECK(auac(mix) == doctest::Approx(0.3 * auac(a) + 0.7 * auac(b)).epsilon(1e-12));
      CHECK(auac(a) == doctest::Approx(ref::trapezoid(a)).epsilon(1e-12));
      std::vector<double> pal(a.begin(), a.begin() + 6);
      pal.insert(pal.end(), a.rbegin() + 5, a.rend());
      std::vector<double> rev(pal.rbegin(), pal.rend());
      CHECK(auac(rev) == doctest::Approx(auac(pal)).epsilon(1e-12));
    }
  }

  TEST_CASE("precision and recall") {
    const Labels truth{1, 1, 0, 0};
    CHECK(precision_recall(truth, truth, 1).precision == 1.0);
    CHECK(precision_recall(truth, truth, 1).recall == 1.0);
    const auto all_pos = precision_recall(Labels(4, 1), truth, 1);
    CHECK(all_pos.precision == 0.5);
    CHECK(all_pos.recall == 1.0);
    Labels t, p;
    for (int i = 0; i < 7; ++i) t.push_back(1), p.push_back(1);
    for (int i = 0; i < 3; ++i) t.push_back(0), p.push_back(1);
    t.push_back(1), p.push_back(0);
    const auto pr = precision_recall(p, t, 1);
    CHECK(pr.precision == doctest::Approx(0.7));
    CHECK(pr.recall == doctest::Approx(0.875));
    const auto none = precision_recall(Labels(4, 0), truth, 1);
    CHECK(none.no_positive_predictions);
    CHECK(none.precision == 0.0);
  }

  TEST_CASE("rank aggregation examples") {
    const auto one = rank_strategies({{"d", {{"a", 9.1}, {"b", 8.6}, {"c", 8.7}}}});
    CHECK(one.at("a").mean == 1.0);
    CHECK(one.at("b").mean == 3.0);
    CHECK(one.at("c").mean == 2.0);
    const auto two = rank_strategies({{"d1", {{"a", 3.0}, {"b", 2.0}}}, {"d2", {{"a", 5.0}, {"b", 1.0}}}});
    CHECK(two.at("a").stdev == 0.0);
    CHECK(two.at("b").stdev == 0.0);
    const auto tie = rank_strategies({{"d", {{"a", 1.0}, {"b", 1.0}, {"c", 0.5}}}});
    CHECK(tie.at("a").mean == 1.5);
    CHECK(tie.at("b").mean == 1.5);
    CHECK_THROWS_AS(rank_strategies({{"d1", {{"a", 1.0}}}, {"d2", {{"b", 1.0}}}}), Error);
  }

  TEST_CASE("ranks are conserved per dataset") {
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + gen() % 9;
      std::vector<double> v(n);
      for (auto& x : v) x = static_cast<double>(gen() % 5);  // plenty of ties
      const auto r = average_ranks(v);
      const double total = std::accumulate(r.begin(), r.end(), 0.0);
      CHECK(total == static_cast<double>(n * (n + 1)) / 2.0);
    }
  }

  TEST_CASE("mean and population stdev") {
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(mean(v) == 2.5);
    CHECK(stdev(v) == doctest::Approx(std::sqrt(1.25)));
  }
}
