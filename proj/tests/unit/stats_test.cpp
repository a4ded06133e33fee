#include <cmath>
#include <vector>

#include "doctest.h"
#include "dosefind/stats.hpp"

using namespace dosefind;

TEST_CASE("normal quantile hits tabled values and inverts the cdf") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963985).epsilon(1e-8));
  for (double p : {0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  }
}

TEST_CASE("one-df chi-square quantile matches the squared normal quantile") {
  CHECK(chi2_quantile_1(0.95) == doctest::Approx(3.841458821).epsilon(1e-8));
  for (double q : {0.5, 0.8, 0.9, 0.95, 0.99}) {
    double z = normal_quantile(0.5 * (1.0 + q));
    CHECK(chi2_quantile_1(q) == doctest::Approx(z * z).epsilon(1e-9));
  }
}

TEST_CASE("student t distribution matches tabled quantiles") {
  CHECK(student_t_quantile(0.975, 10) == doctest::Approx(2.228138852).epsilon(1e-7));
  CHECK(student_t_quantile(0.95, 5) == doctest::Approx(2.015048373).epsilon(1e-7));
  CHECK(student_t_quantile(0.975, 100000) ==
        doctest::Approx(normal_quantile(0.975)).epsilon(1e-4));
  CHECK(student_t_cdf(0.0, 7) == doctest::Approx(0.5).epsilon(1e-12));
  for (double x : {0.3, 1.1, 2.7}) {
    CHECK(student_t_cdf(x, 9) + student_t_cdf(-x, 9) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(student_t_cdf(student_t_quantile(0.9, 13), 13) ==
          doctest::Approx(0.9).epsilon(1e-9));
  }
}

TEST_CASE("order statistic quantile takes the ceil(qB)-th smallest value") {
  std::vector<double> v = {10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  CHECK(order_stat_quantile(v, 0.25) == 3.0);  // ceil(2.5) = 3rd smallest
  CHECK(order_stat_quantile(v, 0.5) == 5.0);   // ceil(5.0) = 5th smallest
  CHECK(order_stat_quantile(v, 0.975) == 10.0);
  CHECK(order_stat_quantile(v, 0.025) == 1.0);
  CHECK(order_stat_quantile(v, 1.0) == 10.0);
}

TEST_CASE("summary helpers agree with hand results") {
  std::vector<double> v = {1, 2, 3, 4, 5};
  CHECK(mean_of(v) == doctest::Approx(3.0));
  CHECK(median_of(v) == doctest::Approx(3.0));
  CHECK(iqr_of(v) == doctest::Approx(2.0));  // type-7 quartiles 2 and 4
  std::vector<double> w = {4, 1, 3, 2};
  CHECK(median_of(w) == doctest::Approx(2.5));
  CHECK(quantile_type7(w, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_type7(w, 0.0) == doctest::Approx(1.0));
  CHECK(quantile_type7(w, 1.0) == doctest::Approx(4.0));
}

TEST_CASE("incomplete beta is a proper cdf in x") {
  CHECK(incomplete_beta(2.0, 3.0, 0.0) == doctest::Approx(0.0));
  CHECK(incomplete_beta(2.0, 3.0, 1.0) == doctest::Approx(1.0));
  // I_x(1,1) is the uniform cdf.
  for (double x : {0.1, 0.4, 0.9}) {
    CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-10));
  }
  // Symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
  CHECK(incomplete_beta(2.5, 4.0, 0.3) ==
        doctest::Approx(1.0 - incomplete_beta(4.0, 2.5, 0.7)).epsilon(1e-10));
}
