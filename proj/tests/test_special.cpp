#include <doctest.h>

#include <cmath>
#include <initializer_list>

#include "physmg/special.hpp"

using namespace physmg::special;

TEST_CASE("norm_cdf matches tabulated values") {
    CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(norm_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(norm_cdf(-1.959963984540054) == doctest::Approx(0.025).epsilon(1e-10));
    CHECK(norm_cdf(3.0) == doctest::Approx(0.9986501019683699).epsilon(1e-12));
}

TEST_CASE("norm_ppf inverts norm_cdf") {
    for (double p : {1e-6, 1e-3, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999, 1 - 1e-6}) {
        double x = norm_ppf(p);
        CHECK(norm_cdf(x) == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK(norm_ppf(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(norm_ppf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
}

TEST_CASE("betainc endpoints and symmetry") {
    CHECK(betainc(2.0, 3.0, 0.0) == 0.0);
    CHECK(betainc(2.0, 3.0, 1.0) == 1.0);
    // I_x(a,b) = 1 - I_{1-x}(b,a)
    for (double x : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        CHECK(betainc(2.5, 4.0, x) ==
              doctest::Approx(1.0 - betainc(4.0, 2.5, 1.0 - x)).epsilon(1e-12));
    }
    // I_x(1,1) = x (uniform)
    CHECK(betainc(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
    // I_x(1,b) = 1-(1-x)^b by hand
    CHECK(betainc(1.0, 3.0, 0.25) ==
          doctest::Approx(1.0 - std::pow(0.75, 3)).epsilon(1e-12));
}

TEST_CASE("student_t_sf closed forms for small degrees of freedom") {
    // df=1: sf(t) = 1/2 - atan(t)/pi
    for (double t : {0.0, 0.5, 1.0, 3.0, 10.0}) {
        CHECK(student_t_sf(t, 1.0) ==
              doctest::Approx(0.5 - std::atan(t) / M_PI).epsilon(1e-12));
    }
    // df=2: sf(t) = (1 - t/sqrt(2+t*t))/2
    for (double t : {0.0, 0.7, 2.0, 3.4641016151377544, 8.0}) {
        CHECK(student_t_sf(t, 2.0) ==
              doctest::Approx(0.5 * (1.0 - t / std::sqrt(2.0 + t * t)))
                  .epsilon(1e-12));
    }
}

TEST_CASE("student_t_sf limits toward the normal tail") {
    CHECK(student_t_sf(1.96, 1e6) == doctest::Approx(1.0 - norm_cdf(1.96)).epsilon(1e-4));
}

TEST_CASE("student_t_sf is symmetric about zero") {
    for (double nu : {1.0, 2.0, 5.0, 30.0}) {
        CHECK(student_t_sf(-1.3, nu) ==
              doctest::Approx(1.0 - student_t_sf(1.3, nu)).epsilon(1e-12));
        CHECK(student_t_sf(0.0, nu) == doctest::Approx(0.5).epsilon(1e-12));
    }
}
