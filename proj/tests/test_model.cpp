#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mrm/model.hpp"

using namespace mrm;

namespace {

ModelParams params(int m, double gamma2)
{
    ModelParams p;
    p.m = m;
    p.gamma2 = gamma2;
    return p;
}

// Direct scan of m psi(2) < n (m - psi'(1)) with psi(2) = gamma2 written out.
int scan_steps(int m, double gamma2)
{
    if (gamma2 / 2 < 1)
        return 1;
    int n = 1;
    while (!(m * gamma2 < n * (m - gamma2 / 2)))
        ++n;
    return n;
}

}  // namespace

TEST_SUITE("model")
{
    TEST_CASE("exponents at gamma2 = 1")
    {
        const ModelParams p = params(2, 1.0);
        CHECK(psi(p, 1.0) == 0.0);
        CHECK(psi(p, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(zeta(p, 2.0) == doctest::Approx(3.0).epsilon(1e-15));
        CHECK(zeta(p, 0.5) == doctest::Approx(1.125).epsilon(1e-15));
        CHECK(zeta(p, 1.0) == 2.0);
        CHECK(psi_prime_one(p) == 0.5);
    }

    TEST_CASE("templated forms agree in long double")
    {
        const long double z = zeta<long double>(2, 1.0L, 0.5L);
        CHECK(std::abs(z - 1.125L) < 1e-18L);
    }

    TEST_CASE("zeta(1) = m and zeta is concave")
    {
        std::mt19937_64 gen(7);
        std::uniform_real_distribution<double> g2(0.0, 3.9), qd(-2.0, 4.0);
        for (int k = 0; k < 200; ++k) {
            const ModelParams p = params(1 + k % 2, g2(gen) * (1 + k % 2) / 2);
            CHECK(zeta(p, 1.0) == doctest::Approx(p.m).epsilon(1e-14));
            const double q = qd(gen), h = 0.1;
            CHECK(zeta(p, q + h) + zeta(p, q - h) - 2 * zeta(p, q) <= 1e-12);
        }
    }

    TEST_CASE("non-degeneracy boundary")
    {
        CHECK(is_non_degenerate(params(2, 3.99)));
        CHECK_FALSE(is_non_degenerate(params(2, 4.0)));
        CHECK(is_non_degenerate(params(1, 1.99)));
        CHECK_FALSE(is_non_degenerate(params(1, 2.0)));
        CHECK(is_non_degenerate(params(2, 0.0)));
    }

    TEST_CASE("min_steps table")
    {
        CHECK(min_steps(params(2, 1.0)) == 1);
        CHECK(min_steps(params(2, 2.5)) == 7);
        CHECK(min_steps(params(2, 3.0)) == 13);
    }

    TEST_CASE("min_steps matches an independent scan")
    {
        for (int m : {1, 2})
            for (double g2 = 0.0; g2 < 2.0 * m - 0.01; g2 += 0.013)
                CHECK(min_steps(params(m, g2)) == scan_steps(m, g2));
    }

    TEST_CASE("omega_lambda moments")
    {
        const ModelParams p = params(2, 1.0);
        CHECK(omega_lambda_moments(p, 0.5, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(omega_lambda_moments(p, 0.5, 1.0) == 1.0);
        CHECK(omega_lambda_moments(p, 1.0, 3.0) == 1.0);
        CHECK_THROWS(omega_lambda_moments(p, 0.0, 2.0));
        CHECK_THROWS(omega_lambda_moments(p, 1.5, 2.0));
    }

    TEST_CASE("exponent table rows")
    {
        const ExponentTable t = exponent_table(params(2, 1.0), {0.5, 2.0});
        REQUIRE(t.size() == 2);
        CHECK(t[1].psi == doctest::Approx(1.0));
        CHECK(t[1].zeta == doctest::Approx(3.0));
    }

    TEST_CASE("ball volume")
    {
        CHECK(ball_volume(1, 1.5) == 3.0);
        CHECK(ball_volume(2, 1.0) == doctest::Approx(std::numbers::pi));
    }

    TEST_CASE("validation")
    {
        CHECK_NOTHROW(params(2, 1.0).validate());
        CHECK_THROWS(params(3, 1.0).validate());
        CHECK_THROWS(params(2, -0.1).validate());
        CHECK_THROWS(params(2, 4.0).validate());
        ModelParams p = params(2, 1.0);
        p.T = 0.0;
        CHECK_THROWS(p.validate());
        p.T = 1.0;
        p.R = -1.0;
        CHECK_THROWS(p.validate());
    }

    TEST_CASE("header round trip")
    {
        ModelParams p = params(1, 0.1 + 0.2);
        p.T = 1.0 / 3.0;
        p.R = 2.5;
        p.seed = 18446744073709551557ULL;
        CHECK(params_from_header(to_header(p)) == p);
        CHECK(params_from_header("gamma2=0.5 unknown=1").gamma2 == 0.5);
    }
}
