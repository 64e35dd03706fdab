#include <doctest.h>

#include <cmath>

#include "mrm/chaos.hpp"

using namespace mrm;

namespace {

ModelParams params(int m, double gamma2, double R = 1.0)
{
    ModelParams p;
    p.m = m;
    p.gamma2 = gamma2;
    p.R = R;
    return p;
}

// (2/N^2) sum_{k=1}^{N-1} (N-k) (k/N)^{-alpha}: the diagonal-free energy of N
// equal atoms at the cell midpoints of [0,1], summed by lag.
double uniform_energy_by_lag(int N, double alpha)
{
    double s = 0.0;
    for (int k = 1; k < N; ++k)
        s += (N - k) * std::pow(double(k) / N, -alpha);
    return 2.0 * s / (double(N) * N);
}

DiscreteMeasure uniform_atoms(int N)
{
    DiscreteMeasure mu;
    mu.atoms.resize(1, N);
    for (int i = 0; i < N; ++i)
        mu.atoms(0, i) = (i + 0.5) / N;
    mu.weights = Eigen::VectorXd::Constant(N, 1.0 / N);
    return mu;
}

}  // namespace

TEST_SUITE("chaos")
{
    TEST_CASE("build_measure weights are exp(field) times the cell volume")
    {
        const FieldSlice f = sample_field(params(2, 1.0), 16, 0.0, 4);
        const DiscreteMeasure mu = build_measure(f);
        const double cell = std::pow(2.0 / 16, 2);
        REQUIRE(mu.size() == 256);
        CHECK(mu.is_full_grid());
        for (Index i = 0; i < mu.size(); i += 17)
            CHECK(mu.weights(i) == doctest::Approx(std::exp(f.values(i)) * cell).epsilon(1e-15));
        CHECK(mu.atoms.col(0)(0) == doctest::Approx(-1.0 + 1.0 / 16));
    }

    TEST_CASE("gamma2 = 0 gives Lebesgue on the grid")
    {
        const DiscreteMeasure mu = build_measure(sample_field(params(2, 0.0), 32, 0.0, 0));
        CHECK(mu.total_mass() == doctest::Approx(4.0).epsilon(1e-14));
        CHECK(centered_box_mass(mu, 0.25) == doctest::Approx(0.25).epsilon(1e-14));
    }

    TEST_CASE("one-layer composition reproduces build_measure exactly")
    {
        const ModelParams p = params(2, 1.3);
        const auto layers = compose_chaos(p, 1, 32, 5);
        const DiscreteMeasure direct = build_measure(sample_field(p, 32, 0.0, 5));
        REQUIRE(layers.size() == 2);
        CHECK((layers[1].weights.array() == direct.weights.array()).all());
        CHECK(layers[0].weights.isConstant(std::pow(2.0 / 32, 2)));
    }

    TEST_CASE("composed layers multiply independent factors")
    {
        const ModelParams p = params(2, 1.0);
        const auto layers = compose_chaos(p, 3, 16, 2);
        REQUIRE(layers.size() == 4);
        const auto sampler = FieldSampler::shared(p.with_gamma2(p.gamma2 / 3), 16);
        const Eigen::ArrayXd f3 = sampler->sample(2, 2).values;
        const Eigen::ArrayXd ratio = layers[3].weights.array() / layers[2].weights.array();
        CHECK((ratio - f3.exp()).abs().maxCoeff() < 1e-12);
        CHECK(layers[3].meta.layers == 3);
    }

    TEST_CASE("restrict_to_ball keeps centers strictly inside")
    {
        const Grid g{2, 20, 1.0};
        const DiscreteMeasure ball = lebesgue_ball(g);
        Index count = 0;
        for (Index i = 0; i < g.size(); ++i)
            count += g.center(i).norm() < 1.0;
        CHECK(ball.size() == count);
        CHECK(ball.total_mass() == doctest::Approx(count * 0.01));
        CHECK((ball.atoms.colwise().norm().array() < 1.0).all());
        CHECK_FALSE(ball.is_full_grid());
    }

    TEST_CASE("centered box mass needs whole cells")
    {
        const DiscreteMeasure mu = build_measure(sample_field(params(2, 0.0), 16, 0.0, 0));
        CHECK_THROWS(centered_box_mass(mu, 0.1));
        CHECK_THROWS(centered_box_mass(mu, 0.0));
        CHECK(centered_box_mass(mu, 1.0) == doctest::Approx(4.0));
    }

    TEST_CASE("normalized")
    {
        DiscreteMeasure mu = uniform_atoms(4);
        mu.weights *= 3.0;
        CHECK(mu.normalized().total_mass() == doctest::Approx(1.0));
        mu.weights.setZero();
        CHECK_THROWS(mu.normalized());
    }

    TEST_CASE("estimate_zeta is exact at gamma2 = 0")
    {
        for (int m : {1, 2}) {
            ScalingOptions o;
            o.grid_n = 64;
            o.jackknife_groups = 2;
            const ScalingReport rep = estimate_zeta(params(m, 0.0), {0.5, 1.0, 2.0},
                                                    {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2}, 4, o);
            for (std::size_t k = 0; k < rep.qs.size(); ++k)
                CHECK(rep.zeta_hat[k] == doctest::Approx(m * rep.qs[k]).epsilon(1e-12));
        }
    }

    TEST_CASE("estimate_zeta input checks and warnings")
    {
        ScalingOptions o;
        o.grid_n = 32;
        CHECK_THROWS(estimate_zeta(params(2, 1.0), {1.0}, {0.25, 0.5}, 2, o));
        CHECK_THROWS(estimate_zeta(params(2, 1.0), {1.0}, {0.25, 0.5, 2.0}, 2, o));
        o.jackknife_groups = 2;
        const ScalingReport rep =
            estimate_zeta(params(2, 1.0), {5.0}, {0.125, 0.25, 0.5}, 4, o);
        CHECK(rep.moment_warning);
        CHECK(rep.radii.size() == 3);
    }

    TEST_CASE("tiled estimate is unbiased for E[M(B_r)] (q = 1)")
    {
        // E[M(B_r)] = (2r)^m exactly, so the q = 1 slope is m up to noise.
        ScalingOptions o;
        o.grid_n = 128;
        const ScalingReport rep =
            estimate_zeta(params(2, 1.0), {1.0}, {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2}, 40, o);
        CHECK(std::abs(rep.zeta_hat[0] - 2.0) < 4.0 * rep.stderr_mc[0] + 1e-3);
        for (Index j = 0; j < rep.moment.cols(); ++j) {
            const double expect = std::pow(2.0 * rep.radii[std::size_t(j)], 2);
            CHECK(std::abs(rep.moment(0, j) - expect) < 4.0 * rep.moment_stderr(0, j));
        }
    }

    TEST_CASE("energy of uniform atoms equals the lag-sum closed form")
    {
        for (int N : {16, 100, 256}) {
            const double e = energy(uniform_atoms(N), euclidean_distance, 0.5);
            CHECK(e == doctest::Approx(uniform_energy_by_lag(N, 0.5)).epsilon(1e-12));
        }
    }

    TEST_CASE("energy of uniform atoms approaches 8/3")
    {
        const double target = 2.0 / ((1.0 - 0.5) * (2.0 - 0.5));
        const double e256 = energy(uniform_atoms(256), euclidean_distance, 0.5);
        const double e1024 = energy(uniform_atoms(1024), euclidean_distance, 0.5);
        const double e4096 = uniform_energy_by_lag(4096, 0.5);
        CHECK(e256 < e1024);
        CHECK(e1024 < e4096);
        CHECK(e4096 < target);
        CHECK(std::abs(e1024 - target) / target < 0.04);
        // The gap shrinks like N^{alpha-1} = N^{-1/2}.
        CHECK((target - e4096) / (target - e1024) == doctest::Approx(0.5).epsilon(0.02));
    }

    TEST_CASE("energy edge cases")
    {
        DiscreteMeasure mu = uniform_atoms(3);
        CHECK(energy(mu, euclidean_distance, 0.0) == doctest::Approx(1.0 - 3.0 / 9.0));
        mu.atoms(0, 1) = mu.atoms(0, 0);
        CHECK_THROWS(energy(mu, euclidean_distance, 0.5));
        CHECK_THROWS(energy(mu, euclidean_distance, -1.0));
    }

    TEST_CASE("energy on a chaos measure equals a direct double loop")
    {
        const DiscreteMeasure mu = build_measure(sample_field(params(2, 1.0), 12, 0.0, 3));
        for (double alpha : {0.5, 2.5}) {
            double direct = 0.0;
            for (Index i = 0; i < mu.size(); ++i)
                for (Index j = 0; j < mu.size(); ++j)
                    if (i != j)
                        direct += mu.weights(i) * mu.weights(j) *
                                  std::pow((mu.atoms.col(i) - mu.atoms.col(j)).norm(), -alpha);
            CHECK(energy(mu, euclidean_distance, alpha) == doctest::Approx(direct).epsilon(1e-12));
        }
    }

    TEST_CASE("Lebesgue energy converges below m and diverges above")
    {
        // Riesz energy of the square [-1,1]^2 is finite for alpha < 2; for
        // alpha > 2 the diagonal-free sum grows like n^{alpha - 2}.
        const ModelParams p = params(2, 0.0);
        double low[3], high[3];
        int k = 0;
        for (int n : {16, 32, 64}) {
            const DiscreteMeasure mu = build_measure(sample_field(p, n, 0.0, 0));
            low[k] = energy(mu, euclidean_distance, 0.5);
            high[k] = energy(mu, euclidean_distance, 2.5);
            ++k;
        }
        CHECK(low[0] < low[1]);
        CHECK(low[1] < low[2]);
        CHECK(low[2] - low[1] < 0.5 * (low[1] - low[0]));
        CHECK(high[1] / high[0] > std::sqrt(2.0));
        CHECK(high[2] / high[1] > std::sqrt(2.0));
    }
}
