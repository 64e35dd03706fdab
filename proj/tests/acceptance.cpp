// Acceptance run: one PASS/FAIL line per criterion, exit code 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mrm/chaos.hpp"
#include "mrm/field.hpp"
#include "mrm/geometry.hpp"
#include "mrm/kpz.hpp"
#include "mrm/model.hpp"
#include "mrm/timechange.hpp"
#include "mrm/transport.hpp"

using namespace mrm;

namespace {

// Pinned tolerances.
constexpr double kKernelTol = 1e-6;
constexpr double kMassSigmas = 3.0;
constexpr double kZeta2Tol = 0.15;
constexpr double kZetaHalfTol = 0.05;
constexpr double kEssiRelTol = 0.10;
constexpr int kEssiReplicas = 2000;
constexpr double kCompositionRelTol = 0.10;
constexpr double kSinkhornCostRelTol = 0.05;
constexpr double kQuantileCells = 2.0;
constexpr double kTvTol = 1e-3;
constexpr double kRoundoff = 1e-12;
constexpr double kSpeedTol = 1e-12;
constexpr double kCalibrationTol = 0.05;
constexpr double kKpzTol = 0.15;
constexpr double kQvTol = 1e-12;
constexpr double kBrownianSigmas = 3.0;

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail)
{
    std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    failures += !pass;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

ModelParams model(int m, double gamma2, double R = 1.0, std::uint64_t seed = 0)
{
    ModelParams p;
    p.m = m;
    p.gamma2 = gamma2;
    p.R = R;
    p.seed = seed;
    return p;
}

void kernel_check()
{
    const double T = 1.0, l = 0.01;
    double err = 0.0;
    err = std::max(err, std::abs(rho(l, l, T) - std::log(T / l)));
    err = std::max(err, std::abs(rho(0.0, l, T) - (std::log(T / l) + 1.0)));
    const double limit = std::abs(kernel(T, 1e-12, T, 2) - std::log(2.0));
    KernelQuadrature fine;
    fine.step /= 2.0;
    double resolution = 0.0;
    for (double r : {0.0, 0.001, 0.005, 0.0099, 0.01, 0.0101, 0.05, 0.2, 0.5, 0.99, 1.0, 1.5})
        resolution = std::max(resolution, std::abs(kernel(r, l, T, 2) - kernel(r, l, T, 2, fine)));
    report(1, "kernel", err <= kKernelTol && limit <= kKernelTol && resolution <= kKernelTol,
           fmt("rho err %.2e, ln2 limit err %.2e, double-resolution diff %.2e", err, limit,
               resolution));
}

void mass_check()
{
    const ModelParams p = model(2, 1.0);
    const auto sampler = FieldSampler::shared(p, 256);
    const int n = 200;
    std::vector<double> mass;
    for (int r = 0; r < n; ++r)
        mass.push_back(build_measure(sampler->sample(std::uint64_t(r))).total_mass());
    const double mean = std::accumulate(mass.begin(), mass.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : mass)
        ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (n - 1) / n);
    const double target = std::pow(2.0 * p.R, 2);
    report(2, "martingale normalization", std::abs(mean - target) <= kMassSigmas * se,
           fmt("mean %.4f, target %.4f, SE %.4f", mean, target, se));
}

void scaling_check()
{
    const ModelParams p = model(2, 1.0, 2.0);
    ScalingOptions o;
    o.grid_n = 512;
    const std::vector<double> radii{p.T / 16, p.T / 8, p.T / 4, p.T / 2};
    const ScalingReport rep = estimate_zeta(p, {0.5, 2.0}, radii, 500, o);
    const double z_half = rep.zeta_hat[0], z_two = rep.zeta_hat[1];
    const bool ok = std::abs(z_two - zeta(p, 2.0)) <= kZeta2Tol &&
                    std::abs(z_half - zeta(p, 0.5)) <= kZetaHalfTol;
    report(3, "scaling exponents", ok,
           fmt("zeta(2) %.4f +- %.4f (exact %.3f), zeta(0.5) %.4f +- %.4f (exact %.4f)", z_two,
               rep.stderr_mc[1], zeta(p, 2.0), z_half, rep.stderr_mc[0], zeta(p, 0.5)));
}

void essi_check()
{
    // M(B_r)^2 has a heavy upper tail (zeta(4) <= m), so the ratios get the
    // full desk-scale replica budget.
    const ModelParams p = model(2, 1.0, 2.0);
    ScalingOptions o;
    o.grid_n = 512;
    const std::vector<double> radii{p.T / 16, p.T / 8, p.T / 4, p.T / 2};
    const ScalingReport rep = estimate_zeta(p, {2.0}, radii, kEssiReplicas, o);
    const double target = std::pow(0.5, zeta(p, 2.0));
    bool ok = true;
    std::string detail = fmt("target %.4f, %d replicas;", target, kEssiReplicas);
    for (std::size_t k = 1; k < radii.size(); ++k) {
        const double ratio = rep.moment(0, Index(k - 1)) / rep.moment(0, Index(k));
        const bool in = std::abs(ratio / target - 1.0) <= kEssiRelTol;
        ok = ok && in;
        detail += fmt(" r=T/%g: %.4f%s", p.T / radii[k], ratio, in ? "" : "(out)");
    }
    report(4, "ESSI second moments", ok, detail);
}

void composition_check()
{
    const ModelParams p = model(2, 1.0);
    const int n = 500, grid = 128;
    std::vector<double> one, two;
    for (int r = 0; r < n; ++r) {
        const double a = compose_chaos(p, 1, grid, std::uint64_t(r)).back().total_mass();
        const double b = compose_chaos(p, 2, grid, std::uint64_t(r)).back().total_mass();
        one.push_back(a * a);
        two.push_back(b * b);
    }
    auto mean_se = [n](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : v)
            ss += (x - mean) * (x - mean);
        return std::pair{mean, std::sqrt(ss / (n - 1) / n)};
    };
    const auto [m1, se1] = mean_se(one);
    const auto [m2, se2] = mean_se(two);
    const double rel = std::abs(m2 - m1) / m1;

    // Exact discrete E[M^2] = h^4 sum_{i,j} exp(gamma2 K(x_i - x_j)), summed by lag.
    const double h = 2.0 * p.R / grid, l = FieldSampler::shared(p, grid)->cutoff();
    double exact = 0.0;
    for (int dx = 1 - grid; dx < grid; ++dx)
        for (int dy = 1 - grid; dy < grid; ++dy)
            exact += double(grid - std::abs(dx)) * double(grid - std::abs(dy)) *
                     std::exp(p.gamma2 * kernel(std::hypot(dx, dy) * h, l, p.T, 2));
    exact *= std::pow(h, 4);

    report(5, "composition law", rel < kCompositionRelTol,
           fmt("E[M^2] one-shot %.2f +- %.2f, two layers %.2f +- %.2f, rel diff %.3f; exact "
               "%.2f (z %.1f, %.1f)",
               m1, se1, m2, se2, rel, exact, (m1 - exact) / se1, (m2 - exact) / se2));
}

DiscreteMeasure random_uniform(std::mt19937_64& gen, int n)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DiscreteMeasure mu;
    mu.atoms.resize(2, n);
    for (Index i = 0; i < mu.atoms.size(); ++i)
        mu.atoms.data()[i] = u(gen);
    mu.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
    return mu;
}

void oracle_check()
{
    std::mt19937_64 gen(2024);
    int exact_ok = 0, sinkhorn_ok = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + trial % 7;
        const DiscreteMeasure a = random_uniform(gen, n), b = random_uniform(gen, n);
        const Eigen::MatrixXd C = cost_matrix(a.atoms, b.atoms, squared_euclidean);
        std::vector<int> perm(std::size_t(n), 0);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                s += C(i, perm[std::size_t(i)]);
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));

        const TransportMap map = exact_assignment(a, b, squared_euclidean);
        double exact = 0.0;
        for (int i = 0; i < n; ++i)
            exact += C(i, map.assignment[std::size_t(i)]);
        exact_ok += exact == best;

        SinkhornOptions o;
        o.epsilon = 1e-3;
        o.max_iter = 200000;
        const TransportPlan plan = sinkhorn(a, b, squared_euclidean, o);
        const double rel = std::abs(plan.cost_value - best / n) / (best / n);
        worst = std::max(worst, rel);
        sinkhorn_ok += rel <= kSinkhornCostRelTol;
    }
    report(6, "OT oracle equivalence", exact_ok == 50 && sinkhorn_ok == 50,
           fmt("exact == brute force on %d/50, sinkhorn within 5%% on %d/50 (worst %.2e)",
               exact_ok, sinkhorn_ok, worst));
}

void quantile_check()
{
    const ModelParams p = model(1, 0.5);
    double worst = 0.0;
    const int steps = min_steps(p);
    for (int n : {steps, steps + 1}) {
        const auto layers = compose_chaos(p, n, 512, 0);
        const DiscreteMeasure& top = layers.back();
        const double h = top.meta.grid.spacing(), R = p.R;
        // CDF of the piecewise-constant density, built by prefix sums.
        std::vector<double> prefix(std::size_t(top.size()) + 1, 0.0);
        for (Index i = 0; i < top.size(); ++i)
            prefix[std::size_t(i) + 1] = prefix[std::size_t(i)] + top.weights(i);
        const double total = prefix.back();
        auto quantile_map = [&](double x) {
            const double u = std::clamp((x + R) / h, 0.0, double(top.size()));
            const Index c = std::min<Index>(Index(u), top.size() - 1);
            const double F = prefix[std::size_t(c)] + (u - double(c)) * top.weights(c);
            return -R + 2.0 * R * F / total;
        };
        const ChainedMap chained = multi_step(layers);
        for (Index j = 0; j < chained.atom_count(); ++j)
            worst = std::max(worst, std::abs(chained.images()(0, j) -
                                             quantile_map(chained.origins()(0, j))) / h);
    }
    report(7, "1D quantile oracle", worst <= kQuantileCells,
           fmt("sup error %.3e cells over n = %d, %d steps (512 atoms)", worst, steps, steps + 1));
}

struct ExactRun
{
    double gamma2;
    int steps;
    std::vector<DiscreteMeasure> layers;
    ChainedMap map;
};

std::vector<ExactRun> exact_runs()
{
    std::vector<ExactRun> runs;
    for (double g2 : {1.0, 2.5}) {
        const ModelParams p = model(2, g2, 1.0, 7);
        ExactRun run{g2, min_steps(p), compose_chaos(p, min_steps(p), 32, 0), {}};
        MultiStepOptions o;
        o.solver = SolverKind::Exact;
        run.map = multi_step(run.layers, o);
        runs.push_back(std::move(run));
    }
    return runs;
}

void feasibility_check(const std::vector<ExactRun>& runs)
{
    double worst_tv = 0.0;
    for (const ExactRun& r : runs) {
        const Grid& g = r.layers[0].meta.grid;
        const DiscreteMeasure pushed = pushforward(r.map.steps.back().map, r.map.weights());
        worst_tv = std::max(worst_tv, total_variation(bin_to_grid(pushed, g),
                                                      bin_to_grid(lebesgue_ball(g), g)));
    }
    const ModelParams p = model(2, 1.0, 1.0, 7);
    const auto layers = compose_chaos(p, 2, 16, 0);
    MultiStepOptions o;
    o.solver = SolverKind::Sinkhorn;
    o.sinkhorn.epsilon = 1e-3;
    o.sinkhorn.tol = 1e-6;
    o.sinkhorn.max_iter = 200000;
    const ChainedMap sk = multi_step(layers, o);
    double worst_marginal = 0.0;
    for (const ChainStep& s : sk.steps)
        worst_marginal = std::max(worst_marginal, s.info.marginal_error);
    report(8, "pushforward feasibility",
           worst_tv <= kTvTol && worst_marginal <= o.sinkhorn.tol,
           fmt("exact TV %.2e (gamma2 1 and 2.5, grid 32); sinkhorn marginal %.2e <= tol %.0e",
               worst_tv, worst_marginal, o.sinkhorn.tol));
}

void monotonicity_check(const std::vector<ExactRun>& runs)
{
    std::mt19937_64 gen(99);
    long pair_violations = 0, cycle_violations = 0, checked_steps = 0;
    for (const ExactRun& r : runs)
        for (const ChainStep& s : r.map.steps) {
            const Eigen::MatrixXd& x = s.map.sources;
            const Eigen::MatrixXd& y = s.map.images;
            std::uniform_int_distribution<Index> pick(0, x.cols() - 1);
            for (int t = 0; t < 10000; ++t) {
                const Index i = pick(gen), j = pick(gen);
                pair_violations += (y.col(i) - y.col(j)).dot(x.col(i) - x.col(j)) < -kRoundoff;
            }
            for (int t = 0; t < 10000; ++t) {
                const Index i = pick(gen), j = pick(gen), k = pick(gen);
                const double kept = (x.col(i) - y.col(i)).squaredNorm() +
                                    (x.col(j) - y.col(j)).squaredNorm() +
                                    (x.col(k) - y.col(k)).squaredNorm();
                const double rotated = (x.col(i) - y.col(j)).squaredNorm() +
                                       (x.col(j) - y.col(k)).squaredNorm() +
                                       (x.col(k) - y.col(i)).squaredNorm();
                cycle_violations += kept > rotated + kRoundoff;
            }
            ++checked_steps;
        }
    report(9, "monotonicity", pair_violations == 0 && cycle_violations == 0,
           fmt("%ld pair and %ld 3-cycle violations over %ld exact steps x 1e4 samples",
               pair_violations, cycle_violations, checked_steps));
}

void geometry_check(const std::vector<ExactRun>& runs)
{
    bool inverse_ok = true;
    double speed = 0.0, factor_err = 0.0;
    for (const ExactRun& r : runs) {
        const Grid& g = r.layers[0].meta.grid;
        const PullbackChart chart = make_chart(r.map, g);
        for (Index i = 0; i < chart.size(); ++i)
            inverse_ok = inverse_ok && chart.inverse(chart.images().col(i)) == chart.atoms().col(i);

        std::mt19937_64 gen(5);
        std::uniform_int_distribution<Index> pick(0, chart.size() - 1);
        for (int k = 0; k < 200; ++k) {
            const Index i = pick(gen), j = pick(gen);
            const double t = double(k % 11) / 10.0;
            const GeodesicPoint pt = geodesic(chart, i, j, t);
            const double full = (chart.images().col(i) - chart.images().col(j)).norm();
            speed = std::max(speed, std::abs((pt.image - chart.images().col(j)).norm() - t * full));
        }

        double mass = 0.0;
        const DiscreteMeasure& top = r.layers.back();
        for (Index i = 0; i < top.size(); ++i)
            if (top.atoms.col(i).norm() < g.R)
                mass += top.weights(i);
        double cells = 0.0;
        for (Index i = 0; i < g.size(); ++i)
            cells += g.center(i).norm() < g.R;
        const double C_R = cells * std::pow(g.spacing(), 2);
        const double expect = std::pow(mass / C_R, 2);
        factor_err = std::max(factor_err, std::abs(metric_factor(chart) - expect) / expect);
    }
    report(10, "geometry identities", inverse_ok && speed <= kSpeedTol && factor_err <= kRoundoff,
           fmt("chi(phi(x)) == x: %s; speed err %.2e; metric factor rel err %.2e",
               inverse_ok ? "all atoms" : "NO", speed, factor_err));
}

void calibration_check()
{
    const Grid domain{2, 512, 1.0};
    const double seg = hausdorff_estimate(segment_points(-1.0, 1.0, 0.3, 4096), nullptr, domain,
                                          dyadic_scales(1.0, 2, 8))
                           .s_hat;
    const double sq =
        hausdorff_estimate(square_points(1.0, 512), nullptr, domain, dyadic_scales(1.0, 2, 8))
            .s_hat;
    const double cantor = hausdorff_estimate(cantor_points(-1.0, 1.0, 0.0, 16), nullptr, domain,
                                             dyadic_scales(1.0, 4, 14))
                              .s_hat;
    const double cantor_dim = std::log(2.0) / std::log(3.0);
    report(11, "dimension calibration",
           std::abs(seg - 1.0) <= kCalibrationTol && std::abs(sq - 2.0) <= kCalibrationTol &&
               std::abs(cantor - cantor_dim) <= kCalibrationTol,
           fmt("segment %.4f, square %.4f, cantor %.4f (exact %.4f)", seg, sq, cantor, cantor_dim));
}

void kpz_check_run()
{
    const ModelParams p = model(2, 1.0);
    const KpzReport rep = kpz_check(p, segment_points(-1.0, 1.0, 0.3, 8 * 512), 1.0, 100, 512,
                                    dyadic_scales(1.0, 3, 8));
    const double exact = 5.0 - std::sqrt(17.0);
    report(12, "KPZ relation", std::abs(rep.xi - 1.0) <= kKpzTol,
           fmt("s_hat %.4f (exact %.5f, spread %.3f), xi(s_hat/2) %.4f", rep.s_hat, exact,
               rep.spread, rep.xi));
}

void min_steps_check()
{
    const int a = min_steps(model(2, 1.0)), b = min_steps(model(2, 2.5)), c = min_steps(model(2, 3.0));
    report(13, "min_steps table", a == 1 && b == 7 && c == 13, fmt("(%d, %d, %d)", a, b, c));
}

void time_change_check(const std::vector<ExactRun>& runs)
{
    const ModelParams p = model(1, 0.5);
    const auto sampler = FieldSampler::shared(p, 256);
    const int n = 500;
    const std::vector<double> times{0.5, 1.0, 2.0};
    std::vector<std::vector<double>> sq(times.size());
    double qv_err = 0.0;
    for (int r = 0; r < n; ++r) {
        const DiscreteMeasure mu = build_measure(sampler->sample(std::uint64_t(r)));
        const TimeChangedPath path = time_change_1d(mu, 4, p.seed, std::uint64_t(r));
        const double qv = conditional_quadratic_variation(path);
        qv_err = std::max(qv_err, std::abs(qv - mu.total_mass()) / mu.total_mass());
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double b = path_value(path, times[k]);
            sq[k].push_back(b * b);
        }
    }
    bool brownian_ok = true;
    std::string detail;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double mean = std::accumulate(sq[k].begin(), sq[k].end(), 0.0) / n;
        double ss = 0.0;
        for (double v : sq[k])
            ss += (v - mean) * (v - mean);
        const double se = std::sqrt(ss / (n - 1) / n);
        const bool ok = std::abs(mean - times[k]) <= kBrownianSigmas * se;
        brownian_ok = brownian_ok && ok;
        detail += fmt(" E[B(%g)^2]=%.3f+-%.3f;", times[k], mean, se);
    }

    const ExactRun& r = runs.front();
    const PullbackChart chart = make_chart(r.map, r.layers[0].meta.grid);
    Eigen::MatrixXd corner(2, 1);
    corner << 1.0, 1.0;
    const CornerField field = corner_field(chart, 1.0, corner, 3, 0, Eigen::Vector2d(-1.0, -1.0));
    const double corner_err = std::abs(field.variances(0) - chart.C_R) / chart.C_R;

    report(14, "time change",
           qv_err <= kQvTol && brownian_ok && corner_err <= kQvTol,
           fmt("QV rel err %.1e;%s corner variance %.6f vs C_R %.6f", qv_err, detail.c_str(),
               field.variances(0), chart.C_R));
}

void geodesic_dimension_report(const std::vector<ExactRun>& runs)
{
    const ExactRun& r = runs.front();
    const Grid& g = r.layers[0].meta.grid;
    const PullbackChart chart = make_chart(r.map, g);
    std::vector<std::pair<Index, Index>> pairs;
    std::mt19937_64 gen(17);
    std::uniform_int_distribution<Index> pick(0, chart.size() - 1);
    while (pairs.size() < 8) {
        const Index i = pick(gen), j = pick(gen);
        if ((chart.atoms().col(i) - chart.atoms().col(j)).norm() > 0.5 * g.R)
            pairs.emplace_back(i, j);
    }
    const GeodesicDimensionReport rep =
        geodesic_dimension_experiment(chart, r.gamma2, pairs, 400, g, dyadic_scales(g.R, 1, 5));
    report(15, "geodesic dimension (report)", std::isfinite(rep.mean),
           fmt("estimate %.3f (spread %.3f, %zu pairs), conjectured %.4f", rep.mean, rep.spread,
               rep.per_pair.size(), rep.conjectured));
}

}  // namespace

int main()
{
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::function<void()>> independent{
        kernel_check, mass_check, scaling_check, essi_check, composition_check, oracle_check, quantile_check};
    for (const auto& f : independent)
        f();
    const std::vector<ExactRun> runs = exact_runs();
    feasibility_check(runs);
    monotonicity_check(runs);
    geometry_check(runs);
    calibration_check();
    kpz_check_run();
    min_steps_check();
    time_change_check(runs);
    geodesic_dimension_report(runs);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%d failure(s), %.0f s\n", failures, secs);
    return failures == 0 ? 0 : 1;
}
