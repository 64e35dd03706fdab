#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "mrm/config.hpp"
#include "mrm/formats.hpp"
#include "mrm/geometry.hpp"
#include "mrm/kpz.hpp"
#include "mrm/parallel.hpp"
#include "mrm/rng.hpp"
#include "mrm/timechange.hpp"
#include "mrm/transport.hpp"

namespace mrm {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Hard invariant failure: exit code 1 with a structured message.
struct InvariantFailure : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

class Run
{
public:
    Run(const RunConfig& c, const RunTarget& target, std::ostream& log, std::ostream& warn)
        : c_(c), out_(target.out), log_(log), warn_(warn)
    {
        fs::create_directories(out_);
        fs::remove(path(c_.command + ".jsonl"));
    }

    void warning(const std::string& message, json extra = json::object())
    {
        extra["level"] = "warning";
        extra["command"] = c_.command;
        extra["message"] = message;
        warn_ << extra.dump() << '\n';
    }

    void summary(json j)
    {
        j["command"] = c_.command;
        const std::string line = j.dump();
        log_ << line << '\n';
        std::ofstream f(path(c_.command + ".jsonl"), std::ios::app);
        f << line << '\n';
    }

    std::string path(const std::string& name) const { return (fs::path(out_) / name).string(); }

    std::ofstream open(const std::string& name, bool binary = false) const
    {
        std::ofstream f(path(name), binary ? std::ios::binary : std::ios::out);
        if (!f)
            throw std::runtime_error("cannot write " + path(name));
        return f;
    }

    /// Opens a CSV whose first line carries the config as a '#' comment.
    std::ofstream open_csv(const std::string& name) const
    {
        std::ofstream f = open(name);
        f << "# " << c_.emit().str() << '\n';
        return f;
    }

    const RunConfig& config() const { return c_; }

private:
    const RunConfig& c_;
    std::string out_;
    std::ostream& log_;
    std::ostream& warn_;
};

std::string replica_name(const char* stem, int r, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_r%03d%s", stem, r, ext);
    return buf;
}

void cmd_simulate(Run& run)
{
    const RunConfig& c = run.config();
    const auto sampler = FieldSampler::shared(c.params, c.grid);
    for (int r = 0; r < c.replicas; ++r) {
        const DiscreteMeasure mu = build_measure(sampler->sample(std::uint64_t(r)));
        {
            std::ofstream f = run.open(replica_name("density", r, ".grid"), true);
            write_grid(f, mu, c.emit());
        }
        if (c.csv) {
            std::ofstream f = run.open_csv(replica_name("density", r, ".csv"));
            write_grid_csv(f, mu.meta.grid, mu.weights.array());
        }
        const double total = mu.total_mass();
        const double top = mu.weights.maxCoeff() / total;
        if (top > 0.1)
            run.warning("heavy tail: one cell carries more than 10% of the mass",
                        {{"replica", r}, {"max_cell_fraction", top}});
        run.summary({{"replica", r},
                     {"total_mass", total},
                     {"expected_mass", std::pow(2.0 * c.params.R, c.params.m)},
                     {"max_cell_fraction", top},
                     {"file", replica_name("density", r, ".grid")}});
    }
}

SolverKind solver_kind(const std::string& s)
{
    if (s == "auto")
        return SolverKind::Auto;
    if (s == "sinkhorn")
        return SolverKind::Sinkhorn;
    if (s == "exact")
        return SolverKind::Exact;
    throw std::invalid_argument("unknown solver '" + s + "'");
}

void cmd_transport(Run& run)
{
    const RunConfig& c = run.config();
    const int needed = min_steps(c.params);
    int n = c.steps == 0 ? needed : c.steps;
    if (c.steps != 0 && c.steps < needed) {
        if (!c.force)
            throw std::invalid_argument("steps=" + std::to_string(c.steps) +
                                        " is below min_steps=" + std::to_string(needed) +
                                        " (use --force to override)");
        run.warning("steps below min_steps forced", {{"steps", c.steps}, {"min_steps", needed}});
    }
    MultiStepOptions opts;
    opts.solver = solver_kind(c.solver);
    opts.sinkhorn.epsilon = c.epsilon;
    opts.sinkhorn.tol = c.tol;
    opts.sinkhorn.max_iter = c.max_iter;
    opts.exact_threshold = c.exact_threshold;

    const std::vector<DiscreteMeasure> layers = compose_chaos(c.params, n, c.grid, 0);
    const ChainedMap chained = multi_step(layers, opts);
    for (std::size_t k = 0; k < chained.steps.size(); ++k) {
        const ChainStep& s = chained.steps[k];
        run.summary({{"step", k + 1},
                     {"steps", n},
                     {"solver", chained.solver},
                     {"marginal_error", s.info.marginal_error},
                     {"iterations", s.info.iterations},
                     {"cost", s.cost_value}});
    }
    std::ofstream f = run.open("map.tmap");
    write_tmap(f, chained, c.emit().str());
}

struct LoadedMap
{
    RunConfig source;
    PullbackChart chart;
    Grid grid;
};

LoadedMap load_map(const RunConfig& c)
{
    if (c.input.empty())
        throw std::invalid_argument("--input map.tmap is required");
    std::ifstream in(c.input);
    if (!in)
        throw std::invalid_argument("cannot read " + c.input);
    std::string header;
    ChainedMap chained = read_tmap(in, &header);
    const RunConfig source = RunConfig::parse(KeyValues::parse(header));
    const Grid grid{source.params.m, source.grid, source.params.R};
    return LoadedMap{source, make_chart(std::move(chained), grid), grid};
}

Eigen::VectorXd as_point(const std::vector<double>& v, int m, const char* what)
{
    if (int(v.size()) != m)
        throw std::invalid_argument(std::string(what) + " needs " + std::to_string(m) +
                                    " coordinates");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), m);
}

void cmd_geodesic(Run& run)
{
    const RunConfig& c = run.config();
    const LoadedMap loaded = load_map(c);
    const PullbackChart& chart = loaded.chart;
    const int m = loaded.grid.m;

    if (!c.from.empty() || !c.to.empty()) {
        const SupportAtom a = locate(chart, as_point(c.from, m, "--from"));
        const SupportAtom b = locate(chart, as_point(c.to, m, "--to"));
        if (!a.exact || !b.exact)
            run.warning("endpoint off the support; snapped to the nearest atom");
        std::vector<GeodesicPoint> line;
        if (a.index == b.index) {
            run.warning("endpoints coincide; polyline is a single point");
            line.push_back(geodesic(chart, a.index, b.index, 0.0));
        } else {
            line = geodesic_polyline(chart, b.index, a.index, c.samples);
        }
        const double bound = image_spacing(chart);
        int repeats = 0;
        for (const GeodesicPoint& p : line) {
            repeats += p.repeat;
            const double err = (chart.images().col(p.atom) - p.image).norm();
            if (err > bound)
                throw InvariantFailure("snapping error exceeds the image spacing");
        }
        std::ofstream f = run.open_csv("geodesic.csv");
        write_polyline_csv(f, line);
        run.summary({{"from_atom", a.index},
                     {"to_atom", b.index},
                     {"dist", dist(chart, a.index, b.index)},
                     {"metric_factor", metric_factor(chart)},
                     {"points", line.size()},
                     {"repeats", repeats}});
    }
    if (c.pairs > 0) {
        CounterRng rng(stream_key(c.params.seed, 0, 0, StreamRole::Sampling));
        std::vector<std::pair<Index, Index>> pairs;
        const Index n = chart.size();
        while (int(pairs.size()) < c.pairs) {
            const Index i = std::min<Index>(n - 1, Index(rng.uniform() * double(n)));
            const Index j = std::min<Index>(n - 1, Index(rng.uniform() * double(n)));
            if ((chart.atoms().col(i) - chart.atoms().col(j)).norm() > 0.5 * loaded.grid.R)
                pairs.emplace_back(i, j);
        }
        const GeodesicDimensionReport rep = geodesic_dimension_experiment(
            chart, loaded.source.params.gamma2, pairs, c.samples, loaded.grid,
            dyadic_scales(loaded.grid.R, c.scale_min, c.scale_max));
        run.summary({{"experiment", "geodesic_dimension"},
                     {"estimate", rep.mean},
                     {"spread", rep.spread},
                     {"conjectured", rep.conjectured},
                     {"pairs", rep.per_pair.size()}});
    }
    if (c.from.empty() && c.to.empty() && c.pairs == 0)
        throw std::invalid_argument("geodesic needs --from/--to or --pairs");
}

void cmd_kpz(Run& run)
{
    const RunConfig& c = run.config();
    if (c.params.m != 2)
        throw std::invalid_argument("kpz runs in dimension m = 2");
    const double R = c.params.R;
    Eigen::MatrixXd E;
    double dim;
    if (c.set == "segment") {
        E = segment_points(-R, R, 0.3 * R, 8 * Index(c.grid));
        dim = 1.0;
    } else if (c.set == "square") {
        E = square_points(R, 2 * Index(c.grid));
        dim = 2.0;
    } else if (c.set == "cantor") {
        E = cantor_points(-R, R, 0.3 * R, 14);
        dim = std::log(2.0) / std::log(3.0);
    } else {
        throw std::invalid_argument("unknown set '" + c.set + "'");
    }
    const std::vector<double> scales = dyadic_scales(R, c.scale_min, c.scale_max);
    const Grid domain{2, c.grid, R};

    KpzReport report;
    if (c.lebesgue) {
        report.estimate = hausdorff_estimate(E, nullptr, domain, scales);
        report.s_hat = report.estimate.s_hat;
        report.xi = report.s_hat;
        report.euclidean_dim = dim;
        report.target_s = dim;
        report.per_replica = {report.s_hat};
    } else {
        report = kpz_check(c.params, E, dim, c.replicas, c.grid, scales);
    }
    std::ofstream f = run.open_csv("kpz.csv");
    write_kpz_csv(f, report);
    json j = json::parse(kpz_summary_json(report, c.set));
    j["measure"] = c.lebesgue ? "lebesgue" : "mrm";
    run.summary(j);
}

void cmd_timechange(Run& run)
{
    const RunConfig& c = run.config();
    if (c.mode == "path") {
        if (c.params.m != 1)
            throw std::invalid_argument("timechange path mode needs m = 1");
        const auto sampler = FieldSampler::shared(c.params, c.grid);
        double sum = 0.0, sum2 = 0.0;
        double t_max = 0.0;
        for (int r = 0; r < c.replicas; ++r) {
            const DiscreteMeasure mu = build_measure(sampler->sample(std::uint64_t(r)));
            const TimeChangedPath path =
                time_change_1d(mu, c.bm_resolution, c.params.seed, std::uint64_t(r));
            const double clock = path.clock(path.clock.size() - 1);
            if (std::abs(conditional_quadratic_variation(path) - clock) > 1e-12 * clock)
                throw InvariantFailure("quadratic variation differs from the clock");
            const double b = path.values(path.values.size() - 1);
            sum += b * b;
            sum2 += b * b * b * b;
            t_max = path.t(path.t.size() - 1);
            if (r == 0 || c.csv) {
                std::ofstream f = run.open_csv(r == 0 && !c.csv ? std::string("path.csv")
                                                                : replica_name("path", r, ".csv"));
                write_path_csv(f, path);
            }
        }
        const double n = c.replicas;
        const double mean = sum / n;
        const double se = n > 1 ? std::sqrt(std::max(0.0, sum2 / n - mean * mean) / (n - 1)) : 0.0;
        run.summary({{"mode", "path"},
                     {"t_max", t_max},
                     {"mean_B2_t_max", mean},
                     {"stderr", se},
                     {"replicas", c.replicas}});
        return;
    }
    if (c.mode != "field")
        throw std::invalid_argument("unknown timechange mode '" + c.mode + "'");

    const LoadedMap loaded = load_map(c);
    const PullbackChart& chart = loaded.chart;
    const int m = loaded.grid.m;
    const double R = loaded.grid.R;
    Index count = 1;
    for (int d = 0; d < m; ++d)
        count *= c.eval_n;
    Eigen::MatrixXd points(m, count);
    for (Index k = 0; k < count; ++k) {
        Index rest = k;
        for (int d = 0; d < m; ++d) {
            points(d, k) = -R + 2.0 * R * double(rest % c.eval_n + 1) / double(c.eval_n);
            rest /= c.eval_n;
        }
    }
    Eigen::VectorXd anchor = Eigen::VectorXd::Zero(m);
    if (c.anchor == "corner")
        anchor.setConstant(-R);
    else if (c.anchor != "origin")
        throw std::invalid_argument("anchor must be origin or corner");
    const CornerField field = corner_field(chart, R, points, c.params.seed, 0, anchor);
    for (Index k = 0; k < count; ++k) {
        double direct = 0.0;
        for (Index i = 0; i < chart.size(); ++i)
            if (in_corner(chart.atoms().col(i), points.col(k), anchor))
                direct += chart.weights()(i);
        direct *= chart.C_R / chart.mass_BR;
        if (std::abs(direct - field.variances(k)) > 1e-12 * std::max(1.0, direct))
            throw InvariantFailure("corner variance identity failed");
    }
    std::ofstream f = run.open_csv("corner.csv");
    write_corner_csv(f, field);
    run.summary({{"mode", "field"},
                 {"points", count},
                 {"C_R", chart.C_R},
                 {"max_variance", field.variances.maxCoeff()}});
}

void cmd_scaling(Run& run)
{
    const RunConfig& c = run.config();
    std::vector<double> radii = c.radii;
    if (radii.empty())
        for (double f : {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2})
            radii.push_back(f * c.params.T);
    ScalingOptions opts;
    opts.grid_n = c.grid;
    const ScalingReport rep = estimate_zeta(c.params, c.qs, radii, c.replicas, opts);
    if (rep.moment_warning)
        run.warning("some q has zeta(q) <= m; the moment may not exist");
    std::ofstream f = run.open_csv("scaling.csv");
    write_scaling_csv(f, rep, c.params);
    for (std::size_t k = 0; k < rep.qs.size(); ++k)
        run.summary({{"q", rep.qs[k]},
                     {"zeta_hat", rep.zeta_hat[k]},
                     {"stderr", rep.stderr_mc[k]},
                     {"zeta", zeta(c.params, rep.qs[k])},
                     {"replicas", rep.replicas}});
}

}  // namespace

int run_command(const RunConfig& config, const RunTarget& target, std::ostream& log,
                std::ostream& warn)
{
    auto fail = [&](const char* kind, const std::string& message) {
        warn << json{{"level", "error"}, {"command", config.command}, {"kind", kind},
                     {"message", message}}
                    .dump()
             << '\n';
        return 1;
    };
    try {
        config.params.validate();
        if (config.grid < 2 || config.grid % 2 != 0)
            throw std::invalid_argument("grid must be even and >= 2");
        if (config.replicas < 1)
            throw std::invalid_argument("replicas must be >= 1");
        if (target.threads < 1)
            throw std::invalid_argument("threads must be >= 1");
        set_max_threads(target.threads);
        Run run(config, target, log, warn);
        if (config.command == "simulate")
            cmd_simulate(run);
        else if (config.command == "transport")
            cmd_transport(run);
        else if (config.command == "geodesic")
            cmd_geodesic(run);
        else if (config.command == "kpz")
            cmd_kpz(run);
        else if (config.command == "timechange")
            cmd_timechange(run);
        else if (config.command == "scaling")
            cmd_scaling(run);
        else
            throw std::invalid_argument("unknown command '" + config.command + "'");
    } catch (const InvariantFailure& e) {
        return fail("invariant", e.what());
    } catch (const SolverError& e) {
        return fail("solver", e.what());
    } catch (const std::exception& e) {
        return fail("error", e.what());
    }
    return 0;
}

}  // namespace mrm
