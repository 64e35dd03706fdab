#include "mrm/kpz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "mrm/io.hpp"
#include "mrm/parallel.hpp"

namespace mrm {

namespace {

int dyadic_level(double R, double scale)
{
    const double j = std::log2(2.0 * R / scale);
    const double jr = std::round(j);
    if (!(scale > 0.0) || jr < 0 || std::abs(j - jr) > 1e-9)
        throw std::invalid_argument("cover_set: scales must be 2R / 2^j");
    return static_cast<int>(jr);
}

std::vector<Index> met_boxes(const Eigen::MatrixXd& E, double R, double scale, Index per_side)
{
    std::vector<Index> boxes;
    boxes.reserve(std::size_t(E.cols()));
    for (Index k = 0; k < E.cols(); ++k) {
        Index flat = 0;
        Index stride = 1;
        for (Index d = 0; d < E.rows(); ++d) {
            const double c = std::floor((E(d, k) + R) / scale);
            flat += std::clamp<Index>(static_cast<Index>(c), 0, per_side - 1) * stride;
            stride *= per_side;
        }
        boxes.push_back(flat);
    }
    std::sort(boxes.begin(), boxes.end());
    boxes.erase(std::unique(boxes.begin(), boxes.end()), boxes.end());
    return boxes;
}

std::vector<double> fit(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = double(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - my - slope * (x[i] - mx);
        rss += r * r;
    }
    return {slope, std::sqrt(rss / n)};
}

// Mean over covers of log sum_b nu_b^{s/2}, per scale.
std::vector<double> mean_log_content(const std::vector<BoxCover>& covers, double s)
{
    const std::size_t ns = covers.front().scales.size();
    std::vector<double> out(ns, 0.0);
    for (const BoxCover& c : covers)
        for (std::size_t k = 0; k < ns; ++k) {
            const auto& masses = c.masses[k];
            double top = -std::numeric_limits<double>::infinity();
            for (double v : masses)
                top = std::max(top, 0.5 * s * std::log(v));
            double sum = 0.0;
            for (double v : masses)
                sum += std::exp(0.5 * s * std::log(v) - top);
            out[k] += top + std::log(sum);
        }
    for (double& v : out)
        v /= double(covers.size());
    return out;
}

double stddev(const std::vector<double>& v)
{
    if (v.size() < 2)
        return 0.0;
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= double(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    return std::sqrt(ss / double(v.size() - 1));
}

}  // namespace

BoxCover cover_set(const Eigen::MatrixXd& E, const DiscreteMeasure* nu, const Grid& domain,
                   const std::vector<double>& scales)
{
    if (E.cols() == 0)
        throw std::invalid_argument("cover_set: empty set");
    if (E.rows() != domain.m)
        throw std::invalid_argument("cover_set: set and domain differ in dimension");
    if (nu && (!nu->is_full_grid() || !(nu->meta.grid == domain)))
        throw std::invalid_argument("cover_set: measure must be a full grid on the domain");

    BoxCover out;
    out.scales = scales;
    for (double scale : scales) {
        const int j = dyadic_level(domain.R, scale);
        const Index per_side = Index(1) << j;
        const std::vector<Index> boxes = met_boxes(E, domain.R, scale, per_side);
        std::vector<double> masses;
        if (!nu) {
            const double v = std::pow(scale, domain.m);
            masses.assign(boxes.size(), v);
        } else {
            if (domain.n % per_side != 0)
                throw std::invalid_argument("cover_set: scale must be a whole number of cells");
            const Index c = domain.n / per_side;
            Index total = 1;
            for (int d = 0; d < domain.m; ++d)
                total *= per_side;
            Eigen::VectorXd box_mass = Eigen::VectorXd::Zero(total);
            for (Index i = 0; i < nu->size(); ++i) {
                Index rest = i, flat = 0, stride = 1;
                for (int d = 0; d < domain.m; ++d) {
                    flat += ((rest % domain.n) / c) * stride;
                    rest /= domain.n;
                    stride *= per_side;
                }
                box_mass(flat) += nu->weights(i);
            }
            for (Index b : boxes)
                if (box_mass(b) > 0.0)
                    masses.push_back(box_mass(b));
        }
        if (masses.empty())
            throw std::invalid_argument("cover_set: measure vanishes on every covering box");
        out.masses.push_back(std::move(masses));
    }
    return out;
}

DimensionEstimate estimate_dimension(const std::vector<BoxCover>& covers, int m, bool lebesgue)
{
    if (covers.empty())
        throw std::invalid_argument("estimate_dimension: no covers");
    const std::vector<double>& scales = covers.front().scales;
    if (scales.size() < 3)
        throw std::invalid_argument("estimate_dimension: need at least 3 scales");
    for (const BoxCover& c : covers)
        if (c.scales != scales)
            throw std::invalid_argument("estimate_dimension: covers use different scales");
    std::vector<double> log_scale;
    for (double s : scales)
        log_scale.push_back(std::log(s));

    auto slope = [&](double s) { return fit(log_scale, mean_log_content(covers, s))[0]; };
    double lo = 0.0, hi = 2.0 * m;
    double root;
    if (slope(lo) >= 0.0) {
        root = lo;
    } else if (slope(hi) <= 0.0) {
        root = hi;
    } else {
        for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
            const double mid = 0.5 * (lo + hi);
            (slope(mid) < 0.0 ? lo : hi) = mid;
        }
        root = 0.5 * (lo + hi);
    }

    DimensionEstimate est;
    est.s_hat = std::clamp(root, 0.0, double(m));
    est.clamped = est.s_hat != root;
    est.scales = scales;
    est.log_content = mean_log_content(covers, est.s_hat);
    est.residual = fit(log_scale, est.log_content)[1];
    est.covers = static_cast<int>(covers.size());
    est.lebesgue = lebesgue;
    return est;
}

DimensionEstimate hausdorff_estimate(const Eigen::MatrixXd& E, const DiscreteMeasure* nu,
                                     const Grid& domain, const std::vector<double>& scales)
{
    if (scales.size() < 3)
        throw std::invalid_argument("hausdorff_estimate: need at least 3 scales");
    return estimate_dimension({cover_set(E, nu, domain, scales)}, domain.m, nu == nullptr);
}

double kpz_transform(const ModelParams& params, double s)
{
    if (params.m != 2)
        throw std::invalid_argument("kpz_transform: defined for m = 2");
    if (!(s >= 0.0 && s <= 2.0))
        throw std::invalid_argument("kpz_transform: s must lie in [0, 2]");
    return zeta(params, 0.5 * s);
}

double kpz_inverse(const ModelParams& params, double dim)
{
    if (params.m != 2)
        throw std::invalid_argument("kpz_inverse: defined for m = 2");
    // (gamma2/8) s^2 - (1 + gamma2/4) s + dim = 0, lower root.
    const double b = 1.0 + 0.25 * params.gamma2;
    const double disc = b * b - 0.5 * params.gamma2 * dim;
    if (disc < 0.0)
        throw std::invalid_argument("kpz_inverse: dimension above the maximum of xi");
    return 2.0 * dim / (b + std::sqrt(disc));
}

std::vector<double> dyadic_scales(double R, int j_min, int j_max)
{
    std::vector<double> out;
    for (int j = j_min; j <= j_max; ++j)
        out.push_back(std::ldexp(2.0 * R, -j));
    return out;
}

Eigen::MatrixXd segment_points(double x0, double x1, double y, Index count)
{
    if (count < 2)
        throw std::invalid_argument("segment_points: count must be >= 2");
    Eigen::MatrixXd E(2, count);
    E.row(0) = Eigen::RowVectorXd::LinSpaced(count, x0, x1);
    E.row(1).setConstant(y);
    return E;
}

Eigen::MatrixXd square_points(double R, Index count)
{
    Eigen::MatrixXd E(2, count * count);
    const double step = 2.0 * R / double(count);
    for (Index iy = 0; iy < count; ++iy)
        for (Index ix = 0; ix < count; ++ix) {
            E(0, iy * count + ix) = -R + (double(ix) + 0.5) * step;
            E(1, iy * count + ix) = -R + (double(iy) + 0.5) * step;
        }
    return E;
}

Eigen::MatrixXd cantor_points(double x0, double x1, double y, int depth)
{
    if (depth < 0)
        throw std::invalid_argument("cantor_points: depth must be >= 0");
    std::vector<double> left{x0};
    double len = x1 - x0;
    for (int d = 0; d < depth; ++d) {
        len /= 3.0;
        std::vector<double> next;
        next.reserve(left.size() * 2);
        for (double a : left) {
            next.push_back(a);
            next.push_back(a + 2.0 * len);
        }
        left.swap(next);
    }
    Eigen::MatrixXd E(2, Index(2 * left.size()));
    for (std::size_t i = 0; i < left.size(); ++i) {
        E(0, Index(2 * i)) = left[i];
        E(0, Index(2 * i + 1)) = left[i] + len;
    }
    E.row(1).setConstant(y);
    return E;
}

KpzReport kpz_check(const ModelParams& params, const Eigen::MatrixXd& E, double euclidean_dim,
                    int replicas, int grid_n, const std::vector<double>& scales,
                    std::uint64_t first_replica)
{
    params.validate();
    if (params.m != 2)
        throw std::invalid_argument("kpz_check: defined for m = 2");
    if (!is_non_degenerate(params))
        throw std::invalid_argument("kpz_check: degenerate parameters");
    if (replicas < 1)
        throw std::invalid_argument("kpz_check: replicas must be >= 1");
    if (first_replica % 2 != 0)
        throw std::invalid_argument("kpz_check: first_replica must be even");

    const auto sampler = FieldSampler::shared(params, grid_n);
    const Grid& grid = sampler->grid();
    std::vector<BoxCover> covers(static_cast<std::size_t>(replicas));
    const std::size_t pairs = (covers.size() + 1) / 2;
    parallel_for(pairs, [&](std::size_t p) {
        auto [a, b] = sampler->sample_pair(first_replica / 2 + p);
        const FieldSlice* slices[2] = {&a, &b};
        for (std::size_t half = 0; half < 2 && 2 * p + half < covers.size(); ++half) {
            const DiscreteMeasure mu = build_measure(*slices[half]);
            covers[2 * p + half] = cover_set(E, &mu, grid, scales);
        }
    });

    KpzReport report;
    report.estimate = estimate_dimension(covers, 2);
    report.s_hat = report.estimate.s_hat;
    report.xi = kpz_transform(params, report.s_hat);
    report.euclidean_dim = euclidean_dim;
    report.target_s = kpz_inverse(params, euclidean_dim);
    for (const BoxCover& c : covers)
        report.per_replica.push_back(estimate_dimension({c}, 2).s_hat);
    report.spread = stddev(report.per_replica);
    return report;
}

GeodesicDimensionReport geodesic_dimension_experiment(
    const PullbackChart& chart, double gamma2, const std::vector<std::pair<Index, Index>>& pairs,
    int samples, const Grid& domain, const std::vector<double>& scales)
{
    if (pairs.empty())
        throw std::invalid_argument("geodesic_dimension_experiment: no pairs");
    GeodesicDimensionReport report;
    report.conjectured = 1.0 + gamma2 / 8.0;
    for (const auto& [i, j] : pairs) {
        const std::vector<GeodesicPoint> line = geodesic_polyline(chart, i, j, samples);
        std::vector<Index> atoms;
        for (const GeodesicPoint& p : line)
            if (!p.repeat)
                atoms.push_back(p.atom);
        Eigen::MatrixXd pts(chart.atoms().rows(), Index(atoms.size()));
        for (std::size_t k = 0; k < atoms.size(); ++k)
            pts.col(Index(k)) = chart.atoms().col(atoms[k]);
        if ((pts.colwise() - pts.col(0)).cwiseAbs().maxCoeff() == 0.0)
            throw std::invalid_argument("geodesic_dimension_experiment: degenerate polyline");
        report.per_pair.push_back(hausdorff_estimate(pts, nullptr, domain, scales).s_hat);
    }
    for (double s : report.per_pair)
        report.mean += s;
    report.mean /= double(report.per_pair.size());
    report.spread = stddev(report.per_pair);
    return report;
}

void write_kpz_csv(std::ostream& out, const KpzReport& report)
{
    out << "scale,log_content,s_hat,target\n";
    for (std::size_t k = 0; k < report.estimate.scales.size(); ++k)
        out << format_double(report.estimate.scales[k]) << ','
            << format_double(report.estimate.log_content[k]) << ','
            << format_double(report.s_hat) << ',' << format_double(report.target_s) << '\n';
}

std::string kpz_summary_json(const KpzReport& report, const std::string& set_name)
{
    nlohmann::json j;
    j["experiment"] = "kpz";
    j["set"] = set_name;
    j["s_hat"] = report.s_hat;
    j["xi"] = report.xi;
    j["euclidean_dim"] = report.euclidean_dim;
    j["target_s"] = report.target_s;
    j["spread"] = report.spread;
    j["replicas"] = report.per_replica.size();
    j["residual"] = report.estimate.residual;
    j["clamped"] = report.estimate.clamped;
    return j.dump();
}

}  // namespace mrm
