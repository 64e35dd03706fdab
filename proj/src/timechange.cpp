#include "mrm/timechange.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "mrm/io.hpp"
#include "mrm/parallel.hpp"
#include "mrm/rng.hpp"

namespace mrm {

TimeChangedPath time_change_1d(const DiscreteMeasure& measure, int bm_resolution,
                               std::uint64_t seed, std::uint64_t replica)
{
    if (measure.dim() != 1 || !measure.is_full_grid())
        throw std::invalid_argument("time_change_1d: needs a 1D full-grid measure");
    if (bm_resolution < 1)
        throw std::invalid_argument("time_change_1d: bm_resolution must be >= 1");
    const Grid& g = measure.meta.grid;
    const Index steps = g.n * bm_resolution;
    const double dt = g.spacing() / bm_resolution;

    TimeChangedPath path;
    path.t.resize(steps + 1);
    path.clock.resize(steps + 1);
    path.values.resize(steps + 1);
    path.variances.resize(steps);
    path.t(0) = path.clock(0) = path.values(0) = 0.0;

    CounterRng rng(stream_key(seed, replica, 0, StreamRole::Brownian));
    Index k = 0;
    for (Index cell = 0; cell < g.n; ++cell) {
        const double w = measure.weights(cell);
        if (w < 0.0)
            throw std::invalid_argument("time_change_1d: negative clock increment");
        const double dv = w / bm_resolution;
        for (int s = 0; s < bm_resolution; ++s, ++k) {
            path.variances(k) = dv;
            path.t(k + 1) = double(k + 1) * dt;
            path.clock(k + 1) = path.clock(k) + dv;
            path.values(k + 1) = path.values(k) + std::sqrt(dv) * rng.normal();
        }
    }
    assert(path.variances.minCoeff() >= 0.0);
    return path;
}

double conditional_quadratic_variation(const TimeChangedPath& path) { return path.variances.sum(); }

double realized_quadratic_variation(const TimeChangedPath& path)
{
    const Index n = path.values.size();
    return (path.values.tail(n - 1) - path.values.head(n - 1)).squaredNorm();
}

double path_value(const TimeChangedPath& path, double t)
{
    const Index n = path.t.size();
    const double dt = path.t(n - 1) / double(n - 1);
    const Index k = std::clamp<Index>(static_cast<Index>(std::llround(t / dt)), 0, n - 1);
    return path.values(k);
}

bool in_corner(const Eigen::Ref<const Eigen::VectorXd>& atom,
               const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& anchor)
{
    for (Index d = 0; d < x.size(); ++d) {
        const double a = anchor(d), v = atom(d), e = x(d);
        if (e > a) {
            if (!(v > a && v <= e))
                return false;
        } else if (e < a) {
            if (!(v >= e && v < a))
                return false;
        } else {
            return false;
        }
    }
    return true;
}

CornerField corner_field(const PullbackChart& chart, double R, const Eigen::MatrixXd& points,
                         std::uint64_t seed, std::uint64_t replica, const Eigen::VectorXd& anchor)
{
    const Index m = chart.atoms().rows();
    if (points.rows() != m)
        throw std::invalid_argument("corner_field: points and chart differ in dimension");
    if (points.size() > 0 && points.cwiseAbs().maxCoeff() > R)
        throw std::invalid_argument("corner_field: evaluation point outside [-R, R]^m");

    CornerField field;
    field.points = points;
    field.anchor = anchor.size() == 0 ? Eigen::VectorXd::Zero(m) : anchor;
    if (field.anchor.size() != m)
        throw std::invalid_argument("corner_field: anchor has the wrong dimension");
    const Index n = chart.size();
    field.masses = chart.C_R / chart.mass_BR * chart.weights();
    field.normals.resize(n);
    CounterRng rng(stream_key(seed, replica, 0, StreamRole::WhiteNoise));
    for (Index i = 0; i < n; ++i)
        field.normals(i) = rng.normal();

    const Index P = points.cols();
    field.values = Eigen::VectorXd::Zero(P);
    field.variances = Eigen::VectorXd::Zero(P);
    const Eigen::VectorXd amplitude = field.masses.cwiseSqrt();
    parallel_for(std::size_t(P), [&](std::size_t p) {
        const Index j = Index(p);
        double value = 0.0, variance = 0.0;
        for (Index i = 0; i < n; ++i)
            if (in_corner(chart.atoms().col(i), points.col(j), field.anchor)) {
                value += field.normals(i) * amplitude(i);
                variance += field.masses(i);
            }
        field.values(j) = value;
        field.variances(j) = variance;
    });
    return field;
}

double corner_covariance(const CornerField& field, const PullbackChart& chart, Index a, Index b)
{
    double cov = 0.0;
    for (Index i = 0; i < chart.size(); ++i)
        if (in_corner(chart.atoms().col(i), field.points.col(a), field.anchor) &&
            in_corner(chart.atoms().col(i), field.points.col(b), field.anchor))
            cov += field.masses(i);
    return cov;
}

void write_path_csv(std::ostream& out, const TimeChangedPath& path)
{
    out << "t,clock,B\n";
    for (Index k = 0; k < path.t.size(); ++k)
        out << format_double(path.t(k)) << ',' << format_double(path.clock(k)) << ','
            << format_double(path.values(k)) << '\n';
}

void write_corner_csv(std::ostream& out, const CornerField& field)
{
    const Index m = field.points.rows();
    out << 'x';
    if (m > 1)
        out << ",y";
    out << ",B,variance\n";
    for (Index j = 0; j < field.points.cols(); ++j) {
        for (Index d = 0; d < m; ++d)
            out << format_double(field.points(d, j)) << ',';
        out << format_double(field.values(j)) << ',' << format_double(field.variances(j)) << '\n';
    }
}

}  // namespace mrm
