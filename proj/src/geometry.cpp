#include "mrm/geometry.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "mrm/io.hpp"

namespace mrm {

PullbackChart::PullbackChart(ChainedMap map, double mass, double volume)
    : chained(std::move(map)), inverse(chained), mass_BR(mass), C_R(volume)
{
    if (!(mass_BR > 0.0))
        throw std::invalid_argument("PullbackChart: zero mass on B_R");
    if (!(C_R > 0.0))
        throw std::invalid_argument("PullbackChart: C_R must be > 0");
}

PullbackChart make_chart(ChainedMap chained, const Grid& grid)
{
    if (chained.steps.empty())
        throw std::invalid_argument("make_chart: empty chained map");
    const double mass = chained.weights().sum();
    return PullbackChart(std::move(chained), mass, lebesgue_ball(grid).total_mass());
}

double metric_factor(const PullbackChart& chart)
{
    const double ratio = chart.mass_BR / chart.C_R;
    return ratio * ratio;
}

namespace {

void check_atom(const PullbackChart& chart, Index i)
{
    if (i < 0 || i >= chart.size())
        throw std::out_of_range("geometry: atom index outside the support");
}

}  // namespace

double dist(const PullbackChart& chart, Index i, Index j)
{
    check_atom(chart, i);
    check_atom(chart, j);
    return chart.mass_BR / chart.C_R * (chart.images().col(i) - chart.images().col(j)).norm();
}

SupportAtom locate(const PullbackChart& chart, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    const Eigen::MatrixXd& atoms = chart.atoms();
    SupportAtom best;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < atoms.cols(); ++i) {
        const double d = (atoms.col(i) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best.index = i;
        }
    }
    best.exact = best_d == 0.0;
    return best;
}

double dist(const PullbackChart& chart, const Eigen::Ref<const Eigen::VectorXd>& x,
            const Eigen::Ref<const Eigen::VectorXd>& y, bool* snapped)
{
    const SupportAtom a = locate(chart, x);
    const SupportAtom b = locate(chart, y);
    if (snapped)
        *snapped = !a.exact || !b.exact;
    return dist(chart, a.index, b.index);
}

GeodesicPoint geodesic(const PullbackChart& chart, Index i, Index j, double t)
{
    check_atom(chart, i);
    check_atom(chart, j);
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("geodesic: t must lie in [0, 1]");
    GeodesicPoint p;
    p.t = t;
    p.image = t * chart.images().col(i) + (1.0 - t) * chart.images().col(j);
    p.atom = chart.inverse.nearest(p.image);
    p.point = chart.atoms().col(p.atom);
    return p;
}

std::vector<GeodesicPoint> geodesic_polyline(const PullbackChart& chart, Index i, Index j,
                                             int samples)
{
    if (samples < 2)
        throw std::invalid_argument("geodesic_polyline: samples must be >= 2");
    std::vector<GeodesicPoint> out;
    out.reserve(std::size_t(samples));
    for (int k = 0; k < samples; ++k) {
        const double t = k == samples - 1 ? 1.0 : double(k) / double(samples - 1);
        GeodesicPoint p = geodesic(chart, i, j, t);
        p.repeat = !out.empty() && out.back().atom == p.atom;
        out.push_back(std::move(p));
    }
    return out;
}

double image_spacing(const PullbackChart& chart)
{
    const Eigen::MatrixXd& y = chart.images();
    double spacing = 0.0;
    for (Index i = 0; i < y.cols(); ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < y.cols(); ++j)
            if (j != i)
                nearest = std::min(nearest, (y.col(i) - y.col(j)).squaredNorm());
        if (std::isfinite(nearest))
            spacing = std::max(spacing, nearest);
    }
    return std::sqrt(spacing);
}

void write_polyline_csv(std::ostream& out, const std::vector<GeodesicPoint>& polyline)
{
    const Index m = polyline.empty() ? 2 : polyline.front().point.size();
    out << "t,x";
    if (m > 1)
        out << ",y";
    out << ",image_x";
    if (m > 1)
        out << ",image_y";
    out << ",atom,repeat\n";
    for (const GeodesicPoint& p : polyline) {
        out << format_double(p.t);
        for (Index d = 0; d < m; ++d)
            out << ',' << format_double(p.point(d));
        for (Index d = 0; d < m; ++d)
            out << ',' << format_double(p.image(d));
        out << ',' << p.atom << ',' << (p.repeat ? 1 : 0) << '\n';
    }
}

}  // namespace mrm
