#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "mrm/transport.hpp"

namespace mrm {

/// Flat random Riemannian structure carried by a composed transport map.
/// The support atoms are the chained map's origins; phi sends them to
/// their images and chi is the nearest-image inverse.
struct PullbackChart
{
    ChainedMap chained;
    InverseMap inverse;
    /// M(B_R): total layer-n mass of the support atoms.
    double mass_BR = 0.0;
    /// Lebesgue measure of B_R as discretized on the grid.
    double C_R = 0.0;

    PullbackChart(ChainedMap map, double mass, double volume);

    Index size() const { return chained.atom_count(); }
    const Eigen::MatrixXd& atoms() const { return chained.origins(); }
    const Eigen::MatrixXd& images() const { return chained.images(); }
    const Eigen::VectorXd& weights() const { return chained.weights(); }
};

/// Chart for a map built on `grid`; C_R is the mass of lebesgue_ball(grid).
PullbackChart make_chart(ChainedMap chained, const Grid& grid);

/// (M(B_R)/C_R)^2.
double metric_factor(const PullbackChart& chart);

/// Distance between support atoms i and j: (M(B_R)/C_R) |phi(x_i) - phi(x_j)|.
double dist(const PullbackChart& chart, Index i, Index j);

/// Support atom nearest to x; `exact` is false when x is not an atom.
struct SupportAtom
{
    Index index = 0;
    bool exact = true;
};
SupportAtom locate(const PullbackChart& chart, const Eigen::Ref<const Eigen::VectorXd>& x);

/// dist between arbitrary points, each snapped to its nearest support atom.
/// `snapped` reports whether either point was off the support.
double dist(const PullbackChart& chart, const Eigen::Ref<const Eigen::VectorXd>& x,
            const Eigen::Ref<const Eigen::VectorXd>& y, bool* snapped = nullptr);

struct GeodesicPoint
{
    double t = 0.0;
    /// t phi(x) + (1 - t) phi(y), before snapping.
    Eigen::VectorXd image;
    /// chi(image): a support atom.
    Index atom = 0;
    Eigen::VectorXd point;
    /// Same atom as the previous polyline point.
    bool repeat = false;
};

/// chi(t phi(x_i) + (1 - t) phi(x_j)); t = 1 gives x_i, t = 0 gives x_j.
GeodesicPoint geodesic(const PullbackChart& chart, Index i, Index j, double t);

/// Geodesic at t = k/(samples-1), k = 0..samples-1, i.e. from x_j to x_i.
std::vector<GeodesicPoint> geodesic_polyline(const PullbackChart& chart, Index i, Index j,
                                             int samples);

/// Largest distance from an image to its nearest other image.
double image_spacing(const PullbackChart& chart);

/// CSV: t,x[,y],image_x[,image_y],atom,repeat
void write_polyline_csv(std::ostream& out, const std::vector<GeodesicPoint>& polyline);

}  // namespace mrm
