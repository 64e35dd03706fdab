#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "mrm/chaos.hpp"
#include "mrm/geometry.hpp"

namespace mrm {

/// t -> B(M([0, t])) on a time grid. Time runs over [0, 2R] with t = x + R.
struct TimeChangedPath
{
    Eigen::VectorXd t;
    Eigen::VectorXd clock;
    Eigen::VectorXd values;
    /// Variance of each Gaussian increment, i.e. the clock increments.
    Eigen::VectorXd variances;
};

/// Brownian motion run on the clock of a 1D full-grid measure. Each cell is
/// split into bm_resolution sub-steps over which the clock is linear.
TimeChangedPath time_change_1d(const DiscreteMeasure& measure, int bm_resolution,
                               std::uint64_t seed, std::uint64_t replica = 0);

/// Sum of the increment variances: the quadratic variation of B given the
/// clock. Equals clock(t_max).
double conditional_quadratic_variation(const TimeChangedPath& path);

/// Sum of squared realized increments.
double realized_quadratic_variation(const TimeChangedPath& path);

/// Value of the path at the grid time nearest to t.
double path_value(const TimeChangedPath& path, double t);

/// B(x) = W(Gamma(B_R intersect C(x))) realized atom-wise over the
/// support of a chart.
struct CornerField
{
    Eigen::MatrixXd points;    // m x P evaluation points
    Eigen::VectorXd values;    // B(x)
    Eigen::VectorXd variances; // Var[B(x) | M, Gamma]
    Eigen::VectorXd normals;   // g_i, one per support atom
    Eigen::VectorXd masses;    // v_i = (C_R / M(B_R)) w_i
    Eigen::VectorXd anchor;
};

/// Whether `atom` lies in the corner cube C(x) spanned by the anchor a and
/// x: for each axis the half-open interval (a_d, x_d] when x_d > a_d and
/// [x_d, a_d) when x_d < a_d; empty when x_d = a_d.
bool in_corner(const Eigen::Ref<const Eigen::VectorXd>& atom,
               const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& anchor);

/// Evaluates B at the given points (each in [-R, R]^m). The anchor defaults
/// to the origin; anchoring at (-R, ..., -R) lets one corner cover B_R.
CornerField corner_field(const PullbackChart& chart, double R, const Eigen::MatrixXd& points,
                         std::uint64_t seed, std::uint64_t replica = 0,
                         const Eigen::VectorXd& anchor = {});

/// Cov[B(x), B(y) | M, Gamma]: the atom mass shared by C(x) and C(y).
double corner_covariance(const CornerField& field, const PullbackChart& chart, Index a, Index b);

/// CSV: t,clock,B
void write_path_csv(std::ostream& out, const TimeChangedPath& path);
/// CSV: x[,y],B,variance
void write_corner_csv(std::ostream& out, const CornerField& field);

}  // namespace mrm
