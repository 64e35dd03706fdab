#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mrm/chaos.hpp"
#include "mrm/geometry.hpp"

namespace mrm {

/// Masses of the dyadic boxes that meet a set E, one list per scale.
/// Boxes are aligned to the corner (-R, ..., -R) of the domain grid.
struct BoxCover
{
    std::vector<double> scales;
    std::vector<std::vector<double>> masses;
};

/// Covers E (m x K points) at each scale. nu == nullptr selects Lebesgue
/// measure (box mass scale^m); otherwise nu must be a full-grid measure on
/// `domain` and every scale a whole number of cells. Scales must be
/// 2R / 2^j for integers j >= 0.
BoxCover cover_set(const Eigen::MatrixXd& E, const DiscreteMeasure* nu, const Grid& domain,
                   const std::vector<double>& scales);

struct DimensionEstimate
{
    double s_hat = 0.0;
    std::vector<double> scales;
    /// Mean over covers of log sum_box nu(box)^{s_hat/2}, per scale.
    std::vector<double> log_content;
    /// RMS residual of the log-content regression at s_hat.
    double residual = 0.0;
    int covers = 0;
    bool lebesgue = false;
    /// The root fell outside [0, m] and was clipped.
    bool clamped = false;
};

/// Root in s of the regression slope of log content(s, delta) against
/// log delta, content(s, delta) = sum over covering boxes of
/// nu(box)^{s/2}. Several covers (replicas) are combined by averaging
/// their log-contents. Bisection on [0, 2m]; needs >= 3 scales.
DimensionEstimate estimate_dimension(const std::vector<BoxCover>& covers, int m,
                                     bool lebesgue = false);

/// Dimension of E relative to nu (nullptr: Lebesgue), from one cover.
DimensionEstimate hausdorff_estimate(const Eigen::MatrixXd& E, const DiscreteMeasure* nu,
                                     const Grid& domain, const std::vector<double>& scales);

/// xi(s/2) = zeta(s/2) for m = 2. s in [0, 2].
double kpz_transform(const ModelParams& params, double s);

/// Lower root s of xi(s/2) = dim. Throws when dim exceeds the maximum of xi.
double kpz_inverse(const ModelParams& params, double dim);

/// Dyadic scales 2R / 2^j for j = j_min .. j_max.
std::vector<double> dyadic_scales(double R, int j_min, int j_max);

/// Test sets: `count` evenly spaced points on the horizontal segment
/// [x0, x1] x {y}.
Eigen::MatrixXd segment_points(double x0, double x1, double y, Index count);
/// Centers of a count x count lattice filling [-R, R]^2.
Eigen::MatrixXd square_points(double R, Index count);
/// Endpoints of the depth-`depth` intervals of the middle-thirds Cantor
/// set on [x0, x1], placed at height y.
Eigen::MatrixXd cantor_points(double x0, double x1, double y, int depth);

struct KpzReport
{
    DimensionEstimate estimate;
    double s_hat = 0.0;
    /// xi(s_hat / 2), to compare with euclidean_dim.
    double xi = 0.0;
    double euclidean_dim = 0.0;
    /// kpz_inverse(euclidean_dim): the exact value s_hat should approach.
    double target_s = 0.0;
    /// Standard deviation of the per-replica estimates.
    double spread = 0.0;
    std::vector<double> per_replica;
};

/// Estimates dim^M(E) over `replicas` independent measures M on a grid_n
/// grid and reports xi(s_hat / 2) against the Euclidean dimension of E.
KpzReport kpz_check(const ModelParams& params, const Eigen::MatrixXd& E, double euclidean_dim,
                    int replicas, int grid_n, const std::vector<double>& scales,
                    std::uint64_t first_replica = 0);

struct GeodesicDimensionReport
{
    double mean = 0.0;
    double spread = 0.0;
    std::vector<double> per_pair;
    /// 1 + gamma2 / 8.
    double conjectured = 0.0;
};

/// Euclidean box-counting dimension of geodesic polylines between the
/// given support-atom pairs. Report only.
GeodesicDimensionReport geodesic_dimension_experiment(
    const PullbackChart& chart, double gamma2, const std::vector<std::pair<Index, Index>>& pairs,
    int samples, const Grid& domain, const std::vector<double>& scales);

/// CSV: scale,log_content,s_hat,target
void write_kpz_csv(std::ostream& out, const KpzReport& report);
/// One JSON object on one line.
std::string kpz_summary_json(const KpzReport& report, const std::string& set_name);

}  // namespace mrm
