#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "mrm/field.hpp"
#include "mrm/grid.hpp"
#include "mrm/model.hpp"

namespace mrm {

struct MeasureMeta
{
    ModelParams params;
    int layers = 0;
    double cutoff_l = 0.0;
    /// Grid the atoms were built on; grid.n == 0 when atoms are not a full grid.
    Grid grid{0, 0, 0.0};
    std::uint64_t replica = 0;
};

/// Weighted atoms in R^m. Column i of `atoms` carries mass weights(i).
struct DiscreteMeasure
{
    Eigen::MatrixXd atoms;   // m x N
    Eigen::VectorXd weights; // N
    MeasureMeta meta;

    int dim() const { return static_cast<int>(atoms.rows()); }
    Index size() const { return weights.size(); }
    double total_mass() const { return weights.sum(); }
    /// True when atom i sits on cell i of meta.grid.
    bool is_full_grid() const { return meta.grid.n > 0 && meta.grid.size() == size(); }

    /// Copy with weights scaled to unit mass. Throws on zero mass.
    DiscreteMeasure normalized() const;
};

/// weight_i = exp(field_i) * spacing^m on the field's grid.
DiscreteMeasure build_measure(const FieldSlice& field);

/// Layers M^(0) .. M^(n) of an n-fold chaos composition. M^(0) is uniform;
/// layer k multiplies by exp(omega^(k)) drawn at intermittency gamma2 / n
/// from RNG layer k-1, so n = 1 reproduces build_measure bit for bit.
std::vector<DiscreteMeasure> compose_chaos(const ModelParams& params, int n, int grid_n,
                                           std::uint64_t replica = 0);

/// Atoms with |x| < R (cell centers strictly inside B_R). Keeps meta.grid
/// so binning remains possible; is_full_grid() becomes false.
DiscreteMeasure restrict_to_ball(const DiscreteMeasure& mu, double R);

/// Uniform weights spacing^m on the cells of `grid` whose centers lie
/// strictly inside B_R: the discretized Lebesgue measure on the ball.
DiscreteMeasure lebesgue_ball(const Grid& grid);

/// Mass of the sup-norm ball {|x|_inf < radius} centered at the origin.
/// The grid must have an even number of cells per side and radius must be
/// a whole number of cells, so the box is an exact union of cells.
double centered_box_mass(const DiscreteMeasure& mu, double radius);

struct ScalingReport
{
    std::vector<double> qs;
    std::vector<double> radii;
    std::vector<double> zeta_hat;
    /// Monte Carlo standard error of each slope (grouped jackknife over
    /// replicas).
    std::vector<double> stderr_mc;
    /// OLS standard error from regression residuals.
    std::vector<double> stderr_fit;
    /// moment(q, r) = replica mean of M(B_r)^q, and its standard error.
    Eigen::MatrixXd moment;
    Eigen::MatrixXd moment_stderr;
    int replicas = 0;
    /// Set when some q > 1 has zeta(q) <= m, i.e. the moment may not exist.
    bool moment_warning = false;
};

struct ScalingOptions
{
    int grid_n = 256;
    std::uint64_t first_replica = 0;
    int jackknife_groups = 20;
    /// Average M(box)^q over all disjoint boxes of the radius tiling the
    /// grid (one of them centered) instead of the centered box alone.
    bool tile_boxes = true;
};

/// Log-log regression of replica-averaged moments E[M(B_r)^q] against r,
/// with B_r a sup-norm ball of radius r. By stationarity every tile of the
/// grid is a valid B_r; see ScalingOptions::tile_boxes. Radii are snapped
/// to whole cells. Requires >= 3 radii, all <= T.
ScalingReport estimate_zeta(const ModelParams& params, const std::vector<double>& qs,
                            const std::vector<double>& radii, int replicas,
                            const ScalingOptions& options = {});

using DistanceFn = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&,
                                        const Eigen::Ref<const Eigen::VectorXd>&)>;

double euclidean_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                          const Eigen::Ref<const Eigen::VectorXd>& b);

/// Energy sum_{i != j} w_i w_j d(x_i, x_j)^{-alpha}; the diagonal is left
/// out (it has no continuum counterpart). Throws on coincident atoms when
/// alpha > 0.
double energy(const DiscreteMeasure& mu, const DistanceFn& distance, double alpha);

}  // namespace mrm
