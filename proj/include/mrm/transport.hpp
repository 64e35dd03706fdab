#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mrm/chaos.hpp"

namespace mrm {

using CostFn = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&,
                                    const Eigen::Ref<const Eigen::VectorXd>&)>;

/// |x - y|^2.
double squared_euclidean(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y);

/// Dense cost matrix C(i,j) = cost(source_i, target_j).
Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                            const CostFn& cost);

struct SolverInfo
{
    double epsilon = 0.0;
    int iterations = 0;
    /// max of the L1 errors of the two marginals (measures normalized to 1).
    double marginal_error = 0.0;
    bool converged = true;
};

struct SinkhornOptions
{
    /// Final entropic regularization, in cost units.
    double epsilon = 1e-2;
    double tol = 1e-6;
    int max_iter = 20000;
    /// epsilon starts at epsilon * 2^halvings and is halved down to epsilon.
    int annealing_halvings = 3;
};

/// Coupling between two discrete measures. Both sides are normalized to
/// unit mass before solving; `source`/`target` hold the normalized copies.
struct TransportPlan
{
    DiscreteMeasure source;
    DiscreteMeasure target;
    Eigen::SparseMatrix<double> coupling;
    double cost_value = 0.0;
    SolverInfo info;
};

struct SolverError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Entropy-regularized OT by Sinkhorn scaling with epsilon annealing and
/// log-domain absorption. Non-convergence is flagged in info, not thrown.
TransportPlan sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const CostFn& cost,
                       const SinkhornOptions& options = {});

enum class MapKind
{
    ExactAssignment,
    Barycentric,
};

/// One image point per source point.
struct TransportMap
{
    Eigen::MatrixXd sources;  // m x N
    Eigen::MatrixXd images;   // m x N
    MapKind kind = MapKind::Barycentric;
    /// For exact assignments: target index of each source (else empty).
    std::vector<Index> assignment;

    Index size() const { return sources.cols(); }
};

/// Optimal permutation between two equal-count uniform measures. Ties are
/// broken toward the lowest target index.
TransportMap exact_assignment(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                              const CostFn& cost);

/// Optimal assignment for a square cost matrix; result[i] is the column of
/// row i. Shortest augmenting path with potentials, O(n^3).
std::vector<Index> solve_assignment(const Eigen::MatrixXd& cost);

/// T(x_i) = sum_j pi_ij y_j / sum_j pi_ij.
TransportMap barycentric_map(const TransportPlan& plan);

/// Step k of a chained map, in image coordinates: `map` sends
/// phi^(k-1)(x) to phi^(k)(x) for the step's points x (`origins`), whose
/// masses in layer k are `weights`.
struct ChainStep
{
    Eigen::MatrixXd origins;  // m x N_k, original coordinates
    Eigen::VectorXd weights;  // unnormalized layer-k masses
    TransportMap map;
    SolverInfo info;
    double cost_value = 0.0;
};

/// phi^(k) = S^(k) o ... o S^(1); the composed map is the last step's
/// origins -> images.
struct ChainedMap
{
    std::vector<ChainStep> steps;
    std::string solver;
    double epsilon = 0.0;
    double tol = 0.0;

    Index atom_count() const { return steps.empty() ? 0 : steps.back().origins.cols(); }
    const Eigen::MatrixXd& origins() const { return steps.back().origins; }
    const Eigen::MatrixXd& images() const { return steps.back().map.images; }
    const Eigen::VectorXd& weights() const { return steps.back().weights; }
};

enum class SolverKind
{
    Auto,
    Sinkhorn,
    Exact,
};

struct MultiStepOptions
{
    SolverKind solver = SolverKind::Auto;
    SinkhornOptions sinkhorn;
    /// Auto picks the exact route when the ball holds at most this many atoms.
    Index exact_threshold = 4096;
};

/// Multi-step transport of M^(n) to the Lebesgue measure on B_R.
///
/// `layers` are M^(0) .. M^(n) on a full grid (as from compose_chaos).
/// Step k transports phi^(k-1)#Mbar^(k) to lambda_R with quadratic cost.
/// The Sinkhorn route acts on the grid atoms inside B_R and keeps one
/// barycentric image per atom. The exact route quantizes each layer into
/// as many equal-mass points as lambda_R has atoms (see quantize) and
/// solves an assignment; phi^(k-1) is evaluated on the new points through
/// their nearest layer-(k-1) point.
ChainedMap multi_step(const std::vector<DiscreteMeasure>& layers,
                      const MultiStepOptions& options = {});

/// `count` equal-mass points representing a grid measure: point j sits at
/// the (j + 1/2)/count quantile of the mass taken in atom order, spread
/// along x inside its cell in proportion to the cell's mass. Returns the
/// points with weights total/count.
DiscreteMeasure quantize(const DiscreteMeasure& mu, Index count);

/// Nearest-image inverse of a map: chi(y) is the source whose image is
/// closest to y, ties to the lowest index.
class InverseMap
{
public:
    InverseMap(Eigen::MatrixXd sources, Eigen::MatrixXd images);
    explicit InverseMap(const ChainedMap& chained);

    Index nearest(const Eigen::Ref<const Eigen::VectorXd>& y) const;
    Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& y) const
    {
        return sources_.col(nearest(y));
    }

    const Eigen::MatrixXd& sources() const { return sources_; }
    const Eigen::MatrixXd& images() const { return images_; }

private:
    Eigen::MatrixXd sources_;
    Eigen::MatrixXd images_;
};

InverseMap invert_map(const ChainedMap& chained);

/// Measure with atoms at the map images carrying the given source weights.
DiscreteMeasure pushforward(const TransportMap& map, const Eigen::VectorXd& weights);
DiscreteMeasure pushforward(const TransportMap& map, const DiscreteMeasure& measure);

/// Sums the weights of each atom into the grid cell containing it.
/// Atoms outside [-R,R]^m are clamped to the border cells.
Eigen::VectorXd bin_to_grid(const DiscreteMeasure& mu, const Grid& grid);

/// Total variation distance 0.5 * sum |a_i/|a| - b_i/|b||.
double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// ".tmap" text format: a key=value header line (steps, atom_count,
/// solver, epsilon, tol, plus `extra`), a column line, then one CSV row
/// per step point: step,atom,weight,origin...,source...,image...
void write_tmap(std::ostream& out, const ChainedMap& chained, const std::string& extra = {});
ChainedMap read_tmap(std::istream& in, std::string* header = nullptr);

}  // namespace mrm
