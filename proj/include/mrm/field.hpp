#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "mrm/grid.hpp"
#include "mrm/model.hpp"

namespace mrm {

/// Radial profile of the cutoff-l log-correlation:
///   ln(T/l) + 1 - r/l   on [0, l],
///   ln(T/r)             on [l, T],
///   0                   beyond T.
/// Requires 0 < l <= T.
template <typename Scalar>
Scalar rho(Scalar r, Scalar l, Scalar T)
{
    using std::log;
    if (!(l > Scalar(0)) || l > T)
        throw std::invalid_argument("rho: cutoff must satisfy 0 < l <= T");
    r = r < Scalar(0) ? -r : r;
    if (r <= l)
        return log(T / l) + Scalar(1) - r / l;
    if (r <= T)
        return log(T / r);
    return Scalar(0);
}

/// Quadrature settings for the m = 2 kernel. The integral over the angle
/// is split at the profile's breakpoints and each piece is integrated with
/// a tanh-sinh rule of the given step.
struct KernelQuadrature
{
    double step = 1.0 / 32.0;
    /// Coarsest step accepted.
    static constexpr double max_step = 0.25;
};

/// Isotropic covariance kernel K_l at distance r in dimension m: rho(r) for
/// m = 1, and the rotation average (1/2pi) int rho(r |cos t|) dt for m = 2.
double kernel(double r, double l, double T, int m, const KernelQuadrature& quad = {});

/// kernel evaluated at the point x (m = x.size()).
double kernel(const Eigen::Ref<const Eigen::VectorXd>& x, double l, double T,
              const KernelQuadrature& quad = {});

struct EmbeddingError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Factorization of a stationary covariance on a periodic grid of side
/// `side` (m dims). Sampling multiplies white noise by `amplitude` in
/// Fourier space, or by `dense_factor` when the circulant embedding had to
/// be abandoned.
struct SpectralFactor
{
    int m = 1;
    int side = 0;
    /// sqrt(max(eigenvalue, 0) / side^m), one entry per Fourier mode.
    Eigen::ArrayXd amplitude;
    /// Sum of |negative eigenvalues| over sum of |eigenvalues|.
    double negative_mass = 0.0;
    bool clamped = false;
    /// Dense fallback: grid covariance = dense_factor * dense_factor^T.
    bool dense = false;
    Eigen::MatrixXd dense_factor;
};

inline constexpr double kClampTolerance = 1e-6;
inline constexpr Index kDenseFallbackLimit = 4096;

/// Circulant embedding of the covariance row `cov_row` (side^m entries,
/// row-major, entry 0 = zero lag). Negative eigenvalues carrying at most
/// kClampTolerance relative mass are clamped. Above that, when the sampled
/// grid (sampled_n^m points) is small enough, falls back to a dense
/// eigen-factorization of its covariance; otherwise throws EmbeddingError.
SpectralFactor spectral_factorization(const Eigen::ArrayXd& cov_row, int m, int side,
                                      int sampled_n = 0);

/// Grid sample of the cutoff-l log-correlated field, shifted so that
/// E[exp(value)] = 1.
struct FieldSlice
{
    Grid grid;
    double T = 1.0;
    double gamma2 = 0.0;
    double cutoff_l = 0.0;
    double var0 = 0.0;  // gamma2 * K_l(0)
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;
    std::uint64_t layer = 0;
    Eigen::ArrayXd values;

    double spacing() const { return grid.spacing(); }
};

/// Samples stationary Gaussian fields with covariance gamma2 * K_l on a
/// grid. Holds the spectral factor, so build once and sample many times.
class FieldSampler
{
public:
    /// cutoff_l <= 0 selects l = spacing.
    FieldSampler(const ModelParams& params, int grid_n, double cutoff_l = 0.0,
                 const KernelQuadrature& quad = {});

    /// Replicas 2k and 2k+1 come from the real and imaginary parts of one
    /// complex transform; sample() recomputes the pair and keeps one half.
    FieldSlice sample(std::uint64_t replica, std::uint64_t layer = 0) const;
    std::pair<FieldSlice, FieldSlice> sample_pair(std::uint64_t pair_index,
                                                  std::uint64_t layer = 0) const;

    const SpectralFactor& factor() const { return *factor_; }
    const Grid& grid() const { return grid_; }
    double cutoff() const { return l_; }
    int padded_side() const { return factor_->side; }
    const ModelParams& params() const { return params_; }

    /// Process-wide cache of samplers keyed by everything that determines
    /// the spectral factor.
    static std::shared_ptr<const FieldSampler> shared(const ModelParams& params, int grid_n,
                                                      double cutoff_l = 0.0);

private:
    FieldSlice blank(std::uint64_t replica, std::uint64_t layer) const;

    ModelParams params_;
    Grid grid_;
    double l_;
    std::shared_ptr<const SpectralFactor> factor_;
};

/// Periodic covariance row gamma2 * K_l(periodic lag) on a grid of `side`
/// cells of width h.
Eigen::ArrayXd periodic_covariance_row(int m, int side, double h, double gamma2, double l,
                                       double T, const KernelQuadrature& quad = {});

/// Smallest side >= min_side whose factors are all in {2,3,5,7}, even.
int fft_friendly_size(int min_side);

/// Convenience wrapper over FieldSampler::shared(...).sample(...).
FieldSlice sample_field(const ModelParams& params, int grid_n, double cutoff_l,
                        std::uint64_t replica, std::uint64_t layer = 0);

}  // namespace mrm
