#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mrm {

/// Parameters of a log-normal multifractal random measure on [-R,R]^m.
///
/// The struct is a plain value; call validate() before computing with it.
/// is_non_degenerate() deliberately accepts unvalidated values.
struct ModelParams
{
    int m = 2;             // spatial dimension, 1 or 2
    double gamma2 = 1.0;   // intermittency gamma^2
    double T = 1.0;        // correlation length
    double R = 1.0;        // domain radius
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless m in {1,2}, gamma2 >= 0,
    /// psi'(1) = gamma2/2 < m, T > 0 and R > 0.
    void validate() const;

    ModelParams with_gamma2(double g2) const
    {
        ModelParams p = *this;
        p.gamma2 = g2;
        return p;
    }

    bool operator==(const ModelParams&) const = default;
};

// Closed forms of the log-normal specialization. Templated so they can be
// evaluated in extended precision by the oracles.

template <typename Scalar>
Scalar psi(Scalar gamma2, Scalar q)
{
    return Scalar(0.5) * gamma2 * q * (q - Scalar(1));
}

template <typename Scalar>
Scalar zeta(int m, Scalar gamma2, Scalar q)
{
    return Scalar(m) * q - psi(gamma2, q);
}

/// Laplace exponent psi(q) = (gamma^2/2) q (q-1); psi(1) = 0.
inline double psi(const ModelParams& p, double q) { return psi(p.gamma2, q); }

/// psi'(1), the intermittency of the measure.
inline double psi_prime_one(const ModelParams& p) { return 0.5 * p.gamma2; }

/// Structure exponent zeta(q) = m q - psi(q).
inline double zeta(const ModelParams& p, double q) { return zeta(p.m, p.gamma2, q); }

/// psi'(1) < m, i.e. gamma^2 < 2m.
bool is_non_degenerate(const ModelParams& p);

/// Number of chaos layers needed by the multi-step transport.
/// 1 when psi'(1) < 1, else the smallest n with m psi(2) < n (m - psi'(1)).
int min_steps(const ModelParams& p);

/// E[exp(q Omega_lambda)] = lambda^{-psi(q)} for lambda in (0,1].
double omega_lambda_moments(const ModelParams& p, double lambda, double q);

struct ExponentRow
{
    double q;
    double psi;
    double zeta;
};

using ExponentTable = std::vector<ExponentRow>;

ExponentTable exponent_table(const ModelParams& p, const std::vector<double>& qs);

/// Lebesgue measure of the closed ball B_R in R^m.
double ball_volume(int m, double R);

/// Flat key=value block ("m=2 gamma2=1 T=1 R=1 seed=0"), doubles printed
/// with round-trip precision.
std::string to_header(const ModelParams& p);

/// Inverse of to_header. Unknown keys are ignored; missing keys keep
/// defaults. Does not validate.
ModelParams params_from_header(const std::string& line);

}  // namespace mrm
