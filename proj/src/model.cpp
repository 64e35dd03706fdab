#include "mrm/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mrm/io.hpp"

namespace mrm {

void ModelParams::validate() const
{
    if (m != 1 && m != 2)
        throw std::invalid_argument("dimension m must be 1 or 2");
    if (!(gamma2 >= 0.0))
        throw std::invalid_argument("gamma2 must be >= 0");
    if (!is_non_degenerate(*this))
        throw std::invalid_argument("degenerate parameters: psi'(1) = gamma2/2 must be < m");
    if (!(T > 0.0))
        throw std::invalid_argument("correlation length T must be > 0");
    if (!(R > 0.0))
        throw std::invalid_argument("domain radius R must be > 0");
}

bool is_non_degenerate(const ModelParams& p)
{
    return psi_prime_one(p) < static_cast<double>(p.m);
}

int min_steps(const ModelParams& p)
{
    p.validate();
    const double slope = psi_prime_one(p);
    if (slope < 1.0)
        return 1;
    // m psi(2) < n (m - psi'(1)); scan in exact arithmetic order.
    const double lhs = p.m * psi(p, 2.0);
    const double gap = p.m - slope;
    int n = 1;
    while (!(lhs < n * gap))
        ++n;
    return n;
}

double omega_lambda_moments(const ModelParams& p, double lambda, double q)
{
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw std::invalid_argument("lambda must lie in (0,1]");
    return std::pow(lambda, -psi(p, q));
}

ExponentTable exponent_table(const ModelParams& p, const std::vector<double>& qs)
{
    ExponentTable table;
    table.reserve(qs.size());
    for (double q : qs)
        table.push_back({q, psi(p, q), zeta(p, q)});
    return table;
}

double ball_volume(int m, double R)
{
    switch (m) {
    case 1: return 2.0 * R;
    case 2: return std::numbers::pi * R * R;
    default: throw std::invalid_argument("ball_volume: m must be 1 or 2");
    }
}

std::string to_header(const ModelParams& p)
{
    KeyValues kv;
    kv.set("m", p.m);
    kv.set("gamma2", p.gamma2);
    kv.set("T", p.T);
    kv.set("R", p.R);
    kv.set("seed", static_cast<unsigned long long>(p.seed));
    return kv.str();
}

ModelParams params_from_header(const std::string& line)
{
    const auto kv = KeyValues::parse(line);
    ModelParams p;
    if (kv.has("m"))
        p.m = static_cast<int>(kv.get_int("m"));
    if (kv.has("gamma2"))
        p.gamma2 = kv.get_double("gamma2");
    if (kv.has("T"))
        p.T = kv.get_double("T");
    if (kv.has("R"))
        p.R = kv.get_double("R");
    if (kv.has("seed"))
        p.seed = kv.get_uint("seed");
    return p;
}

}  // namespace mrm
