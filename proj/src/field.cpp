#include "mrm/field.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <fftw3.h>

#include "mrm/io.hpp"
#include "mrm/rng.hpp"

namespace mrm {

namespace {

constexpr double kHalfPi = 0.5 * std::numbers::pi;

// Tanh-sinh rule on [a,b]. Abscissae are formed from their distance to the
// nearer endpoint so that endpoint singularities are never evaluated.
template <typename F>
double tanh_sinh(F&& f, double a, double b, double step)
{
    const double half = 0.5 * (b - a);
    if (!(half > 0.0))
        return 0.0;
    constexpr double t_max = 3.5;
    const int n = static_cast<int>(std::ceil(t_max / step));
    double sum = 0.0;
    for (int k = -n; k <= n; ++k) {
        const double t = k * step;
        const double s = kHalfPi * std::sinh(std::abs(t));
        const double c = 2.0 / (std::exp(2.0 * s) + 1.0);  // 1 - |u|
        const double w = kHalfPi * std::cosh(t) * c * (2.0 - c);
        if (w == 0.0 || c == 0.0)
            continue;
        const double x = t >= 0.0 ? b - half * c : a + half * c;
        sum += w * f(x);
    }
    return sum * step * half;
}

std::mutex& fftw_planner_mutex()
{
    static std::mutex mtx;
    return mtx;
}

struct FftwBuffer
{
    explicit FftwBuffer(std::size_t n)
        : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)))
    {
        if (!data)
            throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;

    fftw_complex* data;
};

// In-place complex transform of a side^m array.
void fft_inplace(fftw_complex* data, int m, int side, int sign)
{
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = m == 1 ? fftw_plan_dft_1d(side, data, data, sign, FFTW_ESTIMATE)
                      : fftw_plan_dft_2d(side, side, data, data, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
}

Index power(int base, int m) { return m == 1 ? Index(base) : Index(base) * base; }

}  // namespace

double kernel(double r, double l, double T, int m, const KernelQuadrature& quad)
{
    if (!(l > 0.0) || l > T)
        throw std::invalid_argument("kernel: cutoff must satisfy 0 < l <= T");
    if (!(quad.step > 0.0) || quad.step > KernelQuadrature::max_step)
        throw std::invalid_argument("kernel: quadrature resolution below configured floor");
    r = std::abs(r);
    if (m == 1)
        return rho(r, l, T);
    if (m != 2)
        throw std::invalid_argument("kernel: m must be 1 or 2");

    // K(r) = (2/pi) int_0^{pi/2} rho(r sin p) dp, split where r sin p
    // crosses l and T.
    const double top = std::log(T / l) + 1.0;
    if (r == 0.0)
        return top;
    const double p_l = r > l ? std::asin(l / r) : kHalfPi;
    const double p_T = r > T ? std::asin(T / r) : kHalfPi;

    // Ramp piece in closed form: int_0^{p_l} (top - (r/l) sin p) dp.
    double integral = top * p_l - (r / l) * (1.0 - std::cos(p_l));
    if (p_T > p_l) {
        const double log_sin = tanh_sinh([](double p) { return std::log(std::sin(p)); }, p_l,
                                         p_T, quad.step);
        integral += (p_T - p_l) * std::log(T / r) - log_sin;
    }
    return integral / kHalfPi;
}

double kernel(const Eigen::Ref<const Eigen::VectorXd>& x, double l, double T,
              const KernelQuadrature& quad)
{
    return kernel(x.norm(), l, T, static_cast<int>(x.size()), quad);
}

int fft_friendly_size(int min_side)
{
    for (int n = std::max(2, min_side + (min_side & 1));; n += 2) {
        int k = n;
        for (int p : {2, 3, 5, 7})
            while (k % p == 0)
                k /= p;
        if (k == 1)
            return n;
    }
}

Eigen::ArrayXd periodic_covariance_row(int m, int side, double h, double gamma2, double l,
                                       double T, const KernelQuadrature& quad)
{
    Eigen::ArrayXd row = Eigen::ArrayXd::Zero(power(side, m));
    if (gamma2 == 0.0)
        return row;
    const int half = side / 2;
    if (m == 1) {
        for (int i = 0; i < side; ++i)
            row(i) = gamma2 * kernel(h * std::min(i, side - i), l, T, 1, quad);
        return row;
    }
    // Radial symmetry: tabulate lags (a, b) with a <= b <= side/2 once.
    Eigen::MatrixXd table(half + 1, half + 1);
    for (int b = 0; b <= half; ++b)
        for (int a = 0; a <= b; ++a) {
            const double r = h * std::sqrt(double(a) * a + double(b) * b);
            table(a, b) = table(b, a) = gamma2 * kernel(r, l, T, 2, quad);
        }
    for (int iy = 0; iy < side; ++iy) {
        const int dy = std::min(iy, side - iy);
        for (int ix = 0; ix < side; ++ix)
            row(Index(iy) * side + ix) = table(std::min(ix, side - ix), dy);
    }
    return row;
}

SpectralFactor spectral_factorization(const Eigen::ArrayXd& cov_row, int m, int side,
                                      int sampled_n)
{
    const Index total = power(side, m);
    if (m != 1 && m != 2)
        throw std::invalid_argument("spectral_factorization: m must be 1 or 2");
    if (cov_row.size() != total)
        throw std::invalid_argument("spectral_factorization: row size does not match side^m");

    SpectralFactor f;
    f.m = m;
    f.side = side;

    FftwBuffer buf(static_cast<std::size_t>(total));
    for (Index k = 0; k < total; ++k) {
        buf.data[k][0] = cov_row(k);
        buf.data[k][1] = 0.0;
    }
    fft_inplace(buf.data, m, side, FFTW_FORWARD);

    Eigen::ArrayXd eig(total);
    for (Index k = 0; k < total; ++k)
        eig(k) = buf.data[k][0];

    const double abs_mass = eig.abs().sum();
    const double neg_mass = (-eig).max(0.0).sum();
    f.negative_mass = abs_mass > 0.0 ? neg_mass / abs_mass : 0.0;
    f.clamped = neg_mass > 0.0;

    if (f.negative_mass <= kClampTolerance) {
        f.amplitude = (eig.max(0.0) / static_cast<double>(total)).sqrt();
        return f;
    }

    const Index sampled = sampled_n > 0 ? power(sampled_n, m) : 0;
    if (sampled == 0 || sampled > kDenseFallbackLimit) {
        std::ostringstream msg;
        msg << "circulant embedding failed: negative eigenvalue mass " << f.negative_mass
            << " exceeds " << kClampTolerance << " and the grid is too large for dense fallback";
        throw EmbeddingError(msg.str());
    }

    // Dense fallback on the sampled sub-grid. Lags inside it are shorter
    // than side/2, where the periodic row is the exact covariance.
    Eigen::MatrixXd cov(sampled, sampled);
    const Grid g{m, sampled_n, 1.0};
    for (Index a = 0; a < sampled; ++a) {
        const Eigen::VectorXi ca = g.cell(a);
        for (Index b = 0; b < sampled; ++b) {
            const Eigen::VectorXi cb = g.cell(b);
            const int dx = std::abs(ca(0) - cb(0));
            const int dy = m == 2 ? std::abs(ca(1) - cb(1)) : 0;
            cov(a, b) = cov_row(Index(dy) * side + dx);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    f.dense = true;
    f.dense_factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    f.amplitude.resize(0);
    return f;
}

FieldSampler::FieldSampler(const ModelParams& params, int grid_n, double cutoff_l,
                           const KernelQuadrature& quad)
    : params_(params), grid_{params.m, grid_n, params.R}, l_(cutoff_l)
{
    params_.validate();
    if (grid_n < 2)
        throw std::invalid_argument("FieldSampler: grid_n must be >= 2");
    const double h = grid_.spacing();
    if (l_ <= 0.0)
        l_ = h;
    if (l_ < h * (1.0 - 1e-12))
        throw std::invalid_argument("FieldSampler: cutoff below grid spacing");
    if (l_ > params_.T)
        throw std::invalid_argument("FieldSampler: cutoff above correlation length");

    const double padded_length = 2.0 * (2.0 * params_.R) + 2.0 * params_.T;
    const int side = fft_friendly_size(static_cast<int>(std::ceil(padded_length / h - 1e-9)));
    if (params_.gamma2 == 0.0) {
        SpectralFactor f;
        f.m = params_.m;
        f.side = side;
        f.amplitude = Eigen::ArrayXd::Zero(power(side, params_.m));
        factor_ = std::make_shared<const SpectralFactor>(std::move(f));
        return;
    }
    const Eigen::ArrayXd row =
        periodic_covariance_row(params_.m, side, h, params_.gamma2, l_, params_.T, quad);
    factor_ = std::make_shared<const SpectralFactor>(
        spectral_factorization(row, params_.m, side, grid_n));
}

FieldSlice FieldSampler::blank(std::uint64_t replica, std::uint64_t layer) const
{
    FieldSlice s;
    s.grid = grid_;
    s.T = params_.T;
    s.gamma2 = params_.gamma2;
    s.cutoff_l = l_;
    s.var0 = params_.gamma2 * (std::log(params_.T / l_) + 1.0);
    s.seed = params_.seed;
    s.replica = replica;
    s.layer = layer;
    s.values = Eigen::ArrayXd::Zero(grid_.size());
    return s;
}

std::pair<FieldSlice, FieldSlice> FieldSampler::sample_pair(std::uint64_t pair_index,
                                                            std::uint64_t layer) const
{
    std::pair<FieldSlice, FieldSlice> out{blank(2 * pair_index, layer),
                                          blank(2 * pair_index + 1, layer)};
    if (params_.gamma2 == 0.0)
        return out;

    CounterRng rng(stream_key(params_.seed, pair_index, layer, StreamRole::Field));
    const Index n_cells = grid_.size();
    const double shift = 0.5 * out.first.var0;

    const SpectralFactor& factor = *factor_;
    if (factor.dense) {
        Eigen::VectorXd xi_a(n_cells), xi_b(n_cells);
        for (Index k = 0; k < n_cells; ++k) {
            xi_a(k) = rng.normal();
            xi_b(k) = rng.normal();
        }
        out.first.values = (factor.dense_factor * xi_a).array() - shift;
        out.second.values = (factor.dense_factor * xi_b).array() - shift;
        return out;
    }

    const int side = factor.side;
    const Index total = power(side, params_.m);
    FftwBuffer buf(static_cast<std::size_t>(total));
    for (Index k = 0; k < total; ++k) {
        const double a = factor.amplitude(k);
        const double re = rng.normal();
        const double im = rng.normal();
        buf.data[k][0] = a * re;
        buf.data[k][1] = a * im;
    }
    fft_inplace(buf.data, params_.m, side, FFTW_BACKWARD);

    const int n = grid_.n;
    for (Index i = 0; i < n_cells; ++i) {
        const Index ix = i % n;
        const Index iy = params_.m == 2 ? i / n : 0;
        const Index p = iy * side + ix;
        out.first.values(i) = buf.data[p][0] - shift;
        out.second.values(i) = buf.data[p][1] - shift;
    }
    return out;
}

FieldSlice FieldSampler::sample(std::uint64_t replica, std::uint64_t layer) const
{
    auto pair = sample_pair(replica / 2, layer);
    return replica % 2 == 0 ? std::move(pair.first) : std::move(pair.second);
}

std::shared_ptr<const FieldSampler> FieldSampler::shared(const ModelParams& params, int grid_n,
                                                         double cutoff_l)
{
    static std::mutex mtx;
    static std::deque<std::pair<std::string, std::shared_ptr<const FieldSampler>>> cache;
    constexpr std::size_t capacity = 8;

    const double l = cutoff_l > 0.0 ? cutoff_l : 2.0 * params.R / grid_n;
    KeyValues key;
    key.set("m", params.m);
    key.set("gamma2", params.gamma2);
    key.set("T", params.T);
    key.set("R", params.R);
    key.set("grid_n", grid_n);
    key.set("l", l);
    const std::string k = key.str();

    {
        std::lock_guard lock(mtx);
        for (const auto& [ck, sampler] : cache)
            if (ck == k) {
                // The seed is not part of the factor; copies share it.
                if (sampler->params().seed == params.seed)
                    return sampler;
                auto copy = std::make_shared<FieldSampler>(*sampler);
                copy->params_.seed = params.seed;
                return copy;
            }
    }
    auto sampler = std::make_shared<const FieldSampler>(params, grid_n, l);
    std::lock_guard lock(mtx);
    cache.emplace_back(k, sampler);
    if (cache.size() > capacity)
        cache.pop_front();
    return sampler;
}

FieldSlice sample_field(const ModelParams& params, int grid_n, double cutoff_l,
                        std::uint64_t replica, std::uint64_t layer)
{
    return FieldSampler::shared(params, grid_n, cutoff_l)->sample(replica, layer);
}

}  // namespace mrm
