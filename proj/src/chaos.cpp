#include "mrm/chaos.hpp"

#include <cmath>
#include <stdexcept>

#include "mrm/parallel.hpp"

namespace mrm {

namespace {

struct LineFit
{
    double slope = 0.0;
    double slope_stderr = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const Eigen::VectorXd& y)
{
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y(Index(i));
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y(Index(i)) - my);
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y(Index(i)) - my - fit.slope * (x[i] - mx);
        ssr += r * r;
    }
    fit.slope_stderr = x.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
    return fit;
}

// Sum over the cells [x0, x0+s) x [y0, y0+s) of an n^m grid of values.
double block_sum(const Eigen::ArrayXd& w, int m, int n, int x0, int y0, int s)
{
    if (m == 1)
        return w.segment(x0, s).sum();
    double sum = 0.0;
    for (int iy = y0; iy < y0 + s; ++iy)
        sum += w.segment(Index(iy) * n + x0, s).sum();
    return sum;
}

// Sum of the sup-norm box of half-width k cells around the grid center.
double centered_box_sum(const Eigen::ArrayXd& w, int m, int n, int k)
{
    return block_sum(w, m, n, n / 2 - k, n / 2 - k, 2 * k);
}

// Mean of M(box)^q over the disjoint boxes of side 2k tiling the grid,
// aligned so that one tile is the centered box.
Eigen::VectorXd tiled_box_moments(const Eigen::ArrayXd& w, int m, int n, int k,
                                  const std::vector<double>& qs, double cell_volume)
{
    const int side = 2 * k;
    const int offset = (n / 2 - k) % side;
    std::vector<int> starts;
    for (int s = offset; s + side <= n; s += side)
        starts.push_back(s);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(Index(qs.size()));
    std::size_t count = 0;
    for (int y0 : (m == 2 ? starts : std::vector<int>{0})) {
        for (int x0 : starts) {
            const double mass = cell_volume * block_sum(w, m, n, x0, y0, side);
            for (std::size_t iq = 0; iq < qs.size(); ++iq)
                acc(Index(iq)) += std::pow(mass, qs[iq]);
            ++count;
        }
    }
    return acc / double(count);
}

}  // namespace

DiscreteMeasure DiscreteMeasure::normalized() const
{
    const double mass = total_mass();
    if (!(mass > 0.0))
        throw std::invalid_argument("cannot normalize a measure of zero mass");
    DiscreteMeasure out = *this;
    out.weights /= mass;
    return out;
}

DiscreteMeasure build_measure(const FieldSlice& field)
{
    DiscreteMeasure mu;
    const Grid& g = field.grid;
    mu.atoms = g.centers();
    const double cell = std::pow(g.spacing(), g.m);
    mu.weights = (field.values.exp() * cell).matrix();
    mu.meta.params = ModelParams{g.m, field.gamma2, field.T, g.R, field.seed};
    mu.meta.layers = 1;
    mu.meta.cutoff_l = field.cutoff_l;
    mu.meta.grid = g;
    mu.meta.replica = field.replica;
    return mu;
}

std::vector<DiscreteMeasure> compose_chaos(const ModelParams& params, int n, int grid_n,
                                           std::uint64_t replica)
{
    params.validate();
    if (n < 1)
        throw std::invalid_argument("compose_chaos: n must be >= 1");
    const Grid g{params.m, grid_n, params.R};
    const double cell = std::pow(g.spacing(), g.m);

    std::vector<DiscreteMeasure> layers;
    layers.reserve(n + 1);
    DiscreteMeasure base;
    base.atoms = g.centers();
    base.weights = Eigen::VectorXd::Constant(g.size(), cell);
    base.meta.params = params;
    base.meta.layers = 0;
    base.meta.cutoff_l = g.spacing();
    base.meta.grid = g;
    base.meta.replica = replica;
    layers.push_back(base);

    const auto sampler = FieldSampler::shared(params.with_gamma2(params.gamma2 / n), grid_n);
    for (int k = 1; k <= n; ++k) {
        const FieldSlice field = sampler->sample(replica, static_cast<std::uint64_t>(k - 1));
        DiscreteMeasure next = layers.back();
        if (k == 1)
            next.weights = (field.values.exp() * cell).matrix();
        else
            next.weights = (next.weights.array() * field.values.exp()).matrix();
        next.meta.layers = k;
        layers.push_back(std::move(next));
    }
    return layers;
}

DiscreteMeasure restrict_to_ball(const DiscreteMeasure& mu, double R)
{
    std::vector<Index> keep;
    for (Index i = 0; i < mu.size(); ++i)
        if (mu.atoms.col(i).norm() < R)
            keep.push_back(i);
    DiscreteMeasure out;
    out.atoms.resize(mu.dim(), Index(keep.size()));
    out.weights.resize(Index(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.atoms.col(Index(j)) = mu.atoms.col(keep[j]);
        out.weights(Index(j)) = mu.weights(keep[j]);
    }
    out.meta = mu.meta;
    return out;
}

DiscreteMeasure lebesgue_ball(const Grid& grid)
{
    DiscreteMeasure full;
    full.atoms = grid.centers();
    full.weights = Eigen::VectorXd::Constant(grid.size(), std::pow(grid.spacing(), grid.m));
    full.meta.params.m = grid.m;
    full.meta.params.gamma2 = 0.0;
    full.meta.params.R = grid.R;
    full.meta.grid = grid;
    return restrict_to_ball(full, grid.R);
}

double centered_box_mass(const DiscreteMeasure& mu, double radius)
{
    if (!mu.is_full_grid())
        throw std::invalid_argument("centered_box_mass: measure must be a full grid");
    const Grid& g = mu.meta.grid;
    if (g.n % 2 != 0)
        throw std::invalid_argument("centered_box_mass: grid must have an even side");
    const double cells = radius / g.spacing();
    const int k = static_cast<int>(std::lround(cells));
    if (k < 1 || k > g.n / 2 || std::abs(cells - k) > 1e-9)
        throw std::invalid_argument("centered_box_mass: radius must be a whole number of cells");
    return centered_box_sum(mu.weights.array(), g.m, g.n, k);
}

ScalingReport estimate_zeta(const ModelParams& params, const std::vector<double>& qs,
                            const std::vector<double>& radii, int replicas,
                            const ScalingOptions& options)
{
    params.validate();
    if (radii.size() < 3)
        throw std::invalid_argument("estimate_zeta: need at least 3 radii");
    if (replicas < 1)
        throw std::invalid_argument("estimate_zeta: need at least one replica");
    if (qs.empty())
        throw std::invalid_argument("estimate_zeta: no moments requested");
    const Grid g{params.m, options.grid_n, params.R};
    if (g.n % 2 != 0)
        throw std::invalid_argument("estimate_zeta: grid_n must be even");

    ScalingReport rep;
    rep.qs = qs;
    rep.replicas = replicas;
    std::vector<int> cells;
    for (double r : radii) {
        if (r > params.T * (1.0 + 1e-12))
            throw std::invalid_argument("estimate_zeta: radii must not exceed T");
        const int k = static_cast<int>(std::lround(r / g.spacing()));
        if (k < 1 || k > g.n / 2)
            throw std::invalid_argument("estimate_zeta: radius outside the grid");
        if (!cells.empty() && k <= cells.back())
            throw std::invalid_argument("estimate_zeta: radii must be strictly increasing "
                                        "after snapping to cells");
        cells.push_back(k);
        rep.radii.push_back(k * g.spacing());
    }
    for (double q : qs)
        if (q > 1.0 && zeta(params, q) <= params.m)
            rep.moment_warning = true;

    const auto sampler = FieldSampler::shared(params, g.n);
    const double cell_volume = std::pow(g.spacing(), g.m);
    const std::size_t nr = radii.size();
    const Index nq = Index(qs.size());

    // samples[q](replica, radius): per-replica estimate of E[M(B_r)^q].
    std::vector<Eigen::MatrixXd> samples(qs.size(), Eigen::MatrixXd(replicas, Index(nr)));
    const std::size_t pairs = (static_cast<std::size_t>(replicas) + 1) / 2;
    if (options.first_replica % 2 != 0)
        throw std::invalid_argument("estimate_zeta: first_replica must be even");
    const std::uint64_t first_pair = options.first_replica / 2;
    parallel_for(pairs, [&](std::size_t p) {
        auto [a, b] = sampler->sample_pair(first_pair + p);
        const FieldSlice* slices[2] = {&a, &b};
        for (int half = 0; half < 2; ++half) {
            const Index row = Index(2 * p + half);
            if (row >= replicas)
                break;
            const Eigen::ArrayXd w = slices[half]->values.exp();
            for (std::size_t j = 0; j < nr; ++j) {
                if (options.tile_boxes) {
                    const Eigen::VectorXd mom =
                        tiled_box_moments(w, g.m, g.n, cells[j], qs, cell_volume);
                    for (Index iq = 0; iq < nq; ++iq)
                        samples[std::size_t(iq)](row, Index(j)) = mom(iq);
                } else {
                    const double mass = cell_volume * centered_box_sum(w, g.m, g.n, cells[j]);
                    for (Index iq = 0; iq < nq; ++iq)
                        samples[std::size_t(iq)](row, Index(j)) = std::pow(mass, qs[std::size_t(iq)]);
                }
            }
        }
    });

    std::vector<double> log_r;
    for (double r : rep.radii)
        log_r.push_back(std::log(r));

    rep.moment.resize(nq, Index(nr));
    rep.moment_stderr.resize(nq, Index(nr));
    const int groups = std::clamp(options.jackknife_groups, 2, std::max(2, replicas));

    for (Index iq = 0; iq < nq; ++iq) {
        const Eigen::MatrixXd& powered = samples[std::size_t(iq)];
        const Eigen::RowVectorXd mean = powered.colwise().mean();
        rep.moment.row(iq) = mean;
        if (replicas > 1) {
            const Eigen::RowVectorXd var =
                (powered.rowwise() - mean).array().square().colwise().sum() / (replicas - 1.0);
            rep.moment_stderr.row(iq) = (var / double(replicas)).array().sqrt().matrix();
        } else {
            rep.moment_stderr.row(iq).setZero();
        }
        const LineFit fit = fit_line(log_r, mean.transpose().array().log().matrix());
        rep.zeta_hat.push_back(fit.slope);
        rep.stderr_fit.push_back(fit.slope_stderr);

        // Grouped jackknife over replicas; replicas are independent, so this
        // stays valid when each replica contributes several correlated boxes.
        double jk = 0.0;
        if (replicas >= groups) {
            std::vector<double> slopes;
            const Eigen::RowVectorXd total = powered.colwise().sum();
            for (int grp = 0; grp < groups; ++grp) {
                Eigen::RowVectorXd sum = total;
                int count = replicas;
                for (int r = grp; r < replicas; r += groups) {
                    sum -= powered.row(r);
                    --count;
                }
                const Eigen::VectorXd loo = (sum / double(count)).transpose();
                slopes.push_back(fit_line(log_r, loo.array().log().matrix()).slope);
            }
            double mean_slope = 0.0;
            for (double s : slopes)
                mean_slope += s;
            mean_slope /= groups;
            for (double s : slopes)
                jk += (s - mean_slope) * (s - mean_slope);
            jk = std::sqrt(jk * (groups - 1.0) / groups);
        }
        rep.stderr_mc.push_back(jk);
    }
    return rep;
}

double euclidean_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                          const Eigen::Ref<const Eigen::VectorXd>& b)
{
    return (a - b).norm();
}

double energy(const DiscreteMeasure& mu, const DistanceFn& distance, double alpha)
{
    if (!(alpha >= 0.0))
        throw std::invalid_argument("energy: alpha must be >= 0");
    double total = 0.0;
    const Index n = mu.size();
    for (Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (Index j = i + 1; j < n; ++j) {
            const double d = distance(mu.atoms.col(i), mu.atoms.col(j));
            if (alpha > 0.0 && d == 0.0)
                throw std::invalid_argument("energy: coincident atoms with alpha > 0");
            row += mu.weights(j) * (alpha == 0.0 ? 1.0 : std::pow(d, -alpha));
        }
        total += 2.0 * mu.weights(i) * row;
    }
    return total;
}

}  // namespace mrm
