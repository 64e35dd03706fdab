#include "mrm/transport.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mrm/io.hpp"

namespace mrm {

double squared_euclidean(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y)
{
    return (x - y).squaredNorm();
}

Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                            const CostFn& cost)
{
    Eigen::MatrixXd c(source.cols(), target.cols());
    for (Index j = 0; j < target.cols(); ++j)
        for (Index i = 0; i < source.cols(); ++i)
            c(i, j) = cost(source.col(i), target.col(j));
    return c;
}

namespace {

constexpr Index kMaxDenseEntries = 40'000'000;
constexpr double kAbsorbBound = 1e30;

void check_pair(const DiscreteMeasure& mu, const DiscreteMeasure& nu)
{
    if (mu.size() == 0 || nu.size() == 0)
        throw std::invalid_argument("transport: empty measure");
    if (mu.dim() != nu.dim())
        throw std::invalid_argument("transport: measures live in different dimensions");
    if (!(mu.total_mass() > 0.0) || !(nu.total_mass() > 0.0))
        throw std::invalid_argument("transport: zero-mass measure");
    if ((mu.weights.array() < 0.0).any() || (nu.weights.array() < 0.0).any())
        throw std::invalid_argument("transport: negative weights");
}

bool needs_absorb(const Eigen::VectorXd& s)
{
    for (Index i = 0; i < s.size(); ++i) {
        const double x = s(i);
        if (!std::isfinite(x) || x > kAbsorbBound || (x > 0.0 && x < 1.0 / kAbsorbBound))
            return true;
    }
    return false;
}

}  // namespace

TransportPlan sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const CostFn& cost,
                       const SinkhornOptions& options)
{
    check_pair(mu, nu);
    if (!(options.epsilon > 0.0))
        throw std::invalid_argument("sinkhorn: epsilon must be > 0");
    if (mu.size() * nu.size() > kMaxDenseEntries)
        throw std::invalid_argument("sinkhorn: problem too large for the dense solver");

    TransportPlan plan;
    plan.source = mu.normalized();
    plan.target = nu.normalized();
    const Eigen::VectorXd& a = plan.source.weights;
    const Eigen::VectorXd& b = plan.target.weights;
    const Eigen::MatrixXd C = cost_matrix(plan.source.atoms, plan.target.atoms, cost);
    const Index n = C.rows();
    const Index m = C.cols();

    // c-transform start: every row and column has an O(1) kernel entry,
    // which keeps exp() from underflowing when epsilon is small.
    Eigen::VectorXd f = C.rowwise().minCoeff();
    Eigen::VectorXd g = (C.colwise() - f).colwise().minCoeff().transpose();

    Eigen::MatrixXd K(n, m);
    Eigen::VectorXd u = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(m);
    auto rebuild = [&](double eps) {
        K = (((-C).colwise() + f).rowwise() + g.transpose()).array().unaryExpr(
                [eps](double x) { return std::exp(x / eps); }).matrix();
        u.setOnes();
        v.setOnes();
    };
    auto absorb = [&](double eps) {
        f += eps * u.array().log().matrix();
        g += eps * v.array().log().matrix();
        rebuild(eps);
    };

    const int stages = std::max(0, options.annealing_halvings) + 1;
    int iterations = 0;
    double row_error = std::numeric_limits<double>::infinity();
    double eps = options.epsilon * std::ldexp(1.0, stages - 1);
    for (int stage = 0; stage < stages; ++stage, eps *= 0.5) {
        const bool last = stage == stages - 1;
        const double stage_tol = last ? options.tol : std::max(options.tol, 1e-4);
        rebuild(eps);
        row_error = std::numeric_limits<double>::infinity();
        while (iterations < options.max_iter) {
            ++iterations;
            u = a.cwiseQuotient(K * v);
            if (needs_absorb(u)) {
                // Undo the bad update, fold the current scalings in, retry.
                u = a.cwiseQuotient((K * v).cwiseMax(std::numeric_limits<double>::min()));
                absorb(eps);
                continue;
            }
            v = b.cwiseQuotient(K.transpose() * u);
            if (needs_absorb(v)) {
                v = b.cwiseQuotient(
                    (K.transpose() * u).cwiseMax(std::numeric_limits<double>::min()));
                absorb(eps);
                continue;
            }
            if (iterations % 10 == 0 || iterations == options.max_iter) {
                row_error = (u.cwiseProduct(K * v) - a).lpNorm<1>();
                if (row_error <= stage_tol)
                    break;
            }
        }
        absorb(eps);
    }

    // After the final absorb, u = v = 1 and the plan is K itself.
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd cols = Eigen::VectorXd::Zero(m);
    double cost_value = 0.0;
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < n; ++i) {
            const double p = K(i, j);
            if (p > 0.0) {
                rows(i) += p;
                cols(j) += p;
                cost_value += p * C(i, j);
                if (p > 1e-15)
                    triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), p);
            }
        }
    plan.coupling.resize(n, m);
    plan.coupling.setFromTriplets(triplets.begin(), triplets.end());
    plan.cost_value = cost_value;
    plan.info.epsilon = options.epsilon;
    plan.info.iterations = iterations;
    plan.info.marginal_error = std::max((rows - a).lpNorm<1>(), (cols - b).lpNorm<1>());
    plan.info.converged = plan.info.marginal_error <= options.tol;
    return plan;
}

std::vector<Index> solve_assignment(const Eigen::MatrixXd& cost)
{
    const Index n = cost.rows();
    if (cost.cols() != n)
        throw std::invalid_argument("solve_assignment: cost matrix must be square");
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is the virtual start of each augmentation.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<Index> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (Index i = 1; i <= n; ++i) {
        p[0] = i;
        Index j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const Index i0 = p[j0];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j])
                    continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const Index j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Index> result(n);
    for (Index j = 1; j <= n; ++j)
        result[p[j] - 1] = j - 1;
    return result;
}

TransportMap exact_assignment(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                              const CostFn& cost)
{
    check_pair(mu, nu);
    if (mu.size() != nu.size())
        throw std::invalid_argument("exact_assignment: atom counts differ");
    auto uniform = [](const Eigen::VectorXd& w) {
        return (w.array() - w(0)).abs().maxCoeff() <= 1e-12 * std::abs(w(0));
    };
    if (!uniform(mu.weights) || !uniform(nu.weights))
        throw std::invalid_argument("exact_assignment: weights must be uniform");

    TransportMap map;
    map.kind = MapKind::ExactAssignment;
    map.sources = mu.atoms;
    map.assignment = solve_assignment(cost_matrix(mu.atoms, nu.atoms, cost));
    map.images.resize(mu.dim(), mu.size());
    for (Index i = 0; i < mu.size(); ++i)
        map.images.col(i) = nu.atoms.col(map.assignment[std::size_t(i)]);
    return map;
}

TransportMap barycentric_map(const TransportPlan& plan)
{
    const Eigen::SparseMatrix<double>& pi = plan.coupling;
    const Eigen::VectorXd row_mass = pi * Eigen::VectorXd::Ones(pi.cols());
    if ((row_mass.array() <= 0.0).any())
        throw std::invalid_argument("barycentric_map: source atom with zero mass");
    TransportMap map;
    map.kind = MapKind::Barycentric;
    map.sources = plan.source.atoms;
    // images^T = diag(1/row_mass) * pi * targets^T
    const Eigen::MatrixXd weighted = pi * plan.target.atoms.transpose();
    map.images = (row_mass.cwiseInverse().asDiagonal() * weighted).transpose();
    return map;
}

DiscreteMeasure quantize(const DiscreteMeasure& mu, Index count)
{
    if (count < 1)
        throw std::invalid_argument("quantize: count must be >= 1");
    const double total = mu.total_mass();
    if (!(total > 0.0))
        throw std::invalid_argument("quantize: zero-mass measure");
    const double h = mu.meta.grid.n > 0 ? mu.meta.grid.spacing() : 0.0;

    DiscreteMeasure out;
    out.atoms.resize(mu.dim(), count);
    out.weights = Eigen::VectorXd::Constant(count, total / double(count));
    out.meta = mu.meta;

    double before = 0.0;  // mass of atoms preceding atom i
    Index i = 0;
    for (Index j = 0; j < count; ++j) {
        const double target = (double(j) + 0.5) / double(count) * total;
        while (i + 1 < mu.size() && before + mu.weights(i) <= target) {
            before += mu.weights(i);
            ++i;
        }
        const double w = mu.weights(i);
        const double frac = w > 0.0 ? std::clamp((target - before) / w, 0.0, 1.0) : 0.5;
        out.atoms.col(j) = mu.atoms.col(i);
        out.atoms(0, j) += (frac - 0.5) * h;
    }
    return out;
}

namespace {

Index nearest_column(const Eigen::MatrixXd& points, const Eigen::Ref<const Eigen::VectorXd>& y)
{
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < points.cols(); ++i) {
        const double d = (points.col(i) - y).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

// Points that share a source position can swap targets at no cost.
// Within each such group, reassign the targets by the cost from the
// points' origins so the composed map stays monotone in the origins.
void refine_ties(TransportMap& map, const Eigen::MatrixXd& origins)
{
    const Index n = map.size();
    std::vector<Index> order(std::size_t(n), 0);
    for (Index i = 0; i < n; ++i)
        order[std::size_t(i)] = i;
    auto less = [&](Index a, Index b) {
        for (Index d = 0; d < map.sources.rows(); ++d)
            if (map.sources(d, a) != map.sources(d, b))
                return map.sources(d, a) < map.sources(d, b);
        return a < b;
    };
    std::sort(order.begin(), order.end(), less);
    std::size_t begin = 0;
    while (begin < order.size()) {
        std::size_t end = begin + 1;
        while (end < order.size() &&
               map.sources.col(order[end]) == map.sources.col(order[begin]))
            ++end;
        if (end - begin > 1) {
            const Index g = Index(end - begin);
            std::vector<Index> members(order.begin() + Index(begin), order.begin() + Index(end));
            std::sort(members.begin(), members.end());
            Eigen::MatrixXd c(g, g);
            for (Index a = 0; a < g; ++a)
                for (Index b = 0; b < g; ++b)
                    c(a, b) = squared_euclidean(origins.col(members[std::size_t(a)]),
                                                map.images.col(members[std::size_t(b)]));
            const std::vector<Index> pick = solve_assignment(c);
            const Eigen::MatrixXd images = map.images;
            const std::vector<Index> assignment = map.assignment;
            for (Index a = 0; a < g; ++a) {
                const Index to = members[std::size_t(a)];
                const Index from = members[std::size_t(pick[std::size_t(a)])];
                map.images.col(to) = images.col(from);
                map.assignment[std::size_t(to)] = assignment[std::size_t(from)];
            }
        }
        begin = end;
    }
}

ChainStep make_step(Eigen::MatrixXd origins, Eigen::VectorXd weights, TransportMap map,
                    SolverInfo info, double cost_value)
{
    ChainStep step;
    step.origins = std::move(origins);
    step.weights = std::move(weights);
    step.map = std::move(map);
    step.info = info;
    step.cost_value = cost_value;
    return step;
}

}  // namespace

ChainedMap multi_step(const std::vector<DiscreteMeasure>& layers, const MultiStepOptions& options)
{
    if (layers.size() < 2)
        throw std::invalid_argument("multi_step: need layers M^(0)..M^(n) with n >= 1");
    const Grid& grid = layers.front().meta.grid;
    for (const auto& layer : layers)
        if (!layer.is_full_grid() || !(layer.meta.grid == grid))
            throw std::invalid_argument("multi_step: layers must share one full grid");

    const DiscreteMeasure target = lebesgue_ball(grid);
    const Index atoms = target.size();
    SolverKind solver = options.solver;
    if (solver == SolverKind::Auto)
        solver = atoms <= options.exact_threshold ? SolverKind::Exact : SolverKind::Sinkhorn;

    ChainedMap chained;
    chained.solver = solver == SolverKind::Exact ? "exact" : "sinkhorn";
    chained.epsilon = solver == SolverKind::Exact ? 0.0 : options.sinkhorn.epsilon;
    chained.tol = solver == SolverKind::Exact ? 0.0 : options.sinkhorn.tol;

    const int n = static_cast<int>(layers.size()) - 1;
    for (int k = 1; k <= n; ++k) {
        const DiscreteMeasure ball = restrict_to_ball(layers[std::size_t(k)], grid.R);
        try {
            if (solver == SolverKind::Sinkhorn) {
                DiscreteMeasure source = ball;
                if (k > 1)
                    source.atoms = chained.steps.back().map.images;
                const TransportPlan plan =
                    sinkhorn(source, target, squared_euclidean, options.sinkhorn);
                chained.steps.push_back(make_step(ball.atoms, ball.weights, barycentric_map(plan),
                                                  plan.info, plan.cost_value));
                continue;
            }

            DiscreteMeasure points = quantize(ball, atoms);
            const Eigen::MatrixXd origins = points.atoms;
            if (k > 1) {
                const ChainStep& prev = chained.steps.back();
                for (Index j = 0; j < points.size(); ++j)
                    points.atoms.col(j) =
                        prev.map.images.col(nearest_column(prev.origins, origins.col(j)));
            }
            TransportMap map = exact_assignment(points, target, squared_euclidean);
            if (k > 1)
                refine_ties(map, origins);
            double cost = 0.0;
            for (Index j = 0; j < map.size(); ++j)
                cost += points.weights(j) / ball.total_mass() *
                        squared_euclidean(map.sources.col(j), map.images.col(j));
            chained.steps.push_back(
                make_step(origins, points.weights, std::move(map), SolverInfo{}, cost));
        } catch (const std::exception& e) {
            throw SolverError("multi_step: step " + std::to_string(k) + " failed: " + e.what());
        }
        if (!chained.steps.back().info.converged)
            throw SolverError("multi_step: step " + std::to_string(k) +
                              " did not reach the marginal tolerance");
    }
    return chained;
}

InverseMap::InverseMap(Eigen::MatrixXd sources, Eigen::MatrixXd images)
    : sources_(std::move(sources)), images_(std::move(images))
{
    if (sources_.cols() == 0)
        throw std::invalid_argument("invert_map: empty map");
    if (sources_.cols() != images_.cols() || sources_.rows() != images_.rows())
        throw std::invalid_argument("invert_map: sources and images disagree in shape");
}

InverseMap::InverseMap(const ChainedMap& chained)
    : InverseMap(chained.steps.empty() ? Eigen::MatrixXd() : chained.origins(),
                 chained.steps.empty() ? Eigen::MatrixXd() : chained.images())
{
}

Index InverseMap::nearest(const Eigen::Ref<const Eigen::VectorXd>& y) const
{
    return nearest_column(images_, y);
}

InverseMap invert_map(const ChainedMap& chained) { return InverseMap(chained); }

DiscreteMeasure pushforward(const TransportMap& map, const Eigen::VectorXd& weights)
{
    if (weights.size() != map.size())
        throw std::invalid_argument("pushforward: weight count does not match the map");
    DiscreteMeasure out;
    out.atoms = map.images;
    out.weights = weights;
    return out;
}

DiscreteMeasure pushforward(const TransportMap& map, const DiscreteMeasure& measure)
{
    DiscreteMeasure out = pushforward(map, measure.weights);
    out.meta = measure.meta;
    out.meta.grid = Grid{0, 0, 0.0};
    return out;
}

Eigen::VectorXd bin_to_grid(const DiscreteMeasure& mu, const Grid& grid)
{
    Eigen::VectorXd bins = Eigen::VectorXd::Zero(grid.size());
    const double h = grid.spacing();
    for (Index i = 0; i < mu.size(); ++i) {
        Index flat = 0;
        Index stride = 1;
        for (int d = 0; d < grid.m; ++d) {
            const double c = std::floor((mu.atoms(d, i) + grid.R) / h);
            const Index ci = std::clamp<Index>(static_cast<Index>(c), 0, grid.n - 1);
            flat += ci * stride;
            stride *= grid.n;
        }
        bins(flat) += mu.weights(i);
    }
    return bins;
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("total_variation: size mismatch");
    return 0.5 * (a / a.sum() - b / b.sum()).lpNorm<1>();
}

void write_tmap(std::ostream& out, const ChainedMap& chained, const std::string& extra)
{
    if (chained.steps.empty())
        throw std::invalid_argument("write_tmap: empty chained map");
    const int m = static_cast<int>(chained.origins().rows());
    KeyValues kv;
    kv.set("steps", static_cast<int>(chained.steps.size()));
    kv.set("atom_count", static_cast<long long>(chained.atom_count()));
    kv.set("solver", chained.solver);
    kv.set("epsilon", chained.epsilon);
    kv.set("tol", chained.tol);
    kv.set("dim", m);
    if (!extra.empty())
        kv.merge(KeyValues::parse(extra));
    out << kv.str() << '\n';

    static const char* axes[] = {"x", "y"};
    out << "step,atom,weight";
    for (const char* prefix : {"origin_", "source_", "image_"})
        for (int d = 0; d < m; ++d)
            out << ',' << prefix << axes[d];
    out << '\n';
    for (std::size_t s = 0; s < chained.steps.size(); ++s) {
        const ChainStep& step = chained.steps[s];
        for (Index i = 0; i < step.origins.cols(); ++i) {
            out << s + 1 << ',' << i << ',' << format_double(step.weights(i));
            for (const Eigen::MatrixXd* mat : {&step.origins, &step.map.sources, &step.map.images})
                for (int d = 0; d < m; ++d)
                    out << ',' << format_double((*mat)(d, i));
            out << '\n';
        }
    }
}

ChainedMap read_tmap(std::istream& in, std::string* header)
{
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("read_tmap: missing header");
    const KeyValues kv = KeyValues::parse(line);
    if (header)
        *header = line;
    const auto steps = kv.get_int("steps");
    const int m = static_cast<int>(kv.get_int("dim"));
    ChainedMap chained;
    chained.solver = kv.get("solver");
    chained.epsilon = kv.get_double("epsilon");
    chained.tol = kv.get_double("tol");
    const MapKind kind =
        chained.solver == "exact" ? MapKind::ExactAssignment : MapKind::Barycentric;

    if (!std::getline(in, line))
        throw std::runtime_error("read_tmap: missing column line");
    std::vector<std::vector<std::vector<double>>> rows(static_cast<std::size_t>(steps));
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            values.push_back(std::stod(cell));
        if (values.size() != std::size_t(3 + 3 * m))
            throw std::runtime_error("read_tmap: malformed row");
        const auto s = static_cast<std::size_t>(values[0]) - 1;
        if (s >= rows.size())
            throw std::runtime_error("read_tmap: step index out of range");
        rows[s].push_back(std::move(values));
    }
    for (auto& step_rows : rows) {
        ChainStep step;
        const Index n = Index(step_rows.size());
        step.origins.resize(m, n);
        step.map.sources.resize(m, n);
        step.map.images.resize(m, n);
        step.weights.resize(n);
        step.map.kind = kind;
        for (const auto& r : step_rows) {
            const auto i = static_cast<Index>(r[1]);
            if (i < 0 || i >= n)
                throw std::runtime_error("read_tmap: atom index out of range");
            step.weights(i) = r[2];
            for (int d = 0; d < m; ++d) {
                step.origins(d, i) = r[std::size_t(3 + d)];
                step.map.sources(d, i) = r[std::size_t(3 + m + d)];
                step.map.images(d, i) = r[std::size_t(3 + 2 * m + d)];
            }
        }
        chained.steps.push_back(std::move(step));
    }
    return chained;
}

}  // namespace mrm
