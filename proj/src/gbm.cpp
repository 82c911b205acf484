#include <algorithm>
#include <cmath>
#include <numeric>

#include "leakguard/errors.hpp"
#include "leakguard/learners.hpp"
#include "leakguard/stats.hpp"

namespace leakguard {

namespace {

constexpr double kMinHessian = 1e-6;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct GbmTreeBuilder {
    const Eigen::MatrixXd& x;
    const std::vector<double>& g;
    const std::vector<double>& h;
    const GbmParams& params;
    GbmTree tree;

    double leaf_weight(double gs, double hs) const { return -gs / (hs + params.lambda); }
    double score(double gs, double hs) const { return gs * gs / (hs + params.lambda); }

    int grow(std::vector<std::size_t>& rows, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        double gs = 0.0;
        double hs = 0.0;
        for (std::size_t r : rows) {
            gs += g[r];
            hs += h[r];
        }
        TreeNode node;
        node.n = rows.size();
        node.value = {params.learn_rate * leaf_weight(gs, hs)};

        int best_f = -1;
        double best_gain = 1e-12;
        double best_thr = 0.0;
        if (depth < params.max_depth && rows.size() >= 2 * params.min_leaf) {
            const double parent = score(gs, hs);
            std::vector<std::size_t> sorted = rows;
            for (Eigen::Index f = 0; f < x.cols(); ++f) {
                std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                    return x(static_cast<Eigen::Index>(a), f) < x(static_cast<Eigen::Index>(b), f);
                });
                double gl = 0.0;
                double hl = 0.0;
                for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                    gl += g[sorted[i]];
                    hl += h[sorted[i]];
                    const std::size_t nl = i + 1;
                    if (nl < params.min_leaf || sorted.size() - nl < params.min_leaf) continue;
                    const double a = x(static_cast<Eigen::Index>(sorted[i]), f);
                    const double b = x(static_cast<Eigen::Index>(sorted[i + 1]), f);
                    if (a == b) continue;
                    const double gain = 0.5 * (score(gl, hl) + score(gs - gl, hs - hl) - parent);
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_f = static_cast<int>(f);
                        best_thr = a + (b - a) / 2.0;
                        if (!(best_thr < b)) best_thr = a;
                    }
                }
            }
        }
        if (best_f >= 0) {
            std::vector<std::size_t> left;
            std::vector<std::size_t> right;
            for (std::size_t r : rows) {
                (x(static_cast<Eigen::Index>(r), best_f) <= best_thr ? left : right).push_back(r);
            }
            rows.clear();
            rows.shrink_to_fit();
            node.feature = best_f;
            node.threshold = best_thr;
            node.left = grow(left, depth + 1);
            node.right = grow(right, depth + 1);
        }
        tree.nodes[static_cast<std::size_t>(id)] = std::move(node);
        return id;
    }
};

}  // namespace

LossDerivs gbm_loss(GbmLoss loss, double eta, double lower, double upper, double sigma) {
    if (loss == GbmLoss::squared) {
        const double r = eta - lower;
        return {0.5 * r * r, r, 1.0};
    }
    const double z = (lower - eta) / sigma;
    if (std::isinf(upper)) {
        const double haz = stats::normal_hazard(z);
        return {-stats::normal_log_sf(z), -haz / sigma, std::max(kMinHessian, haz * (haz - z) / (sigma * sigma))};
    }
    if (upper != lower) throw UnsupportedError("interval-censored AFT targets are not supported");
    return {0.5 * z * z + kHalfLog2Pi + std::log(sigma), -z / sigma, std::max(kMinHessian, 1.0 / (sigma * sigma))};
}

double GbmTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    std::size_t id = 0;
    while (nodes[id].feature >= 0) {
        const TreeNode& nd = nodes[id];
        id = static_cast<std::size_t>(row[nd.feature] <= nd.threshold ? nd.left : nd.right);
    }
    return nodes[id].value[0];
}

Eigen::VectorXd GbmModel::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(x.rows(), eta0);
    for (const GbmTree& t : trees) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) eta[i] += t.predict(x.row(i));
    }
    return eta;
}

GbmModel fit_gbm(const Eigen::MatrixXd& x, const std::vector<double>& lower, const std::vector<double>& upper,
                 const GbmParams& params, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0 || lower.size() != n) throw DataError("gbm: targets do not match the design matrix");
    if (params.loss == GbmLoss::aft_normal && upper.size() != n) throw DataError("gbm: missing upper bounds");
    if (!(params.learn_rate > 0.0)) throw FitError("gbm: learn_rate must be > 0");
    if (!(params.sigma > 0.0)) throw FitError("gbm: sigma must be > 0");
    if (!(params.sample_size > 0.0 && params.sample_size <= 1.0)) throw FitError("gbm: sample_size must lie in (0, 1]");
    if (params.min_leaf < 1) throw FitError("gbm: min_n must be >= 1");

    GbmModel model;
    model.params = params;
    if (params.loss == GbmLoss::squared) {
        model.eta0 = std::accumulate(lower.begin(), lower.end(), 0.0) / static_cast<double>(n);
    } else {
        std::vector<double> event_log_times;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isinf(upper[i])) event_log_times.push_back(lower[i]);
        }
        if (event_log_times.empty()) throw FitError("gbm with aft_normal loss: no events");
        model.eta0 = *stats::median(event_log_times);
    }

    std::vector<double> eta(n, model.eta0);
    std::vector<double> g(n);
    std::vector<double> h(n);
    auto refresh = [&]() {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const LossDerivs d = gbm_loss(params.loss, eta[i], lower[i], params.loss == GbmLoss::squared ? 0.0 : upper[i],
                                          params.sigma);
            total += d.loss;
            g[i] = d.grad;
            h[i] = d.hess;
        }
        model.train_loss.push_back(total / static_cast<double>(n));
    };
    refresh();

    const auto sample_n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params.sample_size * static_cast<double>(n))));
    for (std::size_t round = 0; round < params.rounds; ++round) {
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        if (sample_n < n) {
            Rng rng(mix64({seed, round}));
            for (std::size_t i = 0; i < sample_n; ++i) std::swap(rows[i], rows[i + rng.index(n - i)]);
            rows.resize(sample_n);
            std::sort(rows.begin(), rows.end());
        }
        GbmTreeBuilder builder{x, g, h, params, {}};
        builder.grow(rows, 0);
        for (std::size_t i = 0; i < n; ++i) eta[i] += builder.tree.predict(x.row(static_cast<Eigen::Index>(i)));
        model.trees.push_back(std::move(builder.tree));
        refresh();
    }
    return model;
}

}  // namespace leakguard
