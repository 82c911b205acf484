#include <algorithm>
#include <cmath>
#include <numeric>

#include "leakguard/errors.hpp"
#include "leakguard/learners.hpp"

namespace leakguard {

namespace {

using Positions = std::vector<std::uint32_t>;

class CartBuilder {
public:
    CartBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_classes, const std::vector<std::size_t>& rows,
                const TreeParams& params, Rng* rng)
        : x_(x), y_(y), k_(n_classes), rows_(rows), params_(params), rng_(rng), left_(rows.size(), 0) {}

    Tree build() {
        const auto p = static_cast<std::size_t>(x_.cols());
        std::vector<Positions> sorted(p);
        for (std::size_t f = 0; f < p; ++f) {
            Positions& s = sorted[f];
            s.resize(rows_.size());
            std::iota(s.begin(), s.end(), 0U);
            std::stable_sort(s.begin(), s.end(), [&](std::uint32_t a, std::uint32_t b) {
                return value(a, f) < value(b, f);
            });
        }
        Positions all(rows_.size());
        std::iota(all.begin(), all.end(), 0U);
        grow(all, sorted, 0);
        return std::move(tree_);
    }

private:
    double value(std::uint32_t pos, std::size_t f) const {
        return x_(static_cast<Eigen::Index>(rows_[pos]), static_cast<Eigen::Index>(f));
    }
    double target(std::uint32_t pos) const { return y_[static_cast<Eigen::Index>(rows_[pos])]; }

    int grow(const Positions& members, std::vector<Positions>& sorted, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        TreeNode node;
        node.n = members.size();
        const double n = static_cast<double>(members.size());

        bool pure = true;
        if (k_ > 0) {
            node.value.assign(static_cast<std::size_t>(k_), 0.0);
            for (std::uint32_t pos : members) node.value[static_cast<std::size_t>(target(pos))] += 1.0;
            int present = 0;
            for (double& c : node.value) {
                present += c > 0.0;
                c /= n;
            }
            pure = present <= 1;
        } else {
            double sum = 0.0;
            for (std::uint32_t pos : members) sum += target(pos);
            node.value = {sum / n};
            const double first = target(members.front());
            for (std::uint32_t pos : members) {
                if (target(pos) != first) {
                    pure = false;
                    break;
                }
            }
        }

        if (!pure && depth < params_.max_depth && (params_.strict_min_n ? members.size() > params_.min_n : members.size() >= params_.min_n) &&
            members.size() >= 2) {
            Split best = find_split(sorted);
            if (best.feature >= 0) {
                const auto f = static_cast<std::size_t>(best.feature);
                for (std::uint32_t pos : members) left_[pos] = value(pos, f) <= best.threshold ? 1 : 0;
                std::vector<Positions> lsorted(sorted.size());
                std::vector<Positions> rsorted(sorted.size());
                for (std::size_t g = 0; g < sorted.size(); ++g) {
                    for (std::uint32_t pos : sorted[g]) (left_[pos] ? lsorted[g] : rsorted[g]).push_back(pos);
                }
                Positions lmem;
                Positions rmem;
                for (std::uint32_t pos : members) (left_[pos] ? lmem : rmem).push_back(pos);
                sorted.clear();
                sorted.shrink_to_fit();
                node.feature = best.feature;
                node.threshold = best.threshold;
                const int l = grow(lmem, lsorted, depth + 1);
                const int r = grow(rmem, rsorted, depth + 1);
                node.left = l;
                node.right = r;
            }
        }
        tree_.nodes[static_cast<std::size_t>(id)] = std::move(node);
        return id;
    }

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = -1.0;
    };

    std::vector<std::size_t> candidates() {
        const auto p = static_cast<std::size_t>(x_.cols());
        std::vector<std::size_t> all(p);
        std::iota(all.begin(), all.end(), 0);
        if (params_.mtry == 0 || params_.mtry >= p || rng_ == nullptr) return all;
        for (std::size_t i = 0; i < params_.mtry; ++i) {
            const std::size_t j = i + rng_->index(p - i);
            std::swap(all[i], all[j]);
        }
        all.resize(params_.mtry);
        return all;
    }

    Split find_split(const std::vector<Positions>& sorted) {
        Split best;
        const std::size_t m = sorted.front().size();
        const double n = static_cast<double>(m);
        for (std::size_t f : candidates()) {
            const Positions& s = sorted[f];
            if (value(s.front(), f) == value(s.back(), f)) continue;
            if (k_ > 0) {
                std::vector<double> total(static_cast<std::size_t>(k_), 0.0);
                for (std::uint32_t pos : s) total[static_cast<std::size_t>(target(pos))] += 1.0;
                double parent = 0.0;
                for (double c : total) parent += c * c;
                parent /= n;
                std::vector<double> left(static_cast<std::size_t>(k_), 0.0);
                double l2 = 0.0;  // sum of squared left counts
                double r2 = 0.0;
                for (double c : total) r2 += c * c;
                for (std::size_t i = 0; i + 1 < m; ++i) {
                    const auto c = static_cast<std::size_t>(target(s[i]));
                    l2 += 2.0 * left[c] + 1.0;
                    left[c] += 1.0;
                    const double rc = total[c] - left[c];
                    r2 -= 2.0 * rc + 1.0;
                    const double a = value(s[i], f);
                    const double b = value(s[i + 1], f);
                    if (a == b) continue;
                    const double nl = static_cast<double>(i + 1);
                    const double gain = l2 / nl + r2 / (n - nl) - parent;
                    consider(best, f, a, b, gain);
                }
            } else {
                double total = 0.0;
                for (std::uint32_t pos : s) total += target(pos);
                const double parent = total * total / n;
                double left = 0.0;
                for (std::size_t i = 0; i + 1 < m; ++i) {
                    left += target(s[i]);
                    const double a = value(s[i], f);
                    const double b = value(s[i + 1], f);
                    if (a == b) continue;
                    const double nl = static_cast<double>(i + 1);
                    const double right = total - left;
                    const double gain = left * left / nl + right * right / (n - nl) - parent;
                    consider(best, f, a, b, gain);
                }
            }
        }
        if (best.feature >= 0 && best.gain < -1e-9) best.feature = -1;
        return best;
    }

    static void consider(Split& best, std::size_t f, double a, double b, double gain) {
        if (best.feature < 0 || gain > best.gain + 1e-12) {
            best.feature = static_cast<int>(f);
            best.threshold = a + (b - a) / 2.0;
            best.gain = gain;
            if (!(best.threshold < b)) best.threshold = a;
        }
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& y_;
    int k_;
    const std::vector<std::size_t>& rows_;
    TreeParams params_;
    Rng* rng_;
    std::vector<char> left_;
    Tree tree_;
};

}  // namespace

const std::vector<double>& Tree::leaf(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    std::size_t id = 0;
    while (nodes[id].feature >= 0) {
        const TreeNode& nd = nodes[id];
        id = static_cast<std::size_t>(row[nd.feature] <= nd.threshold ? nd.left : nd.right);
    }
    return nodes[id].value;
}

int Tree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

std::size_t Tree::leaves() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

Tree fit_cart(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_classes, const std::vector<std::size_t>& rows,
              const TreeParams& params, Rng* rng) {
    if (rows.empty()) throw FitError("decision tree: no training rows");
    if (params.min_n < 1) throw FitError("decision tree: min_n must be >= 1");
    if (params.max_depth < 0) throw FitError("decision tree: tree_depth must be >= 0");
    return CartBuilder(x, y, n_classes, rows, params, rng).build();
}

Eigen::MatrixXd Forest::predict(const Eigen::MatrixXd& x) const {
    const Eigen::Index cols = n_classes > 0 ? n_classes : 1;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), cols);
    for (const Tree& t : trees) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const std::vector<double>& v = t.leaf(x.row(i));
            for (Eigen::Index c = 0; c < cols; ++c) out(i, c) += v[static_cast<std::size_t>(c)];
        }
    }
    return out / static_cast<double>(trees.size());
}

Forest fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_classes, std::size_t trees,
                         const TreeParams& params, std::uint64_t seed) {
    if (trees < 1) throw FitError("random forest: trees must be >= 1");
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0) throw FitError("random forest: no training rows");
    Forest forest;
    forest.n_classes = n_classes;
    forest.trees.reserve(trees);
    std::vector<std::size_t> rows(n);
    for (std::size_t t = 0; t < trees; ++t) {
        Rng rng(mix64({seed, t}));
        for (auto& r : rows) r = rng.index(n);
        forest.trees.push_back(fit_cart(x, y, n_classes, rows, params, &rng));
    }
    return forest;
}

}  // namespace leakguard
