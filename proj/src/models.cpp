#include "fairgrade/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "fairgrade/rng.hpp"

namespace fairgrade {

namespace {

constexpr std::array<std::string_view, kNumFamilies> kFamilyNames = {"dummy", "lr",  "dt",
                                                                     "rf",    "gbt", "knn"};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double hp_get(const Hyperparams& hp, const std::string& name, double fallback) {
    auto it = hp.find(name);
    return it == hp.end() ? fallback : it->second;
}

// Canonical row order: lexicographic on feature values then label. Sorting
// the training set first makes order-sensitive arithmetic (summations,
// neighbor tie-breaks) invariant to the caller's sample order.
std::vector<int32_t> canonical_order(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXi>& y) {
    std::vector<int32_t> order(static_cast<size_t>(x.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
        }
        return y[a] < y[b];
    });
    return order;
}

int single_class_or_minus_one(const Eigen::Ref<const Eigen::VectorXi>& y) {
    bool pos = false, neg = false;
    for (Eigen::Index i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg) = true;
    if (pos && neg) return -1;
    return pos ? 1 : 0;
}

void write_bytes(std::ostream& out, const void* data, size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& in, void* data, size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("model load: truncated stream");
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    write_bytes(out, &value, sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value;
    read_bytes(in, &value, sizeof(T));
    return value;
}

void write_string(std::ostream& out, const std::string& text) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(text.size()));
    write_bytes(out, text.data(), text.size());
}

std::string read_string(std::istream& in) {
    const uint32_t n = read_pod<uint32_t>(in);
    std::string text(n, '\0');
    if (n) read_bytes(in, text.data(), n);
    return text;
}

// Concrete on-disk payload kind. A family trained on single-label data is
// stored as a constant scorer, whatever its declared family.
enum StorageTag : uint8_t {
    kTagConstant = 0,
    kTagLinear = 1,
    kTagTree = 2,
    kTagForest = 3,
    kTagBoosted = 4,
    kTagKnn = 5,
};

void write_spec(std::ostream& out, const ModelSpec& spec) {
    write_pod<uint8_t>(out, static_cast<uint8_t>(spec.family));
    write_pod<uint64_t>(out, spec.seed);
    write_pod<uint32_t>(out, static_cast<uint32_t>(spec.hyperparams.size()));
    for (const auto& [name, value] : spec.hyperparams) {
        write_string(out, name);
        write_pod<double>(out, value);
    }
}

ModelSpec read_spec(std::istream& in) {
    ModelSpec spec;
    spec.family = static_cast<ModelFamily>(read_pod<uint8_t>(in));
    spec.seed = read_pod<uint64_t>(in);
    const uint32_t n = read_pod<uint32_t>(in);
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = read_string(in);
        spec.hyperparams[name] = read_pod<double>(in);
    }
    return spec;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
    write_pod<int64_t>(out, v.size());
    write_bytes(out, v.data(), sizeof(double) * static_cast<size_t>(v.size()));
}

Eigen::VectorXd read_vector(std::istream& in) {
    const int64_t n = read_pod<int64_t>(in);
    Eigen::VectorXd v(n);
    if (n) read_bytes(in, v.data(), sizeof(double) * static_cast<size_t>(n));
    return v;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    write_pod<int64_t>(out, m.rows());
    write_pod<int64_t>(out, m.cols());
    write_bytes(out, m.data(), sizeof(double) * static_cast<size_t>(m.size()));
}

Eigen::MatrixXd read_matrix(std::istream& in) {
    const int64_t rows = read_pod<int64_t>(in);
    const int64_t cols = read_pod<int64_t>(in);
    Eigen::MatrixXd m(rows, cols);
    if (m.size()) read_bytes(in, m.data(), sizeof(double) * static_cast<size_t>(m.size()));
    return m;
}

// Fields written one by one so struct padding never reaches the stream.
void write_tree(std::ostream& out, const DecisionTree& tree) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(tree.nodes().size()));
    for (const TreeNode& node : tree.nodes()) {
        write_pod<int32_t>(out, node.feature);
        write_pod<double>(out, node.threshold);
        write_pod<int32_t>(out, node.left);
        write_pod<int32_t>(out, node.right);
        write_pod<double>(out, node.value);
    }
}

DecisionTree read_tree(std::istream& in) {
    DecisionTree tree;
    const uint32_t n = read_pod<uint32_t>(in);
    tree.mutable_nodes().resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        TreeNode& node = tree.mutable_nodes()[i];
        node.feature = read_pod<int32_t>(in);
        node.threshold = read_pod<double>(in);
        node.left = read_pod<int32_t>(in);
        node.right = read_pod<int32_t>(in);
        node.value = read_pod<double>(in);
    }
    return tree;
}

}  // namespace

std::string_view family_name(ModelFamily family) {
    return kFamilyNames[static_cast<size_t>(family)];
}

std::optional<ModelFamily> parse_family(std::string_view text) {
    for (size_t i = 0; i < kFamilyNames.size(); ++i) {
        if (kFamilyNames[i] == text) return static_cast<ModelFamily>(i);
    }
    return std::nullopt;
}

void validate_hyperparams(ModelFamily family, const Hyperparams& hp) {
    auto require = [&](const std::string& name, double lo, double hi) {
        auto it = hp.find(name);
        if (it == hp.end()) return;
        if (!(it->second >= lo && it->second <= hi))
            throw std::invalid_argument("hyperparameter out of range: " + name);
    };
    auto reject_unknown = [&](std::initializer_list<std::string_view> known) {
        for (const auto& [name, value] : hp) {
            (void)value;
            if (std::find(known.begin(), known.end(), name) == known.end())
                throw std::invalid_argument("unknown hyperparameter for " +
                                            std::string(family_name(family)) + ": " + name);
        }
    };
    switch (family) {
        case ModelFamily::Dummy:
            reject_unknown({});
            break;
        case ModelFamily::LR:
            reject_unknown({"l2", "max_iters", "tolerance"});
            require("l2", 0.0, 1e9);
            require("max_iters", 1.0, 1e7);
            require("tolerance", 0.0, 1.0);
            break;
        case ModelFamily::DT:
            reject_unknown({"max_depth", "min_leaf"});
            require("max_depth", -1.0, 1e6);
            require("min_leaf", 1.0, 1e9);
            break;
        case ModelFamily::RF:
            reject_unknown({"trees", "max_depth", "min_leaf"});
            require("trees", 1.0, 1e5);
            require("max_depth", -1.0, 1e6);
            require("min_leaf", 1.0, 1e9);
            break;
        case ModelFamily::GBT:
            reject_unknown({"stages", "learning_rate", "depth", "min_leaf"});
            require("stages", 1.0, 1e5);
            require("learning_rate", 1e-6, 4.0);
            require("depth", 1.0, 64.0);
            require("min_leaf", 1.0, 1e9);
            break;
        case ModelFamily::KNN:
            reject_unknown({"k"});
            require("k", 1.0, 1e9);
            break;
    }
}

std::vector<Hyperparams> default_grid(ModelFamily family) {
    std::vector<Hyperparams> grid;
    switch (family) {
        case ModelFamily::Dummy:
            grid.push_back({});
            break;
        case ModelFamily::LR:
            for (double l2 : {0.01, 0.1, 1.0, 10.0}) grid.push_back({{"l2", l2}});
            break;
        case ModelFamily::DT:
            for (double depth : {4.0, 8.0, 16.0, -1.0})
                for (double leaf : {1.0, 10.0, 100.0})
                    grid.push_back({{"max_depth", depth}, {"min_leaf", leaf}});
            break;
        case ModelFamily::RF:
            for (double depth : {8.0, 16.0, -1.0})
                for (double leaf : {1.0, 10.0})
                    grid.push_back({{"trees", 100.0}, {"max_depth", depth}, {"min_leaf", leaf}});
            break;
        case ModelFamily::GBT:
            for (double stages : {100.0, 200.0})
                for (double lr : {0.1, 0.3})
                    for (double depth : {3.0, 6.0})
                        grid.push_back(
                            {{"stages", stages}, {"learning_rate", lr}, {"depth", depth}});
            break;
        case ModelFamily::KNN:
            for (double k : {5.0, 15.0, 51.0}) grid.push_back({{"k", k}});
            break;
    }
    return grid;
}

double TrainedModel::predict_proba_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    Eigen::MatrixXd single(1, row.size());
    single.row(0) = row;
    return predict_proba(single)[0];
}

namespace {

// Constant scorer: the Dummy family, and the degenerate result of training
// any family on single-label data (family() then reports the declared one).
class DummyModel final : public TrainedModel {
  public:
    DummyModel(const ModelSpec& spec, Eigen::Index features, double positive_rate)
        : features_(features), positive_rate_(positive_rate) {
        spec_ = spec;
    }

    ModelFamily family() const override { return spec_.family; }
    Eigen::Index feature_count() const override { return features_; }

    Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        if (x.cols() != features_) throw std::invalid_argument("predict: feature count mismatch");
        return Eigen::VectorXd::Constant(x.rows(), positive_rate_);
    }

    void save(std::ostream& out) const override {
        write_pod<uint8_t>(out, kTagConstant);
        write_spec(out, spec_);
        write_pod<int64_t>(out, features_);
        write_pod<double>(out, positive_rate_);
    }

    static std::unique_ptr<TrainedModel> load(std::istream& in, const ModelSpec& spec) {
        const int64_t features = read_pod<int64_t>(in);
        const double rate = read_pod<double>(in);
        return std::make_unique<DummyModel>(spec, features, rate);
    }

  private:
    Eigen::Index features_;
    double positive_rate_;
};

class LinearModel final : public TrainedModel {
  public:
    LinearModel(const ModelSpec& spec, Eigen::VectorXd weights, double bias)
        : weights_(std::move(weights)), bias_(bias) {
        spec_ = spec;
    }

    ModelFamily family() const override { return ModelFamily::LR; }
    Eigen::Index feature_count() const override { return weights_.size(); }

    Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        if (x.cols() != weights_.size())
            throw std::invalid_argument("predict: feature count mismatch");
        Eigen::VectorXd z = (x * weights_).array() + bias_;
        return z.unaryExpr([](double v) { return sigmoid(v); });
    }

    void save(std::ostream& out) const override {
        write_pod<uint8_t>(out, kTagLinear);
        write_spec(out, spec_);
        write_pod<double>(out, bias_);
        write_vector(out, weights_);
    }

    static std::unique_ptr<TrainedModel> load(std::istream& in, const ModelSpec& spec) {
        const double bias = read_pod<double>(in);
        Eigen::VectorXd weights = read_vector(in);
        return std::make_unique<LinearModel>(spec, std::move(weights), bias);
    }

  private:
    Eigen::VectorXd weights_;
    double bias_;
};

class TreeModel final : public TrainedModel {
  public:
    TreeModel(const ModelSpec& spec, DecisionTree tree, Eigen::Index features)
        : tree_(std::move(tree)), features_(features) {
        spec_ = spec;
    }

    ModelFamily family() const override { return ModelFamily::DT; }
    Eigen::Index feature_count() const override { return features_; }

    Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        if (x.cols() != features_) throw std::invalid_argument("predict: feature count mismatch");
        Eigen::VectorXd out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = tree_.predict_row(x.row(i));
        return out;
    }

    void save(std::ostream& out) const override {
        write_pod<uint8_t>(out, kTagTree);
        write_spec(out, spec_);
        write_pod<int64_t>(out, features_);
        write_tree(out, tree_);
    }

    static std::unique_ptr<TrainedModel> load(std::istream& in, const ModelSpec& spec) {
        const int64_t features = read_pod<int64_t>(in);
        return std::make_unique<TreeModel>(spec, read_tree(in), features);
    }

  private:
    DecisionTree tree_;
    Eigen::Index features_;
};

}  // namespace

class ForestModel final : public TrainedModel {
  public:
    ForestModel(const ModelSpec& spec, std::vector<DecisionTree> trees, Eigen::Index features)
        : trees_(std::move(trees)), features_(features) {
        spec_ = spec;
    }

    ModelFamily family() const override { return ModelFamily::RF; }
    Eigen::Index feature_count() const override { return features_; }

    Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        if (x.cols() != features_) throw std::invalid_argument("predict: feature count mismatch");
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
        for (const DecisionTree& tree : trees_) {
            for (Eigen::Index i = 0; i < x.rows(); ++i) sum[i] += tree.predict_row(x.row(i));
        }
        return sum / static_cast<double>(trees_.size());
    }

    const std::vector<DecisionTree>& trees() const { return trees_; }

    void save(std::ostream& out) const override {
        write_pod<uint8_t>(out, kTagForest);
        write_spec(out, spec_);
        write_pod<int64_t>(out, features_);
        write_pod<uint32_t>(out, static_cast<uint32_t>(trees_.size()));
        for (const DecisionTree& tree : trees_) write_tree(out, tree);
    }

    static std::unique_ptr<TrainedModel> load(std::istream& in, const ModelSpec& spec) {
        const int64_t features = read_pod<int64_t>(in);
        const uint32_t n = read_pod<uint32_t>(in);
        std::vector<DecisionTree> trees;
        trees.reserve(n);
        for (uint32_t i = 0; i < n; ++i) trees.push_back(read_tree(in));
        return std::make_unique<ForestModel>(spec, std::move(trees), features);
    }

  private:
    std::vector<DecisionTree> trees_;
    Eigen::Index features_;
};

namespace {

class BoostedModel final : public TrainedModel {
  public:
    BoostedModel(const ModelSpec& spec, double base_score, double learning_rate,
                 std::vector<DecisionTree> trees, Eigen::Index features)
        : base_score_(base_score),
          learning_rate_(learning_rate),
          trees_(std::move(trees)),
          features_(features) {
        spec_ = spec;
    }

    ModelFamily family() const override { return ModelFamily::GBT; }
    Eigen::Index feature_count() const override { return features_; }

    Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        if (x.cols() != features_) throw std::invalid_argument("predict: feature count mismatch");
        Eigen::VectorXd margin = Eigen::VectorXd::Constant(x.rows(), base_score_);
        for (const DecisionTree& tree : trees_) {
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                margin[i] += learning_rate_ * tree.predict_row(x.row(i));
        }
        return margin.unaryExpr([](double v) { return sigmoid(v); });
    }

    void save(std::ostream& out) const override {
        write_pod<uint8_t>(out, kTagBoosted);
        write_spec(out, spec_);
        write_pod<int64_t>(out, features_);
        write_pod<double>(out, base_score_);
        write_pod<double>(out, learning_rate_);
        write_pod<uint32_t>(out, static_cast<uint32_t>(trees_.size()));
        for (const DecisionTree& tree : trees_) write_tree(out, tree);
    }

    static std::unique_ptr<TrainedModel> load(std::istream& in, const ModelSpec& spec) {
        const int64_t features = read_pod<int64_t>(in);
        const double base = read_pod<double>(in);
        const double lr = read_pod<double>(in);
        const uint32_t n = read_pod<uint32_t>(in);
        std::vector<DecisionTree> trees;
        trees.reserve(n);
        for (uint32_t i = 0; i < n; ++i) trees.push_back(read_tree(in));
        return std::make_unique<BoostedModel>(spec, base, lr, std::move(trees), features);
    }

  private:
    double base_score_;
    double learning_rate_;
    std::vector<DecisionTree> trees_;
    Eigen::Index features_;
};

class KnnModel final : public TrainedModel {
  public:
    KnnModel(const ModelSpec& spec, Eigen::MatrixXd train_x, Eigen::VectorXi train_y, int k)
        : train_x_(std::move(train_x)), train_y_(std::move(train_y)), k_(k) {
        spec_ = spec;
    }

    ModelFamily family() const override { return ModelFamily::KNN; }
    Eigen::Index feature_count() const override { return train_x_.cols(); }

    Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const override {
        if (x.cols() != train_x_.cols())
            throw std::invalid_argument("predict: feature count mismatch");
        const Eigen::Index n_train = train_x_.rows();
        const int k = std::min<Eigen::Index>(k_, n_train);
        Eigen::VectorXd out(x.rows());
        const Eigen::VectorXd train_sq = train_x_.rowwise().squaredNorm();
        std::vector<std::pair<double, int32_t>> dist(static_cast<size_t>(n_train));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            // Squared distances; ties break to the lower training index.
            Eigen::VectorXd d =
                train_sq - 2.0 * (train_x_ * x.row(i).transpose()) +
                Eigen::VectorXd::Constant(n_train, x.row(i).squaredNorm());
            for (Eigen::Index t = 0; t < n_train; ++t)
                dist[static_cast<size_t>(t)] = {d[t], static_cast<int32_t>(t)};
            std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
            int64_t positives = 0;
            for (int t = 0; t < k; ++t) positives += train_y_[dist[static_cast<size_t>(t)].second] == 1;
            out[i] = static_cast<double>(positives) / static_cast<double>(k);
        }
        return out;
    }

    void save(std::ostream& out) const override {
        write_pod<uint8_t>(out, kTagKnn);
        write_spec(out, spec_);
        write_pod<int32_t>(out, k_);
        write_matrix(out, train_x_);
        write_pod<int64_t>(out, train_y_.size());
        write_bytes(out, train_y_.data(), sizeof(int32_t) * static_cast<size_t>(train_y_.size()));
    }

    static std::unique_ptr<TrainedModel> load(std::istream& in, const ModelSpec& spec) {
        const int32_t k = read_pod<int32_t>(in);
        Eigen::MatrixXd x = read_matrix(in);
        const int64_t n = read_pod<int64_t>(in);
        Eigen::VectorXi y(n);
        if (n) read_bytes(in, y.data(), sizeof(int32_t) * static_cast<size_t>(n));
        return std::make_unique<KnnModel>(spec, std::move(x), std::move(y), k);
    }

  private:
    Eigen::MatrixXd train_x_;
    Eigen::VectorXi train_y_;
    int k_;
};

std::unique_ptr<TrainedModel> train_lr(const ModelSpec& spec,
                                       const Eigen::Ref<const Eigen::MatrixXd>& x,
                                       const Eigen::Ref<const Eigen::VectorXi>& y) {
    const std::vector<int32_t> order = canonical_order(x, y);
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    Eigen::MatrixXd xs(n, d);
    Eigen::VectorXd ys(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        xs.row(i) = x.row(order[static_cast<size_t>(i)]);
        ys[i] = y[order[static_cast<size_t>(i)]] == 1 ? 1.0 : 0.0;
    }

    const double l2 = hp_get(spec.hyperparams, "l2", 1.0);
    const int max_iters = static_cast<int>(hp_get(spec.hyperparams, "max_iters", 500));
    const double tolerance = hp_get(spec.hyperparams, "tolerance", 1e-6);

    // Fixed step bounded by the logistic-loss curvature: the Hessian is at
    // most (max column sum of X^T X) / (4n) + l2 in spectral norm.
    const double trace_bound = xs.array().square().sum() / static_cast<double>(n);
    const double lipschitz = trace_bound / 4.0 + l2 + 1.0;
    const double step = 1.0 / lipschitz;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        Eigen::VectorXd z = (xs * w).array() + b;
        Eigen::VectorXd p = z.unaryExpr([](double v) { return sigmoid(v); });
        Eigen::VectorXd residual = p - ys;
        Eigen::VectorXd grad_w = xs.transpose() * residual / static_cast<double>(n) + l2 * w;
        const double grad_b = residual.sum() / static_cast<double>(n);
        const double grad_norm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
        if (grad_norm < tolerance) break;
        w -= step * grad_w;
        b -= step * grad_b;
    }
    return std::make_unique<LinearModel>(spec, std::move(w), b);
}

std::unique_ptr<TrainedModel> train_dt(const ModelSpec& spec,
                                       const Eigen::Ref<const Eigen::MatrixXd>& x,
                                       const Eigen::Ref<const Eigen::VectorXi>& y) {
    TreeParams params;
    params.max_depth = static_cast<int>(hp_get(spec.hyperparams, "max_depth", -1));
    params.min_leaf = static_cast<int>(hp_get(spec.hyperparams, "min_leaf", 1));
    params.regression = false;

    Eigen::VectorXd target(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) target[i] = y[i] == 1 ? 1.0 : 0.0;
    std::vector<int32_t> rows(static_cast<size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), 0);

    Rng rng(substream(spec.seed, "dt"));
    DecisionTree tree;
    tree.fit(x, target, std::move(rows), params, rng);
    return std::make_unique<TreeModel>(spec, std::move(tree), x.cols());
}

std::unique_ptr<TrainedModel> train_rf(const ModelSpec& spec,
                                       const Eigen::Ref<const Eigen::MatrixXd>& x,
                                       const Eigen::Ref<const Eigen::VectorXi>& y) {
    const int n_trees = static_cast<int>(hp_get(spec.hyperparams, "trees", 100));
    TreeParams params;
    params.max_depth = static_cast<int>(hp_get(spec.hyperparams, "max_depth", -1));
    params.min_leaf = static_cast<int>(hp_get(spec.hyperparams, "min_leaf", 1));
    params.features_per_split =
        static_cast<int>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
    params.regression = false;

    Eigen::VectorXd target(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) target[i] = y[i] == 1 ? 1.0 : 0.0;
    const Eigen::Index n = x.rows();

    std::vector<DecisionTree> trees(static_cast<size_t>(n_trees));
    // Each tree draws from its own seed stream, so the forest does not
    // depend on build order.
    for (int t = 0; t < n_trees; ++t) {
        Rng rng(substream(spec.seed, "rf-tree", static_cast<uint64_t>(t)));
        std::vector<int32_t> rows(static_cast<size_t>(n));
        for (auto& r : rows) r = static_cast<int32_t>(rng.uniform_index(static_cast<uint64_t>(n)));
        trees[static_cast<size_t>(t)].fit(x, target, std::move(rows), params, rng);
    }
    return std::make_unique<ForestModel>(spec, std::move(trees), x.cols());
}

std::unique_ptr<TrainedModel> train_gbt(const ModelSpec& spec,
                                        const Eigen::Ref<const Eigen::MatrixXd>& x,
                                        const Eigen::Ref<const Eigen::VectorXi>& y) {
    const int stages = static_cast<int>(hp_get(spec.hyperparams, "stages", 100));
    const double learning_rate = hp_get(spec.hyperparams, "learning_rate", 0.1);
    TreeParams params;
    params.max_depth = static_cast<int>(hp_get(spec.hyperparams, "depth", 3));
    params.min_leaf = static_cast<int>(hp_get(spec.hyperparams, "min_leaf", 1));
    params.regression = true;

    const Eigen::Index n = x.rows();
    Eigen::VectorXd ys(n);
    for (Eigen::Index i = 0; i < n; ++i) ys[i] = y[i] == 1 ? 1.0 : 0.0;

    const double positive_rate = ys.sum() / static_cast<double>(n);
    // Base margin at the training log-odds; clamped away from the poles.
    const double p0 = std::min(std::max(positive_rate, 1e-12), 1.0 - 1e-12);
    const double base_score = std::log(p0 / (1.0 - p0));

    std::vector<int32_t> all_rows(static_cast<size_t>(n));
    std::iota(all_rows.begin(), all_rows.end(), 0);

    Eigen::VectorXd margin = Eigen::VectorXd::Constant(n, base_score);
    std::vector<DecisionTree> trees;
    trees.reserve(static_cast<size_t>(stages));
    Rng rng(substream(spec.seed, "gbt"));
    for (int stage = 0; stage < stages; ++stage) {
        Eigen::VectorXd residual(n);
        for (Eigen::Index i = 0; i < n; ++i) residual[i] = ys[i] - sigmoid(margin[i]);
        DecisionTree tree;
        tree.fit(x, residual, all_rows, params, rng);
        for (Eigen::Index i = 0; i < n; ++i)
            margin[i] += learning_rate * tree.predict_row(x.row(i));
        trees.push_back(std::move(tree));
    }
    return std::make_unique<BoostedModel>(spec, base_score, learning_rate, std::move(trees),
                                          x.cols());
}

std::unique_ptr<TrainedModel> train_knn(const ModelSpec& spec,
                                        const Eigen::Ref<const Eigen::MatrixXd>& x,
                                        const Eigen::Ref<const Eigen::VectorXi>& y) {
    const int k = static_cast<int>(hp_get(spec.hyperparams, "k", 5));
    const std::vector<int32_t> order = canonical_order(x, y);
    Eigen::MatrixXd xs(x.rows(), x.cols());
    Eigen::VectorXi ys(y.size());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        xs.row(i) = x.row(order[static_cast<size_t>(i)]);
        ys[i] = y[order[static_cast<size_t>(i)]];
    }
    return std::make_unique<KnnModel>(spec, std::move(xs), std::move(ys), k);
}

}  // namespace

std::unique_ptr<TrainedModel> train(const ModelSpec& spec,
                                    const Eigen::Ref<const Eigen::MatrixXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXi>& y) {
    if (x.rows() != y.size()) throw std::invalid_argument("train: size mismatch");
    if (x.rows() < 2) throw std::invalid_argument("train: need at least 2 samples");
    validate_hyperparams(spec.family, spec.hyperparams);

    const Eigen::Index n = x.rows();
    double positives = 0;
    for (Eigen::Index i = 0; i < n; ++i) positives += y[i] == 1;
    const double positive_rate = positives / static_cast<double>(n);

    // Single-label training degenerates to a constant scorer in any family.
    if (spec.family == ModelFamily::Dummy || single_class_or_minus_one(y) != -1)
        return std::make_unique<DummyModel>(spec, x.cols(), positive_rate);

    switch (spec.family) {
        case ModelFamily::Dummy:
            return std::make_unique<DummyModel>(spec, x.cols(), positive_rate);
        case ModelFamily::LR:
            return train_lr(spec, x, y);
        case ModelFamily::DT:
            return train_dt(spec, x, y);
        case ModelFamily::RF:
            return train_rf(spec, x, y);
        case ModelFamily::GBT:
            return train_gbt(spec, x, y);
        case ModelFamily::KNN:
            return train_knn(spec, x, y);
    }
    throw std::invalid_argument("train: unknown family");
}

int predict_label(const TrainedModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                  double threshold) {
    return model.predict_proba_row(row) >= threshold ? 1 : 0;
}

Eigen::VectorXi predict_labels(const TrainedModel& model,
                               const Eigen::Ref<const Eigen::MatrixXd>& x, double threshold) {
    const Eigen::VectorXd proba = model.predict_proba(x);
    Eigen::VectorXi labels(proba.size());
    for (Eigen::Index i = 0; i < proba.size(); ++i) labels[i] = proba[i] >= threshold ? 1 : 0;
    return labels;
}

namespace {
constexpr char kModelMagic[4] = {'F', 'G', 'M', 'D'};
constexpr uint32_t kModelVersion = 1;
}  // namespace

void save_model(const TrainedModel& model, std::ostream& out) {
    write_bytes(out, kModelMagic, sizeof(kModelMagic));
    write_pod<uint32_t>(out, kModelVersion);
    model.save(out);
}

std::unique_ptr<TrainedModel> load_model(std::istream& in) {
    char magic[4];
    read_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw std::runtime_error("model load: bad magic");
    const uint32_t version = read_pod<uint32_t>(in);
    if (version != kModelVersion) throw std::runtime_error("model load: unsupported version");
    const uint8_t tag = read_pod<uint8_t>(in);
    const ModelSpec spec = read_spec(in);
    switch (tag) {
        case kTagConstant:
            return DummyModel::load(in, spec);
        case kTagLinear:
            return LinearModel::load(in, spec);
        case kTagTree:
            return TreeModel::load(in, spec);
        case kTagForest:
            return ForestModel::load(in, spec);
        case kTagBoosted:
            return BoostedModel::load(in, spec);
        case kTagKnn:
            return KnnModel::load(in, spec);
    }
    throw std::runtime_error("model load: unknown payload tag");
}

const std::vector<DecisionTree>& forest_trees(const TrainedModel& model) {
    const auto* forest = dynamic_cast<const ForestModel*>(&model);
    if (!forest) throw std::invalid_argument("forest_trees: model is not a random forest");
    return forest->trees();
}

}  // namespace fairgrade
