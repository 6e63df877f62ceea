#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "fairgrade/metrics.hpp"
#include "fairgrade/models.hpp"
#include "fairgrade/rng.hpp"
#include "oracles.hpp"

using namespace fairgrade;

namespace {

// Two noisy Gaussian blobs; label 1 sits higher on every informative axis.
struct Blobs {
    Eigen::MatrixXd x;
    Eigen::VectorXi y;
};

Blobs make_blobs(int n, int d, double separation, uint64_t seed, double positive_rate = 0.5) {
    Rng rng(seed);
    Blobs blobs;
    blobs.x.resize(n, d);
    blobs.y.resize(n);
    for (int i = 0; i < n; ++i) {
        const int label = rng.bernoulli(positive_rate) ? 1 : 0;
        blobs.y[i] = label;
        for (int c = 0; c < d; ++c)
            blobs.x(i, c) = rng.normal(label == 1 ? separation : 0.0, 1.0);
    }
    return blobs;
}

double logistic_loss(const Eigen::VectorXd& proba, const Eigen::VectorXi& y) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double p = std::min(std::max(proba[i], 1e-12), 1.0 - 1e-12);
        loss -= y[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return loss / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("dummy: constant probability at the training positive rate") {
    const int n = 1000, n_pos = 361;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 3);
    Eigen::VectorXi y(n);
    for (int i = 0; i < n; ++i) {
        y[i] = i < n_pos ? 1 : 0;
        x(i, 0) = i;  // informative, but the dummy must ignore it
    }
    auto model = train(ModelSpec{ModelFamily::Dummy, {}, 1}, x, y);
    const Eigen::VectorXd proba = model->predict_proba(x);
    for (Eigen::Index i = 0; i < proba.size(); ++i) CHECK(proba[i] == 0.361);
    // Majority class 0 at threshold 0.5.
    const Eigen::VectorXi labels = predict_labels(*model, x);
    CHECK(labels.sum() == 0);
}

TEST_CASE("predict_label: threshold boundary is >=") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    Eigen::VectorXi y(2);
    y << 1, 0;  // positive rate 0.5
    auto model = train(ModelSpec{ModelFamily::Dummy, {}, 1}, x, y);
    CHECK(model->predict_proba_row(x.row(0)) == 0.5);
    CHECK(predict_label(*model, x.row(0), 0.5) == 1);
    CHECK(predict_label(*model, x.row(0), 0.51) == 0);
}

TEST_CASE("lr: separable toy set reaches training AUC 1") {
    Eigen::MatrixXd x(6, 2);
    x << -2, -1, -1.5, -2, -1, -1, 1, 1.5, 2, 1, 1.5, 2;
    Eigen::VectorXi y(6);
    y << 0, 0, 0, 1, 1, 1;
    auto model = train(ModelSpec{ModelFamily::LR, {{"l2", 0.01}}, 7}, x, y);
    CHECK(auc_roc(model->predict_proba(x), y) == 1.0);
}

TEST_CASE("lr: training is invariant to sample order") {
    Blobs blobs = make_blobs(80, 4, 1.0, 42);
    auto model = train(ModelSpec{ModelFamily::LR, {{"l2", 0.1}}, 7}, blobs.x, blobs.y);

    std::vector<int> perm(80);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(5);
    for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    Eigen::MatrixXd xp(80, 4);
    Eigen::VectorXi yp(80);
    for (int i = 0; i < 80; ++i) {
        xp.row(i) = blobs.x.row(perm[static_cast<size_t>(i)]);
        yp[i] = blobs.y[perm[static_cast<size_t>(i)]];
    }
    auto permuted = train(ModelSpec{ModelFamily::LR, {{"l2", 0.1}}, 7}, xp, yp);
    const Eigen::VectorXd a = model->predict_proba(blobs.x);
    const Eigen::VectorXd b = permuted->predict_proba(blobs.x);
    CHECK((a.array() == b.array()).all());  // bit-equal
}

TEST_CASE("dt: depth-1 recovers the brute-force best Gini split") {
    // One informative feature with one clean threshold, two noise features.
    Rng rng(88);
    const int n = 120;
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXi y(n);
    for (int i = 0; i < n; ++i) {
        y[i] = i % 2;
        x(i, 0) = rng.uniform(0.0, 1.0);
        x(i, 1) = y[i] == 1 ? 2.0 + rng.uniform(0.0, 1.0) : rng.uniform(0.0, 1.0);
        x(i, 2) = rng.uniform(0.0, 1.0);
    }
    auto model = train(ModelSpec{ModelFamily::DT, {{"max_depth", 1}}, 3}, x, y);
    const auto oracle = oracles::brute_force_best_gini(x, y);

    // Walk the fitted stump.
    std::ostringstream buffer;
    save_model(*model, buffer);
    // The stump must classify exactly like thresholding the oracle split.
    for (int i = 0; i < n; ++i) {
        const double p = model->predict_proba_row(x.row(i));
        const bool left = x(i, oracle.feature) <= oracle.threshold;
        CHECK(p == (left ? 0.0 : 1.0));
    }
}

TEST_CASE("dt: split equals exhaustive enumeration on random data") {
    Rng rng(4096);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 10 + static_cast<int>(rng.uniform_index(60));
        Eigen::MatrixXd x(n, 2);
        Eigen::VectorXi y(n);
        bool pos = false, neg = false;
        for (int i = 0; i < n; ++i) {
            x(i, 0) = static_cast<double>(rng.uniform_index(8));  // coarse grid forces ties
            x(i, 1) = static_cast<double>(rng.uniform_index(8));
            y[i] = rng.bernoulli(0.4) ? 1 : 0;
            (y[i] ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        const auto oracle = oracles::brute_force_best_gini(x, y);
        if (!oracle.found) continue;

        auto model = train(ModelSpec{ModelFamily::DT, {{"max_depth", 1}}, 1}, x, y);
        // Compare achieved impurity instead of the raw threshold so exact
        // ties between equally good splits stay legal. Rows grouped by
        // predicted leaf recover the stump's partition.
        std::map<double, std::pair<int64_t, int64_t>> leaves;
        for (int i = 0; i < n; ++i) {
            auto& leaf = leaves[model->predict_proba_row(x.row(i))];
            ++leaf.first;
            leaf.second += y[i] == 1;
        }
        double weighted = 0.0;
        for (const auto& [prob, counts] : leaves) {
            const double total = static_cast<double>(counts.first);
            const double p1 = static_cast<double>(counts.second) / total;
            weighted += total * (1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1));
        }
        weighted /= static_cast<double>(n);
        CHECK(weighted <= oracle.weighted_gini + 1e-12);
    }
}

TEST_CASE("dt: training is invariant to sample order") {
    Blobs blobs = make_blobs(100, 3, 1.2, 17);
    auto model = train(ModelSpec{ModelFamily::DT, {{"max_depth", 4}, {"min_leaf", 2}}, 9}, blobs.x,
                       blobs.y);
    Rng rng(6);
    std::vector<int> perm(100);
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    Eigen::MatrixXd xp(100, 3);
    Eigen::VectorXi yp(100);
    for (int i = 0; i < 100; ++i) {
        xp.row(i) = blobs.x.row(perm[static_cast<size_t>(i)]);
        yp[i] = blobs.y[perm[static_cast<size_t>(i)]];
    }
    auto permuted = train(ModelSpec{ModelFamily::DT, {{"max_depth", 4}, {"min_leaf", 2}}, 9}, xp, yp);
    CHECK((model->predict_proba(blobs.x).array() == permuted->predict_proba(blobs.x).array()).all());
}

TEST_CASE("rf: probability is the arithmetic mean of its trees") {
    Blobs blobs = make_blobs(150, 4, 1.0, 23);
    auto model = train(
        ModelSpec{ModelFamily::RF, {{"trees", 11}, {"max_depth", 6}, {"min_leaf", 2}}, 77}, blobs.x,
        blobs.y);
    const auto& trees = forest_trees(*model);
    REQUIRE(trees.size() == 11);
    const Eigen::VectorXd proba = model->predict_proba(blobs.x);
    for (int i = 0; i < 20; ++i) {
        double sum = 0.0;
        for (const auto& tree : trees) sum += tree.predict_row(blobs.x.row(i));
        CHECK(proba[i] == sum / 11.0);
    }
}

TEST_CASE("rf: all trees voting positive gives probability 1") {
    // Perfectly separated data with deep trees: every tree votes 0/1.
    Eigen::MatrixXd x(40, 1);
    Eigen::VectorXi y(40);
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = i < 20 ? static_cast<double>(i) : 100.0 + i;
        y[i] = i < 20 ? 0 : 1;
    }
    auto model =
        train(ModelSpec{ModelFamily::RF, {{"trees", 15}, {"min_leaf", 1}}, 5}, x, y);
    Eigen::MatrixXd probe(1, 1);
    probe << 500.0;
    CHECK(model->predict_proba(probe)[0] == 1.0);
    probe << -500.0;
    CHECK(model->predict_proba(probe)[0] == 0.0);
}

TEST_CASE("rf: seed determinism") {
    Blobs blobs = make_blobs(200, 5, 0.8, 31);
    const ModelSpec spec{ModelFamily::RF, {{"trees", 20}, {"max_depth", 8}, {"min_leaf", 2}}, 1234};
    auto a = train(spec, blobs.x, blobs.y);
    auto b = train(spec, blobs.x, blobs.y);
    Blobs probe = make_blobs(50, 5, 0.8, 99);
    CHECK((a->predict_proba(probe.x).array() == b->predict_proba(probe.x).array()).all());
}

TEST_CASE("gbt: training logistic loss is non-increasing across stages") {
    Blobs blobs = make_blobs(150, 4, 0.9, 404, 0.4);
    for (double lr : {0.1, 0.3}) {
        double previous = std::numeric_limits<double>::infinity();
        for (int stages : {1, 2, 5, 10, 25, 50}) {
            auto model = train(ModelSpec{ModelFamily::GBT,
                                         {{"stages", static_cast<double>(stages)},
                                          {"learning_rate", lr},
                                          {"depth", 3}},
                                         11},
                               blobs.x, blobs.y);
            const double loss = logistic_loss(model->predict_proba(blobs.x), blobs.y);
            CHECK(loss <= previous + 1e-12);
            previous = loss;
        }
    }
}

TEST_CASE("gbt: beats the base rate on separable data") {
    Blobs blobs = make_blobs(200, 3, 1.5, 2024, 0.4);
    auto model = train(
        ModelSpec{ModelFamily::GBT, {{"stages", 40}, {"learning_rate", 0.3}, {"depth", 3}}, 3},
        blobs.x, blobs.y);
    CHECK(auc_roc(model->predict_proba(blobs.x), blobs.y) > 0.95);
}

TEST_CASE("knn: k=1 on a training point returns that label") {
    Blobs blobs = make_blobs(50, 3, 2.0, 606);
    auto model = train(ModelSpec{ModelFamily::KNN, {{"k", 1}}, 0}, blobs.x, blobs.y);
    for (int i = 0; i < 50; ++i) {
        CHECK(model->predict_proba_row(blobs.x.row(i)) == static_cast<double>(blobs.y[i]));
    }
}

TEST_CASE("knn: probability is the positive fraction among neighbors") {
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 0.1, 0.2, 10.0;
    Eigen::VectorXi y(4);
    y << 1, 1, 0, 0;
    auto model = train(ModelSpec{ModelFamily::KNN, {{"k", 3}}, 0}, x, y);
    Eigen::MatrixXd probe(1, 1);
    probe << 0.05;
    CHECK(model->predict_proba(probe)[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("knn: training is invariant to sample order") {
    Blobs blobs = make_blobs(60, 2, 1.0, 99);
    auto a = train(ModelSpec{ModelFamily::KNN, {{"k", 5}}, 0}, blobs.x, blobs.y);
    Eigen::MatrixXd xp(60, 2);
    Eigen::VectorXi yp(60);
    for (int i = 0; i < 60; ++i) {
        xp.row(i) = blobs.x.row(59 - i);
        yp[i] = blobs.y[59 - i];
    }
    auto b = train(ModelSpec{ModelFamily::KNN, {{"k", 5}}, 0}, xp, yp);
    Blobs probe = make_blobs(40, 2, 1.0, 123);
    CHECK((a->predict_proba(probe.x).array() == b->predict_proba(probe.x).array()).all());
}

TEST_CASE("single-label training yields a constant scorer in every family") {
    Eigen::MatrixXd x(5, 2);
    x.setRandom();
    Eigen::VectorXi y = Eigen::VectorXi::Ones(5);
    for (ModelFamily family : {ModelFamily::LR, ModelFamily::DT, ModelFamily::RF, ModelFamily::GBT,
                               ModelFamily::KNN}) {
        auto model = train(ModelSpec{family, {}, 1}, x, y);
        const Eigen::VectorXd proba = model->predict_proba(x);
        for (Eigen::Index i = 0; i < proba.size(); ++i) CHECK(proba[i] == 1.0);
        CHECK(model->family() == family);
    }
}

TEST_CASE("train rejects invalid inputs") {
    Eigen::MatrixXd x(1, 2);
    Eigen::VectorXi y(1);
    CHECK_THROWS_AS(train(ModelSpec{ModelFamily::LR, {}, 0}, x, y), std::invalid_argument);
    Eigen::MatrixXd x2(4, 2);
    x2.setRandom();
    Eigen::VectorXi y2(4);
    y2 << 0, 1, 0, 1;
    CHECK_THROWS_AS(train(ModelSpec{ModelFamily::KNN, {{"bogus", 1}}, 0}, x2, y2),
                    std::invalid_argument);
    CHECK_THROWS_AS(train(ModelSpec{ModelFamily::GBT, {{"learning_rate", -1}}, 0}, x2, y2),
                    std::invalid_argument);
}

TEST_CASE("model save/load round-trips predictions bit-exactly") {
    Blobs blobs = make_blobs(120, 4, 1.0, 2718, 0.45);
    Blobs probe = make_blobs(60, 4, 1.0, 515);
    for (ModelFamily family : {ModelFamily::Dummy, ModelFamily::LR, ModelFamily::DT, ModelFamily::RF,
                               ModelFamily::GBT, ModelFamily::KNN}) {
        Hyperparams hp;
        if (family == ModelFamily::RF) hp = {{"trees", 7}, {"max_depth", 5}, {"min_leaf", 2}};
        if (family == ModelFamily::GBT) hp = {{"stages", 12}, {"learning_rate", 0.3}, {"depth", 3}};
        if (family == ModelFamily::KNN) hp = {{"k", 7}};
        auto model = train(ModelSpec{family, hp, 864}, blobs.x, blobs.y);

        std::stringstream buffer(std::ios::in | std::ios::out | std::ios::binary);
        save_model(*model, buffer);
        auto loaded = load_model(buffer);

        CHECK(loaded->family() == family);
        CHECK((loaded->predict_proba(probe.x).array() == model->predict_proba(probe.x).array()).all());
        CHECK(loaded->spec().hyperparams == model->spec().hyperparams);
    }
}

TEST_CASE("predict_proba stays in [0, 1] for every family") {
    Blobs blobs = make_blobs(100, 3, 1.0, 111, 0.3);
    Blobs probe = make_blobs(200, 3, 4.0, 222);  // far outside the training range
    for (ModelFamily family : {ModelFamily::Dummy, ModelFamily::LR, ModelFamily::DT, ModelFamily::RF,
                               ModelFamily::GBT, ModelFamily::KNN}) {
        Hyperparams hp;
        if (family == ModelFamily::RF) hp = {{"trees", 5}};
        if (family == ModelFamily::GBT) hp = {{"stages", 10}, {"learning_rate", 0.3}, {"depth", 2}};
        if (family == ModelFamily::KNN) hp = {{"k", 3}};
        auto model = train(ModelSpec{family, hp, 5}, blobs.x, blobs.y);
        const Eigen::VectorXd proba = model->predict_proba(probe.x);
        CHECK(proba.minCoeff() >= 0.0);
        CHECK(proba.maxCoeff() <= 1.0);
    }
}

TEST_CASE("predict rejects dimension mismatch") {
    Blobs blobs = make_blobs(30, 3, 1.0, 1);
    auto model = train(ModelSpec{ModelFamily::LR, {}, 1}, blobs.x, blobs.y);
    Eigen::MatrixXd wrong(5, 4);
    wrong.setZero();
    CHECK_THROWS_AS(model->predict_proba(wrong), std::invalid_argument);
}
