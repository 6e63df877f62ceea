#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fairgrade/tree.hpp"

namespace fairgrade {

enum class ModelFamily : uint8_t { Dummy, LR, DT, RF, GBT, KNN };

constexpr int kNumFamilies = 6;

std::string_view family_name(ModelFamily family);
std::optional<ModelFamily> parse_family(std::string_view text);

using Hyperparams = std::map<std::string, double>;

struct ModelSpec {
    ModelFamily family = ModelFamily::Dummy;
    Hyperparams hyperparams;
    uint64_t seed = 0;
};

// Validates names and ranges for the family; throws std::invalid_argument.
void validate_hyperparams(ModelFamily family, const Hyperparams& hp);

// Conventional default search grids, one Hyperparams per grid point.
std::vector<Hyperparams> default_grid(ModelFamily family);

// A fitted binary classifier. Immutable; scoring is const and thread-safe.
class TrainedModel {
  public:
    virtual ~TrainedModel() = default;

    virtual ModelFamily family() const = 0;

    // P(label == 1) per row of x, each in [0, 1].
    virtual Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& x) const = 0;

    double predict_proba_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

    virtual Eigen::Index feature_count() const = 0;

    virtual void save(std::ostream& out) const = 0;

    const ModelSpec& spec() const { return spec_; }

  protected:
    ModelSpec spec_;
};

// Deterministic given (spec.seed, sample order). Requires at least 2 samples;
// single-label training yields a constant scorer for every family.
std::unique_ptr<TrainedModel> train(const ModelSpec& spec,
                                    const Eigen::Ref<const Eigen::MatrixXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXi>& y);

// label = 1 iff probability >= threshold.
int predict_label(const TrainedModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                  double threshold = 0.5);

Eigen::VectorXi predict_labels(const TrainedModel& model,
                               const Eigen::Ref<const Eigen::MatrixXd>& x,
                               double threshold = 0.5);

// Versioned binary round-trip; loaded models predict bit-identically.
void save_model(const TrainedModel& model, std::ostream& out);
std::unique_ptr<TrainedModel> load_model(std::istream& in);

// Tree access for ensemble introspection (RF probability = mean of its
// trees' probabilities).
class ForestModel;
const std::vector<DecisionTree>& forest_trees(const TrainedModel& model);

}  // namespace fairgrade
