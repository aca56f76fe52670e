#pragma once

// Trainable bot detectors over behavioural features: bagged Gini trees (a
// random-forest stand-in), a three-expert logistic mixture, and an adapter
// that serves externally produced probabilities.

#include "botlab/core_data.hpp"
#include "botlab/features.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace botlab {

enum class DetectorKind { BaggedTrees, MixtureOfExperts, External };

std::string_view to_string(DetectorKind k);
DetectorKind parse_detector_kind(std::string_view s);

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Row-major design matrix plus 0/1 labels (1 = bot).
struct TrainingSet {
    FeatureSchema schema;
    std::vector<std::vector<double>> x;
    std::vector<int> y;

    void add(const FeatureVector& fv, Role role);
    std::size_t size() const { return y.size(); }
    std::size_t positives() const;
};

struct BaggedTreesParams {
    int n_trees = 100;
    int max_depth = 8;
    int min_leaf = 2;
    std::uint64_t seed = 0;
};

struct MixtureParams {
    std::uint64_t seed = 0;
    int epochs = 500;
    double learning_rate = 0.5;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1, right = -1;  // x[feature] <= threshold goes left
    bool votes_bot = false;
};

struct TreeEnsemble {
    std::vector<std::vector<TreeNode>> trees;

    std::size_t bot_votes(const std::vector<double>& x) const;
};

// Feature groups of the mixture; disjoint and covering the schema.
enum class ExpertGroup { Content = 0, Metadata = 1, Temporal = 2 };
inline constexpr std::size_t kExpertCount = 3;
const std::array<std::vector<std::size_t>, kExpertCount>& expert_feature_groups();

struct LogisticMixture {
    // Standardisation of sign(x) * log1p(|x|), fitted on training data.
    std::vector<double> mean, scale;
    std::array<std::vector<double>, kExpertCount> weights;
    std::array<double, kExpertCount> bias{};
    std::array<double, kExpertCount> gate_logits{};

    std::array<double, kExpertCount> gate_weights() const;
    // Input is the raw (unstandardised) feature row.
    double probability(const std::vector<double>& x) const;
};

struct ExternalScores {
    std::string source;
    std::map<AccountId, double> scores;
};

struct DetectorModel {
    DetectorKind kind = DetectorKind::BaggedTrees;
    FeatureSchema feature_schema;
    std::string training_fingerprint;
    std::variant<TreeEnsemble, LogisticMixture, ExternalScores> parameters;
};

// Throws std::invalid_argument when either class has fewer than two examples.
DetectorModel train_bagged_trees(const TrainingSet& data, const BaggedTreesParams& params);

// Throws std::invalid_argument on single-class data and std::runtime_error
// when the training loss becomes non-finite.
DetectorModel train_mixture_of_experts(const TrainingSet& data, const MixtureParams& params);

// Full-batch gradient descent on mean log-loss. Gates start uniform, so zero
// epochs leaves every gate at 1/3. `epoch_losses` receives the loss before
// each update.
LogisticMixture fit_mixture(const TrainingSet& data, const MixtureParams& params,
                            std::vector<double>* epoch_losses = nullptr);

// Mean log-loss of `m` on `data` (raw features) and its gradient with respect
// to the flattened parameters [w_content.., w_meta.., w_temporal.., b0, b1, b2,
// v0, v1, v2].
double mixture_loss(const LogisticMixture& m, const TrainingSet& data,
                    std::vector<double>* gradient = nullptr);
std::vector<double> flatten(const LogisticMixture& m);
void unflatten(LogisticMixture& m, const std::vector<double>& params);

DetectorModel load_external_predictions(const std::filesystem::path& path,
                                        const std::string& source_name);
DetectorModel external_model(const PredictionSet& set);

// Probability of the bot class. Throws SchemaError on a schema mismatch and
// DataError when an external model has no score for the account.
double predict(const DetectorModel& model, const FeatureVector& fv);

PredictionSet predict_all(const DetectorModel& model,
                          const std::map<AccountId, FeatureVector>& features,
                          const std::string& source);

nlohmann::json to_json(const DetectorModel& model);
DetectorModel model_from_json(const nlohmann::json& j);
void save_model(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_model(const std::filesystem::path& path);

// One place to pick a detector and its hyperparameters.
struct DetectorSpec {
    DetectorKind kind = DetectorKind::BaggedTrees;
    BaggedTreesParams trees;
    MixtureParams mixture;
};

DetectorModel train_detector(const DetectorSpec& spec, const TrainingSet& data, std::uint64_t seed);

}  // namespace botlab
