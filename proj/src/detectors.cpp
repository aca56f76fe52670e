#include "botlab/detectors.hpp"

#include "botlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace botlab {

std::string_view to_string(DetectorKind k) {
    switch (k) {
        case DetectorKind::BaggedTrees: return "bagged_trees";
        case DetectorKind::MixtureOfExperts: return "mixture_of_experts";
        case DetectorKind::External: return "external";
    }
    return "?";
}

DetectorKind parse_detector_kind(std::string_view s) {
    if (s == "bagged_trees" || s == "trees") return DetectorKind::BaggedTrees;
    if (s == "mixture_of_experts" || s == "moe") return DetectorKind::MixtureOfExperts;
    if (s == "external") return DetectorKind::External;
    throw std::invalid_argument("unknown detector kind '" + std::string(s) + "'");
}

void TrainingSet::add(const FeatureVector& fv, Role role) {
    if (schema.empty() && fv.schema) schema = *fv.schema;
    if (fv.schema && *fv.schema != schema) throw SchemaError("training row schema mismatch");
    x.push_back(fv.values);
    y.push_back(role == Role::Bot ? 1 : 0);
}

std::size_t TrainingSet::positives() const {
    return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

namespace {

void require_both_classes(const TrainingSet& data) {
    const std::size_t pos = data.positives();
    if (pos < 2 || data.size() - pos < 2) {
        throw std::invalid_argument("training data needs at least two examples of each class (got " +
                                    std::to_string(pos) + " bots, " +
                                    std::to_string(data.size() - pos) + " humans)");
    }
    for (const auto& row : data.x) {
        if (row.size() != data.schema.size()) {
            throw SchemaError("training row width does not match schema");
        }
        for (double v : row) {
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
        }
    }
}

std::string fingerprint(const TrainingSet& data, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (std::size_t i = 0; i < data.size(); ++i) {
        mix(data.x[i].data(), data.x[i].size() * sizeof(double));
        mix(&data.y[i], sizeof(int));
    }
    std::ostringstream out;
    out << "seed=" << seed << ";digest=" << std::hex << h;
    return out.str();
}

// ---------------------------------------------------------------- trees

class TreeBuilder {
public:
    TreeBuilder(const TrainingSet& data, const BaggedTreesParams& p, Rng& rng)
        : data_(data), params_(p), rng_(rng),
          n_candidates_(static_cast<std::size_t>(
              std::ceil(std::sqrt(static_cast<double>(data.schema.size()))))) {}

    std::vector<TreeNode> build(std::vector<std::size_t> sample) {
        nodes_.clear();
        grow(sample, 0);
        return std::move(nodes_);
    }

private:
    static double gini(double pos, double n) {
        if (n <= 0) return 0;
        const double p = pos / n;
        return 2.0 * p * (1.0 - p);
    }

    int grow(std::vector<std::size_t>& idx, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        std::size_t pos = 0;
        for (auto i : idx) pos += static_cast<std::size_t>(data_.y[i]);
        const double n = static_cast<double>(idx.size());
        nodes_[id].votes_bot = 2 * pos > idx.size();

        const bool pure = pos == 0 || pos == idx.size();
        if (pure || depth >= params_.max_depth ||
            idx.size() < 2 * static_cast<std::size_t>(params_.min_leaf)) {
            return id;
        }

        // Random feature subset without replacement.
        std::vector<std::size_t> feats(data_.schema.size());
        std::iota(feats.begin(), feats.end(), 0);
        for (std::size_t j = 0; j < n_candidates_; ++j) {
            std::swap(feats[j], feats[j + rng_.below(feats.size() - j)]);
        }

        const double parent = gini(static_cast<double>(pos), n);
        double best_impurity = parent;
        int best_feature = -1;
        double best_threshold = 0;
        const std::size_t min_leaf = static_cast<std::size_t>(params_.min_leaf);
        for (std::size_t j = 0; j < n_candidates_; ++j) {
            const std::size_t f = feats[j];
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                return data_.x[a][f] < data_.x[b][f];
            });
            std::size_t left_pos = 0;
            for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
                left_pos += static_cast<std::size_t>(data_.y[idx[k]]);
                const double lo = data_.x[idx[k]][f], hi = data_.x[idx[k + 1]][f];
                if (lo == hi) continue;
                const std::size_t nl = k + 1, nr = idx.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double imp = (static_cast<double>(nl) * gini(static_cast<double>(left_pos), nl) +
                                    static_cast<double>(nr) *
                                        gini(static_cast<double>(pos - left_pos), nr)) /
                                   n;
                if (imp < best_impurity - 1e-15) {
                    best_impurity = imp;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (lo + hi);
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (auto i : idx) {
            (data_.x[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right)
                .push_back(i);
        }
        nodes_[id].feature = best_feature;
        nodes_[id].threshold = best_threshold;
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    const TrainingSet& data_;
    const BaggedTreesParams& params_;
    Rng& rng_;
    std::size_t n_candidates_;
    std::vector<TreeNode> nodes_;
};

bool tree_votes_bot(const std::vector<TreeNode>& tree, const std::vector<double>& x) {
    std::size_t at = 0;
    while (tree[at].feature >= 0) {
        const auto& node = tree[at];
        at = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                          ? node.left
                                          : node.right);
    }
    return tree[at].votes_bot;
}

// ---------------------------------------------------------------- mixture

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::array<double, kExpertCount> softmax(const std::array<double, kExpertCount>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    std::array<double, kExpertCount> out{};
    double sum = 0;
    for (std::size_t g = 0; g < kExpertCount; ++g) sum += out[g] = std::exp(v[g] - mx);
    for (auto& o : out) o /= sum;
    return out;
}

}  // namespace

std::size_t TreeEnsemble::bot_votes(const std::vector<double>& x) const {
    std::size_t votes = 0;
    for (const auto& t : trees) votes += tree_votes_bot(t, x);
    return votes;
}

DetectorModel train_bagged_trees(const TrainingSet& data, const BaggedTreesParams& params) {
    require_both_classes(data);
    if (params.n_trees < 1 || params.max_depth < 0 || params.min_leaf < 1) {
        throw std::invalid_argument("bagged trees: invalid hyperparameters");
    }
    Rng rng(params.seed, "bagged_trees");
    TreeBuilder builder(data, params, rng);
    TreeEnsemble ensemble;
    const std::size_t n = data.size();
    for (int t = 0; t < params.n_trees; ++t) {
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = rng.below(n);
        ensemble.trees.push_back(builder.build(std::move(sample)));
    }
    return DetectorModel{DetectorKind::BaggedTrees, data.schema, fingerprint(data, params.seed),
                         std::move(ensemble)};
}

const std::array<std::vector<std::size_t>, kExpertCount>& expert_feature_groups() {
    static const std::array<std::vector<std::size_t>, kExpertCount> groups{{
        {kPolarityMean, kPolarityVariance, kLikeInRate},
        {kFollowerGrowth, kFollowOutRate, kFollowerFollowingRatio, kLikeOutRate},
        {kPostRate, kMeanPostGap, kActiveDayFraction},
    }};
    return groups;
}

std::array<double, kExpertCount> LogisticMixture::gate_weights() const {
    return softmax(gate_logits);
}

namespace {

// Rates and ratios are heavy-tailed; experts see sign(x) * log1p(|x|).
double squash(double x) { return std::copysign(std::log1p(std::abs(x)), x); }

struct MixtureForward {
    std::array<double, kExpertCount> expert{};
    double p = 0;
};

MixtureForward forward(const LogisticMixture& m, const std::vector<double>& raw,
                       const std::array<double, kExpertCount>& gates) {
    MixtureForward f;
    const auto& groups = expert_feature_groups();
    for (std::size_t g = 0; g < kExpertCount; ++g) {
        double z = m.bias[g];
        for (std::size_t j = 0; j < groups[g].size(); ++j) {
            const std::size_t col = groups[g][j];
            z += m.weights[g][j] * (squash(raw[col]) - m.mean[col]) / m.scale[col];
        }
        f.expert[g] = sigmoid(z);
        f.p += gates[g] * f.expert[g];
    }
    return f;
}

}  // namespace

double LogisticMixture::probability(const std::vector<double>& x) const {
    return std::clamp(forward(*this, x, gate_weights()).p, 0.0, 1.0);
}

std::vector<double> flatten(const LogisticMixture& m) {
    std::vector<double> out;
    for (const auto& w : m.weights) out.insert(out.end(), w.begin(), w.end());
    out.insert(out.end(), m.bias.begin(), m.bias.end());
    out.insert(out.end(), m.gate_logits.begin(), m.gate_logits.end());
    return out;
}

void unflatten(LogisticMixture& m, const std::vector<double>& params) {
    std::size_t at = 0;
    for (auto& w : m.weights)
        for (auto& v : w) v = params.at(at++);
    for (auto& b : m.bias) b = params.at(at++);
    for (auto& v : m.gate_logits) v = params.at(at++);
}

double mixture_loss(const LogisticMixture& m, const TrainingSet& data, std::vector<double>* gradient) {
    const auto& groups = expert_feature_groups();
    const auto gates = m.gate_weights();
    const double n = static_cast<double>(data.size());
    LogisticMixture grad = m;
    if (gradient) {
        for (auto& w : grad.weights) std::fill(w.begin(), w.end(), 0.0);
        grad.bias.fill(0);
        grad.gate_logits.fill(0);
    }
    double loss = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto f = forward(m, data.x[i], gates);
        const double y = data.y[i];
        loss -= (y * std::log(f.p) + (1 - y) * std::log(1 - f.p)) / n;
        if (!gradient) continue;
        const double dp = -(y / f.p - (1 - y) / (1 - f.p)) / n;
        for (std::size_t g = 0; g < kExpertCount; ++g) {
            const double dz = dp * gates[g] * f.expert[g] * (1 - f.expert[g]);
            for (std::size_t j = 0; j < groups[g].size(); ++j) {
                const std::size_t col = groups[g][j];
                grad.weights[g][j] += dz * (squash(data.x[i][col]) - m.mean[col]) / m.scale[col];
            }
            grad.bias[g] += dz;
            grad.gate_logits[g] += dp * gates[g] * (f.expert[g] - f.p);
        }
    }
    if (gradient) *gradient = flatten(grad);
    return loss;
}

LogisticMixture fit_mixture(const TrainingSet& data, const MixtureParams& params,
                            std::vector<double>* epoch_losses) {
    require_both_classes(data);
    const std::size_t d = data.schema.size();
    if (d != kFeatureCount) throw SchemaError("mixture of experts expects the default feature schema");
    LogisticMixture m;
    m.mean.assign(d, 0.0);
    m.scale.assign(d, 1.0);
    const double n = static_cast<double>(data.size());
    for (std::size_t c = 0; c < d; ++c) {
        double s = 0, sq = 0;
        for (const auto& row : data.x) {
            const double v = squash(row[c]);
            s += v;
            sq += v * v;
        }
        m.mean[c] = s / n;
        const double var = sq / n - m.mean[c] * m.mean[c];
        m.scale[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    Rng rng(params.seed, "mixture_init");
    const auto& groups = expert_feature_groups();
    for (std::size_t g = 0; g < kExpertCount; ++g) {
        m.weights[g].resize(groups[g].size());
        for (auto& w : m.weights[g]) w = 0.01 * rng.normal();
    }

    std::vector<double> grad;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        const double loss = mixture_loss(m, data, &grad);
        if (!std::isfinite(loss)) {
            throw std::runtime_error("mixture of experts: non-finite training loss at epoch " +
                                     std::to_string(epoch));
        }
        if (epoch_losses) epoch_losses->push_back(loss);
        auto theta = flatten(m);
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= params.learning_rate * grad[i];
        unflatten(m, theta);
    }
    return m;
}

DetectorModel train_mixture_of_experts(const TrainingSet& data, const MixtureParams& params) {
    return DetectorModel{DetectorKind::MixtureOfExperts, data.schema, fingerprint(data, params.seed),
                         fit_mixture(data, params)};
}

DetectorModel external_model(const PredictionSet& set) {
    return DetectorModel{DetectorKind::External, {}, "external:" + set.source,
                         ExternalScores{set.source, set.scores}};
}

DetectorModel load_external_predictions(const std::filesystem::path& path,
                                        const std::string& source_name) {
    auto sets = load_predictions(path);
    auto it = sets.find(source_name);
    if (it == sets.end()) {
        throw DataError(path.filename().string() + ": no rows for source '" + source_name + "'");
    }
    return external_model(it->second);
}

double predict(const DetectorModel& model, const FeatureVector& fv) {
    if (model.kind == DetectorKind::External) {
        const auto& ext = std::get<ExternalScores>(model.parameters);
        auto it = ext.scores.find(fv.account);
        if (it == ext.scores.end()) {
            throw DataError("source '" + ext.source + "' has no prediction for '" + fv.account + "'");
        }
        return it->second;
    }
    if (!fv.schema || *fv.schema != model.feature_schema) {
        throw SchemaError("feature schema does not match the model's training schema");
    }
    if (fv.values.size() != model.feature_schema.size()) {
        throw SchemaError("feature vector width does not match schema");
    }
    if (model.kind == DetectorKind::BaggedTrees) {
        const auto& ens = std::get<TreeEnsemble>(model.parameters);
        return static_cast<double>(ens.bot_votes(fv.values)) / static_cast<double>(ens.trees.size());
    }
    return std::get<LogisticMixture>(model.parameters).probability(fv.values);
}

PredictionSet predict_all(const DetectorModel& model,
                          const std::map<AccountId, FeatureVector>& features,
                          const std::string& source) {
    PredictionSet out;
    out.source = source;
    for (const auto& [id, fv] : features) out.scores[id] = predict(model, fv);
    return out;
}

DetectorModel train_detector(const DetectorSpec& spec, const TrainingSet& data, std::uint64_t seed) {
    switch (spec.kind) {
        case DetectorKind::BaggedTrees: {
            auto p = spec.trees;
            p.seed = seed;
            return train_bagged_trees(data, p);
        }
        case DetectorKind::MixtureOfExperts: {
            auto p = spec.mixture;
            p.seed = seed;
            return train_mixture_of_experts(data, p);
        }
        case DetectorKind::External: break;
    }
    throw std::invalid_argument("external detectors are loaded, not trained");
}

// ---------------------------------------------------------------- serialization

namespace {
constexpr int kModelFormatVersion = 1;
}

nlohmann::json to_json(const DetectorModel& model) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = to_string(model.kind);
    j["feature_schema"] = model.feature_schema;
    j["training_fingerprint"] = model.training_fingerprint;
    if (const auto* ens = std::get_if<TreeEnsemble>(&model.parameters)) {
        auto trees = nlohmann::json::array();
        for (const auto& t : ens->trees) {
            auto nodes = nlohmann::json::array();
            for (const auto& n : t) {
                nodes.push_back({n.feature, n.threshold, n.left, n.right, n.votes_bot});
            }
            trees.push_back(nodes);
        }
        j["trees"] = trees;
    } else if (const auto* mix = std::get_if<LogisticMixture>(&model.parameters)) {
        j["mean"] = mix->mean;
        j["scale"] = mix->scale;
        j["weights"] = mix->weights;
        j["bias"] = mix->bias;
        j["gate_logits"] = mix->gate_logits;
    } else {
        const auto& ext = std::get<ExternalScores>(model.parameters);
        j["source"] = ext.source;
        j["scores"] = ext.scores;
    }
    return j;
}

DetectorModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != kModelFormatVersion) {
            throw DataError("unsupported model format version");
        }
        DetectorModel m;
        m.kind = parse_detector_kind(j.at("kind").get<std::string>());
        m.feature_schema = j.at("feature_schema").get<FeatureSchema>();
        m.training_fingerprint = j.at("training_fingerprint").get<std::string>();
        switch (m.kind) {
            case DetectorKind::BaggedTrees: {
                TreeEnsemble ens;
                for (const auto& t : j.at("trees")) {
                    std::vector<TreeNode> nodes;
                    for (const auto& n : t) {
                        nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                         n.at(3).get<int>(), n.at(4).get<bool>()});
                    }
                    ens.trees.push_back(std::move(nodes));
                }
                m.parameters = std::move(ens);
                break;
            }
            case DetectorKind::MixtureOfExperts: {
                LogisticMixture mix;
                mix.mean = j.at("mean").get<std::vector<double>>();
                mix.scale = j.at("scale").get<std::vector<double>>();
                mix.weights = j.at("weights").get<std::array<std::vector<double>, kExpertCount>>();
                mix.bias = j.at("bias").get<std::array<double, kExpertCount>>();
                mix.gate_logits = j.at("gate_logits").get<std::array<double, kExpertCount>>();
                m.parameters = std::move(mix);
                break;
            }
            case DetectorKind::External:
                m.parameters = ExternalScores{j.at("source").get<std::string>(),
                                              j.at("scores").get<std::map<AccountId, double>>()};
                break;
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const DetectorModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << to_json(model).dump() << '\n';
}

DetectorModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return model_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error&) {
        throw DataError("malformed model file '" + path.string() + "'");
    }
}

}  // namespace botlab
