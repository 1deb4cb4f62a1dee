#include "swfsec/learn.hpp"

#include <cstring>

namespace swfsec::learn {

namespace {

constexpr const char* kFormat = "swfsec-pipeline";
constexpr int kVersion = 1;

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r)
        rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return rows;
}

Matrix matrix_from_json(const json& j) {
    Matrix m;
    for (const auto& row : j)
        m.append_row(row.get<std::vector<double>>());
    return m;
}

bool same_bits(double a, double b) {
    return std::memcmp(&a, &b, sizeof a) == 0;
}

} // namespace

json model_to_json(const Model& model) {
    json j;
    j["kind"] = to_string(model.kind);
    j["dim"] = model.dim;
    j["threshold"] = model.threshold;
    j["params"] = {{"c", model.params.c},
                   {"gamma", model.params.gamma},
                   {"trees", model.params.trees},
                   {"seed", model.params.seed}};
    switch (model.kind) {
    case ModelKind::LinearSvm:
        j["weights"] = model.weights;
        j["bias"] = model.bias;
        break;
    case ModelKind::RbfSvm:
        j["support"] = matrix_to_json(model.support);
        j["coef"] = model.coef;
        j["bias"] = model.bias;
        break;
    case ModelKind::RandomForest: {
        json trees = json::array();
        for (const auto& t : model.trees) {
            json nodes = json::array();
            for (const auto& n : t.nodes)
                nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            trees.push_back(std::move(nodes));
        }
        j["trees"] = std::move(trees);
        break;
    }
    }
    return j;
}

Model model_from_json(const json& j) {
    try {
        Model m;
        m.kind = model_kind_from_string(j.at("kind").get<std::string>());
        m.dim = j.at("dim").get<std::size_t>();
        m.threshold = j.at("threshold").get<double>();
        const json& p = j.at("params");
        m.params.c = p.at("c").get<double>();
        m.params.gamma = p.at("gamma").get<double>();
        m.params.trees = p.at("trees").get<int>();
        m.params.seed = p.at("seed").get<std::uint64_t>();
        switch (m.kind) {
        case ModelKind::LinearSvm:
            m.weights = j.at("weights").get<std::vector<double>>();
            m.bias = j.at("bias").get<double>();
            if (m.weights.size() != m.dim)
                throw Error(ErrorCode::FormatError, "weight vector length");
            break;
        case ModelKind::RbfSvm:
            m.support = matrix_from_json(j.at("support"));
            m.coef = j.at("coef").get<std::vector<double>>();
            m.bias = j.at("bias").get<double>();
            if (m.support.rows() != m.coef.size() || (m.support.rows() > 0 && m.support.cols() != m.dim))
                throw Error(ErrorCode::FormatError, "support vector shape");
            break;
        case ModelKind::RandomForest:
            for (const auto& tj : j.at("trees")) {
                DecisionTree t;
                for (const auto& nj : tj)
                    t.nodes.push_back({nj.at(0).get<int>(), nj.at(1).get<double>(), nj.at(2).get<int>(),
                                       nj.at(3).get<int>(), nj.at(4).get<double>()});
                for (const auto& n : t.nodes)
                    if (n.feature >= 0 && (static_cast<std::size_t>(n.feature) >= m.dim || n.left <= 0 ||
                                           n.right <= 0 || static_cast<std::size_t>(n.left) >= t.nodes.size() ||
                                           static_cast<std::size_t>(n.right) >= t.nodes.size()))
                        throw Error(ErrorCode::FormatError, "tree node out of range");
                if (t.nodes.empty())
                    throw Error(ErrorCode::FormatError, "empty tree");
                m.trees.push_back(std::move(t));
            }
            if (m.trees.empty())
                throw Error(ErrorCode::FormatError, "forest without trees");
            break;
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("model: ") + e.what());
    }
}

void save_pipeline(const std::string& path, const Pipeline& pipeline, const Matrix& probes) {
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["normalize"] = pipeline.normalize;
    j["feature_space"] = pipeline.space.to_json();
    j["model"] = model_to_json(pipeline.model);
    json pj = json::array();
    for (std::size_t r = 0; r < probes.rows(); ++r) {
        const auto x = probes.row(r);
        pj.push_back({{"x", std::vector<double>(x.begin(), x.end())}, {"f", pipeline.model.decision(x)}});
    }
    j["probes"] = std::move(pj);
    write_text_file(path, j.dump(1) + "\n");
}

Pipeline load_pipeline(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::FormatError, path + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat)
            throw Error(ErrorCode::FormatError, path + ": not a pipeline file");
        if (j.at("version").get<int>() != kVersion)
            throw Error(ErrorCode::FormatError, path + ": unsupported version");
        Pipeline p{features::FeatureSpace::from_json(j.at("feature_space")), model_from_json(j.at("model")),
                   j.at("normalize").get<bool>()};
        if (p.space.size() != p.model.dim)
            throw Error(ErrorCode::FormatError, path + ": model and feature space disagree on dimension");
        for (const auto& probe : j.at("probes")) {
            const auto x = probe.at("x").get<std::vector<double>>();
            const double stored = probe.at("f").get<double>();
            if (!same_bits(p.model.decision(x), stored))
                throw Error(ErrorCode::FormatError, path + ": probe decision does not reproduce");
        }
        return p;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::FormatError, path + ": " + e.what());
    }
}

} // namespace swfsec::learn
