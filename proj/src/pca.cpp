#include "eitsim/pca.hpp"

#include <cmath>

#include <json.hpp>

namespace eitsim {

PcaModel fit_pca(const Eigen::MatrixXd& x, const PcaSelector& selector) {
    const int n = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    if (n < 2) throw InvalidParameter("fit_pca needs at least two rows");

    PcaModel model;
    model.mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw SolverError("eigendecomposition failed");

    // ascending from Eigen, reorder descending and clamp round-off negatives
    Eigen::VectorXd values(d);
    Eigen::MatrixXd vectors(d, d);
    for (int i = 0; i < d; ++i) {
        values[i] = std::max(0.0, eig.eigenvalues()[d - 1 - i]);
        vectors.col(i) = eig.eigenvectors().col(d - 1 - i);
    }
    double total = values.sum();

    int k;
    if (const auto* fixed = std::get_if<FixedComponents>(&selector)) {
        if (fixed->k < 1 || fixed->k > d) throw InvalidParameter("component count out of range");
        k = fixed->k;
    } else {
        double tau = std::get<VarianceThreshold>(selector).tau;
        if (tau <= 0.0 || tau > 1.0) throw InvalidParameter("variance threshold must lie in (0,1]");
        if (total <= 0.0) throw DegenerateData("all rows identical, variance threshold is undefined");
        double cum = 0.0;
        k = d;
        for (int i = 0; i < d; ++i) {
            cum += values[i] / total;
            if (cum >= tau) {
                k = i + 1;
                break;
            }
        }
    }

    model.components.resize(k, d);
    for (int i = 0; i < k; ++i) {
        Eigen::VectorXd v = vectors.col(i);
        // sign convention: largest-absolute entry positive; ties by first index
        int arg = 0;
        double best = -1.0;
        for (int j = 0; j < d; ++j) {
            if (std::fabs(v[j]) > best) {
                best = std::fabs(v[j]);
                arg = j;
            }
        }
        if (v[arg] < 0.0) v = -v;
        model.components.row(i) = v.transpose();
    }
    model.explained_variance = values.head(k);
    model.explained_ratio = total > 0.0 ? (values.head(k) / total).eval() : Eigen::VectorXd::Zero(k);
    return model;
}

Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.mean.size())
        throw DimensionMismatch("column count does not match the fitted model");
    return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

std::string pca_to_json(const PcaModel& model) {
    nlohmann::json j;
    j["mean"] = std::vector<double>(model.mean.begin(), model.mean.end());
    j["explained_variance"] =
        std::vector<double>(model.explained_variance.begin(), model.explained_variance.end());
    j["explained_ratio"] = std::vector<double>(model.explained_ratio.begin(), model.explained_ratio.end());
    auto& comps = j["components"] = nlohmann::json::array();
    for (int i = 0; i < model.k(); ++i) {
        std::vector<double> row(model.components.row(i).begin(), model.components.row(i).end());
        comps.push_back(row);
    }
    return j.dump();
}

PcaModel pca_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PcaModel model;
    auto mean = j.at("mean").get<std::vector<double>>();
    model.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), mean.size());
    auto ev = j.at("explained_variance").get<std::vector<double>>();
    model.explained_variance = Eigen::Map<Eigen::VectorXd>(ev.data(), ev.size());
    auto er = j.at("explained_ratio").get<std::vector<double>>();
    model.explained_ratio = Eigen::Map<Eigen::VectorXd>(er.data(), er.size());
    const auto& comps = j.at("components");
    model.components.resize(comps.size(), model.mean.size());
    for (size_t i = 0; i < comps.size(); ++i) {
        auto row = comps[i].get<std::vector<double>>();
        model.components.row(i) = Eigen::Map<Eigen::VectorXd>(row.data(), row.size()).transpose();
    }
    return model;
}

}  // namespace eitsim
