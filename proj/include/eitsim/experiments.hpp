#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eitsim/pca.hpp"
#include "eitsim/phantom.hpp"

namespace eitsim {

struct ConfusionMatrix {
    std::string task;
    Split split = Split::Train;
    std::vector<std::string> classes;
    Eigen::MatrixXi counts;  // rows = truth, cols = prediction

    int total() const { return counts.sum(); }
    double accuracy() const { return total() > 0 ? double(counts.trace()) / total() : 0.0; }
};

ConfusionMatrix compute_confusion(const std::string& task, Split split,
                                  const std::vector<std::string>& classes, const std::vector<int>& truth,
                                  const std::vector<int>& predictions);
double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth);
double circular_rmse_deg(const std::vector<double>& pred_deg, const std::vector<double>& truth_deg);
double mean_circular_error_deg(const std::vector<double>& pred_deg, const std::vector<double>& truth_deg);

struct ExperimentConfig {
    DatasetConfig dataset;
    int pca_components = 4;
    int mlp_hidden_loc = 5;
    int mlp_hidden_crack = 5;
    int mlp_hidden_health = 3;
    int knn_k = 5;
    double svm_c = 1.0;
    std::uint64_t train_seed = 6;
    std::string out_dir;      // empty: compute metrics only, write nothing
    int heatmap_samples = 2;  // reconstructed test frames rendered to SVG
};

struct ExperimentReport {
    std::string experiment;
    std::map<std::string, double> metrics;
    std::vector<ConfusionMatrix> confusions;
    std::vector<double> pca_explained_ratio;
    std::vector<std::string> artifacts;  // paths written under out_dir
    std::string config_json;

    // deterministic serialization: identical config -> identical bytes
    std::string to_json() const;
};

std::string experiment_config_to_json(const ExperimentConfig& config);

ExperimentReport run_location(const ExperimentConfig& config);
ExperimentReport run_crack(const ExperimentConfig& config);
ExperimentReport run_health(const ExperimentConfig& config);

}  // namespace eitsim
