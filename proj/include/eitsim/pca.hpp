#pragma once

#include <string>
#include <variant>

#include <Eigen/Dense>

#include "eitsim/fem.hpp"

namespace eitsim {

struct FixedComponents {
    int k;
};
struct VarianceThreshold {
    double tau;
};
using PcaSelector = std::variant<FixedComponents, VarianceThreshold>;

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // k x d, rows orthonormal
    Eigen::VectorXd explained_variance;
    Eigen::VectorXd explained_ratio;

    int k() const { return static_cast<int>(components.rows()); }
};

class DegenerateData : public std::runtime_error {
  public:
    explicit DegenerateData(const std::string& what) : std::runtime_error(what) {}
};

// Covariance eigendecomposition with divisor n-1, centering only. Component
// signs are fixed so the largest-absolute entry of each component is positive.
PcaModel fit_pca(const Eigen::MatrixXd& x_train, const PcaSelector& selector);

Eigen::MatrixXd project(const PcaModel& model, const Eigen::MatrixXd& x);

std::string pca_to_json(const PcaModel& model);
PcaModel pca_from_json(const std::string& text);

}  // namespace eitsim
