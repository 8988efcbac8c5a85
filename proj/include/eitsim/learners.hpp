#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eitsim/fem.hpp"

namespace eitsim {

// ---------------------------------------------------------------------------
// feed-forward network, one tanh hidden layer, linear output, trained by
// Levenberg-Marquardt on sum-of-squares loss
// ---------------------------------------------------------------------------

enum class MlpTask { Classification, Regression };

struct MlpModel {
    Eigen::MatrixXd W1;  // hidden x input
    Eigen::VectorXd b1;
    Eigen::MatrixXd W2;  // output x hidden
    Eigen::VectorXd b2;
    MlpTask task = MlpTask::Regression;
    std::uint64_t seed = 0;

    int inputs() const { return static_cast<int>(W1.cols()); }
    int hidden() const { return static_cast<int>(W1.rows()); }
    int outputs() const { return static_cast<int>(W2.rows()); }
};

enum class StopReason { MaxIter, GradTol, MuOverflow, EarlyStop };
std::string to_string(StopReason r);

struct TrainReport {
    std::vector<double> train_loss;  // accepted-step mean-squared losses, strictly decreasing
    std::vector<double> val_loss;    // parallel to train_loss when a validation set is given
    StopReason stop = StopReason::MaxIter;
    int iterations = 0;
};

struct MlpTrainConfig {
    int hidden_size = 5;
    MlpTask task = MlpTask::Regression;
    std::uint64_t seed = 1;
    int max_iterations = 200;
    double grad_tol = 1e-7;
    double mu_init = 1e-3;
    double mu_max = 1e10;
    int patience = 6;  // consecutive validation-loss increases before early stop
};

// x_val may be empty (0 rows) to disable early stopping.
std::pair<MlpModel, TrainReport> train_mlp(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                                           const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
                                           const MlpTrainConfig& config);

Eigen::MatrixXd predict_mlp(const MlpModel& model, const Eigen::MatrixXd& x);
// argmax over output units (classification convention)
Eigen::VectorXi predict_labels(const MlpModel& model, const Eigen::MatrixXd& x);

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int num_classes);

// parameter-vector view used by the trainer; exposed for gradient tests
Eigen::VectorXd mlp_pack(const MlpModel& model);
void mlp_unpack(MlpModel& model, const Eigen::VectorXd& theta);
double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
// residual vector r (sample-major, outputs within sample) and its Jacobian
void mlp_residuals(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                   Eigen::VectorXd& r, Eigen::MatrixXd& jac);

std::string mlp_to_json(const MlpModel& model);
MlpModel mlp_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// k-nearest neighbors, Euclidean metric
// ---------------------------------------------------------------------------

// ties broken by the nearest neighbor among tied classes, then lowest class index
int knn(const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels, int k,
        const Eigen::VectorXd& query);
Eigen::VectorXi knn_batch(const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels, int k,
                          const Eigen::MatrixXd& queries);

// ---------------------------------------------------------------------------
// linear SVM, one-vs-rest, full-batch subgradient descent
// ---------------------------------------------------------------------------

struct LinearSvmModel {
    Eigen::MatrixXd W;  // class x input
    Eigen::VectorXd b;
    std::vector<int> classes;
    // per class, hinge objective of the running-average iterate after each epoch
    std::vector<std::vector<double>> averaged_objective;
};

LinearSvmModel train_linear_svm(const Eigen::MatrixXd& x, const std::vector<int>& labels, double C = 1.0,
                                int epochs = 1000, std::uint64_t seed = 1);
int predict_svm(const LinearSvmModel& model, const Eigen::VectorXd& query);
Eigen::VectorXi predict_svm_batch(const LinearSvmModel& model, const Eigen::MatrixXd& queries);

std::string svm_to_json(const LinearSvmModel& model);
LinearSvmModel svm_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Gaussian process regression, squared-exponential kernel, exact inference
// ---------------------------------------------------------------------------

struct GprConfig {
    // unset values fall back to: median pairwise training distance, target
    // variance, and 1e-2 * target variance respectively
    std::optional<double> length_scale;
    std::optional<double> signal_var;
    std::optional<double> noise_var;
};

struct GprModel {
    Eigen::MatrixXd train_x;
    Eigen::VectorXd alpha;    // (K + noise_var I)^-1 (y - y_mean)
    Eigen::MatrixXd chol_l;   // lower Cholesky factor of K + noise_var I
    double y_mean = 0.0;
    double length_scale = 1.0;
    double signal_var = 1.0;
    double noise_var = 1e-2;
};

GprModel train_gpr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GprConfig& config = {});
// predictive mean and variance
std::pair<double, double> predict_gpr(const GprModel& model, const Eigen::VectorXd& query);

std::string gpr_to_json(const GprModel& model);
GprModel gpr_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// circular-target handling for angle regression
// ---------------------------------------------------------------------------

class UndefinedAngle : public std::runtime_error {
  public:
    explicit UndefinedAngle(const std::string& what) : std::runtime_error(what) {}
};

// encode(90 deg) = (1, 0): first component sin, second cos
Eigen::Vector2d encode_angle(double deg);
double decode_angle(double sin_part, double cos_part);  // degrees in [0, 360)
double circular_error(double a_deg, double b_deg);      // degrees in [0, 180]

}  // namespace eitsim
