#pragma once

#include <string>

#include "eitsim/fem.hpp"
#include "eitsim/mesh.hpp"

namespace eitsim {

enum class ReconPrior { Identity, SensitivityWeighted };

struct ReconConfig {
    double lambda = 0.05;
    ReconPrior prior = ReconPrior::SensitivityWeighted;
};

// One-step linearized difference imaging:
//   delta_sigma = (J^T J + lambda^2 P)^-1 J^T delta_v
// with P = I or diag(J^T J). The normal equations are solved in measurement
// space (208 x 208) which is algebraically identical and cheap.
class Reconstructor {
  public:
    Reconstructor(const Mesh& mesh, const DriveProtocol& protocol, const ReconConfig& config,
                  const ConductivityField& reference_field, double contact_impedance);

    Eigen::VectorXd reconstruct(const Eigen::VectorXd& delta_v) const;

    const Mesh& mesh() const { return *mesh_; }

  private:
    const Mesh* mesh_;
    Eigen::MatrixXd weighted_jt_;       // P^-1 J^T
    Eigen::LLT<Eigen::MatrixXd> gram_;  // J P^-1 J^T + lambda^2 I
};

// Filled-triangle heatmap with a symmetric diverging color scale centered at
// zero; byte output is deterministic for fixed inputs.
std::string render_heatmap(const Mesh& mesh, const Eigen::VectorXd& delta_sigma);

// Centroid of the top-5% |delta_sigma| elements, area-weighted.
Vec2 blob_centroid(const Mesh& mesh, const Eigen::VectorXd& delta_sigma);

}  // namespace eitsim
