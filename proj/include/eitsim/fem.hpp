#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "eitsim/mesh.hpp"

namespace eitsim {

constexpr int kNumChannels = 208;

struct ConductivityField {
    Eigen::VectorXd sigma;  // S/m, one entry per element
};

struct MeasurementChannel {
    int drive_src = 0;
    int drive_snk = 0;
    int meas_pos = 0;
    int meas_neg = 0;
};

// Adjacent drive / adjacent measure: pattern p drives (p, p+1); every adjacent
// pair not touching a driven electrode is measured, 13 per pattern, 208 total.
struct DriveProtocol {
    double current_amplitude = 1e-3;  // A
    std::vector<MeasurementChannel> channels;

    static DriveProtocol adjacent(double current_amplitude = 1e-3);
    // Channel permutation induced by rotating the tank by `steps` electrodes.
    std::vector<int> rotation_permutation(int steps) const;
};

struct CemSolution {
    Eigen::VectorXd node_potentials;
    Eigen::Matrix<double, kNumElectrodes, 1> electrode_potentials;
    double contact_impedance = 0.0;
};

struct MeasurementFrame {
    Eigen::VectorXd v;  // length 208, pattern-major order
};

class SolverError : public std::runtime_error {
  public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

class DimensionMismatch : public std::runtime_error {
  public:
    explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

// Complete electrode model solver. Assembles once per conductivity field and
// factorizes the grounded system; the 16 drive patterns then share the factor.
class CemForward {
  public:
    CemForward(const Mesh& mesh, const ConductivityField& field, double contact_impedance);

    // Unit-current solution for drive pair (src, snk).
    CemSolution solve(int src, int snk) const;

    const Mesh& mesh() const { return *mesh_; }

  private:
    const Mesh* mesh_;
    double contact_impedance_;
    int n_nodes_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

CemSolution assemble_and_solve(const Mesh& mesh, const ConductivityField& field, int src, int snk,
                               double amplitude, double contact_impedance);

MeasurementFrame measure(const Mesh& mesh, const ConductivityField& field, const DriveProtocol& protocol,
                         double contact_impedance);

// J[m, k] = d v[m] / d sigma[k], via adjoint fields (one solve per electrode pair).
Eigen::MatrixXd jacobian(const Mesh& mesh, const ConductivityField& field, const DriveProtocol& protocol,
                         double contact_impedance);

}  // namespace eitsim
