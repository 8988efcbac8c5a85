#include "eitsim/fem.hpp"

#include <cmath>
#include <unordered_map>

namespace eitsim {

DriveProtocol DriveProtocol::adjacent(double current_amplitude) {
    DriveProtocol proto;
    proto.current_amplitude = current_amplitude;
    for (int p = 0; p < kNumElectrodes; ++p) {
        int src = p, snk = (p + 1) % kNumElectrodes;
        for (int m = 0; m < kNumElectrodes; ++m) {
            int m1 = (m + 1) % kNumElectrodes;
            if (m == src || m == snk || m1 == src || m1 == snk) continue;
            proto.channels.push_back({src, snk, m, m1});
        }
    }
    return proto;
}

std::vector<int> DriveProtocol::rotation_permutation(int steps) const {
    std::unordered_map<int, int> index;
    for (int i = 0; i < static_cast<int>(channels.size()); ++i)
        index[channels[i].drive_src * kNumElectrodes + channels[i].meas_pos] = i;
    std::vector<int> perm(channels.size());
    for (int i = 0; i < static_cast<int>(channels.size()); ++i) {
        int p = (channels[i].drive_src + steps) % kNumElectrodes;
        int m = (channels[i].meas_pos + steps) % kNumElectrodes;
        perm[i] = index.at(p * kNumElectrodes + m);
    }
    return perm;
}

namespace {

// System layout: [node potentials (n) | electrode potentials (16) | zero-sum multiplier (1)]
Eigen::SparseMatrix<double> assemble_system(const Mesh& mesh, const ConductivityField& field,
                                            double contact_impedance) {
    const int n = mesh.num_nodes();
    const int dim = n + kNumElectrodes + 1;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.num_elements() + 8 * kNumElectrodes * mesh.refinement_level + 2 * kNumElectrodes);

    for (int k = 0; k < mesh.num_elements(); ++k) {
        const auto& tri = mesh.elements[k];
        const auto& g = mesh.geometry[k];
        double s = field.sigma[k] * g.area;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(tri[i], tri[j], s * g.grad[i].dot(g.grad[j]));
    }

    const double inv_z = 1.0 / contact_impedance;
    for (int l = 0; l < kNumElectrodes; ++l) {
        for (const auto& edge : mesh.electrode_edges[l]) {
            double len = (mesh.nodes[edge.a] - mesh.nodes[edge.b]).norm();
            // edge mass matrix len/6 * [[2,1],[1,2]], edge load vector len/2
            trip.emplace_back(edge.a, edge.a, inv_z * len / 3.0);
            trip.emplace_back(edge.b, edge.b, inv_z * len / 3.0);
            trip.emplace_back(edge.a, edge.b, inv_z * len / 6.0);
            trip.emplace_back(edge.b, edge.a, inv_z * len / 6.0);
            trip.emplace_back(edge.a, n + l, -inv_z * len / 2.0);
            trip.emplace_back(n + l, edge.a, -inv_z * len / 2.0);
            trip.emplace_back(edge.b, n + l, -inv_z * len / 2.0);
            trip.emplace_back(n + l, edge.b, -inv_z * len / 2.0);
            trip.emplace_back(n + l, n + l, inv_z * len);
        }
        trip.emplace_back(n + l, dim - 1, 1.0);
        trip.emplace_back(dim - 1, n + l, 1.0);
    }

    Eigen::SparseMatrix<double> A(dim, dim);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

}  // namespace

CemForward::CemForward(const Mesh& mesh, const ConductivityField& field, double contact_impedance)
    : mesh_(&mesh), contact_impedance_(contact_impedance), n_nodes_(mesh.num_nodes()) {
    if (field.sigma.size() != mesh.num_elements())
        throw DimensionMismatch("conductivity field length does not match element count");
    if (!(field.sigma.array() > 0.0).all() || !field.sigma.allFinite())
        throw SolverError("conductivity field must be positive and finite");
    if (contact_impedance <= 0.0) throw InvalidParameter("contact_impedance must be positive");

    Eigen::SparseMatrix<double> A = assemble_system(mesh, field, contact_impedance);
    lu_.compute(A);
    if (lu_.info() != Eigen::Success) throw SolverError("CEM system factorization failed");
}

CemSolution CemForward::solve(int src, int snk) const {
    const int dim = n_nodes_ + kNumElectrodes + 1;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    rhs[n_nodes_ + src] = 1.0;
    rhs[n_nodes_ + snk] = -1.0;
    Eigen::VectorXd x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success) throw SolverError("CEM solve failed");

    CemSolution sol;
    sol.node_potentials = x.head(n_nodes_);
    sol.electrode_potentials = x.segment<kNumElectrodes>(n_nodes_);
    sol.contact_impedance = contact_impedance_;
    return sol;
}

CemSolution assemble_and_solve(const Mesh& mesh, const ConductivityField& field, int src, int snk,
                               double amplitude, double contact_impedance) {
    if (amplitude <= 0.0) throw InvalidParameter("current amplitude must be positive");
    CemForward fwd(mesh, field, contact_impedance);
    CemSolution sol = fwd.solve(src, snk);
    sol.node_potentials *= amplitude;
    sol.electrode_potentials *= amplitude;
    return sol;
}

MeasurementFrame measure(const Mesh& mesh, const ConductivityField& field, const DriveProtocol& protocol,
                         double contact_impedance) {
    CemForward fwd(mesh, field, contact_impedance);
    std::vector<Eigen::Matrix<double, kNumElectrodes, 1>> potentials(kNumElectrodes);
    for (int p = 0; p < kNumElectrodes; ++p)
        potentials[p] = fwd.solve(p, (p + 1) % kNumElectrodes).electrode_potentials;

    MeasurementFrame frame;
    frame.v.resize(protocol.channels.size());
    for (size_t i = 0; i < protocol.channels.size(); ++i) {
        const auto& ch = protocol.channels[i];
        const auto& U = potentials[ch.drive_src];
        frame.v[i] = protocol.current_amplitude * (U[ch.meas_pos] - U[ch.meas_neg]);
    }
    return frame;
}

Eigen::MatrixXd jacobian(const Mesh& mesh, const ConductivityField& field, const DriveProtocol& protocol,
                         double contact_impedance) {
    CemForward fwd(mesh, field, contact_impedance);
    const int n_elem = mesh.num_elements();

    // per-pattern element-wise potential gradients, n_elem x 2
    std::vector<Eigen::MatrixX2d> grads(kNumElectrodes);
    for (int p = 0; p < kNumElectrodes; ++p) {
        CemSolution sol = fwd.solve(p, (p + 1) % kNumElectrodes);
        Eigen::MatrixX2d g(n_elem, 2);
        for (int k = 0; k < n_elem; ++k) {
            const auto& tri = mesh.elements[k];
            const auto& geo = mesh.geometry[k];
            Vec2 gk = Vec2::Zero();
            for (int i = 0; i < 3; ++i) gk += sol.node_potentials[tri[i]] * geo.grad[i];
            g.row(k) = gk;
        }
        grads[p] = std::move(g);
    }

    Eigen::MatrixXd J(protocol.channels.size(), n_elem);
    for (size_t c = 0; c < protocol.channels.size(); ++c) {
        const auto& ch = protocol.channels[c];
        // measurement pairs are adjacent pairs, so the adjoint field is the
        // drive field of the pattern with the same leading electrode
        const auto& gd = grads[ch.drive_src];
        const auto& gm = grads[ch.meas_pos];
        for (int k = 0; k < n_elem; ++k)
            J(c, k) = -protocol.current_amplitude * mesh.geometry[k].area * gd.row(k).dot(gm.row(k));
    }
    return J;
}

}  // namespace eitsim
