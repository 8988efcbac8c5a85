#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "analytic_oracle.hpp"
#include "eitsim/fem.hpp"
#include "eitsim/mesh.hpp"

using namespace eitsim;

namespace {

ConductivityField homogeneous(const Mesh& mesh, double sigma) {
    ConductivityField f;
    f.sigma = Eigen::VectorXd::Constant(mesh.num_elements(), sigma);
    return f;
}

}  // namespace

TEST_CASE("adjacent protocol has 16 patterns x 13 channels") {
    auto proto = DriveProtocol::adjacent();
    CHECK(proto.channels.size() == 208);
    for (const auto& ch : proto.channels) {
        CHECK(ch.meas_neg == (ch.meas_pos + 1) % 16);
        CHECK(ch.drive_snk == (ch.drive_src + 1) % 16);
        CHECK(ch.meas_pos != ch.drive_src);
        CHECK(ch.meas_pos != ch.drive_snk);
        CHECK(ch.meas_neg != ch.drive_src);
        CHECK(ch.meas_neg != ch.drive_snk);
    }
}

TEST_CASE("solver rejects invalid input") {
    Mesh mesh = build_mesh(0.075, 1, 0.5);
    ConductivityField bad;
    bad.sigma = Eigen::VectorXd::Constant(10, 1.0);
    CHECK_THROWS_AS(CemForward(mesh, bad, 1e-3), DimensionMismatch);
    ConductivityField zero = homogeneous(mesh, 1.0);
    zero.sigma[3] = 0.0;
    CHECK_THROWS_AS(CemForward(mesh, zero, 1e-3), SolverError);
    CHECK_THROWS_AS(assemble_and_solve(mesh, homogeneous(mesh, 1.0), 0, 1, -1.0, 1e-3), InvalidParameter);
}

TEST_CASE("electrode potentials sum to zero and swap antisymmetry") {
    Mesh mesh = build_mesh(0.075, 2, 0.5);
    auto field = homogeneous(mesh, 1.0);
    CemSolution s01 = assemble_and_solve(mesh, field, 0, 1, 1e-3, 1e-3);
    CHECK(std::fabs(s01.electrode_potentials.sum()) < 1e-12 * s01.electrode_potentials.norm());
    CemSolution s10 = assemble_and_solve(mesh, field, 1, 0, 1e-3, 1e-3);
    CHECK((s01.electrode_potentials + s10.electrode_potentials).norm() <
          1e-10 * s01.electrode_potentials.norm());
}

TEST_CASE("homogeneous field: pattern p equals rotated pattern 0") {
    Mesh mesh = build_mesh(0.075, 2, 0.5);
    auto field = homogeneous(mesh, 0.8);
    CemSolution s0 = assemble_and_solve(mesh, field, 0, 1, 1e-3, 1e-3);
    for (int p : {1, 5, 11}) {
        CemSolution sp = assemble_and_solve(mesh, field, p, (p + 1) % 16, 1e-3, 1e-3);
        for (int l = 0; l < kNumElectrodes; ++l) {
            double a = sp.electrode_potentials[(l + p) % 16];
            double b = s0.electrode_potentials[l];
            CHECK(std::fabs(a - b) < 1e-9 * s0.electrode_potentials.norm());
        }
    }
}

TEST_CASE("scaling sigma by 2 and halving contact impedance halves all potentials") {
    Mesh mesh = build_mesh(0.075, 1, 0.5);
    CemSolution a = assemble_and_solve(mesh, homogeneous(mesh, 0.5), 2, 3, 1e-3, 1e-3);
    CemSolution b = assemble_and_solve(mesh, homogeneous(mesh, 1.0), 2, 3, 1e-3, 0.5e-3);
    CHECK((b.electrode_potentials - 0.5 * a.electrode_potentials).norm() <
          1e-10 * a.electrode_potentials.norm());
    CHECK((b.node_potentials - 0.5 * a.node_potentials).norm() < 1e-10 * a.node_potentials.norm());
}

TEST_CASE("homogeneous frame: rotational channel symmetry within 1e-9") {
    Mesh mesh = build_mesh(0.075, 3, 0.5);
    auto proto = DriveProtocol::adjacent();
    MeasurementFrame frame = measure(mesh, homogeneous(mesh, 1.0), proto, 1e-3);
    double scale = frame.v.cwiseAbs().maxCoeff();
    for (int steps : {1, 7}) {
        auto perm = proto.rotation_permutation(steps);
        for (int i = 0; i < frame.v.size(); ++i)
            CHECK(std::fabs(frame.v[i] - frame.v[perm[i]]) < 1e-9 * scale);
    }
}

TEST_CASE("reciprocity across all 208 channels") {
    Mesh mesh = build_mesh(0.075, 2, 0.5);
    ConductivityField field = homogeneous(mesh, 1.0);
    // inhomogeneous field so reciprocity is not implied by symmetry
    auto blob = elements_in_region(mesh, Disc{{0.02, 0.01}, 0.015});
    for (int k : blob) field.sigma[k] = 3.0;

    auto proto = DriveProtocol::adjacent();
    MeasurementFrame frame = measure(mesh, field, proto, 1e-3);
    double scale = frame.v.cwiseAbs().maxCoeff();

    std::map<std::pair<int, int>, double> by_pair;
    for (size_t i = 0; i < proto.channels.size(); ++i) {
        const auto& ch = proto.channels[i];
        by_pair[{ch.drive_src, ch.meas_pos}] = frame.v[i];
    }
    for (const auto& [key, v] : by_pair) {
        auto it = by_pair.find({key.second, key.first});
        REQUIRE(it != by_pair.end());
        CHECK(std::fabs(v - it->second) < 1e-8 * scale);
    }
}

TEST_CASE("concentric inclusion matches analytic series oracle") {
    const double R = 0.075, a = 0.0375, s_out = 1.0, s_in = 2.0;
    // small electrodes and contact impedance approximate the point-electrode
    // continuum model the series assumes
    Mesh mesh = build_mesh(R, 4, 0.1);
    ConductivityField field = homogeneous(mesh, s_out);
    for (int k : elements_in_region(mesh, Disc{Vec2::Zero(), a})) field.sigma[k] = s_in;

    auto proto = DriveProtocol::adjacent(1e-3);
    MeasurementFrame frame = measure(mesh, field, proto, 1e-6);

    Eigen::VectorXd expect(208);
    for (size_t i = 0; i < proto.channels.size(); ++i) {
        const auto& ch = proto.channels[i];
        auto angle = [](int e) { return 2.0 * std::numbers::pi * e / 16; };
        double up = oracle::boundary_potential(angle(ch.meas_pos), angle(ch.drive_src),
                                               angle(ch.drive_snk), 1e-3, s_out, s_in, a, R);
        double un = oracle::boundary_potential(angle(ch.meas_neg), angle(ch.drive_src),
                                               angle(ch.drive_snk), 1e-3, s_out, s_in, a, R);
        expect[i] = up - un;
    }

    // top-decile channels by magnitude
    std::vector<int> idx(208);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return std::fabs(expect[i]) > std::fabs(expect[j]); });
    for (int r = 0; r < 21; ++r) {
        int i = idx[r];
        CHECK(std::fabs(frame.v[i] - expect[i]) < 0.02 * std::fabs(expect[i]));
    }
}

TEST_CASE("jacobian columns match central finite differences") {
    Mesh mesh = build_mesh(0.075, 1, 0.5);
    ConductivityField field = homogeneous(mesh, 1.0);
    for (int k : elements_in_region(mesh, Disc{{-0.01, 0.02}, 0.02})) field.sigma[k] = 2.5;

    auto proto = DriveProtocol::adjacent();
    Eigen::MatrixXd J = jacobian(mesh, field, proto, 1e-3);

    std::mt19937 rng(42);
    std::uniform_int_distribution<int> pick(0, mesh.num_elements() - 1);
    for (int trial = 0; trial < 20; ++trial) {
        int k = pick(rng);
        double eps = 1e-6 * field.sigma[k];
        ConductivityField up = field, dn = field;
        up.sigma[k] += eps;
        dn.sigma[k] -= eps;
        Eigen::VectorXd fd =
            (measure(mesh, up, proto, 1e-3).v - measure(mesh, dn, proto, 1e-3).v) / (2 * eps);
        CHECK((J.col(k) - fd).norm() < 1e-4 * std::max(J.col(k).norm(), fd.norm()));
    }
}

TEST_CASE("jacobian: homogeneous columns related by rotation are permutations") {
    Mesh mesh = build_mesh(0.075, 2, 0.5);
    auto proto = DriveProtocol::adjacent();
    Eigen::MatrixXd J = jacobian(mesh, homogeneous(mesh, 1.0), proto, 1e-3);
    auto perm = proto.rotation_permutation(1);

    double c = std::cos(2 * std::numbers::pi / 16), s = std::sin(2 * std::numbers::pi / 16);
    // map each element to its rotated partner via centroid lookup
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> pick(0, mesh.num_elements() - 1);
    double scale = J.cwiseAbs().maxCoeff();
    for (int trial = 0; trial < 10; ++trial) {
        int k = pick(rng);
        Vec2 ctr = mesh.geometry[k].centroid;
        Vec2 rot{c * ctr.x() - s * ctr.y(), s * ctr.x() + c * ctr.y()};
        int k2 = -1;
        for (int j = 0; j < mesh.num_elements(); ++j)
            if ((mesh.geometry[j].centroid - rot).norm() < 1e-10) { k2 = j; break; }
        REQUIRE(k2 >= 0);
        for (int i = 0; i < J.rows(); ++i)
            CHECK(std::fabs(J(i, k) - J(perm[i], k2)) < 1e-6 * scale);
    }
}

TEST_CASE("jacobian predicts uniform relative perturbation to first order") {
    Mesh mesh = build_mesh(0.075, 2, 0.5);
    ConductivityField field = homogeneous(mesh, 1.0);
    for (int k : elements_in_region(mesh, Disc{{0.015, -0.02}, 0.018})) field.sigma[k] = 0.4;

    auto proto = DriveProtocol::adjacent();
    Eigen::MatrixXd J = jacobian(mesh, field, proto, 1e-3);
    double delta = 1e-4;
    Eigen::VectorXd predicted = J * (delta * field.sigma);
    Eigen::VectorXd actual = measure(mesh, ConductivityField{field.sigma * (1 + delta)}, proto, 1e-3).v -
                             measure(mesh, field, proto, 1e-3).v;
    CHECK((predicted - actual).norm() < 1e-3 * actual.norm());
}
