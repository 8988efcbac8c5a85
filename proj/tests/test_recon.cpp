#include <doctest.h>

#include <numbers>
#include <cmath>

#include "eitsim/phantom.hpp"
#include "eitsim/recon.hpp"

using namespace eitsim;

namespace {

struct Fixture {
    Mesh mesh = build_mesh(0.075, 3, 0.5);
    MaterialParams params;
    DriveProtocol proto = DriveProtocol::adjacent();
    ConductivityField water;
    MeasurementFrame baseline;

    Fixture() {
        water.sigma = Eigen::VectorXd::Constant(mesh.num_elements(), params.sigma_water);
        baseline = measure(mesh, water, proto, 1e-3);
    }
};

}  // namespace

TEST_CASE("zero delta_v reconstructs to zero and the operator is linear") {
    Fixture fx;
    Reconstructor recon(fx.mesh, fx.proto, ReconConfig{}, fx.water, 1e-3);

    CHECK(recon.reconstruct(Eigen::VectorXd::Zero(208)).norm() == 0.0);

    Eigen::VectorXd v1 = Eigen::VectorXd::LinSpaced(208, -1e-4, 2e-4);
    Eigen::VectorXd v2 = v1.cwiseProduct(Eigen::VectorXd::LinSpaced(208, 0.5, 1.5));
    Eigen::VectorXd lhs = recon.reconstruct(2.0 * v1 - 3.0 * v2);
    Eigen::VectorXd rhs = 2.0 * recon.reconstruct(v1) - 3.0 * recon.reconstruct(v2);
    CHECK((lhs - rhs).norm() < 1e-10 * rhs.norm());
}

TEST_CASE("reconstruction is deterministic") {
    Fixture fx;
    Reconstructor recon(fx.mesh, fx.proto, ReconConfig{}, fx.water, 1e-3);
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(208, -1.0, 1.0) * 1e-4;
    CHECK(recon.reconstruct(v) == recon.reconstruct(v));
}

TEST_CASE("noiseless LOC frame localizes the specimen within 1.5 cm") {
    Fixture fx;
    Reconstructor recon(fx.mesh, fx.proto, ReconConfig{}, fx.water, 1e-3);
    Scenario sc{ScenarioKind::LOC, 0.04, 0.0, 0.0, Condition::Healthy, 1000.0, 0};
    MeasurementFrame frame = measure(fx.mesh, render_field(fx.mesh, sc, fx.params), fx.proto, 1e-3);
    Eigen::VectorXd ds = recon.reconstruct(frame.v - fx.baseline.v);
    Vec2 centroid = blob_centroid(fx.mesh, ds);
    CHECK((centroid - Vec2{0.04, 0.0}).norm() < 0.015);
}

TEST_CASE("localization holds for at least 90% of the 24 off-center positions") {
    Fixture fx;
    Reconstructor recon(fx.mesh, fx.proto, ReconConfig{}, fx.water, 1e-3);
    int ok = 0;
    for (double r : {0.02, 0.04}) {
        for (int a = 0; a < 12; ++a) {
            Scenario sc{ScenarioKind::LOC, r, 30.0 * a, 0.0, Condition::Healthy, 1000.0, 0};
            MeasurementFrame frame = measure(fx.mesh, render_field(fx.mesh, sc, fx.params), fx.proto, 1e-3);
            Vec2 centroid = blob_centroid(fx.mesh, recon.reconstruct(frame.v - fx.baseline.v));
            double th = 30.0 * a * std::numbers::pi / 180.0;
            Vec2 truth{r * std::cos(th), r * std::sin(th)};
            if ((centroid - truth).norm() < 0.015) ++ok;
        }
    }
    CHECK(ok >= 22);
}

TEST_CASE("heatmap: zero field maps all triangles to the colormap midpoint") {
    Mesh mesh = build_mesh(0.075, 1, 0.5);
    std::string svg = render_heatmap(mesh, Eigen::VectorXd::Zero(mesh.num_elements()));
    // midpoint of the diverging scale is white
    CHECK(svg.find("rgb(255,255,255)") != std::string::npos);
    CHECK(svg.find("rgb(255,0,0)") == std::string::npos);
    CHECK(svg.find("rgb(0,0,255)") == std::string::npos);
}

TEST_CASE("heatmap: sign flip mirrors colors about the midpoint") {
    Mesh mesh = build_mesh(0.075, 1, 0.5);
    Eigen::VectorXd ds = Eigen::VectorXd::LinSpaced(mesh.num_elements(), -1.0, 1.0);
    std::string pos = render_heatmap(mesh, ds);
    std::string neg = render_heatmap(mesh, Eigen::VectorXd(-ds));
    auto count = [](const std::string& s, const std::string& needle) {
        size_t n = 0, pos = 0;
        while ((pos = s.find(needle, pos)) != std::string::npos) { ++n; pos += needle.size(); }
        return n;
    };
    // swap red and blue codes and the documents must agree on color counts
    CHECK(count(pos, "rgb(255,0,0)") == count(neg, "rgb(0,0,255)"));
    CHECK(count(pos, "rgb(0,0,255)") == count(neg, "rgb(255,0,0)"));
}

TEST_CASE("heatmap output is byte-deterministic") {
    Mesh mesh = build_mesh(0.075, 1, 0.5);
    Eigen::VectorXd ds = Eigen::VectorXd::LinSpaced(mesh.num_elements(), -2.0, 0.7);
    CHECK(render_heatmap(mesh, ds) == render_heatmap(mesh, ds));
}

TEST_CASE("identity prior also solves the stated normal equations") {
    // cross-check the measurement-space solve against the direct formula on a
    // small mesh
    Mesh mesh = build_mesh(0.075, 1, 0.5);
    MaterialParams params;
    DriveProtocol proto = DriveProtocol::adjacent();
    ConductivityField water;
    water.sigma = Eigen::VectorXd::Constant(mesh.num_elements(), params.sigma_water);

    Eigen::MatrixXd J = jacobian(mesh, water, proto, 1e-3);
    ReconConfig cfg;
    cfg.prior = ReconPrior::Identity;
    cfg.lambda = 1e-3 * std::sqrt(J.cwiseAbs2().maxCoeff());
    Reconstructor recon(mesh, proto, cfg, water, 1e-3);
    Eigen::VectorXd dv = Eigen::VectorXd::LinSpaced(208, -1.0, 1.0) * 1e-5;
    Eigen::MatrixXd lhs = J.transpose() * J;
    lhs.diagonal().array() += cfg.lambda * cfg.lambda;
    Eigen::VectorXd direct = lhs.ldlt().solve(J.transpose() * dv);
    Eigen::VectorXd fast = recon.reconstruct(dv);
    CHECK((direct - fast).norm() < 1e-8 * direct.norm());
}
