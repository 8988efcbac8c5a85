#include "eitsim/recon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace eitsim {

Reconstructor::Reconstructor(const Mesh& mesh, const DriveProtocol& protocol, const ReconConfig& config,
                             const ConductivityField& reference_field, double contact_impedance)
    : mesh_(&mesh) {
    if (config.lambda < 0.0) throw InvalidParameter("lambda must be non-negative");

    Eigen::MatrixXd J = jacobian(mesh, reference_field, protocol, contact_impedance);

    Eigen::VectorXd prior_diag;
    if (config.prior == ReconPrior::SensitivityWeighted) {
        prior_diag = J.colwise().squaredNorm();
        double floor = 1e-12 * prior_diag.maxCoeff();
        prior_diag = prior_diag.cwiseMax(floor);
    } else {
        prior_diag = Eigen::VectorXd::Ones(J.cols());
    }

    // (J^T J + l^2 P)^-1 J^T == P^-1 J^T (J P^-1 J^T + l^2 I)^-1
    weighted_jt_ = prior_diag.cwiseInverse().asDiagonal() * J.transpose();
    Eigen::MatrixXd gram = J * weighted_jt_;
    gram.diagonal().array() += config.lambda * config.lambda;
    gram_.compute(gram);
    if (gram_.info() != Eigen::Success)
        throw SolverError("normal-equations factorization failed (rank-deficient system)");
}

Eigen::VectorXd Reconstructor::reconstruct(const Eigen::VectorXd& delta_v) const {
    if (delta_v.size() != weighted_jt_.cols())
        throw DimensionMismatch("delta_v length does not match channel count");
    return weighted_jt_ * gram_.solve(delta_v);
}

namespace {

void diverging_color(double t, int& r, int& g, int& b) {
    // t in [-1,1]: blue -> white -> red
    t = std::clamp(t, -1.0, 1.0);
    if (t < 0) {
        r = static_cast<int>(std::lround(255 * (1.0 + t)));
        g = r;
        b = 255;
    } else {
        r = 255;
        g = static_cast<int>(std::lround(255 * (1.0 - t)));
        b = g;
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string render_heatmap(const Mesh& mesh, const Eigen::VectorXd& delta_sigma) {
    if (delta_sigma.size() != mesh.num_elements())
        throw DimensionMismatch("delta_sigma length does not match element count");

    double R = mesh.tank_radius;
    double scale = delta_sigma.cwiseAbs().maxCoeff();
    // coordinates in mm, y flipped for SVG screen space
    auto sx = [&](double x) { return fmt(1000.0 * (x + 1.08 * R)); };
    auto sy = [&](double y) { return fmt(1000.0 * (1.08 * R - y)); };

    std::ostringstream svg;
    double size = 2.16 * R * 1000.0;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << fmt(size) << " " << fmt(size)
        << "\">\n";
    for (int k = 0; k < mesh.num_elements(); ++k) {
        int r, g, b;
        diverging_color(scale > 0 ? delta_sigma[k] / scale : 0.0, r, g, b);
        const auto& tri = mesh.elements[k];
        svg << "<polygon points=\"";
        for (int i = 0; i < 3; ++i) {
            const Vec2& p = mesh.nodes[tri[i]];
            svg << sx(p.x()) << ',' << sy(p.y()) << (i < 2 ? " " : "");
        }
        svg << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\" stroke=\"none\"/>\n";
    }
    for (int e = 0; e < kNumElectrodes; ++e) {
        for (const auto& edge : mesh.electrode_edges[e]) {
            const Vec2& a = mesh.nodes[edge.a];
            const Vec2& b = mesh.nodes[edge.b];
            svg << "<line x1=\"" << sx(a.x()) << "\" y1=\"" << sy(a.y()) << "\" x2=\"" << sx(b.x())
                << "\" y2=\"" << sy(b.y()) << "\" stroke=\"black\" stroke-width=\"3\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

Vec2 blob_centroid(const Mesh& mesh, const Eigen::VectorXd& delta_sigma) {
    if (delta_sigma.size() != mesh.num_elements())
        throw DimensionMismatch("delta_sigma length does not match element count");
    std::vector<double> mags(delta_sigma.size());
    for (int k = 0; k < delta_sigma.size(); ++k) mags[k] = std::fabs(delta_sigma[k]);
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    double threshold = sorted[static_cast<size_t>(0.95 * (sorted.size() - 1))];

    Vec2 num = Vec2::Zero();
    double den = 0.0;
    for (int k = 0; k < delta_sigma.size(); ++k) {
        if (mags[k] >= threshold && mags[k] > 0.0) {
            double w = mags[k] * mesh.geometry[k].area;
            num += w * mesh.geometry[k].centroid;
            den += w;
        }
    }
    if (den == 0.0) return Vec2::Zero();
    return num / den;
}

}  // namespace eitsim
