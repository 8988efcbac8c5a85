#include "eitsim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

namespace eitsim {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

int ring_base(int ring) {
    // center node is index 0; ring i (i >= 1) holds 16*i nodes
    return 1 + 8 * ring * (ring - 1);
}

int ring_node(int ring, int j) {
    if (ring == 0) return 0;
    int n = kNumElectrodes * ring;
    return ring_base(ring) + ((j % n) + n) % n;
}

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

}  // namespace

double Mesh::total_area() const {
    double sum = 0.0;
    for (const auto& g : geometry) sum += g.area;
    return sum;
}

std::vector<Edge> Mesh::boundary_edges() const {
    int rings = 4 * refinement_level;
    int n = kNumElectrodes * rings;
    std::vector<Edge> edges(n);
    for (int j = 0; j < n; ++j) edges[j] = {ring_node(rings, j), ring_node(rings, j + 1)};
    return edges;
}

ElementGeometry element_geometry(const Mesh& mesh, int element) {
    const auto& tri = mesh.elements[element];
    const Vec2& p0 = mesh.nodes[tri[0]];
    const Vec2& p1 = mesh.nodes[tri[1]];
    const Vec2& p2 = mesh.nodes[tri[2]];
    ElementGeometry g;
    double twice_area = (p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x();
    g.area = 0.5 * twice_area;
    g.centroid = (p0 + p1 + p2) / 3.0;
    g.grad[0] = perp(p2 - p1) / twice_area;
    g.grad[1] = perp(p0 - p2) / twice_area;
    g.grad[2] = perp(p1 - p0) / twice_area;
    return g;
}

Mesh build_mesh(double tank_radius, int refinement_level, double electrode_coverage) {
    if (tank_radius <= 0.0) throw InvalidParameter("tank_radius must be positive");
    if (refinement_level < 1) throw InvalidParameter("refinement_level must be >= 1");
    if (electrode_coverage <= 0.0 || electrode_coverage >= 1.0)
        throw InvalidParameter("electrode_coverage must lie in (0,1)");

    Mesh mesh;
    mesh.tank_radius = tank_radius;
    mesh.refinement_level = refinement_level;
    mesh.electrode_coverage = electrode_coverage;

    const int rings = 4 * refinement_level;

    mesh.nodes.push_back(Vec2::Zero());
    for (int i = 1; i <= rings; ++i) {
        double r = tank_radius * static_cast<double>(i) / rings;
        int n = kNumElectrodes * i;
        for (int j = 0; j < n; ++j) {
            double phi = kTau * j / n;
            mesh.nodes.push_back({r * std::cos(phi), r * std::sin(phi)});
        }
    }

    // Triangulate each ring band by merging the two node loops in angular
    // order. Angles are compared as exact fractions j/n so the construction
    // keeps the 16-fold symmetry bit-exactly.
    for (int i = 1; i <= rings; ++i) {
        int n_in = kNumElectrodes * (i - 1);
        int n_out = kNumElectrodes * i;
        if (n_in == 0) {
            for (int j = 0; j < n_out; ++j)
                mesh.elements.push_back({ring_node(i, j), ring_node(i, j + 1), 0});
            continue;
        }
        int ji = 0, jo = 0;
        while (ji < n_in || jo < n_out) {
            bool advance_outer;
            if (jo == n_out)
                advance_outer = false;
            else if (ji == n_in)
                advance_outer = true;
            else
                advance_outer =
                    static_cast<std::int64_t>(jo + 1) * n_in <= static_cast<std::int64_t>(ji + 1) * n_out;
            if (advance_outer) {
                mesh.elements.push_back({ring_node(i, jo), ring_node(i, jo + 1), ring_node(i - 1, ji)});
                ++jo;
            } else {
                mesh.elements.push_back({ring_node(i - 1, ji + 1), ring_node(i - 1, ji), ring_node(i, jo)});
                ++ji;
            }
        }
    }

    // Assign boundary edges to electrode patches by midpoint angle, measured
    // in turns. Patch e is centered at e/16 with half-width coverage/32.
    const int n_bnd = kNumElectrodes * rings;
    const double half_width = electrode_coverage / (2.0 * kNumElectrodes);
    for (int j = 0; j < n_bnd; ++j) {
        double f = (j + 0.5) / n_bnd;
        for (int e = 0; e < kNumElectrodes; ++e) {
            double d = std::fabs(f - static_cast<double>(e) / kNumElectrodes);
            d = std::min(d, 1.0 - d);
            if (d < half_width) {
                mesh.electrode_edges[e].push_back({ring_node(rings, j), ring_node(rings, j + 1)});
                break;
            }
        }
    }
    // order each patch by angular offset from its electrode center so patch
    // indices correspond under 16-fold rotation
    for (int e = 0; e < kNumElectrodes; ++e) {
        auto offset = [&](const Edge& edge) {
            Vec2 mid = 0.5 * (mesh.nodes[edge.a] + mesh.nodes[edge.b]);
            double f = std::atan2(mid.y(), mid.x()) / kTau - static_cast<double>(e) / kNumElectrodes;
            f -= std::round(f);
            return f;
        };
        std::sort(mesh.electrode_edges[e].begin(), mesh.electrode_edges[e].end(),
                  [&](const Edge& x, const Edge& y) { return offset(x) < offset(y); });
    }

    mesh.geometry.reserve(mesh.elements.size());
    for (int k = 0; k < mesh.num_elements(); ++k) mesh.geometry.push_back(element_geometry(mesh, k));
    return mesh;
}

bool Slit::contains(const Vec2& p) const {
    double a = angle_deg * std::numbers::pi / 180.0;
    Vec2 u{std::cos(a), std::sin(a)};
    Vec2 d = p - center;
    double t = d.dot(u);
    double s = d.dot(perp(u));
    return t >= 0.0 && t <= length && std::fabs(s) <= 0.5 * width;
}

namespace {
template <typename Region>
std::vector<int> elements_in_region_impl(const Mesh& mesh, const Region& region) {
    std::vector<int> out;
    for (int k = 0; k < mesh.num_elements(); ++k)
        if (region.contains(mesh.geometry[k].centroid)) out.push_back(k);
    return out;
}
}  // namespace

std::vector<int> elements_in_region(const Mesh& mesh, const Disc& r) { return elements_in_region_impl(mesh, r); }
std::vector<int> elements_in_region(const Mesh& mesh, const Annulus& r) { return elements_in_region_impl(mesh, r); }
std::vector<int> elements_in_region(const Mesh& mesh, const Slit& r) { return elements_in_region_impl(mesh, r); }

std::string mesh_to_json(const Mesh& mesh) {
    nlohmann::json j;
    j["tank_radius"] = mesh.tank_radius;
    j["refinement_level"] = mesh.refinement_level;
    j["electrode_coverage"] = mesh.electrode_coverage;
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (const auto& p : mesh.nodes) nodes.push_back({p.x(), p.y()});
    auto& elems = j["elements"] = nlohmann::json::array();
    for (const auto& t : mesh.elements) elems.push_back({t[0], t[1], t[2]});
    auto& patches = j["electrode_edges"] = nlohmann::json::array();
    for (const auto& patch : mesh.electrode_edges) {
        nlohmann::json p = nlohmann::json::array();
        for (const auto& e : patch) p.push_back({e.a, e.b});
        patches.push_back(std::move(p));
    }
    return j.dump();
}

Mesh mesh_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Mesh mesh;
    mesh.tank_radius = j.at("tank_radius").get<double>();
    mesh.refinement_level = j.at("refinement_level").get<int>();
    mesh.electrode_coverage = j.at("electrode_coverage").get<double>();
    for (const auto& p : j.at("nodes")) mesh.nodes.push_back({p[0].get<double>(), p[1].get<double>()});
    for (const auto& t : j.at("elements"))
        mesh.elements.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
    const auto& patches = j.at("electrode_edges");
    for (int e = 0; e < kNumElectrodes; ++e)
        for (const auto& edge : patches.at(e))
            mesh.electrode_edges[e].push_back({edge[0].get<int>(), edge[1].get<int>()});
    mesh.geometry.reserve(mesh.elements.size());
    for (int k = 0; k < mesh.num_elements(); ++k) mesh.geometry.push_back(element_geometry(mesh, k));
    return mesh;
}

}  // namespace eitsim
