#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace eitsim {

constexpr int kNumElectrodes = 16;

using Vec2 = Eigen::Vector2d;

struct Edge {
    int a = 0;
    int b = 0;
};

struct ElementGeometry {
    Vec2 centroid;
    double area = 0.0;
    // Gradients of the three P1 shape functions, constant per element.
    std::array<Vec2, 3> grad;
};

// Triangulated disc with 16 boundary electrode patches.
// Built from concentric rings with 16-fold angular symmetry: ring i holds
// 16*i nodes, so rotating the node set by 2*pi/16 maps the mesh onto itself
// and electrode patch e onto patch e+1.
struct Mesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> elements;
    std::array<std::vector<Edge>, kNumElectrodes> electrode_edges;
    double tank_radius = 0.0;
    int refinement_level = 0;
    double electrode_coverage = 0.0;

    std::vector<ElementGeometry> geometry;  // filled by build_mesh

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_elements() const { return static_cast<int>(elements.size()); }

    double total_area() const;
    // All boundary edges in counterclockwise order starting at angle 0.
    std::vector<Edge> boundary_edges() const;
};

class InvalidParameter : public std::runtime_error {
  public:
    explicit InvalidParameter(const std::string& what) : std::runtime_error(what) {}
};

// electrode_coverage is the fraction of each electrode's 1/16 arc sector the
// patch covers, in (0,1). Deterministic: same inputs give a bit-identical mesh.
Mesh build_mesh(double tank_radius, int refinement_level, double electrode_coverage);

ElementGeometry element_geometry(const Mesh& mesh, int element);

// Geometric predicates over element centroids.
struct Disc {
    Vec2 center;
    double radius;
    bool contains(const Vec2& p) const { return (p - center).norm() <= radius; }
};

struct Annulus {
    Vec2 center;
    double r_in;
    double r_out;
    bool contains(const Vec2& p) const {
        double r = (p - center).norm();
        return r >= r_in && r <= r_out;
    }
};

// Rectangle extending from `center` along direction `angle_deg` for `length`,
// `width` across.
struct Slit {
    Vec2 center;
    double angle_deg;
    double length;
    double width;
    bool contains(const Vec2& p) const;
};

std::vector<int> elements_in_region(const Mesh& mesh, const Disc& region);
std::vector<int> elements_in_region(const Mesh& mesh, const Annulus& region);
std::vector<int> elements_in_region(const Mesh& mesh, const Slit& region);

// JSON round trip for reproducibility across runs.
std::string mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const std::string& text);

}  // namespace eitsim
