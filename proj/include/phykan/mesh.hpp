#pragma once

#include "phykan/tensor.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace phykan::mesh {

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Edge shared by exactly two triangles; carries the RWG plus/minus
// convention. The lower-indexed triangle is the plus side.
struct InteriorEdge {
    int vertex_a = -1, vertex_b = -1;  // vertex_a < vertex_b
    int tri_plus = -1, tri_minus = -1;
    int free_vertex_plus = -1, free_vertex_minus = -1;
    double length = 0.0;
};

// Watertight oriented triangle surface mesh. Triangles are counter-clockwise
// as seen from outside; all derived fields are filled by finalize().
struct TriMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<InteriorEdge> edges;
    std::vector<Eigen::Vector3d> element_centroids;
    std::vector<double> element_areas;
    std::vector<Eigen::Vector3d> element_normals;      // unit, outward
    std::vector<std::array<int, 3>> triangle_edges;    // edge ids per triangle

    long num_vertices() const { return static_cast<long>(vertices.size()); }
    long num_triangles() const { return static_cast<long>(triangles.size()); }
    long num_edges() const { return static_cast<long>(edges.size()); }

    double total_area() const;
    double signed_volume() const;

    // Computes centroids/areas/normals, extracts interior edges, and checks
    // watertightness and consistent orientation. Throws MeshError otherwise.
    void finalize();
};

TriMesh make_cube(double side, int subdiv);
TriMesh make_sphere(double radius, int refinement);
// rings = 1 gives the minimal lateral fan + base fan; larger values split
// the slant and the base disk into bands so elements stay electrically small
TriMesh make_cone(double radius, double height, int segments, int rings = 1);
// Capped cylinder (r=0.1 m, h=0.2 m) with a cone nose (h=0.1 m); a
// reproducible stand-in for a generic assembly body.
TriMesh make_assembly(int segments = 24, int wall_rings = 4);

// One InteriorEdge per shared face pair, sorted by (vertex_a, vertex_b).
// Throws MeshError when a boundary or non-manifold edge is found.
std::vector<InteriorEdge> extract_edges(const std::vector<Eigen::Vector3d>& vertices,
                                        const std::vector<std::array<int, 3>>& triangles);

// 0/1 edge-node adjacency: (a,b)=1 iff edges a and b share a triangle.
// Symmetric with a zero diagonal; every interior edge has exactly 4 neighbors.
ad::CsrMatrix edge_adjacency(const TriMesh& m);

// Minimal OBJ subset: `v x y z` and `f i j k` (1-based), ASCII, LF endings.
void write_obj(const TriMesh& m, const std::string& path);
TriMesh read_obj(const std::string& path);

// Content hash over vertex coordinates and triangle indices (FNV-1a 64).
std::uint64_t mesh_hash(const TriMesh& m);
std::string mesh_hash_hex(const TriMesh& m);

}  // namespace phykan::mesh
