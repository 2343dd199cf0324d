#include "phykan/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace phykan::mesh {

using Eigen::Vector3d;

double TriMesh::total_area() const {
    double s = 0.0;
    for (double a : element_areas) s += a;
    return s;
}

double TriMesh::signed_volume() const {
    double v = 0.0;
    for (const auto& t : triangles)
        v += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]])) / 6.0;
    return v;
}

std::vector<InteriorEdge> extract_edges(const std::vector<Vector3d>& vertices,
                                        const std::vector<std::array<int, 3>>& triangles) {
    struct Side {
        int tri;
        int opposite;
        bool forward;  // edge traversed as (a,b) with a<b
    };
    std::map<std::pair<int, int>, std::vector<Side>> table;
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
        const auto& tri = triangles[t];
        for (int e = 0; e < 3; ++e) {
            int u = tri[e], v = tri[(e + 1) % 3], w = tri[(e + 2) % 3];
            auto key = std::minmax(u, v);
            table[{key.first, key.second}].push_back({t, w, u < v});
        }
    }
    std::vector<InteriorEdge> edges;
    edges.reserve(table.size());
    for (const auto& [key, sides] : table) {
        if (sides.size() != 2)
            throw MeshError("open mesh: edge (" + std::to_string(key.first) + "," +
                            std::to_string(key.second) + ") belongs to " +
                            std::to_string(sides.size()) + " triangle(s)");
        if (sides[0].forward == sides[1].forward)
            throw MeshError("inconsistent orientation at edge (" + std::to_string(key.first) + "," +
                            std::to_string(key.second) + ")");
        InteriorEdge e;
        e.vertex_a = key.first;
        e.vertex_b = key.second;
        const Side& p = sides[0].tri < sides[1].tri ? sides[0] : sides[1];
        const Side& q = sides[0].tri < sides[1].tri ? sides[1] : sides[0];
        e.tri_plus = p.tri;
        e.tri_minus = q.tri;
        e.free_vertex_plus = p.opposite;
        e.free_vertex_minus = q.opposite;
        e.length = (vertices[key.first] - vertices[key.second]).norm();
        if (!(e.length > 0.0)) throw MeshError("zero-length edge");
        edges.push_back(e);
    }
    return edges;
}

void TriMesh::finalize() {
    const long nt = num_triangles();
    element_centroids.resize(nt);
    element_areas.resize(nt);
    element_normals.resize(nt);
    for (long t = 0; t < nt; ++t) {
        const Vector3d& a = vertices[triangles[t][0]];
        const Vector3d& b = vertices[triangles[t][1]];
        const Vector3d& c = vertices[triangles[t][2]];
        element_centroids[t] = (a + b + c) / 3.0;
        Vector3d n = (b - a).cross(c - a);
        double n2 = n.norm();
        if (!(n2 > 0.0)) throw MeshError("degenerate triangle " + std::to_string(t));
        element_areas[t] = 0.5 * n2;
        element_normals[t] = n / n2;
    }
    edges = extract_edges(vertices, triangles);

    std::map<std::pair<int, int>, int> edge_id;
    for (int e = 0; e < static_cast<int>(edges.size()); ++e)
        edge_id[{edges[e].vertex_a, edges[e].vertex_b}] = e;
    triangle_edges.resize(nt);
    for (long t = 0; t < nt; ++t)
        for (int e = 0; e < 3; ++e) {
            auto key = std::minmax(triangles[t][e], triangles[t][(e + 1) % 3]);
            triangle_edges[t][e] = edge_id.at({key.first, key.second});
        }
    if (signed_volume() <= 0.0) throw MeshError("mesh orientation is inward (negative volume)");
}

// ---- constructors -----------------------------------------------------------

TriMesh make_cube(double side, int subdiv) {
    if (!(side > 0.0)) throw std::invalid_argument("make_cube: side must be positive");
    if (subdiv < 1) throw std::invalid_argument("make_cube: subdiv must be >= 1");
    const int n = subdiv;
    TriMesh m;
    // integer lattice keys on the surface keep shared face/edge vertices exact
    std::map<std::array<int, 3>, int> vid;
    auto vertex = [&](int ix, int iy, int iz) {
        auto it = vid.find({ix, iy, iz});
        if (it != vid.end()) return it->second;
        Vector3d p(side * (static_cast<double>(ix) / n - 0.5), side * (static_cast<double>(iy) / n - 0.5),
                   side * (static_cast<double>(iz) / n - 0.5));
        int id = static_cast<int>(m.vertices.size());
        m.vertices.push_back(p);
        vid[{ix, iy, iz}] = id;
        return id;
    };
    // face = (fixed axis, level, u axis, v axis); orientation flips on the
    // negative side so every normal points outward
    struct Face {
        int axis, level;
        bool flip;
    };
    const Face faces[6] = {{0, n, false}, {0, 0, true},  {1, n, false},
                           {1, 0, true},  {2, n, false}, {2, 0, true}};
    for (const auto& f : faces) {
        int ua = (f.axis + 1) % 3, va = (f.axis + 2) % 3;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                auto at = [&](int u, int v) {
                    int c[3];
                    c[f.axis] = f.level;
                    c[ua] = u;
                    c[va] = v;
                    return vertex(c[0], c[1], c[2]);
                };
                int v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
                if (!f.flip) {
                    m.triangles.push_back({v00, v10, v11});
                    m.triangles.push_back({v00, v11, v01});
                } else {
                    m.triangles.push_back({v00, v11, v10});
                    m.triangles.push_back({v00, v01, v11});
                }
            }
    }
    m.finalize();
    return m;
}

TriMesh make_sphere(double radius, int refinement) {
    if (!(radius > 0.0)) throw std::invalid_argument("make_sphere: radius must be positive");
    if (refinement < 0) throw std::invalid_argument("make_sphere: refinement must be >= 0");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vector3d> verts = {
        {-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : verts) v = v.normalized() * radius;
    std::vector<std::array<int, 3>> tris = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int level = 0; level < refinement; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find({key.first, key.second});
            if (it != midpoint.end()) return it->second;
            Vector3d p = ((verts[a] + verts[b]) * 0.5).normalized() * radius;
            int id = static_cast<int>(verts.size());
            verts.push_back(p);
            midpoint[{key.first, key.second}] = id;
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& tr : tris) {
            int ab = mid(tr[0], tr[1]), bc = mid(tr[1], tr[2]), ca = mid(tr[2], tr[0]);
            next.push_back({tr[0], ab, ca});
            next.push_back({tr[1], bc, ab});
            next.push_back({tr[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    TriMesh m;
    m.vertices = std::move(verts);
    m.triangles = std::move(tris);
    m.finalize();
    return m;
}

TriMesh make_cone(double radius, double height, int segments, int rings) {
    if (!(radius > 0.0) || !(height > 0.0))
        throw std::invalid_argument("make_cone: radius and height must be positive");
    if (segments < 3) throw std::invalid_argument("make_cone: segments must be >= 3");
    if (rings < 1) throw std::invalid_argument("make_cone: rings must be >= 1");
    TriMesh m;
    m.vertices.push_back({0.0, 0.0, height});  // apex
    m.vertices.push_back({0.0, 0.0, 0.0});     // base center
    // lateral rings walk down the slant; ring `rings` is the base rim
    auto ring_start = [&](int i) { return 2 + (i - 1) * segments; };  // lateral ring i = 1..rings
    for (int i = 1; i <= rings; ++i) {
        double f = static_cast<double>(i) / rings;
        for (int s = 0; s < segments; ++s) {
            double a = 2.0 * M_PI * s / segments;
            m.vertices.push_back({radius * f * std::cos(a), radius * f * std::sin(a), height * (1.0 - f)});
        }
    }
    // interior base rings at z = 0 (the rim is shared with the lateral wall)
    int base_start = static_cast<int>(m.vertices.size());
    for (int j = 1; j < rings; ++j) {
        double f = static_cast<double>(j) / rings;
        for (int s = 0; s < segments; ++s) {
            double a = 2.0 * M_PI * s / segments;
            m.vertices.push_back({radius * f * std::cos(a), radius * f * std::sin(a), 0.0});
        }
    }
    auto base_ring = [&](int j) {  // j = 1..rings, ring `rings` aliases the rim
        return j == rings ? ring_start(rings) : base_start + (j - 1) * segments;
    };
    auto wrap = [&](int start, int s) { return start + (s % segments); };

    for (int s = 0; s < segments; ++s)
        m.triangles.push_back({0, wrap(ring_start(1), s), wrap(ring_start(1), s + 1)});
    for (int i = 1; i < rings; ++i)
        for (int s = 0; s < segments; ++s) {
            int u0 = wrap(ring_start(i), s), u1 = wrap(ring_start(i), s + 1);
            int b0 = wrap(ring_start(i + 1), s), b1 = wrap(ring_start(i + 1), s + 1);
            m.triangles.push_back({b0, b1, u1});
            m.triangles.push_back({b0, u1, u0});
        }
    for (int s = 0; s < segments; ++s)
        m.triangles.push_back({1, wrap(base_ring(1), s + 1), wrap(base_ring(1), s)});
    for (int j = 1; j < rings; ++j)
        for (int s = 0; s < segments; ++s) {
            int i0 = wrap(base_ring(j), s), i1 = wrap(base_ring(j), s + 1);
            int o0 = wrap(base_ring(j + 1), s), o1 = wrap(base_ring(j + 1), s + 1);
            m.triangles.push_back({i0, o1, o0});
            m.triangles.push_back({i0, i1, o1});
        }
    m.finalize();
    return m;
}

TriMesh make_assembly(int segments, int wall_rings) {
    if (segments < 3 || wall_rings < 1) throw std::invalid_argument("make_assembly: bad tessellation");
    const double r = 0.1, h_cyl = 0.2, h_cone = 0.1;
    TriMesh m;
    // rings of the cylinder wall, bottom (z=0) to top (z=h_cyl)
    for (int ring = 0; ring <= wall_rings; ++ring) {
        double z = h_cyl * ring / wall_rings;
        for (int i = 0; i < segments; ++i) {
            double a = 2.0 * M_PI * i / segments;
            m.vertices.push_back({r * std::cos(a), r * std::sin(a), z});
        }
    }
    int apex = static_cast<int>(m.vertices.size());
    m.vertices.push_back({0.0, 0.0, h_cyl + h_cone});
    int base_center = static_cast<int>(m.vertices.size());
    m.vertices.push_back({0.0, 0.0, 0.0});

    auto rv = [&](int ring, int i) { return ring * segments + (i % segments); };
    for (int ring = 0; ring < wall_rings; ++ring)
        for (int i = 0; i < segments; ++i) {
            int a = rv(ring, i), b = rv(ring, i + 1), c = rv(ring + 1, i), d = rv(ring + 1, i + 1);
            m.triangles.push_back({a, b, d});
            m.triangles.push_back({a, d, c});
        }
    for (int i = 0; i < segments; ++i) {
        m.triangles.push_back({apex, rv(wall_rings, i), rv(wall_rings, i + 1)});   // cone nose
        m.triangles.push_back({base_center, rv(0, i + 1), rv(0, i)});              // base, -z
    }
    m.finalize();
    return m;
}

ad::CsrMatrix edge_adjacency(const TriMesh& m) {
    const long ne = m.num_edges();
    std::vector<std::vector<long>> nbrs(ne);
    for (long t = 0; t < m.num_triangles(); ++t) {
        const auto& es = m.triangle_edges[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j) nbrs[es[i]].push_back(es[j]);
    }
    ad::CsrMatrix a;
    a.rows = a.cols = ne;
    a.row_ptr.assign(ne + 1, 0);
    for (long e = 0; e < ne; ++e) {
        auto& v = nbrs[e];
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        a.row_ptr[e + 1] = a.row_ptr[e] + static_cast<long>(v.size());
        for (long n : v) {
            a.col_idx.push_back(n);
            a.vals.push_back(1.0);
        }
    }
    return a;
}

void write_obj(const TriMesh& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MeshError("cannot open " + path + " for writing");
    char buf[128];
    for (const auto& v : m.vertices) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const auto& t : m.triangles) out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

TriMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open " + path);
    TriMesh m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) throw MeshError("malformed vertex line: " + line);
            m.vertices.push_back({x, y, z});
        } else if (tag == "f") {
            long i, j, k;
            if (!(ss >> i >> j >> k)) throw MeshError("malformed face line: " + line);
            m.triangles.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1), static_cast<int>(k - 1)});
        }
    }
    m.finalize();
    return m;
}

std::uint64_t mesh_hash(const TriMesh& m) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& v : m.vertices) {
        double c[3] = {v.x(), v.y(), v.z()};
        mix(c, sizeof c);
    }
    for (const auto& t : m.triangles) mix(t.data(), sizeof(int) * 3);
    return h;
}

std::string mesh_hash_hex(const TriMesh& m) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mesh_hash(m)));
    return buf;
}

}  // namespace phykan::mesh
