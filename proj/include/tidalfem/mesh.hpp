#ifndef TIDALFEM_MESH_HPP
#define TIDALFEM_MESH_HPP

#include <algorithm>
#include <array>
#include <map>
#include <vector>

#include "tidalfem/errors.hpp"
#include "tidalfem/vec.hpp"

namespace tidalfem {

struct MeshStats {
  int num_vertices = 0;
  int num_edges = 0;
  int num_cells = 0;
  double h_max = 0.0;
  int euler_characteristic = 0;
};

// Conforming triangle mesh, either planar (dim == 2) or an embedded surface
// (dim == 3).  Edges are stored canonically as (v_min, v_max) sorted
// lexicographically, so edge ids are reproducible across rebuilds.  Cells are
// positively oriented: counterclockwise in the plane, outward-facing on the
// sphere.  cell_edge_signs[c][l] is +1 when cell c traverses local edge l in
// the canonical (ascending vertex id) direction, which for positively
// oriented cells coincides with its outward normal matching the canonical
// edge normal.  Immutable once built.
struct Mesh {
  int dim = 2;
  int geometry_degree = 1;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> cell_edges;
  std::vector<std::array<int, 3>> cell_edge_signs;
  // Geometry nodes per cell: [0..2] the vertices, [3..5] mid-edge nodes of
  // local edges 0..2 (only meaningful for geometry_degree == 2).
  std::vector<std::array<Vec3, 6>> geometry_nodes;
  std::vector<int> boundary_edges;
  // Incident cells per edge, second entry -1 on the boundary.
  std::vector<std::array<int, 2>> edge_cells;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_cells() const { return static_cast<int>(cells.size()); }
  bool closed() const { return boundary_edges.empty(); }
};

namespace detail {

// Local edge l of a cell runs from local vertex (l+1)%3 to (l+2)%3, i.e.
// opposite local vertex l.  Matches the reference element convention.
inline std::array<int, 2> local_edge_vertices(int l) {
  return {(l + 1) % 3, (l + 2) % 3};
}

}  // namespace detail

// Assembles connectivity for a list of triangles.  Cells get reoriented to
// positive orientation; for surface meshes the mid-edge geometry nodes are
// optionally pushed onto the unit sphere.
inline Mesh build_mesh_from_cells(std::vector<Vec3> vertices,
                                  std::vector<std::array<int, 3>> cells,
                                  int dim, int geometry_degree,
                                  bool project_midpoints_to_sphere = false) {
  if (dim != 2 && dim != 3) throw ValidationError("mesh dimension must be 2 or 3");
  if (geometry_degree != 1 && geometry_degree != 2)
    throw ValidationError("geometry degree must be 1 or 2");
  Mesh mesh;
  mesh.dim = dim;
  mesh.geometry_degree = geometry_degree;
  mesh.vertices = std::move(vertices);

  // Orient every cell positively before any edge bookkeeping.
  for (auto& cell : cells) {
    const Vec3& a = mesh.vertices[cell[0]];
    const Vec3& b = mesh.vertices[cell[1]];
    const Vec3& c = mesh.vertices[cell[2]];
    Vec3 n = cross(b - a, c - a);
    double orient;
    if (dim == 2) {
      orient = n.z;
    } else {
      Vec3 centroid = (1.0 / 3.0) * (a + b + c);
      orient = dot(n, centroid);
    }
    if (orient == 0.0) throw GeometryError("degenerate cell");
    if (orient < 0.0) std::swap(cell[1], cell[2]);
  }
  mesh.cells = std::move(cells);

  std::map<std::array<int, 2>, int> edge_ids;
  for (const auto& cell : mesh.cells) {
    for (int l = 0; l < 3; ++l) {
      auto lv = detail::local_edge_vertices(l);
      int a = cell[lv[0]], b = cell[lv[1]];
      edge_ids.emplace(std::array<int, 2>{std::min(a, b), std::max(a, b)}, 0);
    }
  }
  mesh.edges.reserve(edge_ids.size());
  for (auto& [key, id] : edge_ids) {
    id = static_cast<int>(mesh.edges.size());
    mesh.edges.push_back(key);
  }

  mesh.cell_edges.resize(mesh.cells.size());
  mesh.cell_edge_signs.resize(mesh.cells.size());
  mesh.edge_cells.assign(mesh.edges.size(), {-1, -1});
  std::vector<int> edge_count(mesh.edges.size(), 0);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    for (int l = 0; l < 3; ++l) {
      auto lv = detail::local_edge_vertices(l);
      int a = mesh.cells[c][lv[0]], b = mesh.cells[c][lv[1]];
      int e = edge_ids.at({std::min(a, b), std::max(a, b)});
      mesh.cell_edges[c][l] = e;
      mesh.cell_edge_signs[c][l] = (a < b) ? 1 : -1;
      if (edge_count[e] < 2) mesh.edge_cells[e][edge_count[e]] = c;
      ++edge_count[e];
    }
  }
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (edge_count[e] > 2) throw GeometryError("non-manifold edge");
    if (edge_count[e] == 1) mesh.boundary_edges.push_back(e);
  }

  mesh.geometry_nodes.resize(mesh.cells.size());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    auto& nodes = mesh.geometry_nodes[c];
    for (int k = 0; k < 3; ++k) nodes[k] = mesh.vertices[mesh.cells[c][k]];
    for (int l = 0; l < 3; ++l) {
      auto lv = detail::local_edge_vertices(l);
      Vec3 mid = 0.5 * (nodes[lv[0]] + nodes[lv[1]]);
      nodes[3 + l] = project_midpoints_to_sphere ? normalized(mid) : mid;
    }
  }
  return mesh;
}

// Unit square [0,1]^2, each grid quad split along its lower-left to
// upper-right diagonal.
inline Mesh build_rect_mesh(int nx, int ny) {
  if (nx < 1 || ny < 1) throw ValidationError("rect mesh needs nx, ny >= 1");
  std::vector<Vec3> vertices;
  vertices.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      vertices.push_back({double(i) / nx, double(j) / ny, 0.0});
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> cells;
  cells.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int ll = vid(i, j), lr = vid(i + 1, j), ur = vid(i + 1, j + 1), ul = vid(i, j + 1);
      cells.push_back({ll, lr, ur});
      cells.push_back({ll, ur, ul});
    }
  }
  return build_mesh_from_cells(std::move(vertices), std::move(cells), 2, 1, false);
}

// Icosahedron refined `level` times by edge midpoint subdivision, with every
// vertex radially projected to the unit sphere.  Vertices of level L are a
// prefix of the vertices of level L+1.
inline Mesh build_icosphere(int level, int geometry_degree = 1) {
  if (level < 0) throw ValidationError("icosphere level must be >= 0");
  if (level > 7) throw ResourceError("icosphere level capped at 7");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v = normalized(v);
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

  for (int l = 0; l < level; ++l) {
    std::map<std::array<int, 2>, int> midpoint;
    auto mid = [&](int a, int b) {
      std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      int id = static_cast<int>(verts.size());
      verts.push_back(normalized(0.5 * (verts[a] + verts[b])));
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(4 * faces.size());
    for (const auto& f : faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  return build_mesh_from_cells(std::move(verts), std::move(faces), 3,
                               geometry_degree, geometry_degree == 2);
}

inline MeshStats mesh_statistics(const Mesh& mesh) {
  MeshStats s;
  s.num_vertices = mesh.num_vertices();
  s.num_edges = mesh.num_edges();
  s.num_cells = mesh.num_cells();
  for (const auto& e : mesh.edges)
    s.h_max = std::max(s.h_max, norm(mesh.vertices[e[1]] - mesh.vertices[e[0]]));
  s.euler_characteristic = s.num_vertices - s.num_edges + s.num_cells;
  return s;
}

}  // namespace tidalfem

#endif
