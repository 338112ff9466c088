#ifndef TIDALFEM_VTK_HPP
#define TIDALFEM_VTK_HPP

#include <cstdio>
#include <string>

#include "tidalfem/function_space.hpp"

namespace tidalfem {

// Legacy ASCII POLYDATA triangles.  Optional cell data: centroid-sampled
// velocity vectors and surface elevation.
inline void write_vtk(const std::string& path, const Mesh& mesh, const Field* u = nullptr,
                      const Field* eta = nullptr) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw ResourceError("cannot open " + path + " for writing");
  std::fprintf(fp, "# vtk DataFile Version 3.0\n");
  std::fprintf(fp, "tidalfem surface fields\n");
  std::fprintf(fp, "ASCII\n");
  std::fprintf(fp, "DATASET POLYDATA\n");
  std::fprintf(fp, "POINTS %d double\n", mesh.num_vertices());
  for (const auto& v : mesh.vertices) std::fprintf(fp, "%.9g %.9g %.9g\n", v.x, v.y, v.z);
  std::fprintf(fp, "POLYGONS %d %d\n", mesh.num_cells(), 4 * mesh.num_cells());
  for (const auto& c : mesh.cells) std::fprintf(fp, "3 %d %d %d\n", c[0], c[1], c[2]);
  if (u || eta) {
    std::fprintf(fp, "CELL_DATA %d\n", mesh.num_cells());
    const double xc = 1.0 / 3.0;
    if (u) {
      std::fprintf(fp, "VECTORS velocity double\n");
      for (int c = 0; c < mesh.num_cells(); ++c) {
        Vec3 val = evaluate_vector_field(*u, c, xc, xc);
        std::fprintf(fp, "%.9g %.9g %.9g\n", val.x, val.y, val.z);
      }
    }
    if (eta) {
      std::fprintf(fp, "SCALARS elevation double 1\nLOOKUP_TABLE default\n");
      for (int c = 0; c < mesh.num_cells(); ++c)
        std::fprintf(fp, "%.9g\n", evaluate_scalar_field(*eta, c, xc, xc));
    }
  }
  std::fclose(fp);
}

}  // namespace tidalfem

#endif
