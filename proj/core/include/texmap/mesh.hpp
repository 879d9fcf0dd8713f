#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace texmap {

using FaceIndex = std::uint32_t;
using Triangle = std::array<std::uint32_t, 3>;

// Indexed triangle mesh with per-face unit normals, winding (v1-v0)x(v2-v0).
// Immutable once built by make_mesh / load_mesh.
struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> faces;
  std::vector<Eigen::Vector3d> normals;

  std::size_t face_count() const { return faces.size(); }
  const Eigen::Vector3d& corner(FaceIndex f, int k) const { return vertices[faces[f][k]]; }
  Eigen::Vector3d centroid(FaceIndex f) const;
  double area(FaceIndex f) const;
};

// Squared parallelogram area at or below this is degenerate.
inline constexpr double kDegenerateAreaSq = 1e-12;

bool is_degenerate(const std::vector<Eigen::Vector3d>& vertices, const Triangle& face);

// Validates indices and degeneracy, computes normals. Throws InputError
// listing the offending face indices.
Mesh make_mesh(std::vector<Eigen::Vector3d> vertices, std::vector<Triangle> faces);

struct LoadOptions {
  bool drop_degenerate = false;
  double weld_eps = 0.0;  // 0 disables welding
};

struct LoadReport {
  std::vector<std::size_t> dropped_faces;  // indices in the triangulated input
  std::size_t welded_vertices = 0;
  std::vector<std::string> warnings;
};

// OBJ (v/vt/f, 1-based or negative indices, polygons fan-triangulated) or
// ASCII PLY, chosen by extension.
Mesh load_mesh(const std::filesystem::path& path, const LoadOptions& options = {},
               LoadReport* report = nullptr);

// Merges vertices closer than eps (Euclidean). The first vertex of a cluster
// in index order is the representative; unused vertices are removed.
std::pair<std::vector<Eigen::Vector3d>, std::vector<Triangle>> weld_vertices(
    const std::vector<Eigen::Vector3d>& vertices, const std::vector<Triangle>& faces,
    double eps, std::size_t* merged = nullptr);

// Raw OBJ content, kept at the granularity needed to reload textured output.
struct ObjDocument {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector2d> texcoords;
  std::vector<Triangle> faces;
  std::vector<std::array<std::int64_t, 3>> face_texcoords;  // -1 when absent
  std::vector<int> face_material;                           // index into materials, -1 none
  std::vector<std::string> materials;
  std::vector<std::string> mtllibs;
};

ObjDocument parse_obj(const std::filesystem::path& path);

// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

// Plain OBJ (v and f records only).
void write_obj(const std::filesystem::path& path, const Mesh& mesh);

// Faces sharing exactly two vertex indices. Edges are stored with first < second,
// sorted; neighbor lists are sorted ascending.
struct AdjacencyGraph {
  std::vector<std::pair<FaceIndex, FaceIndex>> edges;
  std::vector<std::vector<FaceIndex>> neighbors;

  std::size_t face_count() const { return neighbors.size(); }
};

AdjacencyGraph build_adjacency(const Mesh& mesh);

// Graph over abstract nodes from an undirected edge list (duplicates and
// self-loops rejected with InvariantError).
AdjacencyGraph graph_from_edges(std::size_t node_count,
                                std::vector<std::pair<FaceIndex, FaceIndex>> edges);

}  // namespace texmap
