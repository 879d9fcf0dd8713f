#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "texmap/error.hpp"
#include "texmap/mesh.hpp"
#include "texmap/synth.hpp"

namespace texmap {
namespace {

using testing::TempDir;
using testing::write_text;

// Pairs of faces sharing exactly two vertex indices, by exhaustive comparison.
std::set<std::pair<FaceIndex, FaceIndex>> brute_force_edges(const Mesh& mesh) {
  std::set<std::pair<FaceIndex, FaceIndex>> edges;
  for (FaceIndex i = 0; i < mesh.face_count(); ++i) {
    for (FaceIndex j = i + 1; j < mesh.face_count(); ++j) {
      int shared = 0;
      for (auto a : mesh.faces[i]) {
        for (auto b : mesh.faces[j]) shared += a == b;
      }
      if (shared == 2) edges.emplace(i, j);
    }
  }
  return edges;
}

TEST(Mesh, SingleTriangleNormal) {
  TempDir dir;
  const Mesh m = load_mesh(write_text(dir / "t.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"));
  ASSERT_EQ(m.face_count(), 1u);
  EXPECT_EQ(m.normals[0], Eigen::Vector3d(0, 0, 1));
}

TEST(Mesh, QuadIsFanTriangulated) {
  TempDir dir;
  const Mesh m =
      load_mesh(write_text(dir / "q.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"));
  ASSERT_EQ(m.face_count(), 2u);
  EXPECT_EQ(m.faces[0], (Triangle{0, 1, 2}));
  EXPECT_EQ(m.faces[1], (Triangle{0, 2, 3}));
}

TEST(Mesh, ObjIndexFormsAndNegativeIndices) {
  TempDir dir;
  const Mesh m = load_mesh(write_text(dir / "n.obj",
                                      "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\n"
                                      "vn 0 0 1\nf -3/1/1 -2/2/1 -1/3/1\n"));
  ASSERT_EQ(m.face_count(), 1u);
  EXPECT_EQ(m.faces[0], (Triangle{0, 1, 2}));
}

TEST(Mesh, ParseErrorCarriesLineNumber) {
  TempDir dir;
  const auto path = write_text(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 x 0\nf 1 2 3\n");
  try {
    load_mesh(path);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(Mesh, IndexOutOfRangeIsInputError) {
  TempDir dir;
  EXPECT_THROW(load_mesh(write_text(dir / "r.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n")),
               InputError);
}

TEST(Mesh, DegenerateFacesListedOrDropped) {
  TempDir dir;
  const auto path = write_text(dir / "d.obj",
                               "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\n"
                               "f 1 2 3\nf 1 2 4\nf 1 3 2\nf 2 2 3\n");
  try {
    load_mesh(path);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find('1'), std::string::npos) << what;
    EXPECT_NE(what.find('3'), std::string::npos) << what;
  }
  LoadReport report;
  const Mesh m = load_mesh(path, {.drop_degenerate = true}, &report);
  EXPECT_EQ(m.face_count(), 2u);
  EXPECT_EQ(report.dropped_faces, (std::vector<std::size_t>{1, 3}));
  EXPECT_FALSE(report.warnings.empty());
}

TEST(Mesh, AsciiPly) {
  TempDir dir;
  const auto path = write_text(dir / "m.ply",
                               "ply\nformat ascii 1.0\ncomment test\n"
                               "element vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
                               "property uchar red\n"
                               "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
                               "0 0 0 1\n1 0 0 2\n1 1 0 3\n0 1 0 4\n4 0 1 2 3\n");
  const Mesh m = load_mesh(path);
  ASSERT_EQ(m.face_count(), 2u);
  EXPECT_EQ(m.vertices[2], Eigen::Vector3d(1, 1, 0));
  EXPECT_EQ(m.faces[1], (Triangle{0, 2, 3}));
}

TEST(Mesh, NormalsAreUnit) {
  const Mesh m = make_icosphere(2);
  for (const auto& n : m.normals) EXPECT_NEAR(n.norm(), 1.0, 1e-9);
}

TEST(Adjacency, CubeMatchesBruteForce) {
  const Mesh cube = make_cube();
  ASSERT_EQ(cube.face_count(), 12u);
  const AdjacencyGraph g = build_adjacency(cube);
  const auto oracle = brute_force_edges(cube);
  EXPECT_EQ(oracle.size(), 18u);
  using EdgeSet = std::set<std::pair<FaceIndex, FaceIndex>>;
  EXPECT_EQ(EdgeSet(g.edges.begin(), g.edges.end()), oracle);
}

TEST(Adjacency, CubeFromObjFile) {
  TempDir dir;
  write_obj(dir / "cube.obj", make_cube());
  const Mesh m = load_mesh(dir / "cube.obj");
  EXPECT_EQ(m.face_count(), 12u);
  EXPECT_EQ(build_adjacency(m).edges.size(), 18u);
}

TEST(Adjacency, SmallCases) {
  const std::vector<Eigen::Vector3d> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  EXPECT_TRUE(build_adjacency(make_mesh(v, {{0, 1, 2}})).edges.empty());
  const AdjacencyGraph two = build_adjacency(make_mesh(v, {{0, 1, 2}, {1, 3, 2}}));
  ASSERT_EQ(two.edges.size(), 1u);
  EXPECT_EQ(two.edges[0], (std::pair<FaceIndex, FaceIndex>{0, 1}));
  EXPECT_EQ(two.neighbors[0], (std::vector<FaceIndex>{1}));
  EXPECT_EQ(two.neighbors[1], (std::vector<FaceIndex>{0}));
}

TEST(Adjacency, ClosedManifoldHasOneAndAHalfEdgesPerFace) {
  for (int s = 0; s <= 3; ++s) {
    const Mesh m = make_icosphere(s);
    EXPECT_EQ(build_adjacency(m).edges.size() * 2, m.face_count() * 3) << "subdiv " << s;
  }
}

TEST(Adjacency, NonManifoldEdgeCouplesAllPairs) {
  const std::vector<Eigen::Vector3d> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
  const AdjacencyGraph g = build_adjacency(make_mesh(v, {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}}));
  EXPECT_EQ(g.edges.size(), 3u);
  for (const auto& n : g.neighbors) EXPECT_EQ(n.size(), 2u);
}

TEST(Adjacency, DuplicateFacesAreNotAdjacent) {
  const std::vector<Eigen::Vector3d> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  EXPECT_TRUE(build_adjacency(make_mesh(v, {{0, 1, 2}, {0, 1, 2}})).edges.empty());
}

TEST(Adjacency, SymmetricAndNoSelfEdges) {
  const Mesh m = make_icosphere(2);
  const AdjacencyGraph g = build_adjacency(m);
  for (FaceIndex f = 0; f < g.face_count(); ++f) {
    for (FaceIndex n : g.neighbors[f]) {
      EXPECT_NE(n, f);
      EXPECT_TRUE(std::ranges::binary_search(g.neighbors[n], f));
    }
  }
}

TEST(Adjacency, DuplicatedVerticesBreakAdjacencyUntilWelded) {
  TempDir dir;
  const auto path = write_text(dir / "split.obj",
                               "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n"
                               "f 1 2 3\nf 4 6 5\n");
  EXPECT_TRUE(build_adjacency(load_mesh(path)).edges.empty());
  LoadReport report;
  const Mesh welded = load_mesh(path, {.weld_eps = 1e-6}, &report);
  EXPECT_EQ(report.welded_vertices, 2u);
  EXPECT_EQ(welded.vertices.size(), 4u);
  EXPECT_EQ(build_adjacency(welded).edges.size(), 1u);
}

TEST(Adjacency, GraphFromEdgesRejectsBadInput) {
  EXPECT_THROW(graph_from_edges(3, {{0, 0}}), InvariantError);
  EXPECT_THROW(graph_from_edges(3, {{0, 1}, {1, 0}}), InvariantError);
  EXPECT_THROW(graph_from_edges(3, {{0, 3}}), InvariantError);
  const AdjacencyGraph g = graph_from_edges(3, {{2, 1}, {0, 1}});
  EXPECT_EQ(g.edges, (std::vector<std::pair<FaceIndex, FaceIndex>>{{0, 1}, {1, 2}}));
}

TEST(Mesh, WriteObjRoundTripIsBitExact) {
  TempDir dir;
  std::vector<Eigen::Vector3d> v = {{0.1, 1.0 / 3.0, -2.5e-7}, {1e10, 0.2, 0.3}, {0, 1, 0.7071067811865476}};
  const Mesh m = make_mesh(v, {{0, 1, 2}});
  write_obj(dir / "m.obj", m);
  const Mesh back = load_mesh(dir / "m.obj");
  EXPECT_EQ(back.vertices, m.vertices);
  EXPECT_EQ(back.faces, m.faces);
}

}  // namespace
}  // namespace texmap
