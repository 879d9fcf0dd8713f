#include "texmap/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include <Eigen/Geometry>

#include "texmap/error.hpp"

namespace texmap {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view token, T& value) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  return ec == std::errc() && ptr == end;
}

// Resolves a 1-based (or negative, relative) OBJ index against count.
std::int64_t resolve_obj_index(std::int64_t raw, std::size_t count) {
  if (raw > 0) return raw - 1;
  if (raw < 0) return static_cast<std::int64_t>(count) + raw;
  return -1;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

struct RawMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> faces;
};

RawMesh parse_ply(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  std::size_t n = 0;
  if (lines.empty() || split_ws(lines[0]).empty() || split_ws(lines[0])[0] != "ply") {
    throw InputError(where(path, 1) + "missing 'ply' magic");
  }
  bool header_done = false;
  for (n = 1; n < lines.size(); ++n) {
    const auto tok = split_ws(lines[n]);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") {
        throw InputError(where(path, n + 1) + "only ASCII PLY is supported");
      }
    } else if (tok[0] == "element") {
      Element e;
      if (tok.size() != 3 || !parse_number(tok[2], e.count)) {
        throw InputError(where(path, n + 1) + "malformed element line");
      }
      e.name = std::string(tok[1]);
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty() || tok.size() < 3) {
        throw InputError(where(path, n + 1) + "property outside element");
      }
      elements.back().properties.emplace_back(tok.back());
    } else if (tok[0] == "end_header") {
      header_done = true;
      ++n;
      break;
    } else {
      throw InputError(where(path, n + 1) + "unexpected header keyword '" +
                       std::string(tok[0]) + "'");
    }
  }
  if (!header_done) throw InputError(where(path, n) + "missing end_header");

  RawMesh mesh;
  for (const Element& e : elements) {
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t p = 0; p < e.properties.size(); ++p) {
      if (e.properties[p] == "x") ix = static_cast<int>(p);
      if (e.properties[p] == "y") iy = static_cast<int>(p);
      if (e.properties[p] == "z") iz = static_cast<int>(p);
    }
    for (std::size_t k = 0; k < e.count; ++k, ++n) {
      if (n >= lines.size()) throw InputError(where(path, n) + "unexpected end of file");
      const auto tok = split_ws(lines[n]);
      if (e.name == "vertex") {
        if (ix < 0 || iy < 0 || iz < 0) {
          throw InputError(where(path, n + 1) + "vertex element lacks x/y/z");
        }
        Eigen::Vector3d v;
        const int idx[3] = {ix, iy, iz};
        for (int c = 0; c < 3; ++c) {
          if (static_cast<std::size_t>(idx[c]) >= tok.size() || !parse_number(tok[idx[c]], v[c])) {
            throw InputError(where(path, n + 1) + "malformed vertex");
          }
        }
        mesh.vertices.push_back(v);
      } else if (e.name == "face") {
        std::size_t count = 0;
        if (tok.empty() || !parse_number(tok[0], count) || tok.size() < count + 1 || count < 3) {
          throw InputError(where(path, n + 1) + "malformed face");
        }
        std::vector<std::uint32_t> poly(count);
        for (std::size_t c = 0; c < count; ++c) {
          std::int64_t value = 0;
          if (!parse_number(tok[c + 1], value) || value < 0) {
            throw InputError(where(path, n + 1) + "malformed face index");
          }
          poly[c] = static_cast<std::uint32_t>(value);
        }
        for (std::size_t c = 1; c + 1 < count; ++c) {
          mesh.faces.push_back({poly[0], poly[c], poly[c + 1]});
        }
      }
    }
  }
  return mesh;
}

}  // namespace

Eigen::Vector3d Mesh::centroid(FaceIndex f) const {
  return (corner(f, 0) + corner(f, 1) + corner(f, 2)) / 3.0;
}

double Mesh::area(FaceIndex f) const {
  return 0.5 * (corner(f, 1) - corner(f, 0)).cross(corner(f, 2) - corner(f, 0)).norm();
}

bool is_degenerate(const std::vector<Eigen::Vector3d>& vertices, const Triangle& face) {
  if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) return true;
  const Eigen::Vector3d n =
      (vertices[face[1]] - vertices[face[0]]).cross(vertices[face[2]] - vertices[face[0]]);
  return n.squaredNorm() <= kDegenerateAreaSq;
}

Mesh make_mesh(std::vector<Eigen::Vector3d> vertices, std::vector<Triangle> faces) {
  std::vector<std::size_t> bad;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (std::uint32_t idx : faces[f]) {
      if (idx >= vertices.size()) {
        throw InputError("face " + std::to_string(f) + " references vertex " +
                         std::to_string(idx) + " but mesh has " +
                         std::to_string(vertices.size()) + " vertices");
      }
    }
    if (is_degenerate(vertices, faces[f])) bad.push_back(f);
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << bad.size() << " degenerate face(s):";
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg << ' ' << bad[i];
    if (bad.size() > 20) msg << " ...";
    throw InputError(msg.str());
  }

  Mesh mesh;
  mesh.normals.reserve(faces.size());
  for (const Triangle& t : faces) {
    mesh.normals.push_back(
        (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).normalized());
  }
  mesh.vertices = std::move(vertices);
  mesh.faces = std::move(faces);
  return mesh;
}

std::pair<std::vector<Eigen::Vector3d>, std::vector<Triangle>> weld_vertices(
    const std::vector<Eigen::Vector3d>& vertices, const std::vector<Triangle>& faces,
    double eps, std::size_t* merged) {
  std::vector<std::uint32_t> rep(vertices.size());
  std::vector<std::uint32_t> reps;
  struct CellHash {
    std::size_t operator()(const Eigen::Vector3i& c) const {
      std::size_t h = 1469598103934665603ull;
      for (int i = 0; i < 3; ++i) h = (h ^ static_cast<std::size_t>(c[i])) * 1099511628211ull;
      return h;
    }
  };
  std::unordered_map<Eigen::Vector3i, std::vector<std::uint32_t>, CellHash> grid;
  const auto cell_of = [eps](const Eigen::Vector3d& p) {
    return Eigen::Vector3i(static_cast<int>(std::floor(p.x() / eps)),
                           static_cast<int>(std::floor(p.y() / eps)),
                           static_cast<int>(std::floor(p.z() / eps)));
  };
  std::size_t count = 0;
  for (std::uint32_t v = 0; v < vertices.size(); ++v) {
    const Eigen::Vector3i c = cell_of(vertices[v]);
    std::int64_t found = -1;
    for (int dz = -1; dz <= 1 && found < 0; ++dz) {
      for (int dy = -1; dy <= 1 && found < 0; ++dy) {
        for (int dx = -1; dx <= 1 && found < 0; ++dx) {
          auto it = grid.find(c + Eigen::Vector3i(dx, dy, dz));
          if (it == grid.end()) continue;
          for (std::uint32_t r : it->second) {
            if ((vertices[r] - vertices[v]).norm() <= eps) {
              found = r;
              break;
            }
          }
        }
      }
    }
    if (found >= 0) {
      rep[v] = static_cast<std::uint32_t>(found);
      ++count;
    } else {
      rep[v] = v;
      grid[c].push_back(v);
      reps.push_back(v);
    }
  }
  std::vector<std::uint32_t> compact(vertices.size(), 0);
  std::vector<Eigen::Vector3d> out_vertices;
  out_vertices.reserve(reps.size());
  for (std::uint32_t r : reps) {
    compact[r] = static_cast<std::uint32_t>(out_vertices.size());
    out_vertices.push_back(vertices[r]);
  }
  std::vector<Triangle> out_faces;
  out_faces.reserve(faces.size());
  for (const Triangle& t : faces) {
    out_faces.push_back({compact[rep[t[0]]], compact[rep[t[1]]], compact[rep[t[2]]]});
  }
  if (merged) *merged = count;
  return {std::move(out_vertices), std::move(out_faces)};
}

ObjDocument parse_obj(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  ObjDocument doc;
  int material = -1;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto tok = split_ws(lines[n]);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "v") {
      Eigen::Vector3d v;
      if (tok.size() < 4 || !parse_number(tok[1], v.x()) || !parse_number(tok[2], v.y()) ||
          !parse_number(tok[3], v.z())) {
        throw InputError(where(path, n + 1) + "malformed vertex");
      }
      doc.positions.push_back(v);
    } else if (tok[0] == "vt") {
      Eigen::Vector2d t;
      if (tok.size() < 3 || !parse_number(tok[1], t.x()) || !parse_number(tok[2], t.y())) {
        throw InputError(where(path, n + 1) + "malformed texture coordinate");
      }
      doc.texcoords.push_back(t);
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw InputError(where(path, n + 1) + "face needs at least 3 vertices");
      std::vector<std::int64_t> pv, pt;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view item = tok[k];
        const std::size_t slash = item.find('/');
        std::int64_t raw = 0;
        if (!parse_number(item.substr(0, slash), raw)) {
          throw InputError(where(path, n + 1) + "malformed face index '" + std::string(item) + "'");
        }
        const std::int64_t vi = resolve_obj_index(raw, doc.positions.size());
        if (vi < 0 || vi >= static_cast<std::int64_t>(doc.positions.size())) {
          throw InputError(where(path, n + 1) + "vertex index out of range");
        }
        std::int64_t ti = -1;
        if (slash != std::string_view::npos) {
          const std::size_t slash2 = item.find('/', slash + 1);
          const std::string_view t = item.substr(slash + 1, slash2 == std::string_view::npos
                                                                ? std::string_view::npos
                                                                : slash2 - slash - 1);
          if (!t.empty()) {
            if (!parse_number(t, raw)) {
              throw InputError(where(path, n + 1) + "malformed texture index");
            }
            ti = resolve_obj_index(raw, doc.texcoords.size());
            if (ti < 0 || ti >= static_cast<std::int64_t>(doc.texcoords.size())) {
              throw InputError(where(path, n + 1) + "texture index out of range");
            }
          }
        }
        pv.push_back(vi);
        pt.push_back(ti);
      }
      for (std::size_t k = 1; k + 1 < pv.size(); ++k) {
        doc.faces.push_back({static_cast<std::uint32_t>(pv[0]), static_cast<std::uint32_t>(pv[k]),
                             static_cast<std::uint32_t>(pv[k + 1])});
        doc.face_texcoords.push_back({pt[0], pt[k], pt[k + 1]});
        doc.face_material.push_back(material);
      }
    } else if (tok[0] == "usemtl" && tok.size() >= 2) {
      const std::string name(tok[1]);
      auto it = std::find(doc.materials.begin(), doc.materials.end(), name);
      material = static_cast<int>(it - doc.materials.begin());
      if (it == doc.materials.end()) doc.materials.push_back(name);
    } else if (tok[0] == "mtllib" && tok.size() >= 2) {
      doc.mtllibs.emplace_back(tok[1]);
    }
    // vn, o, g, s and unknown records are ignored.
  }
  return doc;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_obj(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const Eigen::Vector3d& v : mesh.vertices) {
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
        << format_double(v.z()) << '\n';
  }
  for (const Triangle& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  if (!out) throw InputError("failed writing " + path.string());
}

Mesh load_mesh(const std::filesystem::path& path, const LoadOptions& options,
               LoadReport* report) {
  if (!std::filesystem::exists(path)) throw InputError("mesh file not found: " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });

  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> faces;
  if (ext == ".obj") {
    ObjDocument doc = parse_obj(path);
    vertices = std::move(doc.positions);
    faces = std::move(doc.faces);
  } else if (ext == ".ply") {
    RawMesh raw = parse_ply(path);
    vertices = std::move(raw.vertices);
    faces = std::move(raw.faces);
  } else {
    throw InputError("unsupported mesh format '" + ext + "' (expected .obj or .ply)");
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (std::uint32_t idx : faces[f]) {
      if (idx >= vertices.size()) {
        throw InputError("face " + std::to_string(f) + " references missing vertex " +
                         std::to_string(idx));
      }
    }
  }

  LoadReport local;
  LoadReport& rep = report ? *report : local;
  if (options.weld_eps > 0.0) {
    auto [wv, wf] = weld_vertices(vertices, faces, options.weld_eps, &rep.welded_vertices);
    vertices = std::move(wv);
    faces = std::move(wf);
  }
  if (options.drop_degenerate) {
    std::vector<Triangle> kept;
    kept.reserve(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (is_degenerate(vertices, faces[f])) {
        rep.dropped_faces.push_back(f);
      } else {
        kept.push_back(faces[f]);
      }
    }
    if (!rep.dropped_faces.empty()) {
      rep.warnings.push_back("dropped " + std::to_string(rep.dropped_faces.size()) +
                             " degenerate face(s)");
    }
    faces = std::move(kept);
  }
  return make_mesh(std::move(vertices), std::move(faces));
}

AdjacencyGraph graph_from_edges(std::size_t node_count,
                                std::vector<std::pair<FaceIndex, FaceIndex>> edges) {
  for (auto& e : edges) {
    if (e.first == e.second) throw InvariantError("self-edge in adjacency graph");
    if (e.first >= node_count || e.second >= node_count) {
      throw InvariantError("adjacency edge references missing node");
    }
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw InvariantError("duplicate adjacency edge");
  }
  AdjacencyGraph graph;
  graph.neighbors.resize(node_count);
  for (const auto& [a, b] : edges) {
    graph.neighbors[a].push_back(b);
    graph.neighbors[b].push_back(a);
  }
  for (auto& list : graph.neighbors) std::sort(list.begin(), list.end());
  graph.edges = std::move(edges);
  return graph;
}

AdjacencyGraph build_adjacency(const Mesh& mesh) {
  // (edge key, face) records; faces sharing a key share that vertex pair.
  std::vector<std::pair<std::uint64_t, FaceIndex>> records;
  records.reserve(mesh.faces.size() * 3);
  for (FaceIndex f = 0; f < mesh.faces.size(); ++f) {
    const Triangle& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      std::uint64_t a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      records.emplace_back((a << 32) | b, f);
    }
  }
  std::sort(records.begin(), records.end());

  const auto shared = [&](FaceIndex f, FaceIndex g) {
    int count = 0;
    for (std::uint32_t a : mesh.faces[f]) {
      for (std::uint32_t b : mesh.faces[g]) count += (a == b);
    }
    return count;
  };

  std::vector<std::pair<FaceIndex, FaceIndex>> edges;
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    while (j < records.size() && records[j].first == records[i].first) ++j;
    for (std::size_t p = i; p < j; ++p) {
      for (std::size_t q = p + 1; q < j; ++q) {
        FaceIndex f = records[p].second, g = records[q].second;
        if (f == g) continue;
        if (shared(f, g) == 2) edges.emplace_back(std::min(f, g), std::max(f, g));
      }
    }
    i = j;
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return graph_from_edges(mesh.faces.size(), std::move(edges));
}

}  // namespace texmap
