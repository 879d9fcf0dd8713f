#include "texmap/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>

#include <openssl/evp.h>

#include "texmap/error.hpp"
#include "texmap/parallel.hpp"
#include "texmap/visibility.hpp"

namespace texmap {

namespace {

template <typename Fn>
auto in_stage(Stage stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const InputError& e) {
    throw StageError(stage, false, e.what());
  } catch (const InvariantError& e) {
    throw StageError(stage, true, e.what());
  }
}

class StageClock {
 public:
  explicit StageClock(nlohmann::json& timings) : timings_(timings) {}

  template <typename Fn>
  auto run(Stage stage, Fn&& fn) -> decltype(fn()) {
    const auto start = std::chrono::steady_clock::now();
    struct Record {
      StageClock* self;
      Stage stage;
      std::chrono::steady_clock::time_point start;
      ~Record() {
        const std::chrono::duration<double, std::milli> ms =
            std::chrono::steady_clock::now() - start;
        auto& slot = self->timings_[std::string(stage_name(stage))];
        slot = (slot.is_number() ? slot.get<double>() : 0.0) + ms.count();
      }
    } record{this, stage, start};
    return in_stage(stage, std::forward<Fn>(fn));
  }

 private:
  nlohmann::json& timings_;
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw InvariantError("SHA-256 initialisation failed");
    }
  }
  void update(const void* data, std::size_t n) {
    if (n > 0 && EVP_DigestUpdate(ctx_.get(), data, n) != 1) {
      throw InvariantError("SHA-256 update failed");
    }
  }
  void update(std::string_view s) {
    const std::uint64_t n = s.size();
    update(&n, sizeof(n));
    update(s.data(), s.size());
  }
  template <typename T>
  void pod(const T& v) { update(&v, sizeof(T)); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw InvariantError("SHA-256 final failed");
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof(buf), "%02x", md[i]);
      out += buf;
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::string input_digest(const Mesh& mesh, std::span<const ViewImage> views) {
  Sha256 h;
  h.update("texmap-inputs-1");
  h.pod(mesh.vertices.size());
  for (const auto& v : mesh.vertices) h.update(v.data(), 3 * sizeof(double));
  h.pod(mesh.faces.size());
  h.update(mesh.faces.data(), mesh.faces.size() * sizeof(Triangle));
  h.pod(views.size());
  for (const ViewImage& v : views) {
    const PinholeCamera& c = v.camera;
    h.pod(v.id);
    for (double x : {c.fx, c.fy, c.cx, c.cy}) h.pod(x);
    h.update(c.R.data(), 9 * sizeof(double));
    h.update(c.t.data(), 3 * sizeof(double));
    h.pod(c.width);
    h.pod(c.height);
    const auto px = v.pixels.data();
    h.update(px.data(), px.size() * sizeof(Rgb8));
  }
  return h.hex();
}

nlohmann::json quality_to_json(const QualityTable& t) {
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& entries : t.faces) {
    nlohmann::json list = nlohmann::json::array();
    for (const QualityEntry& e : entries) {
      list.push_back({e.view_id, e.view_index, e.area, e.omega, e.quality, e.mean_color.x(),
                      e.mean_color.y(), e.mean_color.z()});
    }
    faces.push_back(std::move(list));
  }
  return faces;
}

QualityTable quality_from_json(const nlohmann::json& j) {
  QualityTable t;
  for (const auto& list : j) {
    auto& entries = t.faces.emplace_back();
    for (const auto& e : list) {
      QualityEntry q;
      q.view_id = e[0].get<int>();
      q.view_index = e[1].get<std::size_t>();
      q.area = e[2].get<double>();
      q.omega = e[3].get<double>();
      q.quality = e[4].get<double>();
      q.mean_color = {e[5].get<double>(), e[6].get<double>(), e[7].get<double>()};
      entries.push_back(q);
    }
  }
  return t;
}

nlohmann::json candidates_to_json(const CandidateSet& c) {
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& labels : c.faces) {
    nlohmann::json list = nlohmann::json::array();
    for (const Label& l : labels) list.push_back({l.view_id, l.cost});
    faces.push_back(std::move(list));
  }
  return faces;
}

CandidateSet candidates_from_json(const nlohmann::json& j) {
  CandidateSet c;
  for (const auto& list : j) {
    auto& labels = c.faces.emplace_back();
    for (const auto& l : list) labels.push_back({l[0].get<int>(), l[1].get<double>()});
  }
  return c;
}

std::optional<nlohmann::json> cache_read(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // a corrupt entry is a miss
  }
}

void cache_write(const std::filesystem::path& file, const nlohmann::json& j) {
  std::error_code ec;
  std::filesystem::create_directories(file.parent_path(), ec);
  const std::filesystem::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write cache entry " + tmp.string());
    out << j.dump();
  }
  std::filesystem::rename(tmp, file, ec);
  if (ec) throw InputError("cannot write cache entry " + file.string());
}

std::string view_file(const char* prefix, int id) {
  char name[48];
  std::snprintf(name, sizeof(name), "%s_%04d.png", prefix, id);
  return name;
}

void create_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir.string());
}

struct Analysis {
  std::vector<ViewVisibility> visibility;
  QualityTable quality;
  CandidateSet candidates;
};

Analysis analyze(const Mesh& mesh, std::span<const ViewImage> views, const PipelineConfig& cfg,
                 StageClock& clock, nlohmann::json& report) {
  const int workers = resolve_workers(cfg.workers);
  Analysis a;
  std::vector<DepthBuffer> depths;
  a.visibility = clock.run(Stage::kVisibility, [&] {
    auto vis = compute_visibility(mesh, views, cfg.depth_bias, workers,
                                  cfg.dump.depth_dir.empty() ? nullptr : &depths);
    if (!cfg.dump.depth_dir.empty()) {
      create_dir(cfg.dump.depth_dir);
      for (std::size_t i = 0; i < views.size(); ++i) {
        write_depth_png(cfg.dump.depth_dir / view_file("depth", views[i].id), depths[i]);
      }
    }
    return vis;
  });

  std::string digest;
  std::filesystem::path quality_file, candidates_file;
  if (!cfg.cache_dir.empty()) {
    digest = input_digest(mesh, views);
    Sha256 qh;
    qh.update(digest);
    qh.pod(cfg.depth_bias);
    qh.pod(cfg.meanshift_threshold);
    qh.pod(cfg.meanshift_iters);
    const std::string qkey = qh.hex();
    Sha256 ch;
    ch.update(qkey);
    ch.pod(cfg.top_n);
    ch.pod(cfg.lbp_iters);
    ch.pod(cfg.lambda);
    ch.pod(cfg.lbp_damping);
    ch.pod(cfg.ratio);
    quality_file = cfg.cache_dir / ("quality_" + qkey + ".json");
    candidates_file = cfg.cache_dir / ("candidates_" + ch.hex() + ".json");
  }
  const auto cache_state = [&](bool hit) { return cfg.cache_dir.empty() ? "off" : hit ? "hit" : "miss"; };

  bool quality_hit = false;
  a.quality = clock.run(Stage::kQuality, [&] {
    if (!quality_file.empty()) {
      if (auto j = cache_read(quality_file)) {
        QualityTable t = quality_from_json(*j);
        if (t.faces.size() == mesh.face_count()) {
          quality_hit = true;
          return t;
        }
      }
    }
    ConsistencyParams params;
    params.threshold = cfg.meanshift_threshold;
    params.max_iterations = cfg.meanshift_iters;
    QualityTable t = compute_quality(mesh.face_count(), views, a.visibility, params, workers);
    if (!quality_file.empty()) cache_write(quality_file, quality_to_json(t));
    return t;
  });
  if (!cfg.dump.quality_csv.empty()) write_quality_csv(cfg.dump.quality_csv, a.quality);

  bool candidates_hit = false;
  a.candidates = clock.run(Stage::kMrf, [&] {
    if (!candidates_file.empty()) {
      if (auto j = cache_read(candidates_file)) {
        CandidateSet c = candidates_from_json(*j);
        if (c.faces.size() == mesh.face_count()) {
          candidates_hit = true;
          return c;
        }
      }
    }
    const AdjacencyGraph graph = build_adjacency(mesh);
    const CostVolume costs = build_data_costs(a.quality);
    LbpOptions opt;
    opt.lambda = cfg.lambda;
    opt.iterations = cfg.lbp_iters;
    opt.damping = cfg.lbp_damping;
    opt.workers = workers;
    const BeliefVolume beliefs = lbp_solve(graph, costs, opt);
    report["lbp"] = {{"iterations", beliefs.iterations}, {"last_change", beliefs.last_change}};
    CandidateSet c = extract_top_n(beliefs, cfg.top_n, cfg.ratio);
    if (!candidates_file.empty()) cache_write(candidates_file, candidates_to_json(c));
    return c;
  });
  if (!cfg.dump.labels_csv.empty()) write_labels_csv(cfg.dump.labels_csv, a.candidates);

  report["cache"] = {{"quality", cache_state(quality_hit)},
                     {"candidates", cache_state(candidates_hit)}};
  return a;
}

std::vector<ViewImage> load_manifest_views(const std::filesystem::path& manifest_path, int workers) {
  if (!std::filesystem::exists(manifest_path)) {
    throw InputError("manifest not found: " + manifest_path.string());
  }
  return load_views(manifest_path, manifest_path.parent_path(), workers);
}

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw InputError("invalid value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InputError("invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kConfig: return "config";
    case Stage::kMesh: return "mesh";
    case Stage::kCamera: return "camera";
    case Stage::kVisibility: return "visibility";
    case Stage::kQuality: return "quality";
    case Stage::kMrf: return "mrf";
    case Stage::kBlend: return "blend";
    case Stage::kAtlas: return "atlas";
    case Stage::kExport: return "export";
    case Stage::kEval: return "eval";
  }
  return "unknown";
}

void PipelineConfig::validate() const {
  const auto fail = [](const char* key, const char* rule) {
    throw InputError(std::string(key) + " must be " + rule);
  };
  if (top_n < 1) fail("top_n", ">= 1");
  if (lbp_iters < 1) fail("lbp_iters", ">= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda", "finite and >= 0");
  if (!(lbp_damping >= 0.0 && lbp_damping < 1.0)) fail("lbp_damping", "in [0, 1)");
  if (!(ratio >= 0.0 && ratio <= 1.0)) fail("ratio", "in [0, 1]");
  if (!(meanshift_threshold > 0.0 && meanshift_threshold < 1.0)) {
    fail("meanshift_threshold", "in (0, 1)");
  }
  if (meanshift_iters < 1) fail("meanshift_iters", ">= 1");
  if (!(depth_bias >= 0.0 && depth_bias < 1.0)) fail("depth_bias", "in [0, 1)");
  if (workers < 0) fail("workers", ">= 0");
  if (!(weld_eps >= 0.0) || !std::isfinite(weld_eps)) fail("weld_eps", "finite and >= 0");
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  if (key == "top_n") top_n = parse_value<std::size_t>(key, value);
  else if (key == "lbp_iters") lbp_iters = parse_value<int>(key, value);
  else if (key == "lambda") lambda = parse_value<double>(key, value);
  else if (key == "lbp_damping") lbp_damping = parse_value<double>(key, value);
  else if (key == "ratio") ratio = parse_value<double>(key, value);
  else if (key == "meanshift_threshold") meanshift_threshold = parse_value<double>(key, value);
  else if (key == "meanshift_iters") meanshift_iters = parse_value<int>(key, value);
  else if (key == "depth_bias") depth_bias = parse_value<double>(key, value);
  else if (key == "workers") workers = parse_value<int>(key, value);
  else if (key == "drop_degenerate") drop_degenerate = parse_bool(key, value);
  else if (key == "weld_eps") weld_eps = parse_value<double>(key, value);
  else if (key == "cache") cache_dir = std::string(value);
  else if (key == "dump_depth") dump.depth_dir = std::string(value);
  else if (key == "dump_quality") dump.quality_csv = std::string(value);
  else if (key == "dump_labels") dump.labels_csv = std::string(value);
  else if (key == "dump_dist") dump.dist_dir = std::string(value);
  else throw InputError("unknown config key '" + std::string(key) + "'");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"top_n", top_n},
          {"lbp_iters", lbp_iters},
          {"lambda", lambda},
          {"lbp_damping", lbp_damping},
          {"ratio", ratio},
          {"meanshift_threshold", meanshift_threshold},
          {"meanshift_iters", meanshift_iters},
          {"depth_bias", depth_bias},
          {"workers", workers},
          {"drop_degenerate", drop_degenerate},
          {"weld_eps", weld_eps},
          {"cache", cache_dir.string()},
          {"dump_depth", dump.depth_dir.string()},
          {"dump_quality", dump.quality_csv.string()},
          {"dump_labels", dump.labels_csv.string()},
          {"dump_dist", dump.dist_dir.string()}};
}

PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw InputError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    const std::string_view key = trim(s.substr(0, eq));
    std::string_view value = trim(s.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    try {
      base.set(key, value);
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

TextureResult run_texture(const Mesh& mesh, std::span<const ViewImage> views,
                          const PipelineConfig& config) {
  in_stage(Stage::kConfig, [&] { config.validate(); });
  if (views.empty()) throw StageError(Stage::kCamera, false, "at least one view required");
  const int workers = resolve_workers(config.workers);

  TextureResult result;
  nlohmann::json& report = result.report;
  report["config"] = config.to_json();
  report["timings_ms"] = nlohmann::json::object();
  StageClock clock(report["timings_ms"]);

  Analysis a = analyze(mesh, views, config, clock, report);

  result.patches = clock.run(Stage::kBlend, [&] {
    const std::vector<Mask> masks = build_masks(a.candidates, views, a.visibility);
    std::vector<Raster<float>> dists(masks.size());
    parallel_for(masks.size(), workers, [&](std::size_t i) { dists[i] = distance_transform(masks[i]); });
    if (!config.dump.dist_dir.empty()) {
      create_dir(config.dump.dist_dir);
      for (std::size_t i = 0; i < views.size(); ++i) {
        write_distance_png(config.dump.dist_dir / view_file("dist", views[i].id), dists[i]);
      }
    }
    return blend_faces(mesh, a.candidates, a.quality, views, dists, workers);
  });

  result.model.mesh = mesh;
  result.model.atlas = clock.run(Stage::kAtlas, [&] {
    return pack(result.patches, mesh.face_count(), kMaxAtlasSide, workers);
  });

  std::vector<std::size_t> histogram(config.top_n + 1, 0);
  std::size_t peak = 0;
  for (const auto& labels : a.candidates.faces) {
    ++histogram[std::min(labels.size(), config.top_n)];
    peak = std::max(peak, labels.size());
    if (labels.empty()) ++result.untextured_faces;
  }
  std::size_t filled = 0;
  for (const FacePatch& p : result.patches) filled += p.filled_texels;
  report["faces"] = mesh.face_count();
  report["views"] = views.size();
  report["untextured_faces"] = result.untextured_faces;
  report["candidate_histogram"] = histogram;
  report["peak_candidates"] = peak;
  report["filled_texels"] = filled;
  report["atlas_pages"] = result.model.atlas.pages.size();
  if (!report.contains("lbp")) report["lbp"] = nullptr;

  result.quality = std::move(a.quality);
  result.candidates = std::move(a.candidates);
  return result;
}

TextureResult run_texture(const std::filesystem::path& mesh_path,
                          const std::filesystem::path& manifest_path,
                          const std::filesystem::path& out_dir, const PipelineConfig& config) {
  in_stage(Stage::kConfig, [&] { config.validate(); });
  const int workers = resolve_workers(config.workers);
  nlohmann::json load_timings = nlohmann::json::object();
  StageClock clock(load_timings);

  LoadReport load_report;
  const Mesh mesh = clock.run(Stage::kMesh, [&] {
    LoadOptions opt;
    opt.drop_degenerate = config.drop_degenerate;
    opt.weld_eps = config.weld_eps;
    return load_mesh(mesh_path, opt, &load_report);
  });
  const std::vector<ViewImage> views =
      clock.run(Stage::kCamera, [&] { return load_manifest_views(manifest_path, workers); });

  TextureResult result = run_texture(mesh, views, config);
  nlohmann::json& report = result.report;
  report["mesh_load"] = {{"dropped_faces", load_report.dropped_faces},
                         {"welded_vertices", load_report.welded_vertices},
                         {"warnings", load_report.warnings}};

  clock.run(Stage::kExport, [&] {
    const ExportedFiles files = export_model(result.model.mesh, result.model.atlas, out_dir);
    nlohmann::json pages = nlohmann::json::array();
    for (const auto& p : files.pages) pages.push_back(p.filename().string());
    report["outputs"] = {{"obj", files.obj.filename().string()},
                         {"mtl", files.mtl.filename().string()},
                         {"pages", pages}};
  });
  for (const auto& [k, v] : load_timings.items()) report["timings_ms"][k] = v;
  const std::filesystem::path report_path = out_dir / "run_report.json";
  std::ofstream out(report_path);
  if (!out) throw StageError(Stage::kExport, false, "cannot write " + report_path.string());
  out << report.dump(2) << '\n';
  return result;
}

EvalReport run_evaluate(const std::filesystem::path& model_path,
                        const std::filesystem::path& manifest_path, const PipelineConfig& config) {
  in_stage(Stage::kConfig, [&] { config.validate(); });
  const int workers = resolve_workers(config.workers);
  const TexturedModel model = in_stage(Stage::kEval, [&] { return load_textured_model(model_path); });
  const std::vector<ViewImage> views =
      in_stage(Stage::kCamera, [&] { return load_manifest_views(manifest_path, workers); });
  return in_stage(Stage::kEval, [&] { return evaluate_dataset(model, views, workers); });
}

void run_inspect(const std::filesystem::path& mesh_path, const std::filesystem::path& manifest_path,
                 const std::filesystem::path& out_dir, const PipelineConfig& config) {
  in_stage(Stage::kConfig, [&] { config.validate(); });
  const int workers = resolve_workers(config.workers);
  nlohmann::json report;
  nlohmann::json timings = nlohmann::json::object();
  StageClock clock(timings);
  const Mesh mesh = clock.run(Stage::kMesh, [&] {
    LoadOptions opt;
    opt.drop_degenerate = config.drop_degenerate;
    opt.weld_eps = config.weld_eps;
    return load_mesh(mesh_path, opt);
  });
  const std::vector<ViewImage> views =
      clock.run(Stage::kCamera, [&] { return load_manifest_views(manifest_path, workers); });
  const Analysis a = analyze(mesh, views, config, clock, report);
  clock.run(Stage::kExport, [&] {
    create_dir(out_dir);
    write_quality_csv(out_dir / "quality.csv", a.quality);
    write_labels_csv(out_dir / "candidates.csv", a.candidates);
  });
}

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

}  // namespace texmap
