// texmap: multi-view texture mapping for triangle meshes.
//
//   texmap texture  --mesh m.obj --views views.json --out out/
//   texmap evaluate --model out/model.obj --views views.json --report report.json
//   texmap synth    --shape cube --cameras 6 --gain-range 0.8:1.2 --out scene/
//   texmap inspect  --mesh m.obj --views views.json --out dump/
//
// Exit status: 0 success, 1 input error, 2 internal invariant violation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "texmap/error.hpp"
#include "texmap/pipeline.hpp"
#include "texmap/synth.hpp"

namespace {

using namespace texmap;

constexpr int kExitInput = 1;
constexpr int kExitInvariant = 2;

// Pipeline flags, applied over the config file in this order.
const std::vector<std::pair<std::string, std::string>> kConfigFlags = {
    {"--top-n", "top_n"},
    {"--lbp-iters", "lbp_iters"},
    {"--lambda", "lambda"},
    {"--lbp-damping", "lbp_damping"},
    {"--ratio", "ratio"},
    {"--meanshift-threshold", "meanshift_threshold"},
    {"--meanshift-iters", "meanshift_iters"},
    {"--depth-bias", "depth_bias"},
    {"--workers", "workers"},
    {"--weld", "weld_eps"},
    {"--cache", "cache"},
    {"--dump-depth", "dump_depth"},
    {"--dump-quality", "dump_quality"},
    {"--dump-labels", "dump_labels"},
    {"--dump-dist", "dump_dist"},
};

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  bool drop_degenerate = false;
  CLI::Option* drop_option = nullptr;
  std::vector<std::pair<std::string, CLI::Option*>> options;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_file, "key = value config file (flags override)");
  for (const auto& [flag, key] : kConfigFlags) {
    CLI::Option* opt = cmd->add_option(flag, flags.values[key], key);
    flags.options.emplace_back(key, opt);
  }
  flags.drop_option =
      cmd->add_flag("--drop-degenerate", flags.drop_degenerate, "drop degenerate faces with a warning");
}

PipelineConfig resolve_config(const ConfigFlags& flags) {
  PipelineConfig cfg;
  if (!flags.config_file.empty()) cfg = load_config_file(flags.config_file);
  for (const auto& [key, opt] : flags.options) {
    if (opt->count() > 0) cfg.set(key, flags.values.at(key));
  }
  if (flags.drop_option->count() > 0) cfg.drop_degenerate = flags.drop_degenerate;
  return cfg;
}

std::vector<double> parse_list(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("invalid number '" + item + "' in '" + text + "'");
    }
  }
  return out;
}

struct SynthFlags {
  std::string shape = "cube";
  std::string pattern = "checkerboard";
  std::string layout = "sphere";
  std::string gain_range;
  std::string gains;
  std::string biases;
  std::vector<std::string> eyes;
  std::string out;
  int workers = 0;
};

SceneSpec resolve_spec(SynthFlags& f, SceneSpec spec) {
  static const std::map<std::string, Shape> shapes = {
      {"cube", Shape::kCube}, {"icosphere", Shape::kIcosphere}, {"plane", Shape::kPlaneGrid}};
  static const std::map<std::string, Pattern> patterns = {{"checkerboard", Pattern::kCheckerboard},
                                                          {"gradient", Pattern::kGradient},
                                                          {"uv-debug", Pattern::kUvDebug},
                                                          {"solid", Pattern::kSolid}};
  static const std::map<std::string, CameraLayout> layouts = {{"ring", CameraLayout::kRing},
                                                              {"sphere", CameraLayout::kSphere},
                                                              {"axis", CameraLayout::kAxis},
                                                              {"explicit", CameraLayout::kExplicit}};
  spec.shape = shapes.at(f.shape);
  spec.pattern = patterns.at(f.pattern);
  spec.layout = layouts.at(f.layout);
  if (!f.eyes.empty()) {
    spec.layout = CameraLayout::kExplicit;
    spec.eyes.clear();
    for (const std::string& e : f.eyes) {
      const std::vector<double> v = parse_list(e, ',');
      if (v.size() != 3) throw InputError("--eye expects x,y,z");
      spec.eyes.emplace_back(v[0], v[1], v[2]);
    }
    spec.cameras = static_cast<int>(spec.eyes.size());
  }
  if (!f.gain_range.empty() && !f.gains.empty()) {
    throw InputError("--gain-range and --gains are exclusive");
  }
  if (!f.gain_range.empty()) {
    const std::vector<double> r = parse_list(f.gain_range, ':');
    if (r.size() != 2) throw InputError("--gain-range expects a:b");
    spec.gains.clear();
    for (int i = 0; i < spec.cameras; ++i) {
      const double t = spec.cameras == 1 ? 0.0 : double(i) / (spec.cameras - 1);
      spec.gains.push_back(r[0] + t * (r[1] - r[0]));
    }
  }
  if (!f.gains.empty()) spec.gains = parse_list(f.gains, ',');
  if (!f.biases.empty()) spec.biases = parse_list(f.biases, ',');
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view texture mapping for triangle meshes"};
  app.require_subcommand(1);

  std::string mesh_path, views_path, out_dir, model_path, report_path;

  ConfigFlags texture_flags;
  CLI::App* texture = app.add_subcommand("texture", "texture a mesh from posed photos");
  texture->add_option("--mesh", mesh_path, "OBJ or PLY mesh")->required();
  texture->add_option("--views", views_path, "view manifest (JSON)")->required();
  texture->add_option("--out", out_dir, "output directory")->required();
  add_config_flags(texture, texture_flags);

  ConfigFlags eval_flags;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a textured model against its views");
  evaluate->add_option("--model", model_path, "textured OBJ")->required();
  evaluate->add_option("--views", views_path, "view manifest (JSON)")->required();
  evaluate->add_option("--report", report_path, "report JSON path (stdout when omitted)");
  add_config_flags(evaluate, eval_flags);

  ConfigFlags inspect_flags;
  CLI::App* inspect = app.add_subcommand("inspect", "dump per-face quality and candidates as CSV");
  inspect->add_option("--mesh", mesh_path, "OBJ or PLY mesh")->required();
  inspect->add_option("--views", views_path, "view manifest (JSON)")->required();
  inspect->add_option("--out", out_dir, "output directory")->required();
  add_config_flags(inspect, inspect_flags);

  SceneSpec spec;
  SynthFlags sf;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene");
  synth->add_option("--shape", sf.shape)->check(CLI::IsMember({"cube", "icosphere", "plane"}));
  synth->add_option("--subdiv", spec.subdivisions, "icosphere subdivisions");
  synth->add_option("--grid", spec.grid, "plane grid cells per side");
  synth->add_option("--pattern", sf.pattern)
      ->check(CLI::IsMember({"checkerboard", "gradient", "uv-debug", "solid"}));
  synth->add_option("--cells", spec.cells, "checker cells across the object");
  synth->add_option("--cameras", spec.cameras);
  synth->add_option("--layout", sf.layout)->check(CLI::IsMember({"ring", "sphere", "axis", "explicit"}));
  synth->add_option("--radius", spec.radius);
  synth->add_option("--elevation", spec.elevation_deg, "ring elevation in degrees");
  synth->add_option("--eye", sf.eyes, "explicit camera position x,y,z (repeatable)");
  synth->add_option("--width", spec.width);
  synth->add_option("--height", spec.height);
  synth->add_option("--fov", spec.fov_deg, "horizontal field of view in degrees");
  synth->add_option("--supersample", spec.supersample);
  synth->add_option("--gain-range", sf.gain_range, "a:b, linearly spaced over views");
  synth->add_option("--gains", sf.gains, "comma-separated per-view gains");
  synth->add_option("--biases", sf.biases, "comma-separated per-view biases");
  synth->add_option("--jitter-rot", spec.jitter_rotation_deg, "manifest rotation jitter (degrees)");
  synth->add_option("--jitter-trans", spec.jitter_translation, "manifest translation jitter (radius fraction)");
  synth->add_option("--seed", spec.seed);
  synth->add_option("--workers", sf.workers);
  synth->add_option("--out", sf.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*texture) {
      const PipelineConfig cfg = resolve_config(texture_flags);
      const TextureResult r = run_texture(mesh_path, views_path, out_dir, cfg);
      std::cout << "textured " << r.model.mesh.face_count() - r.untextured_faces << " of "
                << r.model.mesh.face_count() << " faces into " << r.model.atlas.pages.size()
                << " atlas page(s) in " << out_dir << '\n';
    } else if (*evaluate) {
      const PipelineConfig cfg = resolve_config(eval_flags);
      const EvalReport report = run_evaluate(model_path, views_path, cfg);
      const std::string text = report.to_json().dump(2);
      if (report_path.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream out(report_path);
        if (!out) throw InputError("cannot write " + report_path);
        out << text << '\n';
        std::cout << "mean PSNR " << report.mean_psnr << " dB, mean MS-SSIM " << report.mean_ms_ssim
                  << " over " << report.evaluated_views << " view(s)\n";
      }
    } else if (*inspect) {
      run_inspect(mesh_path, views_path, out_dir, resolve_config(inspect_flags));
      std::cout << "wrote quality.csv and candidates.csv to " << out_dir << '\n';
    } else if (*synth) {
      const SceneSpec s = resolve_spec(sf, spec);
      const SceneFiles files = write_scene(build_scene(s, sf.workers), sf.out);
      std::cout << "wrote " << files.images.size() << " view(s), " << files.mesh.string() << ", "
                << files.manifest.string() << '\n';
    }
  } catch (const StageError& e) {
    std::cerr << "texmap: error in " << e.what() << '\n';
    return e.invariant() ? kExitInvariant : kExitInput;
  } catch (const InputError& e) {
    std::cerr << "texmap: " << e.what() << '\n';
    return kExitInput;
  } catch (const InvariantError& e) {
    std::cerr << "texmap: internal error: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "texmap: internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
  return 0;
}
