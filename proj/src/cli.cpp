#include "hmrf_icp/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmrf_icp/benchmark.hpp"
#include "hmrf_icp/errors.hpp"
#include "hmrf_icp/icp.hpp"
#include "hmrf_icp/io.hpp"
#include "hmrf_icp/synth.hpp"

namespace hmrf_icp {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kDefaultAxesSeed = 16;

bool has_extension(const std::string& path, const char* ext) {
  std::string e = fs::path(path).extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e == ext;
}

CameraIntrinsics parse_intrinsics(const std::string& spec, int width, int height) {
  std::vector<double> v;
  std::stringstream ss(spec);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      v.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw InputError("--intrinsics expects fx,fy,cx,cy");
    }
  }
  if (v.size() != 4) throw InputError("--intrinsics expects fx,fy,cx,cy");
  CameraIntrinsics k{v[0], v[1], v[2], v[3], width, height};
  k.validate();
  return k;
}

struct DepthInput {
  std::string intrinsics;
  double scale = kTumDepthScale;
};

StructuredCloud load_free(const std::string& path, const DepthInput& depth) {
  if (has_extension(path, ".png")) {
    if (depth.intrinsics.empty()) throw InputError("depth PNG input requires --intrinsics");
    const DepthMap map = read_depth_png16(path, depth.scale);
    return unproject(map, parse_intrinsics(depth.intrinsics, map.width, map.height));
  }
  return read_structured_ply(path);
}

FixedCloud load_fixed(const std::string& path, const DepthInput& depth) {
  if (has_extension(path, ".png")) return to_fixed(load_free(path, depth));
  return read_ply(path);
}

// ---- register ----

struct RegisterOptions {
  std::string free_path;
  std::string fixed_path;
  std::string method = "hmrf";
  double beta = 2.0;
  double init_outlier_frac = 0.1;
  int max_iters = 50;
  int em_initial = 600;
  int em_per_step = 20;
  double percent_fraction = 0.9;
  double sigma_k = 2.5;
  double x84_k = 5.2;
  double dynamic_d = 0.0;
  double trans_eps = 1e-5;
  double rot_eps = 1e-5;
  std::string init_pose = "identity";
  std::string out_ply;
  std::string trace_csv;
  std::string dump_field;
  DepthInput depth;
};

RejectionStrategy make_strategy(const RegisterOptions& o) {
  const auto parsed = parse_strategy(o.method);
  if (!parsed) throw InputError("unknown method '" + o.method + "'");
  RejectionStrategy s = *parsed;
  if (auto* p = std::get_if<strategy::Percent>(&s)) p->fraction = o.percent_fraction;
  if (auto* p = std::get_if<strategy::Sigma>(&s)) p->k = o.sigma_k;
  if (auto* p = std::get_if<strategy::X84>(&s)) p->k = o.x84_k;
  if (auto* p = std::get_if<strategy::Dynamic>(&s); p && o.dynamic_d > 0) p->d_param = o.dynamic_d;
  if (auto* p = std::get_if<strategy::Hmrf>(&s))
    p->config = HmrfConfig{o.beta, o.init_outlier_frac, o.em_initial, o.em_per_step};
  validate(s);
  return s;
}

void write_register_outputs(const RegisterOptions& o, const StructuredCloud& free, const IcpResult& r) {
  if (!o.out_ply.empty()) {
    const MeanField* labels = r.field ? &*r.field : nullptr;
    write_ply(o.out_ply, apply_transform(r.transform, free), labels);
  }
  if (!o.trace_csv.empty()) write_trace_csv(o.trace_csv, r);
}

int run_register(const RegisterOptions& o, std::ostream& out, std::ostream& err) {
  const StructuredCloud free = load_free(o.free_path, o.depth);
  const FixedCloud fixed = load_fixed(o.fixed_path, o.depth);
  const RigidTransform t_init = o.init_pose == "identity" ? RigidTransform::identity() : read_transform(o.init_pose);

  IcpConfig config;
  config.max_icp_iters = o.max_iters;
  config.trans_eps = o.trans_eps;
  config.rot_eps = o.rot_eps;
  config.strategy = make_strategy(o);
  if (!o.dump_field.empty()) {
    config.observer = [&o](int it, const IterationRecord&, const MeanField* field) {
      if (!field) return;
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_%03d.png", it);
      write_field_png(o.dump_field + suffix, *field);
      if (it == 1) write_unobserved_mask_png(o.dump_field + "_mask.png", *field->lattice);
    };
  }

  try {
    const IcpResult r = icp_register(free, fixed, t_init, config);
    out << "transform:\n";
    write_transform(out, r.transform);
    out << "iterations: " << r.iterations << "\nconverged: " << (r.converged ? "true" : "false")
        << "\nelapsed_seconds: " << format_double(r.elapsed_seconds) << '\n';
    write_register_outputs(o, free, r);
    return kExitOk;
  } catch (const RegistrationFailure& e) {
    err << "error: " << e.what() << '\n';
    write_register_outputs(o, free, e.partial());
    return kExitRegistrationFailure;
  }
}

// ---- synth ----

struct SynthOptions {
  double target_overlap = 1.0;
  std::uint64_t seed = 42;
  std::string out_prefix;
  int width = 80;
  int height = 60;
  double noise = 0.002;
};

json scene_json(const SceneParams& p, const ScenePair& s) {
  const auto& k = p.intrinsics;
  return json{{"target_overlap", p.target_overlap},
              {"seed", s.seed},
              {"width", k.width},
              {"height", k.height},
              {"noise_sigma", p.noise_sigma},
              {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}},
              {"overlap", s.overlap},
              {"scene_diameter", s.scene_diameter}};
}

int run_synth(const SynthOptions& o, std::ostream& out) {
  SceneParams p;
  p.intrinsics = SceneParams::default_intrinsics(o.width, o.height);
  p.target_overlap = o.target_overlap;
  p.noise_sigma = o.noise;
  const ScenePair s = generate_scene(p, o.seed);

  write_ply(o.out_prefix + "_free.ply", s.free);
  write_ply(o.out_prefix + "_fixed.ply", s.fixed);
  write_depth_png16(o.out_prefix + "_free.png", s.free_depth);
  write_depth_png16(o.out_prefix + "_fixed.png", s.fixed_depth);
  write_transform(o.out_prefix + "_gt.txt", s.gt);
  std::ofstream meta(o.out_prefix + "_scene.json");
  if (!meta) throw IoError("cannot write scene metadata");
  meta << scene_json(p, s).dump(2) << '\n';

  out << "overlap: " << format_double(s.overlap) << "\nscene_diameter: " << format_double(s.scene_diameter) << '\n';
  return kExitOk;
}

// ---- benchmark ----

struct BenchmarkOptions {
  std::string scenes;
  int axes = kDefaultAxisCount;
  std::uint64_t axes_seed = kDefaultAxesSeed;
  double angle = kDefaultPerturbationAngle;
  std::string out = "results.csv";
  std::string strategies = "all,percent,sigma,x84,dynamic,hmrf";
  int max_iters = 50;
};

std::pair<SceneParams, std::uint64_t> params_from_json(const json& j) {
  SceneParams p;
  const int w = j.value("width", 80);
  const int h = j.value("height", 60);
  p.intrinsics = SceneParams::default_intrinsics(w, h);
  p.target_overlap = j.at("target_overlap").get<double>();
  p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
  return {p, j.value("seed", std::uint64_t{42})};
}

std::vector<std::pair<SceneParams, std::uint64_t>> parse_scene_source(const std::string& src) {
  std::vector<std::pair<SceneParams, std::uint64_t>> out;
  auto read_json = [](const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open '" + file.string() + "'");
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError("'" + file.string() + "': " + e.what());
    }
  };
  auto add = [&](const json& j) {
    try {
      out.push_back(params_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(std::string("scene parameters: ") + e.what());
    }
  };

  if (src.rfind("stratified:", 0) == 0) {
    // stratified:PER_DECILE[:FIRST_DECILE[:SEED]]
    std::vector<std::string> parts;
    std::stringstream ss(src.substr(11));
    for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
    try {
      const int per = std::stoi(parts.at(0));
      const int first = parts.size() > 1 ? std::stoi(parts[1]) : 3;
      const std::uint64_t seed = parts.size() > 2 ? std::stoull(parts[2]) : 1;
      return stratified_scene_params(per, first, seed);
    } catch (const std::logic_error&) {
      throw InputError("--scenes stratified:PER_DECILE[:FIRST_DECILE[:SEED]]");
    }
  }
  if (fs::is_directory(src)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(src))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add(read_json(f));
  } else if (fs::is_regular_file(src)) {
    const json j = read_json(src);
    if (j.is_array()) {
      for (const auto& s : j) add(s);
    } else if (j.contains("scenes")) {
      for (const auto& s : j.at("scenes")) add(s);
    } else {
      add(j);
    }
  } else {
    throw InputError("--scenes: '" + src + "' is neither a directory, a JSON file nor a stratified: spec");
  }
  if (out.empty()) throw InputError("--scenes: no scene parameters found");
  return out;
}

int run_benchmark_cmd(const BenchmarkOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<RejectionStrategy> strategies;
  std::stringstream ss(o.strategies);
  for (std::string tok; std::getline(ss, tok, ',');) {
    const auto s = parse_strategy(tok);
    if (!s) throw InputError("unknown strategy '" + tok + "'");
    strategies.push_back(*s);
  }

  std::vector<ScenePair> scenes;
  for (const auto& [params, seed] : parse_scene_source(o.scenes)) {
    try {
      scenes.push_back(generate_scene(params, seed));
    } catch (const GenerationError& e) {
      err << "warning: skipping scene (seed " << seed << "): " << e.what() << '\n';
    }
  }
  if (scenes.empty()) throw InputError("no scene could be generated");

  IcpConfig base;
  base.max_icp_iters = o.max_iters;
  const auto records = run_benchmark(scenes, strategies, perturbation_axes(o.axes, o.axes_seed), o.angle, base);
  write_results_csv(o.out, records);
  out << "scenes: " << scenes.size() << "\nrecords: " << records.size() << '\n';
  return kExitOk;
}

// ---- eval ----

int run_eval(const std::string& results, const std::string& summary, std::ostream& out) {
  const ResultsTable table = read_results_csv(results);
  if (summary.empty())
    write_decile_summary_csv(out, table);
  else
    write_decile_summary_csv(summary, table);
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point-cloud registration with HMRF outlier rejection", "hmrf-icp"};
  app.require_subcommand(1);

  RegisterOptions reg;
  auto* reg_cmd = app.add_subcommand("register", "Align a free cloud onto a fixed cloud");
  reg_cmd->add_option("free", reg.free_path, "Free cloud (.ply or 16-bit depth .png)")->required();
  reg_cmd->add_option("fixed", reg.fixed_path, "Fixed cloud (.ply or 16-bit depth .png)")->required();
  reg_cmd->add_option("--method", reg.method, "all|percent|sigma|x84|dynamic|hmrf")
      ->check(CLI::IsMember({"all", "percent", "sigma", "x84", "dynamic", "hmrf"}))
      ->capture_default_str();
  reg_cmd->add_option("--beta", reg.beta, "HMRF coupling strength")->capture_default_str();
  reg_cmd->add_option("--init-outlier-frac", reg.init_outlier_frac)->capture_default_str();
  reg_cmd->add_option("--max-iters", reg.max_iters, "ICP iteration cap")->capture_default_str();
  reg_cmd->add_option("--em-initial", reg.em_initial, "EM cap before the first fit")->capture_default_str();
  reg_cmd->add_option("--em-per-step", reg.em_per_step, "EM cap per ICP iteration")->capture_default_str();
  reg_cmd->add_option("--percent-fraction", reg.percent_fraction)->capture_default_str();
  reg_cmd->add_option("--sigma-k", reg.sigma_k)->capture_default_str();
  reg_cmd->add_option("--x84-k", reg.x84_k)->capture_default_str();
  reg_cmd->add_option("--dynamic-d", reg.dynamic_d, "Dynamic threshold distance (default: 10x fixed spacing)");
  reg_cmd->add_option("--trans-eps", reg.trans_eps)->capture_default_str();
  reg_cmd->add_option("--rot-eps", reg.rot_eps)->capture_default_str();
  reg_cmd->add_option("--init-pose", reg.init_pose, "4x4 transform file or 'identity'")->capture_default_str();
  reg_cmd->add_option("--out", reg.out_ply, "Write the aligned free cloud (labelled for hmrf)");
  reg_cmd->add_option("--trace", reg.trace_csv, "Write the per-iteration trace CSV");
  reg_cmd->add_option("--dump-field", reg.dump_field, "Write per-iteration field images with this prefix");
  reg_cmd->add_option("--intrinsics", reg.depth.intrinsics, "fx,fy,cx,cy for depth PNG inputs");
  reg_cmd->add_option("--depth-scale", reg.depth.scale, "Depth PNG ticks per meter")->capture_default_str();

  SynthOptions syn;
  auto* syn_cmd = app.add_subcommand("synth", "Generate a synthetic scene pair");
  syn_cmd->add_option("--target-overlap", syn.target_overlap)->required()->check(CLI::Range(0.05, 1.0));
  syn_cmd->add_option("--seed", syn.seed)->capture_default_str();
  syn_cmd->add_option("--out-prefix", syn.out_prefix)->required();
  syn_cmd->add_option("--width", syn.width)->capture_default_str();
  syn_cmd->add_option("--height", syn.height)->capture_default_str();
  syn_cmd->add_option("--noise", syn.noise, "Depth noise sigma in meters")->capture_default_str();

  BenchmarkOptions bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Run the perturbation benchmark");
  bench_cmd->add_option("--scenes", bench.scenes, "Directory/file of scene JSON or stratified:N[:FIRST[:SEED]]")
      ->required();
  bench_cmd->add_option("--axes", bench.axes, "Number of perturbation axes")->capture_default_str();
  bench_cmd->add_option("--axes-seed", bench.axes_seed)->capture_default_str();
  bench_cmd->add_option("--angle", bench.angle, "Perturbation angle in radians")->capture_default_str();
  bench_cmd->add_option("--out", bench.out)->capture_default_str();
  bench_cmd->add_option("--strategies", bench.strategies)->capture_default_str();
  bench_cmd->add_option("--max-iters", bench.max_iters)->capture_default_str();

  std::string results, summary;
  auto* eval_cmd = app.add_subcommand("eval", "Summarize a results CSV by overlap decile");
  eval_cmd->add_option("--results", results)->required();
  eval_cmd->add_option("--summary", summary, "Output CSV (default: stdout)");

  std::vector<std::string> storage{"hmrf-icp"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*reg_cmd) return run_register(reg, out, err);
    if (*syn_cmd) return run_synth(syn, out);
    if (*bench_cmd) return run_benchmark_cmd(bench, out, err);
    if (*eval_cmd) return run_eval(results, summary, out);
  } catch (const GenerationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRegistrationFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace hmrf_icp
