// matx: command-line driver for projection, transfer, previews and demo assets.
// Exit codes: 0 ok, 1 check failed, 2 bad input, 3 optimization failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "demo.hpp"
#include "matx/checkpoint.hpp"
#include "matx/engine.hpp"
#include "matx/io.hpp"

namespace fs = std::filesystem;
using namespace matx;

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kBadInput = 2, kOptimFailed = 3;
constexpr std::uint64_t kFeatnetSeed = 1;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(p.string() + ": cannot open file");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text << '\n';
  if (!out) throw IoError(p.string() + ": cannot write file");
}

struct Common {
  std::string config;
  std::string featnet;
  std::optional<std::uint64_t> seed;
  std::string loss;

  OptimSettings settings(std::map<std::string, std::string>& paths) const {
    OptimSettings s;
    if (!config.empty()) {
      try {
        s = OptimSettings::from_json(read_text(config), &paths);
      } catch (const ConfigError& e) {
        throw ConfigError(config + ": " + e.what(), e.line, 0);
      }
    }
    if (seed) s.seed = *seed;
    if (!loss.empty()) s.loss = parse_loss_kind(loss);
    return s;
  }

  FeatureExtractor extractor(const std::map<std::string, std::string>& paths) const {
    std::string path = featnet;
    if (path.empty() && paths.count("featnet")) path = paths.at("featnet");
    return path.empty() ? FeatureExtractor::init_random(kFeatnetSeed) : FeatureExtractor::load(path);
  }
};

std::string pick(const std::string& flag, const std::map<std::string, std::string>& paths,
                 const char* key, const char* option) {
  if (!flag.empty()) return flag;
  if (auto it = paths.find(key); it != paths.end()) return it->second;
  throw InputError(std::string(option) + " is required");
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON settings file");
  cmd->add_option("--featnet", c.featnet, "feature extractor weights");
  cmd->add_option("--seed", c.seed, "random seed");
}

LabelGrid input_labels(const fs::path& pack, const std::string& flag, std::int64_t n) {
  fs::path p = flag.empty() ? pack / "labels.png" : fs::path(flag);
  if (flag.empty() && !fs::exists(p)) return LabelGrid::uniform(n, n, 0);
  LabelGrid g = load_labels(p);
  if (g.height != n || g.width != n)
    throw InputError(p.string() + ": label map is " + std::to_string(g.height) + "x" +
                     std::to_string(g.width) + " but the pack is " + std::to_string(n) + "x" +
                     std::to_string(n));
  return g;
}

// "IMG[:LABELS]"
TransferTarget load_target(const std::string& spec, std::int64_t n) {
  std::string image = spec, labels;
  if (const auto colon = spec.rfind(':'); colon != std::string::npos && colon > 0 &&
                                          colon + 1 < spec.size()) {
    image = spec.substr(0, colon);
    labels = spec.substr(colon + 1);
  }
  TransferTarget t{load_photo(image, n), {}};
  t.labels = labels.empty() ? LabelGrid::uniform(n, n, 0) : load_photo_labels(labels, n);
  return t;
}

int cmd_project(const Common& c, const std::string& pack_flag, const std::string& gen_flag,
                const std::string& out_flag, const std::string& report_flag,
                const std::string& prior) {
  std::map<std::string, std::string> paths;
  OptimSettings s = c.settings(paths);
  s.mode = parse_prior_mode(prior);
  const fs::path pack = pick(pack_flag, paths, "pack", "--pack");
  const fs::path gen = pick(gen_flag, paths, "generator", "--generator");
  const fs::path out = pick(out_flag, paths, "out", "--out");
  const fs::path report = report_flag.empty() ? fs::path(out).replace_extension(".json") : fs::path(report_flag);
  const MaterialPack p = load_pack(pack);
  const GeneratorWeights w = load_generator(gen);
  if (w.config.resolution != p.maps.size())
    throw InputError(gen.string() + ": generator resolution " + std::to_string(w.config.resolution) +
                     " does not match the " + std::to_string(p.maps.size()) + " texel pack");
  const FeatureExtractor fx = c.extractor(paths);
  try {
    const ProjectionResult r = project(p.maps, w, fx, s);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_bundle(out, {r.weights, r.theta});
    write_text(report, r.report.to_json());
    std::cout << "projected " << pack.string() << " in " << r.report.iterations
              << " iterations, best loss " << r.report.best_loss << " at iteration "
              << r.report.best_iteration << "\n";
  } catch (const OptimizationError& e) {
    write_text(report, e.report.to_json());
    throw;
  }
  return kOk;
}

int cmd_transfer(const Common& c, const std::string& theta_flag, const std::string& pack_flag,
                 const std::string& labels_flag, const std::vector<std::string>& target_specs,
                 const std::vector<std::string>& rule_specs, const std::string& out_flag,
                 bool per_pixel) {
  std::map<std::string, std::string> paths;
  const OptimSettings s = c.settings(paths);
  const fs::path pack = pick(pack_flag, paths, "pack", "--pack");
  const fs::path out = pick(out_flag, paths, "out", "--out");
  const MaterialPack p = load_pack(pack);
  const std::int64_t n = p.maps.size();
  TransferInput input{p.maps, input_labels(pack, labels_flag, n)};
  if (target_specs.empty()) throw InputError("at least one --target is required");
  std::vector<TransferTarget> targets;
  for (const auto& t : target_specs) targets.push_back(load_target(t, n));
  std::vector<TransferRule> rules;
  for (const auto& r : rule_specs) rules.push_back(TransferRule::parse(r));
  if (rules.empty()) {
    if (targets.size() != 1) throw InputError("--rule is required with more than one target");
    rules.push_back({0, 0, 0});
  }
  const FeatureExtractor fx = c.extractor(paths);
  fs::create_directories(out);

  MaterialMaps result;
  RunReport report;
  try {
    if (per_pixel) {
      auto r = per_pixel_transfer(fx, input, targets, rules, s);
      result = r.maps;
      report = r.report;
    } else {
      const ThetaBundle b = load_bundle(pick(theta_flag, paths, "theta", "--theta"));
      if (b.weights.config.resolution != n)
        throw InputError("theta generates " + std::to_string(b.weights.config.resolution) +
                         " texel maps but the pack is " + std::to_string(n));
      auto r = transfer(b.theta, b.weights, fx, input, targets, rules, s);
      save_bundle(out / "theta.bin", {r.weights, r.theta});
      result = r.maps;
      report = r.report;
    }
  } catch (const OptimizationError& e) {
    write_text(out / "report.json", e.report.to_json());
    throw;
  }
  save_pack(out, result, 16);
  const RenderConfig rc = s.render_config();
  write_preview(out / "render.png", render(result, rc));
  write_preview(out / "tiled2x2.png", tile_render(result, rc, 2));
  write_text(out / "report.json", report.to_json());
  std::cout << "transferred " << rules.size() << " rule(s) in " << report.iterations
            << " iterations, best loss " << report.best_loss << "; wrote " << out.string() << "\n";
  return kOk;
}

int cmd_render(const std::string& pack, const std::string& out, int tile, double height,
               double intensity, double gamma) {
  const MaterialPack p = load_pack(pack);
  RenderConfig rc;
  rc.light_height = height;
  rc.light_intensity = intensity;
  rc.gamma = gamma;
  rc.validate();
  if (tile < 1) throw InputError("--tile must be >= 1");
  write_preview(out, tile_render(p.maps, rc, tile));
  return kOk;
}

int cmd_check(const std::string& pack) {
  const SeamReport r = seam_metric(load_pack(pack).maps);
  std::printf("albedo     %+.6f\nnormal     %+.6f\nroughness  %+.6f\nspecular   %+.6f\n", r.albedo,
              r.normal, r.roughness, r.specular);
  const bool ok = r.worst() <= 0;
  std::printf("%s\n", ok ? "tileable" : "seams detected");
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matx: tileable material appearance transfer"};
  app.require_subcommand(1);

  Common common;
  std::string pack, generator, out, theta, labels, report, prior = "dip";
  std::vector<std::string> targets, rules;
  bool per_pixel = false;
  int tile = 1;
  double height = 1.0, intensity = kDefaultIntensity, gamma = 2.2;
  std::uint64_t demo_seed = 0;
  std::int64_t demo_size = 64;

  auto* project_cmd = app.add_subcommand("project", "fit a latent code to a material pack");
  project_cmd->add_option("--pack", pack, "material pack directory");
  project_cmd->add_option("--generator", generator, "generator weights");
  project_cmd->add_option("--out", out, "output theta file");
  project_cmd->add_option("--report", report, "report path (default: <out>.json)");
  project_cmd->add_option("--prior", prior, "latent or dip (default dip)")
      ->check(CLI::IsMember({"latent", "dip"}));
  add_common(project_cmd, common);

  auto* transfer_cmd = app.add_subcommand("transfer", "transfer appearance from target photos");
  transfer_cmd->add_option("--theta", theta, "theta file from project");
  transfer_cmd->add_option("--pack", pack, "input material pack");
  transfer_cmd->add_option("--labels", labels, "input label map (default: <pack>/labels.png)");
  transfer_cmd->add_option("--target", targets, "IMG[:LABELS], repeatable");
  transfer_cmd->add_option("--rule", rules, "IN:TI:TL, repeatable");
  transfer_cmd->add_option("--out", out, "output directory");
  transfer_cmd->add_option("--loss", common.loss, "sw, cramer or gram")
      ->check(CLI::IsMember({"sw", "cramer", "gram"}));
  transfer_cmd->add_flag("--per-pixel", per_pixel, "optimize map texels directly (baseline)");
  add_common(transfer_cmd, common);

  auto* render_cmd = app.add_subcommand("render", "render a preview of a material pack");
  render_cmd->add_option("--pack", pack)->required();
  render_cmd->add_option("--out", out)->required();
  render_cmd->add_option("--tile", tile, "k x k tiling");
  render_cmd->add_option("--light-height", height);
  render_cmd->add_option("--intensity", intensity);
  render_cmd->add_option("--gamma", gamma);

  auto* check_cmd = app.add_subcommand("check-tileable", "report seam metrics of a pack");
  check_cmd->add_option("--pack", pack)->required();

  auto* demo_cmd = app.add_subcommand("make-demo", "write synthetic demo assets");
  demo_cmd->add_option("--out", out)->required();
  demo_cmd->add_option("--seed", demo_seed);
  demo_cmd->add_option("--size", demo_size, "map resolution (default 64)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kBadInput;
  }

  try {
    if (*project_cmd) return cmd_project(common, pack, generator, out, report, prior);
    if (*transfer_cmd)
      return cmd_transfer(common, theta, pack, labels, targets, rules, out, per_pixel);
    if (*render_cmd) return cmd_render(pack, out, tile, height, intensity, gamma);
    if (*check_cmd) return cmd_check(pack);
    if (*demo_cmd) {
      demo::make_demo(out, demo_seed, demo_size);
      std::cout << "wrote demo assets to " << out << "\n";
      return kOk;
    }
  } catch (const OptimizationError& e) {
    std::cerr << "matx: " << e.what() << "\n";
    return kOptimFailed;
  } catch (const Error& e) {
    std::cerr << "matx: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "matx: " << e.what() << "\n";
    return kOptimFailed;
  }
  return kBadInput;
}
