// duoflow command line: synthesize ground-truth instances, run the joint
// flow/layer estimation, and evaluate results against ground truth.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "duoflow/duoflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct EstimateOptions {
  std::string i0, i1, out, mode_str = "static", reg = "tv";
  std::vector<std::string> init_layers;
  std::string gt_dir;
  duoflow::SolverConfig cfg;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int run_synthesize(const std::string& out_dir, std::uint64_t seed,
                   const std::string& mode, int size_h, int size_w) {
  auto bundles = duoflow::standard_suite(seed, size_h, size_w);
  int written = 0;
  for (const auto& b : bundles) {
    const bool is_static = b.mode == duoflow::Mode::kStaticForeground;
    if (mode == "static" && !is_static) continue;
    if (mode == "dynamic" && is_static) continue;
    duoflow::save_bundle(b, out_dir + "/" + b.name);
    ++written;
  }
  std::cout << "wrote " << written << " instances to " << out_dir << "\n";
  return 0;
}

int run_estimate(const EstimateOptions& opt) {
  const duoflow::Image i0 = duoflow::read_image(opt.i0);
  const duoflow::Image i1 = duoflow::read_image(opt.i1);
  const duoflow::Mode mode = opt.mode_str == "static"
                                 ? duoflow::Mode::kStaticForeground
                                 : duoflow::Mode::kDynamicForeground;

  duoflow::SolverConfig cfg = opt.cfg;
  cfg.weights.tgv_order = opt.reg == "tgv2" ? 2 : 1;
  if (mode == duoflow::Mode::kStaticForeground) {
    cfg.init.kind = duoflow::InitPolicy::kZeroForeground;
    if (!opt.init_layers.empty()) {
      cfg.init.kind = duoflow::InitPolicy::kSuppliedLayers;
    }
  } else {
    if (opt.init_layers.empty()) {
      std::cerr << "duoflow estimate: dynamic mode requires an initial layer "
                   "separation; pass --init-layers L1 L1p L2 L2p (the "
                   "zero-foreground initialization only applies to the "
                   "static case)\n";
      return 2;
    }
    cfg.init.kind = duoflow::InitPolicy::kSuppliedLayers;
  }
  if (cfg.init.kind == duoflow::InitPolicy::kSuppliedLayers) {
    if (opt.init_layers.size() != 4) {
      std::cerr << "duoflow estimate: --init-layers expects exactly four "
                   "paths (L1 L1p L2 L2p)\n";
      return 2;
    }
    duoflow::LayerDecomposition dec;
    dec.l1 = duoflow::read_image(opt.init_layers[0]);
    dec.l1p = duoflow::read_image(opt.init_layers[1]);
    dec.l2 = duoflow::read_image(opt.init_layers[2]);
    dec.l2p = duoflow::read_image(opt.init_layers[3]);
    dec.c = cfg.c;
    cfg.init.layers = std::move(dec);
  }

  duoflow::GroundTruth gt;
  const duoflow::GroundTruth* gt_ptr = nullptr;
  if (!opt.gt_dir.empty()) {
    if (fs::exists(opt.gt_dir + "/U.flo"))
      gt.flow_u = duoflow::read_flo(opt.gt_dir + "/U.flo");
    if (fs::exists(opt.gt_dir + "/V.flo"))
      gt.flow_v = duoflow::read_flo(opt.gt_dir + "/V.flo");
    if (fs::exists(opt.gt_dir + "/L2.png"))
      gt.l2 = duoflow::read_image(opt.gt_dir + "/L2.png");
    gt_ptr = &gt;
  }

  const duoflow::AlternateResult res =
      duoflow::alternate(i0, i1, mode, cfg, gt_ptr);

  fs::create_directories(opt.out);
  duoflow::write_image(res.dec.l1, opt.out + "/L1.png", 16);
  duoflow::write_image(res.dec.l1p, opt.out + "/L1p.png", 16);
  duoflow::write_image(res.dec.l2, opt.out + "/L2.png", 16);
  duoflow::write_image(res.dec.l2p, opt.out + "/L2p.png", 16);
  duoflow::write_flo(res.flow_u, opt.out + "/U.flo");
  duoflow::write_image(duoflow::flow_to_color(res.flow_u),
                       opt.out + "/U_color.png", 8);
  duoflow::write_flo(res.initial_u, opt.out + "/naive_U.flo");
  if (mode == duoflow::Mode::kDynamicForeground) {
    duoflow::write_flo(res.flow_v, opt.out + "/V.flo");
    duoflow::write_image(duoflow::flow_to_color(res.flow_v),
                         opt.out + "/V_color.png", 8);
    duoflow::write_flo(res.initial_v, opt.out + "/naive_V.flo");
  }
  const duoflow::ConvergenceReport rep =
      duoflow::convergence_report(res.trace);
  write_text(opt.out + "/trace.csv", rep.csv);
  std::cout << rep.summary << "\n";
  return 0;
}

int run_evaluate(const std::string& result_dir, const std::string& gt_dir,
                 std::string out_path) {
  json report;
  std::vector<std::string> missing;

  auto image_if = [&](const std::string& path) -> std::optional<duoflow::Image> {
    if (!fs::exists(path)) {
      missing.push_back(fs::path(path).filename().string());
      return std::nullopt;
    }
    return duoflow::read_image(path);
  };
  auto flow_if = [&](const std::string& path,
                     bool note) -> std::optional<duoflow::FlowField> {
    if (!fs::exists(path)) {
      if (note) missing.push_back(fs::path(path).filename().string());
      return std::nullopt;
    }
    return duoflow::read_flo(path);
  };

  const auto l1 = image_if(result_dir + "/L1.png");
  const auto l1p = image_if(result_dir + "/L1p.png");
  const auto l2 = image_if(result_dir + "/L2.png");
  const auto l2p = image_if(result_dir + "/L2p.png");
  const auto flow_u = flow_if(result_dir + "/U.flo", true);
  auto flow_v = flow_if(result_dir + "/V.flo", false);
  if (!flow_v && l2) {
    // Static results carry no V; the foreground flow is identically zero.
    flow_v = duoflow::FlowField(l2->height, l2->width);
  }

  const auto gt_u = flow_if(gt_dir + "/U.flo", true);
  const auto gt_v = flow_if(gt_dir + "/V.flo", true);
  const auto gt_l2 = image_if(gt_dir + "/L2.png");

  if (flow_u && gt_u) report["epe_u"] = duoflow::epe_mean(*flow_u, *gt_u);
  if (flow_v && gt_v) report["epe_v"] = duoflow::epe_mean(*flow_v, *gt_v);
  if (gt_l2 && l2) report["layer_err"] = duoflow::layer_error_ncc(*gt_l2, *l2);
  // Warping errors sample the second-frame layer at x + flow(x) and compare
  // to the first-frame layer at x, which is the direction the generalized
  // brightness constancy makes exactly zero at ground truth.
  if (l1 && l1p && flow_u)
    report["warp_err_l1"] = duoflow::warping_error(*l1p, *l1, *flow_u);
  if (l2 && l2p && flow_v)
    report["warp_err_l2"] = duoflow::warping_error(*l2p, *l2, *flow_v);

  const auto naive_u = flow_if(result_dir + "/naive_U.flo", false);
  if (naive_u && gt_u) {
    const double epe = duoflow::epe_mean(*naive_u, *gt_u);
    report["epe_u_naive"] = epe;
    if (report.contains("epe_u"))
      report["delta_epe_u"] = epe - report["epe_u"].get<double>();
  }
  const auto naive_v = flow_if(result_dir + "/naive_V.flo", false);
  if (naive_v && gt_v) {
    const double epe = duoflow::epe_mean(*naive_v, *gt_v);
    report["epe_v_naive"] = epe;
    if (report.contains("epe_v"))
      report["delta_epe_v"] = epe - report["epe_v"].get<double>();
  }
  if (!missing.empty()) report["missing"] = missing;

  const std::string text = report.dump(2);
  std::cout << text << "\n";
  if (out_path.empty()) out_path = result_dir + "/evaluation.json";
  write_text(out_path, text + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint double-layer optical flow and layer separation"};
  app.require_subcommand(1);

  // synthesize
  auto* synth = app.add_subcommand(
      "synthesize", "generate ground-truth instances of the standard suite");
  std::string synth_out, synth_mode = "both", synth_size;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "suite seed");
  synth->add_option("--mode", synth_mode, "static | dynamic | both")
      ->check(CLI::IsMember({"static", "dynamic", "both"}));
  synth->add_option("--size", synth_size, "override instance size, HxW");

  // estimate
  auto* est = app.add_subcommand(
      "estimate", "jointly estimate flow(s) and the two layers");
  EstimateOptions opt;
  bool no_median = false;
  est->set_config("--config", "", "key=value config file (flags win)");
  est->add_option("--i0", opt.i0, "first frame")->required();
  est->add_option("--i1", opt.i1, "second frame")->required();
  est->add_option("--mode", opt.mode_str, "static | dynamic")
      ->required()
      ->check(CLI::IsMember({"static", "dynamic"}));
  est->add_option("--out", opt.out, "output directory")->required();
  est->add_option("--c", opt.cfg.c, "foreground brightness bound");
  est->add_option("--lambda-l", opt.cfg.weights.lambda_l,
                  "layer prior weight");
  est->add_option("--lambda-f", opt.cfg.weights.lambda_f, "flow prior weight");
  est->add_option("--reg", opt.reg, "flow regularizer: tv | tgv2")
      ->check(CLI::IsMember({"tv", "tgv2"}));
  est->add_option("--tgv-alpha1", opt.cfg.weights.tgv_alpha.first_order,
                  "TGV^2 first-order weight");
  est->add_option("--tgv-alpha0", opt.cfg.weights.tgv_alpha.second_order,
                  "TGV^2 second-order weight");
  est->add_option("--outer", opt.cfg.outer_iters, "outer iterations");
  est->add_option("--stop-tol", opt.cfg.stop_tol,
                  "relative energy decrease stop (0 = fixed count)");
  est->add_option("--init-layers", opt.init_layers,
                  "initial layer images: L1 L1p L2 L2p")
      ->expected(4);
  est->add_option("--theta", opt.cfg.relax.theta, "quadratic coupling weight");
  est->add_option("--warps", opt.cfg.relax.warps_per_level,
                  "warps per pyramid level");
  est->add_option("--rounds", opt.cfg.relax.relax_rounds,
                  "prox alternations per warp");
  est->add_option("--pd-iters", opt.cfg.relax.pd_iters,
                  "primal-dual iterations per smoothness prox");
  est->add_option("--pyramid-scale", opt.cfg.relax.scale_factor,
                  "pyramid scale factor");
  est->add_option("--min-size", opt.cfg.relax.min_size,
                  "coarsest pyramid size");
  est->add_flag("--no-median", no_median, "disable the 5x5 flow median");
  est->add_option("--irls-epsilon", opt.cfg.irls.epsilon, "IRLS smoothing");
  est->add_option("--irls-outer", opt.cfg.irls.max_outer,
                  "IRLS reweighting iterations");
  est->add_option("--irls-sweeps", opt.cfg.irls.inner_sweeps,
                  "Gauss-Seidel sweeps per reweighting");
  est->add_option("--gt", opt.gt_dir,
                  "ground-truth bundle directory for trace metrics");

  // evaluate
  auto* eval = app.add_subcommand(
      "evaluate", "compare an estimate directory against a ground-truth bundle");
  std::string eval_result, eval_gt, eval_out;
  eval->add_option("--result", eval_result, "estimate output directory")
      ->required();
  eval->add_option("--gt", eval_gt, "ground-truth bundle directory")
      ->required();
  eval->add_option("--out", eval_out,
                   "report path (default RESULT/evaluation.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      int size_h = 0, size_w = 0;
      if (!synth_size.empty()) {
        const auto xpos = synth_size.find('x');
        if (xpos == std::string::npos)
          throw std::runtime_error("--size expects HxW");
        size_h = std::stoi(synth_size.substr(0, xpos));
        size_w = std::stoi(synth_size.substr(xpos + 1));
      }
      return run_synthesize(synth_out, synth_seed, synth_mode, size_h, size_w);
    }
    if (est->parsed()) {
      opt.cfg.relax.median_filter = !no_median;
      return run_estimate(opt);
    }
    if (eval->parsed()) {
      return run_evaluate(eval_result, eval_gt, eval_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "duoflow: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
