// mfdet command-line front end.
#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mfdet/commands.hpp"
#include "mfdet/error.hpp"

namespace {

// Expands "--config FILE" into "--key=value" tokens at the position of the
// flag, so explicit flags given later on the command line take precedence.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    std::string path;
    if (a == "--config" && i + 1 < argc) {
      path = argv[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    } else {
      args.push_back(a);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw mfdet::ConfigError("cannot read config file '" + path + "'");
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw mfdet::ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t\r"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
        return s;
      };
      std::string key = trim(line.substr(0, eq));
      std::replace(key.begin(), key.end(), '_', '-');
      args.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-frame stacking detector: data generation, training, weight surgery and evaluation"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // generate
  mfdet::GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Render a synthetic video dataset");
  g->add_option("--preset", gen.preset, "Scenario preset")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--sequences", gen.sequences)->capture_default_str();
  g->add_option("--frames", gen.frames, "Frames per sequence")->capture_default_str();
  g->add_option("--size", gen.size, "Frame width and height in pixels")->capture_default_str();
  g->add_option("--fps", gen.fps)->capture_default_str();
  g->add_option("--output", gen.output, "Dataset root")->required();

  // train
  mfdet::RunConfig run;
  std::string run_sampling, run_fusion;
  auto* t = app.add_subcommand("train", "Train a detector on a dataset directory");
  t->add_option("--dataset", run.dataset_root)->required();
  t->add_option("--output", run.output_dir, "Run directory")->capture_default_str();
  t->add_option("--sampling", run_sampling, "adjacent:N, stepped:N:S or explicit:o1,..,0");
  t->add_option("--fusion", run_fusion, "single, early:N or grouped:N (default follows --sampling)");
  t->add_option("--epochs", run.epochs)->capture_default_str();
  t->add_option("--batch-size", run.batch_size)->capture_default_str();
  t->add_option("--lr", run.learning_rate)->capture_default_str();
  t->add_option("--lr-decay", run.lr_decay)->capture_default_str();
  t->add_option("--lr-decay-at", run.lr_decay_at, "Fraction of epochs before the decay")->capture_default_str();
  t->add_option("--momentum", run.momentum)->capture_default_str();
  t->add_option("--weight-decay", run.weight_decay)->capture_default_str();
  t->add_option("--seed", run.seed)->capture_default_str();
  t->add_option("--val-fraction", run.val_fraction)->capture_default_str();
  t->add_option("--test-fraction", run.test_fraction)->capture_default_str();
  t->add_option("--conf", run.conf_threshold)->capture_default_str();
  t->add_option("--nms-iou", run.nms_iou)->capture_default_str();
  t->add_flag("--augment,!--no-augment", run.augment)->capture_default_str();
  t->add_option("--base-width", run.base_width)->capture_default_str();
  t->add_option("--anchors", run.num_anchors)->capture_default_str();
  t->add_option("--init", run.init_checkpoint, "Starting checkpoint");

  // surgery
  mfdet::SurgeryOptions sur;
  std::string sur_mode = "early";
  auto* s = app.add_subcommand("surgery", "Adapt a single-frame checkpoint to a frame stack");
  s->add_option("--input", sur.input)->required();
  s->add_option("--output", sur.output)->required();
  s->add_option("--mode", sur_mode, "early or grouped")->capture_default_str();
  s->add_option("--frames", sur.frames)->capture_default_str();
  s->add_option("--trials", sur.trials)->capture_default_str();
  s->add_option("--tolerance", sur.tolerance)->capture_default_str();
  s->add_option("--seed", sur.seed)->capture_default_str();
  s->add_flag("--force", sur.force, "Write even when verification fails");

  // eval
  mfdet::EvalCommandOptions ev;
  std::string ev_sampling, ev_sweep;
  auto* e = app.add_subcommand("eval", "Evaluate checkpoints on a dataset split");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint path ({n} is replaced when sweeping)")->required();
  e->add_option("--dataset", ev.dataset_root)->required();
  e->add_option("--sampling", ev_sampling);
  e->add_option("--split", ev.split, "train, val, test or all")->capture_default_str();
  e->add_option("--val-fraction", ev.val_fraction)->capture_default_str();
  e->add_option("--test-fraction", ev.test_fraction)->capture_default_str();
  e->add_option("--conf", ev.eval.conf_threshold)->capture_default_str();
  e->add_option("--nms-iou", ev.eval.nms_iou)->capture_default_str();
  e->add_option("--sweep", ev_sweep, "Frame counts, e.g. 1,3,5,7,9");
  e->add_option("--bench-runs", ev.bench_runs)->capture_default_str();
  e->add_option("--csv", ev.csv);

  // predict / cam
  mfdet::FrameSelection sel;
  std::string sel_sampling;
  mfdet::EvalOptions pred_opts;
  auto add_selection = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", sel.checkpoint)->required();
    sub->add_option("--dataset", sel.dataset_root)->required();
    sub->add_option("--sequence", sel.sequence)->capture_default_str();
    sub->add_option("--frame", sel.frame)->capture_default_str();
    sub->add_option("--sampling", sel_sampling);
    sub->add_option("--output", sel.output, "PPM output path");
    sub->add_option("--conf", pred_opts.conf_threshold)->capture_default_str();
  };
  auto* p = app.add_subcommand("predict", "Draw detections for one target frame");
  add_selection(p);
  p->add_option("--nms-iou", pred_opts.nms_iou)->capture_default_str();
  auto* c = app.add_subcommand("cam", "Grad-CAM++ overlay for one target frame");
  add_selection(c);

  // flops
  mfdet::FlopsOptions fl;
  std::string fl_modes = "single";
  auto* f = app.add_subcommand("flops", "Parameter and FLOP counts");
  f->add_option("--checkpoint", fl.checkpoint);
  f->add_option("--modes", fl_modes, "Comma-separated fusion modes")->capture_default_str();
  f->add_option("--input-size", fl.input_size)->capture_default_str();
  f->add_option("--base-width", fl.base_width)->capture_default_str();
  f->add_option("--classes", fl.num_classes)->capture_default_str();

  // bench
  mfdet::BenchOptions be;
  std::string be_modes = "single,early:7";
  auto* b = app.add_subcommand("bench", "Forward latency of freshly built models");
  b->add_option("--modes", be_modes)->capture_default_str();
  b->add_option("--input-size", be.input_size)->capture_default_str();
  b->add_option("--base-width", be.base_width)->capture_default_str();
  b->add_option("--warmup", be.warmup)->capture_default_str();
  b->add_option("--runs", be.runs)->capture_default_str();
  b->add_option("--seed", be.seed)->capture_default_str();

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const mfdet::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }

  try {
    if (*g) {
      mfdet::cmd_generate(gen, std::cout);
    } else if (*t) {
      if (!run_sampling.empty()) run.sampling = mfdet::parse_sampling(run_sampling);
      const std::size_t n = mfdet::resolve_offsets(run.sampling).size();
      if (!run_fusion.empty())
        run.fusion = mfdet::parse_fusion_mode(run_fusion);
      else
        run.fusion = n == 1 ? mfdet::FusionMode::single() : mfdet::FusionMode::early_fusion(n);
      mfdet::cmd_train(run, std::cout);
    } else if (*s) {
      if (sur_mode == "early")
        sur.mode = mfdet::FusionKind::EarlyFusion;
      else if (sur_mode == "grouped")
        sur.mode = mfdet::FusionKind::Grouped;
      else
        throw mfdet::ConfigError("surgery mode must be early or grouped, got '" + sur_mode + "'");
      mfdet::cmd_surgery(sur, std::cout);
    } else if (*e) {
      if (!ev_sampling.empty()) ev.sampling = mfdet::parse_sampling(ev_sampling);
      if (!ev_sweep.empty()) ev.sweep = mfdet::parse_size_list(ev_sweep);
      mfdet::cmd_eval(ev, std::cout);
    } else if (*p || *c) {
      if (!sel_sampling.empty()) sel.sampling = mfdet::parse_sampling(sel_sampling);
      if (*p)
        mfdet::cmd_predict(sel, pred_opts, std::cout);
      else
        mfdet::cmd_cam(sel, pred_opts.conf_threshold, std::cout);
    } else if (*f) {
      fl.modes = mfdet::parse_mode_list(fl_modes);
      mfdet::cmd_flops(fl, std::cout);
    } else if (*b) {
      be.modes = mfdet::parse_mode_list(be_modes);
      mfdet::cmd_bench(be, std::cout);
    }
  } catch (const mfdet::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const mfdet::FormatError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
