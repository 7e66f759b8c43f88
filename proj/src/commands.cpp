#include "mfdet/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mfdet/error.hpp"
#include "mfdet/surgery.hpp"

namespace mfdet {
namespace {

std::string substitute_n(const std::string& pattern, std::size_t n) {
  std::string out = pattern;
  const auto pos = out.find("{n}");
  if (pos != std::string::npos) out.replace(pos, 3, std::to_string(n));
  return out;
}

SamplingSpec sampling_for(const Checkpoint& ck, const std::optional<SamplingSpec>& requested,
                          const std::filesystem::path& path) {
  SamplingSpec spec;
  if (requested) {
    spec = *requested;
  } else if (auto it = ck.metadata.find("train.sampling"); it != ck.metadata.end()) {
    spec = parse_sampling(it->second);
  } else {
    spec = SamplingSpec::adjacent(ck.model.config.fusion.frames);
  }
  const std::size_t n = resolve_offsets(spec).size();
  if (n != ck.model.config.fusion.frames)
    throw ConfigError("sampling " + to_string(spec) + " provides " + std::to_string(n) + " frames but checkpoint '" +
                      path.string() + "' (" + to_string(ck.model.config.fusion) + ") expects " +
                      std::to_string(ck.model.config.fusion.frames));
  return spec;
}

std::vector<std::size_t> split_indices(const std::string& split, std::size_t count, double val, double test) {
  if (split == "all") {
    std::vector<std::size_t> all(count);
    for (std::size_t i = 0; i < count; ++i) all[i] = i;
    return all;
  }
  const SequenceSplit s = split_sequences(count, val, test);
  if (split == "train") return s.train;
  if (split == "val") return s.val;
  if (split == "test") return s.test;
  throw ConfigError("unknown split '" + split + "' (expected train, val, test or all)");
}

FrameStack select_stack(const FrameSelection& sel, const Checkpoint& ck) {
  const Dataset dataset = read_dataset(sel.dataset_root);
  if (sel.sequence >= dataset.sequences.size())
    throw ConfigError("sequence " + std::to_string(sel.sequence) + " out of range (dataset has " +
                      std::to_string(dataset.sequences.size()) + ")");
  const SamplingSpec spec = sampling_for(ck, sel.sampling, sel.checkpoint);
  return build_stack(dataset.sequences[sel.sequence], sel.frame, spec);
}

std::string with_commas(std::int64_t v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) digits.insert(static_cast<std::size_t>(i), ",");
  return (v < 0 ? "-" : "") + digits;
}

}  // namespace

void cmd_generate(const GenerateOptions& o, std::ostream& out) {
  if (o.output.empty()) throw ConfigError("generate needs an output directory");
  const Dataset dataset = generate_dataset(o.preset, o.seed, o.sequences, o.frames, o.size, o.fps);
  write_dataset(dataset, o.output);
  out << "wrote " << dataset.sequences.size() << " sequences x " << o.frames << " frames (" << o.size << "px, preset "
      << o.preset << ", degradations " << dataset.meta.extra.at("degradations") << ") to " << o.output.string()
      << "\n";
}

TrainResult cmd_train(const RunConfig& config, std::ostream& out) {
  validate(config);
  const Dataset dataset = read_dataset(config.dataset_root);
  std::filesystem::create_directories(config.output_dir);
  const auto log_path = config.output_dir / "train_log.csv";
  std::ofstream log(log_path);
  if (!log) throw ConfigError("cannot write '" + log_path.string() + "'");
  log << log_csv_header() << "\n";

  double best = -1.0;
  TrainResult result = train(config, dataset, [&](const EpochLog& row, const LayerStack& model, bool improved) {
    log << log_csv_row(row) << "\n";
    log.flush();
    if (improved) {
      best = row.val.map50;
      save_checkpoint({model, run_metadata(config, row.epoch, best)}, config.output_dir / "best.ckpt");
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "epoch %3zu  lr %.4g  loss %.4f (obj %.4f cls %.4f box %.4f)  val mAP50 %.4f%s\n",
                  row.epoch, static_cast<double>(row.learning_rate), row.loss.total, row.loss.objectness,
                  row.loss.classification, row.loss.box, row.val.map50, improved ? "  *" : "");
    out << buf;
  });
  save_checkpoint({result.last, run_metadata(config, config.epochs, result.best_val_map50)},
                  config.output_dir / "last.ckpt");
  out << "best epoch " << result.best_epoch << " (val mAP50 " << result.best_val_map50 << ") -> "
      << (config.output_dir / "best.ckpt").string() << "\n";
  return result;
}

EquivalenceReport cmd_surgery(const SurgeryOptions& o, std::ostream& out) {
  const Checkpoint source = load_checkpoint(o.input);
  if (source.model.config.fusion.kind != FusionKind::Single)
    throw ConfigError("checkpoint '" + o.input.string() + "' is already multi-frame (" +
                      to_string(source.model.config.fusion) + ")");
  if (o.mode == FusionKind::Single) throw ConfigError("surgery needs mode early or grouped");
  const FusionMode mode{o.mode, o.frames};
  Checkpoint adapted{adapt(source.model, mode), source.metadata};
  const EquivalenceReport report = verify_equivalence(adapted.model, source.model, o.frames, o.trials, o.tolerance,
                                                      o.seed);
  out << report.summary() << "\n";
  if (!report.passed && !o.force)
    throw ConfigError("equivalence check failed; refusing to write '" + o.output.string() + "' (use --force)");
  adapted.metadata.erase("train.sampling");
  adapted.metadata["surgery.source"] = o.input.filename().string();
  adapted.metadata["surgery.mode"] = to_string(mode);
  save_checkpoint(adapted, o.output);
  out << "wrote " << o.output.string() << "\n";
  return report;
}

std::vector<std::pair<std::string, EvalReport>> cmd_eval(const EvalCommandOptions& o, std::ostream& out) {
  const Dataset dataset = read_dataset(o.dataset_root);
  const auto indices = split_indices(o.split, dataset.sequences.size(), o.val_fraction, o.test_fraction);

  std::vector<std::pair<std::filesystem::path, std::string>> jobs;
  const std::string pattern = o.checkpoint.string();
  if (o.sweep.empty()) {
    jobs.emplace_back(o.checkpoint, o.checkpoint.stem().string());
  } else {
    if (pattern.find("{n}") == std::string::npos)
      throw ConfigError("sweeping needs a checkpoint pattern containing {n}");
    for (std::size_t n : o.sweep) jobs.emplace_back(substitute_n(pattern, n), "n=" + std::to_string(n));
  }

  std::vector<std::pair<std::string, EvalReport>> rows;
  for (const auto& [path, name] : jobs) {
    const Checkpoint ck = load_checkpoint(path);
    std::optional<SamplingSpec> requested = o.sampling;
    if (!o.sweep.empty() && !requested) requested = SamplingSpec::adjacent(ck.model.config.fusion.frames);
    const SamplingSpec spec = sampling_for(ck, requested, path);
    const auto stacks = make_stacks(dataset, indices, spec);
    if (stacks.empty()) throw ConfigError("split '" + o.split + "' has no labelled frames");
    EvalReport report = o.oracle ? evaluate(o.oracle, stacks, o.eval) : evaluate(ck.model, stacks, o.eval);
    report.params = count_params(ck.model);
    report.flops = count_flops(ck.model, ck.model.config.input_size);
    if (o.bench_runs > 0) {
      const std::size_t s = ck.model.config.input_size;
      report.latency = time_inference(ck.model, {1, ck.model.config.fusion.input_channels(), s, s}, 5, o.bench_runs);
    }
    rows.emplace_back(name, std::move(report));
  }
  out << format_table(rows);
  if (!o.csv.empty()) {
    std::ofstream csv(o.csv);
    if (!csv) throw ConfigError("cannot write '" + o.csv.string() + "'");
    csv << csv_header() << "\n";
    for (const auto& [name, r] : rows) csv << csv_row(name, r) << "\n";
  }
  return rows;
}

std::vector<Detection> cmd_predict(const FrameSelection& sel, const EvalOptions& options, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(sel.checkpoint);
  const FrameStack stack = select_stack(sel, ck);
  const auto detections = predict(ck.model, stack, options);
  Image frame = stack.frames.back();
  for (const auto& d : detections) {
    draw_box(frame, d.box.cx, d.box.cy, d.box.w, d.box.h, {255, 255, 0});
    char buf[160];
    std::snprintf(buf, sizeof buf, "class %d conf %.4f box %.4f %.4f %.4f %.4f\n", d.class_id,
                  static_cast<double>(d.confidence), static_cast<double>(d.box.cx), static_cast<double>(d.box.cy),
                  static_cast<double>(d.box.w), static_cast<double>(d.box.h));
    out << buf;
  }
  if (!sel.output.empty()) write_ppm(frame, sel.output);
  out << detections.size() << " detections\n";
  return detections;
}

Heatmap cmd_cam(const FrameSelection& sel, float conf_threshold, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(sel.checkpoint);
  const FrameStack stack = select_stack(sel, ck);
  const Heatmap map = grad_cam_pp(ck.model, stack_to_tensor(stack), conf_threshold);
  if (!sel.output.empty()) export_heatmap(map, stack.frames.back(), sel.output);
  out << "heatmap " << map.width << "x" << map.height << ", target score " << map.target_score << " from "
      << (map.selected_detections ? std::to_string(map.selected_detections) + " detections" : std::string("all cells"))
      << "\n";
  return map;
}

std::vector<FlopsRow> cmd_flops(const FlopsOptions& o, std::ostream& out) {
  std::vector<std::pair<std::string, ModelConfig>> configs;
  if (!o.checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    configs.emplace_back(to_string(ck.model.config.fusion), ck.model.config);
  } else {
    for (const auto& mode : o.modes) {
      ModelConfig c;
      c.input_size = o.input_size;
      c.fusion = mode;
      c.base_width = o.base_width;
      c.num_classes = o.num_classes;
      validate(c);
      configs.emplace_back(to_string(mode), c);
    }
  }
  std::vector<FlopsRow> rows;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-12s %12s %16s %10s %16s\n", "model", "params", "FLOPs", "d_params", "d_FLOPs");
  out << buf;
  for (const auto& [name, c] : configs) {
    ModelConfig base = c;
    base.fusion = FusionMode::single();
    const std::size_t size = o.checkpoint.empty() ? o.input_size : c.input_size;
    FlopsRow row{name, count_params(layer_specs(c)), count_flops(layer_specs(c), size), 0, 0};
    row.params_delta = static_cast<std::int64_t>(row.params) - static_cast<std::int64_t>(count_params(layer_specs(base)));
    row.flops_delta =
        static_cast<std::int64_t>(row.flops) - static_cast<std::int64_t>(count_flops(layer_specs(base), size));
    const std::string dp = (row.params_delta >= 0 ? "+" : "") + with_commas(row.params_delta);
    const std::string df = (row.flops_delta >= 0 ? "+" : "") + with_commas(row.flops_delta);
    std::snprintf(buf, sizeof buf, "%-12s %12s %16s %10s %16s\n", name.c_str(),
                  with_commas(static_cast<std::int64_t>(row.params)).c_str(),
                  with_commas(static_cast<std::int64_t>(row.flops)).c_str(), dp.c_str(), df.c_str());
    out << buf;
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::pair<std::string, LatencyStats>> cmd_bench(const BenchOptions& o, std::ostream& out) {
  std::vector<std::pair<std::string, LatencyStats>> rows;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-12s %10s %10s %10s %6s\n", "model", "mean ms", "median ms", "p95 ms", "runs");
  out << buf;
  for (const auto& mode : o.modes) {
    ModelConfig c;
    c.input_size = o.input_size;
    c.fusion = mode;
    c.base_width = o.base_width;
    const LayerStack model = build_model(c, o.seed);
    const auto stats = time_inference(model, {1, mode.input_channels(), o.input_size, o.input_size}, o.warmup, o.runs);
    std::snprintf(buf, sizeof buf, "%-12s %10.3f %10.3f %10.3f %6zu\n", to_string(mode).c_str(), stats.mean_ms,
                  stats.median_ms, stats.p95_ms, stats.runs);
    out << buf;
    rows.emplace_back(to_string(mode), stats);
  }
  return rows;
}

std::vector<FusionMode> parse_mode_list(const std::string& text) {
  std::vector<FusionMode> modes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) modes.push_back(parse_fusion_mode(item));
  if (modes.empty()) throw ConfigError("empty fusion mode list");
  return modes;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v == 0) throw ConfigError("bad positive integer '" + item + "' in list");
    values.push_back(v);
  }
  return values;
}

}  // namespace mfdet
