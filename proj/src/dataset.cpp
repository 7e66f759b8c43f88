#include "mfdet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mfdet/error.hpp"

namespace mfdet {
namespace fs = std::filesystem;

namespace {

std::string frame_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu", index);
  return buf;
}

std::string sequence_dir(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%04zu", id);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_label_line(const BoxLabel& label) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f", label.class_id, static_cast<double>(label.box.cx),
                static_cast<double>(label.box.cy), static_cast<double>(label.box.w), static_cast<double>(label.box.h));
  return buf;
}

std::vector<BoxLabel> parse_label_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open label file '" + path.string() + "'");
  std::vector<BoxLabel> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    BoxLabel l;
    if (!(ls >> l.class_id >> l.box.cx >> l.box.cy >> l.box.w >> l.box.h))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'class cx cy w h'");
    std::string extra;
    if (ls >> extra) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": trailing fields");
    labels.push_back(l);
  }
  return labels;
}

void write_dataset(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  {
    std::ofstream meta(root / "meta.txt");
    if (!meta) throw FormatError("cannot write '" + (root / "meta.txt").string() + "'");
    meta << "fps=" << dataset.meta.fps << '\n'
         << "width=" << dataset.meta.width << '\n'
         << "height=" << dataset.meta.height << '\n'
         << "num_sequences=" << dataset.sequences.size() << '\n';
    for (const auto& [k, v] : dataset.meta.extra) meta << k << '=' << v << '\n';
  }
  for (const auto& seq : dataset.sequences) {
    const fs::path dir = root / sequence_dir(seq.id);
    fs::create_directories(dir / "frames");
    fs::create_directories(dir / "labels");
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      write_ppm(seq.frames[t], dir / "frames" / (frame_stem(t) + ".ppm"));
      if (t < seq.labels.size() && seq.labels[t]) {
        std::ofstream lf(dir / "labels" / (frame_stem(t) + ".txt"));
        for (const auto& l : *seq.labels[t]) lf << format_label_line(l) << '\n';
      }
    }
  }
}

Dataset read_dataset(const fs::path& root) {
  Dataset ds;
  std::ifstream meta(root / "meta.txt");
  if (!meta) throw FormatError("dataset '" + root.string() + "' has no meta.txt");
  std::string line;
  std::set<std::string> seen;
  while (std::getline(meta, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("meta.txt line without '=': " + line);
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    seen.insert(key);
    try {
      if (key == "fps")
        ds.meta.fps = std::stod(value);
      else if (key == "width")
        ds.meta.width = std::stoul(value);
      else if (key == "height")
        ds.meta.height = std::stoul(value);
      else if (key == "num_sequences")
        ds.meta.num_sequences = std::stoul(value);
      else
        ds.meta.extra[key] = value;
    } catch (const std::exception&) {
      throw FormatError("meta.txt has a bad value for '" + key + "': " + value);
    }
  }
  for (const char* k : {"fps", "width", "height", "num_sequences"})
    if (!seen.count(k)) throw FormatError(std::string("meta.txt is missing '") + k + "'");

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && entry.path().filename().string().rfind("seq_", 0) == 0) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.size() != ds.meta.num_sequences)
    throw FormatError("meta.txt declares " + std::to_string(ds.meta.num_sequences) + " sequences but " +
                      std::to_string(dirs.size()) + " were found");

  for (const auto& dir : dirs) {
    Sequence seq;
    try {
      seq.id = std::stoul(dir.filename().string().substr(4));
    } catch (const std::exception&) {
      throw FormatError("bad sequence directory name '" + dir.filename().string() + "'");
    }
    for (std::size_t t = 0;; ++t) {
      const fs::path frame = dir / "frames" / (frame_stem(t) + ".ppm");
      if (!fs::exists(frame)) break;
      Image img = read_ppm(frame);
      if (img.width != ds.meta.width || img.height != ds.meta.height)
        throw FormatError("frame '" + frame.string() + "' does not match the dataset resolution");
      seq.frames.push_back(std::move(img));
      const fs::path label = dir / "labels" / (frame_stem(t) + ".txt");
      if (fs::exists(label))
        seq.labels.emplace_back(parse_label_file(label));
      else
        seq.labels.emplace_back(std::nullopt);
    }
    if (seq.frames.empty()) throw FormatError("sequence '" + dir.string() + "' has no frames");
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

Dataset generate_dataset(const std::string& preset, std::uint64_t seed, std::size_t num_sequences,
                         std::size_t num_frames, std::size_t size, double fps) {
  Dataset ds;
  ds.meta.fps = fps;
  ds.meta.width = size;
  ds.meta.height = size;
  ds.meta.num_sequences = num_sequences;
  std::set<std::string> kinds;
  for (std::size_t i = 0; i < num_sequences; ++i) {
    const SceneScript script = make_preset(preset, seed, i, num_frames, size);
    for (const auto& d : script.degradations) kinds.insert(to_string(d.kind));
    RenderedSequence r = render_sequence(script);
    Sequence seq;
    seq.id = i;
    seq.frames = std::move(r.frames);
    for (auto& l : r.labels) seq.labels.emplace_back(std::move(l));
    ds.sequences.push_back(std::move(seq));
  }
  ds.meta.extra["preset"] = preset;
  ds.meta.extra["seed"] = std::to_string(seed);
  ds.meta.extra["num_frames"] = std::to_string(num_frames);
  std::string list;
  for (const auto& k : kinds) list += (list.empty() ? "" : ",") + k;
  ds.meta.extra["degradations"] = list.empty() ? "none" : list;
  return ds;
}

SequenceSplit split_sequences(std::size_t count, double val_fraction, double test_fraction) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0 && test_fraction >= 0.0 && test_fraction < 1.0 &&
        val_fraction + test_fraction < 1.0))
    throw ConfigError("split fractions must lie in [0, 1) and sum to less than 1");
  if (count == 0) throw ConfigError("cannot split an empty dataset");
  std::size_t n_test = static_cast<std::size_t>(std::lround(count * test_fraction));
  std::size_t n_val = static_cast<std::size_t>(std::lround(count * val_fraction));
  while (n_test + n_val >= count && (n_test > 0 || n_val > 0)) {
    if (n_test >= n_val && n_test > 0)
      --n_test;
    else
      --n_val;
  }
  SequenceSplit split;
  const std::size_t n_train = count - n_val - n_test;
  for (std::size_t i = 0; i < count; ++i) {
    if (i < n_train)
      split.train.push_back(i);
    else if (i < n_train + n_val)
      split.val.push_back(i);
    else
      split.test.push_back(i);
  }
  return split;
}

std::vector<FrameStack> make_stacks(const Dataset& dataset, const std::vector<std::size_t>& sequence_indices,
                                    const SamplingSpec& spec) {
  std::vector<FrameStack> stacks;
  for (std::size_t si : sequence_indices) {
    if (si >= dataset.sequences.size()) throw ConfigError("sequence index out of range");
    const auto& seq = dataset.sequences[si];
    for (std::size_t t = 0; t < seq.frames.size(); ++t)
      if (t < seq.labels.size() && seq.labels[t]) stacks.push_back(build_stack(seq, t, spec));
  }
  return stacks;
}

}  // namespace mfdet
