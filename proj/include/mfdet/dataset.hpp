#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfdet/sampling.hpp"
#include "mfdet/scene.hpp"

namespace mfdet {

/// Contents of `meta.txt`. Required keys: fps, width, height,
/// num_sequences; anything else is carried in `extra`.
struct DatasetMeta {
  double fps = 20.0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t num_sequences = 0;
  std::map<std::string, std::string> extra;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Sequence> sequences;
};

/// root/meta.txt, root/seq_<id>/frames/frame_%06d.ppm,
/// root/seq_<id>/labels/frame_%06d.txt ("class cx cy w h" per line).
/// Frames whose label is std::nullopt get no label file.
void write_dataset(const Dataset& dataset, const std::filesystem::path& root);
Dataset read_dataset(const std::filesystem::path& root);

std::string format_label_line(const BoxLabel& label);
std::vector<BoxLabel> parse_label_file(const std::filesystem::path& path);

/// Renders `num_sequences` sequences of a preset into an in-memory dataset
/// (every frame labelled). meta.extra records the preset, seed and the
/// degradation kinds present.
Dataset generate_dataset(const std::string& preset, std::uint64_t seed, std::size_t num_sequences,
                         std::size_t num_frames, std::size_t size, double fps = 20.0);

struct SequenceSplit {
  std::vector<std::size_t> train, val, test;  // indices into Dataset::sequences
};

/// Whole sequences go to one split: the first block trains, the next
/// validates, the last tests. At least one training sequence is kept.
SequenceSplit split_sequences(std::size_t count, double val_fraction, double test_fraction);

/// One stack per labelled frame of the selected sequences, in sequence then
/// frame order.
std::vector<FrameStack> make_stacks(const Dataset& dataset, const std::vector<std::size_t>& sequence_indices,
                                    const SamplingSpec& spec);

}  // namespace mfdet
