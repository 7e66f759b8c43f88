#include "mfdet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "mfdet/error.hpp"

namespace mfdet {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { bytes(&v, 2); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  void bytes(void* p, std::size_t n, const char* what) {
    if (n > in_.size() - pos_) throw FormatError(std::string("checkpoint truncated while reading ") + what);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    bytes(&v, 1, what);
    return v;
  }
  std::uint16_t u16(const char* what) {
    std::uint16_t v;
    bytes(&v, 2, what);
    return v;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    bytes(&v, 4, what);
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

std::string float_text(float v) {
  // %.9g round-trips every float.
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

const std::string& require(const std::map<std::string, std::string>& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw FormatError("checkpoint metadata is missing '" + key + "'");
  return it->second;
}

}  // namespace

std::map<std::string, std::string> config_to_metadata(const ModelConfig& config) {
  std::map<std::string, std::string> m;
  m["model.input_size"] = std::to_string(config.input_size);
  m["model.fusion"] = to_string(config.fusion);
  m["model.base_width"] = std::to_string(config.base_width);
  m["model.num_classes"] = std::to_string(config.num_classes);
  m["model.leaky_slope"] = float_text(config.leaky_slope);
  std::string anchors;
  for (const auto& a : config.anchors) anchors += (anchors.empty() ? "" : ";") + float_text(a.w) + "," + float_text(a.h);
  m["model.anchors"] = anchors;
  return m;
}

ModelConfig config_from_metadata(const std::map<std::string, std::string>& m) {
  ModelConfig c;
  try {
    c.input_size = std::stoul(require(m, "model.input_size"));
    c.fusion = parse_fusion_mode(require(m, "model.fusion"));
    c.base_width = std::stoul(require(m, "model.base_width"));
    c.num_classes = std::stoul(require(m, "model.num_classes"));
    c.leaky_slope = std::stof(require(m, "model.leaky_slope"));
    c.anchors.clear();
    std::stringstream ss(require(m, "model.anchors"));
    std::string item;
    while (std::getline(ss, item, ';')) {
      const auto comma = item.find(',');
      if (comma == std::string::npos) throw FormatError("bad anchor entry '" + item + "'");
      c.anchors.push_back({std::stof(item.substr(0, comma)), std::stof(item.substr(comma + 1))});
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad model metadata: ") + e.what());
  }
  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint model config is invalid: ") + e.what());
  }
  return c;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.bytes(kCheckpointMagic, 5);
  const auto& layers = checkpoint.model.layers;
  w.u32(static_cast<std::uint32_t>(layers.size() * 2));
  auto entry = [&](const std::string& name, const Tensor& t) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.bytes(t.raw(), t.size() * sizeof(float));
  };
  for (const auto& l : layers) {
    entry(l.name + ".weight", l.weight);
    entry(l.name + ".bias", l.bias);
  }
  auto meta = config_to_metadata(checkpoint.model.config);
  for (const auto& [k, v] : checkpoint.metadata)
    if (k.rfind("model.", 0) != 0) meta[k] = v;
  std::string text;
  for (const auto& [k, v] : meta) text += k + "=" + v + "\n";
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[5];
  r.bytes(magic, 5, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 5) != 0) throw FormatError("not a checkpoint: bad magic bytes");

  const std::uint32_t count = r.u32("entry count");
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16("name length");
    std::string name(len, '\0');
    r.bytes(name.data(), len, "tensor name");
    const std::uint8_t rank = r.u8("rank");
    if (rank == 0 || rank > 8) throw FormatError("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32("dimension");
      if (dim == 0) throw FormatError("tensor '" + name + "' has a zero dimension");
      numel *= dim;
      if (numel * sizeof(float) > r.remaining()) throw FormatError("checkpoint truncated in tensor '" + name + "'");
      shape.push_back(dim);
    }
    std::vector<float> data(numel);
    r.bytes(data.data(), numel * sizeof(float), "tensor data");
    if (tensors.count(name)) throw FormatError("duplicate tensor '" + name + "'");
    tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
  }

  const std::uint32_t meta_len = r.u32("metadata length");
  if (meta_len > r.remaining()) throw FormatError("checkpoint truncated in metadata");
  std::string text(meta_len, '\0');
  r.bytes(text.data(), meta_len, "metadata");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint metadata");

  Checkpoint ck;
  std::map<std::string, std::string> meta;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("metadata line without '=': " + line);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const ModelConfig config = config_from_metadata(meta);
  ck.model.config = config;
  const auto specs = layer_specs(config);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    ConvLayer layer;
    layer.name = layer_name(i);
    layer.spec = specs[i];
    layer.activation = i + 1 < specs.size();
    for (const char* part : {".weight", ".bias"}) {
      const std::string key = layer.name + part;
      auto it = tensors.find(key);
      if (it == tensors.end()) throw FormatError("checkpoint is missing tensor '" + key + "'");
      const Shape expected = std::string(part) == ".weight" ? conv_weight_shape(layer.spec) : Shape{layer.spec.out_channels};
      if (it->second.shape() != expected)
        throw FormatError("tensor '" + key + "' has shape " + shape_to_string(it->second.shape()) + ", expected " +
                          shape_to_string(expected));
      (std::string(part) == ".weight" ? layer.weight : layer.bias) = std::move(it->second);
      tensors.erase(it);
    }
    ck.model.layers.push_back(std::move(layer));
  }
  if (!tensors.empty()) throw FormatError("checkpoint has unexpected tensor '" + tensors.begin()->first + "'");
  for (auto& [k, v] : meta)
    if (k.rfind("model.", 0) != 0) ck.metadata[k] = v;
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace mfdet
