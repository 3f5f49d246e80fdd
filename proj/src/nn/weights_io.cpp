#include "phyadv/nn/weights_io.hpp"

#include "phyadv/binary_io.hpp"
#include "phyadv/errors.hpp"

namespace phyadv::nn {

namespace {
constexpr std::string_view kMagic = "PHYADVW1";
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kTagBytes = 8;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;
}  // namespace

std::vector<std::uint8_t> encode_weight_file(const WeightFile& file) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u64(file.seed);
  w.u32(static_cast<std::uint32_t>(file.input_shape.size()));
  for (auto d : file.input_shape) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(file.records.size()));
  for (const auto& r : file.records) {
    if (r.tag.empty() || r.tag.size() > kTagBytes) throw ConfigError("record tag must be 1..8 bytes: " + r.tag);
    std::string tag = r.tag;
    tag.resize(kTagBytes, '\0');
    w.bytes(tag);
    w.u32(static_cast<std::uint32_t>(r.sizes.size()));
    for (auto s : r.sizes) w.u32(s);
    w.u32(static_cast<std::uint32_t>(r.tensors.size()));
    for (const auto& t : r.tensors) {
      w.u32(static_cast<std::uint32_t>(t.rank()));
      for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    }
  }
  for (const auto& r : file.records)
    for (const auto& t : r.tensors)
      for (double v : t.data()) w.f32(static_cast<float>(v));
  return w.buffer();
}

WeightFile decode_weight_file(std::vector<std::uint8_t> bytes) {
  io::ByteReader r(std::move(bytes));
  if (r.bytes(kMagic.size()) != kMagic) throw FormatError("bad magic: not a PHYADVW1 weight file");
  if (const auto v = r.u32(); v != kVersion) throw FormatError("unsupported weight file version " + std::to_string(v));
  WeightFile f;
  f.seed = r.u64();
  auto read_shape = [&](std::uint32_t rank, bool allow_empty) {
    if (rank > kMaxRank || (!allow_empty && rank == 0)) throw FormatError("implausible rank " + std::to_string(rank));
    Shape s;
    std::uint64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = r.u32();
      if (d == 0) throw FormatError("zero dimension in shape");
      n *= d;
      if (n > kMaxElements) throw FormatError("tensor too large");
      s.push_back(d);
    }
    return s;
  };
  f.input_shape = read_shape(r.u32(), true);
  const auto n_records = r.u32();
  if (n_records > 4096) throw FormatError("implausible record count");
  std::vector<std::vector<Shape>> shapes(n_records);
  for (std::uint32_t i = 0; i < n_records; ++i) {
    WeightRecord rec;
    std::string tag = r.bytes(kTagBytes);
    rec.tag = tag.substr(0, tag.find('\0'));
    const auto n_sizes = r.u32();
    if (n_sizes > 16) throw FormatError("implausible size count");
    for (std::uint32_t k = 0; k < n_sizes; ++k) rec.sizes.push_back(r.u32());
    const auto n_tensors = r.u32();
    if (n_tensors > 16) throw FormatError("implausible tensor count");
    for (std::uint32_t k = 0; k < n_tensors; ++k) shapes[i].push_back(read_shape(r.u32(), false));
    f.records.push_back(std::move(rec));
  }
  for (std::uint32_t i = 0; i < n_records; ++i)
    for (const auto& s : shapes[i]) {
      const auto n = shape_size(s);
      if (r.remaining() < n * 4) throw FormatError("unexpected end of file (truncated payload)");
      std::vector<double> data(n);
      for (auto& v : data) v = static_cast<double>(r.f32());
      f.records[i].tensors.emplace_back(s, std::move(data));
    }
  r.expect_end();
  return f;
}

WeightFile to_weight_file(const ModelState& model) {
  WeightFile f;
  f.seed = model.seed;
  f.input_shape = model.spec.input_shape;
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    const auto& l = model.spec.layers[i];
    WeightRecord rec{std::string(layer_tag(l.kind)), l.sizes(), {}};
    if (!model.params[i].empty()) rec.tensors = {model.params[i].weight, model.params[i].bias};
    f.records.push_back(std::move(rec));
  }
  return f;
}

ModelState from_weight_file(const WeightFile& f) {
  ModelState m;
  m.seed = f.seed;
  m.spec.input_shape = f.input_shape;
  for (const auto& rec : f.records) {
    const auto kind = layer_kind_from_tag(rec.tag);
    if (!kind) throw FormatError("record kind '" + rec.tag + "' is not a layer");
    m.spec.layers.push_back(LayerSpec::from_sizes(*kind, rec.sizes));
  }
  try {
    m.spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("inconsistent model in weight file: ") + e.what());
  }
  const ModelState reference = init_model(m.spec, 0);
  for (std::size_t i = 0; i < f.records.size(); ++i) {
    const auto& rec = f.records[i];
    const auto& want = reference.params[i];
    LayerParams p;
    if (want.empty()) {
      if (!rec.tensors.empty()) throw FormatError("parameter-free layer carries tensors");
    } else {
      if (rec.tensors.size() != 2 || rec.tensors[0].shape() != want.weight.shape() ||
          rec.tensors[1].shape() != want.bias.shape())
        throw FormatError("shape mismatch in layer " + std::to_string(i));
      p = {rec.tensors[0], rec.tensors[1]};
    }
    m.params.push_back(std::move(p));
  }
  return m;
}

void save_weights(const ModelState& model, const std::filesystem::path& path) {
  io::write_file(path, encode_weight_file(to_weight_file(model)));
}

ModelState load_weights(const std::filesystem::path& path) {
  return from_weight_file(decode_weight_file(io::read_file(path)));
}

void load_weights(ModelState& model, const std::filesystem::path& path) {
  ModelState loaded = load_weights(path);
  if (!(loaded.spec == model.spec)) throw FormatError("weight file architecture does not match model");
  model = std::move(loaded);
}

ModelState rounded_to_f32(ModelState model) {
  for (auto* t : model.parameters())
    for (auto& v : t->data()) v = static_cast<double>(static_cast<float>(v));
  return model;
}

}  // namespace phyadv::nn
