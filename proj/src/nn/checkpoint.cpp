#include "soilref/nn/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "soilref/core/io.hpp"

namespace soilref::nn {

namespace {

constexpr char kMagic[8] = {'S', 'O', 'I', 'L', 'N', 'E', 'T', '\0'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  const auto* raw = reinterpret_cast<const std::uint8_t*>(t.data());
  out.insert(out.end(), raw, raw + t.size() * sizeof(double));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw io::FormatError("checkpoint: truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  Tensor tensor() {
    const std::uint32_t rank = u32();
    if (rank == 0 || rank > 4) throw io::FormatError("checkpoint: bad tensor rank");
    std::vector<int> shape;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = u32();
      if (d == 0 || d > (1u << 20)) throw io::FormatError("checkpoint: bad tensor dim");
      shape.push_back(static_cast<int>(d));
      count *= d;
    }
    need(count * sizeof(double));
    std::vector<double> values(count);
    std::memcpy(values.data(), b_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
    return Tensor(std::move(shape), std::move(values));
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json arch_to_json(const ArchConfig& a) {
  return {{"image_channels", a.image_channels}, {"pl_channels", a.pl_channels},
          {"enc_hidden", a.enc_hidden},         {"enc_out", a.enc_out},
          {"dec_hidden", a.dec_hidden},         {"dec_up", a.dec_up},
          {"classes", a.classes}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
  ArchConfig a;
  a.image_channels = j.at("image_channels").get<int>();
  a.pl_channels = j.at("pl_channels").get<int>();
  a.enc_hidden = j.at("enc_hidden").get<int>();
  a.enc_out = j.at("enc_out").get<int>();
  a.dec_hidden = j.at("dec_hidden").get<int>();
  a.dec_up = j.at("dec_up").get<int>();
  a.classes = j.at("classes").get<int>();
  return a;
}

std::vector<std::uint8_t> serialize(const NetParams& params, const nlohmann::json& metadata) {
  nlohmann::json header;
  header["arch"] = arch_to_json(params.arch());
  header["seed"] = params.seed();
  header["metadata"] = metadata;
  auto& layers = header["layers"] = nlohmann::json::array();
  for (const auto& l : params.layers()) {
    layers.push_back({{"name", l.spec.name},
                      {"in", l.spec.in},
                      {"out", l.spec.out},
                      {"kernel", l.spec.kernel},
                      {"stride", l.spec.stride},
                      {"relu", l.spec.relu}});
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& l : params.layers()) {
    put_tensor(out, l.weight);
    put_tensor(out, l.bias);
  }
  return out;
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw io::FormatError("checkpoint: bad magic");
  }
  Reader r(bytes);
  r.bytes(sizeof(kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw io::FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes(r.u32()));
  } catch (const nlohmann::json::exception& e) {
    throw io::FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  const ArchConfig arch = arch_from_json(header.at("arch"));
  const auto specs = describe(arch);
  std::vector<ConvLayer> layers;
  for (const auto& spec : specs) {
    ConvLayer l{spec, r.tensor(), r.tensor()};
    layers.push_back(std::move(l));
  }
  if (!r.done()) throw io::FormatError("checkpoint: trailing bytes");
  Checkpoint ck{NetParams(arch, std::move(layers), header.at("seed").get<std::uint64_t>()),
                header.value("metadata", nlohmann::json::object())};
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const NetParams& params,
                     const nlohmann::json& metadata) {
  io::write_file(path, serialize(params, metadata));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

}  // namespace soilref::nn
