#include "gemr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gemr/json_io.hpp"

namespace gemr {
namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            std::string("truncated payload while reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

struct RawTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(GroupEmotionModel<float>& model, const CheckpointMeta& meta) {
  const auto tensors = model.named_tensors();
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    w.u16(static_cast<std::uint16_t>(nt.name.size()));
    w.bytes(nt.name.data(), nt.name.size());
    const auto& shape = nt.tensor->shape();
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : nt.tensor->data()) w.f32(v);
  }
  nlohmann::json doc;
  doc["mechanism"] = std::string(mechanism_name(model.mechanism()));
  doc["seed"] = meta.seed;
  doc["epoch"] = meta.epoch;
  doc["note"] = meta.note;
  doc["config"] = model.config();
  const std::string text = doc.dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  return w.take();
}

LoadedModel decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::BadMagic, "bad magic: not a GEMR checkpoint");
  }
  r.str(4, "magic");
  const auto version = r.u16("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::BadVersion,
                          "version mismatch: file has version " + std::to_string(version) + ", reader supports " +
                              std::to_string(kCheckpointVersion));
  }
  const auto count = r.u32("tensor count");
  std::vector<RawTensor> raw;
  for (std::uint32_t i = 0; i < count; ++i) {
    RawTensor t;
    t.name = r.str(r.u16("name length"), "name");
    const auto rank = r.u8("rank");
    std::size_t numel = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.u32("dims"));
      numel *= t.shape.back();
    }
    r.need(numel * 4, "tensor payload");
    t.data.resize(numel);
    for (auto& v : t.data) v = r.f32("tensor payload");
    raw.push_back(std::move(t));
  }
  const std::string text = r.str(r.u32("metadata length"), "metadata");
  if (!r.done()) {
    throw CheckpointError(CheckpointError::Kind::ManifestMismatch, "trailing bytes after metadata");
  }

  ModelConfig config;
  CheckpointMeta meta;
  try {
    const auto doc = nlohmann::json::parse(text);
    config = doc.at("config").get<ModelConfig>();
    meta.seed = doc.at("seed").get<std::uint64_t>();
    meta.epoch = doc.at("epoch").get<std::size_t>();
    meta.note = doc.value("note", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::BadMetadata, std::string("bad metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(CheckpointError::Kind::BadMetadata, std::string("bad metadata: ") + e.what());
  }

  GroupEmotionModel<float> model(config, meta.seed);
  auto expected = model.named_tensors();
  if (expected.size() != raw.size()) {
    throw CheckpointError(CheckpointError::Kind::ManifestMismatch,
                          "manifest mismatch: configuration implies " + std::to_string(expected.size()) +
                              " tensors, file has " + std::to_string(raw.size()));
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].name != expected[i].name || raw[i].shape != expected[i].tensor->shape()) {
      throw CheckpointError(CheckpointError::Kind::ManifestMismatch,
                            "manifest mismatch at tensor " + std::to_string(i) + ": file has '" + raw[i].name + "' " +
                                to_string(raw[i].shape) + ", expected '" + expected[i].name + "' " +
                                to_string(expected[i].tensor->shape()));
    }
    expected[i].tensor->assign(raw[i].data);
  }
  return {std::move(model), std::move(meta)};
}

void save_checkpoint(GroupEmotionModel<float>& model, const CheckpointMeta& meta, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "failed writing '" + path.string() + "'");
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace gemr
