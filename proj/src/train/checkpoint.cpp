#include "train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "common/crc32.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace sf {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void floats(const Tensor<float>& t) { raw(t.ptr(), t.numel() * sizeof(float)); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& b, std::size_t end) : b_(b), end_(end) {}

  void need(std::size_t n, const char* what) {
    if (n > end_ - pos_)
      fail(ErrorCode::kCorruption, std::string("checkpoint truncated at byte offset ") +
                                       std::to_string(pos_) + " while reading " + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, &b_[pos_], 4);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v;
    std::memcpy(&v, &b_[pos_], 8);
    pos_ += 8;
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(&b_[pos_]), n);
    pos_ += n;
    return s;
  }
  void floats(Tensor<float>& t, const char* what) {
    need(t.numel() * sizeof(float), what);
    std::memcpy(t.ptr(), &b_[pos_], t.numel() * sizeof(float));
    pos_ += t.numel() * sizeof(float);
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<unsigned char>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.raw("SNDF", 4);
  w.u32(kCheckpointVersion);
  w.str(ck.config.canonical());
  w.u64(ck.step);
  w.u64(ck.rng_key);
  w.u64(ck.rng_counter);
  const auto& entries = ck.params.entries();
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.floats(t);
  }
  const bool moments = !ck.adam.m.empty();
  require(!moments || (ck.adam.m.size() == entries.size() && ck.adam.v.size() == entries.size()),
          ErrorCode::kState, "optimizer state does not match the parameter store");
  w.u32(moments ? static_cast<std::uint32_t>(entries.size()) : 0u);
  w.u64(ck.adam.step);
  if (moments)
    for (std::size_t k = 0; k < entries.size(); ++k) {
      require(ck.adam.m[k].shape() == entries[k].second.shape(), ErrorCode::kState,
              "optimizer moment shape differs for " + entries[k].first);
      w.floats(ck.adam.m[k]);
      w.floats(ck.adam.v[k]);
    }
  w.u32(crc32(std::span<const unsigned char>(w.bytes)));
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), "SNDF", 4) == 0, ErrorCode::kFormat,
          "not a checkpoint file (bad magic)");
  if (bytes.size() < 8)
    fail(ErrorCode::kCorruption, "checkpoint truncated at byte offset 4 while reading version");
  std::uint32_t version;
  std::memcpy(&version, &bytes[4], 4);
  if (version != kCheckpointVersion)
    fail(ErrorCode::kUnsupportedVersion,
         "unsupported checkpoint version " + std::to_string(version) + " (expected 1)");
  if (bytes.size() < 12)
    fail(ErrorCode::kCorruption, "checkpoint truncated at byte offset 8 while reading config");

  // The trailing 4 bytes are the checksum; parsing stops before them.
  Reader r(bytes, bytes.size() - 4);
  r.u32("magic");
  r.u32("version");
  Checkpoint ck;
  const std::string config_text = r.str("config");
  ck.step = r.u64("step");
  ck.rng_key = r.u64("rng key");
  ck.rng_counter = r.u64("rng counter");
  const std::uint32_t n = r.u32("tensor count");
  for (std::uint32_t k = 0; k < n; ++k) {
    const std::string name = r.str("tensor name");
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank == 0 || rank > 8)
      fail(ErrorCode::kCorruption, "implausible tensor rank " + std::to_string(rank) +
                                       " at byte offset " + std::to_string(r.pos() - 4));
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = r.u32("tensor dims");
      if (d == 0 || d > (1u << 28))
        fail(ErrorCode::kCorruption, "implausible dimension at byte offset " + std::to_string(r.pos() - 4));
      shape.push_back(static_cast<int>(d));
      numel *= d;
    }
    r.need(numel * sizeof(float), "tensor data");
    Tensor<float> t(shape);
    r.floats(t, "tensor data");
    if (ck.params.contains(name))
      fail(ErrorCode::kCorruption, "duplicate tensor " + name + " in checkpoint");
    ck.params.add(name, std::move(t));
  }
  const std::uint32_t moments = r.u32("moment count");
  if (moments != 0 && moments != n)
    fail(ErrorCode::kCorruption, "moment count " + std::to_string(moments) + " does not match " +
                                     std::to_string(n) + " tensors");
  ck.adam.step = r.u64("optimizer step");
  for (std::uint32_t k = 0; k < moments; ++k) {
    const Shape& s = ck.params.entries()[k].second.shape();
    Tensor<float> m(s), v(s);
    r.floats(m, "first moments");
    r.floats(v, "second moments");
    ck.adam.m.push_back(std::move(m));
    ck.adam.v.push_back(std::move(v));
  }
  if (r.pos() != bytes.size() - 4)
    fail(ErrorCode::kCorruption, "unexpected trailing data at byte offset " + std::to_string(r.pos()));
  std::uint32_t stored;
  std::memcpy(&stored, &bytes[bytes.size() - 4], 4);
  const std::uint32_t actual = crc32(std::span<const unsigned char>(bytes.data(), bytes.size() - 4));
  if (stored != actual) fail(ErrorCode::kCorruption, "checkpoint checksum mismatch (CRC32)");

  Options opts;
  opts.parse_text(config_text, "checkpoint config");
  ck.config = ModelConfig::from_options(opts);
  Model validated(ck.config, ck.params);  // shape check against the echoed config
  (void)validated;
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write checkpoint " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::kIo, "short write on checkpoint " + path);
  }
  std::rename(tmp.c_str(), path.c_str());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open checkpoint " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  const auto want = expected.to_options().values();
  const auto have = ck.config.to_options().values();
  for (const auto& [key, value] : want) {
    auto it = have.find(key);
    const std::string got = it == have.end() ? "<absent>" : it->second;
    if (got != value)
      fail(ErrorCode::kConfigMismatch, "checkpoint config differs in '" + key + "': checkpoint has " +
                                           got + ", expected " + value);
  }
  return ck;
}

}  // namespace sf
