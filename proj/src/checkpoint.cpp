#include "uta/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "uta/core.hpp"

namespace uta {

namespace {

constexpr char kMagic[4] = {'U', 'T', 'A', 'C'};

void put_u8(std::string& out, std::uint8_t v) {
  out.push_back(static_cast<char>(v));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}
void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}
void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out.append(s);
}

class Reader {
 public:
  Reader(const std::string& buf, std::string path)
      : buf_(buf), path_(std::move(path)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i]))
           << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i]))
           << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
  std::string str() {
    const std::uint64_t n = u64();
    return std::string(take(n), n);
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const char* take(std::uint64_t n) {
    if (pos_ + n > buf_.size())
      throw IoError("checkpoint truncated: " + path_);
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::string& buf_;
  std::string path_;
  std::uint64_t pos_ = 0;
};

}  // namespace

const Checkpoint::Entry* Checkpoint::find(const std::string& name,
                                          Kind kind) const {
  for (const Entry& e : entries)
    if (e.kind == kind && e.name == name) return &e;
  return nullptr;
}

std::map<std::string, Tensor> Checkpoint::by_kind(Kind kind) const {
  std::map<std::string, Tensor> m;
  for (const Entry& e : entries)
    if (e.kind == kind) {
      if (!m.emplace(e.name, e.data).second)
        throw IoError("checkpoint has duplicate entry: " + e.name);
    }
  return m;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, ck.version);
  put_u32(out, ck.epoch);
  put_u64(out, ck.step);
  put_str(out, ck.config);
  put_u64(out, ck.entries.size());
  for (const Checkpoint::Entry& e : ck.entries) {
    put_str(out, e.name);
    put_u8(out, e.kind);
    const Shape s = e.data.shape();
    put_u64(out, static_cast<std::uint64_t>(s.b));
    put_u64(out, static_cast<std::uint64_t>(s.c));
    put_u64(out, static_cast<std::uint64_t>(s.h));
    put_u64(out, static_cast<std::uint64_t>(s.w));
    for (std::int64_t i = 0; i < e.data.numel(); ++i) put_f64(out, e.data[i]);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw IoError("not a checkpoint file: " + path);
  Reader r(buf, path);
  r.u32();  // magic, verified above
  Checkpoint ck;
  ck.version = r.u32();
  if (ck.version != 1)
    throw IoError("unsupported checkpoint version " +
                  std::to_string(ck.version) + ": " + path);
  ck.epoch = r.u32();
  ck.step = r.u64();
  ck.config = r.str();
  const std::uint64_t n = r.u64();
  ck.entries.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    Checkpoint::Entry e;
    e.name = r.str();
    const std::uint8_t kind = r.u8();
    if (kind > Checkpoint::kBuffer)
      throw IoError("checkpoint entry " + e.name + " has unknown kind " +
                    std::to_string(kind));
    e.kind = static_cast<Checkpoint::Kind>(kind);
    const auto b = static_cast<int>(r.u64());
    const auto c = static_cast<int>(r.u64());
    const auto h = static_cast<int>(r.u64());
    const auto w = static_cast<int>(r.u64());
    e.data = Tensor(Shape{b, c, h, w});
    for (std::int64_t i = 0; i < e.data.numel(); ++i) e.data[i] = r.f64();
    ck.entries.push_back(std::move(e));
  }
  if (!r.done()) throw IoError("trailing bytes in checkpoint: " + path);
  return ck;
}

}  // namespace uta
