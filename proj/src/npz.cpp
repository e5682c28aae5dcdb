#include "uta/npz.hpp"

#include <zlib.h>

#include <cctype>
#include <cstring>
#include <fstream>

#include "uta/checkpoint.hpp"
#include "uta/core.hpp"

namespace uta {

namespace {

std::uint16_t rd_u16(const std::string& b, std::size_t off) {
  return static_cast<std::uint16_t>(
      static_cast<unsigned char>(b[off]) |
      (static_cast<unsigned char>(b[off + 1]) << 8));
}

std::uint32_t rd_u32(const std::string& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + i]))
         << (8 * i);
  return v;
}

void wr_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}

void wr_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>(v >> (8 * i)));
}

std::string inflate_raw(const char* data, std::size_t comp_size,
                        std::size_t uncomp_size, const std::string& ctx) {
  std::string out(uncomp_size, '\0');
  z_stream strm{};
  if (inflateInit2(&strm, -MAX_WBITS) != Z_OK)
    throw IoError("zlib init failed: " + ctx);
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data));
  strm.avail_in = static_cast<uInt>(comp_size);
  strm.next_out = reinterpret_cast<Bytef*>(out.data());
  strm.avail_out = static_cast<uInt>(uncomp_size);
  const int rc = inflate(&strm, Z_FINISH);
  inflateEnd(&strm);
  if (rc != Z_STREAM_END || strm.total_out != uncomp_size)
    throw IoError("corrupt deflate stream: " + ctx);
  return out;
}

Shape shape_from_dims(const std::vector<std::int64_t>& dims,
                      const std::string& ctx) {
  switch (dims.size()) {
    case 1:
      return Shape{1, static_cast<int>(dims[0]), 1, 1};
    case 2:
      return Shape{static_cast<int>(dims[0]), static_cast<int>(dims[1]), 1, 1};
    case 3:
      return Shape{1, static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                   static_cast<int>(dims[2])};
    case 4:
      return Shape{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                   static_cast<int>(dims[2]), static_cast<int>(dims[3])};
    default:
      throw IoError("unsupported array rank " + std::to_string(dims.size()) +
                    ": " + ctx);
  }
}

Tensor parse_npy(const std::string& raw, const std::string& ctx) {
  static const char magic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
  if (raw.size() < 10 || std::memcmp(raw.data(), magic, 6) != 0)
    throw IoError("not an npy member: " + ctx);
  const int major = static_cast<unsigned char>(raw[6]);
  std::size_t header_len, header_off;
  if (major == 1) {
    header_len = rd_u16(raw, 8);
    header_off = 10;
  } else if (major == 2 || major == 3) {
    header_len = rd_u32(raw, 8);
    header_off = 12;
  } else {
    throw IoError("unsupported npy version: " + ctx);
  }
  if (header_off + header_len > raw.size())
    throw IoError("npy header truncated: " + ctx);
  const std::string header = raw.substr(header_off, header_len);

  auto field = [&](const std::string& key) {
    const std::size_t k = header.find("'" + key + "'");
    if (k == std::string::npos)
      throw IoError("npy header missing " + key + ": " + ctx);
    std::size_t colon = header.find(':', k);
    return header.substr(colon + 1);
  };

  std::string descr = field("descr");
  const std::size_t q0 = descr.find('\'');
  descr = descr.substr(q0 + 1, descr.find('\'', q0 + 1) - q0 - 1);
  int elem_size;
  bool integral = false;
  if (descr == "<f4") {
    elem_size = 4;
  } else if (descr == "<f8") {
    elem_size = 8;
  } else if (descr == "<i4") {
    elem_size = 4;
    integral = true;
  } else if (descr == "<i8") {
    elem_size = 8;
    integral = true;
  } else {
    throw IoError("unsupported npy dtype " + descr + ": " + ctx);
  }

  if (field("fortran_order").find("True") < field("fortran_order").find(','))
    throw IoError("fortran-order arrays unsupported: " + ctx);

  std::string sh = field("shape");
  const std::size_t p0 = sh.find('(');
  sh = sh.substr(p0 + 1, sh.find(')', p0) - p0 - 1);
  std::vector<std::int64_t> dims;
  std::size_t pos = 0;
  while (pos < sh.size()) {
    while (pos < sh.size() && !std::isdigit(static_cast<unsigned char>(sh[pos])))
      ++pos;
    if (pos >= sh.size()) break;
    std::size_t end;
    dims.push_back(std::stoll(sh.substr(pos), &end));
    pos += end;
  }
  if (dims.empty()) throw IoError("scalar npy members unsupported: " + ctx);

  const Shape shape = shape_from_dims(dims, ctx);
  Tensor t(shape);
  const std::size_t data_off = header_off + header_len;
  const std::size_t need =
      static_cast<std::size_t>(t.numel()) * static_cast<std::size_t>(elem_size);
  if (raw.size() - data_off < need)
    throw IoError("npy data truncated: " + ctx);
  const char* p = raw.data() + data_off;
  if (elem_size == 8) {
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k)
        bits |= static_cast<std::uint64_t>(
                    static_cast<unsigned char>(p[8 * i + k]))
                << (8 * k);
      if (integral) {
        t[i] = static_cast<double>(static_cast<std::int64_t>(bits));
      } else {
        double d;
        std::memcpy(&d, &bits, 8);
        t[i] = d;
      }
    }
  } else {
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k)
        bits |= static_cast<std::uint32_t>(
                    static_cast<unsigned char>(p[4 * i + k]))
                << (8 * k);
      if (integral) {
        t[i] = static_cast<double>(static_cast<std::int32_t>(bits));
      } else {
        float f;
        std::memcpy(&f, &bits, 4);
        t[i] = static_cast<double>(f);
      }
    }
  }
  return t;
}

}  // namespace

std::map<std::string, Tensor> load_npz(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open archive: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  // End-of-central-directory record: scan backwards over the trailing
  // comment space.
  constexpr std::uint32_t kEocd = 0x06054b50;
  constexpr std::uint32_t kCentral = 0x02014b50;
  constexpr std::uint32_t kLocal = 0x04034b50;
  if (buf.size() < 22) throw IoError("not a zip archive: " + path);
  std::size_t eocd = std::string::npos;
  const std::size_t scan_end = buf.size() >= 22 + 65535 ? buf.size() - 22 - 65535 : 0;
  for (std::size_t i = buf.size() - 22 + 1; i-- > scan_end;) {
    if (rd_u32(buf, i) == kEocd) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string::npos)
    throw IoError("not a zip archive: " + path);
  const std::uint16_t count = rd_u16(buf, eocd + 10);
  std::size_t off = rd_u32(buf, eocd + 16);

  std::map<std::string, Tensor> out;
  for (std::uint16_t k = 0; k < count; ++k) {
    if (off + 46 > buf.size() || rd_u32(buf, off) != kCentral)
      throw IoError("corrupt central directory: " + path);
    const std::uint16_t method = rd_u16(buf, off + 10);
    const std::uint32_t comp_size = rd_u32(buf, off + 20);
    const std::uint32_t uncomp_size = rd_u32(buf, off + 24);
    const std::uint16_t name_len = rd_u16(buf, off + 28);
    const std::uint16_t extra_len = rd_u16(buf, off + 30);
    const std::uint16_t comment_len = rd_u16(buf, off + 32);
    const std::uint32_t local_off = rd_u32(buf, off + 42);
    std::string name = buf.substr(off + 46, name_len);
    off += 46 + name_len + extra_len + comment_len;

    if (local_off + 30 > buf.size() || rd_u32(buf, local_off) != kLocal)
      throw IoError("corrupt member header for " + name + ": " + path);
    const std::uint16_t lf_name = rd_u16(buf, local_off + 26);
    const std::uint16_t lf_extra = rd_u16(buf, local_off + 28);
    const std::size_t data_off = local_off + 30 + lf_name + lf_extra;
    if (data_off + comp_size > buf.size())
      throw IoError("member data truncated for " + name + ": " + path);

    std::string raw;
    if (method == 0) {
      raw = buf.substr(data_off, comp_size);
    } else if (method == 8) {
      raw = inflate_raw(buf.data() + data_off, comp_size, uncomp_size,
                        name + " in " + path);
    } else {
      throw IoError("unsupported zip compression " + std::to_string(method) +
                    " for " + name + ": " + path);
    }
    if (name.size() > 4 && name.substr(name.size() - 4) == ".npy")
      name.resize(name.size() - 4);
    out.emplace(std::move(name), parse_npy(raw, path));
  }
  return out;
}

void save_npz(const std::string& path,
              const std::map<std::string, Tensor>& arrays) {
  std::string zip;
  struct Member {
    std::string name;
    std::uint32_t offset, size, crc;
  };
  std::vector<Member> members;

  for (const auto& [key, t] : arrays) {
    // Build the .npy payload: version 1 header padded to 64 bytes.
    const Shape s = t.shape();
    std::string dims;
    if (s.b == 1 && s.h == 1 && s.w == 1) {
      dims = "(" + std::to_string(s.c) + ",)";
    } else if (s.h == 1 && s.w == 1) {
      dims = "(" + std::to_string(s.b) + ", " + std::to_string(s.c) + ")";
    } else {
      dims = "(" + std::to_string(s.b) + ", " + std::to_string(s.c) + ", " +
             std::to_string(s.h) + ", " + std::to_string(s.w) + ")";
    }
    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': " +
                         dims + ", }";
    const std::size_t total = 10 + header.size() + 1;  // +1 for the newline
    header.append((64 - total % 64) % 64, ' ');
    header.push_back('\n');

    static const char npy_magic[8] = {'\x93', 'N', 'U', 'M',
                                      'P',    'Y', 1,   0};
    std::string npy(npy_magic, 8);
    wr_u16(npy, static_cast<std::uint16_t>(header.size()));
    npy += header;
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      std::uint64_t bits;
      double d = t[i];
      std::memcpy(&bits, &d, 8);
      for (int b = 0; b < 8; ++b)
        npy.push_back(static_cast<char>(bits >> (8 * b)));
    }

    const std::string name = key + ".npy";
    Member m;
    m.name = name;
    m.offset = static_cast<std::uint32_t>(zip.size());
    m.size = static_cast<std::uint32_t>(npy.size());
    m.crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(npy.data()),
              static_cast<uInt>(npy.size())));
    members.push_back(m);

    wr_u32(zip, 0x04034b50);
    wr_u16(zip, 20);      // version needed
    wr_u16(zip, 0);       // flags
    wr_u16(zip, 0);       // stored
    wr_u16(zip, 0);       // mod time
    wr_u16(zip, 0);       // mod date
    wr_u32(zip, m.crc);
    wr_u32(zip, m.size);  // compressed
    wr_u32(zip, m.size);  // uncompressed
    wr_u16(zip, static_cast<std::uint16_t>(name.size()));
    wr_u16(zip, 0);       // extra
    zip += name;
    zip += npy;
  }

  const std::uint32_t central_off = static_cast<std::uint32_t>(zip.size());
  for (const Member& m : members) {
    wr_u32(zip, 0x02014b50);
    wr_u16(zip, 20);  // version made by
    wr_u16(zip, 20);  // version needed
    wr_u16(zip, 0);   // flags
    wr_u16(zip, 0);   // stored
    wr_u16(zip, 0);   // time
    wr_u16(zip, 0);   // date
    wr_u32(zip, m.crc);
    wr_u32(zip, m.size);
    wr_u32(zip, m.size);
    wr_u16(zip, static_cast<std::uint16_t>(m.name.size()));
    wr_u16(zip, 0);  // extra
    wr_u16(zip, 0);  // comment
    wr_u16(zip, 0);  // disk
    wr_u16(zip, 0);  // internal attrs
    wr_u32(zip, 0);  // external attrs
    wr_u32(zip, m.offset);
    zip += m.name;
  }
  const std::uint32_t central_size =
      static_cast<std::uint32_t>(zip.size()) - central_off;
  wr_u32(zip, 0x06054b50);
  wr_u16(zip, 0);  // disk
  wr_u16(zip, 0);  // central dir disk
  wr_u16(zip, static_cast<std::uint16_t>(members.size()));
  wr_u16(zip, static_cast<std::uint16_t>(members.size()));
  wr_u32(zip, central_size);
  wr_u32(zip, central_off);
  wr_u16(zip, 0);  // comment length

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write archive: " + path);
  f.write(zip.data(), static_cast<std::streamsize>(zip.size()));
  if (!f) throw IoError("short write on archive: " + path);
}

void convert_backbone_npz(const std::string& npz_path,
                          const std::string& out_path) {
  const std::map<std::string, Tensor> src = load_npz(npz_path);
  Checkpoint ck;
  ck.config = "source = " + npz_path + "\n";
  for (const auto& [key, t] : src) {
    if (key.rfind("fc.", 0) == 0) continue;  // classifier head, unused
    if (key.size() >= 19 &&
        key.substr(key.size() - 19) == "num_batches_tracked")
      continue;

    const std::size_t dot = key.rfind('.');
    if (dot == std::string::npos)
      throw IoError("unrecognized backbone entry: " + key);
    const std::string base = key.substr(0, dot);
    const std::string leaf = key.substr(dot + 1);
    // Normalization layers are "bn*" or the second member of a downsample
    // pair; their affine weights become gamma/beta.
    const std::size_t seg = base.rfind('.');
    const std::string last_seg =
        seg == std::string::npos ? base : base.substr(seg + 1);
    const bool is_norm =
        last_seg.rfind("bn", 0) == 0 ||
        (base.size() >= 12 && base.substr(base.size() - 12) == "downsample.1");
    const bool is_conv =
        last_seg == "conv1" || last_seg == "conv2" || last_seg == "conv3" ||
        (base.size() >= 12 && base.substr(base.size() - 12) == "downsample.0");

    Checkpoint::Entry e;
    e.data = t;
    if (leaf == "running_mean" || leaf == "running_var") {
      if (!is_norm) throw IoError("unrecognized backbone entry: " + key);
      e.kind = Checkpoint::kBuffer;
      e.name = key;
    } else if (leaf == "weight") {
      if (!is_norm && !is_conv)
        throw IoError("unrecognized backbone entry: " + key);
      e.kind = Checkpoint::kParam;
      e.name = is_norm ? base + ".gamma" : key;
    } else if (leaf == "bias") {
      if (!is_norm) throw IoError("unrecognized backbone entry: " + key);
      e.kind = Checkpoint::kParam;
      e.name = base + ".beta";
    } else {
      throw IoError("unrecognized backbone entry: " + key);
    }
    ck.entries.push_back(std::move(e));
  }
  save_checkpoint(out_path, ck);
}

}  // namespace uta
