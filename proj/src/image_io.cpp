#include "semu/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

namespace semu {
namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::uint8_t* data, size_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw DataError("write failed: " + path);
}

// ---- PGM ----

struct PnmParser {
  const std::vector<std::uint8_t>& buf;
  size_t pos = 0;

  void skipWs() {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(buf[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }
  long nextInt(const std::string& path) {
    skipWs();
    long v = 0;
    bool any = false;
    while (pos < buf.size() && std::isdigit(buf[pos])) {
      v = v * 10 + (buf[pos++] - '0');
      any = true;
    }
    if (!any) throw DataError("malformed PGM header: " + path);
    return v;
  }
};

GrayImage read_pgm(const std::vector<std::uint8_t>& buf, const std::string& path) {
  if (buf.size() < 2) throw DataError("truncated PGM: " + path);
  const bool ascii = buf[1] == '2';
  if (buf[0] != 'P' || (buf[1] != '5' && buf[1] != '2'))
    throw DataError("not a PGM file: " + path);
  PnmParser p{buf, 2};
  GrayImage img;
  img.cols = p.nextInt(path);
  img.rows = p.nextInt(path);
  img.max_value = static_cast<int>(p.nextInt(path));
  if (img.cols <= 0 || img.rows <= 0 || img.max_value <= 0 || img.max_value > 65535)
    throw DataError("bad PGM dimensions: " + path);
  const size_t n = static_cast<size_t>(img.rows * img.cols);
  img.pixels.resize(n);
  if (ascii) {
    for (size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<std::uint16_t>(p.nextInt(path));
    return img;
  }
  ++p.pos;  // single whitespace after maxval
  const int bpp = img.max_value > 255 ? 2 : 1;
  if (buf.size() - p.pos < n * static_cast<size_t>(bpp))
    throw DataError("truncated PGM pixel data: " + path);
  for (size_t i = 0; i < n; ++i) {
    if (bpp == 2)
      img.pixels[i] = static_cast<std::uint16_t>((buf[p.pos + 2 * i] << 8) | buf[p.pos + 2 * i + 1]);
    else
      img.pixels[i] = buf[p.pos + i];
  }
  return img;
}

// ---- PNG ----

constexpr std::array<std::uint8_t, 8> kPngSig = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, size_t size) {
  put_be32(out, static_cast<std::uint32_t>(size));
  const size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + size);
  const uLong crc = crc32(crc32(0L, nullptr, 0), out.data() + type_pos, static_cast<uInt>(4 + size));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(bound);
  if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw DataError("PNG deflate failed");
  out.resize(bound);
  return out;
}

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& comp, size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf size = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &size, comp.data(), static_cast<uLong>(comp.size()));
  if (rc != Z_OK || size != expected) throw DataError("PNG inflate failed");
  return out;
}

std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

void unfilter(std::vector<std::uint8_t>& raw, Index rows, size_t stride, size_t bpp,
              const std::string& path) {
  // raw holds rows of (filter byte + stride bytes); unfiltered in place
  for (Index r = 0; r < rows; ++r) {
    std::uint8_t* row = raw.data() + static_cast<size_t>(r) * (stride + 1);
    const std::uint8_t filter = row[0];
    std::uint8_t* cur = row + 1;
    const std::uint8_t* prev = r > 0 ? row - stride : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= bpp ? cur[i - bpp] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= bpp) ? prev[i - bpp] : 0;
      switch (filter) {
        case 0: break;
        case 1: cur[i] = static_cast<std::uint8_t>(cur[i] + a); break;
        case 2: cur[i] = static_cast<std::uint8_t>(cur[i] + b); break;
        case 3: cur[i] = static_cast<std::uint8_t>(cur[i] + (a + b) / 2); break;
        case 4: cur[i] = static_cast<std::uint8_t>(cur[i] + paeth(a, b, c)); break;
        default: throw DataError("unsupported PNG filter type: " + path);
      }
    }
  }
}

GrayImage read_png_gray(const std::vector<std::uint8_t>& buf, const std::string& path) {
  if (buf.size() < 8 || !std::equal(kPngSig.begin(), kPngSig.end(), buf.begin()))
    throw DataError("not a PNG file: " + path);
  Index rows = 0, cols = 0;
  int bit_depth = 0, color_type = -1;
  std::vector<std::uint8_t> idat;
  size_t pos = 8;
  while (pos + 8 <= buf.size()) {
    const std::uint32_t len = be32(&buf[pos]);
    const std::string type(reinterpret_cast<const char*>(&buf[pos + 4]), 4);
    if (pos + 12 + len > buf.size()) throw DataError("truncated PNG chunk: " + path);
    const std::uint8_t* data = &buf[pos + 8];
    if (type == "IHDR") {
      cols = static_cast<Index>(be32(data));
      rows = static_cast<Index>(be32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (data[12] != 0) throw DataError("interlaced PNG not supported: " + path);
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  if (rows <= 0 || cols <= 0) throw DataError("bad PNG header: " + path);
  if (color_type != 0 || (bit_depth != 8 && bit_depth != 16))
    throw DataError("PNG must be 8/16-bit grayscale: " + path);
  const size_t bpp = static_cast<size_t>(bit_depth / 8);
  const size_t stride = static_cast<size_t>(cols) * bpp;
  auto raw = zlib_inflate(idat, static_cast<size_t>(rows) * (stride + 1));
  unfilter(raw, rows, stride, bpp, path);
  GrayImage img;
  img.rows = rows;
  img.cols = cols;
  img.max_value = bit_depth == 16 ? 65535 : 255;
  img.pixels.resize(static_cast<size_t>(rows * cols));
  for (Index r = 0; r < rows; ++r) {
    const std::uint8_t* src = raw.data() + static_cast<size_t>(r) * (stride + 1) + 1;
    for (Index c = 0; c < cols; ++c) {
      img.pixels[static_cast<size_t>(r * cols + c)] =
          bpp == 2 ? static_cast<std::uint16_t>((src[2 * c] << 8) | src[2 * c + 1]) : src[c];
    }
  }
  return img;
}

void write_png(const std::uint8_t* data, Index rows, Index cols, int channels, int bit_depth,
               const std::string& path) {
  const size_t stride = static_cast<size_t>(cols) * channels * (bit_depth / 8);
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<size_t>(rows) * (stride + 1));
  for (Index r = 0; r < rows; ++r) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), data + static_cast<size_t>(r) * stride,
               data + static_cast<size_t>(r + 1) * stride);
  }
  const auto compressed = zlib_deflate(raw);

  std::vector<std::uint8_t> out(kPngSig.begin(), kPngSig.end());
  std::array<std::uint8_t, 13> ihdr{};
  const auto put = [&](size_t off, std::uint32_t v) {
    ihdr[off] = static_cast<std::uint8_t>(v >> 24);
    ihdr[off + 1] = static_cast<std::uint8_t>(v >> 16);
    ihdr[off + 2] = static_cast<std::uint8_t>(v >> 8);
    ihdr[off + 3] = static_cast<std::uint8_t>(v);
  };
  put(0, static_cast<std::uint32_t>(cols));
  put(4, static_cast<std::uint32_t>(rows));
  ihdr[8] = static_cast<std::uint8_t>(bit_depth);
  ihdr[9] = channels == 3 ? 2 : 0;  // truecolor or grayscale
  append_chunk(out, "IHDR", ihdr.data(), ihdr.size());
  append_chunk(out, "IDAT", compressed.data(), compressed.size());
  append_chunk(out, "IEND", nullptr, 0);
  write_file(path, out.data(), out.size());
}

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

GrayImage read_gray(const std::string& path) {
  const auto buf = read_file(path);
  if (buf.size() >= 8 && std::equal(kPngSig.begin(), kPngSig.end(), buf.begin()))
    return read_png_gray(buf, path);
  return read_pgm(buf, path);
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::vector<std::uint8_t> out;
  const std::string header = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) +
                             "\n" + std::to_string(img.max_value) + "\n";
  out.insert(out.end(), header.begin(), header.end());
  for (std::uint16_t px : img.pixels) {
    if (img.max_value > 255) out.push_back(static_cast<std::uint8_t>(px >> 8));
    out.push_back(static_cast<std::uint8_t>(px & 0xff));
  }
  write_file(path, out.data(), out.size());
}

void write_png_gray(const GrayImage& img, const std::string& path) {
  if (img.max_value > 255) {
    std::vector<std::uint8_t> bytes(img.pixels.size() * 2);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      bytes[2 * i] = static_cast<std::uint8_t>(img.pixels[i] >> 8);
      bytes[2 * i + 1] = static_cast<std::uint8_t>(img.pixels[i] & 0xff);
    }
    write_png(bytes.data(), img.rows, img.cols, 1, 16, path);
  } else {
    std::vector<std::uint8_t> bytes(img.pixels.size());
    for (size_t i = 0; i < img.pixels.size(); ++i)
      bytes[i] = static_cast<std::uint8_t>(img.pixels[i]);
    write_png(bytes.data(), img.rows, img.cols, 1, 8, path);
  }
}

void write_png_rgb(const RgbImage& img, const std::string& path) {
  write_png(img.pixels.data(), img.rows, img.cols, 3, 8, path);
}

GrayImage to_gray8(const MatD& img) {
  GrayImage out;
  out.rows = img.rows();
  out.cols = img.cols();
  out.max_value = 255;
  out.pixels.resize(static_cast<size_t>(img.size()));
  for (Index r = 0; r < img.rows(); ++r)
    for (Index c = 0; c < img.cols(); ++c) {
      const double v = std::clamp(img(r, c), 0.0, 1.0);
      out.pixels[static_cast<size_t>(r * img.cols() + c)] =
          static_cast<std::uint16_t>(std::lround(v * 255.0));
    }
  return out;
}

}  // namespace semu
