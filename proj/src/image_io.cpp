#include "icad/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace icad {

namespace {

constexpr uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw data_error("write failed for " + path.string());
}

uint32_t be32(const uint8_t* p) {
  return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 | uint32_t(p[3]);
}

void push_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

void push_chunk(std::vector<uint8_t>& out, const char type[4],
                const std::vector<uint8_t>& data) {
  push_be32(out, uint32_t(data.size()));
  const size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_at, uInt(4 + data.size()));
  push_be32(out, uint32_t(crc));
}

uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return uint8_t(a);
  if (pb <= pc) return uint8_t(b);
  return uint8_t(c);
}

GrayImage decode_png(const std::vector<uint8_t>& bytes, const std::string& name) {
  if (bytes.size() < 8 + 12 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
    throw data_error(name + ": not a PNG file");

  GrayImage img;
  std::vector<uint8_t> idat;
  bool have_header = false, have_end = false;
  size_t at = 8;
  while (at + 12 <= bytes.size() && !have_end) {
    const uint32_t len = be32(bytes.data() + at);
    if (at + 12 + len > bytes.size()) throw data_error(name + ": truncated PNG chunk");
    const char* type = reinterpret_cast<const char*>(bytes.data() + at + 4);
    const uint8_t* data = bytes.data() + at + 8;

    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data() + at + 4, uInt(4 + len));
    if (uint32_t(crc) != be32(data + len)) throw data_error(name + ": PNG chunk CRC mismatch");

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw data_error(name + ": malformed IHDR");
      img.width = int(be32(data));
      img.height = int(be32(data + 4));
      const uint8_t depth = data[8], color = data[9], comp = data[10], filter = data[11],
                    interlace = data[12];
      if (img.width <= 0 || img.height <= 0 || img.width > (1 << 20) ||
          img.height > (1 << 20))
        throw data_error(name + ": unreasonable PNG dimensions");
      if (depth != 8 || color != 0)
        throw data_error(name + ": only 8-bit grayscale PNG is supported");
      if (comp != 0 || filter != 0 || interlace != 0)
        throw data_error(name + ": unsupported PNG encoding options");
      have_header = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      if (!have_header) throw data_error(name + ": IDAT before IHDR");
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      have_end = true;
    }
    // Ancillary chunks are skipped.
    at += 12 + len;
  }
  if (!have_header || !have_end) throw data_error(name + ": incomplete PNG stream");

  const size_t stride = size_t(img.width) + 1;
  std::vector<uint8_t> raw(stride * size_t(img.height));
  uLongf raw_len = uLongf(raw.size());
  const int rc = uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size()));
  if (rc != Z_OK || raw_len != raw.size())
    throw data_error(name + ": PNG pixel data did not decompress to the expected size");

  img.pixels.assign(img.size(), 0);
  for (int y = 0; y < img.height; ++y) {
    const uint8_t* row = raw.data() + size_t(y) * stride;
    uint8_t* out = img.pixels.data() + size_t(y) * img.width;
    const uint8_t* above = y > 0 ? img.pixels.data() + size_t(y - 1) * img.width : nullptr;
    const uint8_t filter = row[0];
    for (int x = 0; x < img.width; ++x) {
      const int cur = row[1 + x];
      const int left = x > 0 ? out[x - 1] : 0;
      const int up = above ? above[x] : 0;
      const int upleft = (above && x > 0) ? above[x - 1] : 0;
      int v;
      switch (filter) {
        case 0: v = cur; break;
        case 1: v = cur + left; break;
        case 2: v = cur + up; break;
        case 3: v = cur + (left + up) / 2; break;
        case 4: v = cur + paeth(left, up, upleft); break;
        default: throw data_error(name + ": unknown PNG scanline filter");
      }
      out[x] = uint8_t(v & 0xff);
    }
  }
  return img;
}

GrayImage decode_pgm(const std::vector<uint8_t>& bytes, const std::string& name) {
  size_t at = 0;
  auto next_token = [&]() -> std::string {
    for (;;) {
      while (at < bytes.size() && std::isspace(bytes[at])) ++at;
      if (at < bytes.size() && bytes[at] == '#') {
        while (at < bytes.size() && bytes[at] != '\n') ++at;
        continue;
      }
      break;
    }
    std::string tok;
    while (at < bytes.size() && !std::isspace(bytes[at])) tok.push_back(char(bytes[at++]));
    return tok;
  };

  if (next_token() != "P5") throw data_error(name + ": not a binary PGM (P5) file");
  const auto parse_int = [&](const std::string& what) {
    const std::string tok = next_token();
    try {
      size_t used = 0;
      const long v = std::stol(tok, &used);
      if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
      return int(v);
    } catch (const std::exception&) {
      throw data_error(name + ": malformed PGM " + what);
    }
  };
  GrayImage img;
  img.width = parse_int("width");
  img.height = parse_int("height");
  const int maxval = parse_int("maxval");
  if (maxval > 255) throw data_error(name + ": 16-bit PGM is not supported");
  ++at;  // single whitespace after maxval
  if (bytes.size() - at < img.size()) throw data_error(name + ": truncated PGM pixel data");
  img.pixels.assign(bytes.begin() + std::ptrdiff_t(at),
                    bytes.begin() + std::ptrdiff_t(at + img.size()));
  return img;
}

}  // namespace

GrayImage read_gray_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0)
    return decode_png(bytes, path.string());
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
    return decode_pgm(bytes, path.string());
  throw data_error(path.string() + ": unrecognized image format (PNG or P5 PGM expected)");
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<uint8_t> out;
  const std::string header = "P5\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  write_file(path, out);
}

void write_png_gray(const std::filesystem::path& path, const GrayImage& img) {
  if (img.width <= 0 || img.height <= 0 || img.pixels.size() != img.size())
    throw data_error("write_png_gray: inconsistent image dimensions");

  std::vector<uint8_t> out(kPngSig, kPngSig + 8);

  std::vector<uint8_t> ihdr;
  push_be32(ihdr, uint32_t(img.width));
  push_be32(ihdr, uint32_t(img.height));
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // depth, gray, deflate, filter0, progressive off
  push_chunk(out, "IHDR", ihdr);

  // Filter byte 0 per scanline; fixed compression level keeps output bytes
  // reproducible run to run.
  std::vector<uint8_t> raw;
  raw.reserve((size_t(img.width) + 1) * size_t(img.height));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    const uint8_t* row = img.pixels.data() + size_t(y) * img.width;
    raw.insert(raw.end(), row, row + img.width);
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<uint8_t> idat(bound);
  if (compress2(idat.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw data_error("write_png_gray: deflate failed");
  idat.resize(bound);
  push_chunk(out, "IDAT", idat);
  push_chunk(out, "IEND", {});
  write_file(path, out);
}

void write_gray_image(const std::filesystem::path& path, const GrayImage& img) {
  if (path.extension() == ".pgm")
    write_pgm(path, img);
  else
    write_png_gray(path, img);
}

std::vector<float> to_normalized(const GrayImage& img) {
  std::vector<float> out(img.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = normalize_pixel(img.pixels[i]);
  return out;
}

uint8_t denormalize_pixel(float v) {
  const float scaled = std::round((v + 1.0f) * 127.5f);
  return uint8_t(std::clamp(scaled, 0.0f, 255.0f));
}

GrayImage from_normalized(int width, int height, std::span<const float> values) {
  if (int64_t(width) * height != int64_t(values.size()))
    throw data_error("from_normalized: element count does not match dimensions");
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) img.pixels[i] = denormalize_pixel(values[i]);
  return img;
}

}  // namespace icad
