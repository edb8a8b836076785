#include "morphnerf/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace mnrf {

namespace {

std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_begin = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uLong crc = crc32(0L, out.data() + crc_begin, static_cast<uInt>(out.size() - crc_begin));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

void write_png_bytes(const std::string& path, int width, int height, int channels,
                     const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> raw;
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  raw.reserve((stride + 1) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels.begin() + static_cast<std::ptrdiff_t>(y * stride),
               pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
  }
  uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(compressed_size);
  if (compress2(compressed.data(), &compressed_size, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw DataError("png write: deflate failed");
  compressed.resize(compressed_size);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(channels == 3 ? 2 : 0);               // color type: RGB or gray
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("png write: cannot open " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("png write: short write to " + path);
}

std::uint32_t read_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

Eigen::Vector3d sample_bilinear(const Image& image, double x, double y) {
  // shift into a grid where pixel i's center is at coordinate i
  const double gx = std::clamp(x - 0.5, 0.0, static_cast<double>(image.width - 1));
  const double gy = std::clamp(y - 0.5, 0.0, static_cast<double>(image.height - 1));
  const int x0 = std::min(static_cast<int>(gx), image.width - 2 >= 0 ? image.width - 2 : 0);
  const int y0 = std::min(static_cast<int>(gy), image.height - 2 >= 0 ? image.height - 2 : 0);
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = gx - x0, fy = gy - y0;
  Eigen::Vector3d out;
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - fx) * image.at(x0, y0, c) + fx * image.at(x1, y0, c);
    const double bot = (1.0 - fx) * image.at(x0, y1, c) + fx * image.at(x1, y1, c);
    out(c) = (1.0 - fy) * top + fy * bot;
  }
  return out;
}

void save_png(const std::string& path, const Image& image) {
  std::vector<std::uint8_t> pixels(image.pixel_count() * 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize(image.data[i]);
  write_png_bytes(path, image.width, image.height, 3, pixels);
}

void save_png_gray(const std::string& path, const Eigen::MatrixXd& values) {
  const int h = static_cast<int>(values.rows());
  const int w = static_cast<int>(values.cols());
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      pixels[static_cast<std::size_t>(y) * w + x] = quantize(values(y, x));
  write_png_bytes(path, w, h, 1, pixels);
}

Image load_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("png read: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  static const std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSig, 8) != 0)
    throw DataError("png read: bad signature in " + path);

  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = read_u32_be(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw DataError("png read: truncated chunk in " + path);
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const std::uint8_t* data = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw DataError("png read: bad IHDR");
      width = static_cast<int>(read_u32_be(data));
      height = static_cast<int>(read_u32_be(data + 4));
      const int bit_depth = data[8], color_type = data[9], interlace = data[12];
      if (bit_depth != 8 || interlace != 0)
        throw DataError("png read: only 8-bit non-interlaced images supported");
      switch (color_type) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 6: channels = 4; break;
        default: throw DataError("png read: unsupported color type");
      }
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (width <= 0 || height <= 0 || channels == 0 || idat.empty())
    throw DataError("png read: missing image data in " + path);

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(height));
  uLongf raw_size = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_size != raw.size())
    throw DataError("png read: inflate failed for " + path);

  // unfilter in place into `pixels`
  std::vector<std::uint8_t> pixels(stride * static_cast<std::size_t>(height));
  const int bpp = channels;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[(stride + 1) * static_cast<std::size_t>(y)];
    const std::uint8_t* src = &raw[(stride + 1) * static_cast<std::size_t>(y) + 1];
    std::uint8_t* dst = &pixels[stride * static_cast<std::size_t>(y)];
    const std::uint8_t* prev = y > 0 ? &pixels[stride * static_cast<std::size_t>(y - 1)] : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= static_cast<std::size_t>(bpp)) ? prev[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw DataError("png read: unknown filter type");
      }
      dst[i] = static_cast<std::uint8_t>(v & 0xFF);
    }
  }

  Image image(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::uint8_t* px = &pixels[(static_cast<std::size_t>(y) * width + x) * channels];
      for (int c = 0; c < 3; ++c)
        image.at(x, y, c) = (channels == 1 ? px[0] : px[c]) / 255.0;
    }
  return image;
}

void save_ppm(const std::string& path, const Image& image) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("ppm write: cannot open " + path);
  f << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<std::uint8_t> pixels(image.pixel_count() * 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize(image.data[i]);
  f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

Image load_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("ppm read: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
    throw DataError("ppm read: unsupported header in " + path);
  f.get();  // single whitespace after maxval
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!f) throw DataError("ppm read: truncated pixel data in " + path);
  Image image(w, h);
  for (std::size_t i = 0; i < pixels.size(); ++i) image.data[i] = pixels[i] / 255.0;
  return image;
}

void save_depth(const std::string& path, const DepthMap& depth) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("depth write: cannot open " + path);
  const char magic[4] = {'D', 'P', 'T', 'H'};
  const std::uint32_t w = static_cast<std::uint32_t>(depth.width);
  const std::uint32_t h = static_cast<std::uint32_t>(depth.height);
  f.write(magic, 4);
  f.write(reinterpret_cast<const char*>(&w), 4);
  f.write(reinterpret_cast<const char*>(&h), 4);
  f.write(reinterpret_cast<const char*>(&depth.sentinel), 4);
  std::vector<float> row(static_cast<std::size_t>(depth.width));
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) row[static_cast<std::size_t>(x)] = static_cast<float>(depth.values(y, x));
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!f) throw DataError("depth write: short write to " + path);
}

DepthMap load_depth(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("depth read: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "DPTH", 4) != 0)
    throw DataError("depth read: bad magic in " + path);
  std::uint32_t w = 0, h = 0;
  float sentinel = 0.0f;
  f.read(reinterpret_cast<char*>(&w), 4);
  f.read(reinterpret_cast<char*>(&h), 4);
  f.read(reinterpret_cast<char*>(&sentinel), 4);
  if (!f || w == 0 || h == 0) throw DataError("depth read: bad header in " + path);
  DepthMap depth;
  depth.width = static_cast<int>(w);
  depth.height = static_cast<int>(h);
  depth.sentinel = sentinel;
  depth.values.resize(depth.height, depth.width);
  std::vector<float> row(static_cast<std::size_t>(depth.width));
  for (int y = 0; y < depth.height; ++y) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!f) throw DataError("depth read: truncated payload in " + path);
    for (int x = 0; x < depth.width; ++x) depth.values(y, x) = row[static_cast<std::size_t>(x)];
  }
  return depth;
}

double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw DomainError("psnr: image size mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

}  // namespace mnrf
