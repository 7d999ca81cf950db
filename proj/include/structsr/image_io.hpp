#pragma once

// 8-bit PNG and binary PPM/PGM reading and writing.
// Samples map to [0, 1] as v / 255 on read and round(clamp(v) * 255) on write.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "structsr/errors.hpp"
#include "structsr/image.hpp"

namespace structsr {

namespace detail {

inline std::vector<std::uint8_t> to_bytes_interleaved(const ImageBuf& img) {
  const int ch = img.channels();
  std::vector<std::uint8_t> out(img.plane_size() * ch);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < ch; ++c) {
        const double v = std::clamp(img.at(c, x, y), 0.0, 1.0);
        out[(static_cast<std::size_t>(y) * img.width() + x) * ch + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return out;
}

inline ImageBuf from_bytes_interleaved(const std::uint8_t* bytes, int w, int h, int ch) {
  ImageBuf img(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c)
        img.at(c, x, y) = bytes[(static_cast<std::size_t>(y) * w + x) * ch + c] / 255.0;
  return img;
}

inline ImageBuf read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int ch = color ? 3 : 1;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return from_bytes_interleaved(buffer.data(), static_cast<int>(image.width),
                                static_cast<int>(image.height), ch);
}

inline void write_png(const std::filesystem::path& path, const ImageBuf& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto bytes = to_bytes_interleaved(img);
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

inline void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline ImageBuf read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6" && magic != "P5") throw IoError("not a binary PPM/PGM: " + path.string());
  int w = 0, h = 0, maxval = 0;
  skip_pnm_space(in);
  in >> w;
  skip_pnm_space(in);
  in >> h;
  skip_pnm_space(in);
  in >> maxval;
  in.get();
  if (!in || w < 1 || h < 1 || maxval != 255) {
    throw IoError("unsupported PNM header in " + path.string());
  }
  const int ch = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * ch);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError("truncated PNM data in " + path.string());
  }
  return from_bytes_interleaved(bytes.data(), w, h, ch);
}

inline void write_pnm(const std::filesystem::path& path, const ImageBuf& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (img.channels() == 3 ? "P6" : "P5") << "\n"
      << img.width() << " " << img.height() << "\n255\n";
  const auto bytes = to_bytes_interleaved(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace detail

inline bool is_image_file(const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

/// Reads PNG or binary PPM/PGM, chosen by the file signature.
inline ImageBuf read_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path.string());
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  const auto got = probe.gcount();
  probe.close();
  if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) return detail::read_png(path);
  if (got >= 2 && sig[0] == 'P' && (sig[1] == '6' || sig[1] == '5')) return detail::read_pnm(path);
  throw IoError("unrecognized image format: " + path.string());
}

/// Writes by extension: .ppm/.pgm as binary PNM, anything else as PNG.
inline void write_image(const std::filesystem::path& path, const ImageBuf& img) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".ppm" || ext == ".pgm") {
    detail::write_pnm(path, img);
  } else {
    detail::write_png(path, img);
  }
}

}  // namespace structsr
