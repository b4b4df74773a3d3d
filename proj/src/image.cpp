#include "pocr/image.hpp"

#include <fstream>

#include "pocr/errors.hpp"

namespace pocr {

ImageU8 make_image(std::int64_t width, std::int64_t height, std::uint8_t fill) {
  if (width < 1 || height < 1) {
    throw RangeError("image dimensions must be positive");
  }
  ImageU8 img;
  img.width = width;
  img.height = height;
  img.pixels.assign(static_cast<std::size_t>(width * height), fill);
  return img;
}

ImageRGB grayscale_to_rgb(const ImageU8& img) {
  ImageRGB out;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(img.pixels.size() * 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] =
        img.pixels[i];
  }
  return out;
}

namespace {

void write_binary(const std::string& magic, std::int64_t width, std::int64_t height,
                  const std::vector<std::uint8_t>& payload, const std::string& path) {
  std::ofstream fs(path, std::ios::binary);
  if (!fs) throw DataError("cannot open '" + path + "' for writing");
  fs << magic << "\n" << width << " " << height << "\n255\n";
  fs.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size()));
  if (!fs) throw DataError("failed while writing '" + path + "'");
}

// Reads one whitespace-delimited header token, skipping '#' comment lines.
std::string next_header_token(std::istream& in, const std::string& path) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (token.empty()) {
    throw DataError("truncated header in '" + path + "'");
  }
  return token;
}

std::int64_t header_int(std::istream& in, const std::string& path) {
  const std::string token = next_header_token(in, path);
  try {
    return std::stoll(token);
  } catch (const std::exception&) {
    throw DataError("bad header field '" + token + "' in '" + path + "'");
  }
}

std::vector<std::uint8_t> read_binary(const std::string& magic, std::int64_t channels,
                                      std::int64_t& width, std::int64_t& height,
                                      const std::string& path) {
  std::ifstream fs(path, std::ios::binary);
  if (!fs) throw DataError("cannot open image '" + path + "'");
  const std::string found = next_header_token(fs, path);
  if (found != magic) {
    throw DataError("'" + path + "' is not a " + magic + " file (magic '" +
                    found + "')");
  }
  width = header_int(fs, path);
  height = header_int(fs, path);
  const std::int64_t maxval = header_int(fs, path);
  if (width < 1 || height < 1 || maxval != 255) {
    throw DataError("unsupported dimensions or maxval in '" + path + "'");
  }
  // The header terminator is the single whitespace already consumed by
  // next_header_token's trailing read.
  std::vector<std::uint8_t> payload(
      static_cast<std::size_t>(width * height * channels));
  fs.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (fs.gcount() != static_cast<std::streamsize>(payload.size())) {
    throw DataError("truncated pixel payload in '" + path + "'");
  }
  return payload;
}

}  // namespace

void write_pgm(const ImageU8& img, const std::string& path) {
  write_binary("P5", img.width, img.height, img.pixels, path);
}

ImageU8 read_pgm(const std::string& path) {
  ImageU8 img;
  img.pixels = read_binary("P5", 1, img.width, img.height, path);
  return img;
}

void write_ppm(const ImageRGB& img, const std::string& path) {
  write_binary("P6", img.width, img.height, img.pixels, path);
}

ImageRGB read_ppm(const std::string& path) {
  ImageRGB img;
  img.pixels = read_binary("P6", 3, img.width, img.height, path);
  return img;
}

}  // namespace pocr
