#include "wsi/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <string>

#include "wsi/error.hpp"

namespace wsi {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw ParseError(path.string(), 0, "truncated netpbm header");
  return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const auto tok = header_token(in, path);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string(), 0, "bad netpbm header value '" + tok + "'");
  }
}

struct NetpbmHeader {
  int width;
  int height;
};

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path, const char* magic) {
  if (header_token(in, path) != magic) throw ParseError(path.string(), 0, std::string("expected ") + magic);
  NetpbmHeader h{};
  h.width = header_int(in, path);
  h.height = header_int(in, path);
  if (header_int(in, path) != 255) throw ParseError(path.string(), 0, "only maxval 255 is supported");
  return h;
}

}  // namespace

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const auto h = read_header(in, path, "P6");
  RgbImage img(h.height, h.width);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw ParseError(path.string(), 0, "truncated pixel data");
  return img;
}

void write_pgm(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  std::vector<std::uint8_t> bytes(mask.data.size());
  std::transform(mask.data.begin(), mask.data.end(), bytes.begin(),
                 [](std::uint8_t v) { return std::uint8_t(v ? 255 : 0); });
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Mask read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const auto h = read_header(in, path, "P5");
  Mask m(h.height, h.width);
  in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(m.data.size()))
    throw ParseError(path.string(), 0, "truncated pixel data");
  for (auto& v : m.data) v = v > 127 ? 1 : 0;
  return m;
}

}  // namespace wsi
