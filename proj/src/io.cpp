#include "pelrec/io.hpp"

#include "pelrec/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace pelrec::io {

namespace {

class PgmCursor {
 public:
  explicit PgmCursor(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::string_view rest() const { return bytes_.substr(pos_); }
  void advance(std::size_t n) { pos_ += n; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("PGM: " + what + " at byte " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (is_space(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_int(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') ++pos_;
    if (start == pos_) {
      pos_ = start;
      fail(std::string("expected ") + what);
    }
    long value = 0;
    const auto res = std::from_chars(bytes_.data() + start, bytes_.data() + pos_, value);
    if (res.ec != std::errc{}) {
      pos_ = start;
      fail(std::string("out-of-range ") + what);
    }
    return value;
  }

  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

Frame decode_pgm(std::string_view bytes) {
  PgmCursor cur(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    cur.fail("bad magic (expected P5 or P2)");
  }
  const bool binary = bytes[1] == '5';
  cur.advance(2);
  const long width = cur.read_int("width");
  const long height = cur.read_int("height");
  const std::size_t maxval_at = cur.offset();
  const long maxval = cur.read_int("maxval");
  if (width <= 0 || height <= 0 || width > (1 << 20) || height > (1 << 20)) {
    cur.fail("invalid dimensions");
  }
  if (maxval > 255 || maxval < 1) {
    throw ParseError("PGM: unsupported depth (maxval " + std::to_string(maxval) +
                     ", only 1..255 supported) at byte " + std::to_string(maxval_at));
  }
  const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> data(count);
  if (binary) {
    if (cur.remaining() == 0 || !PgmCursor::is_space(cur.rest()[0])) {
      cur.fail("missing separator after header");
    }
    cur.advance(1);
    if (cur.remaining() < count) {
      cur.advance(cur.remaining());
      cur.fail("truncated payload (expected " + std::to_string(count) + " bytes)");
    }
    const std::string_view raster = cur.rest();
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<unsigned char>(raster[i]);
      if (v > maxval) {
        cur.advance(i);
        cur.fail("sample exceeds maxval");
      }
      data[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      cur.skip_space_and_comments();
      if (cur.remaining() == 0) cur.fail("truncated payload");
      const std::size_t at = cur.offset();
      const long v = cur.read_int("sample");
      if (v > maxval) {
        throw ParseError("PGM: sample exceeds maxval at byte " + std::to_string(at));
      }
      data[i] = static_cast<double>(v);
    }
  }
  return Frame(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

Frame read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

std::string encode_pgm(const Frame& frame) {
  std::string out = "P5\n" + std::to_string(frame.width()) + " " +
                    std::to_string(frame.height()) + "\n255\n";
  out.reserve(out.size() + frame.size());
  for (double v : frame.intensities()) {
    const double q = std::clamp(std::round(v), 0.0, 255.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Frame& frame) {
  write_file_atomic(path, encode_pgm(frame));
}

std::string encode_flow(const DisplacementField& field) {
  std::string out = "PIEH";
  out.reserve(12 + field.size() * 8);
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      float dx = kFlowSentinel;
      float dy = kFlowSentinel;
      if (!field.skipped(x, y)) {
        dx = static_cast<float>(field(x, y).dx);
        dy = static_cast<float>(field(x, y).dy);
      }
      put_u32(out, std::bit_cast<std::uint32_t>(dx));
      put_u32(out, std::bit_cast<std::uint32_t>(dy));
    }
  }
  return out;
}

void write_flow(const std::filesystem::path& path, const DisplacementField& field) {
  write_file_atomic(path, encode_flow(field));
}

DisplacementField decode_flow(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "PIEH") {
    throw ParseError("flow: bad magic at byte 0");
  }
  const auto width = static_cast<std::int32_t>(get_u32(bytes, 4));
  const auto height = static_cast<std::int32_t>(get_u32(bytes, 8));
  if (width <= 0 || height <= 0 || width > (1 << 20) || height > (1 << 20)) {
    throw ParseError("flow: invalid dimensions at byte 4");
  }
  const std::size_t expected =
      12 + static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 8;
  if (bytes.size() != expected) {
    throw ParseError("flow: payload size mismatch (expected " + std::to_string(expected) +
                     " bytes) at byte " + std::to_string(std::min(bytes.size(), expected)));
  }
  DisplacementField field(width, height);
  std::size_t at = 12;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const float dx = std::bit_cast<float>(get_u32(bytes, at));
      const float dy = std::bit_cast<float>(get_u32(bytes, at + 4));
      if (!std::isfinite(dx) || !std::isfinite(dy) || std::abs(dx) >= kFlowSentinel ||
          std::abs(dy) >= kFlowSentinel) {
        field(x, y) = {};
        field.set_status(x, y, PixelStatus::kSkippedBoundary);
      } else {
        field(x, y) = {dx, dy};
      }
      at += 8;
    }
  }
  return field;
}

DisplacementField read_flow(const std::filesystem::path& path) {
  return decode_flow(read_file(path));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot write " + tmp.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      throw Error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_escape(fields[i]);
  }
  out += "\r\n";
  return out;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

}  // namespace pelrec::io
