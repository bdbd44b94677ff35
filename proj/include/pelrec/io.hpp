#pragma once

#include "pelrec/field.hpp"
#include "pelrec/image.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pelrec::io {

/// Parses binary (P5) or ASCII (P2) PGM with maxval <= 255. Errors carry the
/// byte offset at which parsing failed.
Frame decode_pgm(std::string_view bytes);
Frame read_pgm(const std::filesystem::path& path);

/// Binary P5, maxval 255. Intensities are rounded and clipped to [0, 255].
std::string encode_pgm(const Frame& frame);
void write_pgm(const std::filesystem::path& path, const Frame& frame);

inline constexpr float kFlowSentinel = 1e9f;

/// Flow file: "PIEH", int32 width, int32 height (little endian), then
/// row-major float32 (dx, dy) pairs. Skipped pixels become the sentinel.
std::string encode_flow(const DisplacementField& field);
void write_flow(const std::filesystem::path& path, const DisplacementField& field);

/// Pairs with a component at or above the sentinel magnitude come back as
/// skipped pixels with a zero vector.
DisplacementField decode_flow(std::string_view bytes);
DisplacementField read_flow(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Quotes a CSV field when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace pelrec::io
