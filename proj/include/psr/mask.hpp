#pragma once

#include <cstdint>
#include <vector>

namespace psr {

/// Row-major 0/1 mask.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixels() const { return data.size(); }
  int area() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Alternating run lengths over row-major pixels, starting with a 0-run
/// (which may be empty).
std::vector<int> rle_encode(const BinaryMask& mask);
/// Returns false if runs are negative or do not cover exactly h*w pixels.
bool rle_decode(const std::vector<int>& runs, int height, int width, BinaryMask& out);

}  // namespace psr
