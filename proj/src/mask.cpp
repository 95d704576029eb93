#include "psr/mask.hpp"

#include <numeric>

namespace psr {

int BinaryMask::area() const { return std::accumulate(data.begin(), data.end(), 0); }

std::vector<int> rle_encode(const BinaryMask& mask) {
  std::vector<int> runs;
  std::uint8_t current = 0;
  int run = 0;
  for (std::uint8_t v : mask.data) {
    const std::uint8_t bit = v ? 1 : 0;
    if (bit != current) {
      runs.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  runs.push_back(run);
  return runs;
}

bool rle_decode(const std::vector<int>& runs, int height, int width, BinaryMask& out) {
  if (height < 1 || width < 1) return false;
  out = BinaryMask(height, width);
  std::size_t pos = 0;
  std::uint8_t bit = 0;
  for (int run : runs) {
    if (run < 0 || pos + static_cast<std::size_t>(run) > out.pixels()) return false;
    for (int i = 0; i < run; ++i) out.data[pos++] = bit;
    bit ^= 1;
  }
  return pos == out.pixels();
}

}  // namespace psr
