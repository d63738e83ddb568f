#pragma once

#include <stdexcept>

namespace icad {

// Square patch with a centered square hole. The hole is the region the
// completion network never sees at its input and is asked to reconstruct.
// With the defaults, the hole covers rows and columns 48..79 of a 128x128
// patch.
struct MaskSpec {
  int patch = 128;
  int hole = 32;

  void validate() const {
    if (patch <= 0 || hole <= 0) throw std::invalid_argument("MaskSpec: sizes must be positive");
    if (hole > patch) throw std::invalid_argument("MaskSpec: hole larger than patch");
    if ((patch - hole) % 2 != 0)
      throw std::invalid_argument("MaskSpec: hole cannot be centered (parity mismatch)");
  }

  int hole_start() const { return (patch - hole) / 2; }
  int hole_end() const { return hole_start() + hole; }  // exclusive

  bool in_hole(int y, int x) const {
    return y >= hole_start() && y < hole_end() && x >= hole_start() && x < hole_end();
  }
};

}  // namespace icad
