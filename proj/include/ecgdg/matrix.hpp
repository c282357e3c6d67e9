#pragma once

#include <cstdint>
#include <vector>

#include "ecgdg/errors.hpp"

namespace ecgdg {

// Dense row-major 0/1 matrix; rows are records, columns are classes.
struct BinaryMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<uint8_t> data;

  BinaryMatrix() = default;
  BinaryMatrix(int64_t r, int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), 0) {}

  uint8_t& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols + c)]; }
  uint8_t at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols + c)]; }

  bool operator==(const BinaryMatrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

}  // namespace ecgdg
