#pragma once

#include "gaan/types.hpp"

#include <memory>
#include <span>
#include <vector>

namespace gaan {

/// Offsets of contiguous row groups. Segment s owns rows
/// [offsets[s], offsets[s+1]). Copies share the offset array.
class Segments {
 public:
  Segments();
  explicit Segments(std::vector<Index> offsets);

  /// Segments of the given lengths, in order.
  static Segments from_lengths(std::span<const Index> lengths);

  Index count() const { return static_cast<Index>(offsets_->size()) - 1; }
  Index total_rows() const { return offsets_->back(); }
  Index begin(Index s) const { return (*offsets_)[s]; }
  Index end(Index s) const { return (*offsets_)[s + 1]; }
  Index length(Index s) const { return end(s) - begin(s); }

  std::span<const Index> offsets() const { return *offsets_; }

  /// Segment id of every row.
  std::vector<Index> row_segments() const;

  bool operator==(const Segments& other) const;

 private:
  std::shared_ptr<const std::vector<Index>> offsets_;
};

/// Flat value matrix partitioned into variable-length row segments.
struct RaggedMatrix {
  Segments segments;
  Matrix values;

  RaggedMatrix() = default;
  RaggedMatrix(Segments segs, Matrix vals);

  Index num_segments() const { return segments.count(); }
  Index cols() const { return values.cols(); }
};

}  // namespace gaan
