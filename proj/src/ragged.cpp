#include "gaan/ragged.hpp"

#include <string>

namespace gaan {

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (keys.size() + 1));
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto k : keys) push(k);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

Segments::Segments() : offsets_(std::make_shared<const std::vector<Index>>(1, 0)) {}

Segments::Segments(std::vector<Index> offsets) {
  if (offsets.empty() || offsets.front() != 0) {
    throw ShapeError("segment offsets must start at 0");
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] < offsets[i - 1]) {
      throw ShapeError("segment offsets must be non-decreasing (at " + std::to_string(i) + ")");
    }
  }
  offsets_ = std::make_shared<const std::vector<Index>>(std::move(offsets));
}

Segments Segments::from_lengths(std::span<const Index> lengths) {
  std::vector<Index> offsets(lengths.size() + 1, 0);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 0) throw ShapeError("negative segment length");
    offsets[i + 1] = offsets[i] + lengths[i];
  }
  return Segments(std::move(offsets));
}

std::vector<Index> Segments::row_segments() const {
  std::vector<Index> ids(static_cast<std::size_t>(total_rows()));
  for (Index s = 0; s < count(); ++s) {
    for (Index r = begin(s); r < end(s); ++r) ids[static_cast<std::size_t>(r)] = s;
  }
  return ids;
}

bool Segments::operator==(const Segments& other) const {
  return offsets_ == other.offsets_ || *offsets_ == *other.offsets_;
}

RaggedMatrix::RaggedMatrix(Segments segs, Matrix vals)
    : segments(std::move(segs)), values(std::move(vals)) {
  if (values.rows() != segments.total_rows()) {
    throw ShapeError("ragged values have " + std::to_string(values.rows()) +
                     " rows but offsets cover " + std::to_string(segments.total_rows()));
  }
}

}  // namespace gaan
