#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gadst/raster.hpp"

namespace gadst {

// Z-order key: base-4 path from the root, one digit per level.
// Digits: 0 = NW, 1 = NE, 2 = SW, 3 = SE. Within a digit, the row bit is the
// high bit and the column bit is the low bit; digit i addresses level i+1.
struct MortonKey {
  uint64_t code = 0;
  int level = 0;

  std::string path() const;
  static MortonKey from_path(std::string_view path);

  int digit(int i) const { return static_cast<int>((code >> (2 * (level - 1 - i))) & 3u); }
  MortonKey child(int d) const { return {code << 2 | static_cast<uint64_t>(d), level + 1}; }

  bool operator==(const MortonKey&) const = default;
};

// Path-lexicographic ordering (depth-first Z-order).
bool morton_less(const MortonKey& a, const MortonKey& b);

struct MortonKeyLess {
  bool operator()(const MortonKey& a, const MortonKey& b) const { return morton_less(a, b); }
};

// Interleave the bits of (y, x) at the given level, y taking the higher bit
// of each digit pair.
uint64_t morton_encode(uint32_t y, uint32_t x, int level);
std::pair<uint32_t, uint32_t> morton_decode(uint64_t code, int level);

struct QuadNode {
  MortonKey key;
  int h = 0, w = 0;               // block shape at this node
  std::vector<double> payload;    // leaf content, row-major h*w; empty on internal nodes
  std::vector<std::unique_ptr<QuadNode>> children;  // empty or exactly 4

  bool is_leaf() const { return children.empty(); }
};

struct QuadTree {
  int rows = 0, cols = 0;
  std::unique_ptr<QuadNode> root;
};

// Split a grid by payload homogeneity: a block becomes a leaf when it is
// all-zero, all-nonzero, or at max_level; mixed blocks split into quadrants.
QuadTree decompose(const CountGrid& grid, int max_level);
CountGrid reconstruct(const QuadTree& tree);

// Deepest split level that keeps leaves at least 2x2.
int default_max_level(int rows, int cols);

// Union of per-day structure: the decomposition of the elementwise sum.
QuadTree build_universal(std::span<const VisitCountRaster> days, int max_level);

// Leaves of a tree in depth-first Z-order: a node contributes its four
// children when all four exist, otherwise itself.
std::vector<MortonKey> universal_quadlist(const QuadTree& tree);

using NodeShapeMap = std::map<MortonKey, std::pair<int, int>, MortonKeyLess>;
NodeShapeMap node_shapes(const QuadTree& tree);

struct GeoIndexEntry {
  MortonKey key;
  int h = 0, w = 0;
  int64_t index_start = 0;
  int64_t index_stop = 0;  // exclusive
};

// Ordered lookup from quadtree node to its slice of the flattened frame.
struct GeoIndexTable {
  int rows = 0, cols = 0;  // grid the keys address
  std::vector<GeoIndexEntry> entries;

  int64_t flat_len() const { return entries.empty() ? 0 : entries.back().index_stop; }
  void validate() const;  // contiguity, ordering, shape consistency
};

GeoIndexTable build_geo_index_table(const std::vector<MortonKey>& quadlist,
                                    const NodeShapeMap& shapes, int rows, int cols);

// Convenience: universal tree + quadlist + index table in one pass.
struct UniversalIndex {
  QuadTree tree;
  std::vector<MortonKey> quadlist;
  GeoIndexTable table;
};
UniversalIndex build_universal_index(std::span<const VisitCountRaster> days, int max_level);

// Per-entry payloads of a raster under the table's node layout. Entries
// tile the grid, so alignment is exact and mass-conserving.
std::vector<std::vector<double>> align(const CountGrid& grid, const GeoIndexTable& table);
std::vector<std::vector<double>> align(const QuadTree& tree, const GeoIndexTable& table);

std::vector<double> flatten(const std::vector<std::vector<double>>& payloads,
                            const GeoIndexTable& table);
std::vector<std::vector<double>> unflatten(std::span<const double> frame,
                                           const GeoIndexTable& table);
CountGrid frame_to_grid(std::span<const double> frame, const GeoIndexTable& table);
std::vector<double> grid_to_frame(const CountGrid& grid, const GeoIndexTable& table);

std::string table_to_text(const GeoIndexTable& table);
GeoIndexTable table_from_text(std::string_view text);

}  // namespace gadst
