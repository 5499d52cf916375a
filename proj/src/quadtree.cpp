#include "gadst/quadtree.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <sstream>

#include "gadst/error.hpp"

namespace gadst {

std::string MortonKey::path() const {
  std::string s(static_cast<size_t>(level), '0');
  for (int i = 0; i < level; ++i) s[static_cast<size_t>(i)] = static_cast<char>('0' + digit(i));
  return s;
}

MortonKey MortonKey::from_path(std::string_view path) {
  MortonKey k;
  for (char c : path) {
    if (c < '0' || c > '3') throw ParseError("bad quadrant digit in path '" + std::string(path) + "'");
    k.code = k.code << 2 | static_cast<uint64_t>(c - '0');
    ++k.level;
  }
  if (k.level > 31) throw ValidationError("quadtree path too deep");
  return k;
}

bool morton_less(const MortonKey& a, const MortonKey& b) {
  int n = std::min(a.level, b.level);
  for (int i = 0; i < n; ++i) {
    int da = a.digit(i), db = b.digit(i);
    if (da != db) return da < db;
  }
  return a.level < b.level;
}

uint64_t morton_encode(uint32_t y, uint32_t x, int level) {
  if (level < 0 || level > 31) throw ValidationError("morton level out of range");
  if (level < 32 && (y >> level || x >> level))
    throw ValidationError("morton coordinate exceeds level " + std::to_string(level));
  uint64_t code = 0;
  for (int b = level - 1; b >= 0; --b)
    code = code << 2 | ((y >> b & 1u) << 1) | (x >> b & 1u);
  return code;
}

std::pair<uint32_t, uint32_t> morton_decode(uint64_t code, int level) {
  if (level < 0 || level > 31) throw ValidationError("morton level out of range");
  if (level < 32 && code >> (2 * level)) throw ValidationError("morton code exceeds level");
  uint32_t y = 0, x = 0;
  for (int b = level - 1; b >= 0; --b) {
    uint64_t d = code >> (2 * b) & 3u;
    y = y << 1 | static_cast<uint32_t>(d >> 1);
    x = x << 1 | static_cast<uint32_t>(d & 1u);
  }
  return {y, x};
}

int default_max_level(int rows, int cols) {
  int m = std::min(rows, cols);
  int lvl = 0;
  while ((m >> (lvl + 1)) >= 2) ++lvl;
  return lvl;
}

static void check_grid_shape(int rows, int cols, int max_level) {
  if (rows < 1 || cols < 1 || !std::has_single_bit(static_cast<unsigned>(rows)) ||
      !std::has_single_bit(static_cast<unsigned>(cols)))
    throw ValidationError("grid shape must be a positive power of two, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  if (max_level < 0 || (std::min(rows, cols) >> max_level) < 1)
    throw ValidationError("max_level " + std::to_string(max_level) + " too deep for " +
                          std::to_string(rows) + "x" + std::to_string(cols));
}

namespace {

std::unique_ptr<QuadNode> decompose_block(const CountGrid& g, MortonKey key, int r0, int c0,
                                          int h, int w, int max_level) {
  auto node = std::make_unique<QuadNode>();
  node->key = key;
  node->h = h;
  node->w = w;

  int zeros = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (g.at(r0 + r, c0 + c) == 0.0) ++zeros;

  bool homogeneous = zeros == 0 || zeros == h * w;
  if (homogeneous || key.level >= max_level || h < 2 || w < 2) {
    node->payload.resize(static_cast<size_t>(h) * w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        node->payload[static_cast<size_t>(r) * w + c] = g.at(r0 + r, c0 + c);
    return node;
  }

  int hh = h / 2, hw = w / 2;
  node->children.resize(4);
  node->children[0] = decompose_block(g, key.child(0), r0, c0, hh, hw, max_level);
  node->children[1] = decompose_block(g, key.child(1), r0, c0 + hw, hh, hw, max_level);
  node->children[2] = decompose_block(g, key.child(2), r0 + hh, c0, hh, hw, max_level);
  node->children[3] = decompose_block(g, key.child(3), r0 + hh, c0 + hw, hh, hw, max_level);
  return node;
}

}  // namespace

QuadTree decompose(const CountGrid& grid, int max_level) {
  check_grid_shape(grid.rows, grid.cols, max_level);
  QuadTree t;
  t.rows = grid.rows;
  t.cols = grid.cols;
  t.root = decompose_block(grid, MortonKey{}, 0, 0, grid.rows, grid.cols, max_level);
  return t;
}

static void write_leaves(const QuadNode& n, CountGrid& g) {
  if (n.is_leaf()) {
    auto [y, x] = morton_decode(n.key.code, n.key.level);
    int r0 = static_cast<int>(y) * n.h, c0 = static_cast<int>(x) * n.w;
    if (static_cast<int64_t>(n.payload.size()) != int64_t{n.h} * n.w)
      throw ShapeError("leaf payload length does not match its block shape");
    for (int r = 0; r < n.h; ++r)
      for (int c = 0; c < n.w; ++c)
        g.at(r0 + r, c0 + c) = n.payload[static_cast<size_t>(r) * n.w + c];
    return;
  }
  for (const auto& ch : n.children) write_leaves(*ch, g);
}

CountGrid reconstruct(const QuadTree& tree) {
  if (!tree.root) throw ValidationError("reconstruct of empty tree");
  CountGrid g(tree.rows, tree.cols);
  write_leaves(*tree.root, g);
  return g;
}

QuadTree build_universal(std::span<const VisitCountRaster> days, int max_level) {
  if (days.empty()) throw InsufficientDataError("universal tree needs at least one day");
  CountGrid sum = days.front().grid;
  for (size_t i = 1; i < days.size(); ++i) {
    const CountGrid& g = days[i].grid;
    if (g.rows != sum.rows || g.cols != sum.cols)
      throw ShapeError("day rasters disagree on grid shape");
    for (size_t j = 0; j < sum.v.size(); ++j) sum.v[j] += g.v[j];
  }
  return decompose(sum, max_level);
}

static void quadlist_walk(const QuadNode& n, std::vector<MortonKey>& out) {
  if (n.children.size() == 4) {
    for (const auto& ch : n.children) quadlist_walk(*ch, out);
  } else {
    out.push_back(n.key);
  }
}

std::vector<MortonKey> universal_quadlist(const QuadTree& tree) {
  if (!tree.root) throw ValidationError("quadlist of empty tree");
  std::vector<MortonKey> out;
  quadlist_walk(*tree.root, out);
  return out;
}

static void shapes_walk(const QuadNode& n, NodeShapeMap& m) {
  m[n.key] = {n.h, n.w};
  for (const auto& ch : n.children) shapes_walk(*ch, m);
}

NodeShapeMap node_shapes(const QuadTree& tree) {
  NodeShapeMap m;
  if (tree.root) shapes_walk(*tree.root, m);
  return m;
}

GeoIndexTable build_geo_index_table(const std::vector<MortonKey>& quadlist,
                                    const NodeShapeMap& shapes, int rows, int cols) {
  GeoIndexTable t;
  t.rows = rows;
  t.cols = cols;
  int64_t cursor = 0;
  for (size_t i = 0; i < quadlist.size(); ++i) {
    const MortonKey& k = quadlist[i];
    if (i > 0 && !morton_less(quadlist[i - 1], k))
      throw ValidationError("quadlist keys not in ascending path order");
    auto it = shapes.find(k);
    if (it == shapes.end())
      throw ValidationError("quadlist key '" + k.path() + "' missing from node shapes");
    auto [h, w] = it->second;
    GeoIndexEntry e{k, h, w, cursor, cursor + int64_t{h} * w};
    cursor = e.index_stop;
    t.entries.push_back(e);
  }
  t.validate();
  return t;
}

void GeoIndexTable::validate() const {
  int64_t cursor = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    const GeoIndexEntry& e = entries[i];
    if (e.h < 1 || e.w < 1) throw ValidationError("geo index entry with empty shape");
    if (e.index_start != cursor || e.index_stop != cursor + int64_t{e.h} * e.w)
      throw ValidationError("geo index ranges are not a contiguous partition");
    if (i > 0 && !morton_less(entries[i - 1].key, e.key))
      throw ValidationError("geo index keys not in ascending path order");
    cursor = e.index_stop;
  }
}

UniversalIndex build_universal_index(std::span<const VisitCountRaster> days, int max_level) {
  UniversalIndex u;
  u.tree = build_universal(days, max_level);
  u.quadlist = universal_quadlist(u.tree);
  u.table = build_geo_index_table(u.quadlist, node_shapes(u.tree), u.tree.rows, u.tree.cols);
  return u;
}

std::vector<std::vector<double>> align(const CountGrid& grid, const GeoIndexTable& table) {
  if (grid.rows != table.rows || grid.cols != table.cols)
    throw ShapeError("raster shape does not match geo index grid");
  std::vector<std::vector<double>> payloads;
  payloads.reserve(table.entries.size());
  for (const GeoIndexEntry& e : table.entries) {
    int lh = table.rows >> e.key.level, lw = table.cols >> e.key.level;
    if (lh != e.h || lw != e.w)
      throw ShapeError("geo index entry '" + e.key.path() + "' shape disagrees with its level");
    auto [y, x] = morton_decode(e.key.code, e.key.level);
    int r0 = static_cast<int>(y) * e.h, c0 = static_cast<int>(x) * e.w;
    std::vector<double> p(static_cast<size_t>(e.h) * e.w);
    for (int r = 0; r < e.h; ++r)
      for (int c = 0; c < e.w; ++c)
        p[static_cast<size_t>(r) * e.w + c] = grid.at(r0 + r, c0 + c);
    payloads.push_back(std::move(p));
  }
  return payloads;
}

std::vector<std::vector<double>> align(const QuadTree& tree, const GeoIndexTable& table) {
  return align(reconstruct(tree), table);
}

std::vector<double> flatten(const std::vector<std::vector<double>>& payloads,
                            const GeoIndexTable& table) {
  if (payloads.size() != table.entries.size())
    throw ShapeError("payload count does not match geo index entries");
  std::vector<double> frame(static_cast<size_t>(table.flat_len()));
  for (size_t i = 0; i < payloads.size(); ++i) {
    const GeoIndexEntry& e = table.entries[i];
    if (static_cast<int64_t>(payloads[i].size()) != e.index_stop - e.index_start)
      throw ShapeError("payload length does not match entry '" + e.key.path() + "'");
    std::copy(payloads[i].begin(), payloads[i].end(),
              frame.begin() + static_cast<size_t>(e.index_start));
  }
  return frame;
}

std::vector<std::vector<double>> unflatten(std::span<const double> frame,
                                           const GeoIndexTable& table) {
  if (static_cast<int64_t>(frame.size()) != table.flat_len())
    throw ShapeError("frame length does not match geo index table");
  std::vector<std::vector<double>> payloads;
  payloads.reserve(table.entries.size());
  for (const GeoIndexEntry& e : table.entries)
    payloads.emplace_back(frame.begin() + static_cast<size_t>(e.index_start),
                          frame.begin() + static_cast<size_t>(e.index_stop));
  return payloads;
}

CountGrid frame_to_grid(std::span<const double> frame, const GeoIndexTable& table) {
  if (static_cast<int64_t>(frame.size()) != table.flat_len())
    throw ShapeError("frame length does not match geo index table");
  CountGrid g(table.rows, table.cols);
  for (const GeoIndexEntry& e : table.entries) {
    auto [y, x] = morton_decode(e.key.code, e.key.level);
    int r0 = static_cast<int>(y) * e.h, c0 = static_cast<int>(x) * e.w;
    for (int r = 0; r < e.h; ++r)
      for (int c = 0; c < e.w; ++c)
        g.at(r0 + r, c0 + c) = frame[static_cast<size_t>(e.index_start) +
                                     static_cast<size_t>(r) * e.w + c];
  }
  return g;
}

std::vector<double> grid_to_frame(const CountGrid& grid, const GeoIndexTable& table) {
  return flatten(align(grid, table), table);
}

std::string table_to_text(const GeoIndexTable& table) {
  std::ostringstream os;
  os << "geoindex " << table.rows << " " << table.cols << " " << table.entries.size() << "\n";
  for (const GeoIndexEntry& e : table.entries) {
    std::string p = e.key.path();
    if (p.empty()) p = "-";
    os << p << " " << e.h << " " << e.w << " " << e.index_start << " " << e.index_stop << "\n";
  }
  return os.str();
}

GeoIndexTable table_from_text(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string tag;
  GeoIndexTable t;
  size_t count = 0;
  if (!(is >> tag >> t.rows >> t.cols >> count) || tag != "geoindex")
    throw ParseError("bad geo index header");
  for (size_t i = 0; i < count; ++i) {
    std::string path;
    GeoIndexEntry e;
    if (!(is >> path >> e.h >> e.w >> e.index_start >> e.index_stop))
      throw ParseError("truncated geo index table");
    e.key = MortonKey::from_path(path == "-" ? std::string_view{} : std::string_view{path});
    t.entries.push_back(e);
  }
  t.validate();
  return t;
}

}  // namespace gadst
