#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gadst/error.hpp"
#include "gadst/quadtree.hpp"
#include "gadst/rng.hpp"

using namespace gadst;

namespace {

// Fig-style 8x8 fixture: the SW quadrant holds two fully active 2x2 blocks,
// one empty block, and one partially active block refined to single cells.
CountGrid quadrant_fixture() {
  CountGrid g(8, 8);
  for (int r = 4; r <= 5; ++r)
    for (int c = 2; c <= 3; ++c) g.at(r, c) = 1;  // block "21"
  for (int r = 6; r <= 7; ++r)
    for (int c = 0; c <= 1; ++c) g.at(r, c) = 2;  // block "22"
  g.at(6, 2) = 3;                                 // "230"
  g.at(6, 3) = 4;                                 // "231"
  g.at(7, 2) = 5;                                 // "232"
  return g;
}

void collect_leaves(const QuadNode& n, std::map<std::string, const QuadNode*>& out) {
  if (n.is_leaf()) {
    out.emplace(n.key.path(), &n);
    return;
  }
  for (const auto& c : n.children) collect_leaves(*c, out);
}

CountGrid random_sparse(int rows, int cols, Rng& rng, double fill = 0.2) {
  CountGrid g(rows, cols);
  for (auto& v : g.v)
    if (rng.uniform() < fill) v = 1.0 + static_cast<double>(rng.below(5));
  return g;
}

VisitCountRaster day_of(CountGrid g, int idx) {
  VisitCountRaster r;
  r.date = Date::from_ymd(2009, 4, 1) + idx;
  r.day_index = idx;
  r.grid = std::move(g);
  return r;
}

}  // namespace

TEST_CASE("morton path to code arithmetic") {
  const MortonKey k = MortonKey::from_path("302");
  CHECK(k.level == 3);
  CHECK(k.code == 50);
  CHECK(k.path() == "302");
  auto [y, x] = morton_decode(k.code, k.level);
  CHECK(y == 5);
  CHECK(x == 4);
  CHECK(morton_encode(5, 4, 3) == 50);

  CHECK(MortonKey::from_path("23").code == 11);
  CHECK(MortonKey::from_path("0").code == 0);
  CHECK(MortonKey::from_path("0").level == 1);

  // the y bit is the high bit of each digit pair
  CHECK(morton_encode(1, 0, 1) == 2);
  CHECK(morton_encode(0, 1, 1) == 1);
  CHECK(morton_encode(1, 1, 1) == 3);

  CHECK_THROWS_AS(MortonKey::from_path("04x"), ParseError);
  CHECK_THROWS_AS(morton_encode(2, 0, 1), ValidationError);
  CHECK_THROWS_AS(morton_decode(64, 3), ValidationError);
}

TEST_CASE("morton roundtrip is exhaustive over levels 1..8") {
  for (int level = 1; level <= 8; ++level) {
    const uint32_t side = 1u << level;
    for (uint32_t y = 0; y < side; ++y) {
      for (uint32_t x = 0; x < side; ++x) {
        const uint64_t code = morton_encode(y, x, level);
        const auto [yy, xx] = morton_decode(code, level);
        if (yy != y || xx != x) {
          FAIL("roundtrip mismatch at level ", level, " y=", y, " x=", x);
        }
      }
    }
  }
  CHECK(true);
}

TEST_CASE("morton ordering is path-lexicographic") {
  const MortonKey a = MortonKey::from_path("230");
  const MortonKey b = MortonKey::from_path("3");
  CHECK(morton_less(a, b));
  CHECK_FALSE(morton_less(b, a));
  CHECK_FALSE(morton_less(a, a));

  // a node precedes its own children
  const MortonKey p = MortonKey::from_path("2");
  CHECK(morton_less(p, a));

  std::vector<std::string> paths = {"3", "0", "230", "22", "1", "233", "20", "21", "231", "232"};
  std::vector<MortonKey> keys;
  for (const auto& s : paths) keys.push_back(MortonKey::from_path(s));
  std::sort(keys.begin(), keys.end(), morton_less);
  std::vector<std::string> sorted;
  for (const auto& k : keys) sorted.push_back(k.path());
  CHECK(sorted == std::vector<std::string>{"0", "1", "20", "21", "22", "230", "231", "232", "233",
                                           "3"});
}

TEST_CASE("decompose splits mixed blocks and keeps homogeneous leaves") {
  const CountGrid g = quadrant_fixture();
  const QuadTree tree = decompose(g, 3);

  std::map<std::string, const QuadNode*> leaves;
  collect_leaves(*tree.root, leaves);

  std::set<std::string> keys;
  for (const auto& [p, n] : leaves) keys.insert(p);
  CHECK(keys == std::set<std::string>{"0", "1", "3", "20", "21", "22", "230", "231", "232",
                                      "233"});

  std::set<std::string> zero_leaves;
  for (const auto& [p, n] : leaves) {
    bool all_zero = true;
    for (double v : n->payload) all_zero = all_zero && v == 0.0;
    if (all_zero) zero_leaves.insert(p);
  }
  CHECK(zero_leaves == std::set<std::string>{"0", "1", "3", "20", "233"});

  // shapes follow the key level
  CHECK(leaves.at("0")->h == 4);
  CHECK(leaves.at("21")->w == 2);
  CHECK(leaves.at("230")->h == 1);
}

TEST_CASE("decompose degenerate cases") {
  CountGrid zeros(8, 8);
  const QuadTree t0 = decompose(zeros, 3);
  CHECK(t0.root->is_leaf());
  CHECK(t0.root->h == 8);

  const QuadTree t1 = decompose(quadrant_fixture(), 0);
  CHECK(t1.root->is_leaf());
  CHECK(t1.root->payload.size() == 64);

  CountGrid bad(6, 6);
  CHECK_THROWS_AS(decompose(bad, 1), ValidationError);
  CHECK_THROWS_AS(decompose(quadrant_fixture(), 4), ValidationError);
}

TEST_CASE("tree structure invariants: zero or four children, halving shapes") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const QuadTree tree = decompose(random_sparse(16, 16, rng), 4);
    std::vector<const QuadNode*> stack{tree.root.get()};
    while (!stack.empty()) {
      const QuadNode* n = stack.back();
      stack.pop_back();
      CHECK((n->children.empty() || n->children.size() == 4));
      for (const auto& c : n->children) {
        CHECK(c->h == n->h / 2);
        CHECK(c->w == n->w / 2);
        CHECK(c->key.level == n->key.level + 1);
        stack.push_back(c.get());
      }
    }
  }
}

TEST_CASE("reconstruct inverts decompose bitwise") {
  const CountGrid fixture = quadrant_fixture();
  CHECK(reconstruct(decompose(fixture, 3)) == fixture);

  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const CountGrid g = random_sparse(16, 16, rng);
    CHECK(reconstruct(decompose(g, 4)) == g);
    CHECK(reconstruct(decompose(g, 2)) == g);
  }

  CountGrid zeros(4, 4);
  CHECK(reconstruct(decompose(zeros, 2)) == zeros);
}

TEST_CASE("default max level keeps leaves at least 2x2") {
  CHECK(default_max_level(8, 8) == 2);
  CHECK(default_max_level(32, 32) == 4);
  CHECK(default_max_level(2, 2) == 0);
  CHECK(default_max_level(16, 4) == 1);
}

TEST_CASE("universal tree covers every day's activity") {
  Rng rng(43);
  std::vector<VisitCountRaster> days;
  // two days activating disjoint quadrants
  CountGrid nw(8, 8), se(8, 8);
  nw.at(1, 1) = 3;
  se.at(6, 6) = 5;
  days.push_back(day_of(nw, 0));
  days.push_back(day_of(se, 1));
  const QuadTree uni = build_universal(days, 2);
  CHECK_FALSE(uni.root->is_leaf());
  // both active quadrants split further, the empty ones stay leaves
  CHECK_FALSE(uni.root->children[0]->is_leaf());
  CHECK(uni.root->children[1]->is_leaf());
  CHECK(uni.root->children[2]->is_leaf());
  CHECK_FALSE(uni.root->children[3]->is_leaf());

  // single day: structurally the decomposition of that day
  const QuadTree solo = build_universal({days.data(), 1}, 2);
  const CountGrid back = reconstruct(solo);
  CHECK(back == nw);

  CHECK_THROWS_AS(build_universal({}, 2), InsufficientDataError);

  std::vector<VisitCountRaster> mixed = {day_of(CountGrid(8, 8), 0), day_of(CountGrid(4, 4), 1)};
  CHECK_THROWS_AS(build_universal(mixed, 1), ShapeError);

  // all-zero training set: single-root tree
  std::vector<VisitCountRaster> quiet = {day_of(CountGrid(8, 8), 0)};
  CHECK(build_universal(quiet, 2).root->is_leaf());
  (void)rng;
}

TEST_CASE("quadlist takes all four children or the node itself") {
  const QuadTree tree = decompose(quadrant_fixture(), 3);
  const std::vector<MortonKey> list = universal_quadlist(tree);
  std::vector<std::string> paths;
  for (const auto& k : list) paths.push_back(k.path());
  CHECK(paths == std::vector<std::string>{"0", "1", "20", "21", "22", "230", "231", "232", "233",
                                          "3"});

  const QuadTree single = decompose(CountGrid(8, 8), 2);
  const std::vector<MortonKey> only = universal_quadlist(single);
  CHECK(only.size() == 1);
  CHECK(only[0].level == 0);
}

TEST_CASE("quadlist keys partition the grid exactly") {
  Rng rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<VisitCountRaster> days;
    for (int d = 0; d < 4; ++d) days.push_back(day_of(random_sparse(16, 16, rng), d));
    const UniversalIndex idx = build_universal_index(days, 3);

    CountGrid paint(16, 16);
    for (const auto& e : idx.table.entries) {
      const auto [y0, x0] = morton_decode(e.key.code, e.key.level);
      const int scale_r = 16 >> e.key.level;
      for (int r = 0; r < e.h; ++r)
        for (int c = 0; c < e.w; ++c)
          paint.at(static_cast<int>(y0) * scale_r + r, static_cast<int>(x0) * scale_r + c) += 1;
    }
    for (double v : paint.v) CHECK(v == 1.0);
  }
}

TEST_CASE("geo index table prefix sums") {
  NodeShapeMap shapes;
  const MortonKey a = MortonKey::from_path("0");
  const MortonKey b = MortonKey::from_path("3");
  shapes[a] = {2, 2};
  shapes[b] = {4, 4};
  const GeoIndexTable table = build_geo_index_table({a, b}, shapes, 8, 8);
  REQUIRE(table.entries.size() == 2);
  CHECK(table.entries[0].index_start == 0);
  CHECK(table.entries[0].index_stop == 4);
  CHECK(table.entries[1].index_start == 4);
  CHECK(table.entries[1].index_stop == 20);
  CHECK(table.flat_len() == 20);

  NodeShapeMap root_shape;
  const MortonKey root{0, 0};
  root_shape[root] = {8, 8};
  const GeoIndexTable whole = build_geo_index_table({root}, root_shape, 8, 8);
  CHECK(whole.entries.size() == 1);
  CHECK(whole.entries[0].index_start == 0);
  CHECK(whole.entries[0].index_stop == 64);

  // random shape sets: total length is the sum of payload sizes
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<VisitCountRaster> days{day_of(random_sparse(16, 16, rng), 0)};
    const UniversalIndex idx = build_universal_index(days, 4);
    int64_t total = 0;
    for (const auto& e : idx.table.entries) total += int64_t{e.h} * e.w;
    CHECK(total == idx.table.flat_len());
    CHECK_NOTHROW(idx.table.validate());
  }
}

TEST_CASE("geo index validation rejects broken tables") {
  NodeShapeMap shapes;
  const MortonKey a = MortonKey::from_path("0");
  shapes[a] = {4, 4};
  GeoIndexTable t = build_geo_index_table({a}, shapes, 8, 8);
  CHECK_NOTHROW(t.validate());

  GeoIndexTable holed = t;
  holed.entries[0].index_start = 1;
  CHECK_THROWS_AS(holed.validate(), ValidationError);

  GeoIndexTable misshaped = t;
  misshaped.entries[0].h = 3;
  CHECK_THROWS(misshaped.validate());
}

TEST_CASE("alignment conserves mass and pads missing nodes with zeros") {
  Rng rng(59);
  std::vector<VisitCountRaster> train;
  for (int d = 0; d < 6; ++d) train.push_back(day_of(random_sparse(16, 16, rng), d));
  const UniversalIndex idx = build_universal_index(train, 3);

  for (int d = 0; d < 30; ++d) {
    const CountGrid g = random_sparse(16, 16, rng);
    const auto payloads = align(g, idx.table);
    REQUIRE(payloads.size() == idx.table.entries.size());
    double mass = 0;
    for (size_t i = 0; i < payloads.size(); ++i) {
      const auto& e = idx.table.entries[i];
      CHECK(static_cast<int64_t>(payloads[i].size()) == int64_t{e.h} * e.w);
      for (double v : payloads[i]) mass += v;
    }
    CHECK(mass == g.sum());
  }

  // a day with no activity in some universal node gets a zero payload there
  CountGrid empty(16, 16);
  const auto zero_payloads = align(empty, idx.table);
  for (const auto& p : zero_payloads)
    for (double v : p) CHECK(v == 0.0);
}

TEST_CASE("alignment is idempotent") {
  Rng rng(61);
  std::vector<VisitCountRaster> train;
  for (int d = 0; d < 4; ++d) train.push_back(day_of(random_sparse(8, 8, rng), d));
  const UniversalIndex idx = build_universal_index(train, 2);

  for (int d = 0; d < 10; ++d) {
    const CountGrid g = random_sparse(8, 8, rng);
    const std::vector<double> once = grid_to_frame(g, idx.table);
    const std::vector<double> twice = grid_to_frame(frame_to_grid(once, idx.table), idx.table);
    CHECK(once == twice);
  }
}

TEST_CASE("flatten and unflatten are exact inverses") {
  Rng rng(67);
  std::vector<VisitCountRaster> train;
  for (int d = 0; d < 4; ++d) train.push_back(day_of(random_sparse(16, 16, rng), d));
  const UniversalIndex idx = build_universal_index(train, 3);

  for (int trial = 0; trial < 10; ++trial) {
    const CountGrid g = random_sparse(16, 16, rng);
    const auto payloads = align(g, idx.table);
    const std::vector<double> frame = flatten(payloads, idx.table);
    CHECK(static_cast<int64_t>(frame.size()) == idx.table.flat_len());
    CHECK(unflatten(frame, idx.table) == payloads);
    CHECK(frame_to_grid(frame, idx.table) == g);
  }

  std::vector<double> short_frame(static_cast<size_t>(idx.table.flat_len()) - 1);
  CHECK_THROWS_AS(frame_to_grid(short_frame, idx.table), ShapeError);
}

TEST_CASE("roundtrip through a raster's own universal tree") {
  Rng rng(71);
  for (int trial = 0; trial < 25; ++trial) {
    const CountGrid g = random_sparse(16, 16, rng);
    std::vector<VisitCountRaster> self{day_of(g, 0)};
    const UniversalIndex idx = build_universal_index(self, 4);
    CHECK(frame_to_grid(grid_to_frame(g, idx.table), idx.table) == g);
  }
}

TEST_CASE("table text serialization roundtrips") {
  Rng rng(73);
  std::vector<VisitCountRaster> train{day_of(quadrant_fixture(), 0),
                                      day_of(random_sparse(8, 8, rng), 1)};
  const UniversalIndex idx = build_universal_index(train, 3);

  const std::string text = table_to_text(idx.table);
  const GeoIndexTable back = table_from_text(text);
  REQUIRE(back.entries.size() == idx.table.entries.size());
  CHECK(back.rows == idx.table.rows);
  CHECK(back.cols == idx.table.cols);
  for (size_t i = 0; i < back.entries.size(); ++i) {
    CHECK(back.entries[i].key == idx.table.entries[i].key);
    CHECK(back.entries[i].h == idx.table.entries[i].h);
    CHECK(back.entries[i].index_start == idx.table.entries[i].index_start);
    CHECK(back.entries[i].index_stop == idx.table.entries[i].index_stop);
  }
  CHECK_NOTHROW(back.validate());

  CHECK_THROWS_AS(table_from_text("not a table"), ParseError);
  CHECK_THROWS_AS(table_from_text("geoindex 8 8 2\n0 2 2 0 4\n"), ParseError);
}

TEST_CASE("single root table serializes with a dash path") {
  NodeShapeMap shapes;
  const MortonKey root{0, 0};
  shapes[root] = {4, 4};
  const GeoIndexTable table = build_geo_index_table({root}, shapes, 4, 4);
  const std::string text = table_to_text(table);
  CHECK(text.find("- 4 4 0 16") != std::string::npos);
  const GeoIndexTable back = table_from_text(text);
  CHECK(back.entries[0].key.level == 0);
}
