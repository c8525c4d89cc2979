#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "sandpile/cluster.hpp"
#include "sandpile/engine.hpp"
#include "sandpile/folded.hpp"

using namespace sandpile;

namespace {

Cluster full_square(std::int64_t r) {
    std::vector<Point> pts;
    for (std::int64_t x = -(r - 1); x <= r - 1; ++x)
        for (std::int64_t y = -(r - 1); y <= r - 1; ++y) pts.push_back(Point{x, y});
    return Cluster(2, pts);
}

Cluster full_diamond(std::int64_t r) {
    std::vector<Point> pts;
    for (std::int64_t x = -(r - 1); x <= r - 1; ++x)
        for (std::int64_t y = -(r - 1); y <= r - 1; ++y)
            if (std::llabs(x) + std::llabs(y) <= r - 1) pts.push_back(Point{x, y});
    return Cluster(2, pts);
}

}  // namespace

TEST_CASE("Cluster basics: membership, size, tight box, dedup") {
    Cluster c(2, {Point{0, 0}, Point{2, 1}, Point{0, 0}});
    REQUIRE(c.size() == 2);  // duplicates collapse
    REQUIRE(c.contains(Point{0, 0}));
    REQUIRE(c.contains(Point{2, 1}));
    REQUIRE_FALSE(c.contains(Point{1, 1}));
    REQUIRE(c.bounding_box() == Box(Point{0, 0}, Point{2, 1}));

    auto cs = c.cells();
    REQUIRE(cs.size() == 2);
    REQUIRE(cs[0] == (Point{0, 0}));
    REQUIRE(cs[1] == (Point{2, 1}));

    Cluster e(2, {});
    REQUIRE(e.empty());
    REQUIRE_FALSE(e.contains(Point{0, 0}));
    REQUIRE_THROWS_AS(e.bounding_box(), std::logic_error);

    REQUIRE(c == Cluster(2, {Point{2, 1}, Point{0, 0}}));
    REQUIRE(c != e);
}

TEST_CASE("toppled and visited clusters of tiny point sources") {
    StabilizationResult one = stabilize(make_point_source(4, 2, 2));
    Cluster t = toppled_cluster(one);
    REQUIRE(t.size() == 1);
    REQUIRE(t.contains(Point{0, 0}));

    Cluster v = visited_cluster(one);
    REQUIRE(v.size() == 5);  // origin plus its four neighbors
    for (const Point& q : neighbors(Point{0, 0})) REQUIRE(v.contains(q));

    StabilizationResult none = stabilize(make_point_source(3, 2, 2));
    REQUIRE(toppled_cluster(none).empty());
    REQUIRE(visited_cluster(none).empty());
}

TEST_CASE("outer_boundary surrounds the cluster") {
    Cluster ob = outer_boundary(Cluster(2, {Point{0, 0}}));
    REQUIRE(ob.size() == 4);
    for (const Point& q : neighbors(Point{0, 0})) REQUIRE(ob.contains(q));

    Cluster block = full_square(2);  // the 3x3 block
    Cluster b2 = outer_boundary(block);
    REQUIRE(b2.size() == 12);
    REQUIRE(b2.contains(Point{2, 0}));
    REQUIRE_FALSE(b2.contains(Point{2, 2}));  // diagonal is not adjacent
    REQUIRE_FALSE(b2.contains(Point{0, 0}));
}

TEST_CASE("radius counts nested squares") {
    REQUIRE(radius(Cluster(2, {})) == 0);
    REQUIRE(radius(Cluster(2, {Point{0, 0}})) == 1);
    REQUIRE(radius(full_square(4)) == 4);
    REQUIRE(radius(Cluster(2, {Point{2, 0}})) == 3);
    REQUIRE(radius(Cluster(2, {Point{0, -5}, Point{1, 1}})) == 6);
    REQUIRE(radius(Cluster(3, {Point{1, -2, 0}})) == 3);
}

TEST_CASE("match_square recognizes exact squares only") {
    REQUIRE(match_square(Cluster(2, {})) == 0);
    REQUIRE(match_square(Cluster(2, {Point{0, 0}})) == 1);
    REQUIRE(match_square(full_square(3)) == 3);

    // remove a corner: same radius, wrong count
    std::vector<Point> pts;
    for (const Point& p : full_square(3).cells())
        if (!(p == Point{2, 2})) pts.push_back(p);
    REQUIRE_FALSE(match_square(Cluster(2, pts)).has_value());

    // full count but shifted off-center
    std::vector<Point> shifted;
    for (const Point& p : full_square(3).cells()) shifted.push_back(Point{p.c[0] + 1, p.c[1]});
    REQUIRE_FALSE(match_square(Cluster(2, shifted)).has_value());

    // a diamond is not a square
    REQUIRE_FALSE(match_square(full_diamond(3)).has_value());
}

TEST_CASE("diamond containment and the largest contained diamond") {
    Cluster d3 = full_diamond(3);
    REQUIRE(contains_diamond(d3, 3));
    REQUIRE_FALSE(contains_diamond(d3, 4));
    REQUIRE(contains_diamond(d3, 0));
    REQUIRE(largest_contained_diamond(d3) == 3);

    // S_3 contains D_3 but misses (3,0) needed for D_4
    REQUIRE(largest_contained_diamond(full_square(3)) == 3);
    REQUIRE(largest_contained_diamond(Cluster(2, {Point{0, 0}})) == 1);
    REQUIRE(largest_contained_diamond(Cluster(2, {})) == 0);
    // clusters missing the origin contain no diamond at all
    REQUIRE(largest_contained_diamond(Cluster(2, {Point{1, 0}})) == 0);
}

TEST_CASE("adjacent zero pairs inside the toppled cluster") {
    StabilizationResult r = stabilize(make_point_source(4, 0, 2));
    REQUIRE(adjacent_zero_pairs(r.final, toppled_cluster(r)) == 0);

    // hand-built: three zeros in an L, two of the three adjacencies internal
    SandpileConfig f(2, 1, Box::cube(2, 2));
    f.set_height(Point{0, 0}, 0);
    f.set_height(Point{1, 0}, 0);
    f.set_height(Point{0, 1}, 0);
    f.set_height(Point{0, -1}, 0);  // zero but outside the cluster: ignored
    Cluster t(2, {Point{0, 0}, Point{1, 0}, Point{0, 1}, Point{1, 1}});
    REQUIRE(adjacent_zero_pairs(f, t) == 2);
}

TEST_CASE("domino tiling of the diamond and its occupancy") {
    SandpileConfig all2(2, 2, Box::cube(2, 5));
    REQUIRE(domino_lower_bound(all2, 1).complete == 0);
    REQUIRE(domino_lower_bound(all2, 2).complete == 1);
    REQUIRE(domino_lower_bound(all2, 3).complete == 4);
    REQUIRE(domino_lower_bound(all2, 3).occupied == 4);

    SandpileConfig zeros(2, 0, Box::cube(2, 5));
    REQUIRE(domino_lower_bound(zeros, 3).occupied == 0);

    // one particle in one domino counts that domino once
    zeros.set_height(Point{-1, 0}, 1);
    DominoCount dc = domino_lower_bound(zeros, 3);
    REQUIRE(dc.occupied == 1);

    SandpileConfig c3(3, 0, Box::cube(3, 1));
    REQUIRE_THROWS_AS(domino_lower_bound(c3, 2), std::invalid_argument);
}

TEST_CASE("cluster_subset is inclusion") {
    Cluster small(2, {Point{0, 0}, Point{1, 0}});
    Cluster big = full_square(2);
    REQUIRE(cluster_subset(small, big));
    REQUIRE_FALSE(cluster_subset(big, small));
    REQUIRE(cluster_subset(Cluster(2, {}), small));
    REQUIRE(cluster_subset(big, big));
    REQUIRE_THROWS_AS(cluster_subset(small, Cluster(3, {})), std::invalid_argument);
}

TEST_CASE("cluster text round-trips") {
    Cluster c(2, {Point{-1, 2}, Point{0, 0}, Point{3, -4}});
    std::ostringstream os;
    write_cluster_text(c, os);
    REQUIRE(os.str() ==
            "2 3\n"
            "-1 2\n"
            "0 0\n"
            "3 -4\n");
    std::istringstream is(os.str());
    REQUIRE(read_cluster_text(is) == c);

    std::istringstream bad("2 5\n0 0\n");
    REQUIRE_THROWS(read_cluster_text(bad));
}

TEST_CASE("a moderate point source topples an exact square") {
    StabilizationResult r = stabilize_point_source(100, 2, 2);
    Cluster t = toppled_cluster(r);
    auto sq = match_square(t);
    REQUIRE(sq.has_value());
    REQUIRE(*sq == radius(t));
    REQUIRE(largest_contained_diamond(t) == *sq);
}
