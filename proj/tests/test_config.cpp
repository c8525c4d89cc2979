#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "sandpile/config.hpp"

using namespace sandpile;

TEST_CASE("SandpileConfig reads the background outside its box") {
    SandpileConfig c(2, 3, Box::cube(2, 1));
    REQUIRE(c.height(Point{0, 0}) == 3);
    REQUIRE(c.height(Point{100, -40}) == 3);
    c.set_height(Point{0, 0}, 9);
    REQUIRE(c.height(Point{0, 0}) == 9);
}

TEST_CASE("set_height and add_at grow the box on demand") {
    SandpileConfig c(2, 1, Box::cube(2, 0));
    c.set_height(Point{4, -2}, 7);
    REQUIRE(c.box().contains(Point{4, -2}));
    REQUIRE(c.height(Point{4, -2}) == 7);
    // cells uncovered by the growth keep the background
    REQUIRE(c.height(Point{3, 0}) == 1);

    c.add_at(Point{-5, 5}, 2);
    REQUIRE(c.height(Point{-5, 5}) == 3);
    REQUIRE(c.height(Point{4, -2}) == 7);
}

TEST_CASE("config equality ignores box framing") {
    SandpileConfig a(2, 2, Box::cube(2, 1));
    a.set_height(Point{0, 0}, 5);
    SandpileConfig b(2, 2, Box::cube(2, 4));
    b.set_height(Point{0, 0}, 5);
    REQUIRE(a == b);
    b.set_height(Point{3, 3}, 1);
    REQUIRE(a != b);
    // differing backgrounds never compare equal
    SandpileConfig c(2, 1, Box::cube(2, 1));
    c.set_height(Point{0, 0}, 5);
    REQUIRE(a != c);
}

TEST_CASE("rebox preserves heights over the union") {
    SandpileConfig a(2, 2, Box::cube(2, 1));
    a.set_height(Point{1, 1}, 8);
    SandpileConfig b = a;
    b.rebox(Box::cube(2, 3));
    REQUIRE(b.box() == Box::cube(2, 3));
    REQUIRE(a == b);
}

TEST_CASE("make_point_source puts exactly n at the origin over background h") {
    SandpileConfig c = make_point_source(12, 2, 2);
    REQUIRE(c.height(Point{0, 0}) == 12);  // the origin holds n, not n + h
    REQUIRE(c.height(Point{1, 0}) == 2);
    REQUIRE(c.background() == 2);

    SandpileConfig c3 = make_point_source(5, 0, 3);
    REQUIRE(c3.height(Point::origin(3)) == 5);
    REQUIRE(c3.dim() == 3);

    REQUIRE_THROWS_AS(make_point_source(-1, 2, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(make_point_source(4, -1, 2), std::invalid_argument);
}

TEST_CASE("make_square_config fills S_r1 full and the annulus one short") {
    // S_1 at 2d = 4, S_3 \ S_1 at 2d - 1 = 3, background h = 2 outside
    SandpileConfig c = make_square_config(1, 3, 2, 2);
    REQUIRE(c.height(Point{0, 0}) == 4);
    REQUIRE(c.height(Point{1, 0}) == 3);
    REQUIRE(c.height(Point{2, 2}) == 3);
    REQUIRE(c.height(Point{3, 0}) == 2);
    REQUIRE_THROWS_AS(make_square_config(3, 1, 2, 2), std::invalid_argument);
}

TEST_CASE("config_leq is a pointwise partial order") {
    SandpileConfig a = make_point_source(4, 1, 2);
    SandpileConfig b = make_point_source(5, 1, 2);
    REQUIRE(config_leq(a, b));
    REQUIRE_FALSE(config_leq(b, a));
    REQUIRE(config_leq(a, a));
    // a higher background dominates pointwise too
    SandpileConfig c = make_point_source(4, 2, 2);
    REQUIRE(config_leq(a, c));
    REQUIRE_FALSE(config_leq(c, a));
}

TEST_CASE("add_everywhere raises every height and the background") {
    SandpileConfig c = make_point_source(4, 0, 2);
    SandpileConfig c2 = add_everywhere(c, 2);
    REQUIRE(c2.background() == 2);
    REQUIRE(c2.height(Point{0, 0}) == 6);
    REQUIRE(c2.height(Point{50, 50}) == 2);
}

TEST_CASE("Odometer counts, total and comparisons") {
    Odometer u(Box::cube(2, 1));
    u.counts()[static_cast<std::size_t>(u.box().index(Point{0, 0}))] = 3;
    u.counts()[static_cast<std::size_t>(u.box().index(Point{1, -1}))] = 2;
    REQUIRE(u.count(Point{0, 0}) == 3);
    REQUIRE(u.count(Point{7, 7}) == 0);  // outside the box reads zero
    REQUIRE(u.total() == 5);

    Odometer v(Box::cube(2, 4));
    v.counts()[static_cast<std::size_t>(v.box().index(Point{0, 0}))] = 3;
    v.counts()[static_cast<std::size_t>(v.box().index(Point{1, -1}))] = 2;
    REQUIRE(u == v);  // equality is box-independent
    REQUIRE(Odometer::leq(u, v));
    v.counts()[static_cast<std::size_t>(v.box().index(Point{2, 2}))] = 1;
    REQUIRE(u != v);
    REQUIRE(Odometer::leq(u, v));
    REQUIRE_FALSE(Odometer::leq(v, u));
}

TEST_CASE("config text round-trips and matches the documented layout") {
    SandpileConfig c(2, 2, Box::cube(2, 1));
    c.set_height(Point{0, 0}, 9);
    std::string text = to_text(c);
    REQUIRE(text ==
            "2 2\n"
            "-1 1 -1 1\n"
            "2 2 2\n"
            "2 9 2\n"
            "2 2 2\n");
    SandpileConfig back = config_from_text(text);
    REQUIRE(back == c);
    REQUIRE(back.box() == c.box());

    // 1-d and 3-d round-trips
    SandpileConfig c1 = make_point_source(3, 1, 1);
    REQUIRE(config_from_text(to_text(c1)) == c1);
    SandpileConfig c3 = make_point_source(11, 4, 3);
    REQUIRE(config_from_text(to_text(c3)) == c3);
}

TEST_CASE("config text rejects malformed input") {
    REQUIRE_THROWS(config_from_text("0 2\n"));
    REQUIRE_THROWS(config_from_text("2 -1\n-1 1 -1 1\n"));
    REQUIRE_THROWS(config_from_text("2 2\n1 -1 -1 1\n"));
    REQUIRE_THROWS(config_from_text("2 2\n-1 1 -1 1\n1 2 3\n"));       // truncated
    REQUIRE_THROWS(config_from_text("2 2\n2 4 -1 1\n1 1 1 1 1 1\n"));  // origin outside
}
