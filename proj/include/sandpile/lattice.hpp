#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sandpile {

// Lattice coordinates are 64-bit; dimension is a runtime value (d >= 1).
inline constexpr int kMaxDim = 6;

struct Point {
    int dim = 0;
    std::array<std::int64_t, kMaxDim> c{};

    Point() = default;
    Point(std::initializer_list<std::int64_t> xs) {
        if (xs.size() < 1 || xs.size() > kMaxDim)
            throw std::invalid_argument("Point: dimension must be in [1, " +
                                        std::to_string(kMaxDim) + "]");
        dim = static_cast<int>(xs.size());
        int i = 0;
        for (auto v : xs) c[i++] = v;
    }
    static Point origin(int d) {
        if (d < 1 || d > kMaxDim) throw std::invalid_argument("Point: bad dimension");
        Point p;
        p.dim = d;
        return p;
    }

    std::int64_t operator[](int i) const { return c[i]; }
    std::int64_t& operator[](int i) { return c[i]; }

    bool operator==(const Point& o) const {
        if (dim != o.dim) return false;
        for (int i = 0; i < dim; ++i)
            if (c[i] != o.c[i]) return false;
        return true;
    }
    bool operator!=(const Point& o) const { return !(*this == o); }
    // lexicographic, for deterministic ordering of exports
    bool operator<(const Point& o) const {
        for (int i = 0; i < dim; ++i)
            if (c[i] != o.c[i]) return c[i] < o.c[i];
        return false;
    }

    std::int64_t linf() const {
        std::int64_t m = 0;
        for (int i = 0; i < dim; ++i) {
            std::int64_t a = c[i] < 0 ? -c[i] : c[i];
            if (a > m) m = a;
        }
        return m;
    }
    std::int64_t l1() const {
        std::int64_t s = 0;
        for (int i = 0; i < dim; ++i) s += c[i] < 0 ? -c[i] : c[i];
        return s;
    }
};

/// The 2d lattice neighbors p +- e_i, in axis order (-e_0, +e_0, -e_1, +e_1, ...).
inline std::vector<Point> neighbors(const Point& p) {
    std::vector<Point> out;
    out.reserve(2 * p.dim);
    for (int i = 0; i < p.dim; ++i) {
        Point a = p, b = p;
        a.c[i] -= 1;
        b.c[i] += 1;
        out.push_back(a);
        out.push_back(b);
    }
    return out;
}

// Axis-aligned box of lattice cells, bounds inclusive. Storage order is
// row-major with axis 0 slowest (C order).
struct Box {
    int dim = 0;
    std::array<std::int64_t, kMaxDim> lo{};
    std::array<std::int64_t, kMaxDim> hi{};

    Box() = default;
    Box(int d, std::int64_t l, std::int64_t h) : dim(d) {
        check_dim(d);
        if (l > h) throw std::invalid_argument("Box: lo > hi");
        for (int i = 0; i < d; ++i) {
            lo[i] = l;
            hi[i] = h;
        }
    }
    Box(const Point& l, const Point& h) : dim(l.dim) {
        check_dim(dim);
        if (l.dim != h.dim) throw std::invalid_argument("Box: corner dimension mismatch");
        for (int i = 0; i < dim; ++i) {
            if (l.c[i] > h.c[i]) throw std::invalid_argument("Box: lo > hi");
            lo[i] = l.c[i];
            hi[i] = h.c[i];
        }
    }
    static Box cube(int d, std::int64_t radius) { return Box(d, -radius, radius); }

    static void check_dim(int d) {
        if (d < 1 || d > kMaxDim) throw std::invalid_argument("Box: bad dimension");
    }

    std::int64_t extent(int i) const { return hi[i] - lo[i] + 1; }
    std::int64_t cell_count() const {
        std::int64_t n = 1;
        for (int i = 0; i < dim; ++i) n *= extent(i);
        return n;
    }
    bool contains(const Point& p) const {
        for (int i = 0; i < dim; ++i)
            if (p.c[i] < lo[i] || p.c[i] > hi[i]) return false;
        return true;
    }
    bool contains(const Box& b) const {
        for (int i = 0; i < dim; ++i)
            if (b.lo[i] < lo[i] || b.hi[i] > hi[i]) return false;
        return true;
    }
    bool operator==(const Box& o) const {
        if (dim != o.dim) return false;
        for (int i = 0; i < dim; ++i)
            if (lo[i] != o.lo[i] || hi[i] != o.hi[i]) return false;
        return true;
    }

    std::int64_t index(const Point& p) const {
        std::int64_t idx = 0;
        for (int i = 0; i < dim; ++i) idx = idx * extent(i) + (p.c[i] - lo[i]);
        return idx;
    }
    Point point_at(std::int64_t idx) const {
        Point p;
        p.dim = dim;
        for (int i = dim - 1; i >= 0; --i) {
            std::int64_t e = extent(i);
            p.c[i] = lo[i] + idx % e;
            idx /= e;
        }
        return p;
    }
    // flat-index strides per axis, axis 0 slowest
    std::array<std::int64_t, kMaxDim> strides() const {
        std::array<std::int64_t, kMaxDim> s{};
        std::int64_t acc = 1;
        for (int i = dim - 1; i >= 0; --i) {
            s[i] = acc;
            acc *= extent(i);
        }
        return s;
    }

    Box padded(std::int64_t pad) const {
        Box b = *this;
        for (int i = 0; i < dim; ++i) {
            b.lo[i] -= pad;
            b.hi[i] += pad;
        }
        return b;
    }
    Box union_with(const Box& o) const {
        Box b = *this;
        for (int i = 0; i < dim; ++i) {
            if (o.lo[i] < b.lo[i]) b.lo[i] = o.lo[i];
            if (o.hi[i] > b.hi[i]) b.hi[i] = o.hi[i];
        }
        return b;
    }
};

struct PointHash {
    std::size_t operator()(const Point& p) const {
        std::size_t h = 1469598103934665603ull;
        for (int i = 0; i < p.dim; ++i) {
            h ^= static_cast<std::size_t>(p.c[i]) + 0x9e3779b97f4a7c15ull;
            h *= 1099511628211ull;
        }
        return h;
    }
};

}  // namespace sandpile
