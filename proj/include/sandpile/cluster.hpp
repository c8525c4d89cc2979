#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "sandpile/config.hpp"
#include "sandpile/engine.hpp"
#include "sandpile/lattice.hpp"

namespace sandpile {

// Finite set of lattice cells stored as a tight bounding box plus bitmap, so
// membership, set algebra and boundary extraction run in linear time over the
// box. An empty cluster has no box.
class Cluster {
public:
    explicit Cluster(int dim) : dim_(dim) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("cluster: bad dimension");
    }

    Cluster(int dim, const std::vector<Point>& pts) : Cluster(dim) {
        if (pts.empty()) return;
        Box b(dim, 0, 0);
        for (int ax = 0; ax < dim; ++ax) b.lo[ax] = b.hi[ax] = pts[0].c[ax];
        for (const Point& p : pts) {
            if (p.dim != dim) throw std::invalid_argument("cluster: mixed dimensions");
            for (int ax = 0; ax < dim; ++ax) {
                b.lo[ax] = std::min(b.lo[ax], p.c[ax]);
                b.hi[ax] = std::max(b.hi[ax], p.c[ax]);
            }
        }
        box_ = b;
        bits_.assign(static_cast<std::size_t>(b.cell_count()), 0);
        for (const Point& p : pts) {
            std::size_t i = static_cast<std::size_t>(b.index(p));
            if (!bits_[i]) {
                bits_[i] = 1;
                ++count_;
            }
        }
    }

    // Build from an indicator over a box without materializing point lists;
    // the result is trimmed to the tight bounding box of the set cells.
    static Cluster from_bitmap(int dim, const Box& b, const std::vector<std::uint8_t>& bits) {
        Cluster c(dim);
        Box tb;
        bool any = false;
        std::int64_t n = b.cell_count();
        for (std::int64_t i = 0; i < n; ++i) {
            if (!bits[static_cast<std::size_t>(i)]) continue;
            Point p = b.point_at(i);
            if (!any) {
                tb = Box(dim, 0, 0);
                for (int ax = 0; ax < dim; ++ax) tb.lo[ax] = tb.hi[ax] = p.c[ax];
                any = true;
            } else {
                for (int ax = 0; ax < dim; ++ax) {
                    tb.lo[ax] = std::min(tb.lo[ax], p.c[ax]);
                    tb.hi[ax] = std::max(tb.hi[ax], p.c[ax]);
                }
            }
        }
        if (!any) return c;
        c.box_ = tb;
        c.bits_.assign(static_cast<std::size_t>(tb.cell_count()), 0);
        SandpileConfig::extract_into(bits, b, c.bits_, tb);
        for (std::uint8_t v : c.bits_) c.count_ += v ? 1 : 0;
        return c;
    }

    int dim() const { return dim_; }
    bool empty() const { return count_ == 0; }
    std::int64_t size() const { return count_; }

    // tight bounding box of member cells; only meaningful when non-empty
    const Box& bounding_box() const {
        if (empty()) throw std::logic_error("cluster: empty has no bounding box");
        return box_;
    }

    bool contains(const Point& p) const {
        if (empty() || !box_.contains(p)) return false;
        return bits_[static_cast<std::size_t>(box_.index(p))] != 0;
    }

    // member cells in lexicographic coordinate order
    std::vector<Point> cells() const {
        std::vector<Point> out;
        out.reserve(static_cast<std::size_t>(count_));
        if (empty()) return out;
        std::int64_t n = box_.cell_count();
        for (std::int64_t i = 0; i < n; ++i)
            if (bits_[static_cast<std::size_t>(i)]) out.push_back(box_.point_at(i));
        std::sort(out.begin(), out.end());
        return out;
    }

    friend bool operator==(const Cluster& a, const Cluster& b) {
        if (a.dim_ != b.dim_ || a.count_ != b.count_) return false;
        if (a.empty()) return true;
        return a.cells() == b.cells();
    }
    friend bool operator!=(const Cluster& a, const Cluster& b) { return !(a == b); }

private:
    int dim_;
    Box box_{};
    std::vector<std::uint8_t> bits_;
    std::int64_t count_ = 0;
};

/// Cells toppled at least once: {p : odometer(p) > 0}.
inline Cluster toppled_cluster(const StabilizationResult& r) {
    const Box& b = r.odometer.box();
    std::int64_t n = b.cell_count();
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(n), 0);
    for (std::int64_t i = 0; i < n; ++i)
        if (r.odometer.counts()[static_cast<std::size_t>(i)] > 0)
            bits[static_cast<std::size_t>(i)] = 1;
    return Cluster::from_bitmap(r.final.dim(), b, bits);
}

/// {q not in c : q has a neighbor in c}.
inline Cluster outer_boundary(const Cluster& c) {
    if (c.empty()) return Cluster(c.dim());
    std::vector<Point> pts;
    Box scan = c.bounding_box().padded(1);
    std::int64_t n = scan.cell_count();
    for (std::int64_t i = 0; i < n; ++i) {
        Point q = scan.point_at(i);
        if (c.contains(q)) continue;
        for (const Point& nb : neighbors(q))
            if (c.contains(nb)) {
                pts.push_back(q);
                break;
            }
    }
    return Cluster(c.dim(), pts);
}

/// Toppled cells plus every cell that received a particle; for sandpile runs
/// this equals the toppled cluster together with its outer boundary.
inline Cluster visited_cluster(const StabilizationResult& r) {
    Cluster t = toppled_cluster(r);
    if (t.empty()) return t;
    std::vector<Point> pts = t.cells();
    Cluster ob = outer_boundary(t);
    for (const Point& p : ob.cells()) pts.push_back(p);
    return Cluster(t.dim(), pts);
}

/// 0 for the empty set, else 1 + max L-infinity coordinate over the cluster.
/// Every face of the tight bounding box is attained by some member cell, so
/// the maximum is read off the box corners.
inline std::int64_t radius(const Cluster& c) {
    if (c.empty()) return 0;
    const Box& b = c.bounding_box();
    std::int64_t best = 0;
    for (int ax = 0; ax < c.dim(); ++ax) best = std::max({best, b.hi[ax], -b.lo[ax]});
    return best + 1;
}

/// Fitted r if the cluster equals S_r = {p : max_i |p_i| <= r-1} exactly,
/// otherwise nothing; the empty cluster matches S_0.
inline std::optional<std::int64_t> match_square(const Cluster& c) {
    if (c.empty()) return 0;
    std::int64_t r = radius(c);
    std::int64_t side = 2 * r - 1;
    std::int64_t expect = 1;
    for (int ax = 0; ax < c.dim(); ++ax) expect *= side;
    if (c.size() != expect) return std::nullopt;
    // count matches and every cell is within L-inf r-1, so equality holds iff
    // all of S_r is present
    Box sq = Box::cube(c.dim(), r - 1);
    std::int64_t n = sq.cell_count();
    for (std::int64_t i = 0; i < n; ++i)
        if (!c.contains(sq.point_at(i))) return std::nullopt;
    return r;
}

/// True iff every p with sum_i |p_i| <= r-1 lies in c (D_r containment).
inline bool contains_diamond(const Cluster& c, std::int64_t r) {
    if (r <= 0) return true;
    Box scan = Box::cube(c.dim(), r - 1);
    std::int64_t n = scan.cell_count();
    for (std::int64_t i = 0; i < n; ++i) {
        Point p = scan.point_at(i);
        if (p.l1() <= r - 1 && !c.contains(p)) return false;
    }
    return true;
}

/// Largest r with D_r contained in c; equals min L1 norm over cells missing
/// from c (cells beyond the bounding box included via its faces).
inline std::int64_t largest_contained_diamond(const Cluster& c) {
    if (c.empty()) return 0;
    const Box& b = c.bounding_box();
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (int ax = 0; ax < c.dim(); ++ax) {
        best = std::min(best, b.hi[ax] + 1);
        best = std::min(best, -b.lo[ax] + 1);
    }
    if (best <= 0) return 0;  // box does not straddle the origin on some axis
    std::int64_t n = b.cell_count();
    for (std::int64_t i = 0; i < n; ++i) {
        Point p = b.point_at(i);
        if (!c.contains(p)) best = std::min(best, p.l1());
    }
    return std::max<std::int64_t>(best, 0);
}

/// Unordered neighbor pairs {a, b} inside the toppled cluster with both final
/// heights 0. The Lemma 1 argument implies this is 0 for terminating runs.
inline std::int64_t adjacent_zero_pairs(const SandpileConfig& final, const Cluster& toppled) {
    if (toppled.empty()) return 0;
    std::int64_t pairs = 0;
    const Box& b = toppled.bounding_box();
    std::int64_t n = b.cell_count();
    for (std::int64_t i = 0; i < n; ++i) {
        Point a = b.point_at(i);
        if (!toppled.contains(a) || final.height(a) != 0) continue;
        for (int ax = 0; ax < final.dim(); ++ax) {
            Point q = a;
            q.c[ax] += 1;  // positive direction only: counts each pair once
            if (toppled.contains(q) && final.height(q) == 0) ++pairs;
        }
    }
    return pairs;
}

struct DominoCount {
    std::int64_t complete = 0;  // dominoes fully inside D_r
    std::int64_t occupied = 0;  // of those, how many hold >= 1 particle
};

/// Tile D_r by horizontal 1x2 dominoes, pairing each row's cells left to
/// right from its leftmost cell (odd leftovers ignored), and count dominoes
/// holding at least one particle in the final configuration. d = 2 only.
inline DominoCount domino_lower_bound(const SandpileConfig& final, std::int64_t r) {
    if (final.dim() != 2) throw std::invalid_argument("domino_lower_bound: d = 2 only");
    DominoCount dc;
    for (std::int64_t y = -(r - 1); y <= r - 1; ++y) {
        std::int64_t w = r - 1 - (y < 0 ? -y : y);  // row spans [-w, w]
        for (std::int64_t x = -w; x + 1 <= w; x += 2) {
            ++dc.complete;
            if (final.height(Point{x, y}) + final.height(Point{x + 1, y}) >= 1) ++dc.occupied;
        }
    }
    return dc;
}

/// True iff every cell of a lies in b.
inline bool cluster_subset(const Cluster& a, const Cluster& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("cluster_subset: dimension mismatch");
    if (a.empty()) return true;
    for (const Point& p : a.cells())
        if (!b.contains(p)) return false;
    return true;
}

/// Text export: line 1 `d count`, then one cell per line as d integers,
/// lexicographic order.
inline void write_cluster_text(const Cluster& c, std::ostream& os) {
    os << c.dim() << ' ' << c.size() << '\n';
    for (const Point& p : c.cells()) {
        for (int ax = 0; ax < c.dim(); ++ax) os << (ax ? " " : "") << p.c[ax];
        os << '\n';
    }
}

inline Cluster read_cluster_text(std::istream& is) {
    int d = 0;
    std::int64_t count = 0;
    if (!(is >> d >> count) || d < 1 || d > kMaxDim || count < 0)
        throw std::runtime_error("cluster text: bad header");
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        Point p = Point::origin(d);
        for (int ax = 0; ax < d; ++ax)
            if (!(is >> p.c[ax])) throw std::runtime_error("cluster text: truncated");
        pts.push_back(p);
    }
    return Cluster(d, pts);
}

}  // namespace sandpile
