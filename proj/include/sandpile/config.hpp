#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sandpile/lattice.hpp"

namespace sandpile {

/// A configuration on Z^d: uniform background height everywhere, plus a dense
/// box of explicit per-cell heights covering every deviating cell. The box
/// always contains the origin.
class SandpileConfig {
public:
    SandpileConfig(int dim, std::int64_t background, Box box)
        : dim_(dim), background_(background), box_(box),
          heights_(static_cast<std::size_t>(box.cell_count()), background) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("SandpileConfig: bad dimension");
        if (background < 0) throw std::invalid_argument("SandpileConfig: negative background");
        if (box.dim != dim) throw std::invalid_argument("SandpileConfig: box dimension mismatch");
        if (!box.contains(Point::origin(dim)))
            throw std::invalid_argument("SandpileConfig: box must contain the origin");
    }

    int dim() const { return dim_; }
    std::int64_t background() const { return background_; }
    const Box& box() const { return box_; }
    const std::vector<std::int64_t>& heights() const { return heights_; }
    std::vector<std::int64_t>& heights() { return heights_; }

    std::int64_t height(const Point& p) const {
        if (!box_.contains(p)) return background_;
        return heights_[static_cast<std::size_t>(box_.index(p))];
    }
    void set_height(const Point& p, std::int64_t v) {
        if (v < 0) throw std::invalid_argument("set_height: negative height");
        if (!box_.contains(p)) grow_to_include(p);
        heights_[static_cast<std::size_t>(box_.index(p))] = v;
    }
    void add_at(const Point& p, std::int64_t delta) {
        std::int64_t h = height(p) + delta;
        if (h < 0) throw std::invalid_argument("add_at: height would go negative");
        set_height(p, h);
    }

    /// Stable iff every cell holds at most 2d-1 particles.
    bool is_stable() const {
        std::int64_t cap = 2 * dim_ - 1;
        if (background_ > cap) return false;
        for (auto h : heights_)
            if (h > cap) return false;
        return true;
    }

    /// Re-house the explicit heights in a larger box (cells new to the box get
    /// the background height). `target` must contain the current box.
    void rebox(const Box& target) {
        if (!target.contains(box_)) throw std::invalid_argument("rebox: target must contain box");
        if (target == box_) return;
        std::vector<std::int64_t> out(static_cast<std::size_t>(target.cell_count()), background_);
        copy_into(heights_, box_, out, target);
        box_ = target;
        heights_ = std::move(out);
    }

    void grow_to_include(const Point& p) {
        Box b = box_;
        for (int i = 0; i < dim_; ++i) {
            if (p.c[i] < b.lo[i]) b.lo[i] = p.c[i];
            if (p.c[i] > b.hi[i]) b.hi[i] = p.c[i];
        }
        rebox(b);
    }

    bool operator==(const SandpileConfig& o) const {
        if (dim_ != o.dim_ || background_ != o.background_) return false;
        Box u = box_.union_with(o.box_);
        std::int64_t n = u.cell_count();
        for (std::int64_t i = 0; i < n; ++i) {
            Point p = u.point_at(i);
            if (height(p) != o.height(p)) return false;
        }
        return true;
    }
    bool operator!=(const SandpileConfig& o) const { return !(*this == o); }

    template <typename T>
    static void copy_into(const std::vector<T>& src, const Box& src_box,
                          std::vector<T>& dst, const Box& dst_box) {
        // src_box must be contained in dst_box
        std::int64_t n = src_box.cell_count();
        auto ds = dst_box.strides();
        std::int64_t base = dst_box.index(src_box.point_at(0));
        // walk src in C order, maintaining the dst offset incrementally
        std::array<std::int64_t, kMaxDim> ctr{};
        std::int64_t off = base;
        for (std::int64_t i = 0; i < n; ++i) {
            dst[static_cast<std::size_t>(off)] = src[static_cast<std::size_t>(i)];
            for (int ax = src_box.dim - 1; ax >= 0; --ax) {
                off += ds[ax];
                if (++ctr[ax] < src_box.extent(ax)) break;
                off -= ds[ax] * src_box.extent(ax);
                ctr[ax] = 0;
            }
        }
    }

    /// Inverse direction: extract the dst_box region out of a larger src_box.
    template <typename T>
    static void extract_into(const std::vector<T>& src, const Box& src_box,
                             std::vector<T>& dst, const Box& dst_box) {
        // dst_box must be contained in src_box
        std::int64_t n = dst_box.cell_count();
        auto ss = src_box.strides();
        std::array<std::int64_t, kMaxDim> ctr{};
        std::int64_t off = src_box.index(dst_box.point_at(0));
        for (std::int64_t i = 0; i < n; ++i) {
            dst[static_cast<std::size_t>(i)] = src[static_cast<std::size_t>(off)];
            for (int ax = dst_box.dim - 1; ax >= 0; --ax) {
                off += ss[ax];
                if (++ctr[ax] < dst_box.extent(ax)) break;
                off -= ss[ax] * dst_box.extent(ax);
                ctr[ax] = 0;
            }
        }
    }

private:
    int dim_;
    std::int64_t background_;
    Box box_;
    std::vector<std::int64_t> heights_;
};

/// Per-cell toppling counts of one stabilization; implicitly 0 outside the box.
class Odometer {
public:
    Odometer() = default;  // empty placeholder; assign before use
    Odometer(Box box)
        : box_(box), counts_(static_cast<std::size_t>(box.cell_count()), 0) {}

    const Box& box() const { return box_; }
    const std::vector<std::int64_t>& counts() const { return counts_; }
    std::vector<std::int64_t>& counts() { return counts_; }

    std::int64_t count(const Point& p) const {
        if (!box_.contains(p)) return 0;
        return counts_[static_cast<std::size_t>(box_.index(p))];
    }

    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto c : counts_) t += c;
        return t;
    }

    bool operator==(const Odometer& o) const {
        Box u = box_.union_with(o.box_);
        std::int64_t n = u.cell_count();
        for (std::int64_t i = 0; i < n; ++i) {
            Point p = u.point_at(i);
            if (count(p) != o.count(p)) return false;
        }
        return true;
    }
    bool operator!=(const Odometer& o) const { return !(*this == o); }

    /// Pointwise a <= b over all of Z^d.
    static bool leq(const Odometer& a, const Odometer& b) {
        Box u = a.box_.union_with(b.box_);
        std::int64_t n = u.cell_count();
        for (std::int64_t i = 0; i < n; ++i) {
            Point p = u.point_at(i);
            if (a.count(p) > b.count(p)) return false;
        }
        return true;
    }

private:
    Box box_;
    std::vector<std::int64_t> counts_;
};

/// n particles at the origin, h everywhere else.
inline SandpileConfig make_point_source(std::int64_t n, std::int64_t h, int d) {
    if (n < 0) throw std::invalid_argument("make_point_source: n < 0");
    if (h < 0) throw std::invalid_argument("make_point_source: h < 0");
    SandpileConfig c(d, h, Box::cube(d, 1));
    c.set_height(Point::origin(d), n);
    return c;
}

/// S_r = {p : max_i |p_i| <= r-1}; S_0 is empty.
inline bool in_square(const Point& p, std::int64_t r) { return p.linf() <= r - 1; }

/// S_{r1} filled with 2d, S_{r2}\S_{r1} filled with 2d-1, background h outside.
inline SandpileConfig make_square_config(std::int64_t r1, std::int64_t r2, std::int64_t h, int d) {
    if (r1 < 0 || r1 > r2) throw std::invalid_argument("make_square_config: need 0 <= r1 <= r2");
    std::int64_t rad = r2 > 1 ? r2 - 1 : 1;
    SandpileConfig c(d, h, Box::cube(d, rad));
    std::int64_t full = 2 * d, rim = 2 * d - 1;
    std::int64_t n = c.box().cell_count();
    for (std::int64_t i = 0; i < n; ++i) {
        Point p = c.box().point_at(i);
        std::int64_t m = p.linf();
        if (m <= r1 - 1)
            c.heights()[static_cast<std::size_t>(i)] = full;
        else if (m <= r2 - 1)
            c.heights()[static_cast<std::size_t>(i)] = rim;
    }
    return c;
}

/// Pointwise height comparison over all of Z^d (includes the backgrounds).
inline bool config_leq(const SandpileConfig& a, const SandpileConfig& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("config_leq: dimension mismatch");
    if (a.background() > b.background()) return false;
    Box u = a.box().union_with(b.box());
    std::int64_t n = u.cell_count();
    for (std::int64_t i = 0; i < n; ++i) {
        Point p = u.point_at(i);
        if (a.height(p) > b.height(p)) return false;
    }
    return true;
}

/// Add k particles to every cell of Z^d (background included).
inline SandpileConfig add_everywhere(const SandpileConfig& c, std::int64_t k) {
    if (k < 0) throw std::invalid_argument("add_everywhere: k < 0");
    SandpileConfig out(c.dim(), c.background() + k, c.box());
    auto& h = out.heights();
    const auto& src = c.heights();
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = src[i] + k;
    return out;
}

// --- text format ---------------------------------------------------------
// line 1: d h
// line 2: d pairs "lo hi" (axis 0 first)
// then heights in row-major order (axis 0 slowest), whitespace separated.

inline void write_config_text(const SandpileConfig& c, std::ostream& os) {
    os << c.dim() << ' ' << c.background() << '\n';
    for (int i = 0; i < c.dim(); ++i) {
        if (i) os << ' ';
        os << c.box().lo[i] << ' ' << c.box().hi[i];
    }
    os << '\n';
    std::int64_t n = c.box().cell_count();
    std::int64_t row = c.dim() >= 2 ? c.box().extent(c.dim() - 1) : n;
    for (std::int64_t i = 0; i < n; ++i) {
        os << c.heights()[static_cast<std::size_t>(i)];
        os << ((i + 1) % row == 0 ? '\n' : ' ');
    }
    if (n % row != 0) os << '\n';
}

inline SandpileConfig read_config_text(std::istream& is) {
    int d = 0;
    std::int64_t h = -1;
    if (!(is >> d >> h)) throw std::runtime_error("config text: bad header");
    if (d < 1 || d > kMaxDim) throw std::runtime_error("config text: bad dimension");
    if (h < 0) throw std::runtime_error("config text: negative background");
    Box b;
    b.dim = d;
    for (int i = 0; i < d; ++i) {
        if (!(is >> b.lo[i] >> b.hi[i]) || b.lo[i] > b.hi[i])
            throw std::runtime_error("config text: bad box");
    }
    if (!b.contains(Point::origin(d))) throw std::runtime_error("config text: box must contain origin");
    SandpileConfig c(d, h, b);
    std::int64_t n = b.cell_count();
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t v;
        if (!(is >> v)) throw std::runtime_error("config text: truncated heights");
        if (v < 0) throw std::runtime_error("config text: negative height");
        c.heights()[static_cast<std::size_t>(i)] = v;
    }
    return c;
}

inline std::string to_text(const SandpileConfig& c) {
    std::ostringstream os;
    write_config_text(c, os);
    return os.str();
}
inline SandpileConfig config_from_text(const std::string& s) {
    std::istringstream is(s);
    return read_config_text(is);
}

}  // namespace sandpile
