#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sandpile/cluster.hpp"
#include "sandpile/config.hpp"
#include "sandpile/experiments.hpp"

namespace sandpile {

struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Gray mapping for renders: height k -> 255 - 60*min(k, 4). Final
/// configurations have heights <= 2d-1, so only transient snapshots clamp.
inline int height_gray(std::int64_t h) {
    std::int64_t k = h < 4 ? h : 4;
    return static_cast<int>(255 - 60 * k);
}

/// Binary PGM (P5, maxval 255) of a d=2 configuration over its box. Rows run
/// top to bottom with y descending, columns left to right with x ascending.
/// Callers render final configurations re-boxed to the visited cluster's
/// bounding box (see emit_final_pgm).
inline void write_pgm(const SandpileConfig& c, std::ostream& os) {
    if (c.dim() != 2) throw std::invalid_argument("pgm: d = 2 only");
    const Box& b = c.box();
    std::int64_t w = b.extent(0), h = b.extent(1);
    os << "P5\n" << w << ' ' << h << "\n255\n";
    for (std::int64_t y = b.hi[1]; y >= b.lo[1]; --y)
        for (std::int64_t x = b.lo[0]; x <= b.hi[0]; ++x)
            os.put(static_cast<char>(height_gray(c.height(Point{x, y}))));
    if (!os) throw io_error("pgm: write failed");
}

inline void emit_pgm(const SandpileConfig& c, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("pgm: cannot open " + path);
    write_pgm(c, f);
    f.flush();
    if (!f) throw io_error("pgm: write failed: " + path);
}

/// Render a stabilization's final configuration: image dimensions are the
/// visited cluster's bounding box (toppled box padded by 1); an empty visited
/// cluster renders as a single background-gray pixel.
inline void emit_final_pgm(const StabilizationResult& r, const std::string& path) {
    Cluster v = visited_cluster(r);
    if (v.empty()) {
        SandpileConfig swatch(r.final.dim(), r.final.background(), Box::cube(r.final.dim(), 0));
        emit_pgm(swatch, path);
        return;
    }
    SandpileConfig c = r.final;
    const Box& vb = v.bounding_box();
    if (c.box() != vb) {
        SandpileConfig trimmed(c.dim(), c.background(), vb);
        std::int64_t n = vb.cell_count();
        for (std::int64_t i = 0; i < n; ++i) {
            Point p = vb.point_at(i);
            trimmed.heights()[static_cast<std::size_t>(i)] = c.height(p);
        }
        c = std::move(trimmed);
    }
    emit_pgm(c, path);
}

/// CSV of positive odometer entries: header, then `x,y,...,count` rows in
/// lexicographic coordinate order.
inline void write_odometer_csv(const Odometer& o, std::ostream& os) {
    int d = o.box().dim;
    static const char* named[] = {"x", "y", "z"};
    for (int ax = 0; ax < d; ++ax) {
        if (ax) os << ',';
        if (ax < 3 && d <= 3)
            os << named[ax];
        else
            os << 'c' << ax;
    }
    os << ",count\n";
    std::int64_t n = o.box().cell_count();
    for (std::int64_t i = 0; i < n; ++i) {  // C order is lexicographic
        std::int64_t cnt = o.counts()[static_cast<std::size_t>(i)];
        if (cnt <= 0) continue;
        Point p = o.box().point_at(i);
        for (int ax = 0; ax < d; ++ax) os << p.c[ax] << ',';
        os << cnt << '\n';
    }
    if (!os) throw io_error("odometer csv: write failed");
}

inline void emit_odometer_csv(const Odometer& o, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw io_error("odometer csv: cannot open " + path);
    write_odometer_csv(o, f);
    f.flush();
    if (!f) throw io_error("odometer csv: write failed: " + path);
}

/// Sweep rows; square_r renders empty when the cluster is not a square.
/// Wall-time column is measured, so files are not byte-stable across runs.
inline void write_sweep_csv(const std::vector<SweepRecord>& records, std::ostream& os) {
    os << "n,h,d,radius,diamond_radius,square_r,total_topplings,wall_time_s\n";
    for (const auto& r : records) {
        os << r.n << ',' << r.h << ',' << r.d << ',' << r.cluster_radius << ','
           << r.diamond_radius << ',';
        if (r.square_r) os << *r.square_r;
        os << ',' << r.total_topplings << ',' << std::fixed << std::setprecision(6)
           << r.wall_time_s << '\n';
        os.unsetf(std::ios::fixed);
    }
    if (!os) throw io_error("sweep csv: write failed");
}

inline void emit_sweep_csv(const std::vector<SweepRecord>& records, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw io_error("sweep csv: cannot open " + path);
    write_sweep_csv(records, f);
    f.flush();
    if (!f) throw io_error("sweep csv: write failed: " + path);
}

}  // namespace sandpile
