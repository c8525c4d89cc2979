#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sandpile/config.hpp"
#include "sandpile/lattice.hpp"

namespace sandpile {

// Toppling order. Every strategy yields the same final configuration and
// odometer on terminating inputs; random strategies are fully determined by
// their seed.
struct Strategy {
    enum class Kind { fifo, lifo, random, bulk_fifo, tiled_parallel };
    Kind kind = Kind::bulk_fifo;
    std::uint64_t seed = 0;
    std::int64_t tile_side = 64;

    static Strategy fifo() { return {Kind::fifo, 0, 0}; }
    static Strategy lifo() { return {Kind::lifo, 0, 0}; }
    static Strategy random(std::uint64_t seed) { return {Kind::random, seed, 0}; }
    static Strategy bulk_fifo() { return {Kind::bulk_fifo, 0, 0}; }
    static Strategy tiled_parallel(std::int64_t tile_side = 64) {
        if (tile_side < 2) throw std::invalid_argument("tiled_parallel: tile side too small");
        return {Kind::tiled_parallel, 0, tile_side};
    }

    std::string name() const {
        switch (kind) {
            case Kind::fifo: return "fifo";
            case Kind::lifo: return "lifo";
            case Kind::random: return "random";
            case Kind::bulk_fifo: return "bulk-fifo";
            case Kind::tiled_parallel: return "tiled-parallel";
        }
        return "?";
    }
};

inline constexpr std::int64_t kDefaultBudget = 100'000'000'000LL;  // 1e11 topplings

struct StabilizeOptions {
    bool track_receipts = false;  // record which cells received >= 1 particle
    int workers = 0;              // tiled-parallel worker threads; 0 = auto
};

struct StabilizationResult {
    SandpileConfig final;
    Odometer odometer;
    std::int64_t total_topplings = 0;
    bool budget_exhausted = false;
    // cells that received at least one particle (only if track_receipts was set)
    std::vector<Point> received;
};

/// Topple p k times in one step: removes 2dk particles from p, each neighbor
/// gains k. Throws if p holds fewer than 2dk particles.
inline void topple(SandpileConfig& c, const Point& p, std::int64_t k = 1) {
    if (k < 1) throw std::invalid_argument("topple: multiplicity must be >= 1");
    std::int64_t need = 2 * c.dim() * k;
    std::int64_t h = c.height(p);
    if (h < need)
        throw std::domain_error("illegal toppling: cell holds " + std::to_string(h) +
                                " < " + std::to_string(need));
    c.set_height(p, h - need);
    for (const Point& q : neighbors(p)) c.add_at(q, k);
}

namespace detail {

inline bool audit_enabled() {
    const char* v = std::getenv("SANDPILE_AUDIT");
    return v && v[0] && !(v[0] == '0' && v[1] == 0);
}

// Dense working grid for one stabilization run. Flat int64 heights and
// odometer over a growable box; cells on the outermost ring are marked halo
// and trigger growth before they topple, so interior topplings never index
// out of bounds.
class Workspace {
public:
    explicit Workspace(const SandpileConfig& c)
        : dim_(c.dim()), background_(c.background()), threshold_(2 * c.dim()),
          initial_(c) {
        install(c.box().padded(1));
    }

    int dim() const { return dim_; }
    std::int64_t threshold() const { return threshold_; }
    const Box& box() const { return box_; }
    std::int64_t cells() const { return static_cast<std::int64_t>(heights_.size()); }
    std::int64_t height_at(std::int64_t i) const { return heights_[static_cast<std::size_t>(i)]; }
    std::int64_t odom_at(std::int64_t i) const { return odom_[static_cast<std::size_t>(i)]; }
    bool is_halo(std::int64_t i) const { return halo_[static_cast<std::size_t>(i)] != 0; }
    const std::array<std::int64_t, kMaxDim>& strides() const { return strides_; }

    std::vector<std::int64_t>& heights() { return heights_; }
    std::vector<std::int64_t>& odom() { return odom_; }

    void enable_receipts() {
        receipts_.assign(heights_.size(), 0);
        track_receipts_ = true;
    }

    // Topple cell i (flat index, non-halo) k times. Caller guarantees legality.
    void apply_topple(std::int64_t i, std::int64_t k) {
        heights_[static_cast<std::size_t>(i)] -= threshold_ * k;
        odom_[static_cast<std::size_t>(i)] += k;
        for (int ax = 0; ax < dim_; ++ax) {
            std::int64_t s = strides_[ax];
            heights_[static_cast<std::size_t>(i - s)] += k;
            heights_[static_cast<std::size_t>(i + s)] += k;
            if (track_receipts_) {
                receipts_[static_cast<std::size_t>(i - s)] = 1;
                receipts_[static_cast<std::size_t>(i + s)] = 1;
            }
        }
    }

    // Grow the box: pad every side by max(32, 25% of the current side).
    void grow() {
        Box b = box_;
        for (int ax = 0; ax < dim_; ++ax) {
            std::int64_t pad = std::max<std::int64_t>(32, box_.extent(ax) / 4);
            b.lo[ax] -= pad;
            b.hi[ax] += pad;
        }
        std::vector<std::int64_t> old_h = std::move(heights_);
        std::vector<std::int64_t> old_o = std::move(odom_);
        std::vector<std::uint8_t> old_r = std::move(receipts_);
        Box old_box = box_;
        install(b);
        SandpileConfig::copy_into(old_h, old_box, heights_, box_);
        // odometer and receipts default to 0 outside the old box
        std::vector<std::int64_t> tmp(odom_.size(), 0);
        SandpileConfig::copy_into(old_o, old_box, tmp, box_);
        odom_ = std::move(tmp);
        if (track_receipts_) {
            std::vector<std::int64_t> r64(old_r.begin(), old_r.end());
            std::vector<std::int64_t> rout(heights_.size(), 0);
            SandpileConfig::copy_into(r64, old_box, rout, box_);
            receipts_.assign(heights_.size(), 0);
            for (std::size_t i = 0; i < rout.size(); ++i) receipts_[i] = rout[i] ? 1 : 0;
        }
    }

    // Collect final config + odometer, re-boxed to the canonical result box:
    // the input box unioned with the toppled bounding box padded by 1.
    StabilizationResult harvest(std::int64_t total, bool exhausted) const {
        Box tb;
        bool any = false;
        for (std::int64_t i = 0; i < cells(); ++i) {
            if (odom_[static_cast<std::size_t>(i)] <= 0) continue;
            Point p = box_.point_at(i);
            if (!any) {
                tb = Box(dim_, 0, 0);
                for (int ax = 0; ax < dim_; ++ax) tb.lo[ax] = tb.hi[ax] = p.c[ax];
                any = true;
            } else {
                for (int ax = 0; ax < dim_; ++ax) {
                    if (p.c[ax] < tb.lo[ax]) tb.lo[ax] = p.c[ax];
                    if (p.c[ax] > tb.hi[ax]) tb.hi[ax] = p.c[ax];
                }
            }
        }
        Box out = initial_.box();
        if (any) out = out.union_with(tb.padded(1));
        SandpileConfig final(dim_, background_, out);
        Odometer od(out);
        std::int64_t n = out.cell_count();
        for (std::int64_t i = 0; i < n; ++i) {
            Point p = out.point_at(i);
            if (box_.contains(p)) {
                std::int64_t j = box_.index(p);
                final.heights()[static_cast<std::size_t>(i)] = heights_[static_cast<std::size_t>(j)];
                od.counts()[static_cast<std::size_t>(i)] = odom_[static_cast<std::size_t>(j)];
            }
        }
        StabilizationResult r{std::move(final), std::move(od), total, exhausted, {}};
        if (track_receipts_) {
            for (std::int64_t i = 0; i < cells(); ++i)
                if (receipts_[static_cast<std::size_t>(i)]) r.received.push_back(box_.point_at(i));
            std::sort(r.received.begin(), r.received.end());
        }
        return r;
    }

    const SandpileConfig& initial() const { return initial_; }

private:
    void install(const Box& b) {
        box_ = b;
        strides_ = b.strides();
        std::int64_t n = b.cell_count();
        heights_.assign(static_cast<std::size_t>(n), background_);
        odom_.assign(static_cast<std::size_t>(n), 0);
        if (track_receipts_) receipts_.assign(static_cast<std::size_t>(n), 0);
        halo_.assign(static_cast<std::size_t>(n), 0);
        for (std::int64_t i = 0; i < n; ++i) {
            Point p = b.point_at(i);
            for (int ax = 0; ax < dim_; ++ax)
                if (p.c[ax] == b.lo[ax] || p.c[ax] == b.hi[ax]) {
                    halo_[static_cast<std::size_t>(i)] = 1;
                    break;
                }
        }
        if (first_install_) {
            // seed from the initial configuration
            SandpileConfig::copy_into(initial_.heights(), initial_.box(), heights_, box_);
            first_install_ = false;
        }
    }

    int dim_;
    std::int64_t background_;
    std::int64_t threshold_;
    SandpileConfig initial_;
    Box box_;
    std::array<std::int64_t, kMaxDim> strides_{};
    std::vector<std::int64_t> heights_;
    std::vector<std::int64_t> odom_;
    std::vector<std::uint8_t> receipts_;
    std::vector<std::uint8_t> halo_;
    bool track_receipts_ = false;
    bool first_install_ = true;
};

// Exact conservation audit: final = initial + L(odometer) cell by cell on the
// result box, where L(u)(p) = -2d u(p) + sum of u over neighbors.
inline void check_conservation(const SandpileConfig& initial, const StabilizationResult& r) {
    const Box& b = r.final.box();
    std::int64_t n = b.cell_count();
    std::int64_t td = 2 * initial.dim();
    for (std::int64_t i = 0; i < n; ++i) {
        Point p = b.point_at(i);
        std::int64_t lap = -td * r.odometer.count(p);
        for (const Point& q : neighbors(p)) lap += r.odometer.count(q);
        if (initial.height(p) + lap != r.final.height(p))
            throw std::logic_error("conservation violated at a cell: engine bug");
    }
    // outside the result box the odometer vanishes and nothing changed; the
    // harvest box covers toppled cells padded by 1, so L(u) = 0 out there
}

template <typename Queue>
StabilizationResult run_worklist(Workspace& ws, Queue& queue, bool bulk,
                                 std::int64_t budget) {
    const bool audit = audit_enabled();
    std::vector<std::uint8_t> inq(static_cast<std::size_t>(ws.cells()), 0);
    const std::int64_t td = ws.threshold();
    // seed with all unstable cells, scan order
    for (std::int64_t i = 0; i < ws.cells(); ++i)
        if (ws.height_at(i) >= td) {
            queue.push(i);
            inq[static_cast<std::size_t>(i)] = 1;
        }
    std::int64_t total = 0;
    bool exhausted = false;
    while (!queue.empty()) {
        std::int64_t p = queue.pop();
        inq[static_cast<std::size_t>(p)] = 0;
        std::int64_t h = ws.height_at(p);
        if (h < td) continue;
        if (ws.is_halo(p)) {
            ws.grow();
            queue.clear();
            inq.assign(static_cast<std::size_t>(ws.cells()), 0);
            for (std::int64_t i = 0; i < ws.cells(); ++i)
                if (ws.height_at(i) >= td) {
                    queue.push(i);
                    inq[static_cast<std::size_t>(i)] = 1;
                }
            continue;
        }
        std::int64_t k = bulk ? h / td : 1;
        if (total + k > budget) k = budget - total;
        if (k <= 0) {
            exhausted = true;
            break;
        }
        if (audit && h < td * k) throw std::logic_error("audit: illegal toppling scheduled");
        ws.apply_topple(p, k);
        total += k;
        for (int ax = 0; ax < ws.dim(); ++ax) {
            std::int64_t s = ws.strides()[ax];
            for (std::int64_t q : {p - s, p + s}) {
                if (ws.height_at(q) >= td && !inq[static_cast<std::size_t>(q)]) {
                    inq[static_cast<std::size_t>(q)] = 1;
                    queue.push(q);
                }
            }
        }
        if (ws.height_at(p) >= td && !inq[static_cast<std::size_t>(p)]) {
            inq[static_cast<std::size_t>(p)] = 1;
            queue.push(p);
        }
        if (total >= budget && !queue.empty()) {
            // budget spent; anything left in the queue means instability remains
            exhausted = true;
            break;
        }
    }
    if (!exhausted && audit) {
        for (std::int64_t i = 0; i < ws.cells(); ++i)
            if (ws.height_at(i) >= td) throw std::logic_error("audit: unstable cell after drain");
    }
    return ws.harvest(total, exhausted);
}

struct FifoQueue {
    std::vector<std::int64_t> buf;
    std::size_t head = 0;
    void push(std::int64_t v) { buf.push_back(v); }
    std::int64_t pop() { return buf[head++]; }
    bool empty() {
        if (head == buf.size()) return true;
        // compact occasionally so the vector does not grow without bound
        if (head > (1u << 20) && head * 2 > buf.size()) {
            buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(head));
            head = 0;
        }
        return false;
    }
    void clear() {
        buf.clear();
        head = 0;
    }
};

struct LifoQueue {
    std::vector<std::int64_t> buf;
    void push(std::int64_t v) { buf.push_back(v); }
    std::int64_t pop() {
        std::int64_t v = buf.back();
        buf.pop_back();
        return v;
    }
    bool empty() const { return buf.empty(); }
    void clear() { buf.clear(); }
};

// Uniform random member of the unstable set; swap-remove keeps pops O(1).
// Fully determined by the seed.
struct RandomQueue {
    explicit RandomQueue(std::uint64_t seed) : rng(seed) {}
    std::vector<std::int64_t> buf;
    std::mt19937_64 rng;
    void push(std::int64_t v) { buf.push_back(v); }
    std::int64_t pop() {
        std::size_t j = static_cast<std::size_t>(rng() % buf.size());
        std::swap(buf[j], buf.back());
        std::int64_t v = buf.back();
        buf.pop_back();
        return v;
    }
    bool empty() const { return buf.empty(); }
    void clear() { buf.clear(); }
};

StabilizationResult run_tiled(Workspace& ws, std::int64_t tile_side, int workers,
                              std::int64_t budget);

}  // namespace detail

/// Perform legal topplings until no cell holds 2d or more particles, or the
/// toppling budget runs out (budget_exhausted flags a partial result).
/// Conservation (final = initial + L(odometer)) is verified on every run.
inline StabilizationResult stabilize(const SandpileConfig& c,
                                     Strategy strategy = Strategy::bulk_fifo(),
                                     std::int64_t budget = kDefaultBudget,
                                     const StabilizeOptions& opts = {}) {
    if (budget < 0) throw std::invalid_argument("stabilize: negative budget");
    detail::Workspace ws(c);
    if (opts.track_receipts) ws.enable_receipts();
    StabilizationResult r = [&] {
        switch (strategy.kind) {
            case Strategy::Kind::fifo: {
                detail::FifoQueue q;
                return detail::run_worklist(ws, q, false, budget);
            }
            case Strategy::Kind::lifo: {
                detail::LifoQueue q;
                return detail::run_worklist(ws, q, false, budget);
            }
            case Strategy::Kind::random: {
                detail::RandomQueue q(strategy.seed);
                return detail::run_worklist(ws, q, false, budget);
            }
            case Strategy::Kind::bulk_fifo: {
                detail::FifoQueue q;
                return detail::run_worklist(ws, q, true, budget);
            }
            case Strategy::Kind::tiled_parallel:
                return detail::run_tiled(ws, strategy.tile_side, opts.workers, budget);
        }
        throw std::logic_error("unknown strategy");
    }();
    detail::check_conservation(c, r);
    return r;
}

namespace detail {

// Tiled superstep engine. The box is partitioned into tiles; within one
// superstep each worker fully stabilizes the interiors of its dirty tiles,
// writing cross-tile emissions into per-worker overflow buffers. Buffers are
// merged at the barrier and the next superstep begins. The result equals the
// sequential strategies exactly (order freedom of the model).
inline StabilizationResult run_tiled(Workspace& ws, std::int64_t tile_side, int workers,
                                     std::int64_t budget) {
    const bool audit = audit_enabled();
    const std::int64_t td = ws.threshold();
    if (workers <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        workers = static_cast<int>(std::max(2u, hw ? hw : 1u));
    }
    std::int64_t total = 0;
    bool exhausted = false;

    struct Tiling {
        std::int64_t side;
        int dim;
        Box box;
        std::array<std::int64_t, kMaxDim> ntiles{};
        std::int64_t count = 1;
        Tiling(const Box& b, std::int64_t s, int d) : side(s), dim(d), box(b) {
            for (int ax = 0; ax < d; ++ax) {
                ntiles[ax] = (b.extent(ax) + s - 1) / s;
                count *= ntiles[ax];
            }
        }
        std::int64_t tile_of(const Point& p) const {
            std::int64_t t = 0;
            for (int ax = 0; ax < dim; ++ax)
                t = t * ntiles[ax] + (p.c[ax] - box.lo[ax]) / side;
            return t;
        }
    };

    while (true) {
        Tiling tiling(ws.box(), tile_side, ws.dim());
        std::vector<std::uint8_t> dirty(static_cast<std::size_t>(tiling.count), 0);
        bool any = false, need_grow = false;
        for (std::int64_t i = 0; i < ws.cells(); ++i) {
            if (ws.height_at(i) < td) continue;
            any = true;
            if (ws.is_halo(i)) {
                need_grow = true;
                break;
            }
            dirty[static_cast<std::size_t>(tiling.tile_of(ws.box().point_at(i)))] = 1;
        }
        if (!any) break;
        if (need_grow) {
            ws.grow();
            continue;
        }

        // one superstep: local stabilization of dirty tiles, overflow buffered
        while (true) {
            std::vector<std::int64_t> work;
            for (std::int64_t t = 0; t < tiling.count; ++t)
                if (dirty[static_cast<std::size_t>(t)]) work.push_back(t);
            if (work.empty()) break;

            int nw = static_cast<int>(std::min<std::size_t>(work.size(),
                                                            static_cast<std::size_t>(workers)));
            std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> overflow(
                static_cast<std::size_t>(nw));
            std::vector<std::int64_t> toppled(static_cast<std::size_t>(nw), 0);
            std::vector<std::uint8_t> halo_hit(static_cast<std::size_t>(nw), 0);

            auto worker_fn = [&](int w) {
                auto& out = overflow[static_cast<std::size_t>(w)];
                std::int64_t local_total = 0;
                for (std::size_t wi = static_cast<std::size_t>(w); wi < work.size();
                     wi += static_cast<std::size_t>(nw)) {
                    std::int64_t t = work[wi];
                    // tile bounds in lattice coordinates
                    Point tlo = Point::origin(ws.dim()), thi = tlo;
                    std::int64_t tt = t;
                    for (int ax = ws.dim() - 1; ax >= 0; --ax) {
                        std::int64_t ix = tt % tiling.ntiles[ax];
                        tt /= tiling.ntiles[ax];
                        tlo.c[ax] = ws.box().lo[ax] + ix * tiling.side;
                        thi.c[ax] = std::min<std::int64_t>(tlo.c[ax] + tiling.side - 1,
                                                           ws.box().hi[ax]);
                    }
                    // local worklist over the tile interior
                    std::vector<std::int64_t> stack;
                    std::int64_t cellcount = 1;
                    for (int ax = 0; ax < ws.dim(); ++ax) cellcount *= thi.c[ax] - tlo.c[ax] + 1;
                    for (std::int64_t ci = 0; ci < cellcount; ++ci) {
                        Point p = tlo;
                        std::int64_t rem = ci;
                        for (int ax = ws.dim() - 1; ax >= 0; --ax) {
                            std::int64_t e = thi.c[ax] - tlo.c[ax] + 1;
                            p.c[ax] = tlo.c[ax] + rem % e;
                            rem /= e;
                        }
                        std::int64_t fi = ws.box().index(p);
                        if (ws.height_at(fi) >= td) stack.push_back(fi);
                    }
                    while (!stack.empty()) {
                        std::int64_t fi = stack.back();
                        stack.pop_back();
                        std::int64_t h = ws.height_at(fi);
                        if (h < td) continue;
                        Point p = ws.box().point_at(fi);
                        if (ws.is_halo(fi)) {
                            halo_hit[static_cast<std::size_t>(w)] = 1;
                            continue;  // grows after the barrier
                        }
                        std::int64_t k = h / td;
                        if (audit && h < td * k) throw std::logic_error("audit: illegal toppling");
                        ws.heights()[static_cast<std::size_t>(fi)] -= td * k;
                        ws.odom()[static_cast<std::size_t>(fi)] += k;
                        local_total += k;
                        for (int ax = 0; ax < ws.dim(); ++ax) {
                            for (int dir = -1; dir <= 1; dir += 2) {
                                Point q = p;
                                q.c[ax] += dir;
                                bool inside = q.c[ax] >= tlo.c[ax] && q.c[ax] <= thi.c[ax];
                                std::int64_t qi = fi + dir * ws.strides()[ax];
                                if (inside) {
                                    ws.heights()[static_cast<std::size_t>(qi)] += k;
                                    if (ws.height_at(qi) >= td) stack.push_back(qi);
                                } else {
                                    out.emplace_back(qi, k);
                                }
                            }
                        }
                    }
                }
                toppled[static_cast<std::size_t>(w)] = local_total;
            };

            if (nw == 1) {
                worker_fn(0);
            } else {
                std::vector<std::thread> pool;
                pool.reserve(static_cast<std::size_t>(nw));
                for (int w = 0; w < nw; ++w) pool.emplace_back(worker_fn, w);
                for (auto& th : pool) th.join();
            }

            // merge: apply cross-tile emissions, mark dirtied tiles
            dirty.assign(static_cast<std::size_t>(tiling.count), 0);
            bool grew_needed = false;
            for (int w = 0; w < nw; ++w) {
                total += toppled[static_cast<std::size_t>(w)];
                if (halo_hit[static_cast<std::size_t>(w)]) grew_needed = true;
                for (auto [qi, amt] : overflow[static_cast<std::size_t>(w)]) {
                    ws.heights()[static_cast<std::size_t>(qi)] += amt;
                    if (ws.height_at(qi) >= td) {
                        if (ws.is_halo(qi))
                            grew_needed = true;
                        else
                            dirty[static_cast<std::size_t>(tiling.tile_of(ws.box().point_at(qi)))] = 1;
                    }
                }
            }
            if (total > budget) {
                // tiled supersteps are not budget-precise; flag and stop
                exhausted = true;
                break;
            }
            if (grew_needed) break;  // outer loop grows and re-tiles
        }
        if (exhausted) break;
    }
    return ws.harvest(total, exhausted);
}

}  // namespace detail

}  // namespace sandpile
