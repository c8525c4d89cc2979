#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sandpile/cluster.hpp"
#include "sandpile/config.hpp"
#include "sandpile/engine.hpp"
#include "sandpile/folded.hpp"
#include "sandpile/schedule.hpp"

namespace sandpile {

struct budget_exhausted_error : std::runtime_error {
    explicit budget_exhausted_error(const std::string& what) : std::runtime_error(what) {}
};

// One row of a scaling experiment.
struct SweepRecord {
    std::int64_t n = 0;
    std::int64_t h = 0;
    int d = 2;
    std::int64_t cluster_radius = 0;
    std::int64_t diamond_radius = 0;
    std::optional<std::int64_t> square_r;
    std::int64_t total_topplings = 0;
    double wall_time_s = 0.0;
};

/// Stabilize a point source and collect every cluster metric plus timing.
inline SweepRecord run_point_source(std::int64_t n, std::int64_t h, int d,
                                    Strategy strategy = Strategy::bulk_fifo(),
                                    std::int64_t budget = kDefaultBudget) {
    auto t0 = std::chrono::steady_clock::now();
    StabilizationResult res = stabilize_point_source(n, h, d, strategy, budget);
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (res.budget_exhausted)
        throw budget_exhausted_error("point source n=" + std::to_string(n) +
                                     " exhausted budget " + std::to_string(budget));
    Cluster t = toppled_cluster(res);
    SweepRecord rec;
    rec.n = n;
    rec.h = h;
    rec.d = d;
    rec.cluster_radius = radius(t);
    rec.diamond_radius = largest_contained_diamond(t);
    rec.square_r = match_square(t);
    rec.total_topplings = res.total_topplings;
    rec.wall_time_s = dt;
    return rec;
}

// Least-squares fit of log(radius) against log(n): radius ~ c * n^alpha.
struct FitSummary {
    double c = 0.0;
    double alpha = 0.0;
    std::int64_t n_min_used = 0;
    int points = 0;
};

/// Fit over the records with n >= the median n (lower median for even counts,
/// discarding small-n transients) and radius >= 1. Requires >= 3 such points.
inline FitSummary fit_power_law(const std::vector<SweepRecord>& records) {
    std::vector<std::int64_t> ns;
    for (const auto& r : records) ns.push_back(r.n);
    std::sort(ns.begin(), ns.end());
    if (ns.empty()) throw std::invalid_argument("fit: no records");
    std::int64_t median = ns[(ns.size() - 1) / 2];

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    FitSummary fit;
    fit.n_min_used = std::numeric_limits<std::int64_t>::max();
    for (const auto& r : records) {
        if (r.n < median || r.cluster_radius < 1) continue;
        double x = std::log(static_cast<double>(r.n));
        double y = std::log(static_cast<double>(r.cluster_radius));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++fit.points;
        fit.n_min_used = std::min(fit.n_min_used, r.n);
    }
    if (fit.points < 3) throw std::invalid_argument("fit: need >= 3 points at or above the median n");
    double k = static_cast<double>(fit.points);
    fit.alpha = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    fit.c = std::exp((sy - fit.alpha * sx) / k);
    return fit;
}

struct SweepResult {
    std::vector<SweepRecord> records;
    FitSummary fit;
};

/// Run each n of an increasing list and fit the scaling law. Entries are
/// independent stabilizations and run in parallel when hardware allows;
/// records are aggregated in n order regardless.
inline SweepResult sweep(const std::vector<std::int64_t>& n_list, std::int64_t h, int d,
                         std::int64_t budget = kDefaultBudget) {
    if (n_list.empty()) throw std::invalid_argument("sweep: empty n list");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1]) throw std::invalid_argument("sweep: n list must increase");
    SweepResult out;
    out.records.resize(n_list.size());
    unsigned hw = std::thread::hardware_concurrency();
    if (hw > 1 && n_list.size() > 1) {
        std::vector<std::future<SweepRecord>> futs;
        futs.reserve(n_list.size());
        for (std::int64_t n : n_list)
            futs.push_back(std::async(std::launch::async,
                                      [n, h, d, budget] {
                                          return run_point_source(n, h, d, Strategy::bulk_fifo(),
                                                                  budget);
                                      }));
        for (std::size_t i = 0; i < futs.size(); ++i) out.records[i] = futs[i].get();
    } else {
        for (std::size_t i = 0; i < n_list.size(); ++i)
            out.records[i] = run_point_source(n_list[i], h, d, Strategy::bulk_fifo(), budget);
    }
    out.fit = fit_power_law(out.records);
    return out;
}

// ---------------------------------------------------------------------------
// Property campaigns
// ---------------------------------------------------------------------------

namespace detail {

// first cell where two configs differ, lexicographic, or nothing
inline std::optional<Point> first_config_diff(const SandpileConfig& a, const SandpileConfig& b) {
    Box u = a.box().union_with(b.box());
    std::int64_t n = u.cell_count();
    for (std::int64_t i = 0; i < n; ++i) {
        Point p = u.point_at(i);
        if (a.height(p) != b.height(p)) return p;
    }
    if (a.background() != b.background()) return u.point_at(0);  // differ far away
    return std::nullopt;
}

inline std::optional<Point> first_odometer_diff(const Odometer& a, const Odometer& b) {
    Box u = a.box().union_with(b.box());
    std::int64_t n = u.cell_count();
    for (std::int64_t i = 0; i < n; ++i) {
        Point p = u.point_at(i);
        if (a.count(p) != b.count(p)) return p;
    }
    return std::nullopt;
}

}  // namespace detail

struct AbelianReport {
    bool pass = false;
    int runs = 0;
    std::string failure;  // empty when passing
    std::optional<Point> first_diff;
};

/// Stabilize under fifo, lifo, bulk-fifo, tiled-parallel and `trials` seeded
/// random orders; pass iff every final configuration and odometer is
/// identical to the fifo reference.
inline AbelianReport abelian_check(const SandpileConfig& c, int trials, std::uint64_t seed,
                                   std::int64_t budget = kDefaultBudget) {
    AbelianReport rep;
    StabilizationResult ref = stabilize(c, Strategy::fifo(), budget);
    rep.runs = 1;
    std::vector<Strategy> others = {Strategy::lifo(), Strategy::bulk_fifo(),
                                    Strategy::tiled_parallel()};
    for (int t = 0; t < trials; ++t) others.push_back(Strategy::random(seed + static_cast<std::uint64_t>(t)));
    for (const Strategy& s : others) {
        StabilizationResult r = stabilize(c, s, budget);
        ++rep.runs;
        if (r.final != ref.final) {
            rep.failure = "final config differs under " + s.name();
            rep.first_diff = detail::first_config_diff(r.final, ref.final);
            return rep;
        }
        if (r.odometer != ref.odometer) {
            rep.failure = "odometer differs under " + s.name();
            rep.first_diff = detail::first_odometer_diff(r.odometer, ref.odometer);
            return rep;
        }
    }
    rep.pass = true;
    return rep;
}

struct MonotonicityReport {
    bool pass = false;
    bool precondition_ok = false;  // config_leq(a, b)
    bool toppled_subset = false;
    bool visited_subset = false;
    bool odometer_leq = false;  // stronger, standard form; reported separately
    std::optional<Point> witness;
};

/// Check that a <= b implies toppled(a) within toppled(b) and visited(a)
/// within visited(b). The pointwise odometer comparison, a standard but
/// stronger form, is reported alongside without gating the pass verdict.
inline MonotonicityReport monotonicity_check(const SandpileConfig& a, const SandpileConfig& b,
                                             std::int64_t budget = kDefaultBudget) {
    MonotonicityReport rep;
    rep.precondition_ok = config_leq(a, b);
    if (!rep.precondition_ok) return rep;
    StabilizationResult ra = stabilize(a, Strategy::bulk_fifo(), budget);
    StabilizationResult rb = stabilize(b, Strategy::bulk_fifo(), budget);
    Cluster ta = toppled_cluster(ra), tb = toppled_cluster(rb);
    rep.toppled_subset = cluster_subset(ta, tb);
    rep.visited_subset = cluster_subset(visited_cluster(ra), visited_cluster(rb));
    rep.odometer_leq = Odometer::leq(ra.odometer, rb.odometer);
    if (!rep.toppled_subset)
        for (const Point& p : ta.cells())
            if (!tb.contains(p)) {
                rep.witness = p;
                break;
            }
    rep.pass = rep.toppled_subset && rep.visited_subset;
    return rep;
}

struct Lemma2Report {
    bool pass = false;
    std::int64_t r1 = 0, r2 = 0;
    std::int64_t radius = 0;       // of the toppled cluster
    std::int64_t bound = 0;        // r1 + r2
    std::optional<Point> escape;   // a toppled cell outside S_{r1+r2}, if any
};

/// Stabilize make_square_config(r1, r2, h=2) and check the toppled cluster is
/// contained in S_{r1+r2} (for r1 = r2 = r this is the factor-2 statement).
inline Lemma2Report lemma2_check(std::int64_t r1, std::int64_t r2,
                                 std::int64_t budget = kDefaultBudget) {
    if (r1 < 0 || r1 > r2) throw std::invalid_argument("lemma2_check: need 0 <= r1 <= r2");
    Lemma2Report rep;
    rep.r1 = r1;
    rep.r2 = r2;
    rep.bound = r1 + r2;
    StabilizationResult res = stabilize(make_square_config(r1, r2, 2, 2), Strategy::bulk_fifo(),
                                        budget);
    Cluster t = toppled_cluster(res);
    rep.radius = radius(t);
    rep.pass = rep.radius <= rep.bound;
    if (!rep.pass)
        for (const Point& p : t.cells())
            if (p.linf() > rep.bound - 1) {
                rep.escape = p;
                break;
            }
    return rep;
}

struct Lemma2StageReport {
    bool pass = false;
    bool legal = false;           // (i) every round legally completable
    bool interior_ok = false;     // (ii) after round 1: S_{r1} of 4s in S_{r2-1} of 3s
    bool final_ok = false;        // (iii) S_{r1-1} of 4s, rest stable, no 3 outside S_{r2+1}
    bool containment_ok = false;  // (iv) all topplings inside S_{r1+r2}
    std::optional<Point> offending;
    std::vector<std::string> frame_notes;  // frame cells outside the {1,2} band (reported only)
};

/// Replay the proof's staged schedule on make_square_config(r1, r2, h=2) and
/// verify its intermediate and final pattern claims. The frame around the
/// interior is only required to be stable; cells outside {1,2} are noted, not
/// failed (the proof does not pin corner heights).
inline Lemma2StageReport lemma2_stage_check(std::int64_t r1, std::int64_t r2) {
    if (r1 < 1 || r1 > r2) throw std::invalid_argument("lemma2_stage_check: need 1 <= r1 <= r2");
    Lemma2StageReport rep;
    Schedule sched = staged_square_schedule(r1, r2);
    SandpileConfig cfg = make_square_config(r1, r2, 2, 2);
    std::int64_t bound = r1 + r2;

    rep.legal = true;
    rep.interior_ok = true;
    rep.containment_ok = true;
    for (std::size_t round = 0; round < sched.rounds.size(); ++round) {
        Schedule one;
        one.rounds.push_back(sched.rounds[round]);
        ReplayResult rr = replay_schedule(cfg, one);
        if (!rr.report.completed) {
            rep.legal = false;
            rep.offending = rr.report.stuck_cell;
            return rep;
        }
        Cluster toppled = toppled_cluster({rr.final, rr.report.odometer, 0, false, {}});
        if (radius(toppled) > bound) {
            rep.containment_ok = false;
            if (!rep.offending)
                for (const Point& p : toppled.cells())
                    if (p.linf() > bound - 1) {
                        rep.offending = p;
                        break;
                    }
        }
        cfg = rr.final;
        if (round == 0 && r2 > r1) {
            // after toppling S_{r2} once: S_{r1} full of 4s inside S_{r2-1} of 3s
            Box in = Box::cube(2, r2 - 2);
            std::int64_t m = in.cell_count();
            for (std::int64_t i = 0; i < m && rep.interior_ok; ++i) {
                Point p = in.point_at(i);
                std::int64_t want = p.linf() <= r1 - 1 ? 4 : 3;
                if (cfg.height(p) != want) {
                    rep.interior_ok = false;
                    rep.offending = p;
                }
            }
            // report-only: frame band S_{r2+1} \ S_{r2-1} expected in {1,2}
            Box band = Box::cube(2, r2);
            m = band.cell_count();
            for (std::int64_t i = 0; i < m; ++i) {
                Point p = band.point_at(i);
                if (p.linf() < r2 - 1) continue;
                std::int64_t hv = cfg.height(p);
                if (hv != 1 && hv != 2 && rep.frame_notes.size() < 8) {
                    std::ostringstream os;
                    os << "frame cell (" << p.c[0] << "," << p.c[1] << ") holds " << hv;
                    rep.frame_notes.push_back(os.str());
                }
            }
        }
    }

    // after the final round: S_{r1-1} full of 4s, everything else stable, and
    // no cell outside S_{r2+1} holding 3
    rep.final_ok = true;
    Box scan = cfg.box();
    std::int64_t m = scan.cell_count();
    for (std::int64_t i = 0; i < m && rep.final_ok; ++i) {
        Point p = scan.point_at(i);
        std::int64_t hv = cfg.height(p);
        std::int64_t linf = p.linf();
        if (linf <= r1 - 2) {
            if (hv != 4) {
                rep.final_ok = false;
                rep.offending = p;
            }
        } else if (hv > 3) {
            rep.final_ok = false;
            rep.offending = p;
        }
        if (linf >= r2 + 1 && hv == 3) {
            rep.final_ok = false;
            rep.offending = p;
        }
    }
    rep.pass = rep.legal && rep.interior_ok && rep.final_ok && rep.containment_ok;
    return rep;
}

// Three-stage decomposition of the Theorem 2 proof. Radii are cumulative
// (radius of the union of all topplings so far), which is what the proof's
// growth factors speak about.
struct StageTrace {
    struct Stage {
        SandpileConfig initial;
        StabilizationResult result;
        std::int64_t stage_radius = 0;  // this stage's own toppled cluster
        std::int64_t radius = 0;        // cumulative
    };
    std::vector<Stage> stages;
    bool pass = false;
    bool r1_bound_ok = false;    // r1 <= (1+eps) sqrt(n)
    bool growth2_ok = false;     // r2 <= 2 max(r1, 1)
    bool growth3_ok = false;     // r3 <= 2 max(r2, 1)
    bool final_equal = false;    // staged final == direct ground-2 run
    bool odometer_sum_equal = false;  // sum of stage odometers == direct odometer (reported)
};

/// Run the proof's order: stabilize (n-2, h=0), add one everywhere and
/// stabilize, add one everywhere again and stabilize; then compare against
/// the direct ground-2 stabilization of n.
inline StageTrace theorem2_stages(std::int64_t n, double epsilon = 0.1,
                                  std::int64_t budget = kDefaultBudget) {
    if (n < 4) throw std::invalid_argument("theorem2_stages: need n >= 4");
    StageTrace trace;

    auto push_stage = [&trace](SandpileConfig initial, StabilizationResult result) {
        StageTrace::Stage st{std::move(initial), std::move(result), 0, 0};
        st.stage_radius = radius(toppled_cluster(st.result));
        std::int64_t prev = trace.stages.empty() ? 0 : trace.stages.back().radius;
        st.radius = std::max(prev, st.stage_radius);
        trace.stages.push_back(std::move(st));
    };

    SandpileConfig c1 = make_point_source(n - 2, 0, 2);
    push_stage(c1, stabilize_point_source(n - 2, 0, 2, Strategy::bulk_fifo(), budget));
    SandpileConfig c2 = add_everywhere(trace.stages[0].result.final, 1);
    push_stage(c2, stabilize(c2, Strategy::bulk_fifo(), budget));
    SandpileConfig c3 = add_everywhere(trace.stages[1].result.final, 1);
    push_stage(c3, stabilize(c3, Strategy::bulk_fifo(), budget));

    std::int64_t r1 = trace.stages[0].radius;
    std::int64_t r2 = trace.stages[1].radius;
    std::int64_t r3 = trace.stages[2].radius;
    trace.r1_bound_ok =
        static_cast<double>(r1) <= (1.0 + epsilon) * std::sqrt(static_cast<double>(n));
    trace.growth2_ok = r2 <= 2 * std::max<std::int64_t>(r1, 1);
    trace.growth3_ok = r3 <= 2 * std::max<std::int64_t>(r2, 1);

    StabilizationResult direct = stabilize_point_source(n, 2, 2, Strategy::bulk_fifo(), budget);
    trace.final_equal = trace.stages[2].result.final == direct.final;

    // abelianness also promises the summed odometer matches the direct one
    Box u = direct.odometer.box();
    for (const auto& st : trace.stages) u = u.union_with(st.result.odometer.box());
    trace.odometer_sum_equal = true;
    std::int64_t m = u.cell_count();
    for (std::int64_t i = 0; i < m && trace.odometer_sum_equal; ++i) {
        Point p = u.point_at(i);
        std::int64_t sum = 0;
        for (const auto& st : trace.stages) sum += st.result.odometer.count(p);
        if (sum != direct.odometer.count(p)) trace.odometer_sum_equal = false;
    }

    trace.pass = trace.r1_bound_ok && trace.growth2_ok && trace.growth3_ok && trace.final_equal;
    return trace;
}

struct Lemma1Report {
    bool pass = false;
    std::int64_t n = 0;
    std::int64_t radius = 0;
    bool radius_ok = false;  // radius <= (1+eps) sqrt(n)
    std::int64_t zero_pairs = 0;
    bool zero_pairs_ok = false;
    std::int64_t complete_dominoes = 0;
    std::int64_t occupied_dominoes = 0;
    bool domino_ok = false;           // n >= occupied count, exact
    std::int64_t diamond_radius = 0;  // largest contained diamond (reported)
    std::optional<std::int64_t> square_r;  // reported, never asserted for h=0
};

/// Ground-0 verification of Lemma 1: radius bound, no adjacent zero pairs in
/// the toppled cluster, and the exact domino counting inequality.
inline Lemma1Report lemma1_check(std::int64_t n, double epsilon = 0.1,
                                 std::int64_t budget = kDefaultBudget) {
    if (n < 4) throw std::invalid_argument("lemma1_check: need n >= 4");
    Lemma1Report rep;
    rep.n = n;
    StabilizationResult res = stabilize_point_source(n, 0, 2, Strategy::bulk_fifo(), budget);
    if (res.budget_exhausted) throw budget_exhausted_error("lemma1_check: budget exhausted");
    Cluster t = toppled_cluster(res);
    rep.radius = radius(t);
    rep.radius_ok =
        static_cast<double>(rep.radius) <= (1.0 + epsilon) * std::sqrt(static_cast<double>(n));
    rep.zero_pairs = adjacent_zero_pairs(res.final, t);
    rep.zero_pairs_ok = rep.zero_pairs == 0;
    DominoCount dc = domino_lower_bound(res.final, rep.radius);
    rep.complete_dominoes = dc.complete;
    rep.occupied_dominoes = dc.occupied;
    rep.domino_ok = n >= dc.occupied;
    rep.diamond_radius = largest_contained_diamond(t);
    rep.square_r = match_square(t);
    rep.pass = rep.radius_ok && rep.zero_pairs_ok && rep.domino_ok;
    return rep;
}

// ---------------------------------------------------------------------------
// Seeded random configurations for property campaigns
// ---------------------------------------------------------------------------

/// Heights uniform in {0..hmax} on S_r, background 0. Deterministic in seed.
inline SandpileConfig random_config(std::uint64_t seed, std::int64_t r = 5,
                                    std::int64_t hmax = 6, int d = 2) {
    SandpileConfig c(d, 0, Box::cube(d, r - 1));
    std::mt19937_64 rng(seed);
    for (auto& hv : c.heights()) hv = static_cast<std::int64_t>(rng() % (hmax + 1));
    return c;
}

/// A pointwise-larger copy: every explicit cell gains a bump in {0..bmax}.
inline SandpileConfig random_bump(const SandpileConfig& base, std::uint64_t seed,
                                  std::int64_t bmax = 2) {
    SandpileConfig c = base;
    std::mt19937_64 rng(seed);
    for (auto& hv : c.heights()) hv += static_cast<std::int64_t>(rng() % (bmax + 1));
    return c;
}

}  // namespace sandpile
