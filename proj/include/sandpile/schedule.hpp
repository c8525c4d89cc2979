#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sandpile/engine.hpp"

namespace sandpile {

// Scripted toppling orders, as constructed in proofs: an ordered list of
// rounds, each round a set of (cell, multiplicity) topplings.
struct ToppleOp {
    Point cell;
    std::int64_t multiplicity = 1;
};

struct Schedule {
    std::vector<std::vector<ToppleOp>> rounds;
};

struct ReplayReport {
    bool completed = false;
    std::optional<Point> stuck_cell;
    std::size_t rounds_completed = 0;
    Odometer odometer;  // topplings performed by the replay only
    std::int64_t total_topplings = 0;
};

struct ReplayResult {
    SandpileConfig final;
    ReplayReport report;
};

/// The proof schedule for growing squares: (r2 - r1) rounds toppling every
/// cell of S_{r2}, S_{r2-1}, ..., S_{r1+1} once, then one round toppling
/// every cell of S_{r1} once. d = 2; cells enumerated lexicographically.
inline Schedule staged_square_schedule(std::int64_t r1, std::int64_t r2) {
    if (r1 < 1 || r1 > r2) throw std::invalid_argument("staged_square_schedule: need 1 <= r1 <= r2");
    Schedule sched;
    auto square_round = [](std::int64_t r) {
        std::vector<ToppleOp> round;
        for (std::int64_t x = -(r - 1); x <= r - 1; ++x)
            for (std::int64_t y = -(r - 1); y <= r - 1; ++y)
                round.push_back({Point{x, y}, 1});
        return round;
    };
    for (std::int64_t s = r2; s > r1; --s) sched.rounds.push_back(square_round(s));
    sched.rounds.push_back(square_round(r1));
    return sched;
}

/// Execute a schedule round by round. Within a round the order is greedy: any
/// listed cell that is currently unstable and has remaining multiplicity may
/// topple next (enabled topplings never become disabled by others' topplings,
/// so greedy completes whenever any order does). A round that cannot finish
/// legally aborts with the stuck cell identified.
inline ReplayResult replay_schedule(const SandpileConfig& c, const Schedule& sched) {
    const bool audit = detail::audit_enabled();
    const std::int64_t td = 2 * c.dim();
    detail::Workspace ws(c);
    ReplayReport report;
    std::int64_t total = 0;
    bool stuck = false;

    for (const auto& round : sched.rounds) {
        std::vector<std::int64_t> remaining(round.size());
        for (std::size_t i = 0; i < round.size(); ++i) {
            if (round[i].multiplicity < 1)
                throw std::invalid_argument("schedule multiplicities must be >= 1");
            remaining[i] = round[i].multiplicity;
        }
        std::size_t left = round.size();
        while (left > 0) {
            bool progress = false;
            for (std::size_t i = 0; i < round.size(); ++i) {
                if (remaining[i] == 0) continue;
                // make sure the cell and its neighbors are representable
                while (!ws.box().contains(round[i].cell)) ws.grow();
                std::int64_t fi = ws.box().index(round[i].cell);
                while (ws.is_halo(fi)) {
                    ws.grow();
                    fi = ws.box().index(round[i].cell);
                }
                std::int64_t h = ws.height_at(fi);
                std::int64_t k = std::min(remaining[i], h / td);
                if (k < 1) continue;
                if (audit && h < td * k) throw std::logic_error("audit: illegal replay toppling");
                ws.apply_topple(fi, k);
                remaining[i] -= k;
                if (remaining[i] == 0) --left;
                total += k;
                progress = true;
            }
            if (!progress) break;
        }
        if (left > 0) {
            for (std::size_t i = 0; i < round.size(); ++i)
                if (remaining[i] > 0) {
                    report.stuck_cell = round[i].cell;
                    break;
                }
            stuck = true;
            break;
        }
        ++report.rounds_completed;
    }

    StabilizationResult h = ws.harvest(total, false);
    report.completed = !stuck;
    report.odometer = std::move(h.odometer);
    report.total_topplings = total;
    detail::check_conservation(c, {h.final, report.odometer, total, false, {}});
    return ReplayResult{std::move(h.final), std::move(report)};
}

}  // namespace sandpile
