#pragma once

// Grid A* backend and the first-success planner race: one worker per goal candidate,
// cooperative cancellation, contained worker crashes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <fmt/format.h>

namespace homebot {

struct Cell {
  int x = 0;
  int y = 0;
  constexpr bool operator==(const Cell&) const = default;
};

class GridMap {
 public:
  GridMap() = default;
  GridMap(int width, int height) : width_(width), height_(height), blocked_(std::size_t(width) * height, 0) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("GridMap: dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  int index(Cell c) const { return c.y * width_ + c.x; }
  Cell cell(int index) const { return {index % width_, index / width_}; }
  bool blocked(Cell c) const { return blocked_[index(c)] != 0; }
  bool free(Cell c) const { return in_bounds(c) && !blocked(c); }
  void set_blocked(Cell c, bool b = true) { blocked_[index(c)] = b ? 1 : 0; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> blocked_;
};

struct Path {
  std::vector<Cell> cells;
  int straight_moves = 0;
  int diagonal_moves = 0;
  double cost = 0.0;
};

inline double move_cost(int straight, int diagonal) { return straight + diagonal * std::numbers::sqrt2; }

inline double octile(Cell a, Cell b) {
  const int dx = std::abs(a.x - b.x), dy = std::abs(a.y - b.y);
  return move_cost(std::max(dx, dy) - std::min(dx, dy), std::min(dx, dy));
}

/// 8-connected A* without corner cutting. Open-list order is (f, h, cell index).
/// Returns nullopt when the goal is unreachable, blocked, or the stop token fires.
inline std::optional<Path> astar_plan(const GridMap& grid, Cell start, Cell goal, std::stop_token stop = {}) {
  if (!grid.in_bounds(start) || !grid.in_bounds(goal)) throw std::out_of_range("astar_plan: cell outside grid");
  if (grid.blocked(start) || grid.blocked(goal)) return std::nullopt;

  const std::size_t n = std::size_t(grid.width()) * grid.height();
  std::vector<int> straight(n, -1), diagonal(n, -1), parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  using Key = std::tuple<double, double, int>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> open;
  const int s = grid.index(start), g = grid.index(goal);
  straight[s] = diagonal[s] = 0;
  open.emplace(octile(start, goal), octile(start, goal), s);

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  while (!open.empty()) {
    if (stop.stop_requested()) return std::nullopt;
    const int u = std::get<2>(open.top());
    open.pop();
    if (closed[u]) continue;
    closed[u] = 1;
    if (u == g) break;
    const Cell cu = grid.cell(u);
    for (int k = 0; k < 8; ++k) {
      const Cell cv{cu.x + kDx[k], cu.y + kDy[k]};
      if (!grid.free(cv)) continue;
      const bool diag = k >= 4;
      if (diag && (!grid.free({cu.x + kDx[k], cu.y}) || !grid.free({cu.x, cu.y + kDy[k]}))) continue;
      const int v = grid.index(cv);
      if (closed[v]) continue;
      const int ns = straight[u] + (diag ? 0 : 1), nd = diagonal[u] + (diag ? 1 : 0);
      const double gv = move_cost(ns, nd);
      if (straight[v] >= 0 && gv >= move_cost(straight[v], diagonal[v])) continue;
      straight[v] = ns;
      diagonal[v] = nd;
      parent[v] = u;
      const double hv = octile(cv, goal);
      open.emplace(gv + hv, hv, v);
    }
  }
  if (!closed[g]) return std::nullopt;
  Path p;
  for (int c = g; c != -1; c = parent[c]) p.cells.push_back(grid.cell(c));
  std::reverse(p.cells.begin(), p.cells.end());
  p.straight_moves = straight[g];
  p.diagonal_moves = diagonal[g];
  p.cost = move_cost(p.straight_moves, p.diagonal_moves);
  return p;
}

// ---------------------------------------------------------------------------
// Planner race

enum class WorkerStatus { pending, succeeded, failed, crashed, cancelled };

inline const char* to_string(WorkerStatus s) {
  switch (s) {
    case WorkerStatus::pending: return "pending";
    case WorkerStatus::succeeded: return "succeeded";
    case WorkerStatus::failed: return "failed";
    case WorkerStatus::crashed: return "crashed";
    case WorkerStatus::cancelled: return "cancelled";
  }
  return "?";
}

enum class RaceMode { concurrent, deterministic };

template <class Goal>
struct PlanRequest {
  std::string id = "0";
  std::vector<Goal> goals;
  /// Per-worker deadline in seconds (wall time when concurrent, simulated otherwise).
  double deadline = 5.0;
  /// Workers that crash on start (fault injection).
  std::set<std::size_t> crash_workers;
  std::uint64_t seed = 0;
  /// Explicit completion order for deterministic mode; otherwise derived from `seed`.
  std::optional<std::vector<std::size_t>> completion_order;
};

template <class Result>
struct RaceOutcome {
  std::optional<std::size_t> winner;
  std::optional<Result> result;
  std::vector<WorkerStatus> statuses;
  std::vector<std::string> log;

  bool success() const { return winner.has_value(); }
};

struct WorkerCrash : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fisher-Yates with mt19937_64 so the order is identical across standard libraries.
inline std::vector<std::size_t> seeded_completion_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

namespace detail {

inline std::string race_line(const std::string& id, std::size_t worker, WorkerStatus s, double t) {
  return fmt::format("race {} worker {} {} t={:.3f}", id, worker, s == WorkerStatus::pending ? "spawned" : to_string(s), t);
}

template <class Goal, class Planner, class Result>
void run_deterministic(const PlanRequest<Goal>& req, Planner& planner, RaceOutcome<Result>& out) {
  const std::size_t n = req.goals.size();
  std::vector<std::size_t> order = req.completion_order.value_or(seeded_completion_order(n, req.seed));
  {
    std::vector<std::size_t> check = order;
    std::sort(check.begin(), check.end());
    bool ok = check.size() == n;
    for (std::size_t i = 0; ok && i < n; ++i) ok = check[i] == i;
    if (!ok) throw std::invalid_argument("plan_race: completion order is not a permutation");
  }
  for (std::size_t i = 0; i < n; ++i) out.log.push_back(race_line(req.id, i, WorkerStatus::pending, 0.0));
  // injected crashes happen on start, before any worker can finish
  for (std::size_t i : req.crash_workers) {
    if (i >= n) continue;
    out.statuses[i] = WorkerStatus::crashed;
    out.log.push_back(race_line(req.id, i, WorkerStatus::crashed, 0.0));
  }
  std::stop_source never;
  double win_time = 0.0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t i = order[rank];
    const double t = 0.1 * double(rank + 1);
    if (out.statuses[i] == WorkerStatus::crashed) continue;
    if (out.winner) {
      out.statuses[i] = WorkerStatus::cancelled;
      out.log.push_back(race_line(req.id, i, WorkerStatus::cancelled, win_time));
      continue;
    }
    if (t > req.deadline) {
      out.statuses[i] = WorkerStatus::failed;
    } else {
      try {
        std::optional<Result> r = planner(req.goals[i], never.get_token());
        if (r) {
          out.statuses[i] = WorkerStatus::succeeded;
          out.winner = i;
          out.result = std::move(r);
          win_time = t;
        } else {
          out.statuses[i] = WorkerStatus::failed;
        }
      } catch (...) {
        out.statuses[i] = WorkerStatus::crashed;
      }
    }
    out.log.push_back(race_line(req.id, i, out.statuses[i], t));
  }
}

template <class Goal, class Planner, class Result>
void run_concurrent(const PlanRequest<Goal>& req, Planner& planner, RaceOutcome<Result>& out) {
  const std::size_t n = req.goals.size();
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  std::mutex m;
  std::condition_variable cv;
  std::size_t finished = 0;
  bool timed_out = false;
  std::stop_source stop;

  auto report = [&](std::size_t i, WorkerStatus s, std::optional<Result> r) {
    std::lock_guard lock(m);
    if (s == WorkerStatus::succeeded) {
      if (out.winner || stop.stop_requested()) {
        s = timed_out ? WorkerStatus::failed : WorkerStatus::cancelled;
      } else {
        out.winner = i;
        out.result = std::move(r);
        stop.request_stop();
      }
    } else if (s == WorkerStatus::failed && stop.stop_requested() && !timed_out) {
      s = WorkerStatus::cancelled;
    }
    out.statuses[i] = s;
    out.log.push_back(race_line(req.id, i, s, elapsed()));
    ++finished;
    cv.notify_all();
  };

  {
    std::lock_guard lock(m);
    for (std::size_t i = 0; i < n; ++i) out.log.push_back(race_line(req.id, i, WorkerStatus::pending, 0.0));
  }
  std::vector<std::jthread> workers;
  workers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    workers.emplace_back([&, i] {
      try {
        if (req.crash_workers.contains(i)) throw WorkerCrash("injected crash");
        std::optional<Result> r = planner(req.goals[i], stop.get_token());
        report(i, r ? WorkerStatus::succeeded : WorkerStatus::failed, std::move(r));
      } catch (...) {
        report(i, WorkerStatus::crashed, std::nullopt);
      }
    });
  }
  {
    std::unique_lock lock(m);
    const auto deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double>(req.deadline));
    if (!cv.wait_until(lock, deadline, [&] { return finished == n || out.winner.has_value(); })) {
      timed_out = true;
      stop.request_stop();
    } else if (out.winner) {
      stop.request_stop();
    }
  }
  workers.clear();  // joins
}

}  // namespace detail

/// Races `planner(goal, stop_token) -> optional<Result>` over every goal candidate.
/// The first success wins and cancels the rest; crashed workers never abort the race.
template <class Goal, class Planner>
auto plan_race(const PlanRequest<Goal>& req, Planner&& planner, RaceMode mode = RaceMode::concurrent) {
  using Result = typename std::invoke_result_t<Planner&, const Goal&, std::stop_token>::value_type;
  if (req.goals.empty()) throw std::invalid_argument("plan_race: request needs at least one goal");
  RaceOutcome<Result> out;
  out.statuses.assign(req.goals.size(), WorkerStatus::pending);
  if (mode == RaceMode::deterministic)
    detail::run_deterministic(req, planner, out);
  else
    detail::run_concurrent(req, planner, out);
  return out;
}

}  // namespace homebot
