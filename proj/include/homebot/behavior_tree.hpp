#pragma once

// Minimal behavior-tree engine: memory sequence/selector, conditions, actions,
// retry and timeout decorators, and a typed blackboard.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "homebot/geometry.hpp"

namespace homebot::bt {

enum class Status { success, failure, running };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::success: return "success";
    case Status::failure: return "failure";
    case Status::running: return "running";
  }
  return "?";
}

/// Key-value store shared by the nodes of one tree. Reading an unset key (or a key
/// holding another type) is an explicit miss.
class Blackboard {
 public:
  using Value = std::variant<bool, int, double, std::string, Vec2, Vec3, Pose2, std::vector<int>, std::vector<std::string>>;

  template <class T>
  void set(std::string_view key, T value) {
    values_.insert_or_assign(std::string(key), Value(std::move(value)));
  }

  template <class T>
  std::optional<T> get(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (const T* v = std::get_if<T>(&it->second)) return *v;
    return std::nullopt;
  }

  /// Throws std::out_of_range on a miss.
  template <class T>
  T at(std::string_view key) const {
    if (auto v = get<T>(key)) return *v;
    throw std::out_of_range("blackboard: no value of the requested type at '" + std::string(key) + "'");
  }

  bool contains(std::string_view key) const { return values_.find(key) != values_.end(); }
  void erase(std::string_view key) {
    if (auto it = values_.find(key); it != values_.end()) values_.erase(it);
  }

 private:
  std::map<std::string, Value, std::less<>> values_;
};

/// `Ctx` must expose `double clock() const` (simulated seconds) for Timeout.
template <class Ctx>
class Node {
 public:
  explicit Node(std::string name) : name_(std::move(name)) {}
  virtual ~Node() = default;

  virtual Status tick(Ctx& ctx) = 0;
  /// Drops any in-progress state so the next tick starts afresh.
  virtual void reset() {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

template <class Ctx>
using NodePtr = std::unique_ptr<Node<Ctx>>;

template <class Ctx>
class Composite : public Node<Ctx> {
 public:
  Composite(std::string name, std::vector<NodePtr<Ctx>> children) : Node<Ctx>(std::move(name)), children_(std::move(children)) {
    if (children_.empty()) throw std::invalid_argument("behavior tree: composite '" + this->name() + "' has no children");
    for (const auto& c : children_)
      if (!c) throw std::invalid_argument("behavior tree: composite '" + this->name() + "' has a null child");
  }

  void reset() override {
    for (auto& c : children_) c->reset();
    current_ = 0;
  }

 protected:
  Status run(Ctx& ctx, Status stop_on) {
    while (current_ < children_.size()) {
      const Status s = children_[current_]->tick(ctx);
      if (s == Status::running) return s;
      if (s == stop_on) {
        reset();
        return s;
      }
      ++current_;
    }
    reset();
    return stop_on == Status::failure ? Status::success : Status::failure;
  }

  std::vector<NodePtr<Ctx>> children_;
  std::size_t current_ = 0;
};

/// Ticks children in order; a running child is resumed on the next tick.
template <class Ctx>
class Sequence : public Composite<Ctx> {
 public:
  using Composite<Ctx>::Composite;
  Status tick(Ctx& ctx) override { return this->run(ctx, Status::failure); }
};

/// Succeeds at the first succeeding child; a running child is resumed on the next tick.
template <class Ctx>
class Selector : public Composite<Ctx> {
 public:
  using Composite<Ctx>::Composite;
  Status tick(Ctx& ctx) override { return this->run(ctx, Status::success); }
};

template <class Ctx>
class Condition : public Node<Ctx> {
 public:
  Condition(std::string name, std::function<bool(Ctx&)> pred) : Node<Ctx>(std::move(name)), pred_(std::move(pred)) {}
  Status tick(Ctx& ctx) override { return pred_(ctx) ? Status::success : Status::failure; }

 private:
  std::function<bool(Ctx&)> pred_;
};

template <class Ctx>
class Action : public Node<Ctx> {
 public:
  Action(std::string name, std::function<Status(Ctx&)> fn, std::function<void()> on_reset = {})
      : Node<Ctx>(std::move(name)), fn_(std::move(fn)), on_reset_(std::move(on_reset)) {}
  Status tick(Ctx& ctx) override { return fn_(ctx); }
  void reset() override {
    if (on_reset_) on_reset_();
  }

 private:
  std::function<Status(Ctx&)> fn_;
  std::function<void()> on_reset_;
};

/// Re-ticks a failing child up to `retries` more times, one attempt per tick.
template <class Ctx>
class Retry : public Node<Ctx> {
 public:
  Retry(std::string name, int retries, NodePtr<Ctx> child) : Node<Ctx>(std::move(name)), retries_(retries), child_(std::move(child)) {
    if (!child_) throw std::invalid_argument("behavior tree: retry '" + this->name() + "' has no child");
    if (retries_ < 0) throw std::invalid_argument("behavior tree: retry count must be non-negative");
  }

  Status tick(Ctx& ctx) override {
    const Status s = child_->tick(ctx);
    if (s != Status::failure) {
      if (s == Status::success) failures_ = 0;
      return s;
    }
    child_->reset();
    if (++failures_ > retries_) {
      failures_ = 0;
      return Status::failure;
    }
    return Status::running;
  }

  void reset() override {
    failures_ = 0;
    child_->reset();
  }

 private:
  int retries_;
  int failures_ = 0;
  NodePtr<Ctx> child_;
};

/// Fails the child once it has been running for `seconds` of simulated time.
template <class Ctx>
class Timeout : public Node<Ctx> {
 public:
  Timeout(std::string name, double seconds, NodePtr<Ctx> child)
      : Node<Ctx>(std::move(name)), seconds_(seconds), child_(std::move(child)) {
    if (!child_) throw std::invalid_argument("behavior tree: timeout '" + this->name() + "' has no child");
  }

  Status tick(Ctx& ctx) override {
    if (!start_) start_ = ctx.clock();
    if (ctx.clock() - *start_ >= seconds_ - 1e-9) {
      reset();
      return Status::failure;
    }
    const Status s = child_->tick(ctx);
    if (s != Status::running) start_.reset();
    return s;
  }

  void reset() override {
    start_.reset();
    child_->reset();
  }

 private:
  double seconds_;
  std::optional<double> start_;
  NodePtr<Ctx> child_;
};

// Builders

template <class Ctx, class... Children>
NodePtr<Ctx> sequence(std::string name, Children&&... children) {
  std::vector<NodePtr<Ctx>> v;
  (v.push_back(std::forward<Children>(children)), ...);
  return std::make_unique<Sequence<Ctx>>(std::move(name), std::move(v));
}

template <class Ctx, class... Children>
NodePtr<Ctx> selector(std::string name, Children&&... children) {
  std::vector<NodePtr<Ctx>> v;
  (v.push_back(std::forward<Children>(children)), ...);
  return std::make_unique<Selector<Ctx>>(std::move(name), std::move(v));
}

template <class Ctx>
NodePtr<Ctx> condition(std::string name, std::function<bool(Ctx&)> pred) {
  return std::make_unique<Condition<Ctx>>(std::move(name), std::move(pred));
}

template <class Ctx>
NodePtr<Ctx> action(std::string name, std::function<Status(Ctx&)> fn, std::function<void()> on_reset = {}) {
  return std::make_unique<Action<Ctx>>(std::move(name), std::move(fn), std::move(on_reset));
}

template <class Ctx>
NodePtr<Ctx> retry(std::string name, int n, NodePtr<Ctx> child) {
  return std::make_unique<Retry<Ctx>>(std::move(name), n, std::move(child));
}

template <class Ctx>
NodePtr<Ctx> timeout(std::string name, double seconds, NodePtr<Ctx> child) {
  return std::make_unique<Timeout<Ctx>>(std::move(name), seconds, std::move(child));
}

}  // namespace homebot::bt
