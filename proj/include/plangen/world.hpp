#pragma once

#include "plangen/pddl.hpp"
#include "plangen/state.hpp"

#include <string>
#include <vector>

namespace plangen::world {

using pddl::GroundAction;
using pddl::GroundedTask;

class InapplicableAction : public Error {
public:
  using Error::Error;
};

struct Plan {
  std::vector<ActionId> actions;
  std::string problem_id;

  std::size_t length() const { return actions.size(); }
  bool operator==(const Plan &) const = default;
};

/// A plan executed from the initial state. `states` holds s0..sT for a
/// valid plan; for an invalid plan it stops at the state in which the first
/// inapplicable action was attempted.
struct CompiledPlan {
  std::vector<State> states;
  std::vector<ActionId> actions;
  bool valid = false;
  bool goal_reached = false;
  /// Index of the first inapplicable action, or actions.size().
  std::size_t failed_at = 0;
};

inline bool applicable(const State &s, const GroundAction &a) {
  for (AtomId p : a.pre) {
    if (!s.test(p)) {
      return false;
    }
  }
  return true;
}

/// In-place transition; the caller guarantees applicability.
inline void apply_unchecked(State &s, const GroundAction &a) {
  for (AtomId d : a.del) {
    s.reset(d);
  }
  for (AtomId d : a.add) {
    s.set(d);
  }
}

/// (s \ del(a)) ∪ add(a). Throws InapplicableAction if pre(a) ⊄ s.
State step(const State &s, const GroundAction &a);

inline bool satisfies(const State &s, const State &goal) {
  return s.contains(goal);
}

/// Executes `plan` from task.init. Invalidity is reported in the result.
CompiledPlan validate(const GroundedTask &task, const Plan &plan);

/// Enumerates applicable actions quickly. Actions whose static
/// preconditions (atoms no action adds or deletes) are false in the initial
/// state can never fire and are skipped; the rest are bucketed by one
/// fluent precondition.
class SuccessorGenerator {
public:
  explicit SuccessorGenerator(const GroundedTask &task);

  template <typename Fn> void for_each_applicable(const State &s, Fn &&fn) const {
    for (ActionId a : unconditional_) {
      if (applicable(s, task_->actions[a])) {
        fn(a);
      }
    }
    for (std::size_t i = 0; i < trigger_atoms_.size(); ++i) {
      if (!s.test(trigger_atoms_[i])) {
        continue;
      }
      for (ActionId a : buckets_[i]) {
        if (applicable(s, task_->actions[a])) {
          fn(a);
        }
      }
    }
  }

  /// Applicable actions in ascending id order.
  std::vector<ActionId> applicable_actions(const State &s) const;

  std::size_t num_live_actions() const { return live_; }

private:
  const GroundedTask *task_;
  std::vector<ActionId> unconditional_;
  std::vector<AtomId> trigger_atoms_;
  std::vector<std::vector<ActionId>> buckets_;
  std::size_t live_ = 0;
};

/// "(op a b)" per action.
std::vector<std::string> plan_to_strings(const GroundedTask &task,
                                         const Plan &plan);

class PlanSyntaxError : public Error {
public:
  using Error::Error;
};

/// Resolves action strings against the task. Throws PlanSyntaxError for
/// unknown actions.
Plan plan_from_strings(const GroundedTask &task,
                       const std::vector<std::string> &lines);

/// Reads a plan file in the usual "(op a b)" per line format, ignoring
/// blank lines and ';' comments.
Plan parse_plan_text(const GroundedTask &task, std::string_view text);

/// Human-readable verdict, one line per plan, e.g. "Plan valid (length 4)".
std::string verdict(const GroundedTask &task, const CompiledPlan &compiled);

} // namespace plangen::world
