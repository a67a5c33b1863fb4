#include "plangen/world.hpp"

#include <algorithm>
#include <sstream>

namespace plangen::world {

State step(const State &s, const GroundAction &a) {
  if (!applicable(s, a)) {
    throw InapplicableAction("action " + std::to_string(a.id) +
                             " is not applicable");
  }
  State next = s;
  apply_unchecked(next, a);
  return next;
}

CompiledPlan validate(const GroundedTask &task, const Plan &plan) {
  CompiledPlan out;
  out.actions = plan.actions;
  out.states.reserve(plan.actions.size() + 1);
  out.states.push_back(task.init);
  State cur = task.init;
  for (std::size_t t = 0; t < plan.actions.size(); ++t) {
    ActionId id = plan.actions[t];
    if (id >= task.actions.size()) {
      throw UsageError("plan action index " + std::to_string(id) +
                       " out of range");
    }
    const GroundAction &a = task.actions[id];
    if (!applicable(cur, a)) {
      out.valid = false;
      out.goal_reached = false;
      out.failed_at = t;
      return out;
    }
    apply_unchecked(cur, a);
    out.states.push_back(cur);
  }
  out.valid = true;
  out.failed_at = plan.actions.size();
  out.goal_reached = satisfies(cur, task.goal);
  return out;
}

SuccessorGenerator::SuccessorGenerator(const GroundedTask &task)
    : task_(&task) {
  std::vector<char> fluent(task.num_atoms(), 0);
  for (const auto &a : task.actions) {
    for (AtomId x : a.add) {
      fluent[x] = 1;
    }
    for (AtomId x : a.del) {
      fluent[x] = 1;
    }
  }
  std::vector<std::int64_t> bucket_of(task.num_atoms(), -1);
  for (const auto &a : task.actions) {
    bool dead = false;
    AtomId trigger = 0;
    bool has_trigger = false;
    for (AtomId p : a.pre) {
      if (!fluent[p]) {
        if (!task.init.test(p)) {
          dead = true;
          break;
        }
      } else if (!has_trigger) {
        trigger = p;
        has_trigger = true;
      }
    }
    if (dead) {
      continue;
    }
    ++live_;
    if (!has_trigger) {
      unconditional_.push_back(a.id);
      continue;
    }
    if (bucket_of[trigger] < 0) {
      bucket_of[trigger] = static_cast<std::int64_t>(trigger_atoms_.size());
      trigger_atoms_.push_back(trigger);
      buckets_.emplace_back();
    }
    buckets_[static_cast<std::size_t>(bucket_of[trigger])].push_back(a.id);
  }
}

std::vector<ActionId>
SuccessorGenerator::applicable_actions(const State &s) const {
  std::vector<ActionId> out;
  for_each_applicable(s, [&](ActionId a) { out.push_back(a); });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> plan_to_strings(const GroundedTask &task,
                                         const Plan &plan) {
  std::vector<std::string> out;
  out.reserve(plan.actions.size());
  for (ActionId a : plan.actions) {
    out.push_back(task.action_name(a));
  }
  return out;
}

Plan plan_from_strings(const GroundedTask &task,
                       const std::vector<std::string> &lines) {
  Plan plan;
  plan.problem_id = task.problem_name;
  for (const auto &line : lines) {
    auto id = task.find_action(line);
    if (!id) {
      throw PlanSyntaxError("unknown action '" + line + "'");
    }
    plan.actions.push_back(*id);
  }
  return plan;
}

Plan parse_plan_text(const GroundedTask &task, std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto semi = line.find(';');
    if (semi != std::string::npos) {
      line.erase(semi);
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    lines.push_back(line);
  }
  return plan_from_strings(task, lines);
}

std::string verdict(const GroundedTask &task, const CompiledPlan &compiled) {
  std::ostringstream out;
  if (!compiled.valid) {
    out << "Plan failed to execute: step " << compiled.failed_at + 1 << " "
        << task.action_name(compiled.actions[compiled.failed_at])
        << " has an unsatisfied precondition";
    const auto &a = task.actions[compiled.actions[compiled.failed_at]];
    for (AtomId p : a.pre) {
      if (!compiled.states.back().test(p)) {
        out << " " << task.atom_name(p);
        break;
      }
    }
  } else if (!compiled.goal_reached) {
    out << "Plan executed but goal not satisfied (length "
        << compiled.actions.size() << ")";
  } else {
    out << "Plan valid (length " << compiled.actions.size() << ")";
  }
  return out.str();
}

} // namespace plangen::world
