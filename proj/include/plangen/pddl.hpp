#pragma once

#include "plangen/common.hpp"
#include "plangen/state.hpp"

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace plangen::pddl {

struct SourceLocation {
  std::string file;
  int line = 0;
  int column = 0;
};

/// Syntax or static-semantics error in a PDDL source. what() carries
/// "file:line:column: message".
class ParseError : public Error {
public:
  ParseError(SourceLocation loc, const std::string &message);
  const SourceLocation &location() const { return loc_; }
  const std::string &message() const { return message_; }

private:
  SourceLocation loc_;
  std::string message_;
};

class GroundingError : public Error {
public:
  using Error::Error;
};

struct TypedName {
  std::string name;
  std::string type = "object";
  auto operator<=>(const TypedName &) const = default;
};

/// Predicate applied to arguments. Arguments are variables ("?x") inside
/// operator schemas and object names in problems.
struct Atom {
  std::string predicate;
  std::vector<std::string> args;
  auto operator<=>(const Atom &) const = default;
};

struct TypeDecl {
  std::string name;
  std::string parent = "object";
  auto operator<=>(const TypeDecl &) const = default;
};

struct PredicateDecl {
  std::string name;
  std::vector<TypedName> params;
  auto operator<=>(const PredicateDecl &) const = default;
};

struct OperatorSchema {
  std::string name;
  std::vector<TypedName> params;
  std::vector<Atom> pre;
  std::vector<Atom> add;
  std::vector<Atom> del;
  auto operator<=>(const OperatorSchema &) const = default;
};

struct DomainDef {
  std::string name;
  std::vector<std::string> requirements;
  std::vector<TypeDecl> types;
  std::vector<PredicateDecl> predicates;
  std::vector<OperatorSchema> operators;

  const PredicateDecl *find_predicate(std::string_view name) const;
  const OperatorSchema *find_operator(std::string_view name) const;
  bool has_type(std::string_view name) const;
  /// Reflexive: every type is a subtype of itself; everything is an object.
  bool is_subtype(std::string_view type, std::string_view ancestor) const;

  bool operator==(const DomainDef &) const = default;
};

struct ProblemDef {
  std::string name;
  std::string domain_name;
  std::vector<TypedName> objects;
  std::vector<Atom> init;
  std::vector<Atom> goal;

  const TypedName *find_object(std::string_view name) const;

  bool operator==(const ProblemDef &) const = default;
};

DomainDef parse_domain(std::string_view text,
                       std::string_view file = "<domain>");
ProblemDef parse_problem(std::string_view text, const DomainDef &dom,
                         std::string_view file = "<problem>");

std::string to_pddl(const DomainDef &dom);
std::string to_pddl(const ProblemDef &prob);
std::string to_string(const Atom &atom);

/// Sorts init and goal atoms into canonical order (predicate name, then
/// argument names) and objects by (type, name); removes duplicate atoms.
ProblemDef canonical(ProblemDef prob);

struct GroundAtom {
  std::uint32_t predicate = 0;
  std::vector<ObjectId> args;
  bool operator==(const GroundAtom &) const = default;
};

struct GroundAction {
  ActionId id = 0;
  std::uint32_t schema = 0;
  std::vector<ObjectId> args;
  // Sorted, duplicate-free atom ids. add and del are disjoint.
  std::vector<AtomId> pre;
  std::vector<AtomId> add;
  std::vector<AtomId> del;
  bool operator==(const GroundAction &) const = default;
};

struct GroundingLimits {
  std::size_t max_atoms = std::size_t{1} << 20;
  std::size_t max_actions = std::size_t{1} << 22;
  /// Skip instantiations whose static preconditions (predicates no
  /// operator changes) are false initially. Off by default so that every
  /// typed instantiation is present.
  bool prune_static = false;
};

/// Fully grounded STRIPS task with dense atom and action indices.
///
/// Objects are indexed in name order. Atoms are ordered by predicate name,
/// then lexicographically by object tuple. Actions are ordered by operator
/// name, then lexicographically by argument tuple. Instantiations whose add
/// and delete lists would overlap are not part of the task.
struct GroundedTask {
  std::string domain_name;
  std::string problem_name;
  std::vector<std::string> objects;
  std::vector<std::string> object_types;
  std::map<std::string, std::vector<ObjectId>> objects_by_type;
  std::vector<std::string> predicates;
  std::vector<std::string> operators;
  std::vector<GroundAtom> atoms;
  std::vector<GroundAction> actions;
  State init;
  State goal;

  std::size_t num_atoms() const { return atoms.size(); }
  std::size_t num_actions() const { return actions.size(); }

  std::string atom_name(AtomId id) const;
  std::string action_name(ActionId id) const;
  std::optional<AtomId> find_atom(std::string_view predicate,
                                  std::span<const std::string> args) const;
  std::optional<ActionId> find_action(std::string_view op,
                                      std::span<const std::string> args) const;
  /// Parses "(op a b)" or "op a b".
  std::optional<ActionId> find_action(std::string_view text) const;

  /// Maximum over actions of |pre| + |add| + |del|.
  std::size_t max_action_size() const;

  bool operator==(const GroundedTask &other) const;

  // Keyed by "pred a b".
  std::unordered_map<std::string, AtomId> atom_index;
};

GroundedTask ground(const DomainDef &dom, const ProblemDef &prob,
                    const GroundingLimits &limits = {});

} // namespace plangen::pddl
