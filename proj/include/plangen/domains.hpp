#pragma once

#include "plangen/dataset.hpp"
#include "plangen/pddl.hpp"
#include "plangen/world.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace plangen::domains {

enum class DomainKind { blocksworld, logistics, labyrinth, sokoban };

std::string to_string(DomainKind kind);
DomainKind domain_from_string(std::string_view name);

/// PDDL source of the built-in domain.
const std::string &domain_pddl(DomainKind kind);
/// Parsed built-in domain (parsed once, cached).
const pddl::DomainDef &domain_def(DomainKind kind);

/// Grounds a problem of a built-in domain with static pruning, which is
/// what the pipeline uses (plain pddl::ground keeps every instantiation).
pddl::GroundedTask ground(DomainKind kind, const pddl::ProblemDef &prob);

class GenerationError : public Error {
public:
  using Error::Error;
};

struct IntRange {
  int min = 1;
  int max = 1;
};

struct GeneratorConfig {
  DomainKind domain = DomainKind::blocksworld;

  // Blocksworld
  IntRange blocks{3, 25};
  bool log_block_distribution = false;
  double goal_omit_prob = 0.3;

  // Logistics
  IntRange cities{1, 50};
  IntRange city_size{1, 5};
  IntRange packages{1, 50};
  IntRange airplanes{1, 10};

  // Labyrinth (square grid side)
  IntRange labyrinth_grid{3, 4};

  // Sokoban (square grid side)
  IntRange sokoban_grid{5, 14};
  IntRange boxes{1, 10};
  IntRange walls{0, 10};

  std::uint64_t seed = 0;
  std::size_t count = 1;
  /// Reject instances whose goal already holds initially.
  bool allow_trivial = false;
  /// Permit ranges outside the published bounds.
  bool override_bounds = false;
  /// Attempts per requested instance before giving up.
  std::size_t retries_per_instance = 200;

  /// Throws UsageError when a range is empty or out of bounds.
  void check() const;
};

struct ProblemEntry {
  std::string id;
  pddl::ProblemDef problem;
};

enum class Split { train, valid, test };
std::string to_string(Split split);

struct ProblemSet {
  DomainKind domain = DomainKind::blocksworld;
  Split split = Split::train;
  std::vector<ProblemEntry> problems;
};

/// Platform-stable hash of the canonical (init, goal) of a problem.
std::uint64_t structural_hash(const pddl::ProblemDef &prob);

/// Generates `count` structurally distinct instances. Instance i depends
/// only on (seed, i, attempt), so results are replayable.
ProblemSet generate(const GeneratorConfig &config);

/// Partitions a problem set into consecutive train/valid/test slices. The
/// input is already hash-unique, so the slices are disjoint.
struct SplitSets {
  ProblemSet train, valid, test;
};
SplitSets split(const ProblemSet &set, std::size_t n_valid,
                std::size_t n_test);

/// Largest object count per type that a generator config can produce. Used
/// to size the tokenizer vocabulary.
std::map<std::string, int> object_limits(const GeneratorConfig &config);

enum class SolveStrategy { domain_naive, external };

struct SolveOptions {
  SolveStrategy strategy = SolveStrategy::domain_naive;
  /// Node budget of the best-first search used by the naive strategy on
  /// Labyrinth and Sokoban.
  std::size_t node_budget = 200000;
  /// Shell command with {domain}, {problem} and {plan-out} placeholders.
  std::string external_command;
};

class SolverError : public Error {
public:
  using Error::Error;
};

/// Satisficing plan for the task, or nullopt when the search budget is
/// exhausted. The returned plan always validates with goal reached.
/// Throws SolverError when the external command fails.
std::optional<world::Plan> baseline_solve(DomainKind kind,
                                          const pddl::ProblemDef &prob,
                                          const pddl::GroundedTask &task,
                                          const SolveOptions &options = {});

/// Length-optimal plan by breadth-first search, or nullopt (unknown) when
/// more than `node_budget` states would be generated.
std::optional<world::Plan> bfs_oracle(const pddl::GroundedTask &task,
                                      std::size_t node_budget);

/// Greedy best-first search on the number of unsatisfied goal atoms.
std::optional<world::Plan> greedy_best_first(const pddl::GroundedTask &task,
                                             std::size_t node_budget);

struct LabelOptions {
  SolveOptions solve;
  /// When nonzero, also run the BFS oracle with this budget and record
  /// the optimal length.
  std::size_t oracle_budget = 0;
  std::string plan_source = "domain-naive";
};

/// Solves every problem with the baseline and emits dataset records.
/// Problems the baseline cannot solve are dropped.
std::vector<DatasetRecord> label(const ProblemSet &set,
                                 const LabelOptions &options);

/// Parses the problem stored in a record against the built-in domain.
pddl::ProblemDef problem_of(const DatasetRecord &rec);

} // namespace plangen::domains
