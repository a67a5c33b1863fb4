#pragma once

#include "plangen/dataset.hpp"
#include "plangen/domains.hpp"
#include "plangen/world.hpp"

#include <filesystem>
#include <limits>
#include <span>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace plangen::harvest {

using VertexId = std::uint32_t;

/// Candidates that execute from the initial state and end in a goal state,
/// compiled to their state sequences. Order and duplicates are preserved.
std::vector<world::CompiledPlan>
compile_and_filter(const pddl::GroundedTask &task,
                   const std::vector<world::Plan> &candidates);

struct Edge {
  VertexId from = 0;
  ActionId action = 0;
  VertexId to = 0;
  bool operator==(const Edge &) const = default;
};

/// Directed multigraph over unique states. Edges are unique (from, action,
/// to) triples; distinct actions between the same pair are all kept. States
/// live in one flat word array with open-addressing indexes over it.
class StateGraph {
public:
  /// Returns the id of `s`, inserting it if new.
  VertexId add_vertex(const State &s, bool goal);
  /// Returns false if the edge already exists.
  bool add_edge(VertexId from, ActionId action, VertexId to);
  void set_init(VertexId v) { init_ = v; }
  void reserve(std::size_t vertices, std::size_t edges);

  std::size_t num_vertices() const { return goal_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  bool empty() const { return goal_.empty(); }
  std::optional<VertexId> init() const { return init_; }
  State state(VertexId v) const;
  bool is_goal(VertexId v) const { return goal_[v] != 0; }
  std::optional<VertexId> find(const State &s) const;
  const std::vector<Edge> &edges() const { return edges_; }

private:
  static constexpr std::uint32_t kEmpty = std::numeric_limits<std::uint32_t>::max();
  static constexpr std::uint64_t kEmptySlot = kEmpty;
  std::span<const std::uint64_t> words_of(VertexId v) const {
    return {words_.data() + v * width_, width_};
  }
  std::size_t slot_of(std::span<const std::uint64_t> w, std::size_t h) const;
  std::size_t edge_slot(const Edge &e) const;
  void grow_vertices(std::size_t capacity);
  void grow_edges(std::size_t capacity);

  std::size_t num_atoms_ = 0;
  std::size_t width_ = 0;
  std::size_t reserved_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<std::size_t> hashes_;
  std::vector<std::uint64_t> vertex_table_;
  std::vector<char> goal_;
  std::vector<Edge> edges_;
  std::vector<std::uint32_t> edge_table_;
  std::optional<VertexId> init_;
};

/// Graph of all states and transitions of the given goal-reaching plans.
/// Every vertex whose state satisfies the task goal is a goal vertex.
StateGraph build_graph(const pddl::GroundedTask &task,
                       const std::vector<world::CompiledPlan> &plans);

/// Fewest-edge path from the init vertex to any goal vertex, as action ids.
/// Among equally short paths the lexicographically smallest action sequence
/// is returned. nullopt if no goal vertex is reachable.
std::optional<std::vector<ActionId>> shortest_plan(const StateGraph &g);

struct CacheEntry {
  std::vector<std::string> plan;
  int iteration = 0;
  std::size_t length() const { return plan.size(); }
};

/// Best plan found so far per problem id.
class SolutionCache {
public:
  const CacheEntry *find(const std::string &id) const;
  /// Stores `plan` if no entry exists or it is strictly shorter.
  bool offer(const std::string &id, std::vector<std::string> plan,
             int iteration);
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, CacheEntry> &entries() const { return entries_; }
  double mean_length() const;

  /// JSONL, one {"id", "plan", "length", "iteration"} object per line,
  /// sorted by id.
  void save(const std::filesystem::path &path) const;
  static SolutionCache load(const std::filesystem::path &path);

private:
  std::map<std::string, CacheEntry> entries_;
};

struct ProblemCandidates {
  std::string id;
  const pddl::ProblemDef *problem = nullptr;
  const pddl::GroundedTask *task = nullptr;
  std::vector<world::Plan> candidates;
};

struct HarvestResult {
  std::vector<DatasetRecord> dataset;
  std::size_t candidates = 0;
  std::size_t valid_candidates = 0;
  std::size_t problems_harvested = 0;
  std::size_t improved = 0;
  /// Mean length of the graph-extracted plans (before the cache merge).
  double mean_harvested_length = 0;
};

class IntegrityError : public Error {
public:
  using Error::Error;
};

/// Compile, filter, build graphs and extract shortest plans for each
/// problem, then merge with the cache. Problems without a valid candidate
/// are left out of the dataset. Records carry plan-source
/// "harvest-iter-<iteration>" or "cache".
HarvestResult harvest(domains::DomainKind domain,
                      const std::vector<ProblemCandidates> &problems,
                      SolutionCache &cache, int iteration);

} // namespace plangen::harvest
