#include "plangen/harvest.hpp"

#include <json.hpp>

#include <bit>

namespace plangen::harvest {

using nlohmann::json;

std::vector<world::CompiledPlan>
compile_and_filter(const pddl::GroundedTask &task,
                   const std::vector<world::Plan> &candidates) {
  std::vector<world::CompiledPlan> out;
  for (const auto &p : candidates) {
    auto c = world::validate(task, p);
    if (c.valid && c.goal_reached) {
      out.push_back(std::move(c));
    }
  }
  return out;
}

namespace {

std::size_t edge_hash(const Edge &e) {
  return splitmix64((std::uint64_t{e.from} << 32 | e.to) ^ splitmix64(e.action));
}

std::size_t table_size_for(std::size_t n) {
  return std::bit_ceil(std::max<std::size_t>(16, 2 * n));
}

} // namespace

// Vertex slots pack the upper hash bits above the vertex id, so most probes
// are resolved without touching the state words.
std::size_t StateGraph::slot_of(std::span<const std::uint64_t> w,
                                std::size_t h) const {
  const std::size_t mask = vertex_table_.size() - 1;
  const std::uint64_t tag = std::uint64_t{h} >> 32 << 32;
  for (std::size_t i = h & mask;; i = (i + 1) & mask) {
    std::uint64_t e = vertex_table_[i];
    if (e == kEmptySlot) {
      return i;
    }
    if ((e & ~std::uint64_t{0xffffffff}) == tag &&
        std::equal(w.begin(), w.end(),
                   words_of(static_cast<VertexId>(e)).begin())) {
      return i;
    }
  }
}

void StateGraph::grow_vertices(std::size_t capacity) {
  vertex_table_.assign(table_size_for(capacity), kEmptySlot);
  const std::size_t mask = vertex_table_.size() - 1;
  for (VertexId v = 0; v < goal_.size(); ++v) {
    std::size_t i = hashes_[v] & mask;
    while (vertex_table_[i] != kEmptySlot) {
      i = (i + 1) & mask;
    }
    vertex_table_[i] = (std::uint64_t{hashes_[v]} >> 32 << 32) | v;
  }
}

VertexId StateGraph::add_vertex(const State &s, bool goal) {
  if (goal_.empty() && words_.empty()) {
    num_atoms_ = s.num_atoms();
    width_ = s.words().size();
    words_.reserve(reserved_ * width_);
  } else if (s.num_atoms() != num_atoms_) {
    throw UsageError("state width differs from the graph's");
  }
  if (2 * (goal_.size() + 1) > vertex_table_.size()) {
    grow_vertices(2 * goal_.size() + 1);
  }
  const std::size_t h = s.hash();
  const std::size_t slot = slot_of(s.words(), h);
  if (vertex_table_[slot] != kEmptySlot) {
    return static_cast<VertexId>(vertex_table_[slot]);
  }
  auto v = static_cast<VertexId>(goal_.size());
  words_.insert(words_.end(), s.words().begin(), s.words().end());
  hashes_.push_back(h);
  goal_.push_back(goal ? 1 : 0);
  vertex_table_[slot] = (std::uint64_t{h} >> 32 << 32) | v;
  return v;
}

std::size_t StateGraph::edge_slot(const Edge &e) const {
  const std::size_t mask = edge_table_.size() - 1;
  for (std::size_t i = edge_hash(e) & mask;; i = (i + 1) & mask) {
    auto k = edge_table_[i];
    if (k == kEmpty || edges_[k] == e) {
      return i;
    }
  }
}

void StateGraph::grow_edges(std::size_t capacity) {
  edge_table_.assign(table_size_for(capacity), kEmpty);
  const std::size_t mask = edge_table_.size() - 1;
  for (std::uint32_t k = 0; k < edges_.size(); ++k) {
    std::size_t i = edge_hash(edges_[k]) & mask;
    while (edge_table_[i] != kEmpty) {
      i = (i + 1) & mask;
    }
    edge_table_[i] = k;
  }
}

bool StateGraph::add_edge(VertexId from, ActionId action, VertexId to) {
  if (from >= goal_.size() || to >= goal_.size()) {
    throw UsageError("edge endpoint out of range");
  }
  if (2 * (edges_.size() + 1) > edge_table_.size()) {
    grow_edges(2 * edges_.size() + 1);
  }
  Edge e{from, action, to};
  const std::size_t slot = edge_slot(e);
  if (edge_table_[slot] != kEmpty) {
    return false;
  }
  edge_table_[slot] = static_cast<std::uint32_t>(edges_.size());
  edges_.push_back(e);
  return true;
}

void StateGraph::reserve(std::size_t vertices, std::size_t edges) {
  reserved_ = vertices;
  hashes_.reserve(vertices);
  goal_.reserve(vertices);
  edges_.reserve(edges);
  if (table_size_for(vertices) > vertex_table_.size()) {
    grow_vertices(vertices);
  }
  if (table_size_for(edges) > edge_table_.size()) {
    grow_edges(edges);
  }
}

State StateGraph::state(VertexId v) const {
  State s(num_atoms_);
  auto w = words_of(v);
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (auto x = w[i]; x; x &= x - 1) {
      s.set(static_cast<AtomId>(i * 64 + std::countr_zero(x)));
    }
  }
  return s;
}

std::optional<VertexId> StateGraph::find(const State &s) const {
  if (goal_.empty() || s.num_atoms() != num_atoms_) {
    return std::nullopt;
  }
  auto e = vertex_table_[slot_of(s.words(), s.hash())];
  if (e == kEmptySlot) {
    return std::nullopt;
  }
  return static_cast<VertexId>(e);
}

StateGraph build_graph(const pddl::GroundedTask &task,
                       const std::vector<world::CompiledPlan> &plans) {
  StateGraph g;
  std::size_t transitions = 0;
  for (const auto &p : plans) {
    transitions += p.actions.size();
  }
  g.reserve(transitions + 1, transitions);
  for (const auto &p : plans) {
    if (p.states.size() != p.actions.size() + 1) {
      throw UsageError("compiled plan has inconsistent state count");
    }
    VertexId prev = g.add_vertex(p.states[0], world::satisfies(p.states[0], task.goal));
    if (!g.init()) {
      g.set_init(prev);
    }
    for (std::size_t t = 0; t < p.actions.size(); ++t) {
      const State &s = p.states[t + 1];
      VertexId next = g.add_vertex(s, world::satisfies(s, task.goal));
      g.add_edge(prev, p.actions[t], next);
      prev = next;
    }
  }
  return g;
}

std::optional<std::vector<ActionId>> shortest_plan(const StateGraph &g) {
  if (!g.init()) {
    return std::nullopt;
  }
  const std::size_t n = g.num_vertices();
  // Reverse adjacency (CSR) for multi-source BFS from the goal vertices.
  std::vector<std::size_t> rstart(n + 1, 0), fstart(n + 1, 0);
  for (const auto &e : g.edges()) {
    ++rstart[e.to + 1];
    ++fstart[e.from + 1];
  }
  for (std::size_t i = 0; i < n; ++i) {
    rstart[i + 1] += rstart[i];
    fstart[i + 1] += fstart[i];
  }
  std::vector<VertexId> rsrc(g.num_edges());
  std::vector<const Edge *> fedge(g.num_edges());
  {
    auto rpos = rstart, fpos = fstart;
    for (const auto &e : g.edges()) {
      rsrc[rpos[e.to]++] = e.from;
      fedge[fpos[e.from]++] = &e;
    }
  }
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(n, kInf);
  std::vector<VertexId> queue;
  queue.reserve(n);
  for (VertexId v = 0; v < n; ++v) {
    if (g.is_goal(v)) {
      dist[v] = 0;
      queue.push_back(v);
    }
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    VertexId v = queue[head];
    for (std::size_t k = rstart[v]; k < rstart[v + 1]; ++k) {
      VertexId u = rsrc[k];
      if (dist[u] == kInf) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  const VertexId init = *g.init();
  if (dist[init] == kInf) {
    return std::nullopt;
  }
  // Walk forward keeping the set of vertices reachable by the smallest
  // action prefix, so ties are broken over the whole sequence.
  std::vector<ActionId> plan;
  std::vector<VertexId> frontier{init};
  std::vector<char> mark(n, 0);
  for (std::size_t d = dist[init]; d > 0; --d) {
    ActionId best = std::numeric_limits<ActionId>::max();
    for (VertexId v : frontier) {
      for (std::size_t k = fstart[v]; k < fstart[v + 1]; ++k) {
        const Edge &e = *fedge[k];
        if (dist[e.to] == d - 1 && e.action < best) {
          best = e.action;
        }
      }
    }
    std::vector<VertexId> next;
    for (VertexId v : frontier) {
      for (std::size_t k = fstart[v]; k < fstart[v + 1]; ++k) {
        const Edge &e = *fedge[k];
        if (dist[e.to] == d - 1 && e.action == best && !mark[e.to]) {
          mark[e.to] = 1;
          next.push_back(e.to);
        }
      }
    }
    for (VertexId v : next) {
      mark[v] = 0;
    }
    plan.push_back(best);
    frontier = std::move(next);
  }
  return plan;
}

const CacheEntry *SolutionCache::find(const std::string &id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

bool SolutionCache::offer(const std::string &id, std::vector<std::string> plan,
                          int iteration) {
  auto it = entries_.find(id);
  if (it != entries_.end() && it->second.plan.size() <= plan.size()) {
    return false;
  }
  entries_[id] = CacheEntry{std::move(plan), iteration};
  return true;
}

double SolutionCache::mean_length() const {
  if (entries_.empty()) {
    return 0;
  }
  double sum = 0;
  for (const auto &[id, e] : entries_) {
    sum += static_cast<double>(e.length());
  }
  return sum / static_cast<double>(entries_.size());
}

void SolutionCache::save(const std::filesystem::path &path) const {
  std::string out;
  for (const auto &[id, e] : entries_) {
    json j{{"id", id},
           {"plan", e.plan},
           {"length", e.length()},
           {"iteration", e.iteration}};
    out += j.dump() + "\n";
  }
  write_file_atomic(path, out);
}

SolutionCache SolutionCache::load(const std::filesystem::path &path) {
  SolutionCache c;
  const std::string text = read_file(path);
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) {
      end = text.size();
    }
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      auto j = json::parse(line);
      CacheEntry e{j.at("plan").get<std::vector<std::string>>(),
                   j.at("iteration").get<int>()};
      if (j.at("length").get<std::size_t>() != e.length()) {
        throw IntegrityError("length does not match plan");
      }
      c.entries_[j.at("id").get<std::string>()] = std::move(e);
    } catch (const json::exception &ex) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " +
                  ex.what());
    } catch (const IntegrityError &ex) {
      throw IntegrityError(path.string() + ":" + std::to_string(line_no) +
                           ": " + ex.what());
    }
  }
  return c;
}

HarvestResult harvest(domains::DomainKind domain,
                      const std::vector<ProblemCandidates> &problems,
                      SolutionCache &cache, int iteration) {
  HarvestResult r;
  double harvested_sum = 0;
  const std::string source = "harvest-iter-" + std::to_string(iteration);
  for (const auto &pc : problems) {
    if (!pc.task || !pc.problem) {
      throw UsageError("problem " + pc.id + " has no task");
    }
    const auto &task = *pc.task;
    r.candidates += pc.candidates.size();
    auto valid = compile_and_filter(task, pc.candidates);
    r.valid_candidates += valid.size();
    if (valid.empty()) {
      continue;
    }
    auto g = build_graph(task, valid);
    auto path = shortest_plan(g);
    if (!path) {
      throw IntegrityError(pc.id + ": no goal vertex reachable in graph");
    }
    world::Plan plan{*path, pc.id};
    auto check = world::validate(task, plan);
    if (!check.valid || !check.goal_reached) {
      throw IntegrityError(pc.id + ": harvested plan does not validate");
    }
    ++r.problems_harvested;
    harvested_sum += static_cast<double>(plan.length());
    auto lines = world::plan_to_strings(task, plan);
    DatasetRecord rec;
    rec.id = pc.id;
    rec.domain = domains::to_string(domain);
    rec.problem_pddl = pddl::to_pddl(*pc.problem);
    if (cache.offer(pc.id, lines, iteration)) {
      ++r.improved;
      rec.plan = std::move(lines);
      rec.plan_source = source;
    } else {
      rec.plan = cache.find(pc.id)->plan;
      rec.plan_source = "cache";
    }
    r.dataset.push_back(std::move(rec));
  }
  if (r.problems_harvested) {
    r.mean_harvested_length =
        harvested_sum / static_cast<double>(r.problems_harvested);
  }
  return r;
}

} // namespace plangen::harvest
