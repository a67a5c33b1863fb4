#include "plangen/harvest.hpp"

#include <doctest.h>

#include <functional>
#include <queue>

using namespace plangen;
using namespace plangen::harvest;

namespace {

const char *kRoads = R"((define (domain roads)
  (:requirements :strips :typing)
  (:types place)
  (:predicates (at ?p - place) (road ?a ?b - place))
  (:action move
    :parameters (?from ?to - place)
    :precondition (and (at ?from) (road ?from ?to))
    :effect (and (not (at ?from)) (at ?to)))))";

// s -> m is short, m -> g is long on route A; route B is the reverse.
const char *kRoadProblem = R"((define (problem cross) (:domain roads)
  (:objects s m g a1 a2 b1 b2 - place)
  (:init (at s) (road s m) (road m a1) (road a1 a2) (road a2 g)
         (road s b1) (road b1 b2) (road b2 m) (road m g))
  (:goal (and (at g)))))";

struct Roads {
  pddl::DomainDef dom = pddl::parse_domain(kRoads);
  pddl::ProblemDef prob = pddl::parse_problem(kRoadProblem, dom);
  pddl::GroundedTask task = pddl::ground(dom, prob);

  world::Plan plan(const std::vector<std::string> &lines) const {
    return world::plan_from_strings(task, lines);
  }
};

const std::vector<std::string> kRouteA{"(move s m)", "(move m a1)",
                                       "(move a1 a2)", "(move a2 g)"};
const std::vector<std::string> kRouteB{"(move s b1)", "(move b1 b2)",
                                       "(move b2 m)", "(move m g)"};

State vertex_state(std::size_t n, std::size_t v) {
  State s(n);
  s.set(static_cast<AtomId>(v));
  return s;
}

struct RandomGraph {
  StateGraph g;
  std::vector<std::vector<std::pair<ActionId, VertexId>>> adj;
};

RandomGraph random_graph(Rng &rng, std::size_t n, double density,
                         std::size_t actions) {
  RandomGraph r;
  r.adj.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    r.g.add_vertex(vertex_state(n, v), rng.uniform() < 0.15);
  }
  r.g.set_init(0);
  for (VertexId u = 0; u < n; ++u) {
    for (VertexId v = 0; v < n; ++v) {
      if (u != v && rng.uniform() < density) {
        auto a = static_cast<ActionId>(rng.below(actions));
        if (r.g.add_edge(u, a, v)) {
          r.adj[u].push_back({a, v});
        }
      }
    }
  }
  return r;
}

// Lexicographically smallest among the shortest simple paths, by exhaustive
// enumeration.
std::optional<std::vector<ActionId>> brute_force(const RandomGraph &r) {
  std::optional<std::vector<ActionId>> best;
  std::vector<ActionId> path;
  std::vector<char> on(r.adj.size(), 0);
  std::function<void(VertexId)> dfs = [&](VertexId v) {
    if (r.g.is_goal(v)) {
      if (!best || path.size() < best->size() ||
          (path.size() == best->size() && path < *best)) {
        best = path;
      }
    }
    on[v] = 1;
    for (auto [a, w] : r.adj[v]) {
      if (!on[w]) {
        path.push_back(a);
        dfs(w);
        path.pop_back();
      }
    }
    on[v] = 0;
  };
  dfs(0);
  return best;
}

std::optional<std::size_t> dijkstra(const RandomGraph &r) {
  const std::size_t n = r.adj.size();
  std::vector<std::size_t> dist(n, SIZE_MAX);
  using Item = std::pair<std::size_t, VertexId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[0] = 0;
  pq.push({0, 0});
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) {
      continue;
    }
    if (r.g.is_goal(v)) {
      return d;
    }
    for (auto [a, w] : r.adj[v]) {
      if (d + 1 < dist[w]) {
        dist[w] = d + 1;
        pq.push({d + 1, w});
      }
    }
  }
  return std::nullopt;
}

} // namespace

TEST_CASE("compile_and_filter keeps exactly the goal-reaching plans") {
  Roads r;
  auto valid_a = r.plan(kRouteA);
  auto valid_b = r.plan(kRouteB);
  auto no_goal = r.plan({"(move s m)"});
  auto broken = r.plan({"(move m g)"});
  std::vector<world::Plan> batch{broken, valid_a, no_goal, broken, valid_b,
                                 no_goal, valid_a, broken, valid_b, no_goal};
  auto out = compile_and_filter(r.task, batch);
  REQUIRE(out.size() == 4);
  CHECK(out[0].actions == valid_a.actions);
  CHECK(out[1].actions == valid_b.actions);
  CHECK(out[2].actions == valid_a.actions);
  CHECK(out[3].actions == valid_b.actions);
  CHECK(out[0].states.size() == 5);
  CHECK(compile_and_filter(r.task, {broken, no_goal}).empty());
}

TEST_CASE("graph of one and of duplicate plans") {
  Roads r;
  auto a = compile_and_filter(r.task, {r.plan(kRouteA)});
  auto g = build_graph(r.task, a);
  CHECK(g.num_vertices() == 5);
  CHECK(g.num_edges() == 4);
  CHECK(g.init() == VertexId{0});
  auto twice = build_graph(r.task, compile_and_filter(r.task, {r.plan(kRouteA), r.plan(kRouteA)}));
  CHECK(twice.num_vertices() == 5);
  CHECK(twice.num_edges() == 4);
  CHECK(twice.edges() == g.edges());
  auto p = shortest_plan(g);
  REQUIRE(p);
  CHECK(p->size() == 4);
  CHECK(build_graph(r.task, {}).empty());
  CHECK_FALSE(shortest_plan(StateGraph{}));
  for (const auto &e : g.edges()) {
    CHECK(world::step(g.state(e.from), r.task.actions[e.action]) ==
          g.state(e.to));
  }
}

TEST_CASE("crossover of two plans sharing a mid-state") {
  Roads r;
  auto both = compile_and_filter(r.task, {r.plan(kRouteA), r.plan(kRouteB)});
  auto g = build_graph(r.task, both);
  CHECK(g.num_vertices() == 7);
  CHECK(g.num_vertices() < 10);
  auto p = shortest_plan(g);
  REQUIRE(p);
  CHECK(p->size() == 2);
  CHECK(world::plan_to_strings(r.task, {*p, ""}) ==
        std::vector<std::string>{"(move s m)", "(move m g)"});
  auto check = world::validate(r.task, {*p, ""});
  CHECK(check.valid);
  CHECK(check.goal_reached);
}

TEST_CASE("shortest plan is empty when init satisfies the goal") {
  StateGraph g;
  g.set_init(g.add_vertex(vertex_state(4, 0), true));
  g.add_edge(0, 3, g.add_vertex(vertex_state(4, 1), true));
  auto p = shortest_plan(g);
  REQUIRE(p);
  CHECK(p->empty());
}

TEST_CASE("parallel edges are kept and the smallest action wins") {
  StateGraph g;
  g.set_init(g.add_vertex(vertex_state(4, 0), false));
  auto m = g.add_vertex(vertex_state(4, 1), false);
  auto goal = g.add_vertex(vertex_state(4, 2), true);
  CHECK(g.add_edge(0, 9, m));
  CHECK(g.add_edge(0, 4, m));
  CHECK_FALSE(g.add_edge(0, 4, m));
  CHECK(g.add_edge(m, 7, goal));
  CHECK(g.num_edges() == 3);
  CHECK(*shortest_plan(g) == std::vector<ActionId>{4, 7});
}

TEST_CASE("tie-break looks past the first action") {
  // 0 -1-> a -5-> goal, 0 -1-> b -2-> goal: both start with action 1.
  StateGraph g;
  g.set_init(g.add_vertex(vertex_state(4, 0), false));
  auto a = g.add_vertex(vertex_state(4, 1), false);
  auto b = g.add_vertex(vertex_state(4, 2), false);
  auto goal = g.add_vertex(vertex_state(4, 3), true);
  g.add_edge(0, 1, a);
  g.add_edge(0, 1, b);
  g.add_edge(a, 5, goal);
  g.add_edge(b, 2, goal);
  CHECK(*shortest_plan(g) == std::vector<ActionId>{1, 2});
}

TEST_CASE("shortest plan agrees with exhaustive enumeration") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng.below(11);
    auto r = random_graph(rng, n, 0.1 + 0.3 * rng.uniform(), 6);
    auto expect = brute_force(r);
    auto got = shortest_plan(r.g);
    REQUIRE(expect.has_value() == got.has_value());
    if (got) {
      CHECK(*got == *expect);
    }
  }
}

TEST_CASE("shortest plan length agrees with Dijkstra on larger graphs") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 20 + rng.below(181);
    auto r = random_graph(rng, n, 2.5 / static_cast<double>(n), 50);
    auto expect = dijkstra(r);
    auto got = shortest_plan(r.g);
    REQUIRE(expect.has_value() == got.has_value());
    if (got) {
      CHECK(got->size() == *expect);
    }
  }
}

TEST_CASE("solution cache") {
  SolutionCache c;
  CHECK(c.offer("p", {"a", "b", "c"}, 0));
  CHECK_FALSE(c.offer("p", {"x", "y", "z"}, 1));
  CHECK(c.find("p")->plan[0] == "a");
  CHECK(c.offer("p", {"q"}, 2));
  CHECK(c.find("p")->iteration == 2);
  CHECK_FALSE(c.offer("p", {"r", "s"}, 3));
  CHECK(c.offer("o", {}, 3));
  CHECK(c.mean_length() == doctest::Approx(0.5));
  auto path = std::filesystem::temp_directory_path() / "plangen_cache.jsonl";
  c.save(path);
  auto back = SolutionCache::load(path);
  CHECK(back.size() == 2);
  CHECK(back.find("p")->plan == std::vector<std::string>{"q"});
  CHECK(back.find("o")->iteration == 3);
  write_file_atomic(path, R"({"id":"p","plan":["a"],"length":2,"iteration":0})"
                          "\n");
  CHECK_THROWS_AS(SolutionCache::load(path), IntegrityError);
  std::filesystem::remove(path);
}

namespace {

struct Tower {
  // c on b on a, plus d and e on the table; goal a on b on c.
  pddl::ProblemDef prob = pddl::parse_problem(
      R"((define (problem tower) (:domain blocksworld)
  (:objects block-1 block-2 block-3 block-4 block-5 - block)
  (:init (ontable block-1) (on block-2 block-1) (on block-3 block-2)
         (clear block-3) (ontable block-4) (ontable block-5) (clear block-4)
         (clear block-5) (handempty))
  (:goal (and (on block-1 block-2) (on block-2 block-3)))))",
      domains::domain_def(domains::DomainKind::blocksworld));
  pddl::GroundedTask task =
      domains::ground(domains::DomainKind::blocksworld, prob);

  std::vector<std::string> six{"(unstack block-3 block-2)", "(putdown block-3)",
                               "(unstack block-2 block-1)",
                               "(stack block-2 block-3)", "(pickup block-1)",
                               "(stack block-1 block-2)"};
  std::vector<std::string> six_alt{"(unstack block-3 block-2)",
                                   "(stack block-3 block-4)",
                                   "(unstack block-2 block-1)",
                                   "(stack block-2 block-3)",
                                   "(pickup block-1)",
                                   "(stack block-1 block-2)"};
  std::vector<std::string> eight() const {
    std::vector<std::string> p{"(pickup block-4)", "(stack block-4 block-5)"};
    p.insert(p.end(), six.begin(), six.end());
    return p;
  }

  ProblemCandidates candidates(const std::vector<std::vector<std::string>> &plans) const {
    ProblemCandidates pc{"tower", &prob, &task, {}};
    for (const auto &p : plans) {
      pc.candidates.push_back(world::plan_from_strings(task, p));
    }
    return pc;
  }
};

} // namespace

TEST_CASE("harvest merges with the cache") {
  Tower t;
  using domains::DomainKind;
  SUBCASE("cached shorter plan wins") {
    SolutionCache c;
    c.offer("tower", t.six, 0);
    auto r = harvest::harvest(DomainKind::blocksworld, {t.candidates({t.eight()})}, c, 1);
    REQUIRE(r.dataset.size() == 1);
    CHECK(r.dataset[0].plan == t.six);
    CHECK(r.dataset[0].plan_source == "cache");
    CHECK(r.mean_harvested_length == 8);
    CHECK(c.find("tower")->iteration == 0);
    CHECK(r.improved == 0);
  }
  SUBCASE("shorter harvested plan replaces the cache entry") {
    SolutionCache c;
    c.offer("tower", t.eight(), 0);
    auto r = harvest::harvest(DomainKind::blocksworld,
                     {t.candidates({t.eight(), t.six})}, c, 3);
    REQUIRE(r.dataset.size() == 1);
    CHECK(r.dataset[0].plan->size() == 6);
    CHECK(r.dataset[0].plan_source == "harvest-iter-3");
    CHECK(c.find("tower")->length() == 6);
    CHECK(c.find("tower")->iteration == 3);
    CHECK(r.improved == 1);
    CHECK(r.valid_candidates == 2);
    auto prob = domains::problem_of(r.dataset[0]);
    CHECK(prob == t.prob);
  }
  SUBCASE("equal length keeps the cached label") {
    SolutionCache c;
    c.offer("tower", t.six_alt, 0);
    auto r = harvest::harvest(DomainKind::blocksworld, {t.candidates({t.six})}, c, 1);
    CHECK(r.dataset[0].plan_source == "cache");
    CHECK(r.dataset[0].plan == t.six_alt);
    CHECK(c.find("tower")->iteration == 0);
  }
  SUBCASE("no valid candidate leaves the problem out") {
    SolutionCache c;
    auto r = harvest::harvest(DomainKind::blocksworld,
                     {t.candidates({{"(pickup block-4)"}})}, c, 1);
    CHECK(r.dataset.empty());
    CHECK(r.problems_harvested == 0);
    CHECK(c.size() == 0);
    c.offer("tower", t.six, 0);
    r = harvest::harvest(DomainKind::blocksworld, {t.candidates({})}, c, 2);
    CHECK(r.dataset.empty());
  }
  SUBCASE("harvested plan never exceeds the shortest candidate") {
    SolutionCache c;
    auto r = harvest::harvest(DomainKind::blocksworld,
                     {t.candidates({t.eight(), t.six})}, c, 1);
    CHECK(r.mean_harvested_length <= 6);
  }
}
