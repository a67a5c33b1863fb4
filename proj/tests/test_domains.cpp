#include "plangen/domains.hpp"

#include <doctest.h>

#include <functional>
#include <set>

using namespace plangen;
using namespace plangen::domains;

namespace {

GeneratorConfig small(DomainKind kind, std::size_t count, std::uint64_t seed) {
  GeneratorConfig c;
  c.domain = kind;
  c.blocks = {3, 4};
  c.cities = {1, 3};
  c.city_size = {1, 3};
  c.packages = {1, 3};
  c.airplanes = {1, 2};
  c.labyrinth_grid = {3, 3};
  c.sokoban_grid = {5, 6};
  c.boxes = {1, 2};
  c.walls = {0, 4};
  c.count = count;
  c.seed = seed;
  return c;
}

std::string serialize(const ProblemSet &s) {
  std::string out;
  for (const auto &e : s.problems) {
    out += e.id + "\n" + pddl::to_pddl(e.problem);
  }
  return out;
}

// Iterative deepening DFS, independent of the BFS oracle.
std::optional<std::size_t> iddfs(const pddl::GroundedTask &t,
                                 std::size_t max_depth) {
  world::SuccessorGenerator succ(t);
  std::vector<State> path{t.init};
  std::function<bool(std::size_t)> dfs = [&](std::size_t depth) -> bool {
    if (world::satisfies(path.back(), t.goal)) {
      return true;
    }
    if (depth == 0) {
      return false;
    }
    for (auto a : succ.applicable_actions(path.back())) {
      State n = world::step(path.back(), t.actions[a]);
      if (std::find(path.begin(), path.end(), n) != path.end()) {
        continue;
      }
      path.push_back(n);
      if (dfs(depth - 1)) {
        return true;
      }
      path.pop_back();
    }
    return false;
  };
  for (std::size_t d = 0; d <= max_depth; ++d) {
    path.resize(1);
    if (dfs(d)) {
      return d;
    }
  }
  return std::nullopt;
}

} // namespace

TEST_CASE("blocksworld generation is replayable and unique") {
  auto c = small(DomainKind::blocksworld, 10, 7);
  auto a = generate(c);
  auto b = generate(c);
  CHECK(a.problems.size() == 10);
  CHECK(serialize(a) == serialize(b));
  std::set<std::uint64_t> hashes;
  for (const auto &e : a.problems) {
    hashes.insert(structural_hash(e.problem));
    CHECK(e.problem.objects.size() >= 3);
    CHECK(e.problem.objects.size() <= 4);
    CHECK_FALSE(e.problem.goal.empty());
  }
  CHECK(hashes.size() == 10);
  c.seed = 8;
  CHECK(serialize(generate(c)) != serialize(a));
}

TEST_CASE("every domain generates groundable instances") {
  for (auto kind : {DomainKind::blocksworld, DomainKind::logistics,
                    DomainKind::labyrinth, DomainKind::sokoban}) {
    auto set = generate(small(kind, 5, 3));
    CHECK(set.problems.size() == 5);
    for (const auto &e : set.problems) {
      auto t = pddl::ground(domain_def(kind), e.problem);
      CHECK(t.num_actions() > 0);
      CHECK(problem_of({e.id, to_string(kind), pddl::to_pddl(e.problem),
                        std::nullopt, "", std::nullopt}) == e.problem);
    }
  }
}

TEST_CASE("config bounds") {
  auto c = small(DomainKind::blocksworld, 1, 0);
  c.blocks = {2, 30};
  CHECK_THROWS_AS(c.check(), UsageError);
  c.override_bounds = true;
  CHECK_NOTHROW(c.check());
  c.blocks = {5, 4};
  CHECK_THROWS_AS(c.check(), UsageError);
}

TEST_CASE("sokoban with no room fails") {
  auto c = small(DomainKind::sokoban, 1, 0);
  c.override_bounds = true;
  c.sokoban_grid = {2, 2};
  c.walls = {3, 3};
  c.boxes = {1, 1};
  c.retries_per_instance = 10;
  CHECK_THROWS_AS(generate(c), GenerationError);
}

TEST_CASE("tiny parameter space exhausts uniqueness") {
  auto c = small(DomainKind::blocksworld, 500, 0);
  c.blocks = {3, 3};
  c.retries_per_instance = 50;
  CHECK_THROWS_AS(generate(c), GenerationError);
}

TEST_CASE("naive blocksworld on the swap instance is optimal") {
  const auto &dom = domain_def(DomainKind::blocksworld);
  auto p = pddl::parse_problem(R"((define (problem s) (:domain blocksworld)
  (:objects a b - block)
  (:init (ontable b) (on a b) (clear a) (handempty))
  (:goal (and (on b a)))))",
                               dom);
  auto t = pddl::ground(dom, p);
  auto plan = baseline_solve(DomainKind::blocksworld, p, t);
  REQUIRE(plan);
  CHECK(plan->length() == 4);
  auto opt = bfs_oracle(t, 1000);
  REQUIRE(opt);
  CHECK(opt->length() == 4);
}

TEST_CASE("naive blocksworld respects its bound") {
  const auto &dom = domain_def(DomainKind::blocksworld);
  auto c = small(DomainKind::blocksworld, 40, 21);
  c.blocks = {3, 7};
  for (const auto &e : generate(c).problems) {
    auto t = pddl::ground(dom, e.problem);
    auto plan = baseline_solve(DomainKind::blocksworld, e.problem, t);
    REQUIRE(plan);
    auto comp = world::validate(t, *plan);
    CHECK(comp.goal_reached);
    CHECK(plan->length() <= 4 * e.problem.objects.size());
    auto opt = bfs_oracle(t, 200000);
    REQUIRE(opt);
    CHECK(opt->length() <= plan->length());
  }
  // Inverting a 3-tower: every block is out of place.
  auto p = pddl::parse_problem(R"((define (problem inv) (:domain blocksworld)
  (:objects a b c - block)
  (:init (ontable a) (on b a) (on c b) (clear c) (handempty))
  (:goal (and (on a b) (on b c)))))",
                               dom);
  auto t = pddl::ground(dom, p);
  auto plan = baseline_solve(DomainKind::blocksworld, p, t);
  REQUIRE(plan);
  CHECK(plan->length() <= 2 * 2 * 3);
  CHECK(world::validate(t, *plan).goal_reached);
}

TEST_CASE("goal already satisfied gives an empty plan") {
  const auto &dom = domain_def(DomainKind::blocksworld);
  auto p = pddl::parse_problem(R"((define (problem s) (:domain blocksworld)
  (:objects a b - block)
  (:init (ontable b) (on a b) (clear a) (handempty))
  (:goal (and (on a b)))))",
                               dom);
  auto t = pddl::ground(dom, p);
  CHECK(baseline_solve(DomainKind::blocksworld, p, t)->length() == 0);
  CHECK(bfs_oracle(t, 10)->length() == 0);
}

TEST_CASE("baseline plans validate in every domain") {
  for (auto kind : {DomainKind::blocksworld, DomainKind::logistics,
                    DomainKind::labyrinth, DomainKind::sokoban}) {
    auto set = generate(small(kind, 6, 9));
    const auto &dom = domain_def(kind);
    for (const auto &e : set.problems) {
      auto t = ground(kind, e.problem);
      auto plan = baseline_solve(kind, e.problem, t);
      REQUIRE(plan);
      CHECK(world::validate(t, *plan).goal_reached);
    }
  }
}

TEST_CASE("oracle agrees with iterative deepening on labyrinth") {
  auto set = generate(small(DomainKind::labyrinth, 3, 4));
  const auto &dom = domain_def(DomainKind::labyrinth);
  for (const auto &e : set.problems) {
    auto t = ground(DomainKind::labyrinth, e.problem);
    auto opt = bfs_oracle(t, 500000);
    REQUIRE(opt);
    CHECK(world::validate(t, *opt).goal_reached);
    if (opt->length() <= 8) {
      CHECK(iddfs(t, opt->length()) == opt->length());
    }
  }
}

TEST_CASE("oracle budget") {
  auto set = generate(small(DomainKind::sokoban, 1, 5));
  auto t = ground(DomainKind::sokoban, set.problems[0].problem);
  CHECK_FALSE(bfs_oracle(t, 2));
}

TEST_CASE("splits are disjoint") {
  auto set = generate(small(DomainKind::blocksworld, 30, 2));
  auto s = split(set, 5, 5);
  CHECK(s.train.problems.size() == 20);
  CHECK(s.valid.problems.size() == 5);
  CHECK(s.test.problems.size() == 5);
  std::set<std::uint64_t> train;
  for (const auto &e : s.train.problems) {
    train.insert(structural_hash(e.problem));
  }
  for (const auto &e : s.test.problems) {
    CHECK_FALSE(train.count(structural_hash(e.problem)));
  }
}

TEST_CASE("label and record round trip") {
  auto set = generate(small(DomainKind::blocksworld, 4, 1));
  LabelOptions opt;
  opt.oracle_budget = 100000;
  auto recs = label(set, opt);
  REQUIRE(recs.size() == 4);
  for (const auto &r : recs) {
    CHECK(record_from_json_line(to_json_line(r)) == r);
    CHECK(r.optimal_length);
    CHECK(*r.optimal_length <= static_cast<int>(r.plan->size()));
  }
}

TEST_CASE("external strategy shells out") {
  const auto &dom = domain_def(DomainKind::blocksworld);
  auto p = pddl::parse_problem(R"((define (problem s) (:domain blocksworld)
  (:objects a b - block)
  (:init (ontable b) (on a b) (clear a) (handempty))
  (:goal (and (on b a)))))",
                               dom);
  auto t = pddl::ground(dom, p);
  SolveOptions o;
  o.strategy = SolveStrategy::external;
  o.external_command = "printf '(unstack a b)\\n(putdown a)\\n(pickup b)\\n"
                       "(stack b a)\\n; cost = 4\\n' > {plan-out}";
  auto plan = baseline_solve(DomainKind::blocksworld, p, t, o);
  REQUIRE(plan);
  CHECK(plan->length() == 4);
  o.external_command = "false";
  CHECK_THROWS_AS(baseline_solve(DomainKind::blocksworld, p, t, o),
                  SolverError);
}
