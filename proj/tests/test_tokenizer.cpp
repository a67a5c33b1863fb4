#include "plangen/domains.hpp"
#include "plangen/tokenizer.hpp"

#include <doctest.h>

#include <set>

using namespace plangen;
using namespace plangen::tokenizer;
using domains::DomainKind;

namespace {

const pddl::DomainDef &bw() {
  return domains::domain_def(DomainKind::blocksworld);
}

pddl::ProblemDef fig1() {
  return pddl::parse_problem(R"((define (problem f) (:domain blocksworld)
  (:objects block-1 block-2 block-3 - block)
  (:init (ontable block-1) (on block-2 block-1) (clear block-2)
         (ontable block-3) (clear block-3) (handempty))
  (:goal (and (on block-3 block-2)))))",
                             bw());
}

} // namespace

TEST_CASE("blocksworld vocabulary has 42 tokens") {
  auto v = build_vocab(bw(), {{"block", 25}});
  CHECK(v.size() == 42);
  CHECK(v.name(kPad) == "[pad]");
  CHECK(v.name(kEndOfPlan) == "[endofplan]");
  CHECK(v.kind(v.id("unstack")) == TokenKind::op);
  CHECK(v.kind(v.id("block")) == TokenKind::type);
  CHECK(v.kind(v.id("block-25")) == TokenKind::object);
  CHECK_FALSE(v.find("block-26"));
  CHECK(build_vocab(bw(), {{"block", 25}}) == v);
  CHECK(build_vocab(bw(), {{"block", 25}}).tokens() == v.tokens());
}

TEST_CASE("specials only") {
  auto d = pddl::parse_domain("(define (domain e))");
  auto v = build_vocab(d, {});
  CHECK(v.size() == kNumSpecials);
}

TEST_CASE("vocabulary size formula") {
  const auto &d = domains::domain_def(DomainKind::logistics);
  std::map<std::string, int> lim{{"airplane", 2}, {"airport", 3},
                                 {"city", 3},     {"location", 4},
                                 {"package", 5},  {"truck", 3}};
  auto v = build_vocab(d, lim);
  std::size_t types = d.types.size();
  for (const auto &t : d.types) {
    types -= t.name == "object";
  }
  CHECK(v.size() == kNumSpecials + d.predicates.size() + d.operators.size() +
                        types + 20);
}

TEST_CASE("vocabulary json round trip") {
  auto v = build_vocab(bw(), {{"block", 6}});
  auto w = Vocabulary::from_json(v.to_json());
  CHECK(w == v);
  CHECK(w.hash() == v.hash());
  CHECK(w.arity(w.id("stack")) == 2u);
  for (TokenId i = 0; i < v.size(); ++i) {
    CHECK(w.find(v.name(i)) == i);
  }
}

TEST_CASE("problem encoding layout and round trip") {
  auto v = build_vocab(bw(), {{"block", 5}});
  auto p = fig1();
  auto seq = encode_problem(p, v);
  CHECK(seq.ids.front() == kStartOfProblem);
  CHECK(seq.ids[1] == kObjects);
  CHECK(seq.ids.back() == kStartOfPlan);
  CHECK(seq.boundary == seq.ids.size());
  auto q = decode_problem(seq.ids, v, bw());
  q.name = p.name;
  CHECK(q == pddl::canonical(p));
}

TEST_CASE("goal-empty problem") {
  auto v = build_vocab(bw(), {{"block", 5}});
  auto p = fig1();
  p.goal.clear();
  auto seq = encode_problem(p, v);
  CHECK(seq.ids[seq.ids.size() - 2] == kGoal);
}

TEST_CASE("object limit") {
  auto v = build_vocab(bw(), {{"block", 25}});
  pddl::ProblemDef p;
  for (int i = 1; i <= 26; ++i) {
    p.objects.push_back({"block-" + std::to_string(i), "block"});
  }
  CHECK_THROWS_AS(encode_problem(p, v), LimitError);
}

TEST_CASE("normalize objects") {
  auto p = pddl::parse_problem(R"((define (problem s) (:domain blocksworld)
  (:objects b a - block) (:init (on a b) (ontable b) (clear a) (handempty))
  (:goal (and (on b a)))))",
                               bw());
  auto q = normalize_objects(p);
  CHECK(q.objects[0].name == "block-1");
  CHECK(q.goal[0] == pddl::Atom{"on", {"block-2", "block-1"}});
}

TEST_CASE("actions") {
  auto v = build_vocab(bw(), {{"block", 3}});
  ActionCall u{"unstack", {"block-1", "block-2"}};
  auto t = encode_action(u, v);
  CHECK(t == std::vector<TokenId>{v.id("unstack"), v.id("block-1"),
                                  v.id("block-2")});
  CHECK(decode_action(t, v) == u);
  std::vector<TokenId> bad{v.id("unstack"), v.id("block-1"), kStartOfPlan};
  CHECK_THROWS_AS(decode_action(bad, v), DecodeError);
  CHECK_THROWS_AS(decode_action(std::vector<TokenId>{v.id("unstack")}, v),
                  DecodeError);

  auto d = pddl::parse_domain("(define (domain z) (:predicates (p))"
                              " (:action noop :parameters () :effect (p)))");
  auto vz = build_vocab(d, {});
  ActionCall n{"noop", {}};
  CHECK(encode_action(n, vz).size() == 1);
  CHECK(decode_action(encode_action(n, vz), vz) == n);
}

TEST_CASE("decode plan") {
  auto v = build_vocab(bw(), {{"block", 3}});
  std::vector<TokenId> just_end{kEndOfPlan};
  auto d = decode_plan(just_end, v);
  CHECK(d.ok());
  CHECK(d.actions.empty());

  std::vector<ActionCall> three{{"unstack", {"block-1", "block-2"}},
                                {"putdown", {"block-1"}},
                                {"pickup", {"block-2"}}};
  d = decode_plan(encode_plan(three, v), v);
  CHECK(d.ok());
  CHECK(d.actions == three);

  auto ids = encode_plan(three, v);
  ids.pop_back();
  CHECK(decode_plan(ids, v).status == DecodeStatus::truncated);
  ids.pop_back();
  CHECK(decode_plan(ids, v).status == DecodeStatus::truncated);
  std::vector<TokenId> junk{v.id("block-1"), kEndOfPlan};
  CHECK(decode_plan(junk, v).status == DecodeStatus::malformed);
  std::vector<TokenId> early{v.id("stack"), v.id("block-1"), kEndOfPlan};
  CHECK(decode_plan(early, v).status == DecodeStatus::malformed);
}

TEST_CASE("resolve rejects calls outside the task") {
  auto p = fig1();
  auto t = pddl::ground(bw(), p);
  auto r = resolve({{"unstack", {"block-2", "block-1"}}}, t);
  REQUIRE(r);
  CHECK(r->length() == 1);
  CHECK_FALSE(resolve({{"stack", {"block-1", "block-1"}}}, t));
  CHECK_FALSE(resolve({{"pickup", {"block-9"}}}, t));
}

TEST_CASE("round trip and injectivity on generated problems") {
  for (auto kind : {DomainKind::blocksworld, DomainKind::logistics,
                    DomainKind::labyrinth, DomainKind::sokoban}) {
    domains::GeneratorConfig c;
    c.domain = kind;
    c.blocks = {3, 25};
    c.cities = {1, 4};
    c.city_size = {1, 3};
    c.packages = {1, 6};
    c.airplanes = {1, 3};
    c.sokoban_grid = {5, 6};
    c.boxes = {1, 3};
    c.walls = {0, 6};
    c.count = 10000;
    c.seed = 17;
    auto set = domains::generate(c);
    const auto &dom = domains::domain_def(kind);
    auto v = build_vocab(dom, domains::object_limits(c));
    std::set<std::vector<TokenId>> seen;
    std::size_t checked = 0;
    for (const auto &e : set.problems) {
      auto seq = encode_problem(e.problem, v);
      auto q = decode_problem(seq.ids, v, dom);
      q.name = e.problem.name;
      REQUIRE(q == e.problem);
      seen.insert(seq.ids);
      if (checked++ < 200) {
        auto task = domains::ground(kind, e.problem);
        auto plan = domains::baseline_solve(kind, e.problem, task);
        REQUIRE(plan);
        auto tail = encode_plan(task, *plan, v);
        auto dp = decode_plan(tail, v);
        REQUIRE(dp.ok());
        CHECK(resolve(dp.actions, task) == plan);
      }
    }
    CHECK(seen.size() == set.problems.size());
  }
}
