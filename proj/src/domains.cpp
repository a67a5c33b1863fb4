#include "plangen/domains.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <unistd.h>

namespace plangen::domains {

using pddl::Atom;
using pddl::ProblemDef;

pddl::GroundedTask ground(DomainKind kind, const pddl::ProblemDef &prob) {
  pddl::GroundingLimits limits;
  limits.prune_static = true;
  return pddl::ground(domain_def(kind), prob, limits);
}

std::string to_string(Split split) {
  switch (split) {
  case Split::train:
    return "train";
  case Split::valid:
    return "valid";
  case Split::test:
    return "test";
  }
  return "?";
}

namespace {

void check_range(const IntRange &r, const char *name, int lo, int hi,
                 bool override_bounds) {
  if (r.min > r.max) {
    throw UsageError(std::string(name) + ": empty range");
  }
  if (!override_bounds && (r.min < lo || r.max > hi)) {
    throw UsageError(std::string(name) + " must lie within [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  if (r.min < 0) {
    throw UsageError(std::string(name) + ": negative bound");
  }
}

std::string obj(const std::string &type, int k) {
  return type + "-" + std::to_string(k);
}

Atom atom(std::string pred, std::vector<std::string> args = {}) {
  return Atom{std::move(pred), std::move(args)};
}

bool goal_holds_initially(const ProblemDef &p) {
  std::set<Atom> init(p.init.begin(), p.init.end());
  return std::all_of(p.goal.begin(), p.goal.end(),
                     [&](const Atom &a) { return init.count(a) > 0; });
}

// --- Blocksworld -----------------------------------------------------------

using Towers = std::vector<std::vector<int>>;

Towers random_towers(int n, Rng &rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(i)] = i + 1;
  }
  rng.shuffle(order);
  Towers towers;
  for (int b : order) {
    auto k = static_cast<std::size_t>(rng.below(towers.size() + 1));
    if (k == towers.size()) {
      towers.push_back({b});
    } else {
      towers[k].push_back(b);
    }
  }
  return towers;
}

int sample_block_count(const GeneratorConfig &c, Rng &rng) {
  if (!c.log_block_distribution) {
    return static_cast<int>(rng.between(c.blocks.min, c.blocks.max));
  }
  // P(n) proportional to ln(n); n = 1 would get zero mass, so use ln(n + 1).
  std::vector<double> w;
  double total = 0;
  for (int n = c.blocks.min; n <= c.blocks.max; ++n) {
    w.push_back(std::log(static_cast<double>(n) + 1.0));
    total += w.back();
  }
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) {
      return c.blocks.min + static_cast<int>(i);
    }
    u -= w[i];
  }
  return c.blocks.max;
}

ProblemDef gen_blocksworld(const GeneratorConfig &c, Rng &rng) {
  const int n = sample_block_count(c, rng);
  ProblemDef p;
  p.domain_name = "blocksworld";
  for (int b = 1; b <= n; ++b) {
    p.objects.push_back({obj("block", b), "block"});
  }
  for (const auto &t : random_towers(n, rng)) {
    p.init.push_back(atom("ontable", {obj("block", t.front())}));
    for (std::size_t i = 1; i < t.size(); ++i) {
      p.init.push_back(
          atom("on", {obj("block", t[i]), obj("block", t[i - 1])}));
    }
    p.init.push_back(atom("clear", {obj("block", t.back())}));
  }
  p.init.push_back(atom("handempty"));
  for (const auto &t : random_towers(n, rng)) {
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (rng.bernoulli(c.goal_omit_prob)) {
        continue;
      }
      p.goal.push_back(
          atom("on", {obj("block", t[i]), obj("block", t[i - 1])}));
    }
  }
  return p;
}

// --- Logistics -------------------------------------------------------------

ProblemDef gen_logistics(const GeneratorConfig &c, Rng &rng) {
  const int cities = static_cast<int>(rng.between(c.cities.min, c.cities.max));
  const int size =
      static_cast<int>(rng.between(c.city_size.min, c.city_size.max));
  const int packages =
      static_cast<int>(rng.between(c.packages.min, c.packages.max));
  const int planes =
      static_cast<int>(rng.between(c.airplanes.min, c.airplanes.max));
  ProblemDef p;
  p.domain_name = "logistics";
  std::vector<std::string> places;
  std::vector<int> city_of_place;
  std::vector<std::vector<std::size_t>> places_of_city(
      static_cast<std::size_t>(cities));
  int next_location = 1;
  for (int ci = 1; ci <= cities; ++ci) {
    p.objects.push_back({obj("city", ci), "city"});
    p.objects.push_back({obj("truck", ci), "truck"});
    for (int k = 0; k < size; ++k) {
      std::string name = k == 0 ? obj("airport", ci)
                                : obj("location", next_location++);
      p.objects.push_back({name, k == 0 ? "airport" : "location"});
      places_of_city[static_cast<std::size_t>(ci - 1)].push_back(
          places.size());
      places.push_back(name);
      city_of_place.push_back(ci);
      p.init.push_back(atom("in-city", {name, obj("city", ci)}));
    }
  }
  for (int ci = 1; ci <= cities; ++ci) {
    const auto &ps = places_of_city[static_cast<std::size_t>(ci - 1)];
    p.init.push_back(atom("at", {obj("truck", ci),
                                 places[ps[rng.below(ps.size())]]}));
  }
  for (int a = 1; a <= planes; ++a) {
    p.objects.push_back({obj("airplane", a), "airplane"});
    int ci = static_cast<int>(rng.between(1, cities));
    p.init.push_back(atom("at", {obj("airplane", a), obj("airport", ci)}));
  }
  for (int k = 1; k <= packages; ++k) {
    p.objects.push_back({obj("package", k), "package"});
    p.init.push_back(
        atom("at", {obj("package", k), places[rng.below(places.size())]}));
    p.goal.push_back(
        atom("at", {obj("package", k), places[rng.below(places.size())]}));
  }
  return p;
}

// --- Labyrinth -------------------------------------------------------------

enum Exit : unsigned { kNorth = 1, kEast = 2, kSouth = 4, kWest = 8 };

ProblemDef gen_labyrinth(const GeneratorConfig &c, Rng &rng) {
  const int n = static_cast<int>(
      rng.between(c.labyrinth_grid.min, c.labyrinth_grid.max));
  ProblemDef p;
  p.domain_name = "labyrinth";
  for (int k = 1; k <= n; ++k) {
    p.objects.push_back({obj("gridpos", k), "gridpos"});
  }
  p.init.push_back(atom("first", {obj("gridpos", 1)}));
  p.init.push_back(atom("last", {obj("gridpos", n)}));
  for (int k = 1; k < n; ++k) {
    p.init.push_back(atom("next", {obj("gridpos", k), obj("gridpos", k + 1)}));
  }
  static const unsigned shapes[] = {kNorth | kSouth, kNorth | kEast,
                                    kNorth | kEast | kWest,
                                    kNorth | kEast | kSouth | kWest};
  const int cards = n * n;
  for (int k = 1; k <= cards; ++k) {
    std::string card = obj("card", k);
    p.objects.push_back({card, "card"});
    int x = (k - 1) % n + 1;
    int y = (k - 1) / n + 1;
    p.init.push_back(atom("card-at", {card, obj("gridpos", x),
                                      obj("gridpos", y)}));
    unsigned m = shapes[rng.below(4)];
    for (auto r = rng.below(4); r > 0; --r) {
      m = ((m << 1) | (m >> 3)) & 15u;
    }
    if (m & kNorth) {
      p.init.push_back(atom("open-north", {card}));
    }
    if (m & kEast) {
      p.init.push_back(atom("open-east", {card}));
    }
    if (m & kSouth) {
      p.init.push_back(atom("open-south", {card}));
    }
    if (m & kWest) {
      p.init.push_back(atom("open-west", {card}));
    }
  }
  p.init.push_back(atom("idle"));
  auto start = static_cast<int>(rng.between(1, cards));
  auto goal = static_cast<int>(rng.between(1, cards - 1));
  if (goal >= start) {
    ++goal;
  }
  p.init.push_back(atom("robot-on", {obj("card", start)}));
  p.goal.push_back(atom("robot-on", {obj("card", goal)}));
  return p;
}

// --- Sokoban ---------------------------------------------------------------

ProblemDef gen_sokoban(const GeneratorConfig &c, Rng &rng) {
  const int n = static_cast<int>(
      rng.between(c.sokoban_grid.min, c.sokoban_grid.max));
  const int boxes = static_cast<int>(rng.between(c.boxes.min, c.boxes.max));
  const int walls = static_cast<int>(rng.between(c.walls.min, c.walls.max));
  const int cells = n * n;
  if (walls + boxes + 1 > cells) {
    throw GenerationError("sokoban: walls and boxes leave no room");
  }
  std::vector<int> order(static_cast<std::size_t>(cells));
  for (int i = 0; i < cells; ++i) {
    order[static_cast<std::size_t>(i)] = i;
  }
  rng.shuffle(order);
  std::vector<char> wall(static_cast<std::size_t>(cells), 0);
  for (int i = 0; i < walls; ++i) {
    wall[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  }
  std::vector<int> free_cells;
  for (int i = walls; i < cells; ++i) {
    free_cells.push_back(order[static_cast<std::size_t>(i)]);
  }
  // Boxes start on their targets; reverse play (walks and pulls) then
  // scrambles them, which guarantees solvability.
  std::vector<int> box(free_cells.begin(), free_cells.begin() + boxes);
  std::vector<int> targets = box;
  int robot = free_cells[static_cast<std::size_t>(boxes) +
                         rng.below(free_cells.size() -
                                   static_cast<std::size_t>(boxes))];
  auto is_free = [&](int r, int col) {
    return r >= 0 && r < n && col >= 0 && col < n &&
           !wall[static_cast<std::size_t>(r * n + col)];
  };
  auto box_at = [&](int cell) {
    return std::find(box.begin(), box.end(), cell) - box.begin();
  };
  static const int dr[] = {-1, 1, 0, 0};
  static const int dc[] = {0, 0, -1, 1};
  const int steps = 8 * static_cast<int>(free_cells.size());
  for (int s = 0; s < steps; ++s) {
    auto d = rng.below(4);
    int r = robot / n;
    int col = robot % n;
    int nr = r + dr[d];
    int nc = col + dc[d];
    if (!is_free(nr, nc) ||
        box_at(nr * n + nc) != static_cast<std::ptrdiff_t>(box.size())) {
      continue;
    }
    int br = r - dr[d];
    int bc = col - dc[d];
    bool pull = rng.bernoulli(0.5);
    if (pull && is_free(br, bc)) {
      auto b = box_at(br * n + bc);
      if (b != static_cast<std::ptrdiff_t>(box.size())) {
        box[static_cast<std::size_t>(b)] = robot;
      }
    }
    robot = nr * n + nc;
  }
  std::sort(box.begin(), box.end());
  std::sort(targets.begin(), targets.end());
  if (box == targets) {
    throw GenerationError("sokoban: scramble left every box on a target");
  }

  ProblemDef p;
  p.domain_name = "sokoban";
  std::vector<std::string> loc_name(static_cast<std::size_t>(cells));
  int k = 0;
  for (int i = 0; i < cells; ++i) {
    if (!wall[static_cast<std::size_t>(i)]) {
      loc_name[static_cast<std::size_t>(i)] = obj("loc", ++k);
      p.objects.push_back({loc_name[static_cast<std::size_t>(i)], "loc"});
    }
  }
  for (int d = 1; d <= 4; ++d) {
    p.objects.push_back({obj("dir", d), "dir"});
  }
  for (int b = 1; b <= boxes; ++b) {
    p.objects.push_back({obj("box", b), "box"});
  }
  for (int i = 0; i < cells; ++i) {
    if (wall[static_cast<std::size_t>(i)]) {
      continue;
    }
    int r = i / n;
    int col = i % n;
    for (int d = 0; d < 4; ++d) {
      if (is_free(r + dr[d], col + dc[d])) {
        p.init.push_back(
            atom("adjacent",
                 {loc_name[static_cast<std::size_t>(i)],
                  loc_name[static_cast<std::size_t>((r + dr[d]) * n + col +
                                                    dc[d])],
                  obj("dir", d + 1)}));
      }
    }
    bool has_box = std::binary_search(box.begin(), box.end(), i);
    if (has_box) {
      p.init.push_back(atom("has-box", {loc_name[static_cast<std::size_t>(i)]}));
    } else {
      p.init.push_back(atom("clear", {loc_name[static_cast<std::size_t>(i)]}));
    }
  }
  for (std::size_t b = 0; b < box.size(); ++b) {
    p.init.push_back(atom("at", {obj("box", static_cast<int>(b) + 1),
                                 loc_name[static_cast<std::size_t>(box[b])]}));
  }
  p.init.push_back(atom("at-robot", {loc_name[static_cast<std::size_t>(robot)]}));
  for (int t : targets) {
    p.goal.push_back(atom("has-box", {loc_name[static_cast<std::size_t>(t)]}));
  }
  return p;
}

} // namespace

void GeneratorConfig::check() const {
  if (count == 0) {
    throw UsageError("count must be positive");
  }
  switch (domain) {
  case DomainKind::blocksworld:
    check_range(blocks, "blocks", 3, 25, override_bounds);
    if (blocks.min < 1) {
      throw UsageError("blocks: need at least one block");
    }
    if (goal_omit_prob < 0 || goal_omit_prob > 1) {
      throw UsageError("goal_omit_prob must be a probability");
    }
    break;
  case DomainKind::logistics:
    check_range(cities, "cities", 1, 50, override_bounds);
    check_range(city_size, "city_size", 1, 5, override_bounds);
    check_range(packages, "packages", 1, 50, override_bounds);
    check_range(airplanes, "airplanes", 1, 10, override_bounds);
    if (cities.min < 1 || city_size.min < 1) {
      throw UsageError("logistics: need at least one city and one place");
    }
    break;
  case DomainKind::labyrinth:
    check_range(labyrinth_grid, "labyrinth_grid", 3, 4, override_bounds);
    if (labyrinth_grid.min < 2) {
      throw UsageError("labyrinth_grid: need at least 2x2");
    }
    break;
  case DomainKind::sokoban:
    check_range(sokoban_grid, "sokoban_grid", 5, 14, override_bounds);
    check_range(boxes, "boxes", 1, 10, override_bounds);
    check_range(walls, "walls", 0, 10, override_bounds);
    if (boxes.min < 1) {
      throw UsageError("sokoban: need at least one box");
    }
    break;
  }
}

std::uint64_t structural_hash(const ProblemDef &prob) {
  ProblemDef c = pddl::canonical(prob);
  std::string text = "init";
  for (const auto &a : c.init) {
    text += pddl::to_string(a);
  }
  text += "goal";
  for (const auto &a : c.goal) {
    text += pddl::to_string(a);
  }
  return fnv1a(text);
}

ProblemSet generate(const GeneratorConfig &config) {
  config.check();
  ProblemSet set;
  set.domain = config.domain;
  std::unordered_set<std::uint64_t> seen;
  const std::string prefix =
      to_string(config.domain) + "-s" + std::to_string(config.seed) + "-";
  for (std::size_t i = 0; i < config.count; ++i) {
    bool done = false;
    std::string last_error;
    for (std::size_t attempt = 0; attempt < config.retries_per_instance;
         ++attempt) {
      Rng rng(derive_seed(config.seed, i, attempt));
      ProblemDef p;
      try {
        switch (config.domain) {
        case DomainKind::blocksworld:
          p = gen_blocksworld(config, rng);
          break;
        case DomainKind::logistics:
          p = gen_logistics(config, rng);
          break;
        case DomainKind::labyrinth:
          p = gen_labyrinth(config, rng);
          break;
        case DomainKind::sokoban:
          p = gen_sokoban(config, rng);
          break;
        }
      } catch (const GenerationError &e) {
        last_error = e.what();
        continue;
      }
      if (!config.allow_trivial && goal_holds_initially(p)) {
        continue;
      }
      if (!seen.insert(structural_hash(p)).second) {
        continue;
      }
      char buf[16];
      std::snprintf(buf, sizeof buf, "%06zu", i);
      p.name = prefix + buf;
      p = pddl::canonical(std::move(p));
      set.problems.push_back({p.name, std::move(p)});
      done = true;
      break;
    }
    if (!done) {
      throw GenerationError(
          "could not generate a new unique instance #" + std::to_string(i) +
          " within " + std::to_string(config.retries_per_instance) +
          " attempts" + (last_error.empty() ? "" : " (" + last_error + ")"));
    }
  }
  return set;
}

SplitSets split(const ProblemSet &set, std::size_t n_valid,
                std::size_t n_test) {
  if (n_valid + n_test > set.problems.size()) {
    throw UsageError("split sizes exceed the problem set");
  }
  SplitSets out;
  for (auto *s : {&out.train, &out.valid, &out.test}) {
    s->domain = set.domain;
  }
  out.train.split = Split::train;
  out.valid.split = Split::valid;
  out.test.split = Split::test;
  const std::size_t n_train = set.problems.size() - n_valid - n_test;
  for (std::size_t i = 0; i < set.problems.size(); ++i) {
    auto &dst = i < n_train             ? out.train
                : i < n_train + n_valid ? out.valid
                                        : out.test;
    dst.problems.push_back(set.problems[i]);
  }
  return out;
}

std::map<std::string, int> object_limits(const GeneratorConfig &c) {
  switch (c.domain) {
  case DomainKind::blocksworld:
    return {{"block", c.blocks.max}};
  case DomainKind::logistics: {
    int locations = c.cities.max * std::max(0, c.city_size.max - 1);
    return {{"airplane", c.airplanes.max}, {"airport", c.cities.max},
            {"city", c.cities.max},        {"location", locations},
            {"package", c.packages.max},   {"truck", c.cities.max}};
  }
  case DomainKind::labyrinth:
    return {{"card", c.labyrinth_grid.max * c.labyrinth_grid.max},
            {"gridpos", c.labyrinth_grid.max}};
  case DomainKind::sokoban:
    return {{"box", c.boxes.max},
            {"dir", 4},
            {"loc", c.sokoban_grid.max * c.sokoban_grid.max}};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Search

namespace {

world::Plan extract(const std::vector<std::int64_t> &parent,
                    const std::vector<ActionId> &via, std::size_t node,
                    const pddl::GroundedTask &task) {
  world::Plan plan;
  plan.problem_id = task.problem_name;
  while (parent[node] >= 0) {
    plan.actions.push_back(via[node]);
    node = static_cast<std::size_t>(parent[node]);
  }
  std::reverse(plan.actions.begin(), plan.actions.end());
  return plan;
}

} // namespace

std::optional<world::Plan> bfs_oracle(const pddl::GroundedTask &task,
                                      std::size_t node_budget) {
  world::SuccessorGenerator succ(task);
  std::vector<State> states;
  std::vector<std::int64_t> parent;
  std::vector<ActionId> via;
  std::unordered_map<State, std::size_t, StateHash> index;
  states.push_back(task.init);
  parent.push_back(-1);
  via.push_back(0);
  index.emplace(task.init, 0);
  if (world::satisfies(task.init, task.goal)) {
    return extract(parent, via, 0, task);
  }
  std::vector<ActionId> apps;
  for (std::size_t head = 0; head < states.size(); ++head) {
    apps = succ.applicable_actions(states[head]);
    for (ActionId a : apps) {
      State next = states[head];
      world::apply_unchecked(next, task.actions[a]);
      if (index.count(next)) {
        continue;
      }
      if (states.size() >= node_budget) {
        return std::nullopt;
      }
      index.emplace(next, states.size());
      parent.push_back(static_cast<std::int64_t>(head));
      via.push_back(a);
      const bool goal = world::satisfies(next, task.goal);
      states.push_back(std::move(next));
      if (goal) {
        return extract(parent, via, states.size() - 1, task);
      }
    }
  }
  return std::nullopt;
}

std::optional<world::Plan> greedy_best_first(const pddl::GroundedTask &task,
                                             std::size_t node_budget) {
  world::SuccessorGenerator succ(task);
  const auto goal_atoms = task.goal.atoms();
  auto h = [&](const State &s) {
    std::size_t missing = 0;
    for (AtomId g : goal_atoms) {
      missing += s.test(g) ? 0 : 1;
    }
    return missing;
  };
  std::vector<State> states;
  std::vector<std::int64_t> parent;
  std::vector<ActionId> via;
  std::unordered_map<State, std::size_t, StateHash> index;
  using Entry = std::pair<std::size_t, std::size_t>; // (h, node)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  states.push_back(task.init);
  parent.push_back(-1);
  via.push_back(0);
  index.emplace(task.init, 0);
  open.push({h(task.init), 0});
  std::vector<ActionId> apps;
  while (!open.empty()) {
    auto [hv, node] = open.top();
    open.pop();
    if (hv == 0) {
      return extract(parent, via, node, task);
    }
    apps = succ.applicable_actions(states[node]);
    for (ActionId a : apps) {
      State next = states[node];
      world::apply_unchecked(next, task.actions[a]);
      if (index.count(next)) {
        continue;
      }
      if (states.size() >= node_budget) {
        return std::nullopt;
      }
      index.emplace(next, states.size());
      parent.push_back(static_cast<std::int64_t>(node));
      via.push_back(a);
      open.push({h(next), states.size()});
      states.push_back(std::move(next));
    }
  }
  return std::nullopt;
}

namespace {

// Tower-preserving two-phase strategy: move every block that is not in its
// final position to the table, then build the goal towers bottom-up.
std::optional<std::vector<std::string>>
solve_blocksworld(const ProblemDef &p) {
  std::map<std::string, std::string> below; // block -> block or "" (table)
  std::map<std::string, std::string> goal_below;
  std::set<std::string> goal_table;
  std::vector<std::string> blocks;
  for (const auto &o : p.objects) {
    blocks.push_back(o.name);
  }
  for (const auto &a : p.init) {
    if (a.predicate == "on") {
      below[a.args[0]] = a.args[1];
    } else if (a.predicate == "ontable") {
      below[a.args[0]] = "";
    } else if (a.predicate == "holding") {
      return std::nullopt;
    }
  }
  std::map<std::string, std::string> goal_above; // support -> block
  for (const auto &a : p.goal) {
    if (a.predicate == "on") {
      goal_below[a.args[0]] = a.args[1];
      goal_above[a.args[1]] = a.args[0];
    } else if (a.predicate == "ontable") {
      goal_table.insert(a.args[0]);
    } else if (a.predicate != "clear" && a.predicate != "handempty") {
      return std::nullopt;
    }
  }
  std::map<std::string, bool> memo;
  std::function<bool(const std::string &)> final_pos =
      [&](const std::string &x) -> bool {
    if (auto it = memo.find(x); it != memo.end()) {
      return it->second;
    }
    const std::string &b = below.at(x);
    bool ok;
    if (auto g = goal_below.find(x); g != goal_below.end()) {
      ok = b == g->second;
    } else if (goal_table.count(x)) {
      ok = b.empty();
    } else {
      ok = true;
    }
    if (ok && !b.empty()) {
      auto ga = goal_above.find(b);
      ok = final_pos(b) && (ga == goal_above.end() || ga->second == x);
    }
    memo[x] = ok;
    return ok;
  };
  std::set<std::string> fixed;
  for (const auto &b : blocks) {
    if (final_pos(b)) {
      fixed.insert(b);
    }
  }
  std::vector<std::string> plan;
  auto clear = [&](const std::string &x) {
    return std::none_of(below.begin(), below.end(),
                        [&](const auto &kv) { return kv.second == x; });
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto &b : blocks) {
      if (!fixed.count(b) && !below[b].empty() && clear(b)) {
        plan.push_back("(unstack " + b + " " + below[b] + ")");
        plan.push_back("(putdown " + b + ")");
        below[b] = "";
        changed = true;
      }
    }
  }
  for (const auto &b : blocks) {
    if (!fixed.count(b) && !goal_below.count(b)) {
      fixed.insert(b); // on the table with no support goal
    }
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto &b : blocks) {
      auto g = goal_below.find(b);
      if (fixed.count(b) || g == goal_below.end()) {
        continue;
      }
      if (fixed.count(g->second) && clear(g->second) && clear(b)) {
        plan.push_back("(pickup " + b + ")");
        plan.push_back("(stack " + b + " " + g->second + ")");
        below[b] = g->second;
        fixed.insert(b);
        changed = true;
      }
    }
  }
  return plan;
}

// Routes each package on its own: truck to the airport, plane between
// airports, truck to the destination.
std::optional<std::vector<std::string>> solve_logistics(const ProblemDef &p) {
  std::map<std::string, std::string> type_of;
  for (const auto &o : p.objects) {
    type_of[o.name] = o.type;
  }
  std::map<std::string, std::string> city_of; // place -> city
  std::map<std::string, std::string> at;
  for (const auto &a : p.init) {
    if (a.predicate == "in-city") {
      city_of[a.args[0]] = a.args[1];
    } else if (a.predicate == "at") {
      at[a.args[0]] = a.args[1];
    } else if (a.predicate == "in") {
      return std::nullopt;
    }
  }
  std::map<std::string, std::string> airport_of, truck_of; // city -> x
  for (const auto &[place, city] : city_of) {
    if (type_of[place] == "airport" && !airport_of.count(city)) {
      airport_of[city] = place;
    }
  }
  std::vector<std::string> planes;
  for (const auto &[o, loc] : at) {
    if (type_of[o] == "truck" && !truck_of.count(city_of[loc])) {
      truck_of[city_of[loc]] = o;
    } else if (type_of[o] == "airplane") {
      planes.push_back(o);
    }
  }
  std::vector<std::string> plan;
  auto drive = [&](const std::string &truck, const std::string &to) {
    if (at[truck] != to) {
      plan.push_back("(drive-truck " + truck + " " + at[truck] + " " + to +
                     " " + city_of[to] + ")");
      at[truck] = to;
    }
  };
  auto by_truck = [&](const std::string &pkg, const std::string &from,
                      const std::string &to) -> bool {
    if (from == to) {
      return true;
    }
    auto t = truck_of.find(city_of[from]);
    if (t == truck_of.end()) {
      return false;
    }
    drive(t->second, from);
    plan.push_back("(load-truck " + pkg + " " + t->second + " " + from + ")");
    drive(t->second, to);
    plan.push_back("(unload-truck " + pkg + " " + t->second + " " + to + ")");
    at[pkg] = to;
    return true;
  };
  for (const auto &g : p.goal) {
    if (g.predicate != "at") {
      return std::nullopt;
    }
    const std::string &pkg = g.args[0];
    const std::string &dst = g.args[1];
    const std::string src = at[pkg];
    if (src == dst) {
      continue;
    }
    const std::string &c_src = city_of[src];
    const std::string &c_dst = city_of[dst];
    if (c_src == c_dst) {
      if (!by_truck(pkg, src, dst)) {
        return std::nullopt;
      }
      continue;
    }
    if (!airport_of.count(c_src) || !airport_of.count(c_dst) ||
        planes.empty()) {
      return std::nullopt;
    }
    const std::string a_src = airport_of[c_src];
    const std::string a_dst = airport_of[c_dst];
    if (!by_truck(pkg, src, a_src)) {
      return std::nullopt;
    }
    std::string plane = planes.front();
    for (const auto &pl : planes) {
      if (at[pl] == a_src) {
        plane = pl;
        break;
      }
    }
    if (at[plane] != a_src) {
      plan.push_back("(fly-airplane " + plane + " " + at[plane] + " " +
                     a_src + ")");
      at[plane] = a_src;
    }
    plan.push_back("(load-airplane " + pkg + " " + plane + " " + a_src + ")");
    plan.push_back("(fly-airplane " + plane + " " + a_src + " " + a_dst + ")");
    at[plane] = a_dst;
    plan.push_back("(unload-airplane " + pkg + " " + plane + " " + a_dst +
                   ")");
    at[pkg] = a_dst;
    if (!by_truck(pkg, a_dst, dst)) {
      return std::nullopt;
    }
  }
  return plan;
}

std::optional<world::Plan> solve_external(const pddl::ProblemDef &prob,
                                          const pddl::GroundedTask &task,
                                          DomainKind kind,
                                          const std::string &command) {
  if (command.empty()) {
    throw SolverError("external strategy requires a command template");
  }
  static int counter = 0;
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() /
                 ("plangen-" + std::to_string(::getpid()) + "-" +
                  std::to_string(counter++));
  fs::create_directories(dir);
  const fs::path dom = dir / "domain.pddl";
  const fs::path prb = dir / "problem.pddl";
  const fs::path out = dir / "plan.txt";
  write_file_atomic(dom, domain_pddl(kind));
  write_file_atomic(prb, pddl::to_pddl(prob));
  std::string cmd = command;
  auto replace = [&](const std::string &key, const std::string &value) {
    for (auto pos = cmd.find(key); pos != std::string::npos;
         pos = cmd.find(key, pos + value.size())) {
      cmd.replace(pos, key.size(), value);
    }
  };
  replace("{domain}", dom.string());
  replace("{problem}", prb.string());
  replace("{plan-out}", out.string());
  int rc = std::system(cmd.c_str());
  if (rc != 0 || !fs::exists(out)) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    throw SolverError("external planner failed (exit status " +
                      std::to_string(rc) + "): " + cmd);
  }
  std::string text = read_file(out);
  std::error_code ec;
  fs::remove_all(dir, ec);
  try {
    return world::parse_plan_text(task, text);
  } catch (const world::PlanSyntaxError &e) {
    throw SolverError(std::string("external planner produced a bad plan: ") +
                      e.what());
  }
}

} // namespace

std::optional<world::Plan> baseline_solve(DomainKind kind,
                                          const pddl::ProblemDef &prob,
                                          const pddl::GroundedTask &task,
                                          const SolveOptions &options) {
  std::optional<world::Plan> plan;
  if (options.strategy == SolveStrategy::external) {
    plan = solve_external(prob, task, kind, options.external_command);
  } else if (world::satisfies(task.init, task.goal)) {
    plan = world::Plan{{}, task.problem_name};
  } else {
    std::optional<std::vector<std::string>> lines;
    switch (kind) {
    case DomainKind::blocksworld:
      lines = solve_blocksworld(prob);
      break;
    case DomainKind::logistics:
      lines = solve_logistics(prob);
      break;
    case DomainKind::labyrinth:
    case DomainKind::sokoban:
      plan = greedy_best_first(task, options.node_budget);
      break;
    }
    if (lines) {
      plan = world::plan_from_strings(task, *lines);
    }
  }
  if (!plan) {
    return std::nullopt;
  }
  plan->problem_id = task.problem_name;
  auto compiled = world::validate(task, *plan);
  if (!compiled.valid || !compiled.goal_reached) {
    if (options.strategy == SolveStrategy::external) {
      throw SolverError("external planner returned an invalid plan");
    }
    return std::nullopt;
  }
  return plan;
}

std::vector<DatasetRecord> label(const ProblemSet &set,
                                 const LabelOptions &options) {
  std::vector<DatasetRecord> out;
  for (const auto &entry : set.problems) {
    auto task = ground(set.domain, entry.problem);
    auto plan = baseline_solve(set.domain, entry.problem, task, options.solve);
    if (!plan) {
      continue;
    }
    DatasetRecord rec;
    rec.id = entry.id;
    rec.domain = to_string(set.domain);
    rec.problem_pddl = pddl::to_pddl(entry.problem);
    rec.plan = world::plan_to_strings(task, *plan);
    rec.plan_source = options.plan_source;
    if (options.oracle_budget > 0) {
      if (auto opt = bfs_oracle(task, options.oracle_budget)) {
        rec.optimal_length = static_cast<int>(opt->length());
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

pddl::ProblemDef problem_of(const DatasetRecord &rec) {
  const auto &dom = domain_def(domain_from_string(rec.domain));
  return pddl::parse_problem(rec.problem_pddl, dom, rec.id);
}

} // namespace plangen::domains
