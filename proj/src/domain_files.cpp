#include "plangen/domains.hpp"

namespace plangen::domains {

namespace {

const std::string kBlocksworld = R"((define (domain blocksworld)
  (:requirements :strips :typing)
  (:types block)
  (:predicates
    (clear ?x - block)
    (ontable ?x - block)
    (handempty)
    (holding ?x - block)
    (on ?x - block ?y - block))

  (:action pickup
    :parameters (?x - block)
    :precondition (and (clear ?x) (ontable ?x) (handempty))
    :effect (and (holding ?x)
                 (not (ontable ?x)) (not (clear ?x)) (not (handempty))))

  (:action putdown
    :parameters (?x - block)
    :precondition (holding ?x)
    :effect (and (ontable ?x) (clear ?x) (handempty) (not (holding ?x))))

  (:action stack
    :parameters (?x - block ?y - block)
    :precondition (and (holding ?x) (clear ?y))
    :effect (and (on ?x ?y) (clear ?x) (handempty)
                 (not (holding ?x)) (not (clear ?y))))

  (:action unstack
    :parameters (?x - block ?y - block)
    :precondition (and (on ?x ?y) (clear ?x) (handempty))
    :effect (and (holding ?x) (clear ?y)
                 (not (on ?x ?y)) (not (clear ?x)) (not (handempty)))))
)";

const std::string kLogistics = R"((define (domain logistics)
  (:requirements :strips :typing)
  (:types truck airplane - vehicle
          package vehicle - physobj
          airport location - place
          city place physobj - object)
  (:predicates
    (in-city ?loc - place ?city - city)
    (at ?obj - physobj ?loc - place)
    (in ?pkg - package ?veh - vehicle))

  (:action load-truck
    :parameters (?pkg - package ?truck - truck ?loc - place)
    :precondition (and (at ?truck ?loc) (at ?pkg ?loc))
    :effect (and (not (at ?pkg ?loc)) (in ?pkg ?truck)))

  (:action load-airplane
    :parameters (?pkg - package ?airplane - airplane ?loc - place)
    :precondition (and (at ?pkg ?loc) (at ?airplane ?loc))
    :effect (and (not (at ?pkg ?loc)) (in ?pkg ?airplane)))

  (:action unload-truck
    :parameters (?pkg - package ?truck - truck ?loc - place)
    :precondition (and (at ?truck ?loc) (in ?pkg ?truck))
    :effect (and (not (in ?pkg ?truck)) (at ?pkg ?loc)))

  (:action unload-airplane
    :parameters (?pkg - package ?airplane - airplane ?loc - place)
    :precondition (and (in ?pkg ?airplane) (at ?airplane ?loc))
    :effect (and (not (in ?pkg ?airplane)) (at ?pkg ?loc)))

  (:action drive-truck
    :parameters (?truck - truck ?loc-from - place ?loc-to - place ?city - city)
    :precondition (and (at ?truck ?loc-from) (in-city ?loc-from ?city)
                       (in-city ?loc-to ?city))
    :effect (and (not (at ?truck ?loc-from)) (at ?truck ?loc-to)))

  (:action fly-airplane
    :parameters (?airplane - airplane ?loc-from - airport ?loc-to - airport)
    :precondition (at ?airplane ?loc-from)
    :effect (and (not (at ?airplane ?loc-from)) (at ?airplane ?loc-to))))
)";

// Cards carry exits; the robot walks between adjacent cards with matching
// exits and rides along when its card is shifted. Shifting a row or column
// cyclically is a begin / step* / end sequence that moves one card per
// action through a gap.
const std::string kLabyrinth = R"((define (domain labyrinth)
  (:requirements :strips :typing :action-costs)
  (:types card gridpos)
  (:predicates
    (card-at ?c - card ?x - gridpos ?y - gridpos)
    (robot-on ?c - card)
    (open-north ?c - card)
    (open-south ?c - card)
    (open-east ?c - card)
    (open-west ?c - card)
    (next ?a - gridpos ?b - gridpos)
    (first ?p - gridpos)
    (last ?p - gridpos)
    (idle)
    (held ?c - card)
    (gap-west ?x - gridpos ?y - gridpos)
    (gap-east ?x - gridpos ?y - gridpos)
    (gap-north ?x - gridpos ?y - gridpos)
    (gap-south ?x - gridpos ?y - gridpos))
  (:functions (total-cost) - number)

  (:action move-north
    :parameters (?from - card ?to - card ?x - gridpos ?y - gridpos ?y2 - gridpos)
    :precondition (and (idle) (robot-on ?from) (card-at ?from ?x ?y)
                       (card-at ?to ?x ?y2) (next ?y2 ?y)
                       (open-north ?from) (open-south ?to))
    :effect (and (robot-on ?to) (not (robot-on ?from))
                 (increase (total-cost) 1)))

  (:action move-south
    :parameters (?from - card ?to - card ?x - gridpos ?y - gridpos ?y2 - gridpos)
    :precondition (and (idle) (robot-on ?from) (card-at ?from ?x ?y)
                       (card-at ?to ?x ?y2) (next ?y ?y2)
                       (open-south ?from) (open-north ?to))
    :effect (and (robot-on ?to) (not (robot-on ?from))
                 (increase (total-cost) 1)))

  (:action move-east
    :parameters (?from - card ?to - card ?x - gridpos ?y - gridpos ?x2 - gridpos)
    :precondition (and (idle) (robot-on ?from) (card-at ?from ?x ?y)
                       (card-at ?to ?x2 ?y) (next ?x ?x2)
                       (open-east ?from) (open-west ?to))
    :effect (and (robot-on ?to) (not (robot-on ?from))
                 (increase (total-cost) 1)))

  (:action move-west
    :parameters (?from - card ?to - card ?x - gridpos ?y - gridpos ?x2 - gridpos)
    :precondition (and (idle) (robot-on ?from) (card-at ?from ?x ?y)
                       (card-at ?to ?x2 ?y) (next ?x2 ?x)
                       (open-west ?from) (open-east ?to))
    :effect (and (robot-on ?to) (not (robot-on ?from))
                 (increase (total-cost) 1)))

  (:action begin-shift-west
    :parameters (?c - card ?x - gridpos ?y - gridpos)
    :precondition (and (idle) (first ?x) (card-at ?c ?x ?y))
    :effect (and (held ?c) (gap-west ?x ?y)
                 (not (idle)) (not (card-at ?c ?x ?y))
                 (increase (total-cost) 1)))

  (:action shift-west
    :parameters (?c - card ?x - gridpos ?x2 - gridpos ?y - gridpos)
    :precondition (and (gap-west ?x ?y) (next ?x ?x2) (card-at ?c ?x2 ?y))
    :effect (and (card-at ?c ?x ?y) (gap-west ?x2 ?y)
                 (not (gap-west ?x ?y)) (not (card-at ?c ?x2 ?y))
                 (increase (total-cost) 1)))

  (:action end-shift-west
    :parameters (?c - card ?x - gridpos ?y - gridpos)
    :precondition (and (gap-west ?x ?y) (last ?x) (held ?c))
    :effect (and (card-at ?c ?x ?y) (idle)
                 (not (gap-west ?x ?y)) (not (held ?c))
                 (increase (total-cost) 1)))

  (:action begin-shift-east
    :parameters (?c - card ?x - gridpos ?y - gridpos)
    :precondition (and (idle) (last ?x) (card-at ?c ?x ?y))
    :effect (and (held ?c) (gap-east ?x ?y)
                 (not (idle)) (not (card-at ?c ?x ?y))
                 (increase (total-cost) 1)))

  (:action shift-east
    :parameters (?c - card ?x - gridpos ?x2 - gridpos ?y - gridpos)
    :precondition (and (gap-east ?x2 ?y) (next ?x ?x2) (card-at ?c ?x ?y))
    :effect (and (card-at ?c ?x2 ?y) (gap-east ?x ?y)
                 (not (gap-east ?x2 ?y)) (not (card-at ?c ?x ?y))
                 (increase (total-cost) 1)))

  (:action end-shift-east
    :parameters (?c - card ?x - gridpos ?y - gridpos)
    :precondition (and (gap-east ?x ?y) (first ?x) (held ?c))
    :effect (and (card-at ?c ?x ?y) (idle)
                 (not (gap-east ?x ?y)) (not (held ?c))
                 (increase (total-cost) 1)))

  (:action begin-shift-north
    :parameters (?c - card ?x - gridpos ?y - gridpos)
    :precondition (and (idle) (first ?y) (card-at ?c ?x ?y))
    :effect (and (held ?c) (gap-north ?x ?y)
                 (not (idle)) (not (card-at ?c ?x ?y))
                 (increase (total-cost) 1)))

  (:action shift-north
    :parameters (?c - card ?x - gridpos ?y - gridpos ?y2 - gridpos)
    :precondition (and (gap-north ?x ?y) (next ?y ?y2) (card-at ?c ?x ?y2))
    :effect (and (card-at ?c ?x ?y) (gap-north ?x ?y2)
                 (not (gap-north ?x ?y)) (not (card-at ?c ?x ?y2))
                 (increase (total-cost) 1)))

  (:action end-shift-north
    :parameters (?c - card ?x - gridpos ?y - gridpos)
    :precondition (and (gap-north ?x ?y) (last ?y) (held ?c))
    :effect (and (card-at ?c ?x ?y) (idle)
                 (not (gap-north ?x ?y)) (not (held ?c))
                 (increase (total-cost) 1)))

  (:action begin-shift-south
    :parameters (?c - card ?x - gridpos ?y - gridpos)
    :precondition (and (idle) (last ?y) (card-at ?c ?x ?y))
    :effect (and (held ?c) (gap-south ?x ?y)
                 (not (idle)) (not (card-at ?c ?x ?y))
                 (increase (total-cost) 1)))

  (:action shift-south
    :parameters (?c - card ?x - gridpos ?y - gridpos ?y2 - gridpos)
    :precondition (and (gap-south ?x ?y2) (next ?y ?y2) (card-at ?c ?x ?y))
    :effect (and (card-at ?c ?x ?y2) (gap-south ?x ?y)
                 (not (gap-south ?x ?y2)) (not (card-at ?c ?x ?y))
                 (increase (total-cost) 1)))

  (:action end-shift-south
    :parameters (?c - card ?x - gridpos ?y - gridpos)
    :precondition (and (gap-south ?x ?y) (first ?y) (held ?c))
    :effect (and (card-at ?c ?x ?y) (idle)
                 (not (gap-south ?x ?y)) (not (held ?c))
                 (increase (total-cost) 1))))
)";

// Goals name target cells through has-box instead of box identities.
const std::string kSokoban = R"((define (domain sokoban)
  (:requirements :strips :typing)
  (:types loc dir box)
  (:predicates
    (at-robot ?l - loc)
    (at ?o - box ?l - loc)
    (adjacent ?l1 - loc ?l2 - loc ?d - dir)
    (clear ?l - loc)
    (has-box ?l - loc))

  (:action move
    :parameters (?from - loc ?to - loc ?dir - dir)
    :precondition (and (clear ?to) (at-robot ?from) (adjacent ?from ?to ?dir))
    :effect (and (at-robot ?to) (not (at-robot ?from))))

  (:action push
    :parameters (?rloc - loc ?bloc - loc ?floc - loc ?dir - dir ?b - box)
    :precondition (and (at-robot ?rloc) (at ?b ?bloc) (clear ?floc)
                       (adjacent ?rloc ?bloc ?dir) (adjacent ?bloc ?floc ?dir))
    :effect (and (at-robot ?bloc) (at ?b ?floc) (clear ?bloc) (has-box ?floc)
                 (not (at-robot ?rloc)) (not (at ?b ?bloc))
                 (not (clear ?floc)) (not (has-box ?bloc)))))
)";

} // namespace

const std::string &domain_pddl(DomainKind kind) {
  switch (kind) {
  case DomainKind::blocksworld:
    return kBlocksworld;
  case DomainKind::logistics:
    return kLogistics;
  case DomainKind::labyrinth:
    return kLabyrinth;
  case DomainKind::sokoban:
    return kSokoban;
  }
  throw UsageError("unknown domain kind");
}

const pddl::DomainDef &domain_def(DomainKind kind) {
  static const pddl::DomainDef defs[] = {
      pddl::parse_domain(kBlocksworld, "blocksworld.pddl"),
      pddl::parse_domain(kLogistics, "logistics.pddl"),
      pddl::parse_domain(kLabyrinth, "labyrinth.pddl"),
      pddl::parse_domain(kSokoban, "sokoban.pddl"),
  };
  return defs[static_cast<int>(kind)];
}

std::string to_string(DomainKind kind) {
  switch (kind) {
  case DomainKind::blocksworld:
    return "blocksworld";
  case DomainKind::logistics:
    return "logistics";
  case DomainKind::labyrinth:
    return "labyrinth";
  case DomainKind::sokoban:
    return "sokoban";
  }
  return "?";
}

DomainKind domain_from_string(std::string_view name) {
  for (auto k : {DomainKind::blocksworld, DomainKind::logistics,
                 DomainKind::labyrinth, DomainKind::sokoban}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw UsageError("unknown domain '" + std::string(name) + "'");
}

} // namespace plangen::domains
