#include "doctest.h"

#include <set>
#include <string>
#include <vector>

#include "roadwarn/narsese.hpp"
#include "roadwarn/rng.hpp"

using namespace roadwarn;
using namespace roadwarn::narsese;

TEST_SUITE_BEGIN("narsese");

TEST_CASE("present-tense inheritance event") {
  const Task t = parse_task("<{obj12} --> car>. :|:");
  CHECK(t.punctuation == Punctuation::kJudgment);
  CHECK(t.tense == Tense::kPresent);
  REQUIRE(t.term->type() == TermType::kStatement);
  CHECK(t.term->copula() == Copula::kInheritance);
  CHECK(t.term->subject()->type() == TermType::kExtSet);
  CHECK(t.term->subject()->args()[0]->name() == "obj12");
  CHECK(t.term->predicate()->type() == TermType::kAtom);
  CHECK(t.term->predicate()->name() == "car");
  REQUIRE(t.truth.has_value());
  CHECK(t.truth->f == doctest::Approx(1.0));
  CHECK(t.truth->c == doctest::Approx(0.9));
}

TEST_CASE("negated-inheritance goal") {
  const Task t = parse_task("(--,<{SELF} --> [crash])!");
  CHECK(t.punctuation == Punctuation::kGoal);
  CHECK(t.tense == Tense::kEternal);
  REQUIRE(t.term->type() == TermType::kNegation);
  const TermPtr& inner = t.term->inner();
  REQUIRE(inner->type() == TermType::kStatement);
  CHECK(inner->subject()->str() == "{SELF}");
  CHECK(inner->predicate()->str() == "[crash]");
}

TEST_CASE("background rule with sequence, operation call and variable") {
  const Task t = parse_task(
      "<(<#1 --> ([approaching] & car)> &/ <(*,{SELF}) --> ^alert>) => "
      "(--,<{SELF} --> [crash])>.");
  REQUIRE(t.term->is_statement(Copula::kImplication));
  const TermPtr& antecedent = t.term->subject();
  REQUIRE(antecedent->type() == TermType::kSequence);
  REQUIRE(antecedent->args().size() == 2);
  const TermPtr& cond = antecedent->args()[0];
  CHECK(cond->subject()->type() == TermType::kVariable);
  CHECK(cond->predicate()->type() == TermType::kIntersection);
  const TermPtr& op_call = antecedent->args()[1];
  CHECK(op_call->predicate()->type() == TermType::kOperation);
  CHECK(op_call->predicate()->name() == "alert");
  CHECK(op_call->subject()->type() == TermType::kProduct);
}

TEST_CASE("explicit truth annotation") {
  const Task t = parse_task("<{obj1} --> [weaving]>. %0.75;0.60%");
  REQUIRE(t.truth.has_value());
  CHECK(t.truth->f == doctest::Approx(0.75));
  CHECK(t.truth->c == doctest::Approx(0.60));
}

TEST_CASE("questions carry no truth") {
  const Task t = parse_task("<{obj1} --> car>?");
  CHECK(t.punctuation == Punctuation::kQuestion);
  CHECK_FALSE(t.truth.has_value());
}

TEST_CASE("syntax errors carry a column") {
  // missing closing delimiter / unknown copula
  CHECK_THROWS_AS(parse_task("<<#1 --> ([approaching] & car)> =|> x"), ParseError);
  try {
    parse_task("<<#1 --> ([approaching] & car)> =|> x");
  } catch (const ParseError& e) {
    CHECK(e.column() > 0);
    CHECK(std::string(e.what()).find("column") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_task("<{obj1} --> car>"), ParseError);   // missing punctuation
  CHECK_THROWS_AS(parse_task("<{obj1} -> car>."), ParseError);   // bad copula
  CHECK_THROWS_AS(parse_task("(a &/ b & c)."), ParseError);      // mixed connectors
  CHECK_THROWS_AS(parse_task("car. extra"), ParseError);         // trailing junk
  CHECK_THROWS_AS(parse_task("{} --> x."), ParseError);          // empty set
}

TEST_CASE("comments are stripped") {
  const Task t = parse_task("<{obj12} --> car>. :|: // detected object obj12 is a car");
  CHECK(t.term->str() == "<{obj12} --> car>");
}

TEST_CASE("canonical formatting makes defaults explicit") {
  const Task t = parse_task("car.");
  CHECK(format_task(t) == "car. %1.00;0.90%");
}

TEST_CASE("intersection argument order is canonical") {
  const TermPtr a = parse_term_text("(car & [approaching])");
  const TermPtr b = parse_term_text("([approaching] & car)");
  CHECK(a->equals(*b));
  CHECK(a->str() == "([approaching] & car)");
  // nested intersections flatten
  const TermPtr c = parse_term_text("((a & b) & c)");
  CHECK(c->str() == "(a & b & c)");
  // duplicates collapse
  const TermPtr d = parse_term_text("(a & a)");
  CHECK(d->str() == "a");
}

TEST_CASE("figure-style lines round-trip") {
  const std::vector<std::string> lines = {
      "<(<#1 --> ([approaching] & car)> &/ <(*,{SELF}) --> ^alert>) => "
      "(--,<{SELF} --> [crash])>.",
      "<{obj12} --> car>. :|:",
      "<{obj12} --> [approaching]>. :|:",
      "<{obj12} --> ([approaching] & car)>. :|:",
      "(--,<{SELF} --> [crash])!",
  };
  for (const std::string& line : lines) {
    const Task t = parse_task(line);
    const Task again = parse_task(format_task(t));
    CHECK(again.term->equals(*t.term));
    CHECK(again.punctuation == t.punctuation);
    CHECK(again.tense == t.tense);
    if (t.truth) {
      CHECK(again.truth->f == doctest::Approx(t.truth->f));
      CHECK(again.truth->c == doctest::Approx(t.truth->c));
    }
  }
}

TEST_CASE("variable matching binds sub-terms") {
  const TermPtr pattern = parse_term_text("<#1 --> car>");
  const TermPtr ground = parse_term_text("<{obj12} --> car>");
  const auto sub = term_matches(pattern, ground);
  REQUIRE(sub.has_value());
  REQUIRE(sub->size() == 1);
  CHECK(sub->front().first->str() == "#1");
  CHECK(sub->front().second->str() == "{obj12}");
  CHECK(apply_substitution(pattern, *sub)->equals(*ground));
}

TEST_CASE("matching without variables is exact") {
  const TermPtr t = parse_term_text("<{obj12} --> car>");
  const auto sub = term_matches(t, t);
  REQUIRE(sub.has_value());
  CHECK(sub->empty());
}

TEST_CASE("predicate mismatch yields no unifier") {
  const auto sub = term_matches(parse_term_text("<#1 --> car>"),
                                parse_term_text("<{obj12} --> pedestrian>"));
  CHECK_FALSE(sub.has_value());
}

TEST_CASE("repeated variables must bind consistently") {
  const TermPtr pattern = parse_term_text("<(*,#1,#1) --> ^ping>");
  CHECK(term_matches(pattern, parse_term_text("<(*,a,a) --> ^ping>")).has_value());
  CHECK_FALSE(term_matches(pattern, parse_term_text("<(*,a,b) --> ^ping>")).has_value());
}

// ---------------------------------------------------------------------------
// property: parse(format(t)) == t over random well-formed tasks

namespace {

TermPtr random_term(Rng& rng, int depth) {
  const char* atoms[] = {"car", "pedestrian", "obj1", "obj12", "SELF", "x", "road_9"};
  const int variant = depth <= 0 ? rng.uniform_int(0, 1) : rng.uniform_int(0, 9);
  switch (variant) {
    case 0:
    case 1:
      return Term::atom(atoms[rng.uniform_int(0, 6)]);
    case 2:
      return Term::variable(rng.uniform_int(0, 1) == 0 ? VarKind::kDependent
                                                       : VarKind::kIndependent,
                            std::to_string(rng.uniform_int(1, 3)));
    case 3:
      return Term::ext_set({random_term(rng, depth - 1)});
    case 4:
      return Term::int_set({random_term(rng, depth - 1)});
    case 5: {
      std::vector<TermPtr> args;
      const int n = rng.uniform_int(2, 3);
      for (int i = 0; i < n; ++i) args.push_back(random_term(rng, depth - 1));
      return Term::intersection(std::move(args));
    }
    case 6: {
      std::vector<TermPtr> args;
      const int n = rng.uniform_int(2, 3);
      for (int i = 0; i < n; ++i) args.push_back(random_term(rng, depth - 1));
      return Term::sequence(std::move(args));
    }
    case 7: {
      std::vector<TermPtr> args;
      const int n = rng.uniform_int(1, 3);
      for (int i = 0; i < n; ++i) args.push_back(random_term(rng, depth - 1));
      return Term::product(std::move(args));
    }
    case 8:
      return Term::negation(random_term(rng, depth - 1));
    default:
      return Term::statement(random_term(rng, depth - 1),
                             rng.uniform_int(0, 1) == 0 ? Copula::kInheritance
                                                        : Copula::kImplication,
                             random_term(rng, depth - 1));
  }
}

Task random_task(Rng& rng) {
  Task t;
  t.term = random_term(rng, 4);
  const int p = rng.uniform_int(0, 2);
  t.punctuation = p == 0 ? Punctuation::kJudgment
                         : (p == 1 ? Punctuation::kGoal : Punctuation::kQuestion);
  t.tense = rng.uniform_int(0, 1) == 0 ? Tense::kEternal : Tense::kPresent;
  if (t.punctuation != Punctuation::kQuestion) {
    // truth values on the printed 0.01 grid
    t.truth = TruthValue{rng.uniform_int(0, 100) / 100.0, rng.uniform_int(0, 99) / 100.0};
  }
  return t;
}

}  // namespace

TEST_CASE("property: round-trip over 10000 random tasks") {
  Rng rng(20240811);
  for (int i = 0; i < 10000; ++i) {
    const Task t = random_task(rng);
    const std::string text = format_task(t);
    Task back;
    REQUIRE_NOTHROW(back = parse_task(text));
    CHECK(back.term->equals(*t.term));
    CHECK(back.punctuation == t.punctuation);
    CHECK(back.tense == t.tense);
    CHECK(back.truth.has_value() == t.truth.has_value());
    if (t.truth) {
      CHECK(back.truth->f == doctest::Approx(t.truth->f).epsilon(1e-9));
      CHECK(back.truth->c == doctest::Approx(t.truth->c).epsilon(1e-9));
    }
  }
}

TEST_CASE("property: malformed inputs fail with a located error, never abort") {
  Rng rng(7);
  const std::string alphabet = "<>{}[]()&/*-^#$%;.!?abc123 ";
  for (int i = 0; i < 2000; ++i) {
    std::string junk;
    const int len = rng.uniform_int(1, 24);
    for (int k = 0; k < len; ++k) {
      junk += alphabet[static_cast<std::size_t>(rng.uniform_int(0, alphabet.size() - 1))];
    }
    try {
      (void)parse_task(junk);  // rarely valid, that's fine
    } catch (const ParseError& e) {
      CHECK(e.column() >= 1);
    }
  }
}

TEST_SUITE_END();
