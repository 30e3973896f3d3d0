#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace roadwarn::narsese {

enum class TermType {
  kAtom,
  kVariable,
  kExtSet,        // {a}
  kIntSet,        // [a]
  kIntersection,  // (a & b), argument order canonical
  kSequence,      // (a &/ b), ordered
  kProduct,       // (*,a,b), ordered
  kOperation,     // ^name
  kNegation,      // (--,a)
  kStatement,     // <s --> p> or <s => p>
};

enum class Copula { kInheritance, kImplication };
enum class VarKind { kDependent, kIndependent };  // #x vs $x

class Term;
using TermPtr = std::shared_ptr<const Term>;

/// Immutable term. Compound factories canonicalize on construction:
/// intersections and sets sort (and deduplicate) their arguments, nested
/// intersections flatten, and a one-element intersection collapses to its
/// argument. Equality and ordering use the canonical rendering.
class Term {
 public:
  TermType type() const { return type_; }
  const std::string& name() const { return name_; }  // atom / variable / operation
  VarKind var_kind() const { return var_kind_; }
  Copula copula() const { return copula_; }
  const std::vector<TermPtr>& args() const { return args_; }

  const TermPtr& subject() const { return args_[0]; }    // statements
  const TermPtr& predicate() const { return args_[1]; }  // statements
  const TermPtr& inner() const { return args_[0]; }      // negation

  const std::string& str() const { return key_; }
  bool equals(const Term& o) const { return key_ == o.key_; }
  bool equals(const TermPtr& o) const { return o && key_ == o->key_; }

  bool is_statement(Copula c) const { return type_ == TermType::kStatement && copula_ == c; }
  bool contains_variables() const;

  static TermPtr atom(std::string name);
  static TermPtr variable(VarKind kind, std::string name);
  static TermPtr ext_set(std::vector<TermPtr> members);
  static TermPtr int_set(std::vector<TermPtr> members);
  static TermPtr intersection(std::vector<TermPtr> args);
  static TermPtr sequence(std::vector<TermPtr> args);
  static TermPtr product(std::vector<TermPtr> args);
  static TermPtr operation(std::string name);
  static TermPtr negation(TermPtr inner);
  static TermPtr statement(TermPtr subject, Copula copula, TermPtr predicate);

 private:
  Term() = default;
  static TermPtr make(Term t);

  TermType type_{TermType::kAtom};
  std::string name_;
  VarKind var_kind_{VarKind::kDependent};
  Copula copula_{Copula::kInheritance};
  std::vector<TermPtr> args_;
  std::string key_;  // canonical rendering, built once
};

struct TruthValue {
  double f{1.0};
  double c{0.9};

  TruthValue() = default;
  TruthValue(double frequency, double confidence);

  double expectation() const { return c * (f - 0.5) + 0.5; }
};

enum class Punctuation { kJudgment, kGoal, kQuestion };
enum class Tense { kEternal, kPresent };

struct Stamp {
  std::vector<std::int64_t> evidence;  // sorted, unique
  double creation_time{0.0};

  bool overlaps(const Stamp& o) const;
  static Stamp merged(const Stamp& a, const Stamp& b, double creation_time);
};

struct Budget {
  double priority{0.8};
  double durability{0.8};
  double quality{0.5};
};

struct Task {
  TermPtr term;
  Punctuation punctuation{Punctuation::kJudgment};
  Tense tense{Tense::kEternal};
  double occurrence{0.0};  // valid when tense == kPresent
  std::optional<TruthValue> truth;  // judgments and goals
  Stamp stamp;
  Budget budget;
  std::vector<std::string> trace;  // derivation lineage, human readable
};

using TaskPtr = std::shared_ptr<const Task>;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, std::size_t column)
      : std::runtime_error(std::move(message)), column_(column) {}
  /// 1-based column of the offending character.
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

/// Parses one task line. `//` comments are stripped first. Unannotated
/// judgments and goals get truth (1.0, 0.9) and the default budget.
Task parse_task(std::string_view line);

/// Parses a bare term (no punctuation).
TermPtr parse_term_text(std::string_view text);

/// Canonical one-line rendering; parse_task(format_task(t)) is structurally
/// equal to t for tasks whose truth lies on the printed 0.01 grid.
std::string format_task(const Task& task);

std::string format_truth(const TruthValue& t);

/// One variable binding; kept sorted by variable name.
using Substitution = std::vector<std::pair<TermPtr, TermPtr>>;

/// Matches a pattern (may contain variables) against a variable-free term.
/// Returns the substitution when the substituted pattern equals `ground`.
std::optional<Substitution> term_matches(const TermPtr& pattern, const TermPtr& ground);

/// Extends `sub` so that pattern matches ground; nullopt on conflict.
bool extend_match(const TermPtr& pattern, const TermPtr& ground, Substitution& sub);

TermPtr apply_substitution(const TermPtr& term, const Substitution& sub);

}  // namespace roadwarn::narsese
