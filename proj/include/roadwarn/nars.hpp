#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roadwarn/narsese.hpp"
#include "roadwarn/rng.hpp"

namespace roadwarn::nars {

using narsese::Budget;
using narsese::Punctuation;
using narsese::Stamp;
using narsese::Task;
using narsese::TaskPtr;
using narsese::Tense;
using narsese::Term;
using narsese::TermPtr;
using narsese::TruthValue;

/// Revision with evidential horizon k=1: weights w = c/(1-c).
/// Requires disjoint stamps (enforced by the caller).
TruthValue revise(const TruthValue& a, const TruthValue& b);

/// Deduction / detachment: f = f1*f2, c = f1*f2*c1*c2.
TruthValue deduce(const TruthValue& a, const TruthValue& b);

/// Intersection composition: f = f1*f2, c = c1*c2.
TruthValue intersect(const TruthValue& a, const TruthValue& b);

/// Capacity-bounded collection with priority-proportional sampling.
/// On overflow the lowest-priority entry is displaced (which is the incoming
/// item itself when it ranks lowest).
template <typename T>
class Bag {
 public:
  struct Entry {
    T item;
    double priority;
  };

  explicit Bag(std::size_t capacity) : capacity_(capacity) {}

  /// Returns the displaced item, if any.
  std::optional<T> put(T item, double priority) {
    if (entries_.size() < capacity_) {
      entries_.push_back({std::move(item), priority});
      return std::nullopt;
    }
    std::size_t lowest = 0;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      if (entries_[i].priority < entries_[lowest].priority) lowest = i;
    }
    if (priority <= entries_[lowest].priority) return item;  // incoming ranks lowest
    T displaced = std::move(entries_[lowest].item);
    entries_[lowest] = {std::move(item), priority};
    return displaced;
  }

  /// Samples an index with probability priority / total priority.
  std::optional<std::size_t> sample(Rng& rng) const {
    double total = 0.0;
    for (const Entry& e : entries_) total += e.priority;
    if (total <= 0.0) return std::nullopt;
    double r = rng.uniform() * total;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      r -= entries_[i].priority;
      if (r < 0.0) return i;
    }
    return entries_.size() - 1;
  }

  void scale_priority(std::size_t i, double factor) { entries_[i].priority *= factor; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::size_t capacity_;
};

struct Concept {
  TermPtr term;
  std::vector<TaskPtr> beliefs;  // confidence-descending, bounded
  Bag<TaskPtr> task_links;
  double priority{0.0};

  Concept(TermPtr t, std::size_t link_capacity) : term(std::move(t)), task_links(link_capacity) {}
};

struct Derivation {
  TaskPtr conclusion;
  std::string rule;
  std::string trace_line;
};

/// A fired operation, e.g. ^alert with its argument product.
struct Execution {
  long cycle{0};
  std::string op_name;
  TermPtr args;      // the (*,...) product, substituted
  std::string kind;  // second product argument when present
  narsese::Substitution binding;
  TruthValue desire;
  std::vector<std::string> trace;
};

struct CycleOutput {
  std::vector<Derivation> derivations;
  std::vector<Execution> executions;
};

struct EngineParams {
  double decision_threshold{0.6};
  double temporal_window_s{1.0};
  std::size_t concept_capacity{256};
  std::size_t task_link_capacity{16};
  std::size_t belief_capacity{8};
  std::size_t event_capacity{64};
  std::size_t goal_capacity{8};
  std::size_t rule_capacity{32};
  std::size_t trace_line_cap{16};
  double rule_discount{0.8};
  long exec_refractory_cycles{0};
};

/// Concept memory plus attention control. One instance per scenario run;
/// all randomness comes from the generator passed to cycle().
class Memory {
 public:
  explicit Memory(EngineParams params = {});

  void register_operation(const std::string& name) { operations_.insert(name); }
  bool operation_registered(const std::string& name) const { return operations_.count(name) > 0; }

  void set_now(double now_s) { now_ = now_s; }
  double now() const { return now_; }
  long clock() const { return clock_; }

  /// Routes a task to its concept (created on demand), registers events,
  /// goals and procedural rules, and applies revision. Returns any revision
  /// derivations. A task with an empty stamp gets a fresh evidence id.
  std::vector<Derivation> input_task(const Task& task);

  /// One attention step: sample a concept and a task link, pair with the
  /// highest-confidence relevant belief, derive, decay the sampled
  /// priorities, then evaluate active goals.
  CycleOutput cycle(Rng& rng);

  const std::vector<std::string>& trace_log() const { return trace_log_; }
  const Concept* find_concept(const TermPtr& term) const;
  std::size_t concept_count() const { return concepts_.size(); }
  const std::deque<TaskPtr>& events() const { return events_; }
  const std::vector<TaskPtr>& goals() const { return goals_; }
  const std::vector<TaskPtr>& rules() const { return rules_; }
  const EngineParams& params() const { return params_; }

 private:
  struct ConditionMatch {
    narsese::Substitution sub;
    std::vector<TaskPtr> events;
  };

  Concept& ensure_concept(const TermPtr& term);
  bool add_belief(Concept& node, const TaskPtr& task, std::vector<Derivation>& out);
  bool duplicate_belief(const Concept& node, const Task& task) const;
  TaskPtr pick_belief(const Concept& node, const TaskPtr& task, Rng& rng) const;
  std::vector<Derivation> infer(const TaskPtr& task, const TaskPtr& belief) const;
  std::optional<Derivation> try_sequence_rule(const TaskPtr& rule, const TaskPtr& event) const;
  void decide(const TaskPtr& goal, CycleOutput& out);
  std::optional<ConditionMatch> satisfy_conditions(const std::vector<TermPtr>& conditions,
                                                   narsese::Substitution seed) const;
  void accept_derivation(Derivation d, CycleOutput& out);
  void log_line(const std::string& rule, const Task& task);
  static std::string stamp_text(const Stamp& stamp);

  EngineParams params_;
  std::vector<Concept> concepts_;
  std::map<std::string, std::size_t> concept_index_;
  std::deque<TaskPtr> events_;
  std::vector<TaskPtr> goals_;
  std::vector<TaskPtr> rules_;
  std::set<std::string> operations_;
  std::map<std::string, long> last_execution_;
  std::vector<std::string> trace_log_;
  double now_{0.0};
  long clock_{0};
  std::int64_t next_evidence_{0};
};

/// True when the belief has the procedural shape
/// <(conditions... &/ <args --> ^op>) => consequent>.
bool is_procedural_rule(const Task& task);

/// Splits a procedural rule's antecedent into conditions and operation calls.
void split_antecedent(const TermPtr& antecedent, std::vector<TermPtr>& conditions,
                      std::vector<TermPtr>& op_calls);

}  // namespace roadwarn::nars
