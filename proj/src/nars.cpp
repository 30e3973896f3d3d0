#include "roadwarn/nars.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace roadwarn::nars {

using narsese::Copula;
using narsese::Substitution;
using narsese::TermType;

TruthValue revise(const TruthValue& a, const TruthValue& b) {
  const double w1 = a.c / (1.0 - a.c);
  const double w2 = b.c / (1.0 - b.c);
  const double w = w1 + w2;
  return TruthValue{(w1 * a.f + w2 * b.f) / w, w / (w + 1.0)};
}

TruthValue deduce(const TruthValue& a, const TruthValue& b) {
  const double f = a.f * b.f;
  return TruthValue{f, f * a.c * b.c};
}

TruthValue intersect(const TruthValue& a, const TruthValue& b) {
  return TruthValue{a.f * b.f, a.c * b.c};
}

bool is_procedural_rule(const Task& task) {
  if (task.punctuation != Punctuation::kJudgment) return false;
  const TermPtr& t = task.term;
  if (!t->is_statement(Copula::kImplication)) return false;
  if (t->subject()->type() != TermType::kSequence) return false;
  std::vector<TermPtr> conditions, ops;
  split_antecedent(t->subject(), conditions, ops);
  return !ops.empty();
}

void split_antecedent(const TermPtr& antecedent, std::vector<TermPtr>& conditions,
                      std::vector<TermPtr>& op_calls) {
  const auto classify = [&](const TermPtr& element) {
    if (element->is_statement(Copula::kInheritance) &&
        element->predicate()->type() == TermType::kOperation) {
      op_calls.push_back(element);
    } else {
      conditions.push_back(element);
    }
  };
  if (antecedent->type() == TermType::kSequence) {
    for (const TermPtr& e : antecedent->args()) classify(e);
  } else {
    classify(antecedent);
  }
}

namespace {

std::string truth_text(const TruthValue& t) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%%%.6f;%.6f%%", t.f, t.c);
  return buf;
}

std::vector<std::string> merge_traces(std::initializer_list<const std::vector<std::string>*> parents,
                                      std::string own_line, std::size_t cap) {
  std::vector<std::string> out;
  for (const auto* p : parents) {
    for (const std::string& line : *p) {
      if (std::find(out.begin(), out.end(), line) == out.end()) out.push_back(line);
    }
  }
  out.push_back(std::move(own_line));
  if (out.size() > cap) out.erase(out.begin(), out.begin() + (out.size() - cap));
  return out;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Memory::Memory(EngineParams params) : params_(params) {
  concepts_.reserve(params_.concept_capacity);
}

const Concept* Memory::find_concept(const TermPtr& term) const {
  const auto it = concept_index_.find(term->str());
  return it == concept_index_.end() ? nullptr : &concepts_[it->second];
}

Concept& Memory::ensure_concept(const TermPtr& term) {
  const auto it = concept_index_.find(term->str());
  if (it != concept_index_.end()) return concepts_[it->second];
  if (concepts_.size() < params_.concept_capacity) {
    concepts_.emplace_back(term, params_.task_link_capacity);
    concept_index_.emplace(term->str(), concepts_.size() - 1);
    return concepts_.back();
  }
  // displace the lowest-priority concept in place
  std::size_t lowest = 0;
  for (std::size_t i = 1; i < concepts_.size(); ++i) {
    if (concepts_[i].priority < concepts_[lowest].priority) lowest = i;
  }
  concept_index_.erase(concepts_[lowest].term->str());
  concepts_[lowest] = Concept(term, params_.task_link_capacity);
  concept_index_.emplace(term->str(), lowest);
  return concepts_[lowest];
}

bool Memory::duplicate_belief(const Concept& node, const Task& task) const {
  for (const TaskPtr& b : node.beliefs) {
    if (b->term->equals(*task.term) && b->stamp.evidence == task.stamp.evidence) return true;
  }
  return false;
}

std::string Memory::stamp_text(const Stamp& stamp) {
  std::string out = "{";
  for (std::size_t i = 0; i < stamp.evidence.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(stamp.evidence[i]);
  }
  return out + "}";
}

void Memory::log_line(const std::string& rule, const Task& task) {
  std::string line = "cyc " + std::to_string(clock_) + " | " + rule + " | " +
                     narsese::format_task(task);
  if (task.truth) line += " | " + truth_text(*task.truth);
  line += " | " + stamp_text(task.stamp);
  trace_log_.push_back(std::move(line));
}

std::vector<Derivation> Memory::input_task(const Task& task) {
  std::vector<Derivation> revisions;
  Task prepared = task;
  if (prepared.stamp.evidence.empty()) {
    prepared.stamp.evidence = {++next_evidence_};
    prepared.stamp.creation_time = now_;
  }
  if (prepared.trace.empty()) prepared.trace = {narsese::format_task(prepared)};

  Concept& home = ensure_concept(prepared.term);
  if (prepared.punctuation == Punctuation::kJudgment && duplicate_belief(home, prepared)) {
    return revisions;
  }
  const TaskPtr stored = std::make_shared<const Task>(std::move(prepared));

  home.task_links.put(stored, stored->budget.priority);
  home.priority = clamp01(home.priority + stored->budget.priority);
  for (const TermPtr& sub : stored->term->args()) {
    Concept& c = ensure_concept(sub);
    c.task_links.put(stored, stored->budget.priority);
    c.priority = clamp01(c.priority + stored->budget.priority);
  }

  switch (stored->punctuation) {
    case Punctuation::kJudgment: {
      Concept& node = ensure_concept(stored->term);
      add_belief(node, stored, revisions);
      if (stored->tense == Tense::kPresent) {
        // the buffer keeps the latest event per term
        for (auto it = events_.begin(); it != events_.end();) {
          it = (*it)->term->equals(*stored->term) ? events_.erase(it) : it + 1;
        }
        events_.push_back(stored);
        if (events_.size() > params_.event_capacity) events_.pop_front();
      }
      if (is_procedural_rule(*stored)) {
        const auto same = std::find_if(rules_.begin(), rules_.end(), [&](const TaskPtr& r) {
          return r->term->equals(*stored->term) && r->stamp.evidence == stored->stamp.evidence;
        });
        if (same == rules_.end()) {
          rules_.push_back(stored);
          if (rules_.size() > params_.rule_capacity) {
            const auto weakest = std::min_element(
                rules_.begin(), rules_.end(), [](const TaskPtr& a, const TaskPtr& b) {
                  return a->truth->c < b->truth->c;
                });
            rules_.erase(weakest);
          }
        }
      }
      break;
    }
    case Punctuation::kGoal: {
      for (auto it = goals_.begin(); it != goals_.end();) {
        it = (*it)->term->equals(*stored->term) ? goals_.erase(it) : it + 1;
      }
      goals_.push_back(stored);
      if (goals_.size() > params_.goal_capacity) goals_.erase(goals_.begin());
      break;
    }
    case Punctuation::kQuestion: {
      // answered by direct lookup only
      const Concept* c = find_concept(stored->term);
      if (c && !c->beliefs.empty()) log_line("answer", *c->beliefs.front());
      break;
    }
  }
  return revisions;
}

bool Memory::add_belief(Concept& node, const TaskPtr& task, std::vector<Derivation>& out) {
  // revision against the strongest compatible partner
  TaskPtr partner;
  for (const TaskPtr& b : node.beliefs) {
    if (!b->term->equals(*task->term)) continue;
    if (b->tense != task->tense) continue;
    if (b->tense == Tense::kPresent &&
        std::abs(b->occurrence - task->occurrence) > params_.temporal_window_s) {
      continue;
    }
    if (b->stamp.overlaps(task->stamp)) continue;
    partner = b;
    break;  // beliefs are confidence-sorted, first hit is strongest
  }

  auto insert_sorted = [&](const TaskPtr& t) {
    auto pos = std::find_if(node.beliefs.begin(), node.beliefs.end(),
                            [&](const TaskPtr& b) { return b->truth->c < t->truth->c; });
    node.beliefs.insert(pos, t);
    if (node.beliefs.size() > params_.belief_capacity) node.beliefs.pop_back();
  };
  insert_sorted(task);

  if (partner != nullptr) {
    const TaskPtr base = partner;
    Task revised;
    revised.term = task->term;
    revised.punctuation = Punctuation::kJudgment;
    revised.tense = task->tense;
    revised.occurrence = std::max(task->occurrence, base->occurrence);
    revised.truth = revise(*task->truth, *base->truth);
    revised.stamp = Stamp::merged(task->stamp, base->stamp, now_);
    revised.budget.priority = clamp01(std::max(task->budget.priority, base->budget.priority));
    revised.budget.durability = task->budget.durability;
    revised.budget.quality = revised.truth->expectation();
    revised.trace = merge_traces({&task->trace, &base->trace},
                                 "revised " + narsese::format_task(revised), params_.trace_line_cap);
    const TaskPtr stored = std::make_shared<const Task>(std::move(revised));
    if (!duplicate_belief(node, *stored)) {
      insert_sorted(stored);
      log_line("revision", *stored);
      out.push_back({stored, "revision", trace_log_.back()});
      if (stored->tense == Tense::kPresent) {
        for (auto it = events_.begin(); it != events_.end();) {
          it = (*it)->term->equals(*stored->term) ? events_.erase(it) : it + 1;
        }
        events_.push_back(stored);
        if (events_.size() > params_.event_capacity) events_.pop_front();
      }
    }
  }
  return true;
}

TaskPtr Memory::pick_belief(const Concept& node, const TaskPtr& task, Rng& rng) const {
  // the partner side is sampled as well: a second task link chosen from the
  // concept (or from a sub-term concept of the task) names the partner term,
  // and the strongest belief of that term's concept is used. A deterministic
  // argmax over all reachable beliefs would starve every pairing except the
  // single most-revised one.
  auto best_belief_of = [&](const TermPtr& term) -> TaskPtr {
    const Concept* c = find_concept(term);
    if (c == nullptr || c->beliefs.empty()) return nullptr;
    if (c->beliefs.front()->term->equals(*task->term)) return nullptr;
    return c->beliefs.front();
  };

  for (int attempt = 0; attempt < 3; ++attempt) {
    const auto li = node.task_links.sample(rng);
    if (!li) break;
    const TaskPtr& partner = node.task_links.entries()[*li].item;
    if (partner->term->equals(*task->term)) continue;
    if (TaskPtr b = best_belief_of(partner->term)) return b;
    if (partner->punctuation == Punctuation::kJudgment && partner->truth) return partner;
  }

  // walk the task's sub-term concepts for a linked partner
  std::vector<TaskPtr> candidates;
  auto add_candidate = [&](const TaskPtr& b) {
    if (!b || !b->truth) return;
    if (b->term->equals(*task->term)) return;
    for (const TaskPtr& c : candidates) {
      if (c->term->equals(*b->term) && c->stamp.evidence == b->stamp.evidence) return;
    }
    candidates.push_back(b);
  };
  for (const TaskPtr& b : node.beliefs) add_candidate(b);
  add_candidate(best_belief_of(node.term));
  for (const TermPtr& sub : task->term->args()) {
    const Concept* c = find_concept(sub);
    if (c == nullptr) continue;
    if (!c->task_links.empty()) {
      const auto li = c->task_links.sample(rng);
      if (li) {
        const TaskPtr& partner = c->task_links.entries()[*li].item;
        add_candidate(best_belief_of(partner->term));
        if (partner->punctuation == Punctuation::kJudgment) add_candidate(partner);
      }
    }
  }
  TaskPtr best;
  for (const TaskPtr& b : candidates) {
    if (!best || b->truth->c > best->truth->c) best = b;
  }
  return best;
}

std::vector<Derivation> Memory::infer(const TaskPtr& task, const TaskPtr& belief) const {
  std::vector<Derivation> out;
  if (!belief->truth) return out;

  // (a) intersection composition: <S --> P1> + <S --> P2> |- <S --> (P1 & P2)>
  if (task->punctuation == Punctuation::kJudgment && task->truth &&
      task->term->is_statement(Copula::kInheritance) &&
      belief->term->is_statement(Copula::kInheritance) &&
      task->term->subject()->equals(*belief->term->subject()) &&
      !task->term->predicate()->equals(*belief->term->predicate()) &&
      !task->stamp.overlaps(belief->stamp) && task->tense == belief->tense &&
      (task->tense == Tense::kEternal ||
       std::abs(task->occurrence - belief->occurrence) <= params_.temporal_window_s)) {
    Task d;
    d.term = Term::statement(
        task->term->subject(), Copula::kInheritance,
        Term::intersection({task->term->predicate(), belief->term->predicate()}));
    d.punctuation = Punctuation::kJudgment;
    d.tense = task->tense;
    d.occurrence = std::max(task->occurrence, belief->occurrence);
    d.truth = intersect(*task->truth, *belief->truth);
    d.stamp = Stamp::merged(task->stamp, belief->stamp, now_);
    d.budget.priority = clamp01(task->budget.priority * belief->budget.priority *
                                params_.rule_discount);
    d.budget.durability = task->budget.durability * belief->budget.durability;
    d.budget.quality = d.truth->expectation();
    d.trace = merge_traces({&task->trace, &belief->trace},
                           "composed " + narsese::format_task(d), params_.trace_line_cap);
    out.push_back({std::make_shared<const Task>(std::move(d)), "composition", ""});
  }

  // (b) detachment: <A => C> + A |- C (antecedent sequences go through the
  // temporal path instead)
  const auto detach = [&](const TaskPtr& rule, const TaskPtr& premise) {
    if (!rule->term->is_statement(Copula::kImplication)) return;
    if (rule->term->subject()->type() == TermType::kSequence) return;
    if (premise->punctuation != Punctuation::kJudgment || !premise->truth) return;
    if (premise->term->contains_variables()) return;
    if (rule->stamp.overlaps(premise->stamp)) return;
    const auto sub = narsese::term_matches(rule->term->subject(), premise->term);
    if (!sub) return;
    Task d;
    d.term = narsese::apply_substitution(rule->term->predicate(), *sub);
    if (d.term->contains_variables()) return;
    d.punctuation = Punctuation::kJudgment;
    d.tense = premise->tense;
    d.occurrence = premise->occurrence;
    d.truth = deduce(*rule->truth, *premise->truth);
    d.stamp = Stamp::merged(rule->stamp, premise->stamp, now_);
    d.budget.priority = clamp01(rule->budget.priority * premise->budget.priority *
                                params_.rule_discount);
    d.budget.durability = rule->budget.durability * premise->budget.durability;
    d.budget.quality = d.truth->expectation();
    d.trace = merge_traces({&premise->trace, &rule->trace},
                           "detached " + narsese::format_task(d), params_.trace_line_cap);
    out.push_back({std::make_shared<const Task>(std::move(d)), "deduction", ""});
  };
  if (task->punctuation == Punctuation::kJudgment && task->truth) {
    detach(belief, task);
    detach(task, belief);
  }
  return out;
}

std::optional<Memory::ConditionMatch> Memory::satisfy_conditions(
    const std::vector<TermPtr>& conditions, Substitution seed) const {
  ConditionMatch match;

  // newest-first backtracking over the event buffer
  std::function<bool(std::size_t, const Substitution&)> solve =
      [&](std::size_t i, const Substitution& sub) {
        if (i == conditions.size()) {
          match.sub = sub;
          return true;
        }
        for (auto it = events_.rbegin(); it != events_.rend(); ++it) {
          const TaskPtr& ev = *it;
          if (now_ - ev->occurrence > params_.temporal_window_s) continue;
          if (!ev->truth) continue;
          Substitution trial = sub;
          if (!narsese::extend_match(conditions[i], ev->term, trial)) continue;
          match.events.push_back(ev);
          if (solve(i + 1, trial)) return true;
          match.events.pop_back();
        }
        return false;
      };
  if (!solve(0, seed)) return std::nullopt;
  return match;
}

std::optional<Derivation> Memory::try_sequence_rule(const TaskPtr& rule,
                                                    const TaskPtr& event) const {
  if (!is_procedural_rule(*rule)) return std::nullopt;
  if (event->punctuation != Punctuation::kJudgment || event->tense != Tense::kPresent ||
      !event->truth) {
    return std::nullopt;
  }
  std::vector<TermPtr> conditions, op_calls;
  split_antecedent(rule->term->subject(), conditions, op_calls);
  for (const TermPtr& op : op_calls) {
    if (!operation_registered(op->predicate()->name())) return std::nullopt;
  }
  // the event must carry one of the conditions
  bool anchored = false;
  for (const TermPtr& cond : conditions) {
    Substitution trial;
    if (narsese::extend_match(cond, event->term, trial)) {
      anchored = true;
      break;
    }
  }
  if (!anchored) return std::nullopt;

  const auto match = satisfy_conditions(conditions, {});
  if (!match) return std::nullopt;

  TruthValue combined = *match->events.front()->truth;
  double max_occurrence = match->events.front()->occurrence;
  for (std::size_t i = 1; i < match->events.size(); ++i) {
    combined = intersect(combined, *match->events[i]->truth);
    max_occurrence = std::max(max_occurrence, match->events[i]->occurrence);
  }

  Task d;
  d.term = narsese::apply_substitution(rule->term->predicate(), match->sub);
  if (d.term->contains_variables()) return std::nullopt;
  d.punctuation = Punctuation::kJudgment;
  d.tense = Tense::kPresent;
  d.occurrence = max_occurrence;
  d.truth = deduce(*rule->truth, combined);
  Stamp s = rule->stamp;
  for (const TaskPtr& ev : match->events) {
    if (s.overlaps(ev->stamp)) return std::nullopt;
    s = Stamp::merged(s, ev->stamp, now_);
  }
  d.stamp = std::move(s);
  d.budget.priority = clamp01(rule->budget.priority * event->budget.priority *
                              params_.rule_discount);
  d.budget.durability = rule->budget.durability * event->budget.durability;
  d.budget.quality = d.truth->expectation();
  d.trace = merge_traces({&event->trace, &rule->trace},
                         "sequence " + narsese::format_task(d), params_.trace_line_cap);
  return Derivation{std::make_shared<const Task>(std::move(d)), "sequence", ""};
}

void Memory::accept_derivation(Derivation d, CycleOutput& out) {
  const Concept* home = find_concept(d.conclusion->term);
  if (home != nullptr && duplicate_belief(*home, *d.conclusion)) return;
  log_line(d.rule, *d.conclusion);
  d.trace_line = trace_log_.back();
  std::vector<Derivation> revisions = input_task(*d.conclusion);
  out.derivations.push_back(std::move(d));
  for (Derivation& r : revisions) out.derivations.push_back(std::move(r));
}

void Memory::decide(const TaskPtr& goal, CycleOutput& out) {
  for (const TaskPtr& rule : rules_) {
    const auto goal_sub = narsese::term_matches(rule->term->predicate(), goal->term);
    if (!goal_sub) continue;
    std::vector<TermPtr> conditions, op_calls;
    split_antecedent(rule->term->subject(), conditions, op_calls);
    bool executable = true;
    for (const TermPtr& op : op_calls) {
      if (!operation_registered(op->predicate()->name())) executable = false;
    }
    if (!executable || op_calls.empty()) continue;

    const auto match = satisfy_conditions(conditions, *goal_sub);
    if (!match) continue;

    TruthValue desire = *rule->truth;
    if (!match->events.empty()) {
      TruthValue combined = *match->events.front()->truth;
      for (std::size_t i = 1; i < match->events.size(); ++i) {
        combined = intersect(combined, *match->events[i]->truth);
      }
      desire = deduce(*rule->truth, combined);
    }
    if (desire.expectation() <= params_.decision_threshold) continue;

    for (const TermPtr& op : op_calls) {
      Execution exec;
      exec.cycle = clock_;
      exec.op_name = op->predicate()->name();
      exec.args = narsese::apply_substitution(op->subject(), match->sub);
      if (exec.args->type() == TermType::kProduct && exec.args->args().size() >= 2 &&
          exec.args->args()[1]->type() == TermType::kAtom) {
        exec.kind = exec.args->args()[1]->name();
      }
      exec.binding = match->sub;
      exec.desire = desire;

      std::string key = rule->term->str() + "|" + exec.args->str() + "|^" + exec.op_name;
      const auto last = last_execution_.find(key);
      if (last != last_execution_.end() &&
          clock_ - last->second < params_.exec_refractory_cycles) {
        continue;
      }
      last_execution_[key] = clock_;

      const std::string line = "cyc " + std::to_string(clock_) + " | execute | ^" +
                               exec.op_name + exec.args->str() + " | " + truth_text(desire) +
                               " | " + stamp_text(rule->stamp);
      trace_log_.push_back(line);
      std::vector<std::string> trace;
      auto add_lines = [&](const std::vector<std::string>& lines) {
        for (const std::string& l : lines) {
          if (std::find(trace.begin(), trace.end(), l) == trace.end()) trace.push_back(l);
        }
      };
      for (const TaskPtr& ev : match->events) add_lines(ev->trace);
      add_lines(rule->trace);
      trace.push_back(line);
      if (trace.size() > params_.trace_line_cap) {
        trace.erase(trace.begin(), trace.begin() + (trace.size() - params_.trace_line_cap));
      }
      exec.trace = std::move(trace);
      out.executions.push_back(std::move(exec));
    }
  }
}

CycleOutput Memory::cycle(Rng& rng) {
  CycleOutput out;

  // attention step
  double total = 0.0;
  for (const Concept& c : concepts_) total += c.priority;
  if (total > 0.0) {
    double r = rng.uniform() * total;
    std::size_t ci = concepts_.size() - 1;
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
      r -= concepts_[i].priority;
      if (r < 0.0) {
        ci = i;
        break;
      }
    }
    Concept& node = concepts_[ci];
    const auto li = node.task_links.sample(rng);
    if (li) {
      const TaskPtr task = node.task_links.entries()[*li].item;
      const TaskPtr belief = pick_belief(node, task, rng);
      if (belief) {
        for (Derivation& d : infer(task, belief)) accept_derivation(std::move(d), out);
      }
      if (task->punctuation == Punctuation::kJudgment && task->tense == Tense::kPresent) {
        for (const TaskPtr& rule : rules_) {
          auto d = try_sequence_rule(rule, task);
          if (d) accept_derivation(std::move(*d), out);
        }
      }
      node.task_links.scale_priority(*li, task->budget.durability);
      node.priority *= task->budget.durability;
    }
  }

  for (const TaskPtr& goal : goals_) decide(goal, out);
  ++clock_;
  return out;
}

}  // namespace roadwarn::nars
