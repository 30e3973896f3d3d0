#include "roadwarn/narsese.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>

namespace roadwarn::narsese {

namespace {

bool term_less(const TermPtr& a, const TermPtr& b) { return a->str() < b->str(); }

std::string join_keys(const std::vector<TermPtr>& args, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i > 0) out += sep;
    out += args[i]->str();
  }
  return out;
}

void sort_dedup(std::vector<TermPtr>& args) {
  std::sort(args.begin(), args.end(), term_less);
  args.erase(std::unique(args.begin(), args.end(),
                         [](const TermPtr& a, const TermPtr& b) { return a->equals(*b); }),
             args.end());
}

}  // namespace

TermPtr Term::make(Term t) { return std::make_shared<const Term>(std::move(t)); }

TermPtr Term::atom(std::string name) {
  Term t;
  t.type_ = TermType::kAtom;
  t.key_ = name;
  t.name_ = std::move(name);
  return make(std::move(t));
}

TermPtr Term::variable(VarKind kind, std::string name) {
  Term t;
  t.type_ = TermType::kVariable;
  t.var_kind_ = kind;
  t.key_ = (kind == VarKind::kDependent ? "#" : "$") + name;
  t.name_ = std::move(name);
  return make(std::move(t));
}

TermPtr Term::ext_set(std::vector<TermPtr> members) {
  sort_dedup(members);
  Term t;
  t.type_ = TermType::kExtSet;
  t.key_ = "{" + join_keys(members, ",") + "}";
  t.args_ = std::move(members);
  return make(std::move(t));
}

TermPtr Term::int_set(std::vector<TermPtr> members) {
  sort_dedup(members);
  Term t;
  t.type_ = TermType::kIntSet;
  t.key_ = "[" + join_keys(members, ",") + "]";
  t.args_ = std::move(members);
  return make(std::move(t));
}

TermPtr Term::intersection(std::vector<TermPtr> args) {
  // flatten nested intersections, then canonicalize order
  std::vector<TermPtr> flat;
  for (TermPtr& a : args) {
    if (a->type() == TermType::kIntersection) {
      flat.insert(flat.end(), a->args().begin(), a->args().end());
    } else {
      flat.push_back(std::move(a));
    }
  }
  sort_dedup(flat);
  if (flat.size() == 1) return flat.front();
  Term t;
  t.type_ = TermType::kIntersection;
  t.key_ = "(" + join_keys(flat, " & ") + ")";
  t.args_ = std::move(flat);
  return make(std::move(t));
}

TermPtr Term::sequence(std::vector<TermPtr> args) {
  if (args.size() == 1) return args.front();
  Term t;
  t.type_ = TermType::kSequence;
  t.key_ = "(" + join_keys(args, " &/ ") + ")";
  t.args_ = std::move(args);
  return make(std::move(t));
}

TermPtr Term::product(std::vector<TermPtr> args) {
  Term t;
  t.type_ = TermType::kProduct;
  t.key_ = "(*," + join_keys(args, ",") + ")";
  t.args_ = std::move(args);
  return make(std::move(t));
}

TermPtr Term::operation(std::string name) {
  Term t;
  t.type_ = TermType::kOperation;
  t.key_ = "^" + name;
  t.name_ = std::move(name);
  return make(std::move(t));
}

TermPtr Term::negation(TermPtr inner) {
  Term t;
  t.type_ = TermType::kNegation;
  t.key_ = "(--," + inner->str() + ")";
  t.args_ = {std::move(inner)};
  return make(std::move(t));
}

TermPtr Term::statement(TermPtr subject, Copula copula, TermPtr predicate) {
  Term t;
  t.type_ = TermType::kStatement;
  t.copula_ = copula;
  t.key_ = "<" + subject->str() + (copula == Copula::kInheritance ? " --> " : " => ") +
           predicate->str() + ">";
  t.args_ = {std::move(subject), std::move(predicate)};
  return make(std::move(t));
}

bool Term::contains_variables() const {
  if (type_ == TermType::kVariable) return true;
  for (const TermPtr& a : args_) {
    if (a->contains_variables()) return true;
  }
  return false;
}

TruthValue::TruthValue(double frequency, double confidence) {
  f = std::clamp(frequency, 0.0, 1.0);
  c = std::clamp(confidence, 0.0, 1.0 - 1e-9);
}

bool Stamp::overlaps(const Stamp& o) const {
  auto a = evidence.begin();
  auto b = o.evidence.begin();
  while (a != evidence.end() && b != o.evidence.end()) {
    if (*a == *b) return true;
    if (*a < *b) {
      ++a;
    } else {
      ++b;
    }
  }
  return false;
}

Stamp Stamp::merged(const Stamp& a, const Stamp& b, double creation_time) {
  constexpr std::size_t kMaxEvidence = 16;
  Stamp out;
  out.creation_time = creation_time;
  out.evidence.reserve(a.evidence.size() + b.evidence.size());
  std::set_union(a.evidence.begin(), a.evidence.end(), b.evidence.begin(), b.evidence.end(),
                 std::back_inserter(out.evidence));
  if (out.evidence.size() > kMaxEvidence) {
    // keep the most recent ids
    out.evidence.erase(out.evidence.begin(),
                       out.evidence.begin() + (out.evidence.size() - kMaxEvidence));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parser: recursive descent over one line.

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Task parse_task() {
    Task task;
    task.term = parse_term();
    skip_ws();
    const char p = take("punctuation ('.', '!' or '?')");
    switch (p) {
      case '.': task.punctuation = Punctuation::kJudgment; break;
      case '!': task.punctuation = Punctuation::kGoal; break;
      case '?': task.punctuation = Punctuation::kQuestion; break;
      default: fail("expected punctuation ('.', '!' or '?')", pos_ - 1);
    }
    skip_ws();
    if (peek_str(":|:")) {
      pos_ += 3;
      task.tense = Tense::kPresent;
      skip_ws();
    }
    if (peek() == '%') {
      if (task.punctuation == Punctuation::kQuestion) {
        fail("questions carry no truth value", pos_);
      }
      task.truth = parse_truth();
      skip_ws();
    } else if (task.punctuation != Punctuation::kQuestion) {
      task.truth = TruthValue{1.0, 0.9};
    }
    if (pos_ != text_.size()) fail("trailing characters after task", pos_);
    return task;
  }

  TermPtr parse_term_only() {
    TermPtr t = parse_term();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters after term", pos_);
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& message, std::size_t at) {
    throw ParseError(message + " (column " + std::to_string(at + 1) + ")", at + 1);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  bool peek_str(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }

  char take(const char* what) {
    if (pos_ >= text_.size()) fail(std::string("unexpected end of input, expected ") + what, pos_);
    return text_[pos_++];
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  static bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }

  std::string parse_word(const char* what) {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_word_char(text_[pos_])) ++pos_;
    if (pos_ == start) fail(std::string("expected ") + what, start);
    return std::string(text_.substr(start, pos_ - start));
  }

  double parse_number() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    double value = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_ || pos_ == start) {
      fail("expected a number", start);
    }
    return value;
  }

  TruthValue parse_truth() {
    expect('%');
    const double f = parse_number();
    skip_ws();
    expect(';');
    const double c = parse_number();
    skip_ws();
    expect('%');
    return TruthValue{f, c};
  }

  Copula parse_copula() {
    skip_ws();
    if (peek_str("-->")) {
      pos_ += 3;
      return Copula::kInheritance;
    }
    if (peek_str("=>")) {
      pos_ += 2;
      return Copula::kImplication;
    }
    fail("unknown copula (expected '-->' or '=>')", pos_);
  }

  std::vector<TermPtr> parse_member_list(char close) {
    std::vector<TermPtr> members;
    members.push_back(parse_term());
    skip_ws();
    while (peek() == ',') {
      ++pos_;
      members.push_back(parse_term());
      skip_ws();
    }
    expect(close);
    return members;
  }

  TermPtr parse_compound() {
    // after '('
    skip_ws();
    if (peek_str("--") && !peek_str("-->")) {
      pos_ += 2;
      skip_ws();
      expect(',');
      TermPtr inner = parse_term();
      skip_ws();
      expect(')');
      return Term::negation(std::move(inner));
    }
    if (peek() == '*') {
      ++pos_;
      skip_ws();
      expect(',');
      std::vector<TermPtr> args = parse_member_list(')');
      return Term::product(std::move(args));
    }
    std::vector<TermPtr> args;
    args.push_back(parse_term());
    skip_ws();
    bool is_sequence;
    if (peek_str("&/")) {
      is_sequence = true;
    } else if (peek() == '&') {
      is_sequence = false;
    } else {
      fail("expected '&', '&/', '--', or '*' inside compound", pos_);
    }
    while (true) {
      skip_ws();
      if (peek_str("&/")) {
        if (!is_sequence) fail("cannot mix '&' and '&/' in one compound", pos_);
        pos_ += 2;
      } else if (peek() == '&') {
        if (is_sequence) fail("cannot mix '&' and '&/' in one compound", pos_);
        ++pos_;
      } else {
        break;
      }
      args.push_back(parse_term());
      skip_ws();
    }
    expect(')');
    if (args.size() < 2) fail("compound needs at least two arguments", pos_);
    return is_sequence ? Term::sequence(std::move(args)) : Term::intersection(std::move(args));
  }

  TermPtr parse_term() {
    skip_ws();
    const char c = peek();
    switch (c) {
      case '<': {
        ++pos_;
        TermPtr subject = parse_term();
        const Copula copula = parse_copula();
        TermPtr predicate = parse_term();
        skip_ws();
        // a ')' right after the predicate closes the statement implicitly,
        // accepting the knowledge-file shorthand `(--,<a --> b)`
        if (peek() == '>') {
          ++pos_;
        } else if (peek() != ')') {
          fail("expected '>'", pos_);
        }
        return Term::statement(std::move(subject), copula, std::move(predicate));
      }
      case '{': {
        ++pos_;
        return Term::ext_set(parse_member_list('}'));
      }
      case '[': {
        ++pos_;
        return Term::int_set(parse_member_list(']'));
      }
      case '(': {
        ++pos_;
        return parse_compound();
      }
      case '^': {
        ++pos_;
        return Term::operation(parse_word("operation name after '^'"));
      }
      case '#': {
        ++pos_;
        return Term::variable(VarKind::kDependent, parse_word("variable name after '#'"));
      }
      case '$': {
        ++pos_;
        return Term::variable(VarKind::kIndependent, parse_word("variable name after '$'"));
      }
      default:
        if (is_word_char(c)) return Term::atom(parse_word("term"));
        fail("expected a term", pos_);
    }
  }

  std::string_view text_;
  std::size_t pos_{0};
};

std::string_view strip_comment(std::string_view line) {
  const std::size_t at = line.find("//");
  if (at != std::string_view::npos) line = line.substr(0, at);
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
    line.remove_suffix(1);
  }
  return line;
}

}  // namespace

Task parse_task(std::string_view line) {
  const std::string_view body = strip_comment(line);
  Parser parser(body);
  return parser.parse_task();
}

TermPtr parse_term_text(std::string_view text) {
  Parser parser(strip_comment(text));
  return parser.parse_term_only();
}

std::string format_truth(const TruthValue& t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%%%.2f;%.2f%%", t.f, t.c);
  return buf;
}

std::string format_task(const Task& task) {
  std::string out = task.term->str();
  switch (task.punctuation) {
    case Punctuation::kJudgment: out += '.'; break;
    case Punctuation::kGoal: out += '!'; break;
    case Punctuation::kQuestion: out += '?'; break;
  }
  if (task.tense == Tense::kPresent) out += " :|:";
  if (task.truth) out += " " + format_truth(*task.truth);
  return out;
}

bool extend_match(const TermPtr& pattern, const TermPtr& ground, Substitution& sub) {
  if (pattern->type() == TermType::kVariable) {
    for (const auto& [var, bound] : sub) {
      if (var->equals(*pattern)) return bound->equals(*ground);
    }
    sub.emplace_back(pattern, ground);
    std::sort(sub.begin(), sub.end(),
              [](const auto& a, const auto& b) { return a.first->str() < b.first->str(); });
    return true;
  }
  if (pattern->type() != ground->type()) return false;
  switch (pattern->type()) {
    case TermType::kAtom:
    case TermType::kOperation:
      return pattern->name() == ground->name();
    case TermType::kStatement:
      if (pattern->copula() != ground->copula()) return false;
      break;
    default:
      break;
  }
  if (pattern->args().size() != ground->args().size()) return false;
  for (std::size_t i = 0; i < pattern->args().size(); ++i) {
    if (!extend_match(pattern->args()[i], ground->args()[i], sub)) return false;
  }
  return true;
}

std::optional<Substitution> term_matches(const TermPtr& pattern, const TermPtr& ground) {
  Substitution sub;
  if (!extend_match(pattern, ground, sub)) return std::nullopt;
  return sub;
}

TermPtr apply_substitution(const TermPtr& term, const Substitution& sub) {
  if (sub.empty()) return term;
  switch (term->type()) {
    case TermType::kVariable:
      for (const auto& [var, bound] : sub) {
        if (var->equals(*term)) return bound;
      }
      return term;
    case TermType::kAtom:
    case TermType::kOperation:
      return term;
    default:
      break;
  }
  std::vector<TermPtr> args;
  args.reserve(term->args().size());
  bool changed = false;
  for (const TermPtr& a : term->args()) {
    TermPtr s = apply_substitution(a, sub);
    changed = changed || s.get() != a.get();
    args.push_back(std::move(s));
  }
  if (!changed) return term;
  switch (term->type()) {
    case TermType::kExtSet: return Term::ext_set(std::move(args));
    case TermType::kIntSet: return Term::int_set(std::move(args));
    case TermType::kIntersection: return Term::intersection(std::move(args));
    case TermType::kSequence: return Term::sequence(std::move(args));
    case TermType::kProduct: return Term::product(std::move(args));
    case TermType::kNegation: return Term::negation(std::move(args[0]));
    case TermType::kStatement:
      return Term::statement(std::move(args[0]), term->copula(), std::move(args[1]));
    default:
      return term;
  }
}

}  // namespace roadwarn::narsese
