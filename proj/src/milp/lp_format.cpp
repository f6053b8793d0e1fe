#include "flexsched/milp/lp_format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "flexsched/errors.hpp"

namespace flexsched::milp {
namespace {

constexpr std::size_t kMaxNameLength = 255;
constexpr std::size_t kTermsPerLine = 8;

class BufferedWriter {
 public:
  explicit BufferedWriter(std::ostream& out) : out_(out) { buf_.reserve(kFlush + 512); }
  ~BufferedWriter() { flush(); }

  void put(std::string_view s) {
    buf_.append(s);
    if (buf_.size() >= kFlush) flush();
  }
  void number(double v) {
    char tmp[64];
    const auto [ptr, ec] =
        std::to_chars(tmp, tmp + sizeof(tmp), v, std::chars_format::general, 17);
    put(std::string_view(tmp, static_cast<std::size_t>(ptr - tmp)));
  }
  void bound(double v) {
    if (v == kInf) put("inf");
    else if (v == -kInf) put("-inf");
    else number(v);
  }
  void flush() {
    out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
  }

 private:
  static constexpr std::size_t kFlush = 1 << 20;
  std::ostream& out_;
  std::string buf_;
};

void check_name(const std::string& name) {
  if (name.empty() || name.size() > kMaxNameLength) {
    throw InvalidArgument("LP export: name '" + name.substr(0, 40) +
                          "' is empty or longer than 255 characters");
  }
  if (std::isdigit(static_cast<unsigned char>(name[0])) || name[0] == '.') {
    throw InvalidArgument("LP export: name '" + name +
                          "' must not start with a digit or period");
  }
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ':' || c == '+' ||
        c == '-' || c == '<' || c == '>' || c == '=' || c == '\\' ||
        c == '*' || c == '^' || c == '[' || c == ']') {
      throw InvalidArgument("LP export: name '" + name +
                            "' contains a reserved character");
    }
  }
}

void write_terms(BufferedWriter& w, const MilpProblem& p,
                 const std::uint32_t* index, const double* coef,
                 std::size_t count) {
  const auto& vars = p.variables();
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0 && i % kTermsPerLine == 0) w.put("\n  ");
    const double c = coef[i];
    w.put(c < 0.0 ? " - " : " + ");
    w.number(std::abs(c));
    w.put(" ");
    w.put(vars[index[i]].name);
  }
}

}  // namespace

void write_lp(const MilpProblem& problem, std::ostream& out) {
  problem.validate();
  const auto& vars = problem.variables();
  for (const auto& v : vars) check_name(v.name);
  for (const auto& r : problem.constraints()) check_name(r.name);

  BufferedWriter w(out);
  w.put("\\ Generated by flexsched\n");
  w.put(problem.sense() == Sense::Maximize ? "Maximize\n" : "Minimize\n");
  w.put(" obj:");
  {
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    for (std::size_t j = 0; j < vars.size(); ++j) {
      if (problem.objective()[j] != 0.0) {
        idx.push_back(static_cast<std::uint32_t>(j));
        val.push_back(problem.objective()[j]);
      }
    }
    write_terms(w, problem, idx.data(), val.data(), idx.size());
  }
  w.put("\nSubject To\n");
  for (const auto& r : problem.constraints()) {
    w.put(" ");
    w.put(r.name);
    w.put(":");
    if (r.size() == 0) {
      if (vars.empty()) {
        throw InvalidArgument("LP export: empty row in a problem without variables");
      }
      w.put(" 0 ");
      w.put(vars.front().name);
    } else {
      write_terms(w, problem, r.index.data(), r.coef.data(), r.size());
    }
    switch (r.relation) {
      case Relation::LessEqual: w.put(" <= "); break;
      case Relation::GreaterEqual: w.put(" >= "); break;
      case Relation::Equal: w.put(" = "); break;
    }
    w.number(r.rhs);
    w.put("\n");
  }
  w.put("Bounds\n");
  bool any_general = false;
  for (const auto& v : vars) {
    const bool binary = v.integer && v.lower == 0.0 && v.upper == 1.0;
    if (binary) continue;
    any_general = any_general || v.integer;
    w.put(" ");
    if (v.lower == -kInf && v.upper == kInf) {
      w.put(v.name);
      w.put(" free\n");
    } else if (v.lower == v.upper) {
      w.put(v.name);
      w.put(" = ");
      w.number(v.lower);
      w.put("\n");
    } else if (v.upper == kInf) {
      w.put(v.name);
      w.put(" >= ");
      w.bound(v.lower);
      w.put("\n");
    } else {
      w.bound(v.lower);
      w.put(" <= ");
      w.put(v.name);
      w.put(" <= ");
      w.number(v.upper);
      w.put("\n");
    }
  }
  if (problem.num_integers() > 0) {
    w.put("Binaries\n");
    std::size_t on_line = 0;
    for (const auto& v : vars) {
      if (!(v.integer && v.lower == 0.0 && v.upper == 1.0)) continue;
      w.put(" ");
      w.put(v.name);
      if (++on_line == kTermsPerLine) {
        w.put("\n");
        on_line = 0;
      }
    }
    if (on_line) w.put("\n");
  }
  if (any_general) {
    w.put("Generals\n");
    for (const auto& v : vars) {
      if (v.integer && !(v.lower == 0.0 && v.upper == 1.0)) {
        w.put(" ");
        w.put(v.name);
        w.put("\n");
      }
    }
  }
  w.put("End\n");
  w.flush();
  if (!out) throw IoError("LP export: write failed");
}

void write_lp(const MilpProblem& problem, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_lp(problem, out);
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

namespace {

enum class Tok { Name, Number, Relation, Colon, Plus, Minus, End };

struct Token {
  Tok type = Tok::End;
  std::string text;
  double value = 0.0;
  Relation relation = Relation::LessEqual;
  std::size_t line = 0;
};

class Lexer {
 public:
  Lexer(std::istream& in, const std::string& source) : in_(in), source_(source) {}

  const Token& peek() {
    if (!has_peek_) {
      peeked_ = read();
      has_peek_ = true;
    }
    return peeked_;
  }
  Token next() {
    peek();
    has_peek_ = false;
    return std::move(peeked_);
  }

  [[noreturn]] void fail(const std::string& what, std::size_t line) const {
    std::ostringstream msg;
    msg << source_ << ":" << line << ": " << what;
    throw InvalidArgument(msg.str());
  }

 private:
  static bool name_char(int c) {
    return std::isalnum(c) || std::string_view("!\"#$%&()/,.;?@_`'{}|~").find(
                                  static_cast<char>(c)) != std::string_view::npos;
  }

  int get() {
    const int c = in_.get();
    if (c == '\n') ++line_;
    return c;
  }

  Token read() {
    Token t;
    int c;
    while (true) {
      c = in_.peek();
      if (c == EOF) {
        t.type = Tok::End;
        t.line = line_;
        return t;
      }
      if (c == '\\') {
        while ((c = get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        get();
        continue;
      }
      break;
    }
    t.line = line_;
    if (c == ':') {
      get();
      t.type = Tok::Colon;
      return t;
    }
    if (c == '+') {
      get();
      t.type = Tok::Plus;
      return t;
    }
    if (c == '-') {
      get();
      t.type = Tok::Minus;
      return t;
    }
    if (c == '<' || c == '>' || c == '=') {
      std::string op(1, static_cast<char>(get()));
      const int d = in_.peek();
      if (d == '=' || d == '<' || d == '>') op.push_back(static_cast<char>(get()));
      t.type = Tok::Relation;
      t.text = op;
      if (op == "<" || op == "<=" || op == "=<") t.relation = Relation::LessEqual;
      else if (op == ">" || op == ">=" || op == "=>") t.relation = Relation::GreaterEqual;
      else if (op == "=") t.relation = Relation::Equal;
      else fail("unknown operator '" + op + "'", t.line);
      return t;
    }
    if (std::isdigit(c) || c == '.') {
      std::string num;
      while (true) {
        c = in_.peek();
        if (std::isdigit(c) || c == '.') {
          num.push_back(static_cast<char>(get()));
        } else if ((c == 'e' || c == 'E')) {
          num.push_back(static_cast<char>(get()));
          const int s = in_.peek();
          if (s == '+' || s == '-') num.push_back(static_cast<char>(get()));
        } else {
          break;
        }
      }
      t.type = Tok::Number;
      t.text = num;
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), t.value);
      if (ec != std::errc() || ptr != num.data() + num.size()) {
        fail("malformed number '" + num + "'", t.line);
      }
      return t;
    }
    if (name_char(c)) {
      std::string name;
      while (name_char(in_.peek())) name.push_back(static_cast<char>(get()));
      t.type = Tok::Name;
      t.text = std::move(name);
      return t;
    }
    fail(std::string("unexpected character '") + static_cast<char>(c) + "'", line_);
  }

  std::istream& in_;
  std::string source_;
  std::size_t line_ = 1;
  Token peeked_;
  bool has_peek_ = false;
};

enum class Section { None, Objective, Constraints, Bounds, Binaries, Generals, End };

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_infinity(const std::string& name) {
  const auto l = lower(name);
  return l == "inf" || l == "infinity";
}

class Parser {
 public:
  Parser(std::istream& in, const std::string& source) : lex_(in, source) {}

  MilpProblem parse() {
    Section section = Section::None;
    while (true) {
      const Token& t = lex_.peek();
      if (t.type == Tok::End) break;
      if (auto s = section_keyword(); s) {
        section = *s;
        if (section == Section::End) break;
        continue;
      }
      switch (section) {
        case Section::None: lex_.fail("content before the objective section", t.line);
        case Section::Objective: parse_objective(); break;
        case Section::Constraints: parse_constraint(); break;
        case Section::Bounds: parse_bound(); break;
        case Section::Binaries: {
          const auto n = lex_.next();
          if (n.type != Tok::Name) lex_.fail("expected a variable name", n.line);
          const auto j = var(n.text);
          vars_[j].integer = true;
          vars_[j].lower = 0.0;
          vars_[j].upper = 1.0;
          break;
        }
        case Section::Generals: {
          const auto n = lex_.next();
          if (n.type != Tok::Name) lex_.fail("expected a variable name", n.line);
          vars_[var(n.text)].integer = true;
          break;
        }
        case Section::End: break;
      }
    }
    if (!saw_objective_) lex_.fail("missing Minimize/Maximize section", 1);

    MilpProblem p;
    p.set_sense(sense_);
    p.reserve_variables(vars_.size());
    for (auto& v : vars_) p.add_variable(v.name, v.lower, v.upper, v.integer);
    for (std::size_t j = 0; j < objective_.size(); ++j) {
      if (objective_[j] != 0.0) p.set_objective(j, objective_[j]);
    }
    for (auto& r : rows_) p.add_constraint(std::move(r));
    return p;
  }

 private:
  // Consumes a section keyword at the lexer position, if any.
  std::optional<Section> section_keyword() {
    const Token& t = lex_.peek();
    if (t.type != Tok::Name) return std::nullopt;
    const auto w = lower(t.text);
    if (w == "minimize" || w == "minimise" || w == "minimum" || w == "min") {
      lex_.next();
      sense_ = Sense::Minimize;
      saw_objective_ = true;
      return Section::Objective;
    }
    if (w == "maximize" || w == "maximise" || w == "maximum" || w == "max") {
      lex_.next();
      sense_ = Sense::Maximize;
      saw_objective_ = true;
      return Section::Objective;
    }
    if (w == "subject" || w == "such") {
      const auto line = t.line;
      lex_.next();
      const auto n = lex_.next();
      const auto w2 = lower(n.text);
      if (n.type != Tok::Name || (w2 != "to" && w2 != "that")) {
        lex_.fail("expected 'Subject To'", line);
      }
      return Section::Constraints;
    }
    if (w == "st" || w == "s.t.") {
      lex_.next();
      return Section::Constraints;
    }
    if (w == "bounds" || w == "bound") {
      lex_.next();
      return Section::Bounds;
    }
    if (w == "binaries" || w == "binary" || w == "bin") {
      lex_.next();
      return Section::Binaries;
    }
    if (w == "generals" || w == "general" || w == "gen") {
      lex_.next();
      return Section::Generals;
    }
    if (w == "end") {
      lex_.next();
      return Section::End;
    }
    return std::nullopt;
  }

  std::size_t var(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, vars_.size());
    if (inserted) {
      vars_.push_back({name, 0.0, kInf, false});
      objective_.push_back(0.0);
    }
    return it->second;
  }

  // Optional "label:" prefix.
  std::string label() {
    const Token& t = lex_.peek();
    if (t.type != Tok::Name || is_keyword(t.text)) return {};
    Token name = lex_.next();
    if (lex_.peek().type == Tok::Colon) {
      lex_.next();
      return name.text;
    }
    pending_name_ = std::move(name);
    return {};
  }

  Token take() {
    if (pending_name_) {
      Token t = std::move(*pending_name_);
      pending_name_.reset();
      return t;
    }
    return lex_.next();
  }
  const Token& look() {
    if (pending_name_) return *pending_name_;
    return lex_.peek();
  }

  // Reads "[+|-] [number] name" terms until a relation, section keyword or
  // end of input.
  void parse_terms(std::vector<std::uint32_t>& idx, std::vector<double>& val,
                   double* constant) {
    double sign = 1.0;
    double coef = 1.0;
    bool has_coef = false;
    while (true) {
      const Token& t = look();
      if (t.type == Tok::End || t.type == Tok::Relation) break;
      if (t.type == Tok::Name && is_keyword(t.text)) break;
      Token tok = take();
      if (tok.type == Tok::Plus) continue;
      if (tok.type == Tok::Minus) {
        sign = -sign;
        continue;
      }
      if (tok.type == Tok::Number) {
        coef *= tok.value;
        has_coef = true;
        continue;
      }
      if (tok.type == Tok::Name) {
        idx.push_back(static_cast<std::uint32_t>(var(tok.text)));
        val.push_back(sign * coef);
        sign = 1.0;
        coef = 1.0;
        has_coef = false;
        continue;
      }
      lex_.fail("unexpected token in linear expression", tok.line);
    }
    if (has_coef && constant) *constant += sign * coef;
  }

  static bool is_keyword(const std::string& text) {
    static const char* words[] = {"minimize", "minimise", "minimum", "min",
                                  "maximize", "maximise", "maximum", "max",
                                  "subject",  "such",     "st",      "s.t.",
                                  "bounds",   "bound",    "binaries", "binary",
                                  "bin",      "generals", "general", "gen",
                                  "end"};
    const auto l = lower(text);
    return std::find(std::begin(words), std::end(words), l) != std::end(words);
  }

  void parse_objective() {
    label();
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    double constant = 0.0;
    parse_terms(idx, val, &constant);
    if (look().type == Tok::Relation) {
      lex_.fail("relation operator in the objective", look().line);
    }
    for (std::size_t i = 0; i < idx.size(); ++i) objective_[idx[i]] += val[i];
  }

  void parse_constraint() {
    Constraint row;
    row.name = label();
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    parse_terms(idx, val, nullptr);
    const Token rel = take();
    if (rel.type != Tok::Relation) lex_.fail("expected a relation operator", rel.line);
    row.relation = rel.relation;
    double sign = 1.0;
    while (look().type == Tok::Plus || look().type == Tok::Minus) {
      if (take().type == Tok::Minus) sign = -sign;
    }
    const Token rhs = take();
    if (rhs.type != Tok::Number) lex_.fail("expected a numeric right-hand side", rhs.line);
    row.rhs = sign * rhs.value;
    if (row.name.empty()) row.name = "R" + std::to_string(rows_.size() + 1);
    // Merge repeated variables.
    std::vector<std::size_t> order(idx.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return idx[a] < idx[b]; });
    for (std::size_t k = 0; k < order.size();) {
      const auto j = idx[order[k]];
      double c = 0.0;
      for (; k < order.size() && idx[order[k]] == j; ++k) c += val[order[k]];
      row.index.push_back(j);
      row.coef.push_back(c);
    }
    rows_.push_back(std::move(row));
  }

  // Signed number or +-inf.
  double bound_value() {
    double sign = 1.0;
    while (look().type == Tok::Plus || look().type == Tok::Minus) {
      if (take().type == Tok::Minus) sign = -sign;
    }
    const Token t = take();
    if (t.type == Tok::Number) return sign * t.value;
    if (t.type == Tok::Name && is_infinity(t.text)) return sign * kInf;
    lex_.fail("expected a bound value", t.line);
  }

  static void apply(Variable& v, Relation rel, double value, bool var_on_left) {
    // var_on_left: "x rel value"; otherwise "value rel x".
    Relation r = rel;
    if (!var_on_left && r != Relation::Equal) {
      r = r == Relation::LessEqual ? Relation::GreaterEqual : Relation::LessEqual;
    }
    switch (r) {
      case Relation::LessEqual: v.upper = value; break;
      case Relation::GreaterEqual: v.lower = value; break;
      case Relation::Equal: v.lower = v.upper = value; break;
    }
  }

  void parse_bound() {
    const Token& first = look();
    const bool starts_with_value =
        first.type == Tok::Number || first.type == Tok::Plus ||
        first.type == Tok::Minus ||
        (first.type == Tok::Name && is_infinity(first.text));
    if (starts_with_value) {
      const double v = bound_value();
      const Token rel = take();
      if (rel.type != Tok::Relation) lex_.fail("expected a relation in bound", rel.line);
      const Token name = take();
      if (name.type != Tok::Name) lex_.fail("expected a variable in bound", name.line);
      auto& var_ref = vars_[var(name.text)];
      apply(var_ref, rel.relation, v, false);
      if (look().type == Tok::Relation) {
        const Token rel2 = take();
        apply(vars_[var(name.text)], rel2.relation, bound_value(), true);
      }
      return;
    }
    const Token name = take();
    if (name.type != Tok::Name) lex_.fail("expected a variable in bound", name.line);
    const auto j = var(name.text);
    if (look().type == Tok::Name && lower(look().text) == "free") {
      take();
      vars_[j].lower = -kInf;
      vars_[j].upper = kInf;
      return;
    }
    const Token rel = take();
    if (rel.type != Tok::Relation) lex_.fail("expected a relation in bound", rel.line);
    apply(vars_[j], rel.relation, bound_value(), true);
  }

  Lexer lex_;
  std::optional<Token> pending_name_;
  Sense sense_ = Sense::Minimize;
  bool saw_objective_ = false;
  std::vector<Variable> vars_;
  std::vector<double> objective_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Constraint> rows_;
};

}  // namespace

MilpProblem parse_lp(std::istream& in, const std::string& source) {
  return Parser(in, source).parse();
}

MilpProblem read_lp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return parse_lp(in, path.string());
}

}  // namespace flexsched::milp
