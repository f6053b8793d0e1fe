#include "flexsched/milp/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "flexsched/csv.hpp"
#include "flexsched/errors.hpp"

namespace flexsched::milp {

std::size_t MilpProblem::add_variable(std::string name, double lower,
                                      double upper, bool integer) {
  vars_.push_back({std::move(name), lower, upper, integer});
  obj_.push_back(0.0);
  return vars_.size() - 1;
}

std::size_t MilpProblem::add_constraint(std::string name,
                                        std::span<const Term> terms,
                                        Relation relation, double rhs) {
  std::vector<Term> sorted(terms.begin(), terms.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Term& a, const Term& b) { return a.var < b.var; });
  Constraint row;
  row.name = std::move(name);
  row.relation = relation;
  row.rhs = rhs;
  for (std::size_t i = 0; i < sorted.size();) {
    double c = 0.0;
    const auto var = sorted[i].var;
    for (; i < sorted.size() && sorted[i].var == var; ++i) c += sorted[i].coef;
    if (c != 0.0) {
      row.index.push_back(static_cast<std::uint32_t>(var));
      row.coef.push_back(c);
    }
  }
  rows_.push_back(std::move(row));
  return rows_.size() - 1;
}

std::size_t MilpProblem::add_constraint(Constraint row) {
  if (row.index.size() != row.coef.size()) {
    throw InvalidArgument("constraint '" + row.name +
                          "': index/coefficient length mismatch");
  }
  std::size_t w = 0;
  for (std::size_t i = 0; i < row.index.size(); ++i) {
    if (row.coef[i] != 0.0) {
      row.index[w] = row.index[i];
      row.coef[w] = row.coef[i];
      ++w;
    }
  }
  row.index.resize(w);
  row.coef.resize(w);
  rows_.push_back(std::move(row));
  return rows_.size() - 1;
}

void MilpProblem::set_objective(std::size_t var, double coef) {
  if (var >= obj_.size()) {
    throw InvalidArgument("objective references an undeclared variable");
  }
  obj_[var] = coef;
}

std::size_t MilpProblem::num_nonzeros() const noexcept {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.size();
  return n;
}

std::size_t MilpProblem::num_integers() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      vars_.begin(), vars_.end(), [](const Variable& v) { return v.integer; }));
}

std::optional<std::size_t> MilpProblem::find_variable(
    std::string_view name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].name == name) return i;
  }
  return std::nullopt;
}

double MilpProblem::objective_value(std::span<const double> x) const {
  double v = 0.0;
  for (std::size_t j = 0; j < obj_.size(); ++j) v += obj_[j] * x[j];
  return v;
}

double MilpProblem::max_violation(std::span<const double> x) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    worst = std::max(worst, vars_[j].lower - x[j]);
    worst = std::max(worst, x[j] - vars_[j].upper);
  }
  for (const auto& r : rows_) {
    double lhs = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) lhs += r.coef[i] * x[r.index[i]];
    switch (r.relation) {
      case Relation::LessEqual: worst = std::max(worst, lhs - r.rhs); break;
      case Relation::GreaterEqual: worst = std::max(worst, r.rhs - lhs); break;
      case Relation::Equal: worst = std::max(worst, std::abs(lhs - r.rhs)); break;
    }
  }
  return worst;
}

void MilpProblem::validate() const {
  std::unordered_set<std::string_view> names;
  names.reserve(vars_.size());
  for (const auto& v : vars_) {
    if (v.name.empty()) throw InvalidArgument("variable with empty name");
    if (!names.insert(v.name).second) {
      throw InvalidArgument("duplicate variable name '" + v.name + "'");
    }
  }
  validate_numbers();
}

void MilpProblem::validate_numbers() const {
  for (const auto& v : vars_) {
    if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower > v.upper) {
      throw InvalidArgument("variable '" + v.name + "': invalid bounds");
    }
    if (v.integer && (!std::isfinite(v.lower) || !std::isfinite(v.upper))) {
      throw InvalidArgument("integer variable '" + v.name +
                            "' needs finite bounds");
    }
  }
  for (double c : obj_) {
    if (!std::isfinite(c)) throw InvalidArgument("non-finite objective term");
  }
  for (const auto& r : rows_) {
    if (r.index.size() != r.coef.size()) {
      throw InvalidArgument("constraint '" + r.name + "': malformed row");
    }
    if (!std::isfinite(r.rhs)) {
      throw InvalidArgument("constraint '" + r.name + "': non-finite rhs");
    }
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r.index[i] >= vars_.size()) {
        throw InvalidArgument("constraint '" + r.name +
                              "' references an undeclared variable");
      }
      if (!std::isfinite(r.coef[i])) {
        throw InvalidArgument("constraint '" + r.name +
                              "': non-finite coefficient");
      }
    }
  }
}

namespace {

bool close(double a, double b, double tol) {
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

bool structurally_equal(const MilpProblem& a, const MilpProblem& b,
                        double tol) {
  if (a.sense() != b.sense() || a.num_variables() != b.num_variables() ||
      a.num_constraints() != b.num_constraints()) {
    return false;
  }
  // Variables are matched by name; b_of[j] is the index in b of a's j.
  std::unordered_map<std::string_view, std::size_t> b_index;
  for (std::size_t j = 0; j < b.num_variables(); ++j) {
    b_index.emplace(b.variables()[j].name, j);
  }
  std::vector<std::size_t> b_of(a.num_variables());
  for (std::size_t j = 0; j < a.num_variables(); ++j) {
    const auto& va = a.variables()[j];
    const auto it = b_index.find(va.name);
    if (it == b_index.end()) return false;
    b_of[j] = it->second;
    const auto& vb = b.variables()[it->second];
    if (va.integer != vb.integer || !close(va.lower, vb.lower, tol) ||
        !close(va.upper, vb.upper, tol) ||
        !close(a.objective()[j], b.objective()[it->second], tol)) {
      return false;
    }
  }
  std::vector<std::pair<std::size_t, double>> ta, tb;
  for (std::size_t i = 0; i < a.num_constraints(); ++i) {
    const auto& ra = a.constraints()[i];
    const auto& rb = b.constraints()[i];
    if (ra.name != rb.name || ra.relation != rb.relation ||
        !close(ra.rhs, rb.rhs, tol) || ra.size() != rb.size()) {
      return false;
    }
    ta.clear();
    tb.clear();
    for (std::size_t k = 0; k < ra.size(); ++k) ta.emplace_back(b_of[ra.index[k]], ra.coef[k]);
    for (std::size_t k = 0; k < rb.size(); ++k) tb.emplace_back(rb.index[k], rb.coef[k]);
    std::sort(ta.begin(), ta.end());
    std::sort(tb.begin(), tb.end());
    for (std::size_t k = 0; k < ta.size(); ++k) {
      if (ta[k].first != tb[k].first || !close(ta[k].second, tb[k].second, tol)) {
        return false;
      }
    }
  }
  return true;
}

void write_solution(const MilpProblem& problem, std::span<const double> x,
                    const std::filesystem::path& path) {
  if (x.size() != problem.num_variables()) {
    throw InvalidArgument("solution length does not match the problem");
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "variable,value\n";
  for (std::size_t j = 0; j < x.size(); ++j) {
    out << problem.variables()[j].name << ',' << csv::format(x[j]) << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace flexsched::milp
