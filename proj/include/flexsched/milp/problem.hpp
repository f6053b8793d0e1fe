#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flexsched::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Minimize, Maximize };
enum class Relation { LessEqual, GreaterEqual, Equal };

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  bool integer = false;
};

/// Sparse row: index[i] pairs with coef[i]. Indices are unique.
struct Constraint {
  std::string name;
  std::vector<std::uint32_t> index;
  std::vector<double> coef;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;

  std::size_t size() const noexcept { return index.size(); }
};

struct Term {
  std::size_t var;
  double coef;
};

/// Mixed-integer linear program with a sparse row-wise constraint store.
class MilpProblem {
 public:
  std::size_t add_variable(std::string name, double lower, double upper,
                           bool integer = false);
  std::size_t add_binary(std::string name) {
    return add_variable(std::move(name), 0.0, 1.0, true);
  }

  /// Zero coefficients are dropped and repeated indices merged.
  std::size_t add_constraint(std::string name, std::span<const Term> terms,
                             Relation relation, double rhs);
  std::size_t add_constraint(Constraint row);

  void set_sense(Sense sense) { sense_ = sense; }
  void set_objective(std::size_t var, double coef);

  Sense sense() const noexcept { return sense_; }
  const std::vector<Variable>& variables() const noexcept { return vars_; }
  std::vector<Variable>& variables() noexcept { return vars_; }
  const std::vector<Constraint>& constraints() const noexcept { return rows_; }
  const std::vector<double>& objective() const noexcept { return obj_; }

  std::size_t num_variables() const noexcept { return vars_.size(); }
  std::size_t num_constraints() const noexcept { return rows_.size(); }
  std::size_t num_nonzeros() const noexcept;
  std::size_t num_integers() const noexcept;
  std::optional<std::size_t> find_variable(std::string_view name) const;

  double objective_value(std::span<const double> x) const;
  /// Largest bound or row violation of x (0 when feasible).
  double max_violation(std::span<const double> x) const;

  /// Names unique and non-empty, indices in range, finite coefficients,
  /// lower <= upper, integer variables with finite bounds.
  void validate() const;
  /// validate() without the name checks.
  void validate_numbers() const;

  void reserve_variables(std::size_t n) {
    vars_.reserve(n);
    obj_.reserve(n);
  }
  void reserve_constraints(std::size_t n) { rows_.reserve(n); }

 private:
  Sense sense_ = Sense::Minimize;
  std::vector<Variable> vars_;
  std::vector<double> obj_;
  std::vector<Constraint> rows_;
};

/// Structural equality up to the given relative coefficient tolerance.
/// Variables are matched by name, constraints by position.
bool structurally_equal(const MilpProblem& a, const MilpProblem& b,
                        double tol = 0.0);

/// CSV with columns variable, value.
void write_solution(const MilpProblem& problem, std::span<const double> x,
                    const std::filesystem::path& path);

}  // namespace flexsched::milp
