#pragma once

// CPLEX-style LP text format (Maximize/Minimize, Subject To, Bounds,
// Binaries, Generals, End).

#include <filesystem>
#include <iosfwd>
#include <string>

#include "flexsched/milp/problem.hpp"

namespace flexsched::milp {

/// Coefficients use 17 significant digits; long rows wrap across lines.
void write_lp(const MilpProblem& problem, std::ostream& out);
void write_lp(const MilpProblem& problem, const std::filesystem::path& path);

/// Parses the subset of the format produced by write_lp plus common
/// variants (keyword abbreviations, "free" bounds, '<' for '<=').
/// Variables are ordered by first appearance.
MilpProblem parse_lp(std::istream& in, const std::string& source = "<stream>");
MilpProblem read_lp(const std::filesystem::path& path);

}  // namespace flexsched::milp
