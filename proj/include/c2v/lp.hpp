#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace c2v {

inline constexpr double lp_inf = std::numeric_limits<double>::infinity();

enum class LpSense { le, ge, eq };

struct LpTerm {
    int var;
    double coeff;
};

struct LpRow {
    std::vector<LpTerm> terms;
    LpSense sense = LpSense::le;
    double rhs = 0.0;
    std::string name;
};

/// Maximization LP with bounded variables and sparse rows.
class LpModel {
public:
    int add_variable(double lower, double upper, double objective = 0.0, std::string name = {});
    /// Terms must reference existing variables; duplicates are summed.
    int add_row(std::vector<LpTerm> terms, LpSense sense, double rhs, std::string name = {});

    void set_objective(int var, double coeff) { objective_.at(static_cast<std::size_t>(var)) = coeff; }
    void set_objective_constant(double c) { objective_constant_ = c; }
    void set_bounds(int var, double lower, double upper);

    int num_vars() const { return static_cast<int>(lower_.size()); }
    int num_rows() const { return static_cast<int>(rows_.size()); }
    double lower(int j) const { return lower_[static_cast<std::size_t>(j)]; }
    double upper(int j) const { return upper_[static_cast<std::size_t>(j)]; }
    double objective(int j) const { return objective_[static_cast<std::size_t>(j)]; }
    double objective_constant() const { return objective_constant_; }
    const std::string& var_name(int j) const { return names_[static_cast<std::size_t>(j)]; }
    const LpRow& row(int i) const { return rows_[static_cast<std::size_t>(i)]; }

private:
    std::vector<double> lower_, upper_, objective_;
    std::vector<std::string> names_;
    std::vector<LpRow> rows_;
    double objective_constant_ = 0.0;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

const char* to_string(LpStatus s);

enum class VarStatus : std::uint8_t { basic, at_lower, at_upper, free_zero };

/// Simplex basis: one status per variable and per row activity. A basis from
/// a smaller model (fewer rows or variables) can seed a larger one; the new
/// rows start basic and new variables nonbasic.
struct LpBasis {
    std::vector<VarStatus> vars;
    std::vector<VarStatus> rows;
    bool empty() const { return vars.empty() && rows.empty(); }
};

struct LpOptions {
    double feas_tol = 1e-7;
    double opt_tol = 1e-7;
    double pivot_tol = 1e-9;
    int max_iterations = 100000;
    int bland_after = 50;       // degenerate pivots before switching to Bland's rule
    int refactor_every = 100;
};

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    double objective = 0.0;
    std::vector<double> x;
    std::vector<double> row_activity;
    LpBasis basis;
    int iterations = 0;
    int dual_iterations = 0;
};

/// Dense-tableau bounded-variable simplex. With a warm basis the dual simplex
/// runs first (when that basis is dual feasible), then primal cleanup.
LpSolution solve_lp(const LpModel& model, const LpBasis* warm = nullptr, const LpOptions& opts = {});

/// Writes the model in CPLEX LP text format.
void write_lp(const LpModel& model, std::ostream& out, const std::string& title = {});

/// Largest bound or row violation of x.
double max_violation(const LpModel& model, const std::vector<double>& x);

}  // namespace c2v
