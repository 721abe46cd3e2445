#include "c2v/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "c2v/network.hpp"

namespace c2v {

int LpModel::add_variable(double lower, double upper, double objective, std::string name) {
    if (!(lower <= upper)) throw std::invalid_argument("variable lower bound exceeds upper bound");
    lower_.push_back(lower);
    upper_.push_back(upper);
    objective_.push_back(objective);
    if (name.empty()) name = "x" + std::to_string(lower_.size());
    names_.push_back(std::move(name));
    return num_vars() - 1;
}

int LpModel::add_row(std::vector<LpTerm> terms, LpSense sense, double rhs, std::string name) {
    std::sort(terms.begin(), terms.end(), [](const LpTerm& a, const LpTerm& b) { return a.var < b.var; });
    std::vector<LpTerm> merged;
    for (const LpTerm& t : terms) {
        if (t.var < 0 || t.var >= num_vars()) throw std::out_of_range("row references an undeclared variable");
        if (!merged.empty() && merged.back().var == t.var) {
            merged.back().coeff += t.coeff;
        } else {
            merged.push_back(t);
        }
    }
    std::erase_if(merged, [](const LpTerm& t) { return t.coeff == 0.0; });
    if (name.empty()) name = "c" + std::to_string(rows_.size() + 1);
    rows_.push_back({std::move(merged), sense, rhs, std::move(name)});
    return num_rows() - 1;
}

void LpModel::set_bounds(int var, double lower, double upper) {
    if (!(lower <= upper)) throw std::invalid_argument("variable lower bound exceeds upper bound");
    lower_.at(static_cast<std::size_t>(var)) = lower;
    upper_.at(static_cast<std::size_t>(var)) = upper;
}

const char* to_string(LpStatus s) {
    switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "?";
}

double max_violation(const LpModel& model, const std::vector<double>& x) {
    double worst = 0.0;
    for (int j = 0; j < model.num_vars(); ++j) {
        worst = std::max({worst, model.lower(j) - x[j], x[j] - model.upper(j)});
    }
    for (int i = 0; i < model.num_rows(); ++i) {
        const LpRow& r = model.row(i);
        double a = 0.0;
        for (const LpTerm& t : r.terms) a += t.coeff * x[static_cast<std::size_t>(t.var)];
        if (r.sense != LpSense::ge) worst = std::max(worst, a - r.rhs);
        if (r.sense != LpSense::le) worst = std::max(worst, r.rhs - a);
    }
    return worst;
}

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Columns 0..n-1 are the structural variables, n..n+m-1 the row activities
// r_i = a_i.x, so the equality system is [A -I] (x, r) = 0.
class Simplex {
public:
    Simplex(const LpModel& model, const LpOptions& opts) : model_(model), opts_(opts) {
        n_ = model.num_vars();
        m_ = model.num_rows();
        N_ = n_ + m_;
        A_ = Matrix::Zero(m_, n_);
        for (int i = 0; i < m_; ++i) {
            for (const LpTerm& t : model.row(i).terms) A_(i, t.var) = t.coeff;
        }
        lo_.resize(N_);
        hi_.resize(N_);
        cost_ = Vector::Zero(N_);
        for (int j = 0; j < n_; ++j) {
            lo_[j] = model.lower(j);
            hi_[j] = model.upper(j);
            cost_[j] = model.objective(j);
        }
        for (int i = 0; i < m_; ++i) {
            const LpRow& r = model.row(i);
            lo_[n_ + i] = r.sense == LpSense::le ? -lp_inf : r.rhs;
            hi_[n_ + i] = r.sense == LpSense::ge ? lp_inf : r.rhs;
        }
        status_.assign(N_, VarStatus::at_lower);
        x_ = Vector::Zero(N_);
        head_.assign(m_, -1);
    }

    LpSolution run(const LpBasis* warm) {
        bool try_dual = false;
        if (warm && !warm->empty() && load_basis(*warm) && refactor()) {
            try_dual = true;
        } else {
            slack_basis();
            refactor();
        }
        LpStatus st = LpStatus::optimal;
        if (try_dual && make_dual_feasible()) st = dual_loop();
        if (st == LpStatus::optimal) st = primal_loop();
        return finish(st);
    }

private:
    const LpModel& model_;
    LpOptions opts_;
    int n_ = 0, m_ = 0, N_ = 0;
    Matrix A_;
    Matrix T_;   // B^-1 [A -I]
    std::vector<double> lo_, hi_;
    Vector cost_;
    std::vector<VarStatus> status_;
    Vector x_;
    std::vector<int> head_;
    int iterations_ = 0;
    int dual_iterations_ = 0;
    int since_refactor_ = 0;
    int degenerate_streak_ = 0;

    double column_entry(int k, int j) const { return j < n_ ? A_(k, j) : (j - n_ == k ? -1.0 : 0.0); }

    void place_nonbasic(int j) {
        if (status_[j] == VarStatus::at_lower && !std::isfinite(lo_[j])) {
            status_[j] = std::isfinite(hi_[j]) ? VarStatus::at_upper : VarStatus::free_zero;
        } else if (status_[j] == VarStatus::at_upper && !std::isfinite(hi_[j])) {
            status_[j] = std::isfinite(lo_[j]) ? VarStatus::at_lower : VarStatus::free_zero;
        } else if (status_[j] == VarStatus::free_zero && (std::isfinite(lo_[j]) || std::isfinite(hi_[j]))) {
            status_[j] = std::isfinite(lo_[j]) ? VarStatus::at_lower : VarStatus::at_upper;
        }
        x_[j] = status_[j] == VarStatus::at_lower ? lo_[j] : status_[j] == VarStatus::at_upper ? hi_[j] : 0.0;
    }

    void slack_basis() {
        for (int j = 0; j < n_; ++j) {
            status_[j] = VarStatus::at_lower;
            place_nonbasic(j);
        }
        for (int i = 0; i < m_; ++i) {
            status_[n_ + i] = VarStatus::basic;
            head_[i] = n_ + i;
        }
    }

    bool load_basis(const LpBasis& b) {
        if (b.vars.size() > static_cast<std::size_t>(n_) || b.rows.size() > static_cast<std::size_t>(m_)) return false;
        for (int j = 0; j < n_; ++j) status_[j] = j < static_cast<int>(b.vars.size()) ? b.vars[j] : VarStatus::at_lower;
        for (int i = 0; i < m_; ++i) {
            status_[n_ + i] = i < static_cast<int>(b.rows.size()) ? b.rows[i] : VarStatus::basic;
        }
        int k = 0;
        for (int j = 0; j < N_; ++j) {
            if (status_[j] != VarStatus::basic) {
                place_nonbasic(j);
                continue;
            }
            if (k == m_) return false;
            head_[k++] = j;
        }
        return k == m_;
    }

    // Rebuilds the tableau and basic values from scratch. False if B is singular.
    bool refactor() {
        since_refactor_ = 0;
        if (m_ == 0) {
            T_.resize(0, N_);
            return true;
        }
        Matrix B(m_, m_);
        for (int k = 0; k < m_; ++k) {
            for (int r = 0; r < m_; ++r) B(r, k) = column_entry(r, head_[k]);
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        if (!(lu.rcond() >= 1e-14)) return false;
        Eigen::MatrixXd M(m_, N_);
        M.leftCols(n_) = A_;
        M.rightCols(m_) = -Eigen::MatrixXd::Identity(m_, m_);
        T_ = lu.solve(M);
        Vector rhs = Vector::Zero(m_);
        for (int j = 0; j < N_; ++j) {
            if (status_[j] == VarStatus::basic || x_[j] == 0.0) continue;
            for (int r = 0; r < m_; ++r) rhs[r] -= column_entry(r, j) * x_[j];
        }
        const Vector xb = lu.solve(rhs);
        for (int k = 0; k < m_; ++k) x_[head_[k]] = xb[k];
        return true;
    }

    double infeasibility(int j) const {
        if (x_[j] < lo_[j] - opts_.feas_tol) return lo_[j] - x_[j];
        if (x_[j] > hi_[j] + opts_.feas_tol) return x_[j] - hi_[j];
        return 0.0;
    }

    Vector reduced_costs(const Vector& basic_cost, bool with_structural) const {
        Vector d = with_structural ? cost_ : Vector::Zero(N_);
        if (m_ > 0) d.noalias() -= T_.transpose() * basic_cost;
        return d;
    }

    Vector phase2_costs() const {
        Vector cb(m_);
        for (int k = 0; k < m_; ++k) cb[k] = cost_[head_[k]];
        return reduced_costs(cb, true);
    }

    void pivot(int r, int q) {
        const double a = T_(r, q);
        T_.row(r) /= a;
        Vector col = T_.col(q);
        col[r] = 0.0;
        T_.noalias() -= col * T_.row(r);
        status_[q] = VarStatus::basic;
        head_[r] = q;
        ++since_refactor_;
    }

    bool maybe_refactor() {
        if (since_refactor_ < opts_.refactor_every) return true;
        return refactor();
    }

    // Composite primal simplex from the current basis.
    LpStatus primal_loop() {
        int verify_passes = 0;
        for (;;) {
            if (iterations_ >= opts_.max_iterations) return LpStatus::iteration_limit;
            if (!maybe_refactor()) return LpStatus::iteration_limit;

            Vector c1 = Vector::Zero(m_);
            bool infeasible = false;
            for (int k = 0; k < m_; ++k) {
                const int b = head_[k];
                if (x_[b] < lo_[b] - opts_.feas_tol) {
                    c1[k] = 1.0;
                    infeasible = true;
                } else if (x_[b] > hi_[b] + opts_.feas_tol) {
                    c1[k] = -1.0;
                    infeasible = true;
                }
            }
            const Vector d = infeasible ? reduced_costs(c1, false) : phase2_costs();
            const bool bland = degenerate_streak_ >= opts_.bland_after;

            int q = -1;
            double best = 0.0;
            for (int j = 0; j < N_; ++j) {
                const VarStatus s = status_[j];
                if (s == VarStatus::basic) continue;
                double score = 0.0;
                if (s == VarStatus::at_lower && d[j] > opts_.opt_tol && hi_[j] > lo_[j]) score = d[j];
                else if (s == VarStatus::at_upper && d[j] < -opts_.opt_tol && hi_[j] > lo_[j]) score = -d[j];
                else if (s == VarStatus::free_zero && std::abs(d[j]) > opts_.opt_tol) score = std::abs(d[j]);
                if (score <= 0.0) continue;
                if (bland) {
                    q = j;
                    break;
                }
                if (score > best) {
                    best = score;
                    q = j;
                }
            }
            if (q < 0) {
                // Confirm on a fresh factorization before concluding.
                if (since_refactor_ > 0 && verify_passes < 3) {
                    ++verify_passes;
                    if (!refactor()) return LpStatus::iteration_limit;
                    continue;
                }
                return infeasible ? LpStatus::infeasible : LpStatus::optimal;
            }

            const double dir = d[q] > 0.0 ? 1.0 : -1.0;
            double t = lp_inf;
            int r = -1;
            double r_alpha = 0.0;
            bool r_to_upper = false;
            if (std::isfinite(lo_[q]) && std::isfinite(hi_[q])) t = hi_[q] - lo_[q];
            for (int k = 0; k < m_; ++k) {
                const double alpha = T_(k, q);
                if (std::abs(alpha) <= opts_.pivot_tol) continue;
                const int b = head_[k];
                const double rate = -alpha * dir;
                double tk = lp_inf;
                bool to_upper = false;
                // an infeasible basic only blocks at the bound it violates
                if (x_[b] < lo_[b] - opts_.feas_tol) {
                    if (rate > 0.0) tk = (lo_[b] - x_[b]) / rate;
                } else if (x_[b] > hi_[b] + opts_.feas_tol) {
                    if (rate < 0.0) tk = (hi_[b] - x_[b]) / rate;
                    to_upper = true;
                } else if (rate > 0.0 && std::isfinite(hi_[b])) {
                    tk = std::max(0.0, (hi_[b] - x_[b]) / rate);
                    to_upper = true;
                } else if (rate < 0.0 && std::isfinite(lo_[b])) {
                    tk = std::max(0.0, (lo_[b] - x_[b]) / rate);
                }
                if (!std::isfinite(tk)) continue;
                bool take = tk < t - 1e-12;
                if (!take && tk <= t + 1e-12) {
                    take = r < 0 || (bland ? b < head_[r] : std::abs(alpha) > std::abs(r_alpha));
                }
                if (take) {
                    t = std::min(t, tk);
                    r = k;
                    r_alpha = alpha;
                    r_to_upper = to_upper;
                }
            }
            if (!std::isfinite(t)) {
                if (infeasible) return LpStatus::infeasible;
                return LpStatus::unbounded;
            }
            ++iterations_;
            degenerate_streak_ = t <= 1e-12 ? degenerate_streak_ + 1 : 0;

            const double step = dir * t;
            x_[q] += step;
            for (int k = 0; k < m_; ++k) x_[head_[k]] -= T_(k, q) * step;
            if (r < 0) {
                status_[q] = dir > 0.0 ? VarStatus::at_upper : VarStatus::at_lower;
                x_[q] = dir > 0.0 ? hi_[q] : lo_[q];
                continue;
            }
            const int b = head_[r];
            status_[b] = r_to_upper ? VarStatus::at_upper : VarStatus::at_lower;
            pivot(r, q);
            place_nonbasic(b);
        }
    }

    // Flips boxed nonbasics whose reduced cost has the wrong sign. False when
    // some variable cannot be made dual feasible.
    bool make_dual_feasible() {
        const Vector d = phase2_costs();
        bool flipped = false;
        for (int j = 0; j < N_; ++j) {
            const VarStatus s = status_[j];
            if (s == VarStatus::at_lower && d[j] > opts_.opt_tol && hi_[j] > lo_[j]) {
                if (!std::isfinite(hi_[j])) return false;
                status_[j] = VarStatus::at_upper;
                flipped = true;
            } else if (s == VarStatus::at_upper && d[j] < -opts_.opt_tol && hi_[j] > lo_[j]) {
                if (!std::isfinite(lo_[j])) return false;
                status_[j] = VarStatus::at_lower;
                flipped = true;
            } else if (s == VarStatus::free_zero && std::abs(d[j]) > opts_.opt_tol) {
                return false;
            }
            if (s != VarStatus::basic) place_nonbasic(j);
        }
        return !flipped || refactor();
    }

    LpStatus dual_loop() {
        for (;;) {
            if (iterations_ >= opts_.max_iterations) return LpStatus::iteration_limit;
            if (!maybe_refactor()) return LpStatus::iteration_limit;

            int r = -1;
            double worst = 0.0;
            for (int k = 0; k < m_; ++k) {
                const double v = infeasibility(head_[k]);
                if (v > worst) {
                    worst = v;
                    r = k;
                }
            }
            if (r < 0) return LpStatus::optimal;

            const int b = head_[r];
            const bool raise = x_[b] < lo_[b];
            const double target = raise ? lo_[b] : hi_[b];
            const Vector d = phase2_costs();
            const bool bland = degenerate_streak_ >= opts_.bland_after;
            int q = -1;
            double best_ratio = lp_inf;
            double q_alpha = 0.0;
            for (int j = 0; j < N_; ++j) {
                const VarStatus s = status_[j];
                if (s == VarStatus::basic) continue;
                const double alpha = T_(r, j);
                if (std::abs(alpha) <= opts_.pivot_tol) continue;
                // x_b moves by -alpha per unit increase of x_j.
                bool ok = false;
                if (s == VarStatus::free_zero) ok = true;
                else if (hi_[j] == lo_[j]) ok = false;
                else if (s == VarStatus::at_lower) ok = raise ? alpha < 0.0 : alpha > 0.0;
                else ok = raise ? alpha > 0.0 : alpha < 0.0;
                if (!ok) continue;
                const double ratio = std::abs(d[j]) / std::abs(alpha);
                bool take = q < 0 || ratio < best_ratio - 1e-12;
                if (!take && ratio <= best_ratio + 1e-12) take = !bland && std::abs(alpha) > std::abs(q_alpha);
                if (take) {
                    best_ratio = std::min(best_ratio, ratio);
                    q = j;
                    q_alpha = alpha;
                }
            }
            if (q < 0) return LpStatus::infeasible;
            ++iterations_;
            ++dual_iterations_;
            degenerate_streak_ = best_ratio <= 1e-12 ? degenerate_streak_ + 1 : 0;

            const double step = (x_[b] - target) / q_alpha;
            x_[q] += step;
            for (int k = 0; k < m_; ++k) x_[head_[k]] -= T_(k, q) * step;
            status_[b] = raise ? VarStatus::at_lower : VarStatus::at_upper;
            pivot(r, q);
            place_nonbasic(b);
        }
    }

    LpSolution finish(LpStatus st) {
        LpSolution sol;
        sol.iterations = iterations_;
        sol.dual_iterations = dual_iterations_;
        if (st == LpStatus::optimal && m_ > 0 && !refactor()) st = LpStatus::iteration_limit;
        sol.status = st;
        sol.x.assign(x_.data(), x_.data() + n_);
        sol.row_activity.assign(x_.data() + n_, x_.data() + N_);
        sol.basis.vars.assign(status_.begin(), status_.begin() + n_);
        sol.basis.rows.assign(status_.begin() + n_, status_.end());
        if (st == LpStatus::unbounded) {
            sol.objective = lp_inf;
        } else {
            sol.objective = model_.objective_constant();
            for (int j = 0; j < n_; ++j) sol.objective += cost_[j] * x_[j];
        }
        return sol;
    }
};

}  // namespace

LpSolution solve_lp(const LpModel& model, const LpBasis* warm, const LpOptions& opts) {
    Simplex s(model, opts);
    return s.run(warm);
}

namespace {

void write_coeff(std::ostream& out, double c, const std::string& name, bool first) {
    if (c < 0) {
        out << "- ";
    } else if (!first) {
        out << "+ ";
    }
    out << format_real(std::abs(c)) << ' ' << name;
}

std::string bound_text(double v) {
    if (v == lp_inf) return "+inf";
    if (v == -lp_inf) return "-inf";
    return format_real(v);
}

}  // namespace

void write_lp(const LpModel& model, std::ostream& out, const std::string& title) {
    if (!title.empty()) out << "\\ " << title << '\n';
    out << "Maximize\n obj:";
    bool first = true;
    for (int j = 0; j < model.num_vars(); ++j) {
        if (model.objective(j) == 0.0) continue;
        out << ' ';
        write_coeff(out, model.objective(j), model.var_name(j), first);
        first = false;
    }
    if (model.objective_constant() != 0.0) {
        out << ' ';
        write_coeff(out, model.objective_constant(), "constant", first);
    } else if (first && model.num_vars() > 0) {
        out << " 0 " << model.var_name(0);
    }
    out << "\nSubject To\n";
    for (int i = 0; i < model.num_rows(); ++i) {
        const LpRow& r = model.row(i);
        out << ' ' << r.name << ':';
        bool f = true;
        for (const LpTerm& t : r.terms) {
            out << ' ';
            write_coeff(out, t.coeff, model.var_name(t.var), f);
            f = false;
        }
        if (f) out << " 0 " << model.var_name(0);
        out << (r.sense == LpSense::le ? " <= " : r.sense == LpSense::ge ? " >= " : " = ") << format_real(r.rhs) << '\n';
    }
    out << "Bounds\n";
    for (int j = 0; j < model.num_vars(); ++j) {
        const double lo = model.lower(j), hi = model.upper(j);
        if (lo == -lp_inf && hi == lp_inf) {
            out << ' ' << model.var_name(j) << " free\n";
        } else if (lo == hi) {
            out << ' ' << model.var_name(j) << " = " << format_real(lo) << '\n';
        } else {
            out << ' ' << bound_text(lo) << " <= " << model.var_name(j) << " <= " << bound_text(hi) << '\n';
        }
    }
    if (model.objective_constant() != 0.0) out << " constant = 1\n";
    out << "End\n";
}

}  // namespace c2v
