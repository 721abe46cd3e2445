#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "c2v/lp.hpp"

using namespace c2v;

TEST_CASE("textbook problems") {
    LpModel m;
    const int a = m.add_variable(0, 1, 1);
    const int b = m.add_variable(0, 1, 1);
    m.add_row({{a, 1}, {b, 1}}, LpSense::le, 1);
    const LpSolution s = solve_lp(m);
    CHECK(s.status == LpStatus::optimal);
    CHECK(s.objective == doctest::Approx(1.0));
    CHECK(max_violation(m, s.x) <= 1e-7);

    LpModel box;
    box.add_variable(-1, 2, 3);
    box.add_variable(-4, 5, -1);
    box.set_objective_constant(0.5);
    const LpSolution bs = solve_lp(box);
    CHECK(bs.status == LpStatus::optimal);
    CHECK(bs.objective == doctest::Approx(6 + 4 + 0.5));
    CHECK(bs.x == std::vector<double>{2, -4});
}

TEST_CASE("statuses") {
    LpModel inf;
    const int a = inf.add_variable(0, 1, 1);
    const int b = inf.add_variable(0, 1, 0);
    inf.add_row({{a, 1}, {b, 1}}, LpSense::ge, 3);
    CHECK(solve_lp(inf).status == LpStatus::infeasible);

    LpModel unb;
    const int x = unb.add_variable(0, lp_inf, 1);
    const int y = unb.add_variable(-lp_inf, lp_inf, 0);
    unb.add_row({{x, 1}, {y, -1}}, LpSense::le, 1);
    CHECK(solve_lp(unb).status == LpStatus::unbounded);

    LpModel fr;
    const int u = fr.add_variable(-lp_inf, lp_inf, 1);
    const int v = fr.add_variable(-lp_inf, 2, 0);
    fr.add_row({{u, 1}, {v, -1}}, LpSense::eq, 0);
    const LpSolution fs = solve_lp(fr);
    CHECK(fs.status == LpStatus::optimal);
    CHECK(fs.objective == doctest::Approx(2.0));

    LpOptions none;
    none.max_iterations = 0;
    CHECK(solve_lp(fr, nullptr, none).status == LpStatus::iteration_limit);

    CHECK_THROWS(inf.add_row({{7, 1.0}}, LpSense::le, 0));
    CHECK_THROWS(inf.add_variable(1, 0));
}

TEST_CASE("degenerate cycling example") {
    // Beale's example, which cycles under textbook Dantzig pivoting.
    LpModel m;
    const int x4 = m.add_variable(0, lp_inf, 0.75);
    const int x5 = m.add_variable(0, lp_inf, -20);
    const int x6 = m.add_variable(0, lp_inf, 0.5);
    const int x7 = m.add_variable(0, lp_inf, -6);
    m.add_row({{x4, 0.25}, {x5, -8}, {x6, -1}, {x7, 9}}, LpSense::le, 0);
    m.add_row({{x4, 0.5}, {x5, -12}, {x6, -0.5}, {x7, 3}}, LpSense::le, 0);
    m.add_row({{x6, 1}}, LpSense::le, 1);
    const LpSolution s = solve_lp(m);
    CHECK(s.status == LpStatus::optimal);
    CHECK(s.objective == doctest::Approx(1.25));
}

namespace {

// Maximum over all vertices of a small bounded LP, by brute force.
double vertex_max(const Eigen::MatrixXd& G, const Eigen::VectorXd& h, const Eigen::VectorXd& c, bool& feasible) {
    const int n = static_cast<int>(c.size());
    const int k = static_cast<int>(G.rows());
    double best = -INFINITY;
    feasible = false;
    std::vector<int> pick(static_cast<std::size_t>(n));
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == n) {
            Eigen::MatrixXd S(n, n);
            Eigen::VectorXd r(n);
            for (int i = 0; i < n; ++i) {
                S.row(i) = G.row(pick[i]);
                r[i] = h[pick[i]];
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
            if (!lu.isInvertible()) return;
            const Eigen::VectorXd v = lu.solve(r);
            if (((G * v - h).array() <= 1e-9).all()) {
                feasible = true;
                best = std::max(best, c.dot(v));
            }
            return;
        }
        for (int i = start; i < k; ++i) {
            pick[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace

TEST_CASE("random small LPs against vertex enumeration") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    int feasible_count = 0;
    for (int t = 0; t < 300; ++t) {
        const int n = 2 + static_cast<int>(rng() % 2);
        const int rows = 1 + static_cast<int>(rng() % 5);
        LpModel m;
        Eigen::VectorXd c(n);
        std::vector<double> lo(n), hi(n);
        for (int j = 0; j < n; ++j) {
            lo[j] = u(rng) - 1;
            hi[j] = lo[j] + 0.1 + std::abs(u(rng)) * 2;
            c[j] = u(rng);
            m.add_variable(lo[j], hi[j], c[j]);
        }
        Eigen::MatrixXd G(rows * 2 + 2 * n, n);
        Eigen::VectorXd h(G.rows());
        G.setZero();
        int g = 0;
        for (int i = 0; i < rows; ++i) {
            std::vector<LpTerm> terms;
            Eigen::RowVectorXd a(n);
            for (int j = 0; j < n; ++j) {
                a[j] = u(rng);
                terms.push_back({j, a[j]});
            }
            const double rhs = u(rng) * 0.5;
            const int kind = static_cast<int>(rng() % 3);
            const LpSense sense = kind == 0 ? LpSense::le : kind == 1 ? LpSense::ge : LpSense::eq;
            m.add_row(terms, sense, rhs);
            if (sense != LpSense::ge) G.row(g) = a, h[g++] = rhs;
            if (sense != LpSense::le) G.row(g) = -a, h[g++] = -rhs;
        }
        for (int j = 0; j < n; ++j) {
            G.row(g).setZero();
            G(g, j) = 1;
            h[g++] = hi[j];
            G.row(g).setZero();
            G(g, j) = -1;
            h[g++] = -lo[j];
        }
        bool feasible = false;
        const double want = vertex_max(G.topRows(g), h.head(g), c, feasible);
        const LpSolution s = solve_lp(m);
        if (!feasible) {
            CHECK(s.status == LpStatus::infeasible);
            continue;
        }
        ++feasible_count;
        REQUIRE(s.status == LpStatus::optimal);
        CHECK(s.objective == doctest::Approx(want).epsilon(1e-7));
        CHECK(max_violation(m, s.x) <= 1e-7);
    }
    CHECK(feasible_count > 50);
}

TEST_CASE("warm start after adding rows matches a cold solve") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-1, 1);
    int dual_used = 0;
    for (int t = 0; t < 100; ++t) {
        const int n = 3 + static_cast<int>(rng() % 6);
        LpModel m;
        for (int j = 0; j < n; ++j) m.add_variable(-1, 1, u(rng));
        for (int i = 0; i < n; ++i) {
            std::vector<LpTerm> terms;
            for (int j = 0; j < n; ++j) terms.push_back({j, u(rng)});
            m.add_row(terms, LpSense::le, 0.5 + std::abs(u(rng)));
        }
        LpSolution s = solve_lp(m);
        REQUIRE(s.status == LpStatus::optimal);
        for (int round = 0; round < 3; ++round) {
            // cut off the current optimum
            std::vector<LpTerm> terms;
            double at = 0;
            for (int j = 0; j < n; ++j) {
                const double a = u(rng);
                terms.push_back({j, a});
                at += a * s.x[j];
            }
            m.add_row(terms, LpSense::le, at - 0.05);
            const LpSolution warm = solve_lp(m, &s.basis);
            const LpSolution cold = solve_lp(m);
            REQUIRE(warm.status == cold.status);
            if (cold.status != LpStatus::optimal) break;
            CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-7));
            CHECK(max_violation(m, warm.x) <= 1e-7);
            dual_used += warm.dual_iterations > 0;
            s = warm;
        }
    }
    CHECK(dual_used > 0);
}

TEST_CASE("LP text output") {
    LpModel m;
    const int a = m.add_variable(0, 1, 1, "a");
    const int b = m.add_variable(-lp_inf, lp_inf, -2, "b");
    m.add_row({{a, 1}, {b, -1}}, LpSense::ge, 0.5, "r1");
    std::ostringstream out;
    write_lp(m, out, "demo");
    const std::string s = out.str();
    CHECK(s.find("Maximize\n obj: 1 a - 2 b\n") != std::string::npos);
    CHECK(s.find(" r1: 1 a - 1 b >= 0.5\n") != std::string::npos);
    CHECK(s.find(" b free\n") != std::string::npos);
    CHECK(s.find(" 0 <= a <= 1\n") != std::string::npos);
    CHECK(s.rfind("End\n") == s.size() - 4);
}
