#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "c2v/lp_relax.hpp"
#include "../support/random_instances.hpp"
#include "../support/random_networks.hpp"

using namespace c2v;
using c2v::testing::random_mixed_instance;
using c2v::testing::random_net_case;
using c2v::testing::uniform_point;

namespace {

Network worked_example() { return load_network(std::filesystem::path(C2V_FIXTURES) / "worked_example.net"); }

const BoxDomain unit_square({-1, -1}, {1, 1});

LinearExpr output_objective(const Network& net, int out, double sign = 1.0) {
    LinearExpr e;
    e.coeffs.assign(static_cast<std::size_t>(net.size()), 0.0);
    e.coeffs[static_cast<std::size_t>(net.outputs()[static_cast<std::size_t>(out)])] = sign;
    return e;
}

std::vector<double> lp_point(const DeltaLp& lp, const std::vector<double>& z) {
    std::vector<double> x(static_cast<std::size_t>(lp.model.num_vars()), 0.0);
    for (std::size_t id = 0; id < lp.var_of.size(); ++id) {
        if (lp.var_of[id] >= 0) x[static_cast<std::size_t>(lp.var_of[id])] = z[id];
    }
    return x;
}

OptC2VOptions rounds(int r) {
    OptC2VOptions o;
    o.rounds = r;
    return o;
}

}  // namespace

TEST_CASE("ancestors of an objective") {
    const Network net = worked_example();
    const auto all = objective_ancestors(net, output_objective(net, 0));
    CHECK(all == std::vector<int>{0, 1, 2, 3, 4, 5, 6});
    LinearExpr e;
    e.coeffs = {0, 0, 0, 1};
    CHECK(objective_ancestors(net, e) == std::vector<int>{0, 3});
}

TEST_CASE("triangle LP of the worked example") {
    const Network net = worked_example();
    const auto ib = interval_bounds(net, unit_square);
    const LinearExpr obj = output_objective(net, 0);
    const DeltaLp lp = build_delta_lp(net, unit_square, ib, obj);
    CHECK(lp.mixed == std::vector<int>{2, 3, 5});
    CHECK(lp.model.num_vars() == 7);
    CHECK(lp.model.num_rows() == 3 * 3 + 2);

    const OptC2VResult r0 = optc2v_bound(net, unit_square, ib, obj, rounds(0));
    const OptC2VResult r3 = optc2v_bound(net, unit_square, ib, obj, rounds(3));
    const double exact = exact_max_oracle(net, unit_square, obj);
    CHECK(exact == doctest::Approx(3.0));
    CHECK(r0.value <= 4.0 + 1e-9);
    CHECK(r0.value >= exact - 1e-9);
    CHECK(r3.value <= r0.value + 1e-9);
    CHECK(r3.value >= exact - 1e-9);
    CHECK(r3.round_values.front() == doctest::Approx(r0.value));
    CHECK(r3.pool.size() > 0);

    CHECK_THROWS_AS(build_delta_lp(net, unit_square, {ib.begin(), ib.begin() + 3}, obj), std::invalid_argument);
}

TEST_CASE("fixed-phase networks gain nothing from cuts") {
    std::vector<Neuron> ns(2);
    ns.push_back({NeuronKind::relu, {{0, 1.0}, {1, 1.0}}, 3.0});
    ns.push_back({NeuronKind::relu, {{0, 1.0}, {1, -1.0}}, -5.0});
    ns.push_back({NeuronKind::output, {{2, 1.0}, {3, 2.0}}, 0.0});
    const Network net(2, ns);
    const auto ib = interval_bounds(net, unit_square);
    const LinearExpr obj = output_objective(net, 0);
    const OptC2VResult r = optc2v_bound(net, unit_square, ib, obj, rounds(5));
    CHECK(r.value == doctest::Approx(5.0));
    CHECK(r.round_values.size() == 1);
    CHECK(r.pool.size() == 0);
    CHECK(exact_max_oracle(net, unit_square, obj) == doctest::Approx(5.0));
}

TEST_CASE("cutting planes reach the single-neuron hull") {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + trial % 5;
        const HullInstance inst = random_mixed_instance(n, rng);
        std::vector<Neuron> ns(static_cast<std::size_t>(n));
        Neuron relu{NeuronKind::relu, {}, inst.bias()};
        for (int i = 0; i < n; ++i) relu.arcs.push_back({i, inst.weights()[i]});
        ns.push_back(relu);
        ns.push_back({NeuronKind::output, {{n, 1.0}}, 0.0});
        const Network net(n, ns);

        LinearExpr obj;
        obj.coeffs.assign(static_cast<std::size_t>(net.size()), 0.0);
        for (int i = 0; i < n; ++i) obj.coeffs[i] = 0.5 * u(rng);
        obj.coeffs[n + 1] = 1.0;

        std::vector<ScalarBounds> sb(static_cast<std::size_t>(net.size()));
        for (int i = 0; i < n; ++i) sb[i] = {inst.box().lower(i), inst.box().upper(i)};
        sb[n] = {ell(inst, inst.support()), ell(inst, std::vector<int>{})};
        sb[n + 1] = {0.0, std::max(0.0, sb[n].upper)};

        const OptC2VResult cp = optc2v_bound(net, inst.box(), sb, obj, rounds(200));

        DeltaLp full = build_delta_lp(net, inst.box(), sb, obj);
        for (const auto& [I, h] : enumerate_J(inst)) {
            const HullCut c = cut_from_pair(inst, I, h);
            std::vector<LpTerm> t{{full.var_of[n], 1.0}};
            for (int i = 0; i < n; ++i) t.push_back({full.var_of[i], -c.coeffs[i]});
            full.model.add_row(std::move(t), LpSense::le, c.constant);
        }
        const LpSolution hull = solve_lp(full.model);
        REQUIRE(hull.status == LpStatus::optimal);
        CHECK(cp.value == doctest::Approx(hull.objective).epsilon(1e-7));
    }
}

TEST_CASE("lifted formulation matches the envelope") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 500; ++trial) {
        const HullInstance inst = random_mixed_instance(1 + trial % 7, rng, trial % 3 == 0);
        const auto x = uniform_point(inst.box(), rng);
        const auto tc = tightest_cut_sort(inst, x);
        REQUIRE(tc);
        CHECK(std::abs(lifted_f_tilde(inst, x) - tc->value) <= 1e-7);
    }

    const HullInstance h22({-1.5, 1.0}, 0.5, BoxDomain({0.0, 0.0}, {3.0, 1.5}));
    const std::vector<double> x{1.0, 1.5};
    CHECK(lifted_f_tilde(h22, x) == doctest::Approx(4.0 / 3));
}

TEST_CASE("cuts and triangle rows hold at true network values") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 60; ++trial) {
        const auto nc = random_net_case(rng);
        const auto ib = interval_bounds(nc.net, nc.box);
        const LinearExpr obj = output_objective(nc.net, 0);
        const OptC2VResult r = optc2v_bound(nc.net, nc.box, ib, obj, rounds(4));
        REQUIRE(r.status == LpStatus::optimal);
        for (int s = 0; s < 30; ++s) {
            const auto x = uniform_point(nc.box, rng);
            const Evaluation ev = eval_network(nc.net, x);
            CHECK(max_violation(r.lp.model, lp_point(r.lp, ev.post_activations)) <= 1e-9);
        }
    }
}

TEST_CASE("warm re-solve agrees with a cold solve") {
    std::mt19937_64 rng(123);
    int warm_rounds = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const auto nc = random_net_case(rng);
        const auto ib = interval_bounds(nc.net, nc.box);
        const OptC2VResult r = optc2v_bound(nc.net, nc.box, ib, output_objective(nc.net, 0), rounds(3));
        REQUIRE(r.status == LpStatus::optimal);
        const LpSolution cold = solve_lp(r.lp.model);
        REQUIRE(cold.status == LpStatus::optimal);
        if (r.round_values.size() > 1) ++warm_rounds;
        CHECK(cold.objective == doctest::Approx(r.round_values.back()).epsilon(1e-7));
    }
    CHECK(warm_rounds > 0);
}

TEST_CASE("exact <= optc2v <= triangle LP <= deeppoly on random networks") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 80; ++trial) {
        const auto nc = random_net_case(rng, 2, 6, 2);
        LpBoundsOptions lp_opts;
        lp_opts.cut.rounds = 0;
        lp_opts.weight_zero_tol = 0.0;
        LpBoundsOptions cut_opts = lp_opts;
        cut_opts.cut.rounds = 3;
        const LpNetworkBounds lb = lp_all_bounds(nc.net, nc.box, lp_opts);
        const LpNetworkBounds cb = lp_all_bounds(nc.net, nc.box, cut_opts);

        PropagationOptions dp;
        dp.iterations = 0;
        const NetworkBounds nb = fastc2v_all_bounds(nc.net, nc.box, dp);

        for (int i = nc.net.input_dim(); i < nc.net.size(); ++i) {
            CHECK(cb.pre[i].upper <= lb.pre[i].upper + 1e-7);
            CHECK(cb.pre[i].lower >= lb.pre[i].lower - 1e-7);
            CHECK(lb.pre[i].upper <= nb.pre[i].upper + 1e-7);
            CHECK(lb.pre[i].lower >= nb.pre[i].lower - 1e-7);
        }
        for (int k = 0; k < nc.net.num_outputs(); ++k) {
            for (double sign : {1.0, -1.0}) {
                const LinearExpr obj = output_objective(nc.net, k, sign);
                const double exact = exact_max_oracle(nc.net, nc.box, obj, 20);
                const double opt = lp_objective_bound(cb, nc.box, obj, cut_opts.cut);
                const double tri = lp_objective_bound(lb, nc.box, obj, lp_opts.cut);
                CHECK(exact <= opt + 1e-7);
                CHECK(opt <= tri + 1e-7);
            }
        }
    }
}

TEST_CASE("exact oracle against a dense grid") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const std::vector<int> layers{1, 6, 5, 1};
        const Network net = generate_random_network(layers, rng(), 1.0);
        const BoxDomain box({-1.0}, {1.0});
        const LinearExpr obj = output_objective(net, 0);
        double grid = -lp_inf;
        const int steps = 20000;
        for (int s = 0; s <= steps; ++s) {
            const std::vector<double> x{-1.0 + 2.0 * s / steps};
            grid = std::max(grid, obj.evaluate(eval_network(net, x).post_activations));
        }
        const double exact = exact_max_oracle(net, box, obj);
        CHECK(exact >= grid - 1e-9);
        CHECK(exact <= grid + 1e-3);
    }
}

TEST_CASE("oracle refuses large branching") {
    const std::vector<int> layers{3, 30, 1};
    const Network net = generate_random_network(layers, 1, 1.0);
    const BoxDomain box({-1, -1, -1}, {1, 1, 1});
    CHECK_THROWS_AS(exact_max_oracle(net, box, output_objective(net, 0), 2), std::length_error);
}
