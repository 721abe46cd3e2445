#include "c2v/lp_relax.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace c2v {

std::vector<int> objective_ancestors(const Network& net, const LinearExpr& objective) {
    std::vector<char> need(static_cast<std::size_t>(net.size()), 0);
    for (std::size_t j = 0; j < objective.coeffs.size(); ++j) need[j] = objective.coeffs[j] != 0.0;
    for (int i = static_cast<int>(objective.coeffs.size()) - 1; i >= net.input_dim(); --i) {
        if (!need[i]) continue;
        for (const Arc& a : net.neuron(i).arcs) need[static_cast<std::size_t>(a.source)] = 1;
    }
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(need.size()); ++i) {
        if (need[i]) out.push_back(i);
    }
    return out;
}

namespace {

std::string var_name(int id) { return "z" + std::to_string(id + 1); }

std::vector<LpTerm> row_terms(const Neuron& n, const std::vector<int>& var_of, double scale) {
    std::vector<LpTerm> t;
    for (const Arc& a : n.arcs) t.push_back({var_of[static_cast<std::size_t>(a.source)], scale * a.weight});
    return t;
}

}  // namespace

DeltaLp build_delta_lp(const Network& net, const BoxDomain& X, const std::vector<ScalarBounds>& bounds,
                       const LinearExpr& objective) {
    if (static_cast<int>(X.size()) != net.input_dim()) throw std::invalid_argument("build_delta_lp: box dimension mismatch");
    const std::vector<int> anc = objective_ancestors(net, objective);
    if (!anc.empty() && anc.back() >= static_cast<int>(bounds.size())) {
        throw std::invalid_argument("build_delta_lp: no scalar bounds for neuron " + std::to_string(anc.back() + 1));
    }
    DeltaLp lp;
    lp.var_of.assign(static_cast<std::size_t>(net.size()), -1);
    for (int id : anc) {
        double lo, hi;
        if (id < net.input_dim()) {
            lo = X.lower(id);
            hi = X.upper(id);
        } else {
            const ScalarBounds r = post_activation_range(net, id, bounds[id]);
            lo = r.lower;
            hi = std::max(r.lower, r.upper);
        }
        const double c = id < static_cast<int>(objective.coeffs.size()) ? objective.coeffs[id] : 0.0;
        lp.var_of[id] = lp.model.add_variable(lo, hi, c, var_name(id));
    }
    lp.model.set_objective_constant(objective.constant);

    for (int id : anc) {
        if (id < net.input_dim()) continue;
        const Neuron& n = net.neuron(id);
        const int z = lp.var_of[id];
        const std::string tag = var_name(id);
        const ScalarBounds sb = bounds[id];
        if (n.kind == NeuronKind::output || sb.lower >= 0.0) {
            auto t = row_terms(n, lp.var_of, -1.0);
            t.push_back({z, 1.0});
            lp.model.add_row(std::move(t), LpSense::eq, n.bias, tag + "_lin");
        } else if (sb.upper <= 0.0) {
            lp.model.add_row({{z, 1.0}}, LpSense::eq, 0.0, tag + "_off");
        } else {
            const double s = sb.upper / (sb.upper - sb.lower);
            lp.model.add_row({{z, 1.0}}, LpSense::ge, 0.0, tag + "_nonneg");
            auto lower = row_terms(n, lp.var_of, -1.0);
            lower.push_back({z, 1.0});
            lp.model.add_row(std::move(lower), LpSense::ge, n.bias, tag + "_pre");
            auto upper = row_terms(n, lp.var_of, -s);
            upper.push_back({z, 1.0});
            lp.model.add_row(std::move(upper), LpSense::le, s * (n.bias - sb.lower), tag + "_tri");
            lp.mixed.push_back(id);
        }
    }
    return lp;
}

bool CutPool::add(int neuron, const HullCut& cut) {
    if (!keys_.emplace(neuron, cut.I, cut.h).second) return false;
    entries_.push_back({neuron, cut});
    return true;
}

OptC2VResult optc2v_bound(const Network& net, const BoxDomain& X, const std::vector<ScalarBounds>& bounds,
                          const LinearExpr& objective, const OptC2VOptions& opts) {
    if (opts.rounds < 0) throw std::invalid_argument("rounds must be nonnegative");
    OptC2VResult res;
    res.lp = build_delta_lp(net, X, bounds, objective);
    DeltaLp& lp = res.lp;
    LpSolution sol = solve_lp(lp.model, nullptr, opts.lp);
    res.lp_iterations += sol.iterations;
    res.status = sol.status;
    if (sol.status != LpStatus::optimal) {
        res.value = sol.status == LpStatus::unbounded ? lp_inf : sol.objective;
        return res;
    }
    res.value = sol.objective;
    res.round_values.push_back(sol.objective);

    std::vector<NeuronHull> hulls;
    for (int id : lp.mixed) hulls.push_back(make_neuron_hull(net, id, bounds));

    std::vector<double> xs;
    for (int round = 1; round <= opts.rounds; ++round) {
        int added = 0;
        for (std::size_t k = 0; k < lp.mixed.size(); ++k) {
            const int id = lp.mixed[k];
            const NeuronHull& nh = hulls[k];
            xs.clear();
            for (int s : nh.sources) xs.push_back(sol.x[static_cast<std::size_t>(lp.var_of[s])]);
            const double y = sol.x[static_cast<std::size_t>(lp.var_of[id])];
            auto sep = separate_sort(nh.inst, xs, y);
            if (!sep || !(sep->violation > opts.cut_viol_tol)) continue;
            if (!res.pool.add(id, sep->cut)) continue;
            std::vector<LpTerm> terms{{lp.var_of[id], 1.0}};
            for (std::size_t j = 0; j < nh.sources.size(); ++j) {
                if (sep->cut.coeffs[j] != 0.0) terms.push_back({lp.var_of[nh.sources[j]], -sep->cut.coeffs[j]});
            }
            lp.model.add_row(std::move(terms), LpSense::le, sep->cut.constant,
                             var_name(id) + "_cut" + std::to_string(res.pool.size()));
            ++added;
        }
        if (added == 0) break;
        sol = solve_lp(lp.model, &sol.basis, opts.lp);
        res.lp_iterations += sol.iterations;
        if (sol.status != LpStatus::optimal) {
            // Cuts are valid, so this only happens through tolerances; keep the
            // best value seen so far.
            res.status = sol.status;
            break;
        }
        res.round_values.push_back(sol.objective);
        res.value = std::min(res.value, sol.objective);
    }
    return res;
}

LpNetworkBounds lp_all_bounds(const Network& net, const BoxDomain& X, const LpBoundsOptions& opts) {
    PropagationOptions dp_opts;
    dp_opts.method = BoundingMethod::deeppoly;
    dp_opts.iterations = 0;
    const NetworkBounds dp = fastc2v_all_bounds(net, X, dp_opts);

    LpNetworkBounds out;
    out.net = net.without_small_weights(opts.weight_zero_tol);
    const Network& lnet = out.net;
    out.pre.assign(static_cast<std::size_t>(lnet.size()), {});
    for (int i = 0; i < lnet.input_dim(); ++i) out.pre[i] = {X.lower(i), X.upper(i)};

    for (int i = lnet.input_dim(); i < lnet.size(); ++i) {
        const Neuron& n = lnet.neuron(i);
        ScalarBounds sb{n.bias, n.bias};
        for (const Arc& a : n.arcs) {
            const ScalarBounds r = post_activation_range(lnet, a.source, out.pre[a.source]);
            sb.lower += a.weight * (a.weight > 0.0 ? r.lower : r.upper);
            sb.upper += a.weight * (a.weight > 0.0 ? r.upper : r.lower);
        }
        // DeepPoly ranges belong to the unpruned network; they only tighten
        // when no weight was removed.
        if (lnet.neuron(i).arcs.size() == net.neuron(i).arcs.size()) {
            sb.lower = std::max(sb.lower, dp.pre[i].lower);
            sb.upper = std::min(sb.upper, dp.pre[i].upper);
        }
        const bool fixed = n.kind == NeuronKind::relu && (sb.lower >= 0.0 || sb.upper <= 0.0);
        if (!fixed) {
            const LinearExpr c = pre_activation_expr(lnet, i);
            const OptC2VResult hi = optc2v_bound(lnet, X, out.pre, c, opts.cut);
            const OptC2VResult lo = optc2v_bound(lnet, X, out.pre, c.negated(), opts.cut);
            out.lp_solves += 2;
            out.cuts += static_cast<int>(hi.pool.size() + lo.pool.size());
            if (hi.status == LpStatus::optimal || !hi.round_values.empty()) sb.upper = std::min(sb.upper, hi.value);
            if (lo.status == LpStatus::optimal || !lo.round_values.empty()) sb.lower = std::max(sb.lower, -lo.value);
        }
        if (sb.lower > sb.upper) sb.lower = sb.upper = 0.5 * (sb.lower + sb.upper);
        out.pre[i] = sb;
    }
    return out;
}

double lp_objective_bound(const LpNetworkBounds& lb, const BoxDomain& X, const LinearExpr& objective,
                          const OptC2VOptions& opts, OptC2VResult* detail) {
    double iv = objective.constant;
    for (std::size_t j = 0; j < objective.coeffs.size(); ++j) {
        const double c = objective.coeffs[j];
        if (c == 0.0) continue;
        const ScalarBounds r = post_activation_range(lb.net, static_cast<int>(j), lb.pre[j]);
        iv += c * (c > 0.0 ? r.upper : r.lower);
    }
    OptC2VResult res = optc2v_bound(lb.net, X, lb.pre, objective, opts);
    const double v = res.round_values.empty() ? iv : std::min(iv, res.value);
    if (detail) *detail = std::move(res);
    return v;
}

double lifted_f_tilde(const HullInstance& inst, std::span<const double> x) {
    const int n = inst.dim();
    const BoxDomain& box = inst.box();
    LpModel m;
    const int z = m.add_variable(0.0, 1.0, inst.bias(), "z");
    for (int i = 0; i < n; ++i) {
        const int xt = m.add_variable(-lp_inf, lp_inf, inst.weights()[i], "xt" + std::to_string(i + 1));
        const double L = box.lower(i), U = box.upper(i);
        m.add_row({{xt, 1.0}, {z, -L}}, LpSense::ge, 0.0);
        m.add_row({{xt, 1.0}, {z, -U}}, LpSense::le, 0.0);
        m.add_row({{xt, 1.0}, {z, -L}}, LpSense::le, x[i] - L);
        m.add_row({{xt, 1.0}, {z, -U}}, LpSense::ge, x[i] - U);
    }
    const LpSolution s = solve_lp(m);
    if (s.status != LpStatus::optimal) throw std::runtime_error(std::string("lifted LP: ") + to_string(s.status));
    return s.objective;
}

double exact_max_oracle(const Network& net, const BoxDomain& X, const LinearExpr& objective, int max_mixed) {
    const std::vector<ScalarBounds> ib = interval_bounds(net, X);
    const std::vector<int> anc = objective_ancestors(net, objective);
    std::vector<int> branch;
    for (int id : anc) {
        if (net.is_relu(id) && ib[id].lower < 0.0 && ib[id].upper > 0.0) branch.push_back(id);
    }
    if (static_cast<int>(branch.size()) > max_mixed) {
        throw std::length_error("exact_max_oracle: " + std::to_string(branch.size()) + " unresolved ReLUs exceed cap " +
                                std::to_string(max_mixed));
    }
    // 0 undecided, 1 active, -1 inactive
    std::vector<int> phase(static_cast<std::size_t>(net.size()), 0);

    auto node_lp = [&]() {
        LpModel m;
        std::vector<int> col(static_cast<std::size_t>(net.size()), -1);
        for (int id : anc) {
            double lo, hi;
            if (id < net.input_dim()) {
                lo = X.lower(id);
                hi = X.upper(id);
            } else if (net.is_relu(id)) {
                lo = std::max(0.0, ib[id].lower);
                hi = std::max(0.0, ib[id].upper);
            } else {
                lo = ib[id].lower;
                hi = ib[id].upper;
            }
            const double c = id < static_cast<int>(objective.coeffs.size()) ? objective.coeffs[id] : 0.0;
            col[id] = m.add_variable(lo, hi, c);
        }
        m.set_objective_constant(objective.constant);
        for (int id : anc) {
            if (id < net.input_dim()) continue;
            const Neuron& n = net.neuron(id);
            std::vector<LpTerm> pre;   // pre-activation minus bias
            for (const Arc& a : n.arcs) pre.push_back({col[a.source], a.weight});
            std::vector<LpTerm> diff = pre;   // z - pre
            for (LpTerm& t : diff) t.coeff = -t.coeff;
            diff.push_back({col[id], 1.0});

            const bool relu = n.kind == NeuronKind::relu;
            const bool on = !relu || ib[id].lower >= 0.0 || phase[id] == 1;
            const bool off = relu && (ib[id].upper <= 0.0 || phase[id] == -1);
            if (on) {
                m.add_row(diff, LpSense::eq, n.bias);
                if (relu && phase[id] == 1) m.add_row(pre, LpSense::ge, -n.bias);
            } else if (off) {
                m.add_row({{col[id], 1.0}}, LpSense::eq, 0.0);
                if (phase[id] == -1) m.add_row(pre, LpSense::le, -n.bias);
            } else {
                const double l = ib[id].lower, u = ib[id].upper;
                m.add_row(diff, LpSense::ge, n.bias);
                std::vector<LpTerm> tri = pre;
                for (LpTerm& t : tri) t.coeff *= -u / (u - l);
                tri.push_back({col[id], 1.0});
                m.add_row(std::move(tri), LpSense::le, u / (u - l) * (n.bias - l));
            }
        }
        return solve_lp(m);
    };

    double best = -lp_inf;
    std::function<void(std::size_t)> dfs = [&](std::size_t depth) {
        const LpSolution s = node_lp();
        if (s.status != LpStatus::optimal) return;
        if (s.objective <= best) return;
        if (depth == branch.size()) {
            best = s.objective;
            return;
        }
        const int id = branch[depth];
        for (int p : {1, -1}) {
            phase[id] = p;
            dfs(depth + 1);
        }
        phase[id] = 0;
    };
    dfs(0);
    return best;
}

}  // namespace c2v
