#include "c2v/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace c2v {

double AffineForm::evaluate(std::span<const double> z) const {
    double v = constant;
    for (const Arc& t : terms) v += t.weight * z[static_cast<std::size_t>(t.source)];
    return v;
}

double LinearExpr::evaluate(std::span<const double> z) const {
    double v = constant;
    for (std::size_t i = 0; i < coeffs.size(); ++i) v += coeffs[i] * z[i];
    return v;
}

LinearExpr LinearExpr::negated() const {
    LinearExpr out{coeffs, -constant};
    for (double& c : out.coeffs) c = -c;
    return out;
}

LinearExpr pre_activation_expr(const Network& net, int id) {
    const Neuron& n = net.neuron(id);
    LinearExpr e{std::vector<double>(static_cast<std::size_t>(id), 0.0), n.bias};
    for (const Arc& a : n.arcs) e.coeffs[static_cast<std::size_t>(a.source)] = a.weight;
    return e;
}

const char* to_string(BoundingMethod m) {
    switch (m) {
    case BoundingMethod::interval: return "interval";
    case BoundingMethod::fastlin: return "fastlin";
    case BoundingMethod::deeppoly: return "deeppoly";
    }
    return "?";
}

BoxMax box_maximize(std::span<const double> coeffs, double constant, const BoxDomain& X) {
    if (coeffs.size() != X.size()) throw std::invalid_argument("box_maximize: dimension mismatch");
    BoxMax out{constant, std::vector<double>(X.size())};
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double c = coeffs[i];
        const double x = c > 0.0 ? X.upper(i) : c < 0.0 ? X.lower(i) : X.midpoint(i);
        out.x_star[i] = x;
        out.value += c * x;
    }
    return out;
}

BackwardResult backward_pass(const BoxDomain& X, const BoundPairs& pairs, const LinearExpr& objective) {
    const int m = static_cast<int>(X.size());
    const int eta = static_cast<int>(objective.coeffs.size());
    std::vector<double> expr = objective.coeffs;
    if (eta < m) expr.resize(static_cast<std::size_t>(m), 0.0);
    double constant = objective.constant;

    BackwardResult out;
    out.ub_used.assign(static_cast<std::size_t>(std::max(eta, m)), 0);
    for (int i = eta - 1; i >= m; --i) {
        const double c = expr[i];
        if (c == 0.0) continue;
        if (i >= static_cast<int>(pairs.size()) || !pairs[i]) {
            throw std::invalid_argument("backward_pass: no bounding functions for neuron " + std::to_string(i + 1));
        }
        const bool up = c > 0.0;
        out.ub_used[i] = up;
        expr[i] = 0.0;
        const AffineForm& f = up ? pairs[i]->upper : pairs[i]->lower;
        for (const Arc& t : f.terms) expr[static_cast<std::size_t>(t.source)] += c * t.weight;
        constant += c * f.constant;
    }
    out.final_coeffs.assign(expr.begin(), expr.begin() + m);
    out.final_constant = constant;
    BoxMax bm = box_maximize(out.final_coeffs, constant, X);
    out.bound = bm.value;
    out.x_star = std::move(bm.x_star);
    return out;
}

std::vector<double> forward_pass(std::span<const double> x_star, const BoundPairs& pairs, std::span<const char> ub_used) {
    std::vector<double> z(std::max(ub_used.size(), x_star.size()), 0.0);
    std::copy(x_star.begin(), x_star.end(), z.begin());
    for (std::size_t i = x_star.size(); i < z.size(); ++i) {
        if (i >= pairs.size() || !pairs[i]) continue;
        z[i] = (ub_used[i] ? pairs[i]->upper : pairs[i]->lower).evaluate(z);
    }
    return z;
}

namespace {

AffineForm scaled_row(const Neuron& n, double s, double shift) {
    AffineForm f;
    f.terms.reserve(n.arcs.size());
    for (const Arc& a : n.arcs) f.terms.push_back({a.source, s * a.weight});
    f.constant = s * (n.bias - shift);
    return f;
}

}  // namespace

AffineBoundPair linear_pair(const Neuron& neuron) {
    AffineForm row{neuron.arcs, neuron.bias};
    return {row, row};
}

AffineBoundPair initial_bounds(BoundingMethod method, ScalarBounds sb, const Neuron& neuron) {
    if (method == BoundingMethod::interval) {
        return {AffineForm::constant_value(std::max(0.0, sb.lower)), AffineForm::constant_value(std::max(0.0, sb.upper))};
    }
    if (sb.upper <= 0.0) return {AffineForm::constant_value(0.0), AffineForm::constant_value(0.0)};
    if (sb.lower >= 0.0) return linear_pair(neuron);

    const double s = sb.upper / (sb.upper - sb.lower);
    AffineBoundPair p;
    p.upper = scaled_row(neuron, s, sb.lower);
    if (method == BoundingMethod::fastlin) {
        p.lower = scaled_row(neuron, s, 0.0);
    } else if (std::abs(sb.lower) >= std::abs(sb.upper)) {
        p.lower = AffineForm::constant_value(0.0);
    } else {
        p.lower = AffineForm{neuron.arcs, neuron.bias};
    }
    return p;
}

ScalarBounds post_activation_range(const Network& net, int id, ScalarBounds sb) {
    if (net.neuron(id).kind == NeuronKind::relu) return {std::max(0.0, sb.lower), std::max(0.0, sb.upper)};
    return sb;
}

namespace {

ScalarBounds interval_row(const Network& net, int id, const std::vector<ScalarBounds>& bounds) {
    const Neuron& n = net.neuron(id);
    ScalarBounds out{n.bias, n.bias};
    for (const Arc& a : n.arcs) {
        const ScalarBounds r = post_activation_range(net, a.source, bounds[static_cast<std::size_t>(a.source)]);
        out.lower += a.weight * (a.weight > 0.0 ? r.lower : r.upper);
        out.upper += a.weight * (a.weight > 0.0 ? r.upper : r.lower);
    }
    return out;
}

}  // namespace

std::vector<ScalarBounds> interval_bounds(const Network& net, const BoxDomain& X) {
    if (static_cast<int>(X.size()) != net.input_dim()) throw std::invalid_argument("interval_bounds: box dimension mismatch");
    std::vector<ScalarBounds> b(static_cast<std::size_t>(net.size()));
    for (int i = 0; i < net.input_dim(); ++i) b[i] = {X.lower(i), X.upper(i)};
    for (int i = net.input_dim(); i < net.size(); ++i) b[i] = interval_row(net, i, b);
    return b;
}

NeuronHull make_neuron_hull(const Network& net, int id, const std::vector<ScalarBounds>& bounds) {
    const Neuron& n = net.neuron(id);
    std::vector<double> w, lo, hi;
    std::vector<int> sources;
    for (const Arc& a : n.arcs) {
        const ScalarBounds r = post_activation_range(net, a.source, bounds[static_cast<std::size_t>(a.source)]);
        sources.push_back(a.source);
        w.push_back(a.weight);
        lo.push_back(r.lower);
        hi.push_back(r.upper);
    }
    return {HullInstance(std::move(w), n.bias, BoxDomain(std::move(lo), std::move(hi))), std::move(sources)};
}

double tightened_bound(const BoxDomain& X, BoundPairs& pairs, const NeuronHulls& hulls, const LinearExpr& objective,
                       int iterations, TightenStats* stats) {
    const int m = static_cast<int>(X.size());
    const int eta = static_cast<int>(objective.coeffs.size());
    BackwardResult r = backward_pass(X, pairs, objective);
    double best = r.bound;
    TightenStats local;
    std::vector<double> xs;
    for (int it = 1; it <= iterations; ++it) {
        const std::vector<double> z = forward_pass(r.x_star, pairs, r.ub_used);
        for (int i = m; i < eta && i < static_cast<int>(hulls.size()); ++i) {
            if (!hulls[i]) continue;
            const NeuronHull& nh = *hulls[i];
            xs.clear();
            for (int s : nh.sources) xs.push_back(z[static_cast<std::size_t>(s)]);
            auto sep = separate_sort(nh.inst, xs, z[i]);
            if (!sep) continue;
            AffineForm upper;
            upper.constant = sep->cut.constant;
            for (std::size_t k = 0; k < nh.sources.size(); ++k) {
                if (sep->cut.coeffs[k] != 0.0) upper.terms.push_back({nh.sources[k], sep->cut.coeffs[k]});
            }
            pairs[i]->upper = std::move(upper);
            ++local.swaps;
        }
        r = backward_pass(X, pairs, objective);
        if (r.bound < best) {
            best = r.bound;
            local.best_iteration = it;
        }
    }
    if (stats) *stats = local;
    return best;
}

NetworkBounds fastc2v_all_bounds(const Network& net, const BoxDomain& X, const PropagationOptions& opts) {
    if (static_cast<int>(X.size()) != net.input_dim()) throw std::invalid_argument("fastc2v_all_bounds: box dimension mismatch");
    if (opts.iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
    const int m = net.input_dim();
    NetworkBounds nb;
    nb.pre.resize(static_cast<std::size_t>(net.size()));
    nb.pairs.resize(nb.pre.size());
    nb.hulls.resize(nb.pre.size());
    for (int i = 0; i < m; ++i) nb.pre[i] = {X.lower(i), X.upper(i)};

    for (int i = m; i < net.size(); ++i) {
        const Neuron& n = net.neuron(i);
        ScalarBounds sb = interval_row(net, i, nb.pre);
        const bool propagate = opts.method != BoundingMethod::interval &&
                               (opts.scalar_source == ScalarSource::propagation || n.kind == NeuronKind::output);
        if (propagate) {
            const LinearExpr c = pre_activation_expr(net, i);
            BoundPairs scratch;
            BoundPairs& work = opts.retain_swaps ? nb.pairs : (scratch = nb.pairs);
            TightenStats st;
            const double lo = -tightened_bound(X, work, nb.hulls, c.negated(), opts.iterations, &st);
            nb.swaps += st.swaps;
            if (!opts.retain_swaps) scratch = nb.pairs;
            const double hi = tightened_bound(X, work, nb.hulls, c, opts.iterations, &st);
            nb.swaps += st.swaps;
            sb.lower = std::max(sb.lower, lo);
            sb.upper = std::min(sb.upper, hi);
            if (sb.lower > sb.upper) sb.lower = sb.upper = 0.5 * (sb.lower + sb.upper);
        }
        nb.pre[i] = sb;
        if (n.kind == NeuronKind::output) {
            nb.pairs[i] = linear_pair(n);
            continue;
        }
        nb.pairs[i] = initial_bounds(opts.method, sb, n);
        if (sb.lower < 0.0 && sb.upper > 0.0) {
            NeuronHull h = make_neuron_hull(net, i, nb.pre);
            if (classify_phase(h.inst) == NeuronPhase::mixed) nb.hulls[i] = std::move(h);
        }
    }
    return nb;
}

double interval_objective_bound(const Network& net, const NetworkBounds& nb, const LinearExpr& objective) {
    double v = objective.constant;
    for (std::size_t j = 0; j < objective.coeffs.size(); ++j) {
        const double c = objective.coeffs[j];
        if (c == 0.0) continue;
        const ScalarBounds r = nb.post(net, static_cast<int>(j));
        v += c * (c > 0.0 ? r.upper : r.lower);
    }
    return v;
}

double objective_upper_bound(const Network& net, const BoxDomain& X, const NetworkBounds& nb,
                             const LinearExpr& objective, BoundingMethod method, int iterations) {
    const double iv = interval_objective_bound(net, nb, objective);
    if (method == BoundingMethod::interval) return iv;
    BoundPairs pairs = nb.pairs;
    return std::min(iv, tightened_bound(X, pairs, nb.hulls, objective, iterations));
}

}  // namespace c2v
