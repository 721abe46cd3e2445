#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2v/network.hpp"
#include "c2v/relu_hull.hpp"

namespace c2v {

/// Sparse affine function over earlier neurons.
struct AffineForm {
    std::vector<Arc> terms;
    double constant = 0.0;

    double evaluate(std::span<const double> z) const;
    static AffineForm constant_value(double c) { return {{}, c}; }
    friend bool operator==(const AffineForm&, const AffineForm&) = default;
};

/// Affine under- and over-estimators of one neuron's post-activation value.
struct AffineBoundPair {
    AffineForm lower;
    AffineForm upper;
    friend bool operator==(const AffineBoundPair&, const AffineBoundPair&) = default;
};

/// Pre-activation range of a ReLU (or value range of an input/output neuron).
struct ScalarBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// Dense objective sum_i coeffs[i] z_i + constant over neurons 0..coeffs.size()-1.
struct LinearExpr {
    std::vector<double> coeffs;
    double constant = 0.0;

    double evaluate(std::span<const double> z) const;
    LinearExpr negated() const;
};

/// Pre-activation row of neuron `id` as an objective over neurons 0..id-1.
LinearExpr pre_activation_expr(const Network& net, int id);

enum class BoundingMethod { interval, fastlin, deeppoly };

const char* to_string(BoundingMethod m);

/// Indexed by neuron id; inputs carry no pair.
using BoundPairs = std::vector<std::optional<AffineBoundPair>>;

struct BoxMax {
    double value = 0.0;
    std::vector<double> x_star;
};

/// Closed-form maximum of coeffs.x + constant over a box. Zero coefficients
/// take the midpoint.
BoxMax box_maximize(std::span<const double> coeffs, double constant, const BoxDomain& X);

struct BackwardResult {
    double bound = 0.0;
    std::vector<double> x_star;
    std::vector<char> ub_used;   // per neuron id < objective size
    std::vector<double> final_coeffs;   // over the inputs
    double final_constant = 0.0;
};

/// Substitutes neurons out of `objective` in descending order and maximizes
/// the remaining input expression over X. Throws std::invalid_argument when a
/// referenced non-input neuron has no pair.
BackwardResult backward_pass(const BoxDomain& X, const BoundPairs& pairs, const LinearExpr& objective);

/// Completes x_star to a full solution using the functions recorded in ub_used.
std::vector<double> forward_pass(std::span<const double> x_star, const BoundPairs& pairs, std::span<const char> ub_used);

/// Bounding functions of a ReLU with pre-activation range `sb`. The interval
/// method yields the constant pair [max(0, L), max(0, U)].
AffineBoundPair initial_bounds(BoundingMethod method, ScalarBounds sb, const Neuron& neuron);

/// Exact affine pair of a linear (output) neuron.
AffineBoundPair linear_pair(const Neuron& neuron);

/// Interval arithmetic through the whole network.
std::vector<ScalarBounds> interval_bounds(const Network& net, const BoxDomain& X);

/// Range of neuron `id`'s output value given its scalar bounds.
ScalarBounds post_activation_range(const Network& net, int id, ScalarBounds sb);

/// Single-neuron hull of a ReLU over its sources' post-activation box.
struct NeuronHull {
    HullInstance inst;
    std::vector<int> sources;
};

NeuronHull make_neuron_hull(const Network& net, int id, const std::vector<ScalarBounds>& bounds);

using NeuronHulls = std::vector<std::optional<NeuronHull>>;

struct TightenStats {
    int swaps = 0;
    int best_iteration = 0;
};

/// Backward pass, then T rounds of forward pass, separation at every mixed
/// neuron and upper-function swaps. Returns the smallest bound seen. Swaps are
/// written into `pairs`.
double tightened_bound(const BoxDomain& X, BoundPairs& pairs, const NeuronHulls& hulls, const LinearExpr& objective,
                       int iterations, TightenStats* stats = nullptr);

/// Where intermediate ReLU ranges come from.
enum class ScalarSource { propagation, interval };

struct PropagationOptions {
    BoundingMethod method = BoundingMethod::deeppoly;
    int iterations = 1;
    bool retain_swaps = false;
    ScalarSource scalar_source = ScalarSource::propagation;
};

struct NetworkBounds {
    std::vector<ScalarBounds> pre;   // every neuron, inputs hold the box
    BoundPairs pairs;
    NeuronHulls hulls;               // mixed ReLUs only
    int swaps = 0;

    ScalarBounds post(const Network& net, int id) const { return post_activation_range(net, id, pre[id]); }
};

/// Bounds for every neuron, each taken as the better of propagation and
/// interval arithmetic over this run's own earlier ranges. With
/// iterations == 0 this is plain Fast-Lin or DeepPoly.
NetworkBounds fastc2v_all_bounds(const Network& net, const BoxDomain& X, const PropagationOptions& opts);

/// Interval value of an objective over the post-activation ranges in `nb`.
double interval_objective_bound(const Network& net, const NetworkBounds& nb, const LinearExpr& objective);

/// Upper bound on `objective` reusing the scalar bounds in `nb`; swaps made
/// here do not leak back into `nb`.
double objective_upper_bound(const Network& net, const BoxDomain& X, const NetworkBounds& nb,
                             const LinearExpr& objective, BoundingMethod method, int iterations);

}  // namespace c2v
