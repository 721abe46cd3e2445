#pragma once

#include <set>
#include <tuple>
#include <vector>

#include "c2v/lp.hpp"
#include "c2v/network.hpp"
#include "c2v/propagation.hpp"
#include "c2v/relu_hull.hpp"

namespace c2v {

inline constexpr double default_weight_zero_tol = 1e-5;
inline constexpr double default_cut_viol_tol = 1e-5;

/// Triangle-relaxation LP over the ancestors of an objective.
struct DeltaLp {
    LpModel model;
    std::vector<int> var_of;    // neuron id -> LP column, -1 when absent
    std::vector<int> mixed;     // mixed ReLU neurons present, ascending
};

/// Neurons the objective depends on, ascending, inputs included.
std::vector<int> objective_ancestors(const Network& net, const LinearExpr& objective);

/// Fixed-phase ReLUs become equalities, each mixed ReLU gets the three
/// triangle rows with the pre-activation substituted out. Throws
/// std::invalid_argument if `bounds` does not cover the objective's ancestors.
DeltaLp build_delta_lp(const Network& net, const BoxDomain& X, const std::vector<ScalarBounds>& bounds,
                       const LinearExpr& objective);

/// Cuts keyed by (neuron, I, h).
class CutPool {
public:
    struct Entry {
        int neuron;
        HullCut cut;
    };

    /// False when the key is already present.
    bool add(int neuron, const HullCut& cut);
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::set<std::tuple<int, IndexSet, int>> keys_;
    std::vector<Entry> entries_;
};

struct OptC2VOptions {
    int rounds = 3;
    double cut_viol_tol = default_cut_viol_tol;
    LpOptions lp;
};

struct OptC2VResult {
    LpStatus status = LpStatus::optimal;
    double value = 0.0;                 // best over rounds
    std::vector<double> round_values;   // index 0 is the plain triangle LP
    CutPool pool;
    int lp_iterations = 0;
    DeltaLp lp;                         // final model including cuts
};

/// Triangle LP, then up to `rounds` rounds of separation at every mixed
/// ancestor with warm-started re-solves. Stops early when a round adds nothing.
OptC2VResult optc2v_bound(const Network& net, const BoxDomain& X, const std::vector<ScalarBounds>& bounds,
                          const LinearExpr& objective, const OptC2VOptions& opts = {});

struct LpBoundsOptions {
    OptC2VOptions cut;
    double weight_zero_tol = default_weight_zero_tol;
};

struct LpNetworkBounds {
    Network net;                       // with small weights removed
    std::vector<ScalarBounds> pre;
    int lp_solves = 0;
    int cuts = 0;
};

/// Bounds for every neuron from the LP (rounds == 0) or OptC2V. DeepPoly runs
/// first; neurons it proves fixed are not sent to the LP. Each range is the
/// best of LP, DeepPoly and interval arithmetic.
LpNetworkBounds lp_all_bounds(const Network& net, const BoxDomain& X, const LpBoundsOptions& opts);

/// Upper bound on an objective over the LP-derived ranges, taken with the
/// interval bound of the objective. `detail` receives the cutting-plane run.
double lp_objective_bound(const LpNetworkBounds& lb, const BoxDomain& X, const LinearExpr& objective,
                          const OptC2VOptions& opts, OptC2VResult* detail = nullptr);

/// Concave envelope value at x from the lifted single-neuron formulation.
/// Throws std::runtime_error when the small LP does not solve to optimality.
double lifted_f_tilde(const HullInstance& inst, std::span<const double> x);

/// True maximum of the objective over X by branching on the activation
/// patterns of ReLUs that interval arithmetic leaves unresolved. Throws
/// std::length_error above `max_mixed` such ReLUs.
double exact_max_oracle(const Network& net, const BoxDomain& X, const LinearExpr& objective, int max_mixed = 16);

}  // namespace c2v
