#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "c2v/network.hpp"

namespace c2v {

/// Sorted list of coordinate indices of a hull instance.
using IndexSet = std::vector<int>;

enum class NeuronPhase { always_active, always_inactive, mixed };

const char* to_string(NeuronPhase phase);

/// Single ReLU y = max(0, w.x + b) over a box, the set whose convex hull is
/// described here.
///
/// Coordinates with w_i == 0 or with a degenerate box side (L_i == U_i) are
/// dropped from the support; degenerate ones are folded into the bias. All
/// public indices refer to the original coordinates 0..dim()-1.
class HullInstance {
public:
    HullInstance(std::vector<double> weights, double bias, BoxDomain box);

    int dim() const { return static_cast<int>(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    double bias() const { return bias_; }
    const BoxDomain& box() const { return box_; }

    /// Retained coordinates, ascending.
    const std::vector<int>& support() const { return support_; }
    /// Bias after folding degenerate coordinates.
    double folded_bias() const { return folded_bias_; }

    /// Sign-corrected bounds: the box side minimizing (resp. maximizing) w_i x_i.
    double breve_lower(int i) const;
    double breve_upper(int i) const;
    /// w_i (breve_upper_i - breve_lower_i) > 0 on the support.
    double span_weight(int i) const { return breve_upper(i) * weights_[i] - breve_lower(i) * weights_[i]; }

    double pre_activation(std::span<const double> x) const;

private:
    std::vector<double> weights_;
    double bias_;
    BoxDomain box_;
    std::vector<int> support_;
    double folded_bias_;
};

/// Upper-bounding facet y <= coeffs.x + constant indexed by (I, h).
struct HullCut {
    IndexSet I;
    int h = -1;
    std::vector<double> coeffs;   // over all dim() coordinates
    double constant = 0.0;

    double evaluate(std::span<const double> x) const;
};

/// l(I): pre-activation at the vertex taking breve_lower on I and breve_upper
/// elsewhere. I must be a subset of the support.
double ell(const HullInstance& inst, std::span<const int> I);

NeuronPhase classify_phase(const HullInstance& inst);

/// Every (I, h) with l(I) >= 0 and l(I + h) < 0 over the support. Brute force
/// over subsets; throws std::length_error above `max_support` coordinates.
std::vector<std::pair<IndexSet, int>> enumerate_J(const HullInstance& inst, int max_support = 20);

/// Realizes the inequality for (I, h). Throws std::invalid_argument if the
/// pair is not a member of J.
HullCut cut_from_pair(const HullInstance& inst, IndexSet I, int h);

/// Minimum over J of the cut right-hand sides at x, with the cut attaining it.
struct TightestCut {
    HullCut cut;
    double value = 0.0;
};

/// Greedy by sorting ratios (x_i - breve_lower_i) / (breve_upper_i - breve_lower_i).
/// Ties break by ascending coordinate. nullopt when J is empty (fixed phase).
std::optional<TightestCut> tightest_cut_sort(const HullInstance& inst, std::span<const double> x);

/// Same minimizer located by weighted-median selection in expected linear time.
std::optional<TightestCut> tightest_cut_median(const HullInstance& inst, std::span<const double> x);

struct Separation {
    HullCut cut;
    double violation = 0.0;   // y - cut(x) > 0
};

/// Most violated upper-bounding inequality at (x, y), or nullopt when none is
/// violated (or the instance is not mixed).
std::optional<Separation> separate_sort(const HullInstance& inst, std::span<const double> x, double y);
std::optional<Separation> separate_median(const HullInstance& inst, std::span<const double> x, double y);

/// Triangle-relaxation upper bound at x, using the exact pre-activation range
/// [l(support), l({})] of the instance. Requires a mixed instance.
double delta_upper(const HullInstance& inst, std::span<const double> x);

/// Membership test for the convex hull up to `tol`.
bool hull_contains(const HullInstance& inst, std::span<const double> x, double y, double tol = 1e-9);

}  // namespace c2v
