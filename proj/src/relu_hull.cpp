#include "c2v/relu_hull.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace c2v {

const char* to_string(NeuronPhase phase) {
    switch (phase) {
    case NeuronPhase::always_active: return "always_active";
    case NeuronPhase::always_inactive: return "always_inactive";
    case NeuronPhase::mixed: return "mixed";
    }
    return "?";
}

HullInstance::HullInstance(std::vector<double> weights, double bias, BoxDomain box)
    : weights_(std::move(weights)), bias_(bias), box_(std::move(box)), folded_bias_(bias) {
    if (weights_.size() != box_.size()) throw std::invalid_argument("hull weights and box differ in length");
    for (int i = 0; i < dim(); ++i) {
        const double w = weights_[i];
        if (w == 0.0) continue;
        if (box_.lower(i) == box_.upper(i)) {
            folded_bias_ += w * box_.lower(i);
            continue;
        }
        support_.push_back(i);
    }
}

double HullInstance::breve_lower(int i) const { return weights_[i] >= 0.0 ? box_.lower(i) : box_.upper(i); }

double HullInstance::breve_upper(int i) const { return weights_[i] >= 0.0 ? box_.upper(i) : box_.lower(i); }

double HullInstance::pre_activation(std::span<const double> x) const {
    double v = bias_;
    for (int i = 0; i < dim(); ++i) v += weights_[i] * x[i];
    return v;
}

double HullCut::evaluate(std::span<const double> x) const {
    double v = constant;
    for (std::size_t i = 0; i < coeffs.size(); ++i) v += coeffs[i] * x[i];
    return v;
}

namespace {

bool in_support(const HullInstance& inst, int i) {
    return std::binary_search(inst.support().begin(), inst.support().end(), i);
}

// l(I) by its defining sum; `in_I` is indexed by original coordinate.
double ell_by_mask(const HullInstance& inst, const std::vector<char>& in_I) {
    double v = inst.folded_bias();
    for (int i : inst.support()) {
        v += inst.weights()[i] * (in_I[i] ? inst.breve_lower(i) : inst.breve_upper(i));
    }
    return v;
}

HullCut realize(const HullInstance& inst, IndexSet I, int h, double ell_I) {
    HullCut cut;
    cut.coeffs.assign(static_cast<std::size_t>(inst.dim()), 0.0);
    for (int i : I) {
        cut.coeffs[i] = inst.weights()[i];
        cut.constant -= inst.weights()[i] * inst.breve_lower(i);
    }
    const double slope = ell_I / (inst.breve_upper(h) - inst.breve_lower(h));
    cut.coeffs[h] += slope;
    cut.constant -= slope * inst.breve_lower(h);
    cut.I = std::move(I);
    cut.h = h;
    return cut;
}

double ratio(const HullInstance& inst, std::span<const double> x, int i) {
    const double lo = inst.breve_lower(i);
    return (x[i] - lo) / (inst.breve_upper(i) - lo);
}

struct Keyed {
    double ratio;
    int index;
    bool operator<(const Keyed& o) const { return ratio < o.ratio || (ratio == o.ratio && index < o.index); }
};

std::optional<TightestCut> finish(const HullInstance& inst, std::span<const double> x, IndexSet I, int h) {
    std::sort(I.begin(), I.end());
    std::vector<char> mask(static_cast<std::size_t>(inst.dim()), 0);
    for (int i : I) mask[i] = 1;
    TightestCut out{realize(inst, std::move(I), h, ell_by_mask(inst, mask)), 0.0};
    out.value = out.cut.evaluate(x);
    return out;
}

}  // namespace

double ell(const HullInstance& inst, std::span<const int> I) {
    std::vector<char> mask(static_cast<std::size_t>(inst.dim()), 0);
    for (int i : I) {
        if (!in_support(inst, i)) throw std::invalid_argument("index " + std::to_string(i) + " not in hull support");
        mask[i] = 1;
    }
    return ell_by_mask(inst, mask);
}

NeuronPhase classify_phase(const HullInstance& inst) {
    const std::vector<int> none;
    if (ell(inst, inst.support()) >= 0.0) return NeuronPhase::always_active;
    if (ell(inst, none) < 0.0) return NeuronPhase::always_inactive;
    return NeuronPhase::mixed;
}

std::vector<std::pair<IndexSet, int>> enumerate_J(const HullInstance& inst, int max_support) {
    const auto& supp = inst.support();
    const int d = static_cast<int>(supp.size());
    if (d > max_support) {
        throw std::length_error("enumerate_J: support of " + std::to_string(d) + " exceeds cap " +
                                std::to_string(max_support));
    }
    const std::size_t count = std::size_t{1} << d;
    std::vector<double> ell_of(count);
    std::vector<char> mask(static_cast<std::size_t>(inst.dim()), 0);
    for (std::size_t s = 0; s < count; ++s) {
        for (int k = 0; k < d; ++k) mask[supp[k]] = (s >> k) & 1U;
        ell_of[s] = ell_by_mask(inst, mask);
    }
    std::vector<std::pair<IndexSet, int>> out;
    for (std::size_t s = 0; s < count; ++s) {
        if (ell_of[s] < 0.0) continue;
        for (int k = 0; k < d; ++k) {
            if ((s >> k) & 1U) continue;
            if (ell_of[s | (std::size_t{1} << k)] < 0.0) {
                IndexSet I;
                for (int j = 0; j < d; ++j) {
                    if ((s >> j) & 1U) I.push_back(supp[j]);
                }
                out.emplace_back(std::move(I), supp[k]);
            }
        }
    }
    return out;
}

HullCut cut_from_pair(const HullInstance& inst, IndexSet I, int h) {
    std::sort(I.begin(), I.end());
    if (std::adjacent_find(I.begin(), I.end()) != I.end()) throw std::invalid_argument("duplicate index in I");
    if (!in_support(inst, h) || std::binary_search(I.begin(), I.end(), h)) {
        throw std::invalid_argument("h must be a support index outside I");
    }
    const double ell_I = ell(inst, I);
    IndexSet with_h = I;
    with_h.insert(std::upper_bound(with_h.begin(), with_h.end(), h), h);
    if (!(ell_I >= 0.0) || !(ell(inst, with_h) < 0.0)) throw std::invalid_argument("(I, h) is not a member of J");
    return realize(inst, std::move(I), h, ell_I);
}

std::optional<TightestCut> tightest_cut_sort(const HullInstance& inst, std::span<const double> x) {
    if (classify_phase(inst) != NeuronPhase::mixed) return std::nullopt;
    std::vector<Keyed> order;
    order.reserve(inst.support().size());
    for (int i : inst.support()) order.push_back({ratio(inst, x, i), i});
    std::sort(order.begin(), order.end());

    double level = ell(inst, std::vector<int>{});
    IndexSet I;
    for (const Keyed& k : order) {
        const double next = level - inst.span_weight(k.index);
        if (next < 0.0) return finish(inst, x, std::move(I), k.index);
        level = next;
        I.push_back(k.index);
    }
    // l(support) < 0 guarantees termination inside the loop; rounding aside,
    // the last index is the one that crosses zero.
    const int h = I.back();
    I.pop_back();
    return finish(inst, x, std::move(I), h);
}

std::optional<TightestCut> tightest_cut_median(const HullInstance& inst, std::span<const double> x) {
    if (classify_phase(inst) != NeuronPhase::mixed) return std::nullopt;
    std::vector<Keyed> cand;
    cand.reserve(inst.support().size());
    for (int i : inst.support()) cand.push_back({ratio(inst, x, i), i});

    // Fractional knapsack: take items in ratio order while the remaining
    // capacity l(I) stays nonnegative; h is the item that does not fit.
    double capacity = ell(inst, std::vector<int>{});
    IndexSet I;
    auto lo = cand.begin();
    auto hi = cand.end();
    while (lo != hi) {
        auto mid = lo + (hi - lo) / 2;
        std::nth_element(lo, mid, hi);
        double left_weight = 0.0;
        for (auto it = lo; it != mid; ++it) left_weight += inst.span_weight(it->index);
        if (capacity - left_weight < 0.0) {
            hi = mid;
            continue;
        }
        capacity -= left_weight;
        for (auto it = lo; it != mid; ++it) I.push_back(it->index);
        const double pivot_weight = inst.span_weight(mid->index);
        if (capacity - pivot_weight < 0.0) return finish(inst, x, std::move(I), mid->index);
        capacity -= pivot_weight;
        I.push_back(mid->index);
        lo = mid + 1;
    }
    // Only reachable through rounding at l(support) ~ 0; fall back to the
    // exact ordering.
    return tightest_cut_sort(inst, x);
}

namespace {

std::optional<Separation> to_separation(std::optional<TightestCut> t, double y) {
    if (!t) return std::nullopt;
    const double violation = y - t->value;
    if (!(violation > 0.0)) return std::nullopt;
    return Separation{std::move(t->cut), violation};
}

}  // namespace

std::optional<Separation> separate_sort(const HullInstance& inst, std::span<const double> x, double y) {
    return to_separation(tightest_cut_sort(inst, x), y);
}

std::optional<Separation> separate_median(const HullInstance& inst, std::span<const double> x, double y) {
    return to_separation(tightest_cut_median(inst, x), y);
}

double delta_upper(const HullInstance& inst, std::span<const double> x) {
    if (classify_phase(inst) != NeuronPhase::mixed) throw std::invalid_argument("delta_upper needs a mixed neuron");
    const double hi = ell(inst, std::vector<int>{});
    const double lo = ell(inst, inst.support());
    return hi / (hi - lo) * (inst.pre_activation(x) - lo);
}

bool hull_contains(const HullInstance& inst, std::span<const double> x, double y, double tol) {
    if (!inst.box().contains(x, tol)) return false;
    const double pre = inst.pre_activation(x);
    if (y < 0.0 - tol || y < pre - tol) return false;
    switch (classify_phase(inst)) {
    case NeuronPhase::always_active: return y <= pre + tol;
    case NeuronPhase::always_inactive: return y <= tol;
    case NeuronPhase::mixed: return y <= tightest_cut_sort(inst, x)->value + tol;
    }
    return false;
}

}  // namespace c2v
