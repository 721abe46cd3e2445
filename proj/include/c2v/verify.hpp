#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2v/lp_relax.hpp"
#include "c2v/network.hpp"
#include "c2v/propagation.hpp"

namespace c2v {

/// Center point, radius and true class of one L-infinity robustness query.
struct RobustnessInstance {
    std::vector<double> x_hat;
    double epsilon = 0.0;
    int label = 0;
};

/// One instance or a per-line error from an instance file.
struct InstanceRecord {
    int line = 0;
    std::optional<RobustnessInstance> instance;
    std::string error;
};

/// Line format `label=<t> epsilon=<e> x=<v1>,<v2>,...`; blank lines and `#`
/// comments are ignored. Malformed lines become records carrying an error.
std::vector<InstanceRecord> parse_instances(const std::string& text);
/// Throws std::runtime_error when the file cannot be read.
std::vector<InstanceRecord> load_instances(const std::filesystem::path& path);
std::string format_instance(const RobustnessInstance& inst);

/// [max(0, x - eps), min(1, x + eps)] per coordinate.
BoxDomain build_input_box(const RobustnessInstance& inst);

enum class Method { interval, fastlin, deeppoly, fastc2v, lp, optc2v };

const char* to_string(Method m);
std::optional<Method> parse_method(const std::string& name);

struct AttackParams {
    int restarts = 100;
    int steps = 20;
    double lr = 0.01;
};

struct VerifyParams {
    Method method = Method::deeppoly;
    int iterations = 1;          // fastc2v
    int cut_rounds = 3;          // optc2v
    bool retain_swaps = false;
    ScalarSource scalar_source = ScalarSource::propagation;
    double weight_zero_tol = default_weight_zero_tol;
    bool attack = true;
    AttackParams attack_params;
    std::uint64_t seed = 0;
    bool early_exit = false;     // stop at the first margin bound >= 0
    bool deterministic = false;  // omit timings from reports
    bool verbose = false;        // include per-neuron scalar bounds
    std::filesystem::path dump_lp_dir;   // empty: no dump
};

/// Throws std::invalid_argument on out-of-range parameters.
void validate(const VerifyParams& params);

/// Scalar bounds for one input region under one method, reused across
/// objectives.
class ObjectiveBounder {
public:
    ObjectiveBounder(const Network& net, const BoxDomain& X, const VerifyParams& params);

    /// Upper bound on `objective`. When `lp_name` is set and a dump directory
    /// is configured, the final LP is written there as `<lp_name>.lp`.
    double upper(const LinearExpr& objective, const std::string& lp_name = {});
    const std::vector<ScalarBounds>& scalar_bounds() const;

private:
    const Network& net_;
    BoxDomain X_;
    VerifyParams params_;
    std::optional<NetworkBounds> prop_;
    std::optional<LpNetworkBounds> lp_;
};

/// f_k - f_t with the output rows folded into the objective.
LinearExpr margin_objective(const Network& net, int k, int t);

/// max over k != t of f_k(x) - f_t(x).
double max_margin(const Network& net, std::span<const double> x, int t);

/// Signed-gradient ascent on the largest margin with projection onto X. The
/// first restart starts at x_hat, the rest uniformly in X. Returns the first
/// point with a positive exact margin.
std::optional<std::vector<double>> attack_upper_bound(const Network& net, const RobustnessInstance& inst,
                                                      const AttackParams& params, std::uint64_t seed);

enum class Verdict { verified, falsified, unknown, skipped, error };

const char* to_string(Verdict v);

struct MarginBound {
    int cls = 0;
    double bound = 0.0;
    double seconds = 0.0;
};

struct VerificationReport {
    int index = 0;
    int line = 0;
    Verdict verdict = Verdict::unknown;
    int label = 0;
    int predicted = 0;
    double epsilon = 0.0;
    std::vector<MarginBound> margins;
    std::vector<double> witness;
    int witness_class = -1;
    std::vector<ScalarBounds> scalar_bounds;
    std::string error;
    double bound_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Verdict for one instance. `index` seeds the attack stream and names dumps.
VerificationReport verify(const Network& net, const RobustnessInstance& inst, const VerifyParams& params, int index = 0);

struct BatchSummary {
    int total = 0;
    int verified = 0;
    int falsified = 0;
    int unknown = 0;
    int skipped = 0;
    int errors = 0;
    double mean_seconds = 0.0;
    double p50_seconds = 0.0;
    double p90_seconds = 0.0;
    double max_seconds = 0.0;
};

struct BatchResult {
    std::vector<VerificationReport> reports;   // in file order
    BatchSummary summary;
};

/// Verifies every record, on up to `threads` workers. Report order and
/// content do not depend on `threads`.
BatchResult batch_verify(const Network& net, const std::vector<InstanceRecord>& records, const VerifyParams& params,
                         int threads = 1);

/// One JSON object per line: the reports, then a summary line.
void write_reports(std::ostream& out, const BatchResult& batch, const VerifyParams& params);

struct Corpus {
    Network net;
    std::vector<RobustnessInstance> instances;
};

/// Random dense network plus `count` centers uniform in [0,1]^m, each labelled
/// with the network's own prediction. Deterministic in `seed`.
Corpus generate_corpus(std::span<const int> layers, std::uint64_t seed, int count, double epsilon,
                       double weight_scale = 1.0);

/// Upper bound of a single output over X, for threshold checks y < beta.
double output_upper_bound(const Network& net, const BoxDomain& X, int output, const VerifyParams& params);

}  // namespace c2v
