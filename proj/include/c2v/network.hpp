#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace c2v {

/// Raised for malformed network or instance files. The message carries the
/// line number and the offending field.
class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Raised when a structurally well-formed network breaks a model invariant.
/// `neuron()` is the 0-based id of the offending neuron, or -1.
class InvariantError : public std::runtime_error {
public:
    InvariantError(int neuron, const std::string& what)
        : std::runtime_error(neuron >= 0 ? "neuron " + std::to_string(neuron + 1) + ": " + what : what),
          neuron_(neuron) {}
    int neuron() const { return neuron_; }

private:
    int neuron_;
};

enum class NeuronKind { input, relu, output };

const char* to_string(NeuronKind kind);

/// One incoming arc of a neuron.
struct Arc {
    int source;     // 0-based id of an earlier neuron
    double weight;

    friend bool operator==(const Arc&, const Arc&) = default;
};

struct Neuron {
    NeuronKind kind = NeuronKind::input;
    std::vector<Arc> arcs;   // sorted by source, no duplicates
    double bias = 0.0;

    friend bool operator==(const Neuron&, const Neuron&) = default;
};

/// Axis-aligned box. Coordinates with lower == upper are allowed and are
/// treated as constants by the hull code.
class BoxDomain {
public:
    BoxDomain() = default;
    BoxDomain(std::vector<double> lower, std::vector<double> upper);

    static BoxDomain point(std::span<const double> x);

    std::size_t size() const { return lower_.size(); }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }
    double lower(std::size_t i) const { return lower_[i]; }
    double upper(std::size_t i) const { return upper_[i]; }
    double midpoint(std::size_t i) const { return 0.5 * (lower_[i] + upper_[i]); }
    bool contains(std::span<const double> x, double tol = 0.0) const;

    friend bool operator==(const BoxDomain&, const BoxDomain&) = default;

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
};

/// Feedforward ReLU network in neuron-ordered form. Neurons 0..m-1 are the
/// inputs; every later neuron is either a ReLU or an affine output, and its
/// arcs only reference earlier neurons, so skip connections are allowed.
class Network {
public:
    Network() = default;

    /// Validates and takes ownership. Throws InvariantError. When `outputs`
    /// is empty the output order is the neuron order of the output neurons.
    Network(int input_dim, std::vector<Neuron> neurons, std::vector<int> outputs = {});

    int input_dim() const { return input_dim_; }
    int size() const { return static_cast<int>(neurons_.size()); }
    const Neuron& neuron(int id) const { return neurons_[static_cast<std::size_t>(id)]; }
    const std::vector<Neuron>& neurons() const { return neurons_; }
    const std::vector<int>& outputs() const { return outputs_; }
    int num_outputs() const { return static_cast<int>(outputs_.size()); }
    bool is_relu(int id) const { return neuron(id).kind == NeuronKind::relu; }
    int num_relu() const;

    /// Copy with every |weight| < tol removed from the arc lists.
    Network without_small_weights(double tol) const;

    friend bool operator==(const Network&, const Network&) = default;

private:
    int input_dim_ = 0;
    std::vector<Neuron> neurons_;
    std::vector<int> outputs_;
};

struct Evaluation {
    std::vector<double> post_activations;   // z for every neuron
    std::vector<double> outputs;            // y, in output order
};

/// Exact forward evaluation. Throws std::invalid_argument on a size mismatch.
Evaluation eval_network(const Network& net, std::span<const double> x);

/// Index of the largest output; ties go to the lowest index.
int classify(const Network& net, std::span<const double> x);

/// Dense layered network. `layer_sizes` lists the input width, any hidden
/// widths, and the output width last. A single entry yields one affine output
/// reading the inputs directly. Weights and biases are uniform in
/// [-weight_scale, weight_scale].
Network generate_random_network(std::span<const int> layer_sizes, std::uint64_t seed, double weight_scale);

// Text format, see README.md.
Network parse_network(const std::string& text);
Network load_network(const std::filesystem::path& path);
std::string format_network(const Network& net);
void save_network(const Network& net, const std::filesystem::path& path);

/// 17 significant digits; parses back to the identical double.
std::string format_real(double v);

}  // namespace c2v
