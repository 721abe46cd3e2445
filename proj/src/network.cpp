#include "c2v/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace c2v {

const char* to_string(NeuronKind kind) {
    switch (kind) {
    case NeuronKind::input: return "input";
    case NeuronKind::relu: return "relu";
    case NeuronKind::output: return "output";
    }
    return "?";
}

BoxDomain::BoxDomain(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) {
        throw std::invalid_argument("box lower/upper length mismatch");
    }
    for (std::size_t i = 0; i < lower_.size(); ++i) {
        if (!(lower_[i] <= upper_[i])) {
            throw std::invalid_argument("box coordinate " + std::to_string(i) + " has lower > upper");
        }
    }
}

BoxDomain BoxDomain::point(std::span<const double> x) {
    return BoxDomain(std::vector<double>(x.begin(), x.end()), std::vector<double>(x.begin(), x.end()));
}

bool BoxDomain::contains(std::span<const double> x, double tol) const {
    if (x.size() != size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < lower_[i] - tol || x[i] > upper_[i] + tol) return false;
    }
    return true;
}

Network::Network(int input_dim, std::vector<Neuron> neurons, std::vector<int> outputs)
    : input_dim_(input_dim), neurons_(std::move(neurons)), outputs_(std::move(outputs)) {
    if (input_dim_ < 1) throw InvariantError(-1, "input dimension must be at least 1");
    if (static_cast<int>(neurons_.size()) < input_dim_) {
        throw InvariantError(-1, "fewer neurons than inputs");
    }
    std::vector<int> declared_outputs;
    for (int id = 0; id < size(); ++id) {
        Neuron& n = neurons_[static_cast<std::size_t>(id)];
        if (id < input_dim_) {
            if (n.kind != NeuronKind::input) throw InvariantError(id, "first m neurons must be inputs");
            if (!n.arcs.empty() || n.bias != 0.0) {
                throw InvariantError(id, "input neurons take no weights and zero bias");
            }
            continue;
        }
        if (n.kind == NeuronKind::input) throw InvariantError(id, "input neuron after the input block");
        if (!std::isfinite(n.bias)) throw InvariantError(id, "non-finite bias");
        std::sort(n.arcs.begin(), n.arcs.end(), [](const Arc& a, const Arc& b) { return a.source < b.source; });
        for (std::size_t k = 0; k < n.arcs.size(); ++k) {
            const Arc& a = n.arcs[k];
            if (a.source < 0 || a.source >= id) {
                throw InvariantError(id, "weight references neuron " + std::to_string(a.source + 1) +
                                             " which does not precede it");
            }
            if (k > 0 && n.arcs[k - 1].source == a.source) {
                throw InvariantError(id, "duplicate weight from neuron " + std::to_string(a.source + 1));
            }
            if (!std::isfinite(a.weight)) throw InvariantError(id, "non-finite weight");
        }
        if (n.kind == NeuronKind::output) declared_outputs.push_back(id);
    }
    if (declared_outputs.empty()) throw InvariantError(-1, "network has no output neurons");
    if (outputs_.empty()) {
        outputs_ = declared_outputs;
    } else {
        std::vector<int> sorted = outputs_;
        std::sort(sorted.begin(), sorted.end());
        if (sorted != declared_outputs) {
            throw InvariantError(-1, "output list does not match the neurons of kind output");
        }
    }
}

int Network::num_relu() const {
    return static_cast<int>(std::count_if(neurons_.begin(), neurons_.end(),
                                          [](const Neuron& n) { return n.kind == NeuronKind::relu; }));
}

Network Network::without_small_weights(double tol) const {
    Network copy = *this;
    for (Neuron& n : copy.neurons_) {
        std::erase_if(n.arcs, [tol](const Arc& a) { return std::abs(a.weight) < tol; });
    }
    return copy;
}

Evaluation eval_network(const Network& net, std::span<const double> x) {
    if (static_cast<int>(x.size()) != net.input_dim()) {
        throw std::invalid_argument("input has " + std::to_string(x.size()) + " entries, network expects " +
                                    std::to_string(net.input_dim()));
    }
    Evaluation ev;
    ev.post_activations.resize(static_cast<std::size_t>(net.size()));
    for (int id = 0; id < net.size(); ++id) {
        const Neuron& n = net.neuron(id);
        if (n.kind == NeuronKind::input) {
            ev.post_activations[id] = x[static_cast<std::size_t>(id)];
            continue;
        }
        double pre = n.bias;
        for (const Arc& a : n.arcs) pre += a.weight * ev.post_activations[static_cast<std::size_t>(a.source)];
        ev.post_activations[id] = n.kind == NeuronKind::relu ? std::max(0.0, pre) : pre;
    }
    ev.outputs.reserve(net.outputs().size());
    for (int o : net.outputs()) ev.outputs.push_back(ev.post_activations[static_cast<std::size_t>(o)]);
    return ev;
}

int classify(const Network& net, std::span<const double> x) {
    const Evaluation ev = eval_network(net, x);
    return static_cast<int>(std::max_element(ev.outputs.begin(), ev.outputs.end()) - ev.outputs.begin());
}

Network generate_random_network(std::span<const int> layer_sizes, std::uint64_t seed, double weight_scale) {
    if (layer_sizes.empty()) throw std::invalid_argument("need at least one layer size");
    for (int s : layer_sizes) {
        if (s < 1) throw std::invalid_argument("layer sizes must be at least 1");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-weight_scale, weight_scale);

    std::vector<Neuron> neurons(static_cast<std::size_t>(layer_sizes[0]));
    std::vector<int> previous(static_cast<std::size_t>(layer_sizes[0]));
    for (int i = 0; i < layer_sizes[0]; ++i) previous[static_cast<std::size_t>(i)] = i;

    auto add_layer = [&](int width, NeuronKind kind) {
        std::vector<int> current;
        for (int k = 0; k < width; ++k) {
            Neuron n;
            n.kind = kind;
            for (int src : previous) n.arcs.push_back({src, dist(rng)});
            n.bias = dist(rng);
            current.push_back(static_cast<int>(neurons.size()));
            neurons.push_back(std::move(n));
        }
        previous = std::move(current);
    };

    if (layer_sizes.size() == 1) {
        add_layer(1, NeuronKind::output);
    } else {
        for (std::size_t l = 1; l + 1 < layer_sizes.size(); ++l) add_layer(layer_sizes[l], NeuronKind::relu);
        add_layer(layer_sizes.back(), NeuronKind::output);
    }
    return Network(layer_sizes[0], std::move(neurons));
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

double parse_real(const std::string& tok, int line, const char* field) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw ParseError(line, std::string("bad ") + field + " '" + tok + "'");
    }
    if (used != tok.size()) throw ParseError(line, std::string("bad ") + field + " '" + tok + "'");
    return v;
}

int parse_int(const std::string& tok, int line, const char* field) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(tok, &used);
    } catch (const std::exception&) {
        throw ParseError(line, std::string("bad ") + field + " '" + tok + "'");
    }
    if (used != tok.size()) throw ParseError(line, std::string("bad ") + field + " '" + tok + "'");
    return static_cast<int>(v);
}

// "(j,val)" -> Arc with 0-based source.
Arc parse_arc(const std::string& tok, int line) {
    if (tok.size() < 5 || tok.front() != '(' || tok.back() != ')') {
        throw ParseError(line, "bad weight term '" + tok + "', expected (j,value)");
    }
    const std::string body = tok.substr(1, tok.size() - 2);
    const auto comma = body.find(',');
    if (comma == std::string::npos) throw ParseError(line, "bad weight term '" + tok + "', missing comma");
    const int j = parse_int(body.substr(0, comma), line, "weight source");
    return {j - 1, parse_real(body.substr(comma + 1), line, "weight value")};
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

bool is_blank_or_comment(const std::string& line) {
    const auto p = line.find_first_not_of(" \t\r");
    return p == std::string::npos || line[p] == '#';
}

}  // namespace

Network parse_network(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    int input_dim = -1;
    std::vector<int> outputs;
    std::vector<Neuron> neurons;
    bool header_seen = false;

    while (std::getline(in, raw)) {
        ++lineno;
        if (is_blank_or_comment(raw)) continue;
        const auto toks = split_ws(raw);
        if (!header_seen) {
            for (const auto& t : toks) {
                if (t.rfind("m=", 0) == 0) {
                    input_dim = parse_int(t.substr(2), lineno, "m");
                } else if (t.rfind("outputs=", 0) == 0) {
                    std::string list = t.substr(8);
                    std::size_t start = 0;
                    while (start <= list.size()) {
                        const auto end = list.find(',', start);
                        const std::string item = list.substr(start, end == std::string::npos ? std::string::npos : end - start);
                        if (item.empty()) throw ParseError(lineno, "empty entry in outputs list");
                        outputs.push_back(parse_int(item, lineno, "output index") - 1);
                        if (end == std::string::npos) break;
                        start = end + 1;
                    }
                } else {
                    throw ParseError(lineno, "unknown header field '" + t + "'");
                }
            }
            if (input_dim < 0) throw ParseError(lineno, "header is missing m=<int>");
            if (outputs.empty()) throw ParseError(lineno, "header is missing outputs=<idx,...>");
            header_seen = true;
            continue;
        }
        if (toks.size() < 4) throw ParseError(lineno, "expected 'i kind b w:...'");
        const int idx = parse_int(toks[0], lineno, "neuron index");
        if (idx != static_cast<int>(neurons.size()) + 1) {
            throw ParseError(lineno, "neuron index " + toks[0] + " out of sequence, expected " +
                                         std::to_string(neurons.size() + 1));
        }
        Neuron n;
        if (toks[1] == "input") n.kind = NeuronKind::input;
        else if (toks[1] == "relu") n.kind = NeuronKind::relu;
        else if (toks[1] == "output") n.kind = NeuronKind::output;
        else throw ParseError(lineno, "unknown neuron kind '" + toks[1] + "'");
        n.bias = parse_real(toks[2], lineno, "bias");
        if (toks[3].rfind("w:", 0) != 0) throw ParseError(lineno, "expected 'w:' before weights");
        std::vector<std::string> terms;
        if (toks[3].size() > 2) terms.push_back(toks[3].substr(2));
        terms.insert(terms.end(), toks.begin() + 4, toks.end());
        for (const auto& t : terms) n.arcs.push_back(parse_arc(t, lineno));
        neurons.push_back(std::move(n));
    }
    if (!header_seen) throw ParseError(lineno, "missing header line");
    if (neurons.empty()) throw ParseError(lineno, "network has no neurons");
    return Network(input_dim, std::move(neurons), std::move(outputs));
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_network(buf.str());
}

std::string format_network(const Network& net) {
    std::ostringstream out;
    out << "m=" << net.input_dim() << " outputs=";
    for (std::size_t k = 0; k < net.outputs().size(); ++k) {
        if (k) out << ',';
        out << net.outputs()[k] + 1;
    }
    out << '\n';
    for (int id = 0; id < net.size(); ++id) {
        const Neuron& n = net.neuron(id);
        out << id + 1 << ' ' << to_string(n.kind) << ' ' << format_real(n.bias) << " w:";
        for (std::size_t k = 0; k < n.arcs.size(); ++k) {
            if (k) out << ' ';
            out << '(' << n.arcs[k].source + 1 << ',' << format_real(n.arcs[k].weight) << ')';
        }
        out << '\n';
    }
    return out.str();
}

void save_network(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write network file " + path.string());
    out << format_network(net);
}

}  // namespace c2v
