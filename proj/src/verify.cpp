#include "c2v/verify.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace c2v {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool parse_double(std::string_view s, double& out) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_int(std::string_view s, int& out) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

RobustnessInstance parse_instance_line(const std::string& line) {
    std::istringstream in(line);
    std::string tok;
    std::optional<int> label;
    std::optional<double> eps;
    std::optional<std::vector<double>> x;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + tok + "'");
        const std::string key = tok.substr(0, eq);
        const std::string_view val = std::string_view(tok).substr(eq + 1);
        if (key == "label") {
            int t;
            if (!parse_int(val, t) || t < 0) throw std::invalid_argument("bad label '" + std::string(val) + "'");
            label = t;
        } else if (key == "epsilon") {
            double e;
            if (!parse_double(val, e) || !(e >= 0.0) || !std::isfinite(e)) {
                throw std::invalid_argument("bad epsilon '" + std::string(val) + "'");
            }
            eps = e;
        } else if (key == "x") {
            std::vector<double> v;
            std::size_t start = 0;
            while (start <= val.size()) {
                const std::size_t comma = std::min(val.find(',', start), val.size());
                double d;
                if (!parse_double(val.substr(start, comma - start), d) || !(d >= 0.0 && d <= 1.0)) {
                    throw std::invalid_argument("bad x entry '" + std::string(val.substr(start, comma - start)) +
                                                "' (values must lie in [0, 1])");
                }
                v.push_back(d);
                start = comma + 1;
            }
            x = std::move(v);
        } else {
            throw std::invalid_argument("unknown key '" + key + "'");
        }
    }
    if (!label || !eps || !x) throw std::invalid_argument("missing one of label, epsilon, x");
    return {std::move(*x), *eps, *label};
}

void check_instance(const Network& net, const RobustnessInstance& inst) {
    if (static_cast<int>(inst.x_hat.size()) != net.input_dim()) {
        throw std::invalid_argument("instance has " + std::to_string(inst.x_hat.size()) + " inputs, network expects " +
                                    std::to_string(net.input_dim()));
    }
    if (inst.label >= net.num_outputs()) {
        throw std::invalid_argument("label " + std::to_string(inst.label) + " out of range for " +
                                    std::to_string(net.num_outputs()) + " outputs");
    }
}

// Output row k as an objective over the neurons it reads.
void add_output_row(const Network& net, int k, double sign, LinearExpr& e) {
    const Neuron& n = net.neuron(net.outputs()[static_cast<std::size_t>(k)]);
    for (const Arc& a : n.arcs) e.coeffs[static_cast<std::size_t>(a.source)] += sign * a.weight;
    e.constant += sign * n.bias;
}

BoundingMethod propagation_method(Method m) {
    switch (m) {
        case Method::interval: return BoundingMethod::interval;
        case Method::fastlin: return BoundingMethod::fastlin;
        default: return BoundingMethod::deeppoly;
    }
}

}  // namespace

std::vector<InstanceRecord> parse_instances(const std::string& text) {
    std::vector<InstanceRecord> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        InstanceRecord rec;
        rec.line = lineno;
        try {
            rec.instance = parse_instance_line(line);
        } catch (const std::invalid_argument& e) {
            rec.error = "line " + std::to_string(lineno) + ": " + e.what();
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<InstanceRecord> load_instances(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open instance file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_instances(ss.str());
}

std::string format_instance(const RobustnessInstance& inst) {
    std::string s = "label=" + std::to_string(inst.label) + " epsilon=" + format_real(inst.epsilon) + " x=";
    for (std::size_t i = 0; i < inst.x_hat.size(); ++i) {
        if (i) s += ',';
        s += format_real(inst.x_hat[i]);
    }
    return s;
}

BoxDomain build_input_box(const RobustnessInstance& inst) {
    std::vector<double> lo(inst.x_hat.size()), hi(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
        lo[i] = std::max(0.0, inst.x_hat[i] - inst.epsilon);
        hi[i] = std::min(1.0, inst.x_hat[i] + inst.epsilon);
    }
    return BoxDomain(std::move(lo), std::move(hi));
}

const char* to_string(Method m) {
    switch (m) {
        case Method::interval: return "interval";
        case Method::fastlin: return "fastlin";
        case Method::deeppoly: return "deeppoly";
        case Method::fastc2v: return "fastc2v";
        case Method::lp: return "lp";
        case Method::optc2v: return "optc2v";
    }
    return "?";
}

std::optional<Method> parse_method(const std::string& name) {
    for (Method m : {Method::interval, Method::fastlin, Method::deeppoly, Method::fastc2v, Method::lp, Method::optc2v}) {
        if (name == to_string(m)) return m;
    }
    return std::nullopt;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::verified: return "verified";
        case Verdict::falsified: return "falsified";
        case Verdict::unknown: return "unknown";
        case Verdict::skipped: return "skipped";
        case Verdict::error: return "error";
    }
    return "?";
}

void validate(const VerifyParams& p) {
    if (p.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
    if (p.cut_rounds < 0) throw std::invalid_argument("cut rounds must be >= 0");
    if (!(p.weight_zero_tol >= 0.0)) throw std::invalid_argument("weight_zero_tol must be >= 0");
    if (p.attack_params.restarts < 1) throw std::invalid_argument("attack restarts must be >= 1");
    if (p.attack_params.steps < 0) throw std::invalid_argument("attack steps must be >= 0");
    if (!(p.attack_params.lr > 0.0)) throw std::invalid_argument("attack learning rate must be > 0");
}

ObjectiveBounder::ObjectiveBounder(const Network& net, const BoxDomain& X, const VerifyParams& params)
    : net_(net), X_(X), params_(params) {
    switch (params.method) {
        case Method::lp:
        case Method::optc2v: {
            LpBoundsOptions o;
            o.cut.rounds = params.method == Method::lp ? 0 : params.cut_rounds;
            o.weight_zero_tol = params.weight_zero_tol;
            lp_ = lp_all_bounds(net, X, o);
            break;
        }
        default: {
            PropagationOptions o;
            o.method = propagation_method(params.method);
            o.iterations = params.method == Method::fastc2v ? params.iterations : 0;
            o.retain_swaps = params.retain_swaps;
            o.scalar_source = params.scalar_source;
            prop_ = fastc2v_all_bounds(net, X, o);
        }
    }
}

double ObjectiveBounder::upper(const LinearExpr& objective, const std::string& lp_name) {
    if (lp_) {
        OptC2VOptions o;
        o.rounds = params_.method == Method::lp ? 0 : params_.cut_rounds;
        OptC2VResult detail;
        const double v = lp_objective_bound(*lp_, X_, objective, o, &detail);
        if (!lp_name.empty() && !params_.dump_lp_dir.empty()) {
            const auto path = params_.dump_lp_dir / (lp_name + ".lp");
            std::ofstream out(path);
            if (!out) throw std::runtime_error("cannot write " + path.string());
            write_lp(detail.lp.model, out, lp_name);
        }
        return v;
    }
    const int T = params_.method == Method::fastc2v ? params_.iterations : 0;
    return objective_upper_bound(net_, X_, *prop_, objective, propagation_method(params_.method), T);
}

const std::vector<ScalarBounds>& ObjectiveBounder::scalar_bounds() const { return lp_ ? lp_->pre : prop_->pre; }

LinearExpr margin_objective(const Network& net, int k, int t) {
    LinearExpr e;
    e.coeffs.assign(static_cast<std::size_t>(net.size()), 0.0);
    add_output_row(net, k, 1.0, e);
    add_output_row(net, t, -1.0, e);
    return e;
}

double max_margin(const Network& net, std::span<const double> x, int t) {
    const Evaluation ev = eval_network(net, x);
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < net.num_outputs(); ++k) {
        if (k != t) best = std::max(best, ev.outputs[k] - ev.outputs[t]);
    }
    return best;
}

std::optional<std::vector<double>> attack_upper_bound(const Network& net, const RobustnessInstance& inst,
                                                      const AttackParams& params, std::uint64_t seed) {
    check_instance(net, inst);
    if (net.num_outputs() < 2) return std::nullopt;
    const BoxDomain X = build_input_box(inst);
    const int m = net.input_dim();
    const int t = inst.label;
    std::mt19937_64 rng(seed);
    std::vector<double> adj(static_cast<std::size_t>(net.size()));

    for (int r = 0; r < params.restarts; ++r) {
        std::vector<double> x(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            x[i] = r == 0 ? std::clamp(inst.x_hat[i], X.lower(i), X.upper(i))
                          : std::uniform_real_distribution<double>(X.lower(i), X.upper(i))(rng);
        }
        for (int step = 0;; ++step) {
            const Evaluation ev = eval_network(net, x);
            int kbest = -1;
            double best = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < net.num_outputs(); ++k) {
                if (k != t && ev.outputs[k] - ev.outputs[t] > best) {
                    best = ev.outputs[k] - ev.outputs[t];
                    kbest = k;
                }
            }
            if (best > 0.0) return x;
            if (step == params.steps) break;

            std::fill(adj.begin(), adj.end(), 0.0);
            adj[static_cast<std::size_t>(net.outputs()[kbest])] += 1.0;
            adj[static_cast<std::size_t>(net.outputs()[t])] -= 1.0;
            for (int i = net.size() - 1; i >= m; --i) {
                const Neuron& n = net.neuron(i);
                double g = adj[i];
                if (n.kind == NeuronKind::relu && !(ev.post_activations[i] > 0.0)) g = 0.0;
                if (g == 0.0) continue;
                for (const Arc& a : n.arcs) adj[static_cast<std::size_t>(a.source)] += g * a.weight;
            }
            for (int i = 0; i < m; ++i) {
                const double s = adj[i] > 0.0 ? 1.0 : adj[i] < 0.0 ? -1.0 : 0.0;
                x[i] = std::clamp(x[i] + params.lr * s, X.lower(i), X.upper(i));
            }
        }
    }
    return std::nullopt;
}

VerificationReport verify(const Network& net, const RobustnessInstance& inst, const VerifyParams& params, int index) {
    validate(params);
    check_instance(net, inst);
    const auto t0 = Clock::now();
    VerificationReport rep;
    rep.index = index;
    rep.label = inst.label;
    rep.epsilon = inst.epsilon;
    rep.predicted = classify(net, inst.x_hat);
    if (rep.predicted != inst.label) {
        rep.verdict = Verdict::skipped;
        rep.total_seconds = seconds_since(t0);
        return rep;
    }

    const BoxDomain X = build_input_box(inst);
    ObjectiveBounder bounder(net, X, params);
    rep.bound_seconds = seconds_since(t0);
    bool all_negative = true;
    for (int k = 0; k < net.num_outputs(); ++k) {
        if (k == inst.label) continue;
        const auto tk = Clock::now();
        const std::string name = "inst" + std::to_string(index) + "_" + to_string(params.method) + "_k" + std::to_string(k);
        const double b = bounder.upper(margin_objective(net, k, inst.label), name);
        rep.margins.push_back({k, b, seconds_since(tk)});
        if (!(b < 0.0)) {
            all_negative = false;
            if (params.early_exit) break;
        }
    }
    if (params.verbose) rep.scalar_bounds = bounder.scalar_bounds();

    if (all_negative) {
        rep.verdict = Verdict::verified;
    } else {
        rep.verdict = Verdict::unknown;
        if (params.attack) {
            std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                              static_cast<std::uint32_t>(index)};
            std::array<std::uint32_t, 2> words;
            seq.generate(words.begin(), words.end());
            const std::uint64_t stream = (std::uint64_t{words[0]} << 32) | words[1];
            if (auto w = attack_upper_bound(net, inst, params.attack_params, stream)) {
                if (X.contains(*w) && max_margin(net, *w, inst.label) > 0.0) {
                    rep.verdict = Verdict::falsified;
                    rep.witness_class = classify(net, *w);
                    rep.witness = std::move(*w);
                }
            }
        }
    }
    rep.total_seconds = seconds_since(t0);
    return rep;
}

BatchResult batch_verify(const Network& net, const std::vector<InstanceRecord>& records, const VerifyParams& params,
                         int threads) {
    validate(params);
    BatchResult out;
    out.reports.resize(records.size());
    auto run_one = [&](std::size_t i) {
        const InstanceRecord& rec = records[i];
        VerificationReport& rep = out.reports[i];
        if (!rec.instance) {
            rep.index = static_cast<int>(i);
            rep.verdict = Verdict::error;
            rep.error = rec.error;
        } else {
            try {
                rep = verify(net, *rec.instance, params, static_cast<int>(i));
            } catch (const std::exception& e) {
                rep = {};
                rep.index = static_cast<int>(i);
                rep.verdict = Verdict::error;
                rep.error = "line " + std::to_string(rec.line) + ": " + e.what();
            }
        }
        rep.line = rec.line;
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(records.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < records.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < records.size();) run_one(i);
            });
        }
    }

    BatchSummary& s = out.summary;
    std::vector<double> times;
    for (const auto& r : out.reports) {
        ++s.total;
        switch (r.verdict) {
            case Verdict::verified: ++s.verified; break;
            case Verdict::falsified: ++s.falsified; break;
            case Verdict::unknown: ++s.unknown; break;
            case Verdict::skipped: ++s.skipped; break;
            case Verdict::error: ++s.errors; break;
        }
        if (r.verdict != Verdict::error) times.push_back(r.total_seconds);
    }
    if (!times.empty()) {
        std::sort(times.begin(), times.end());
        double sum = 0.0;
        for (double v : times) sum += v;
        auto pct = [&](double q) {
            const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(times.size())));
            return times[std::max<std::size_t>(rank, 1) - 1];
        };
        s.mean_seconds = sum / static_cast<double>(times.size());
        s.p50_seconds = pct(0.5);
        s.p90_seconds = pct(0.9);
        s.max_seconds = times.back();
    }
    return out;
}

void write_reports(std::ostream& out, const BatchResult& batch, const VerifyParams& params) {
    using nlohmann::ordered_json;
    for (const auto& r : batch.reports) {
        ordered_json j;
        j["index"] = r.index;
        j["line"] = r.line;
        j["verdict"] = to_string(r.verdict);
        if (r.verdict == Verdict::error) {
            j["error"] = r.error;
            out << j.dump() << '\n';
            continue;
        }
        j["label"] = r.label;
        j["predicted"] = r.predicted;
        j["epsilon"] = r.epsilon;
        j["method"] = to_string(params.method);
        ordered_json p;
        if (params.method == Method::fastc2v) p["iterations"] = params.iterations;
        if (params.method == Method::optc2v) p["cut_rounds"] = params.cut_rounds;
        if (params.method == Method::lp || params.method == Method::optc2v) p["weight_zero_tol"] = params.weight_zero_tol;
        j["params"] = p.is_null() ? ordered_json::object() : p;
        ordered_json margins = ordered_json::array();
        for (const auto& mb : r.margins) {
            ordered_json m;
            m["class"] = mb.cls;
            m["bound"] = mb.bound;
            if (!params.deterministic) m["seconds"] = mb.seconds;
            margins.push_back(m);
        }
        j["margins"] = margins;
        if (r.verdict == Verdict::falsified) {
            j["witness"] = r.witness;
            j["witness_class"] = r.witness_class;
        }
        if (!r.scalar_bounds.empty()) {
            ordered_json sb = ordered_json::array();
            for (const auto& b : r.scalar_bounds) sb.push_back({b.lower, b.upper});
            j["scalar_bounds"] = sb;
        }
        if (!params.deterministic) {
            j["bound_seconds"] = r.bound_seconds;
            j["total_seconds"] = r.total_seconds;
        }
        out << j.dump() << '\n';
    }
    const BatchSummary& s = batch.summary;
    ordered_json sj;
    sj["total"] = s.total;
    sj["verified"] = s.verified;
    sj["falsified"] = s.falsified;
    sj["unknown"] = s.unknown;
    sj["skipped"] = s.skipped;
    sj["errors"] = s.errors;
    if (!params.deterministic) {
        sj["mean_seconds"] = s.mean_seconds;
        sj["p50_seconds"] = s.p50_seconds;
        sj["p90_seconds"] = s.p90_seconds;
        sj["max_seconds"] = s.max_seconds;
    }
    ordered_json line;
    line["summary"] = sj;
    out << line.dump() << '\n';
}

Corpus generate_corpus(std::span<const int> layers, std::uint64_t seed, int count, double epsilon,
                       double weight_scale) {
    Corpus c{generate_random_network(layers, seed, weight_scale), {}};
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < count; ++k) {
        RobustnessInstance inst;
        inst.epsilon = epsilon;
        for (int i = 0; i < c.net.input_dim(); ++i) inst.x_hat.push_back(u(rng));
        inst.label = classify(c.net, inst.x_hat);
        c.instances.push_back(std::move(inst));
    }
    return c;
}

double output_upper_bound(const Network& net, const BoxDomain& X, int output, const VerifyParams& params) {
    validate(params);
    if (output < 0 || output >= net.num_outputs()) throw std::out_of_range("output index out of range");
    LinearExpr e;
    e.coeffs.assign(static_cast<std::size_t>(net.size()), 0.0);
    add_output_row(net, output, 1.0, e);
    ObjectiveBounder bounder(net, X, params);
    return bounder.upper(e);
}

}  // namespace c2v
