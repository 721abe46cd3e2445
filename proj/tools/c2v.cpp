#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "c2v/verify.hpp"

namespace fs = std::filesystem;
using namespace c2v;

namespace {

struct VerifyArgs {
    std::string network;
    std::string instances;
    std::string method;
    std::optional<double> epsilon;
    std::string attack = "on";
    std::string report;
    std::string dump_lp;
    std::string scalars = "propagation";
    int threads = 1;
    VerifyParams params;
};

struct GenArgs {
    std::vector<int> layers;
    std::uint64_t seed = 0;
    int count = 10;
    double epsilon = 0.02;
    double weight_scale = 1.0;
    std::string out = ".";
};

void print_summary(const BatchSummary& s, const VerifyParams& p) {
    std::printf("method     %s\n", to_string(p.method));
    std::printf("instances  %d\n", s.total);
    std::printf("verified   %d\n", s.verified);
    std::printf("falsified  %d\n", s.falsified);
    std::printf("unknown    %d\n", s.unknown);
    std::printf("skipped    %d\n", s.skipped);
    std::printf("errors     %d\n", s.errors);
    if (!p.deterministic) {
        std::printf("time mean  %.4fs  p50 %.4fs  p90 %.4fs  max %.4fs\n", s.mean_seconds, s.p50_seconds, s.p90_seconds,
                    s.max_seconds);
    }
}

int run_verify(VerifyArgs& a) {
    const auto method = parse_method(a.method);
    if (!method) throw CLI::ValidationError("--method", "unknown method '" + a.method + "'");
    a.params.method = *method;
    a.params.attack = a.attack == "on";
    a.params.scalar_source = a.scalars == "interval" ? ScalarSource::interval : ScalarSource::propagation;
    validate(a.params);

    const Network net = load_network(a.network);
    std::vector<InstanceRecord> records = load_instances(a.instances);
    if (a.epsilon) {
        for (auto& r : records) {
            if (r.instance) r.instance->epsilon = *a.epsilon;
        }
    }
    if (!a.dump_lp.empty()) {
        fs::create_directories(a.dump_lp);
        a.params.dump_lp_dir = a.dump_lp;
    }

    const BatchResult batch = batch_verify(net, records, a.params, a.threads);
    if (a.report.empty()) {
        write_reports(std::cout, batch, a.params);
    } else {
        std::ofstream out(a.report);
        if (!out) throw std::runtime_error("cannot write report " + a.report);
        write_reports(out, batch, a.params);
        if (!out.flush()) throw std::runtime_error("failed writing report " + a.report);
    }
    for (const auto& r : batch.reports) {
        if (r.verdict == Verdict::error) std::fprintf(stderr, "warning: %s\n", r.error.c_str());
    }
    print_summary(batch.summary, a.params);
    return 0;
}

int run_gen(const GenArgs& g) {
    const Corpus c = generate_corpus(g.layers, g.seed, g.count, g.epsilon, g.weight_scale);
    fs::create_directories(g.out);
    const fs::path net_path = fs::path(g.out) / "network.net";
    const fs::path inst_path = fs::path(g.out) / "instances.txt";
    save_network(c.net, net_path);
    std::ofstream out(inst_path);
    if (!out) throw std::runtime_error("cannot write " + inst_path.string());
    out << "# seed=" << g.seed << " layers=";
    for (std::size_t i = 0; i < g.layers.size(); ++i) out << (i ? "," : "") << g.layers[i];
    out << "\n";
    for (const auto& inst : c.instances) out << format_instance(inst) << "\n";
    if (!out.flush()) throw std::runtime_error("failed writing " + inst_path.string());
    std::printf("wrote %s and %s\n", net_path.c_str(), inst_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ReLU network robustness verifier"};
    app.require_subcommand(1);

    VerifyArgs va;
    auto* verify_cmd = app.add_subcommand("verify", "Certify L-infinity robustness of a batch of instances");
    verify_cmd->add_option("--network", va.network, "Network file")->required()->check(CLI::ExistingFile);
    verify_cmd->add_option("--instances", va.instances, "Instance file")->required()->check(CLI::ExistingFile);
    verify_cmd->add_option("--method", va.method, "interval|fastlin|deeppoly|fastc2v|lp|optc2v")->required();
    verify_cmd->add_option("--iterations", va.params.iterations, "Tightening iterations for fastc2v")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    verify_cmd->add_option("--cut-rounds", va.params.cut_rounds, "Separation rounds for optc2v")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    verify_cmd->add_option("--epsilon", va.epsilon, "Override every instance's radius")->check(CLI::NonNegativeNumber);
    verify_cmd->add_option("--seed", va.params.seed, "Attack seed")->capture_default_str();
    verify_cmd->add_flag("--deterministic", va.params.deterministic, "Omit timings so reports are byte-stable");
    verify_cmd->add_option("--attack", va.attack, "Run the gradient attack on unverified instances")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    verify_cmd->add_option("--report", va.report, "Write JSON-lines reports here instead of stdout");
    verify_cmd->add_option("--dump-lp", va.dump_lp, "Write each final LP to this directory (lp, optc2v)");
    verify_cmd->add_option("--threads", va.threads, "Instances processed concurrently")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    verify_cmd->add_option("--scalars", va.scalars, "Intermediate range source for propagation methods")
        ->check(CLI::IsMember({"propagation", "interval"}))
        ->capture_default_str();
    verify_cmd->add_option("--weight-zero-tol", va.params.weight_zero_tol, "Drop smaller weights on the LP path")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    verify_cmd->add_flag("--retain-swaps", va.params.retain_swaps, "Keep tightened upper functions across neurons");
    verify_cmd->add_flag("--early-exit", va.params.early_exit, "Stop at the first nonnegative margin bound");
    verify_cmd->add_flag("--verbose", va.params.verbose, "Include per-neuron ranges in reports");

    GenArgs ga;
    auto* gen_cmd = app.add_subcommand("gen", "Write a random network and instance corpus");
    gen_cmd->add_option("--layers", ga.layers, "Layer widths, input first and output last")
        ->required()
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", ga.seed, "Generator seed")->required();
    gen_cmd->add_option("--count", ga.count, "Number of instances")->check(CLI::NonNegativeNumber)->capture_default_str();
    gen_cmd->add_option("--epsilon", ga.epsilon, "Radius written to each instance")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    gen_cmd->add_option("--weight-scale", ga.weight_scale, "Weights uniform in [-s, s]")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gen_cmd->add_option("--out", ga.out, "Output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        if (verify_cmd->parsed()) return run_verify(va);
        return run_gen(ga);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
