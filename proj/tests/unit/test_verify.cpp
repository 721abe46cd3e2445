#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "c2v/verify.hpp"

using namespace c2v;

namespace {

Network worked_example() { return load_network(std::filesystem::path(C2V_FIXTURES) / "worked_example.net"); }

std::string dump(const BatchResult& b, const VerifyParams& p) {
    std::ostringstream out;
    write_reports(out, b, p);
    return out.str();
}

std::vector<InstanceRecord> random_records(const Network& net, int count, double eps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<InstanceRecord> recs;
    for (int k = 0; k < count; ++k) {
        RobustnessInstance inst;
        inst.epsilon = eps;
        for (int i = 0; i < net.input_dim(); ++i) inst.x_hat.push_back(u(rng));
        inst.label = classify(net, inst.x_hat);
        recs.push_back({k + 1, inst, {}});
    }
    return recs;
}

}  // namespace

TEST_CASE("input box clipping") {
    const BoxDomain a = build_input_box({{0.01, 0.99}, 0.05, 0});
    CHECK(a.lower(0) == 0.0);
    CHECK(a.upper(0) == doctest::Approx(0.06));
    CHECK(a.lower(1) == doctest::Approx(0.94));
    CHECK(a.upper(1) == 1.0);

    const BoxDomain b = build_input_box({{0.3, 0.7}, 0.0, 1});
    CHECK(b == BoxDomain::point(std::vector<double>{0.3, 0.7}));

    const BoxDomain c = build_input_box({{0.5}, 0.026, 0});
    CHECK(c.lower(0) == doctest::Approx(0.474));
    CHECK(c.upper(0) == doctest::Approx(0.526));
}

TEST_CASE("instance file parsing") {
    const auto recs = parse_instances(
        "# corpus\n"
        "label=1 epsilon=0.05 x=0.25,0.5\n"
        "\n"
        "x=0,1 label=0 epsilon=0   # trailing comment\n"
        "label=0 epsilon=0.1 x=0.5,1.5\n"
        "label=0 x=0.5\n"
        "label=0 epsilon=0.1 x=0.5,abc\n"
        "label=-1 epsilon=0.1 x=0.5\n"
        "label=0 epsilon=0.1 x=0.5 color=red\n");
    REQUIRE(recs.size() == 7);
    REQUIRE(recs[0].instance);
    CHECK(recs[0].line == 2);
    CHECK(recs[0].instance->label == 1);
    CHECK(recs[0].instance->epsilon == 0.05);
    CHECK(recs[0].instance->x_hat == std::vector<double>{0.25, 0.5});
    REQUIRE(recs[1].instance);
    CHECK(recs[1].line == 4);
    CHECK(recs[1].instance->x_hat == std::vector<double>{0.0, 1.0});
    for (std::size_t i = 2; i < recs.size(); ++i) {
        CHECK_FALSE(recs[i].instance);
        CHECK(recs[i].error.rfind("line " + std::to_string(recs[i].line) + ":", 0) == 0);
    }

    const RobustnessInstance inst{{0.1, 1.0 / 3}, 0.026, 2};
    const auto back = parse_instances(format_instance(inst));
    REQUIRE(back.size() == 1);
    REQUIRE(back[0].instance);
    CHECK(back[0].instance->x_hat == inst.x_hat);
    CHECK(back[0].instance->epsilon == inst.epsilon);
    CHECK(back[0].instance->label == 2);

    CHECK(parse_instances("").empty());
}

TEST_CASE("method names") {
    for (Method m : {Method::interval, Method::fastlin, Method::deeppoly, Method::fastc2v, Method::lp, Method::optc2v}) {
        CHECK(parse_method(to_string(m)) == m);
    }
    CHECK_FALSE(parse_method("crown"));
    VerifyParams p;
    p.iterations = -1;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = {};
    p.attack_params.lr = 0.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("threshold check on the worked example") {
    const Network net = worked_example();
    const BoxDomain X({-1, -1}, {1, 1});
    const double beta = 4.0;

    VerifyParams p;
    p.scalar_source = ScalarSource::interval;
    p.method = Method::fastc2v;
    const double fc = output_upper_bound(net, X, 0, p);
    CHECK(fc == doctest::Approx(23.0 / 6).epsilon(1e-12));
    CHECK(fc < beta);

    p.method = Method::deeppoly;
    const double dp = output_upper_bound(net, X, 0, p);
    CHECK(dp == doctest::Approx(4.0).epsilon(1e-12));
    CHECK_FALSE(dp < beta);

    p.method = Method::interval;
    CHECK(output_upper_bound(net, X, 0, p) == doctest::Approx(4.5));

    for (Method m : {Method::lp, Method::optc2v}) {
        p.method = m;
        const double v = output_upper_bound(net, X, 0, p);
        CHECK(v >= 3.0 - 1e-9);
        CHECK(v <= 4.0 + 1e-9);
    }
}

TEST_CASE("zero radius is verified by every method") {
    const std::vector<int> layers{4, 8, 8, 3};
    const Network net = generate_random_network(layers, 11, 1.0);
    const auto recs = random_records(net, 10, 0.0, 3);
    for (Method m : {Method::interval, Method::fastlin, Method::deeppoly, Method::fastc2v, Method::lp, Method::optc2v}) {
        VerifyParams p;
        p.method = m;
        const BatchResult b = batch_verify(net, recs, p);
        CHECK(b.summary.verified == 10);
    }
}

TEST_CASE("misclassified centers are skipped and attacked immediately") {
    const std::vector<int> layers{3, 6, 2};
    const Network net = generate_random_network(layers, 5, 1.0);
    RobustnessInstance inst{{0.2, 0.4, 0.6}, 0.05, 0};
    inst.label = 1 - classify(net, inst.x_hat);
    const VerificationReport r = verify(net, inst, {});
    CHECK(r.verdict == Verdict::skipped);
    CHECK(r.predicted == 1 - inst.label);

    AttackParams ap;
    ap.steps = 0;
    ap.restarts = 1;
    const auto w = attack_upper_bound(net, inst, ap, 0);
    REQUIRE(w);
    CHECK(*w == inst.x_hat);
}

TEST_CASE("attack on a linear network finds the box maximizer") {
    std::mt19937_64 rng(17);
    int found = 0, none = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<int> layers{3, 2};
        const Network net = generate_random_network(layers, rng(), 1.0);
        std::uniform_real_distribution<double> u(0.1, 0.9);
        RobustnessInstance inst{{u(rng), u(rng), u(rng)}, 0.05, 0};
        inst.label = classify(net, inst.x_hat);
        const BoxDomain X = build_input_box(inst);
        const LinearExpr mg = margin_objective(net, 1 - inst.label, inst.label);
        const BoxMax bm = box_maximize(std::span<const double>(mg.coeffs.data(), 3), mg.constant, X);
        const auto w = attack_upper_bound(net, inst, {}, 1);
        if (bm.value > 1e-12) {
            REQUIRE(w);
            CHECK(max_margin(net, *w, inst.label) > 0.0);
            ++found;
        } else if (bm.value < -1e-12) {
            CHECK_FALSE(w);
            ++none;
        }
    }
    CHECK(found > 0);
    CHECK(none > 0);
}

TEST_CASE("falsified verdicts carry valid witnesses") {
    const std::vector<int> layers{4, 10, 2};
    const Network net = generate_random_network(layers, 21, 1.0);
    const auto recs = random_records(net, 30, 0.2, 8);
    VerifyParams p;
    p.method = Method::deeppoly;
    const BatchResult b = batch_verify(net, recs, p);
    CHECK(b.summary.falsified > 0);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = b.reports[i];
        CHECK_FALSE(r.verdict == Verdict::error);
        if (r.verdict != Verdict::falsified) continue;
        const BoxDomain X = build_input_box(*recs[i].instance);
        CHECK(X.contains(r.witness));
        CHECK(classify(net, r.witness) != r.label);
        CHECK(r.witness_class == classify(net, r.witness));
        CHECK(std::any_of(r.margins.begin(), r.margins.end(), [](const MarginBound& mb) { return mb.bound >= 0.0; }));
    }
}

TEST_CASE("verified instances resist the attack") {
    const std::vector<int> layers{5, 12, 12, 3};
    const Network net = generate_random_network(layers, 2, 1.0);
    const auto recs = random_records(net, 30, 0.05, 4);
    VerifyParams p;
    p.method = Method::fastc2v;
    const BatchResult b = batch_verify(net, recs, p);
    CHECK(b.summary.verified > 0);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (b.reports[i].verdict != Verdict::verified) continue;
        for (const auto& mb : b.reports[i].margins) CHECK(mb.bound < 0.0);
        CHECK_FALSE(attack_upper_bound(net, *recs[i].instance, {}, 99));
    }
}

TEST_CASE("batch counts follow method dominance") {
    const std::vector<int> layers{6, 16, 16, 3};
    const Network net = generate_random_network(layers, 3, 1.0);
    const auto recs = random_records(net, 25, 0.04, 12);
    auto count = [&](Method m) {
        VerifyParams p;
        p.method = m;
        p.attack = false;
        return batch_verify(net, recs, p).summary.verified;
    };
    const int iv = count(Method::interval), dp = count(Method::deeppoly), lp = count(Method::lp),
              opt = count(Method::optc2v);
    CHECK(iv <= dp);
    CHECK(lp <= opt);
}

TEST_CASE("reports are deterministic and thread independent") {
    const std::vector<int> layers{4, 10, 10, 3};
    const Network net = generate_random_network(layers, 9, 1.0);
    auto recs = random_records(net, 16, 0.08, 2);
    recs.insert(recs.begin() + 3, InstanceRecord{99, std::nullopt, "line 99: broken"});
    VerifyParams p;
    p.method = Method::fastc2v;
    p.deterministic = true;
    p.seed = 42;
    const std::string one = dump(batch_verify(net, recs, p, 1), p);
    CHECK(one == dump(batch_verify(net, recs, p, 1), p));
    CHECK(one == dump(batch_verify(net, recs, p, 4), p));
    CHECK(one.find("seconds") == std::string::npos);
    CHECK(one.find("\"verdict\":\"error\"") != std::string::npos);

    const BatchResult b = batch_verify(net, recs, p);
    CHECK(b.summary.total == 17);
    CHECK(b.summary.errors == 1);
    CHECK(b.summary.verified + b.summary.falsified + b.summary.unknown + b.summary.skipped == 16);
}

TEST_CASE("empty batch") {
    const BatchResult b = batch_verify(worked_example(), {}, {});
    CHECK(b.summary.total == 0);
    std::ostringstream out;
    write_reports(out, b, {});
    CHECK(out.str().rfind("{\"summary\":{\"total\":0,", 0) == 0);
}

TEST_CASE("instance errors are per instance") {
    const std::vector<int> layers{2, 4, 2};
    const Network net = generate_random_network(layers, 1, 1.0);
    std::vector<InstanceRecord> recs{{1, RobustnessInstance{{0.5, 0.5, 0.5}, 0.1, 0}, {}},
                                     {2, RobustnessInstance{{0.5, 0.5}, 0.1, 7}, {}},
                                     {3, RobustnessInstance{{0.5, 0.5}, 0.0, 0}, {}}};
    recs[2].instance->label = classify(net, recs[2].instance->x_hat);
    const BatchResult b = batch_verify(net, recs, {});
    CHECK(b.reports[0].verdict == Verdict::error);
    CHECK(b.reports[1].verdict == Verdict::error);
    CHECK(b.reports[2].verdict == Verdict::verified);
}

TEST_CASE("LP dump writes one file per margin") {
    const auto dir = std::filesystem::temp_directory_path() / "c2v_dump_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::vector<int> layers{3, 5, 3};
    const Network net = generate_random_network(layers, 4, 1.0);
    RobustnessInstance inst{{0.3, 0.6, 0.9}, 0.05, 0};
    inst.label = classify(net, inst.x_hat);
    VerifyParams p;
    p.method = Method::optc2v;
    p.dump_lp_dir = dir;
    verify(net, inst, p, 7);
    int files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        CHECK(e.path().extension() == ".lp");
        ++files;
    }
    CHECK(files == 2);
    std::filesystem::remove_all(dir);
}
