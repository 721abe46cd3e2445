#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "c2v/lp_relax.hpp"
#include "c2v/verify.hpp"

namespace py = pybind11;
using namespace c2v;

namespace {

Method method_from(const std::string& name) {
    const auto m = parse_method(name);
    if (!m) throw py::value_error("unknown method '" + name + "'");
    return *m;
}

VerifyParams make_params(const std::string& method, int iterations, int cut_rounds, bool attack, std::uint64_t seed) {
    VerifyParams p;
    p.method = method_from(method);
    p.iterations = iterations;
    p.cut_rounds = cut_rounds;
    p.attack = attack;
    p.seed = seed;
    validate(p);
    return p;
}

py::dict report_dict(const VerificationReport& r) {
    py::dict d;
    d["verdict"] = to_string(r.verdict);
    d["label"] = r.label;
    d["predicted"] = r.predicted;
    py::list margins;
    for (const auto& m : r.margins) margins.append(py::make_tuple(m.cls, m.bound));
    d["margins"] = margins;
    if (r.verdict == Verdict::falsified) {
        d["witness"] = r.witness;
        d["witness_class"] = r.witness_class;
    }
    d["seconds"] = r.total_seconds;
    return d;
}

py::list ranges(const std::vector<ScalarBounds>& b) {
    py::list out;
    for (const auto& s : b) out.append(py::make_tuple(s.lower, s.upper));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "ReLU network verification core";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<InvariantError>(m, "InvariantError", PyExc_ValueError);

    py::class_<BoxDomain>(m, "BoxDomain")
        .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("lower"), py::arg("upper"))
        .def_property_readonly("lower", py::overload_cast<>(&BoxDomain::lower, py::const_))
        .def_property_readonly("upper", py::overload_cast<>(&BoxDomain::upper, py::const_))
        .def("__len__", &BoxDomain::size);

    py::class_<Network>(m, "Network")
        .def_property_readonly("input_dim", &Network::input_dim)
        .def_property_readonly("size", &Network::size)
        .def_property_readonly("num_outputs", &Network::num_outputs)
        .def_property_readonly("num_relu", &Network::num_relu)
        .def_property_readonly("outputs", &Network::outputs)
        .def("__eq__", [](const Network& a, const Network& b) { return a == b; });

    m.def("load_network", &load_network, py::arg("path"));
    m.def("parse_network", &parse_network, py::arg("text"));
    m.def("format_network", &format_network, py::arg("net"));
    m.def("save_network", &save_network, py::arg("net"), py::arg("path"));
    m.def(
        "generate_random_network",
        [](const std::vector<int>& layers, std::uint64_t seed, double scale) {
            return generate_random_network(layers, seed, scale);
        },
        py::arg("layers"), py::arg("seed"), py::arg("weight_scale") = 1.0);
    m.def(
        "eval_network",
        [](const Network& net, const std::vector<double>& x) {
            const Evaluation e = eval_network(net, x);
            return py::make_tuple(e.post_activations, e.outputs);
        },
        py::arg("net"), py::arg("x"), "Returns (post_activations, outputs).");
    m.def(
        "classify", [](const Network& net, const std::vector<double>& x) { return classify(net, x); }, py::arg("net"),
        py::arg("x"));
    m.def(
        "interval_bounds", [](const Network& net, const BoxDomain& X) { return ranges(interval_bounds(net, X)); },
        py::arg("net"), py::arg("box"));

    py::class_<HullCut>(m, "HullCut")
        .def_readonly("I", &HullCut::I)
        .def_readonly("h", &HullCut::h)
        .def_readonly("coeffs", &HullCut::coeffs)
        .def_readonly("constant", &HullCut::constant)
        .def("evaluate", [](const HullCut& c, const std::vector<double>& x) { return c.evaluate(x); });

    py::class_<HullInstance>(m, "HullInstance")
        .def(py::init<std::vector<double>, double, BoxDomain>(), py::arg("weights"), py::arg("bias"), py::arg("box"))
        .def_property_readonly("dim", &HullInstance::dim)
        .def_property_readonly("support", &HullInstance::support)
        .def("phase", [](const HullInstance& h) { return to_string(classify_phase(h)); })
        .def("ell", [](const HullInstance& h, const std::vector<int>& I) { return ell(h, I); }, py::arg("I"))
        .def("enumerate_J", [](const HullInstance& h, int cap) { return enumerate_J(h, cap); }, py::arg("max_support") = 20)
        .def("cut", &cut_from_pair, py::arg("I"), py::arg("h"))
        .def(
            "envelope",
            [](const HullInstance& h, const std::vector<double>& x) -> std::optional<double> {
                const auto t = tightest_cut_sort(h, x);
                return t ? std::optional<double>(t->value) : std::nullopt;
            },
            py::arg("x"))
        .def(
            "separate",
            [](const HullInstance& h, const std::vector<double>& x, double y) -> py::object {
                const auto s = separate_sort(h, x, y);
                if (!s) return py::none();
                return py::make_tuple(s->cut, s->violation);
            },
            py::arg("x"), py::arg("y"), "Most violated cut and its violation, or None.")
        .def(
            "lifted_envelope", [](const HullInstance& h, const std::vector<double>& x) { return lifted_f_tilde(h, x); },
            py::arg("x"));

    m.def(
        "output_upper_bound",
        [](const Network& net, const BoxDomain& X, int output, const std::string& method, int iterations,
           int cut_rounds) {
            return output_upper_bound(net, X, output, make_params(method, iterations, cut_rounds, false, 0));
        },
        py::arg("net"), py::arg("box"), py::arg("output") = 0, py::arg("method") = "deeppoly", py::arg("iterations") = 1,
        py::arg("cut_rounds") = 3);
    m.def(
        "exact_max",
        [](const Network& net, const BoxDomain& X, int output, double sign) {
            LinearExpr e;
            e.coeffs.assign(static_cast<std::size_t>(net.size()), 0.0);
            e.coeffs.at(static_cast<std::size_t>(net.outputs().at(static_cast<std::size_t>(output)))) = sign;
            return exact_max_oracle(net, X, e);
        },
        py::arg("net"), py::arg("box"), py::arg("output") = 0, py::arg("sign") = 1.0);
    m.def(
        "verify",
        [](const Network& net, const std::vector<double>& x_hat, double epsilon, int label, const std::string& method,
           int iterations, int cut_rounds, bool attack, std::uint64_t seed) {
            const VerifyParams p = make_params(method, iterations, cut_rounds, attack, seed);
            VerificationReport r;
            {
                py::gil_scoped_release release;
                r = verify(net, {x_hat, epsilon, label}, p);
            }
            return report_dict(r);
        },
        py::arg("net"), py::arg("x_hat"), py::arg("epsilon"), py::arg("label"), py::arg("method") = "deeppoly",
        py::arg("iterations") = 1, py::arg("cut_rounds") = 3, py::arg("attack") = true, py::arg("seed") = 0);
    m.def("methods", [] {
        std::vector<std::string> out;
        for (Method x : {Method::interval, Method::fastlin, Method::deeppoly, Method::fastc2v, Method::lp, Method::optc2v}) {
            out.emplace_back(to_string(x));
        }
        return out;
    });
}
