// Python bindings: metrics, frames, invariants, Bergman kernels and
// scenario runs. Matrices cross the boundary as numpy arrays.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "isojet/bergman.hpp"
#include "isojet/builtin_metrics.hpp"
#include "isojet/error.hpp"
#include "isojet/flip_family.hpp"
#include "isojet/geodesic.hpp"
#include "isojet/invariants.hpp"
#include "isojet/isometry.hpp"
#include "isojet/scenario.hpp"

namespace py = pybind11;
using namespace isojet;

namespace {

// pybind11 holders cannot point to const
using PyMetric = std::shared_ptr<ChartMetric>;

PyMetric metric(const std::string& id, const std::map<std::string, std::vector<double>>& params) {
    MetricSpec spec;
    spec.id = id;
    spec.params = params;
    return std::const_pointer_cast<ChartMetric>(make_builtin_metric(spec));
}

// {(alpha...): matrix} for the S-jet of a frame
py::dict s_jet(const PyMetric& g, const Vec& point, const Mat& basis, int degree) {
    const JetMatrix s = s_invariant_matrix(*g, Frame{point, basis}, degree);
    const JetLayout& layout = s(0, 0).layout();
    py::dict out;
    for (std::size_t k = 0; k < layout.size(); ++k) {
        Mat c(s.rows(), s.cols());
        for (int i = 0; i < s.rows(); ++i) {
            for (int j = 0; j < s.cols(); ++j) c(i, j) = s(i, j).coeff(k);
        }
        out[py::tuple(py::cast(layout.index(k).exponents()))] = c;
    }
    return out;
}

std::vector<Frame> frames(const std::vector<std::pair<Vec, Mat>>& in) {
    std::vector<Frame> out;
    for (const auto& [p, b] : in) out.push_back({p, b});
    return out;
}

}  // namespace

PYBIND11_MODULE(_isojet, m) {
    m.doc() = "Isometry detection by jet invariants";

    // translators run newest first, so the base class goes first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    py::class_<ChartMetric, PyMetric>(m, "Metric")
        .def_property_readonly("dim", &ChartMetric::dim)
        .def_property_readonly("name", &ChartMetric::name)
        .def("value", &ChartMetric::value, py::arg("x"))
        .def("contains", &ChartMetric::contains, py::arg("x"));

    m.def("metric", &metric, py::arg("id"), py::arg("params") = std::map<std::string, std::vector<double>>{},
          "Built-in metric by id: euclidean, conformal_scalar, poincare_disc, sphere_patch.");
    m.def("metric_ids", &builtin_metric_ids);

    m.def(
        "orthonormal_frame",
        [](const PyMetric& g, const Vec& p, std::optional<Mat> seed) {
            const Frame f = orthonormal_frame(*g, p, seed.value_or(Mat::Identity(g->dim(), g->dim())));
            return std::make_pair(f.point, f.basis);
        },
        py::arg("metric"), py::arg("point"), py::arg("seed") = py::none(), "(point, basis) with basis g-orthonormal.");

    m.def("exp_map", [](const PyMetric& g, const Vec& p, const Vec& v) { return exp_map(*g, p, v); }, py::arg("metric"),
          py::arg("point"), py::arg("v"));
    m.def("log_map", [](const PyMetric& g, const Vec& p, const Vec& q) { return log_map(*g, p, q); }, py::arg("metric"),
          py::arg("point"), py::arg("q"));

    m.def("s_invariant", &s_jet, py::arg("metric"), py::arg("point"), py::arg("basis"), py::arg("degree"),
          "Taylor coefficients of the metric in the normal chart of a frame, keyed by multi-index.");

    m.def(
        "check_isometry",
        [](const PyMetric& g, const PyMetric& gh, const std::vector<std::pair<Vec, Mat>>& a,
           const std::vector<std::pair<Vec, Mat>>& b, double delta, int degree, double tol) {
            const BallAtlas aa = make_atlas(*g, frames(a), delta);
            const BallAtlas bb = make_atlas(*gh, frames(b), delta);
            const AtlasVerdict v = check_atlas_isometry(*g, *gh, aa, bb, degree, tol);
            return py::make_tuple(v.match, v.reason);
        },
        py::arg("metric"), py::arg("target"), py::arg("frames"), py::arg("target_frames"), py::arg("delta") = 0.3,
        py::arg("degree") = 3, py::arg("tol") = 1e-6, "(match, reason) for two ball atlases given as (point, basis) lists.");

    m.def(
        "bergman_kernel",
        [](const std::string& id, const std::map<std::string, double>& params, int degree, const Vec& z, const Vec& w) {
            const DomainFamily fam = make_builtin_domain(id, params);
            const DomainSpec dom = fam.at(0.0);
            const KernelApprox ka = kernel_build(dom, degree, dom.quad);
            return ka.kernel(to_complex(z), to_complex(w));
        },
        py::arg("domain"), py::arg("params"), py::arg("degree"), py::arg("z"), py::arg("w"),
        "Polynomial Bergman kernel K_D(z, w); points are given in real coordinates.");

    m.def("flip_profile", &flip_profile, py::arg("t"), py::arg("scale") = 0.1);

    m.def(
        "run_scenarios",
        [](const std::string& yaml, std::optional<std::uint64_t> seed, double tol_scale) {
            RunOptions opt;
            opt.seed = seed;
            opt.tol_scale = tol_scale;
            const auto reports = run_batch(parse_scenarios(yaml, "<string>"), opt);
            std::vector<std::string> out;
            for (const RunReport& r : reports) out.push_back(to_json(r).dump());
            return out;
        },
        py::arg("yaml"), py::arg("seed") = py::none(), py::arg("tol_scale") = 1.0,
        "Runs a YAML scenario document; returns the JSON reports as strings.");
    m.attr("report_schema") = report_schema;
}
