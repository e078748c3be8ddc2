#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

#include "coda/config.hpp"
#include "coda/evalharness.hpp"
#include "coda/theorem_bound.hpp"

namespace py = pybind11;
using namespace coda;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Tensor({rows, cols}, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

MatrixNorm norm_from(const std::string& name) {
  if (name == "elementwise_l1") return MatrixNorm::kElementwiseL1;
  if (name == "frobenius") return MatrixNorm::kFrobenius;
  if (name == "induced_1") return MatrixNorm::kInduced1;
  throw std::invalid_argument("unknown norm '" + name +
                              "' (expected elementwise_l1, frobenius or induced_1)");
}

FiniteJointDistribution distribution(const Array& points, const std::vector<double>& masses) {
  return FiniteJointDistribution(to_tensor(points), masses);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Correlation-guided simulation of future domains under concept drift.";

  // library errors map onto the closest Python exceptions
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "moons_domain",
      [](std::size_t n, int index, double noise, std::uint64_t seed) {
        const DomainDataset d = make_moons_domain(n, index, noise, seed);
        Array y(static_cast<py::ssize_t>(d.rows()));
        std::copy(d.labels().begin(), d.labels().end(), y.mutable_data());
        return py::make_tuple(to_array(d.features()), y);
      },
      py::arg("n") = 200, py::arg("index") = 0, py::arg("noise") = 0.1, py::arg("seed") = 0,
      "One rotated 2-Moons domain as (X, y).");

  m.def(
      "pearson_matrix", [](const Array& rows) { return to_array(pearson_matrix(to_tensor(rows)).values()); },
      py::arg("rows"), "Sample Pearson matrix over the columns of a 2-d array.");

  m.def(
      "matrix_distance",
      [](const Array& a, const Array& b, const std::string& norm) {
        return matrix_distance(to_tensor(a), to_tensor(b), norm_from(norm));
      },
      py::arg("a"), py::arg("b"), py::arg("norm") = "elementwise_l1");

  m.def(
      "tv_distance",
      [](const Array& p_points, const std::vector<double>& p_masses, const Array& q_points,
         const std::vector<double>& q_masses, bool enumerate) {
        const auto p = distribution(p_points, p_masses);
        const auto q = distribution(q_points, q_masses);
        return enumerate ? tv_dual_enumeration(p, q) : tv_exact(p, q);
      },
      py::arg("p_points"), py::arg("p_masses"), py::arg("q_points"), py::arg("q_masses"),
      py::arg("enumerate") = false,
      "Total variation distance; enumerate=True uses the sup over all events.");

  m.def(
      "verify_bound",
      [](const Array& p_points, const std::vector<double>& p_masses, const Array& q_points,
         const std::vector<double>& q_masses) {
        const auto p = distribution(p_points, p_masses);
        const auto q = distribution(q_points, q_masses);
        Json j = to_json(verify_bound(p, q));
        j["lemma2_ok"] = lemma2_check(p, q).all_ok();
        return j.dump();
      },
      py::arg("p_points"), py::arg("p_masses"), py::arg("q_points"), py::arg("q_masses"),
      "Bound report as a JSON string.");

  m.def(
      "run_json",
      [](const std::string& config_json, std::size_t threads) {
        const RunConfig config = run_config_from_json(Json::parse(config_json));
        py::gil_scoped_release release;
        const NormalizedStream data = load_dataset(config.dataset);
        Json reports = Json::array();
        for (Method method : config.methods) {
          reports.push_back(to_json(
              run_experiment(data.stream, method, config.experiment, &data.stats, nullptr, threads)));
        }
        return reports.dump();
      },
      py::arg("config_json"), py::arg("threads") = 1,
      "Runs every configured method; returns a JSON array of reports.");
}
