// Python module: thin wrappers over the C++ core.  Fields cross the boundary
// as complex numpy arrays in basis order; chains as float matrices.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nsldp/action.hpp"
#include "nsldp/attractor.hpp"
#include "nsldp/errors.hpp"
#include "nsldp/flow.hpp"
#include "nsldp/measure.hpp"
#include "nsldp/reconstruct.hpp"

namespace py = pybind11;
using namespace nsldp;

namespace {

using ComplexArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;

SpectralField to_field(const BasisPtr& b, const ComplexArray& a) {
  if (a.ndim() != 1 || static_cast<std::size_t>(a.shape(0)) != b->size())
    throw InvalidArgument("expected a 1-d array of " + std::to_string(b->size()) + " complex amplitudes");
  return SpectralField(b, std::vector<Complex>(a.data(), a.data() + a.shape(0)));
}

ComplexArray to_array(const SpectralField& u) {
  ComplexArray out(static_cast<py::ssize_t>(u.size()));
  std::copy(u.amps().begin(), u.amps().end(), out.mutable_data());
  return out;
}

ComplexArray to_matrix(const std::vector<SpectralField>& rows, std::size_t width) {
  ComplexArray out({static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(width)});
  auto* p = out.mutable_data();
  for (const auto& r : rows) p = std::copy(r.amps().begin(), r.amps().end(), p);
  return out;
}

// Flow parameters as seen from Python.
struct Flow {
  FlowConfig cfg;

  Flow(int K, double dt, double epsilon, bool nonlinear, std::optional<ComplexArray> forcing, double amplitude,
       double b0, double decay, std::optional<std::vector<double>> noise, std::uint64_t seed) {
    const auto b = BasisSpec::make(K);
    cfg.dt = dt;
    cfg.epsilon = epsilon;
    cfg.nonlinear = nonlinear;
    cfg.seed = seed;
    cfg.forcing = forcing ? to_field(b, *forcing) : default_forcing(b, amplitude);
    cfg.noise = noise ? NoiseSpec::custom(b, *noise) : NoiseSpec::power_law(b, b0, decay);
    cfg.validate();
  }

  const BasisPtr& basis() const { return cfg.basis(); }
};

py::dict trajectory_dict(const Trajectory& t) {
  py::dict d;
  d["times"] = t.times;
  d["states"] = t.states.empty() ? ComplexArray() : to_matrix(t.states, t.states.front().size());
  return d;
}

std::vector<SpectralField> fields(const BasisPtr& b, const std::vector<ComplexArray>& list) {
  std::vector<SpectralField> out;
  for (const auto& a : list) out.push_back(to_field(b, a));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Galerkin Navier-Stokes with small noise: flows, actions, stationary measures";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalBlowup>(m, "NumericalBlowup", PyExc_ArithmeticError);
  py::register_exception<StoppingTimeout>(m, "StoppingTimeout", PyExc_RuntimeError);

  m.def(
      "modes",
      [](int K) {
        const auto basis = BasisSpec::make(K);
        std::vector<std::pair<int, int>> out;
        for (const auto& k : basis->modes()) out.emplace_back(k.k1, k.k2);
        return out;
      },
      py::arg("K"), "Representative wavevectors of the truncated basis, in amplitude order.");
  m.def(
      "eigenvalues", [](int K) { return BasisSpec::make(K)->eigenvalues(); }, py::arg("K"));

  py::class_<Flow>(m, "Flow")
      .def(py::init<int, double, double, bool, std::optional<ComplexArray>, double, double, double,
                    std::optional<std::vector<double>>, std::uint64_t>(),
           py::arg("K") = 4, py::arg("dt") = 1e-3, py::arg("epsilon") = 0.0, py::arg("nonlinear") = true,
           py::arg("forcing") = py::none(), py::arg("amplitude") = 2.0, py::arg("b0") = 1.0, py::arg("decay") = 3.0,
           py::arg("noise") = py::none(), py::arg("seed") = 0)
      .def_property_readonly("size", [](const Flow& f) { return f.basis()->size(); })
      .def_property_readonly("forcing", [](const Flow& f) { return to_array(f.cfg.forcing); })
      .def_property_readonly("noise", [](const Flow& f) {
        return std::vector<double>(f.cfg.noise.b().begin(), f.cfg.noise.b().end());
      })
      .def_property(
          "epsilon", [](const Flow& f) { return f.cfg.epsilon; }, [](Flow& f, double e) { f.cfg.epsilon = e; })
      .def_property(
          "seed", [](const Flow& f) { return f.cfg.seed; }, [](Flow& f, std::uint64_t s) { f.cfg.seed = s; })
      .def(
          "bilinear",
          [](const Flow& f, const ComplexArray& u, const ComplexArray& v) {
            return to_array(bilinear(to_field(f.basis(), u), to_field(f.basis(), v)));
          },
          py::arg("u"), py::arg("v"))
      .def(
          "inner",
          [](const Flow& f, const ComplexArray& u, const ComplexArray& v) {
            return inner(to_field(f.basis(), u), to_field(f.basis(), v));
          },
          py::arg("u"), py::arg("v"), "H inner product over the full (real) field.")
      .def(
          "norm_h", [](const Flow& f, const ComplexArray& u) { return norm_h(to_field(f.basis(), u)); },
          py::arg("u"))
      .def(
          "integrate",
          [](const Flow& f, const ComplexArray& u0, std::int64_t steps, std::int64_t record_every) {
            const auto u = to_field(f.basis(), u0);
            py::gil_scoped_release release;
            const auto t = f.cfg.epsilon > 0.0 ? integrate_stochastic(u, f.cfg, steps, record_every)
                                               : integrate_deterministic(u, f.cfg, steps, record_every);
            py::gil_scoped_acquire acquire;
            return trajectory_dict(t);
          },
          py::arg("u0"), py::arg("steps"), py::arg("record_every") = 1,
          "Integrate from u0; stochastic when epsilon > 0.  Returns times and states.")
      .def(
          "attractor",
          [](const Flow& f, const std::vector<ComplexArray>& ensemble, double transient, double collect,
             double sample_dt, double cluster_tol) {
            auto det = f.cfg;
            det.epsilon = 0.0;
            const auto set = approximate_omega_set(fields(f.basis(), ensemble), transient, collect, sample_dt,
                                                   cluster_tol, det);
            return to_matrix(set.points, f.basis()->size());
          },
          py::arg("ensemble"), py::arg("transient") = 50.0, py::arg("collect") = 10.0, py::arg("sample_dt") = 0.5,
          py::arg("cluster_tol") = 0.02, "Points of the omega-limit set reached from the ensemble.")
      .def(
          "quasipotential",
          [](const Flow& f, const ComplexArray& target, const std::vector<ComplexArray>& attractor, double eta,
             double horizon, int stages) {
            auto sched = default_schedule(eta, horizon, stages);
            sched.check_horizon_doubling = false;
            const auto r = quasipotential(to_field(f.basis(), target), fields(f.basis(), attractor), sched, f.cfg);
            py::dict d;
            d["value"] = r.value;
            d["converged"] = r.converged;
            d["terminal_gap"] = r.terminal_gap;
            d["control"] = to_matrix(r.control.values, f.basis()->size());
            return d;
          },
          py::arg("target"), py::arg("attractor"), py::arg("eta") = 0.01, py::arg("horizon") = 5.0,
          py::arg("stages") = 4, "Minimum action from the attractor points to the eta-ball of target.")
      .def(
          "decay",
          [](const Flow& f, const std::vector<ComplexArray>& attractor, double eta, const std::vector<double>& eps,
             double horizon, double burn_in, std::int64_t stride) {
            AttractorSet set;
            set.points = fields(f.basis(), attractor);
            SamplingSettings s;
            s.horizon = horizon;
            s.burn_in = burn_in;
            s.stride = stride;
            s.start = set.points.front();
            const auto fit = attracting_decay(set, eta, eps, f.cfg, s);
            py::dict d;
            d["slope"] = fit.slope;
            d["ci"] = std::make_pair(fit.slope_ci_lo, fit.slope_ci_hi);
            std::vector<double> p;
            for (const auto& e : fit.estimates) p.push_back(e.p);
            d["p"] = p;
            return d;
          },
          py::arg("attractor"), py::arg("eta"), py::arg("eps"), py::arg("horizon") = 2000.0,
          py::arg("burn_in") = 50.0, py::arg("stride") = 50,
          "Fit of eps ln mu(dist > eta) against 1/eps over the noise levels.");

  m.def(
      "chain_stationary",
      [](const Eigen::MatrixXd& P) { return chain_stationary(FiniteChain::make(P, std::vector<int>(P.rows(), 0))); },
      py::arg("P"));
  m.def(
      "sandwich",
      [](const Eigen::MatrixXd& P, const std::vector<int>& tau, int delta, const Eigen::VectorXd& indicator) {
        const auto c = FiniteChain::make(P, tau);
        const auto r = sandwich_check(c, chain_stationary(c), delta, indicator, indicator);
        py::dict d;
        d["mu"] = r.mu_closure;
        d["lambda"] = r.lambda_closure;
        d["passed"] = r.passed();
        return d;
      },
      py::arg("P"), py::arg("tau"), py::arg("delta"), py::arg("indicator"),
      "Stationary mass of a set and its stopping-time window reconstruction.");
}
