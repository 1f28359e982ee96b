// Quick tour: simulate one path, estimate the q.s.d. two ways, compare with
// the mass-chain oracle.

#include <cstdio>

#include "qsdsim/qsdsim.hpp"

int main() {
  using namespace qsdsim;
  const RateModel model{UniformRates{2.0, 1.0, 0.3}};
  RandomStream rng(2024);

  auto path = simulate_gillespie(model, Configuration::parse("2@0.2;1@0.8"), 5.0, rng);
  std::printf("path: %zu events, final %s, extinct at %s\n", path.events.size(),
              path.final_state.serialize().c_str(), path.extinction_time.to_string().c_str());

  auto oracle = principal_left_eigenpair(build_mass_chain(model, 60), 1e-10, 1000000);
  auto fv = fleming_viot_estimate(model, 1000, 10.0, 60.0, rng);
  auto yaglom = yaglom_estimate(model, Configuration::singleton(TraitPoint(0.5)), 5.0, 200000, rng);

  std::printf("oracle theta %.6f\n", oracle.theta);
  std::printf("fleming-viot: TV to oracle %.4f, theta from singletons %.4f\n",
              tv_distance(fv.mass_marginal, oracle.nu), decay_rate_from_singletons(model, fv));
  std::printf("yaglom (%zu survivors): TV to oracle %.4f\n", yaglom.diagnostics.survivors,
              tv_distance(yaglom.mass_marginal, oracle.nu));
  std::printf("k   oracle    fv        yaglom\n");
  for (std::size_t k = 0; k < 6; ++k) {
    auto at = [k](const std::vector<double>& v) { return k < v.size() ? v[k] : 0.0; };
    std::printf("%-3zu %.5f   %.5f   %.5f\n", k + 1, oracle.nu[k], at(fv.mass_marginal),
                at(yaglom.mass_marginal));
  }
}
