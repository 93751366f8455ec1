// Twisted sum of l_1.5^3 and l_2^3 along the Mazur coupling: the blocks keep
// their norms and graph points (x, Phi x) have norm at most sigma.

#include "gapkit/gapkit.hpp"

#include <iostream>

int main() {
  using namespace gapkit;
  const Coupling c = mazur_coupling(3, 1.5, 2.0);
  const double sigma = interp::kadets_upper_lp(1.5, 2.0);
  const ZNorm z = build_znorm(c, sigma, 1000, 7);
  const Vector x{{0.6, -0.3, 0.2}};
  const Vector zero = Vector::Zero(3);
  std::cout << "sigma              " << format_real(sigma) << '\n'
            << "|(x, 0)|_Z         " << format_real(znorm_eval(z, x, zero).value) << '\n'
            << "|x|_X              " << format_real(norm_eval(c.domain, x)) << '\n'
            << "|(x, Phi x)|_Z/|x| " << format_real(znorm_eval(z, x, apply_phi(c, x)).value / norm_eval(c.domain, x))
            << '\n';
}
