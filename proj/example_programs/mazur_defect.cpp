// Sampled defect of the Mazur coupling l_p^8 <-> l_q^8 next to the closed-form
// upper and lower bounds.

#include "gapkit/gapkit.hpp"

#include <iostream>

int main() {
  using namespace gapkit;
  for (auto [p, q] : {std::pair{1.5, 2.0}, {2.0, 4.0}, {1.25, 3.0}}) {
    const Coupling c = mazur_coupling(8, p, q);
    const DefectEstimate e = delta_estimate(c, 4, 512, 1);
    std::cout << "p=" << p << " q=" << q << "  sampled " << format_real(e.value) << "  upper "
              << format_real(interp::kadets_upper_lp(p, q)) << "  lower "
              << format_real(interp::kadets_lower_lp(Exponent(p), Exponent(q)).value) << '\n';
  }
}
