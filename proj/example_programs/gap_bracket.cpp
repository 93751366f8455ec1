// Gap between two planes of l_1^4 and of l_2^4, and the dual-gap comparison.

#include "gapkit/gapkit.hpp"

#include <iostream>

int main() {
  using namespace gapkit;
  Matrix a(4, 2), b(4, 2);
  a << 1, 0, 0, 1, 0, 0, 0, 0;
  b << 1, 0, 0, 1, 0.2, 0, 0, 0.1;
  for (double p : {1.0, 2.0}) {
    const Space s = Space::lp(4, Exponent(p));
    const Subspace E(s, a), F(s, b);
    const GapBracket g = gap(s, E, F, 0.01, 8);
    const DualGapReport d = dual_gap_check(s, E, F, 0.01, 8);
    std::cout << "l_" << p << "^4: gap in [" << format_real(g.lower) << ", " << format_real(g.upper)
              << "], annihilator gap >= " << format_real(d.lhs_lower) << '\n';
  }
}
