#include "gapkit/descriptor_io.hpp"
#include "gapkit/interp.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gapkit;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("gapkit_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path write(const std::string& name, const std::string& text) {
    const std::filesystem::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  std::filesystem::path dir_;
};

using SpaceText = TempDir;
using BasisCsv = TempDir;
using CouplingText = TempDir;
using GaugeFile = TempDir;

}  // namespace

TEST_F(SpaceText, LpForms) {
  const Space a = io::parse_space("lp:4:2");
  EXPECT_TRUE(same_space(a, Space::lp(4, Exponent(2.0))));
  const Space b = io::parse_space(" lp:3 : inf ");
  EXPECT_TRUE(same_space(b, Space::lp(3, Exponent::infinity())));
  EXPECT_EQ(io::format_space(b), "lp:3:inf");
  EXPECT_EQ(io::format_space(io::parse_space("lp:5:1.5")), "lp:5:1.5");
}

TEST_F(SpaceText, NestedFormsRoundTrip) {
  for (const char* text : {"dual(lp:3:1.5)", "block:2[lp:3:2,lp:4:2]", "block:inf[lp:1:1,dual(lp:2:3)]",
                           "wlp:3[1,2,0.5]", "qlr:4:0.5", "block:1[block:2[lp:1:2,lp:1:2],lp:2:1]"}) {
    const Space s = io::parse_space(text);
    EXPECT_EQ(io::format_space(s), text);
    EXPECT_TRUE(same_space(io::parse_space(io::format_space(s)), s)) << text;
  }
}

TEST_F(SpaceText, QuotientReadsKernelFile) {
  write("K.csv", "b1\n1\n1\n0\n0\n0\n0\n");
  const Space q = io::parse_space("quot(lp:6:1; K.csv)", dir_);
  EXPECT_EQ(q.kind(), SpaceKind::quotient);
  EXPECT_EQ(q.dim(), 5);
  EXPECT_EQ(io::format_space(q), "quot(lp:6:1;K.csv)");
  EXPECT_TRUE(same_space(io::parse_space(io::format_space(q), dir_), q));
}

TEST_F(SpaceText, Errors) {
  for (const char* bad : {"", "lp", "lp:0:2", "lp:3:0.5", "lp:3:2x", "lp:3:2 junk", "block:2[]",
                          "block:2[lp:1:2", "dual(lp:2:2", "euclid:3", "wlp:2[1,-1]"}) {
    EXPECT_THROW(io::parse_space(bad), InputError) << bad;
  }
  try {
    io::parse_space("quot(lp:3:2;missing.csv)", dir_);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.csv"), std::string::npos);
  }
}

TEST_F(BasisCsv, RoundTripIsExact) {
  Rng rng(3);
  Matrix m(5, 2);
  for (Eigen::Index j = 0; j < 2; ++j) m.col(j) = gaussian_vector(rng, 5);
  m(0, 0) = 1.0 / 3.0;
  io::write_basis_csv(dir_ / "B.csv", m);
  EXPECT_EQ(io::read_basis_csv(dir_ / "B.csv"), m);
  std::ifstream in(dir_ / "B.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "b1,b2");
}

TEST_F(BasisCsv, CommentsAndWhitespace) {
  write("c.csv", "# plane\nb1, b2\n1, 0\n0 ,1\n\n0,0\n");
  const Subspace s = io::load_subspace(Space::lp(3, Exponent(2.0)), "c.csv", dir_);
  EXPECT_EQ(s.dim(), 2);
  EXPECT_EQ(s.source(), "c.csv");
}

TEST_F(BasisCsv, ErrorsNameTheFile) {
  const Space s = Space::lp(3, Exponent(2.0));
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"rank.csv", "b1,b2\n1,2\n2,4\n3,6\n"},
      {"header.csv", "x,y\n1,0\n0,1\n0,0\n"},
      {"ragged.csv", "b1,b2\n1,0\n0\n0,0\n"},
      {"nan.csv", "b1\nnan\n1\n0\n"},
      {"word.csv", "b1\none\n1\n0\n"},
      {"rows.csv", "b1\n1\n0\n"},
      {"empty.csv", ""}};
  for (const auto& [name, text] : cases) {
    write(name, text);
    try {
      io::load_subspace(s, name, dir_);
      FAIL() << name;
    } catch (const InputError& e) {
      EXPECT_NE(std::string(e.what()).find(name), std::string::npos) << e.what();
    }
  }
}

TEST_F(CouplingText, Forms) {
  const Space X = Space::lp(3, Exponent(2.0));
  io::CouplingContext ctx{X, 0, {}};
  EXPECT_TRUE(std::holds_alternative<recipe::Identity>(io::parse_coupling("identity", ctx).phi.v));
  EXPECT_TRUE(std::holds_alternative<recipe::Zero>(io::parse_coupling("zero", ctx).phi.v));
  EXPECT_EQ(std::get<recipe::Scale>(io::parse_coupling("scale:0.9", ctx).phi.v).c, 0.9);
  const Coupling m = io::parse_coupling("mazur:1.5:3", {std::nullopt, 5, {}});
  EXPECT_EQ(m.domain.dim(), 5);
  EXPECT_EQ(std::get<recipe::Mazur>(m.phi.v).p_from, 1.5);
  EXPECT_EQ(std::get<recipe::Mazur>(m.psi.v).p_from, 3.0);
}

TEST_F(CouplingText, QuotientLift) {
  write("E.csv", "b1,b2\n1,0\n0,1\n0,0\n0,0\n0,0\n0,0\n");
  write("F.csv", "b1,b2\n1,0\n0,1\n0.1,0\n0,0\n0,0.1\n0,0\n");
  const Coupling c = io::parse_coupling("quotlift(lp:6:1;E.csv;F.csv;1.01)", {std::nullopt, 0, dir_});
  EXPECT_EQ(c.domain.kind(), SpaceKind::quotient);
  EXPECT_EQ(c.domain.dim(), 4);
  EXPECT_EQ(std::get<recipe::QuotientLift>(c.phi.v).theta, 1.01);
}

TEST_F(CouplingText, Errors) {
  EXPECT_THROW(io::parse_coupling("identity", {}), InputError);
  EXPECT_THROW(io::parse_coupling("mazur:1.5", {std::nullopt, 3, {}}), InputError);
  EXPECT_THROW(io::parse_coupling("mazur:1.5:2", {}), InputError);
  EXPECT_THROW(io::parse_coupling("scale:2", {Space::lp(2, Exponent(2.0)), 0, {}}), InputError);
  EXPECT_THROW(io::parse_coupling("shear:1", {Space::lp(2, Exponent(2.0)), 0, {}}), InputError);
  EXPECT_THROW(io::parse_coupling("quotlift(lp:6:1;E.csv)", {}), InputError);
}

TEST(WitnessCsv, RoundTripReproducesTheDefect) {
  const Coupling c = mazur_coupling(4, 1.5, 3.0);
  const DefectEstimate e = delta_estimate(c, 4, 64, 5);
  std::stringstream ss;
  io::write_witness_csv(ss, e);
  EXPECT_EQ(ss.str().rfind(io::kCsvVersion, 0), 0u);
  const Family f = io::read_witness_csv(ss);
  ASSERT_EQ(f.size(), e.witness.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(f.vectors[i], e.witness.vectors[i]);
    EXPECT_EQ(f.sides[i], e.witness.sides[i]);
  }
  EXPECT_EQ(family_defect(c, f), e.value);
}

TEST_F(GaugeFile, RoundTripPreservesValues) {
  const Coupling c = mazur_coupling(3, 1.5, 2.0);
  const double sigma = interp::kadets_upper_lp(1.5, 2.0);
  Rng rng(4);
  Matrix tx(3, 2), ty(3, 1);
  tx << 1, 0, 0, 1, 0, 1;
  ty << 1, 2, 3;
  const ZNorm z = build_znorm(c, sigma, 60, 6, tx, ty);
  {
    std::ofstream out(dir_ / "g.csv");
    io::write_gauge(out, z, "mazur:1.5:2");
  }
  const ZNorm back = io::read_gauge(dir_ / "g.csv");
  EXPECT_EQ(back.sigma, sigma);
  EXPECT_EQ(back.tests_x, z.tests_x);
  EXPECT_EQ(back.tests_y, z.tests_y);
  EXPECT_EQ(gapkit::detail::gauge_node(back).atoms_x, gapkit::detail::gauge_node(z).atoms_x);
  EXPECT_EQ(gapkit::detail::gauge_node(back).atoms_y, gapkit::detail::gauge_node(z).atoms_y);
  for (int i = 0; i < 5; ++i) {
    const Vector u = gaussian_vector(rng, 3), v = gaussian_vector(rng, 3);
    EXPECT_EQ(znorm_eval(back, u, v).value, znorm_eval(z, u, v).value);
  }
}

TEST_F(GaugeFile, RejectsForeignFiles) {
  write("x.csv", "b1\n1\n");
  EXPECT_THROW(io::read_gauge(dir_ / "x.csv"), InputError);
  EXPECT_THROW(io::read_gauge(dir_ / "none.csv"), InputError);
  write("short.csv", std::string(io::kGaugeVersion) +
                         "\n# coupling=mazur:1.5:2\n# domain=lp:2:1.5\n# dims=2,2\n# sigma=0.6\nrole,x1,x2,y1\n");
  EXPECT_THROW(io::read_gauge(dir_ / "short.csv"), InputError);
}
