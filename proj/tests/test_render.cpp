#include <cmath>

#include "baker/render.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace baker;
using testing::reference;

namespace {

GridSpec small_grid(int n) {
  const Pipeline& pl = reference();
  GridSpec g;
  // a window straddling the spine, a few U-widths across
  const double r = 3 * pl.bounds.r1;
  g.center = spine_point(*pl.chain, r);
  g.width = g.height = 4 * r * pl.params.theta3;
  g.nx = g.ny = n;
  g.limits = default_limits(pl.bounds);
  g.limits.k_max = 12;
  return g;
}

}  // namespace

TEST_SUITE("render") {
  TEST_CASE("PNM encoding") {
    Image img;
    img.nx = 2;
    img.ny = 1;
    img.rgb = {1, 2, 3, 250, 251, 252};
    img.classes.resize(2);
    const std::string s = encode_pnm(img);
    CHECK(s == std::string("P6\n2 1\n255\n") + std::string("\x01\x02\x03\xfa\xfb\xfc", 6));
    const std::string path = testing::temp_dir("pnm") + "/a.ppm";
    write_pnm(img, path);
    CHECK(testing::slurp(path) == s);
  }

  TEST_CASE("pixel centres") {
    GridSpec g;
    g.center = cplx(10.0, -5.0);
    g.width = 4.0;
    g.height = 2.0;
    g.nx = 4;
    g.ny = 2;
    CHECK(std::abs(pixel_center(g, 0, 0) - cplx(8.5, -4.5)) < 1e-15);
    CHECK(std::abs(pixel_center(g, 3, 1) - cplx(11.5, -5.5)) < 1e-15);
  }

  TEST_CASE("colours") {
    const Palette pal;
    Classification c;
    c.outcome = Outcome::Unresolved;
    CHECK(pixel_color(pal, c, 10) == pal.unresolved);
    c.outcome = Outcome::Escaping;
    c.steps = 0;
    CHECK(pixel_color(pal, c, 10) == pal.escape_bright);
    c.steps = 10;
    CHECK(pixel_color(pal, c, 10) == pal.escape_dark);
    c.outcome = Outcome::Converged;
    c.root = cplx(1.0, 2.0);
    CHECK(pixel_color(pal, c, 10) == pixel_color(pal, c, 10));
  }

  TEST_CASE("the image does not depend on tiles or threads") {
    const Pipeline& pl = reference();
    const Chain rc = pl.render_chain();
    const GridSpec g = small_grid(20);
    const std::string a = encode_pnm(render_grid(rc, pl.bounds, g, 1, 1));
    CHECK(encode_pnm(render_grid(rc, pl.bounds, g, 64, 1)) == a);
    CHECK(encode_pnm(render_grid(rc, pl.bounds, g, 7, 3)) == a);
    const Image img = render_grid(rc, pl.bounds, g, 64, 0);
    CHECK(encode_pnm(img) == a);
    const RenderStats st = render_stats(rc, pl.bounds, g, img);
    CHECK(st.escaping + st.converged + st.unresolved == 400);
    CHECK(st.in_u > 0);
    CHECK(st.in_u_not_escaping == 0);
    CHECK(st.escaping > st.in_u);
  }

  TEST_CASE("CSV writer") {
    const std::string path = testing::temp_dir("rcsv") + "/x.csv";
    write_csv({"a", "b"}, {{0.1, 1.0 / 3.0}, {-2.0, 1e300}}, path);
    CHECK(testing::slurp(path) == "a,b\n0.10000000000000001,0.33333333333333331\n-2,1.0000000000000001e+300\n");
  }
}
