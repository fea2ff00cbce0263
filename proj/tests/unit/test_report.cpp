#include <doctest.h>

#include <cmath>
#include <limits>

#include "snrprobe/colormap.hpp"
#include "snrprobe/csv.hpp"
#include "snrprobe/error.hpp"
#include "snrprobe/svg.hpp"
#include "test_util.hpp"

using namespace snrprobe;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

// Tag balance, enough to catch truncated or unclosed elements.
bool balanced(const std::string& svg) {
  int depth = 0;
  for (std::size_t i = 0; i < svg.size(); ++i) {
    if (svg[i] != '<') continue;
    const auto end = svg.find('>', i);
    if (end == std::string::npos) return false;
    const std::string tag = svg.substr(i, end - i + 1);
    if (tag.starts_with("<?") || tag.starts_with("<!")) continue;
    if (tag.starts_with("</")) --depth;
    else if (!tag.ends_with("/>")) ++depth;
    if (depth < 0) return false;
  }
  return depth == 0;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("double formatting round-trips") {
    for (double v : {0.0, 1.0, -0.1, 1e-300, 0.9642, 123456.789, 1.0 / 3.0})
      CHECK(parse_double(format_double(v)) == v);
    CHECK(format_double(0.5) == "0.5");
    CHECK_THROWS_AS(parse_double("1.5x"), Error);
    CHECK_THROWS_AS(parse_double(""), Error);
  }

  TEST_CASE("csv write and read back") {
    CsvTable t;
    t.header = {"layer_id", "cka"};
    t.rows = {{"enc1_l0", format_double(0.25)}, {"dec1_l1", format_double(0.125)}};
    const std::string text = to_csv(t);
    CHECK(text == "layer_id,cka\nenc1_l0,0.25\ndec1_l1,0.125\n");
    CsvTable back = parse_csv(text);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.numeric_column("cka") == std::vector<double>{0.25, 0.125});
    CHECK_THROWS_AS(back.column("missing"), Error);

    testutil::TempDir tmp;
    write_csv(t, tmp / "t.csv");
    CHECK(read_csv(tmp / "t.csv").rows == t.rows);

    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), Error);
    CHECK_THROWS_AS(parse_csv("a,b\n\"1\",2\n"), Error);
  }

  TEST_CASE("colormap endpoints") {
    CHECK(colormap_index(0.0, 0.0, 1.0) == 0);
    CHECK(colormap_index(1.0, 0.0, 1.0) == 255);
    CHECK(colormap_index(-4.0, 0.0, 1.0) == 0);
    CHECK(colormap_index(7.0, 0.0, 1.0) == 255);
    CHECK(colormap_hex(0) == "#440154");
    CHECK(colormap_hex(255) == "#fde725");
  }

  TEST_CASE("heatmap cell colours follow the colormap") {
    HeatmapSpec s;
    s.title = "t";
    s.row_labels = {"a", "b"};
    s.col_labels = {"x", "y"};
    s.values = Matrix(2, 2);
    s.values << 0, 1, 1, 0;
    const std::string svg = render_heatmap(s);
    CHECK(count(svg, "fill=\"" + colormap_hex(0) + "\"") >= 2);
    CHECK(count(svg, "fill=\"" + colormap_hex(255) + "\"") >= 2);
    CHECK(balanced(svg));
    CHECK(svg == render_heatmap(s));
  }

  TEST_CASE("single-cell heatmap is well formed") {
    HeatmapSpec s;
    s.row_labels = {"only"};
    s.col_labels = {"0"};
    s.values = Matrix::Constant(1, 1, 0.5);
    const std::string svg = render_heatmap(s);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(balanced(svg));
  }

  TEST_CASE("missing cells are hatched") {
    HeatmapSpec s;
    s.row_labels = {"a"};
    s.col_labels = {"x", "y"};
    s.values = Matrix(1, 2);
    s.values << 0.3, std::numeric_limits<double>::quiet_NaN();
    const std::string svg = render_heatmap(s);
    CHECK(svg.find("id=\"missing\"") != std::string::npos);
    HeatmapSpec full = s;
    full.values(0, 1) = 0.7;
    CHECK(count(svg, "url(#missing)") == count(render_heatmap(full), "url(#missing)") + 1);
    CHECK(svg.find("nan") == std::string::npos);
  }

  TEST_CASE("empty heatmap is rejected") {
    HeatmapSpec s;
    try {
      render_heatmap(s);
      FAIL("expected EmptyMatrix");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyMatrix);
    }
  }

  TEST_CASE("labels are escaped") {
    CHECK(xml_escape("a<b&\"c\">") == "a&lt;b&amp;&quot;c&quot;&gt;");
    HeatmapSpec s;
    s.title = "x<y";
    s.row_labels = {"r&1"};
    s.col_labels = {"0"};
    s.values = Matrix::Constant(1, 1, 0.5);
    const std::string svg = render_heatmap(s);
    CHECK(svg.find("x&lt;y") != std::string::npos);
    CHECK(svg.find("r&amp;1") != std::string::npos);
  }

  TEST_CASE("curve panels with markers") {
    CurvePanel slope{"slope", "dCKA/dB", {{"slope", {0.1, 0.3, 0.2}, {Marker::None, Marker::Star, Marker::Triangle}}}};
    CurvePanel icpt{"intercept", "CKA", {{"intercept", {0.9, 0.8, 0.85}, {}}}};
    const std::string svg = render_curves({slope, icpt}, {"l0", "l1", "l2"});
    CHECK(balanced(svg));
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("l2") != std::string::npos);
    CHECK(svg == render_curves({slope, icpt}, {"l0", "l1", "l2"}));
  }
}
