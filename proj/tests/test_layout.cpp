#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <thread>

#include "gridrag/errors.hpp"
#include "gridrag/layout.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace gridrag;

namespace {

PageImage page_image(int w, int h, PageRef page = {"doc", 0}) {
  return PageImage::from_bytes(page, testing::fixture_png(w, h));
}

LayoutComponent component(std::string id, ComponentLabel label, BBox box) {
  LayoutComponent c;
  c.component_id = std::move(id);
  c.page = {"doc", 0};
  c.label = label;
  c.bbox = box;
  return c;
}

std::set<std::string> attached(const std::vector<LayoutComponent>& cs, const std::string& id) {
  for (const auto& c : cs) {
    if (c.component_id == id) return {c.attached_ids.begin(), c.attached_ids.end()};
  }
  FAIL("no component " << id);
  return {};
}

}  // namespace

TEST_CASE("precomputed file with one table box gives one table component") {
  testing::TempDir dir;
  testing::write_file(dir / "doc_p0.layout.json",
                      R"({"components":[{"bbox":[10,20,110,80],"label":"table","score":0.97}]})");
  const auto image = page_image(200, 100);
  const auto cs = detect_layout(image, PrecomputedFiles{dir.path()});
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].label == ComponentLabel::Table);
  CHECK(cs[0].component_id == "doc_p0_c000");
  CHECK(cs[0].bbox == BBox{10, 20, 110, 80});
  CHECK(cs[0].confidence == doctest::Approx(0.97));
  const auto crop = decode_png(cs[0].crop.load());
  CHECK(crop.width == 100);
  CHECK(crop.height == 60);
}

TEST_CASE("boxes past the page edge are clipped; degenerate boxes dropped") {
  const auto image = page_image(200, 100);
  const auto cs = components_from_json(
      nlohmann::json::parse(R"({"components":[
        {"bbox":[150,-5,260,40],"label":"figure","score":1.5},
        {"bbox":[250,10,300,20],"label":"text","score":0.5},
        {"bbox":[5,5,60,30],"label":"caption","score":0.4}]})"),
      image);
  REQUIRE(cs.size() == 2);
  // Hand-clipped: x1 260 -> 200, y0 -5 -> 0.
  CHECK(cs[0].bbox == BBox{150, 0, 200, 40});
  CHECK(cs[0].confidence == 1.0);
  CHECK(cs[1].label == ComponentLabel::Text);  // unknown label
  CHECK(cs[1].component_id == "doc_p0_c002");
  for (const auto& c : cs) CHECK(valid_within(c.bbox, 200, 100));
}

TEST_CASE("missing or malformed layout files are LayoutUnavailable") {
  testing::TempDir dir;
  const auto image = page_image(50, 50);
  CHECK_THROWS_AS(detect_layout(image, PrecomputedFiles{dir.path()}), LayoutUnavailable);
  testing::write_file(dir / "doc_p0.layout.json", "{not json");
  CHECK_THROWS_AS(detect_layout(image, PrecomputedFiles{dir.path()}), LayoutUnavailable);
  testing::write_file(dir / "doc_p0.layout.json", R"({"components":[{"label":"text"}]})");
  CHECK_THROWS_AS(detect_layout(image, PrecomputedFiles{dir.path()}), LayoutUnavailable);
  CHECK(detect_layout(image, NoLayout{}).empty());
}

TEST_CASE("precomputed crop paths resolve against the layout directory") {
  testing::TempDir dir;
  testing::write_bytes(dir / "crops/t.png", testing::fixture_png(8, 4, "table_a"));
  testing::write_file(dir / "doc_p0.layout.json",
                      R"({"components":[{"bbox":[0,0,8,4],"label":"table","crop":"crops/t.png"}]})");
  const auto cs = detect_layout(page_image(50, 50), PrecomputedFiles{dir.path()});
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].crop.path() == dir / "crops/t.png");
}

TEST_CASE("title directly above a table is attached") {
  auto cs = group_components({component("table", ComponentLabel::Table, {100, 110, 500, 400}),
                              component("title", ComponentLabel::Title, {120, 50, 480, 100})},
                             1000);
  CHECK(cs[0].component_id == "title");
  CHECK(attached(cs, "table") == std::set<std::string>{"title"});
  CHECK(attached(cs, "title").empty());
}

TEST_CASE("reading order ties on y0 break by x0; empty input stays empty") {
  auto cs = group_components({component("right", ComponentLabel::Table, {300, 10, 400, 50}),
                              component("left", ComponentLabel::Table, {10, 10, 100, 50})},
                             100);
  CHECK(cs[0].component_id == "left");
  CHECK(cs[1].component_id == "right");
  CHECK(group_components({}, 100).empty());
}

TEST_CASE("grouping matches a brute-force pairing oracle") {
  std::mt19937_64 rng(7);
  const double page_h = 1000;
  const ComponentLabel labels[] = {ComponentLabel::Table, ComponentLabel::Text,
                                   ComponentLabel::Title, ComponentLabel::Figure,
                                   ComponentLabel::List};
  std::uniform_int_distribution<int> pick_label(0, 4);
  std::uniform_int_distribution<int> coord(0, 900);
  std::uniform_int_distribution<int> extent(5, 300);
  std::uniform_int_distribution<int> count(0, 12);

  for (int trial = 0; trial < 300; ++trial) {
    std::vector<LayoutComponent> input;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const double x0 = coord(rng), y0 = coord(rng);
      input.push_back(component("c" + std::to_string(i), labels[pick_label(rng)],
                                {x0, y0, x0 + extent(rng), y0 + extent(rng)}));
    }

    // Oracle: check every (caption, target) pair directly from coordinates.
    std::set<std::pair<std::string, std::string>> expected;
    for (const auto& t : input) {
      if (t.label != ComponentLabel::Table && t.label != ComponentLabel::Figure) continue;
      for (const auto& c : input) {
        if (c.label != ComponentLabel::Text && c.label != ComponentLabel::Title) continue;
        double gap = 0;
        if (c.bbox.y1 < t.bbox.y0) gap = t.bbox.y0 - c.bbox.y1;
        if (t.bbox.y1 < c.bbox.y0) gap = c.bbox.y0 - t.bbox.y1;
        const double inter = std::min(c.bbox.x1, t.bbox.x1) - std::max(c.bbox.x0, t.bbox.x0);
        const double narrow = std::min(c.bbox.x1 - c.bbox.x0, t.bbox.x1 - t.bbox.x0);
        if (gap <= 0.03 * page_h && inter > 0 && inter / narrow >= 0.5) {
          expected.insert({t.component_id, c.component_id});
        }
      }
    }

    const auto out = group_components(input, page_h);
    REQUIRE(out.size() == input.size());
    std::set<std::pair<std::string, std::string>> got;
    for (const auto& c : out) {
      for (const auto& a : c.attached_ids) got.insert({c.component_id, a});
    }
    REQUIRE(got == expected);
    for (std::size_t i = 1; i < out.size(); ++i) {
      const auto& a = out[i - 1].bbox;
      const auto& b = out[i].bbox;
      REQUIRE((a.y0 < b.y0 || (a.y0 == b.y0 && a.x0 <= b.x0)));
    }

    // Idempotent and independent of input order.
    auto again = group_components(out, page_h);
    auto shuffled = input;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto from_shuffled = group_components(shuffled, page_h);
    for (std::size_t i = 0; i < out.size(); ++i) {
      REQUIRE(again[i].component_id == out[i].component_id);
      REQUIRE(again[i].attached_ids == out[i].attached_ids);
      REQUIRE(from_shuffled[i].component_id == out[i].component_id);
      REQUIRE(from_shuffled[i].attached_ids == out[i].attached_ids);
    }
  }
}

TEST_CASE("fallback component covers the whole page") {
  const auto image = page_image(1000, 800, {"annual", 4});
  const auto c = fallback_component(image);
  CHECK(c.label == ComponentLabel::Page);
  CHECK(c.bbox == BBox{0, 0, 1000, 800});
  CHECK(c.confidence == 1.0);
  CHECK(c.component_id == "annual_p4_page");
  CHECK(c.crop.load() == image.png);
}

namespace {

// Stand-in for the layout service: answers /detect with a fixed body and
// remembers what it received.
struct LayoutStub {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::string body;
  int status = 200;
  std::string received_file;

  explicit LayoutStub(std::string response) : body(std::move(response)) {
    server.Post("/detect", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_file("image")) {
        res.status = 400;
        return;
      }
      received_file = req.get_file_value("image").content;
      res.status = status;
      res.set_content(body, "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LayoutStub() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("HTTP provider matches the precomputed provider on the same JSON") {
  const std::string response = R"({"components":[
      {"bbox":[0,0,100,50],"label":"text","score":1.0},
      {"bbox":[10,60,90,140],"label":"table","score":0.91},
      {"bbox":[10,150,300,199],"label":"figure","score":0.6}]})";
  LayoutStub stub(response);
  testing::TempDir dir;
  testing::write_file(dir / "doc_p0.layout.json", response);
  const auto image = page_image(120, 200);

  const auto via_http = detect_layout(image, HttpService{stub.url()});
  const auto via_file = detect_layout(image, PrecomputedFiles{dir.path()});
  CHECK(stub.received_file == std::string(image.png.begin(), image.png.end()));
  REQUIRE(via_http.size() == 3);
  REQUIRE(via_http.size() == via_file.size());
  for (std::size_t i = 0; i < via_http.size(); ++i) {
    CHECK(via_http[i].component_id == via_file[i].component_id);
    CHECK(via_http[i].bbox == via_file[i].bbox);
    CHECK(via_http[i].label == via_file[i].label);
    CHECK(via_http[i].confidence == via_file[i].confidence);
    CHECK(via_http[i].crop.load() == via_file[i].crop.load());
  }
}

TEST_CASE("HTTP provider: empty list, error status and unreachable service") {
  const auto image = page_image(40, 40);
  {
    LayoutStub stub(R"({"components":[]})");
    CHECK(detect_layout(image, HttpService{stub.url()}).empty());
    stub.status = 503;
    CHECK_THROWS_AS(detect_layout(image, HttpService{stub.url()}), LayoutUnavailable);
  }
  {
    LayoutStub stub("not json");
    CHECK_THROWS_AS(detect_layout(image, HttpService{stub.url()}), LayoutUnavailable);
  }
  // Nothing listens on port 9 of localhost in the sandbox.
  CHECK_THROWS_AS(detect_layout(image, HttpService{"http://127.0.0.1:9",
                                                   std::chrono::milliseconds(500)}),
                  LayoutUnavailable);
}
