#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>
#include <string>

#include <httplib.h>

#include "swarmloop/directory/directory.hpp"
#include "swarmloop/http/binding.hpp"
#include "swarmloop/sim/world.hpp"
#include "swarmloop/wot/things.hpp"

using swarmloop::json;
namespace sim = swarmloop::sim;
namespace wot = swarmloop::wot;

namespace {

struct NetRig {
  sim::World world;
  wot::Servient servient;
  swarmloop::directory::Directory dir;
  swarmloop::http::HttpBinding binding;
  httplib::Client client;

  explicit NetRig(int n_drones = 2)
      : world(sim::WorldConfig{}, n_drones),
        binding(servient, dir),
        client("127.0.0.1", populate_and_start()) {
    client.set_connection_timeout(5);
  }

 private:
  int populate_and_start() {
    wot::register_world_things(servient, world);
    wot::register_planner_things(servient);
    for (const auto& id : servient.thing_ids()) dir.register_td(servient.td(id).to_json());
    return binding.start("127.0.0.1", 0);
  }
};

json body_of(const httplib::Result& res) {
  REQUIRE(res);
  return json::parse(res->body);
}

json minimal_td(const std::string& id) {
  return json{{"id", id},
              {"title", "Test Thing"},
              {"thing_class", "device"},
              {"properties", json::object()},
              {"actions", json::object()},
              {"forms", json::array()}};
}

}  // namespace

TEST_CASE("property reads and action invocations over HTTP") {
  NetRig rig;

  auto pos = rig.client.Get("/things/uav-1/properties/position");
  REQUIRE(pos);
  CHECK(pos->status == 200);
  CHECK(body_of(pos).at("x") == 0.0);

  CHECK(rig.client.Get("/things/uav-99/properties/position")->status == 404);
  CHECK(rig.client.Get("/things/uav-1/properties/flux")->status == 404);

  auto armed = rig.client.Post("/things/uav-1/actions/arm", "{}", "application/json");
  CHECK(armed->status == 200);
  auto takeoff = rig.client.Post("/things/uav-1/actions/takeoff", R"({"alt": 12.0})",
                                 "application/json");
  CHECK(takeoff->status == 200);
  rig.world.advance(6.0);
  auto aloft = body_of(rig.client.Get("/things/uav-1/properties/position"));
  CHECK(aloft.at("z").get<double>() > 10.0);

  SUBCASE("schema violations and malformed bodies are 400") {
    auto bad = rig.client.Post("/things/uav-2/actions/takeoff", R"({"alt": "high"})",
                               "application/json");
    CHECK(bad->status == 400);
    CHECK(body_of(bad).at("error") == "SchemaViolation");

    auto broken = rig.client.Post("/things/uav-2/actions/arm", "{not json", "application/json");
    CHECK(broken->status == 400);
    CHECK(body_of(broken).at("error") == "BadRequest");
  }

  SUBCASE("state-dependent rejections are 409 with the domain code") {
    auto land = rig.client.Post("/things/uav-2/actions/land", "{}", "application/json");
    CHECK(land->status == 409);
    CHECK(body_of(land).at("error") == "NotAirborne");
  }
}

TEST_CASE("every TD property form resolves over HTTP") {
  NetRig rig(1);
  int checked = 0;
  for (const auto& id : rig.servient.thing_ids()) {
    for (const auto& form : rig.servient.td(id).forms) {
      if (form.op != "readproperty") continue;
      auto res = rig.client.Get(form.href);
      REQUIRE(res);
      CHECK(res->status == 200);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("directory CRUDL and discovery over HTTP") {
  NetRig rig;

  auto listed = body_of(rig.client.Get("/td"));
  const auto initial = listed.size();
  CHECK(initial >= 3);  // drones + planner things

  auto created = rig.client.Post("/td/extra-1", minimal_td("extra-1").dump(),
                                 "application/json");
  CHECK(created->status == 201);
  CHECK(body_of(rig.client.Get("/td")).size() == initial + 1);
  CHECK(body_of(rig.client.Get("/td/extra-1")).at("id") == "extra-1");

  SUBCASE("duplicate registration conflicts") {
    auto dup = rig.client.Post("/td/extra-1", minimal_td("extra-1").dump(), "application/json");
    CHECK(dup->status == 409);
    CHECK(body_of(dup).at("error") == "DuplicateId");
  }

  SUBCASE("path and body ids must agree") {
    auto off = rig.client.Post("/td/extra-2", minimal_td("other").dump(), "application/json");
    CHECK(off->status == 400);
  }

  SUBCASE("update replaces the stored document") {
    auto td = minimal_td("extra-1");
    td["title"] = "Renamed";
    CHECK(rig.client.Put("/td/extra-1", td.dump(), "application/json")->status == 200);
    CHECK(body_of(rig.client.Get("/td/extra-1")).at("title") == "Renamed");
    CHECK(rig.client.Put("/td/ghost", minimal_td("ghost").dump(), "application/json")->status ==
          404);
  }

  SUBCASE("delete removes; reads after delete are 404") {
    CHECK(rig.client.Delete("/td/extra-1")->status == 200);
    CHECK(rig.client.Get("/td/extra-1")->status == 404);
    CHECK(rig.client.Delete("/td/extra-1")->status == 404);
  }

  SUBCASE("search runs path expressions") {
    auto drones = body_of(rig.client.Get("/search?q=%24.actions.takeoff"));
    CHECK(drones.size() == 2);
    for (const auto& td : drones) CHECK(td.at("id").get<std::string>().rfind("uav-", 0) == 0);

    auto bad = rig.client.Get("/search?q=%24%24bad");
    CHECK(bad->status == 400);
    CHECK(body_of(bad).at("error") == "MalformedExpression");

    CHECK(rig.client.Get("/search")->status == 400);
  }
}
