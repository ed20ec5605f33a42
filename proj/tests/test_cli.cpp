#include <doctest.h>

#include <string>

#include "mlap/cli.hpp"
#include "mlap/errors.hpp"

using namespace mlap;
using nlohmann::json;

namespace {

json base_config() {
  return json{{"command", "laplace-verify"},
              {"seed", 5},
              {"potential", {{"times", {1.0}}, {"p", 2}, {"components", {{{"D", 0.0}, {"C", 0.5}}}}}},
              {"N", {4}},
              {"budgets", {{"paths", 16}, {"inner", 8}, {"samples", 1000}}},
              {"grid", {{"steps", 20}}}};
}

std::string error_field(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("config round trip") {
  const ExperimentConfig cfg = parse_config(base_config());
  CHECK(cfg.command == "laplace-verify");
  CHECK(cfg.seed == 5);
  CHECK(cfg.ns == std::vector<int>{4});
  CHECK(cfg.budgets.paths == 16);
  CHECK(cfg.steps == 20);
  const ExperimentConfig again = parse_config(config_to_json(cfg));
  CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("invalid configs name the field") {
  json j = base_config();
  j.erase("seed");
  CHECK(error_field(j) == "seed");

  j = base_config();
  j["potential"]["p"] = 1.5;
  CHECK(error_field(j) == "potential.p");

  j = base_config();
  j["budgets"]["paths"] = -3;
  CHECK(error_field(j) == "budgets.paths");

  j = base_config();
  j["N"] = {0};
  CHECK(error_field(j) == "N[0]");

  j = base_config();
  j["bogus"] = 1;
  CHECK(!error_field(j).empty());

  j = base_config();
  j["command"] = "no-such-command";
  CHECK(error_field(j) == "command");
}

TEST_CASE("every documented command is known") {
  const auto& cmds = known_commands();
  for (const char* c : {"laplace-verify", "gibbs-sample", "sd-check", "sde-run", "entropy-estimate", "yosida-test"})
    CHECK(std::find(cmds.begin(), cmds.end(), std::string(c)) != cmds.end());
}

TEST_CASE("yosida run is deterministic and passes") {
  const json doc{{"command", "yosida-test"}, {"seed", 11}, {"params", {{"pairs", 50}, {"dim", 2}}}};
  const RunOutcome a = run(parse_config(doc), false);
  const RunOutcome b = run(parse_config(doc), false);
  CHECK(a.exit_code == 0);
  CHECK(a.report.dump() == b.report.dump());
  CHECK(a.report.at("pass").get<bool>());
  for (const auto& c : a.report.at("checks")) CHECK(c.contains("tag"));
}

TEST_CASE("laplace run reports per-N rows") {
  const RunOutcome r = run(parse_config(base_config()), false);
  CHECK(r.report.at("command") == "laplace-verify");
  CHECK(r.report.contains("results"));
  CHECK(r.exit_code == 0);
}
