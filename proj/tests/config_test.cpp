#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "rangeforge/config.hpp"
#include "rangeforge/error.hpp"

using namespace rangeforge;

namespace {

const std::string kConfigDir = RANGEFORGE_CONFIG_DIR;

}  // namespace

TEST_CASE("toy config resolves end to end") {
    auto resolved = config::load_run_config(kConfigDir + "/toy.json", std::nullopt);
    CHECK(resolved.inputs.set.samples.size() == 20);
    CHECK(resolved.inputs.set.count_label(corpus::Label::Benign) == 10);
    CHECK(resolved.inputs.params.seed == 42);
    CHECK(resolved.inputs.params.timings.static_timeout == seconds(4));
    CHECK(resolved.inputs.topology.size() == 2);
    CHECK(resolved.detector_name == "toy-detector");
    CHECK(resolved.inputs.input_digests.count("manifest") == 1);
    CHECK(resolved.inputs.input_digests.count("detector") == 1);
    const auto zd = std::count_if(resolved.inputs.set.samples.begin(),
                                  resolved.inputs.set.samples.end(),
                                  [](const corpus::SampleRecord& s) { return s.zero_day; });
    CHECK(zd == 2);
}

TEST_CASE("seed override changes the config digest and the set") {
    auto a = config::load_run_config(kConfigDir + "/toy.json", std::nullopt);
    auto b = config::load_run_config(kConfigDir + "/toy.json", 777);
    CHECK(a.inputs.config_digest != b.inputs.config_digest);
    CHECK(b.inputs.params.seed == 777);
}

TEST_CASE("network config resolves with surges and campaigns") {
    auto resolved = config::load_net_config(kConfigDir + "/aiatac2.json", std::nullopt);
    CHECK(resolved.devices.size() == 3);
    CHECK(resolved.net.schedule.size() == 4);
    CHECK(resolved.net.background_rate_gbps == doctest::Approx(1.25));
    REQUIRE(resolved.surges.size() == 1);
    CHECK(resolved.surges[0].factor == doctest::Approx(4.0));
    CHECK(resolved.match_slack == seconds(60));
    CHECK(config::config_mode(kConfigDir + "/aiatac2.json") == "network");
}

TEST_CASE("mode mixups are validation errors") {
    CHECK_THROWS_AS(config::load_net_config(kConfigDir + "/toy.json", std::nullopt),
                    ValidationError);
    CHECK_THROWS_AS(config::load_run_config(kConfigDir + "/aiatac2.json", std::nullopt),
                    ValidationError);
}

TEST_CASE("broken configs carry useful errors") {
    const std::string path = "/tmp/rangeforge-bad-config.json";
    {
        std::ofstream out(path);
        out << R"({"mode": "endpoint", "seed": 1})";
    }
    CHECK_THROWS_WITH_AS(config::load_run_config(path, std::nullopt),
                         doctest::Contains("topology"), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("run params round-trip through the stored config document") {
    auto resolved = config::load_run_config(kConfigDir + "/toy.json", 99);
    auto params = config::run_params_from_config_text(resolved.config_json, "stored");
    CHECK(params.seed == 99);
    CHECK(params.timings.boot == resolved.inputs.params.timings.boot);
    CHECK(params.limits.max_concurrent_tasks ==
          resolved.inputs.params.limits.max_concurrent_tasks);
    CHECK(params.phases == resolved.inputs.params.phases);
    CHECK(params.qa_subset == resolved.inputs.params.qa_subset);
}
