#include "fixtures.hpp"

#include "waterlab/errors.hpp"
#include "waterlab/scenario.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace waterlab;

namespace {

const char* kMinimal = R"(# one pipe, ideal channel, exact Sontag
[sim]
horizon = 600

[reference]
omega = 7.27220521664304e-05
b0 = 0.01
b2 = -0.002

[pipe main]
length = 100
diameter = 0.046
upstream_head = 1.85
downstream_head = 0

[node s]
role = sensor
pipe = main

[node c]
role = controller
pipe = main

[node a]
role = actuator
pipe = main
)";

bool mentions(const ValidationError& e, std::initializer_list<const char*> words) {
    return std::any_of(e.problems().begin(), e.problems().end(), [&](const std::string& p) {
        return std::all_of(words.begin(), words.end(), [&](const char* w) { return p.find(w) != std::string::npos; });
    });
}

ValidationError expect_invalid(const std::string& text) {
    try {
        parse_scenario_text(text);
    } catch (const ValidationError& e) {
        return e;
    }
    ADD_FAILURE() << "scenario unexpectedly valid";
    return ValidationError("none");
}

} // namespace

TEST(Scenario, MinimalFileParsesWithDefaults) {
    const auto cfg = parse_scenario_text(kMinimal);
    EXPECT_EQ(cfg.sim.horizon, 600.0);
    EXPECT_EQ(cfg.sim.output_interval, 1.0);
    ASSERT_EQ(cfg.pipes.size(), 1u);
    EXPECT_EQ(cfg.pipes[0].id, "main");
    EXPECT_FALSE(cfg.pipes[0].spec.friction_factor.has_value());
    EXPECT_EQ(cfg.controller.mode, ControlMode::ExactSontag);
    EXPECT_FALSE(cfg.controller.u_bar.has_value());
    EXPECT_EQ(cfg.channel.drop_probability, 0.0);
    ASSERT_EQ(cfg.nodes.size(), 3u);
    EXPECT_EQ(cfg.nodes[2].role, NodeRole::Actuator);
    const auto& ref = std::get<FourierCoefficients>(cfg.reference);
    EXPECT_EQ(ref.cos_terms[1], -0.002);
    EXPECT_EQ(ref.sin_terms[0], 0.0);
}

TEST(Scenario, SerializationRoundTrips) {
    const auto cfg = parse_scenario_text(kMinimal);
    const std::string text = serialize_scenario(cfg);
    const auto back = parse_scenario_text(text);
    EXPECT_EQ(back, cfg);
    EXPECT_EQ(serialize_scenario(back), text);
}

TEST(Scenario, ShippedScenariosRoundTrip) {
    for (const auto& entry : std::filesystem::directory_iterator(WATERLAB_SCENARIO_DIR)) {
        if (entry.path().extension() != ".cfg") continue;
        const auto cfg = parse_scenario(entry.path());
        const auto back = parse_scenario_text(serialize_scenario(cfg), entry.path().parent_path());
        EXPECT_EQ(back, cfg) << entry.path();
    }
}

TEST(Scenario, ReversedHeadsNamePipeAndFields) {
    std::string text = kMinimal;
    text.replace(text.find("downstream_head = 0"), 19, "downstream_head = 3");
    const auto e = expect_invalid(text);
    EXPECT_TRUE(mentions(e, {"pipe 'main'", "upstream_head", "downstream_head"})) << e.what();
}

TEST(Scenario, DanglingFaultReference) {
    const auto e = expect_invalid(std::string(kMinimal) + "\n[fault f1]\ntype = leak\npipe = ghost\ncoefficient = 0.01\nstart = 10\n");
    EXPECT_TRUE(mentions(e, {"fault 'f1'", "ghost"})) << e.what();
}

TEST(Scenario, SemanticErrorsAreBatched) {
    std::string text = kMinimal;
    text.replace(text.find("horizon = 600"), 13, "horizon = 0");
    text += "\n[channel]\ndrop_probability = 2\n\n[node d]\nrole = detector\npipe = main\nsensor = c\n";
    const auto e = expect_invalid(text);
    EXPECT_TRUE(mentions(e, {"horizon"}));
    EXPECT_TRUE(mentions(e, {"drop_probability"}));
    EXPECT_TRUE(mentions(e, {"node 'd'", "not a sensor"}));
    EXPECT_GE(e.problems().size(), 3u);
}

TEST(Scenario, TypedValueErrorsAreBatchedWithLines) {
    std::string text = kMinimal;
    text.replace(text.find("length = 100"), 12, "length = long");
    text += "\n[controller]\nmode = pid\nbogus = 1\n";
    const auto e = expect_invalid(text);
    EXPECT_TRUE(mentions(e, {"line 11", "length", "not a number"})) << e.what();
    EXPECT_TRUE(mentions(e, {"mode"}));
    EXPECT_TRUE(mentions(e, {"unknown key 'bogus'"}));
}

TEST(Scenario, MissingRequiredKeys) {
    const auto e = expect_invalid("[reference]\nomega = 1e-4\nb0 = 0.01\n[pipe p]\nlength = 10\n");
    EXPECT_TRUE(mentions(e, {"[pipe p]", "diameter"}));
    EXPECT_TRUE(mentions(e, {"[pipe p]", "upstream_head"}));
}

TEST(Scenario, RoleSpecificKeysAreChecked) {
    std::string text = kMinimal;
    text.replace(text.find("role = controller\n"), 18, "role = controller\nnoise_rms = 1\n");
    const auto e = expect_invalid(text);
    EXPECT_TRUE(mentions(e, {"noise_rms", "controller"})) << e.what();
}

TEST(Scenario, TopologyRules) {
    std::string text = kMinimal;
    text += "\n[node c2]\nrole = controller\npipe = main\n";
    EXPECT_TRUE(mentions(expect_invalid(text), {"more than one controller"}));

    std::string no_controller = kMinimal;
    no_controller.replace(no_controller.find("role = controller"), 17, "role = sensor");
    EXPECT_TRUE(mentions(expect_invalid(no_controller), {"actuator needs exactly one controller"}));
}

TEST(Scenario, SyntaxErrorsReportLineNumber) {
    auto line_of = [](const std::string& text) {
        try {
            parse_document(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return -1;
    };
    EXPECT_EQ(line_of("[sim]\nhorizon 600\n"), 2);
    EXPECT_EQ(line_of("# c\n\n[sim\n"), 3);
    EXPECT_EQ(line_of("horizon = 1\n"), 1);
    EXPECT_EQ(line_of("[sim]\n[weather]\n"), 2);
    EXPECT_EQ(line_of("[sim]\nseed = 1\nseed = 2\n"), 3);
    EXPECT_EQ(line_of("[pipe]\n"), 1);
    EXPECT_EQ(line_of("[sim x]\n"), 1);
    EXPECT_EQ(line_of("[pipe a]\nlength = 1\n[pipe a]\n"), 3);
}

TEST(Scenario, DottedOverrides) {
    RawDocument doc = parse_document(kMinimal);
    set_value(doc, "sim.horizon", "120");
    set_value(doc, "pipe.main.initial_flow", "0.002");
    set_value(doc, "channel.latency_max", "0.5");
    const auto cfg = build_scenario(doc);
    EXPECT_EQ(cfg.sim.horizon, 120.0);
    EXPECT_EQ(cfg.pipes[0].initial_flow, 0.002);
    EXPECT_EQ(cfg.channel.latency_max, 0.5);
    EXPECT_THROW(set_value(doc, "horizon", "1"), ValidationError);
    EXPECT_THROW(set_value(doc, "pipe.main", "1"), ValidationError);
    EXPECT_THROW(set_value(doc, "weather.wind", "1"), ValidationError);
}

TEST(Scenario, DemandCsvReferenceResolvesRelativeToFile) {
    std::string text = kMinimal;
    const auto start = text.find("[reference]");
    const auto end = text.find("[pipe main]");
    text.replace(start, end - start, "[reference]\nomega = 7.27220521664304e-05\ndemand_csv = demand_day.csv\n\n");
    const auto cfg = parse_scenario_text(text, WATERLAB_SCENARIO_DIR);
    const auto ref = resolve_reference(cfg);
    EXPECT_NEAR(ref.mean(), fixtures::lab_reference().mean(), 1e-15);
    EXPECT_TRUE(mentions(expect_invalid(text), {"reference", "demand"}));
}

TEST(Scenario, FaultKindsParse) {
    const std::string text = std::string(kMinimal) +
                             "\n[fault b]\ntype = sensor_bias\nnode = s\noffset = 1e-4\nstart = 60\n"
                             "\n[fault k]\ntype = sensor_spike\nnode = s\nmagnitude = 0.01\ntimes = 10, 20.5,30\n";
    const auto cfg = parse_scenario_text(text);
    ASSERT_EQ(cfg.faults.size(), 2u);
    EXPECT_EQ(std::get<SensorBiasFault>(cfg.faults[0].kind).offset, 1e-4);
    EXPECT_EQ(std::get<SensorSpikeFault>(cfg.faults[1].kind).times, (std::vector<double>{10.0, 20.5, 30.0}));
    EXPECT_EQ(parse_scenario_text(serialize_scenario(cfg)), cfg);

    const auto e = expect_invalid(std::string(kMinimal) + "\n[fault x]\ntype = sensor_bias\nnode = c\noffset = 1\nstart = 9999\n");
    EXPECT_TRUE(mentions(e, {"fault 'x'", "sensor"}));
    EXPECT_TRUE(mentions(e, {"fault 'x'", "horizon"}));
}

TEST(Scenario, MissingFileIsAValidationError) {
    EXPECT_THROW(parse_scenario("/nonexistent/scenario.cfg"), ValidationError);
}
