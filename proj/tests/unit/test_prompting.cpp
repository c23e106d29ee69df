#include <doctest.h>

#include "ehrpheno/errors.hpp"
#include "ehrpheno/prompting.hpp"

using namespace ehrpheno;

TEST_SUITE("prompting") {
    TEST_CASE("built-in profiles") {
        const auto& ps = builtin_profiles();
        REQUIRE(ps.size() == 3);
        CHECK(ps[0].name == "ami");
        CHECK(ps[1].name == "diabetes");
        CHECK(ps[2].name == "hypertension");
        CHECK(find_profile(ps, "ami").inference_template.find(
                  "Be careful with some abbreviations for acute myocardial infarction, including ami, mi, "
                  "stemi, and non-stemi") != std::string::npos);
        const auto& dm = find_profile(ps, "diabetes").rule;
        CHECK(dm.analyte == Analyte::Glucose);
        CHECK(dm.comparator == Comparator::GreaterEqual);
        CHECK(dm.threshold == 11.1);
        CHECK(dm.unit == "mmol/L");
        const auto& htn = find_profile(ps, "hypertension");
        CHECK(std::count(htn.keywords.begin(), htn.keywords.end(), "systolic") == 1);
        CHECK(std::count(htn.keywords.begin(), htn.keywords.end(), "htn") == 1);
        CHECK(htn.rule.systolic_threshold == 140);
        CHECK(htn.rule.diastolic_threshold == 90);
        const auto& ami = find_profile(ps, "ami").rule;
        CHECK(ami.comparator == Comparator::Greater);
        CHECK(ami.threshold == 14);
        CHECK(ami.unit == "ng/L");
        for (const auto& p : ps) CHECK_NOTHROW(validate_profile(p));
        CHECK_THROWS_AS(find_profile(ps, "asthma"), ValidationError);
    }

    TEST_CASE("render inference prompt") {
        const auto& dm = find_profile(builtin_profiles(), "diabetes");
        const auto r = render_prompt(dm, PromptKind::Inference, "glucose 24.8 mmol/l");
        CHECK(r.text.rfind("Analyze the clinical text: 'glucose 24.8 mmol/l', answer yes or no if you identify "
                           "diabetes",
                           0) == 0);
        CHECK(r.text.find("{text}") == std::string::npos);
        CHECK(r.condition == "diabetes");
    }

    TEST_CASE("evidence prompts end with the highlight instruction") {
        const auto& ami = find_profile(builtin_profiles(), "ami");
        const auto r = render_prompt(ami, PromptKind::Evidence, "chest pain");
        const std::string suffix = "highlight all the original text that supports your judgement.";
        REQUIRE(r.text.size() > suffix.size());
        CHECK(r.text.compare(r.text.size() - suffix.size(), suffix.size(), suffix) == 0);
    }

    TEST_CASE("placeholder text in the input is left alone") {
        const auto& ami = find_profile(builtin_profiles(), "ami");
        const std::string input = "note with {text} inside";
        const auto r = render_prompt(ami, PromptKind::Extraction, input);
        CHECK(r.text == "Find all the key-value pairs of troponin level from the given text: note with {text} "
                        "inside.");
    }

    TEST_CASE("rendered length is template length plus input") {
        const std::string t = "some clinical text. Second sentence!";
        for (const auto& p : builtin_profiles()) {
            CHECK(render_prompt(p, PromptKind::Inference, t).text.size() ==
                  p.inference_template.size() - kTextPlaceholder.size() + t.size());
            CHECK(render_prompt(p, PromptKind::Extraction, t).text.size() ==
                  p.extraction_template.size() - kTextPlaceholder.size() + t.size());
            CHECK(render_prompt(p, PromptKind::Evidence, t).text.size() ==
                  p.inference_template.size() - kTextPlaceholder.size() + t.size() + kEvidenceInstruction.size());
        }
    }

    TEST_CASE("empty text is rejected") {
        CHECK_THROWS_AS(render_prompt(builtin_profiles()[0], PromptKind::Inference, ""), ValidationError);
    }

    TEST_CASE("profile validation") {
        auto p = builtin_profiles()[1];
        p.inference_template = "no placeholder";
        CHECK_THROWS_AS(validate_profile(p), ValidationError);
        p = builtin_profiles()[1];
        p.extraction_template = "{text} and {text}";
        CHECK_THROWS_AS(validate_profile(p), ValidationError);
        p = builtin_profiles()[1];
        p.keywords.clear();
        CHECK_THROWS_AS(validate_profile(p), ValidationError);
        p = builtin_profiles()[1];
        p.rule.unit = "ng/L";
        CHECK_THROWS_AS(validate_profile(p), ValidationError);
        p = builtin_profiles()[1];
        p.rule.threshold = 0;
        CHECK_THROWS_AS(validate_profile(p), ValidationError);
    }

    TEST_CASE("json round trip and shipped config file") {
        const auto j = profiles_to_json(builtin_profiles());
        CHECK(profiles_from_json(j) == builtin_profiles());
        CHECK(load_profiles(std::string(EHRPHENO_SOURCE_DIR) + "/config/profiles.json") == builtin_profiles());
    }

    TEST_CASE("comparator is configurable") {
        auto j = profiles_to_json(builtin_profiles());
        for (auto& c : j["conditions"]) {
            if (c["name"] == "diabetes") c["rule"]["comparator"] = ">";
        }
        const auto ps = profiles_from_json(j);
        CHECK(find_profile(ps, "diabetes").rule.comparator == Comparator::Greater);
    }
}
