#include "gvqa/prompting.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "gvqa/declarative.hpp"
#include "test_util.hpp"

using namespace gvqa;

namespace {

const char* kN0Answer =
    "There is a red car to the front of the ego vehicle, a white SUV to the front of the ego "
    "vehicle, a white sedan to the front of the ego vehicle, a black sedan to the front of the "
    "ego vehicle, and a red light to the front of the ego vehicle. The IDs of these objects are "
    "<c1,CAM_FRONT,714.3,503.6>, <c2,CAM_FRONT,993.3,503.3>, <c3,CAM_FRONT,1300.8,531.7>, "
    "<c4,CAM_FRONT,892.5,507.5>, and <c5,CAM_FRONT,712.6,361.8>.";

std::vector<ObjectTag> tags_of(const std::string& text) { return parse_object_tags(text); }

}  // namespace

TEST(RewriteDeclarative, NegatedAuxiliaryInversion) {
    EXPECT_EQ(rewrite_declarative(
                  "Would <c1,CAM_FRONT,714.3,503.6> be in the moving direction of the ego vehicle?",
                  "No."),
              "<c1,CAM_FRONT,714.3,503.6> would not be in the moving direction of the ego vehicle.");
}

TEST(RewriteDeclarative, AffirmativeAuxiliaryInversion) {
    EXPECT_EQ(rewrite_declarative(
                  "Would <c1,CAM_FRONT,714.3,503.6> be in the moving direction of the ego vehicle?",
                  "Yes."),
              "<c1,CAM_FRONT,714.3,503.6> would be in the moving direction of the ego vehicle.");
}

TEST(RewriteDeclarative, FallbackKeepsPairVerbatim) {
    EXPECT_EQ(rewrite_declarative("What is the moving status of <c2,CAM_FRONT,993.3,503.3>?",
                                  "Going ahead."),
              "Q: What is the moving status of <c2,CAM_FRONT,993.3,503.3>? A: Going ahead.");
}

TEST(RewriteDeclarative, CoversCommonSubjects) {
    EXPECT_EQ(rewrite_declarative("Is it necessary for the ego vehicle to take a brake?", "Yes."),
              "it is necessary for the ego vehicle to take a brake.");
    EXPECT_EQ(rewrite_declarative("Will the ego vehicle change lanes?", "No."),
              "the ego vehicle will not change lanes.");
    EXPECT_EQ(rewrite_declarative("Is there an obstacle ahead?", "Yes."),
              "there is an obstacle ahead.");
    // Unlisted subject shapes fall back losslessly.
    EXPECT_EQ(rewrite_declarative("Would the car in front of us stop?", "No."),
              "Q: Would the car in front of us stop? A: No.");
}

TEST(RewriteDeclarative, NonYesNoAnswersFallBack) {
    EXPECT_EQ(rewrite_declarative("Would <c1,CAM_FRONT,714.3,503.6> move?", "Probably not."),
              "Q: Would <c1,CAM_FRONT,714.3,503.6> move? A: Probably not.");
}

TEST(RewriteDeclarative, MatchedRewritesNeverEndInQuestionMark) {
    const std::vector<std::string> questions = {
        "Would <c1,CAM_FRONT,714.3,503.6> be in the moving direction of the ego vehicle?",
        "Is it necessary for the ego vehicle to take a brake?",
        "Can the ego vehicle overtake safely?",
        "Does it matter?",
        "Is there a pedestrian on the crosswalk?",
    };
    for (const std::string& q : questions) {
        for (const char* a : {"Yes.", "No."}) {
            std::string rewritten = rewrite_declarative(q, a);
            if (rewritten.rfind("Q: ", 0) == 0) continue;  // fallback path
            ASSERT_FALSE(rewritten.empty());
            EXPECT_NE(rewritten.back(), '?') << q << " / " << a;
        }
    }
}

TEST(RewriteRules, AssetFileMatchesBuiltInBehavior) {
    RewriteRules loaded = load_rewrite_rules_file(testutil::asset_path("rewrite_rules.json"));
    ASSERT_EQ(loaded.size(), default_rewrite_rules().size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        EXPECT_EQ(loaded[i].pattern, default_rewrite_rules()[i].pattern);
        EXPECT_EQ(loaded[i].answer, default_rewrite_rules()[i].answer);
        EXPECT_EQ(loaded[i].output, default_rewrite_rules()[i].output);
    }
}

TEST(RewriteRules, CustomRuleFileExtendsBehavior) {
    std::istringstream in(R"({
      "rules": [
        {"pattern": "^Status of (.+)\\?$", "answer": "*", "output": "$1 status noted."}
      ]
    })");
    RewriteRules rules = load_rewrite_rules(in);
    EXPECT_EQ(rewrite_declarative("Status of c1?", "whatever", rules), "c1 status noted.");
    EXPECT_EQ(rewrite_declarative("Other?", "x", rules), "Q: Other? A: x");
}

TEST(ReformatN0, MentionedObjectGetsItsClause) {
    EXPECT_EQ(reformat_n0_answer(kN0Answer, tags_of("<c1,CAM_FRONT,714.3,503.6>")),
              "<c1,CAM_FRONT,714.3,503.6> is a red car to the front of the ego vehicle.");
}

TEST(ReformatN0, FifthClausePairsWithFifthTag) {
    EXPECT_EQ(reformat_n0_answer(kN0Answer, tags_of("<c5,CAM_FRONT,712.6,361.8>")),
              "<c5,CAM_FRONT,712.6,361.8> is a red light to the front of the ego vehicle.");
}

TEST(ReformatN0, UnmentionedTagContributesNothing) {
    EXPECT_EQ(reformat_n0_answer(kN0Answer, tags_of("<c9,CAM_FRONT,1.0,2.0>")), "");
    EXPECT_EQ(reformat_n0_answer(kN0Answer, {}), "");
}

TEST(ReformatN0, MultipleMentionsKeepMentionOrder) {
    auto mentioned = tags_of("<c1,CAM_FRONT,714.3,503.6> and <c5,CAM_FRONT,712.6,361.8>");
    EXPECT_EQ(reformat_n0_answer(kN0Answer, mentioned),
              "<c1,CAM_FRONT,714.3,503.6> is a red car to the front of the ego vehicle.\n"
              "<c5,CAM_FRONT,712.6,361.8> is a red light to the front of the ego vehicle.");
}

TEST(ReformatN0, CountMismatchFallsBackToTagAlone) {
    const std::string broken =
        "There is a red car to the front of the ego vehicle. The IDs of these objects are "
        "<c1,CAM_FRONT,714.3,503.6>, and <c2,CAM_FRONT,993.3,503.3>.";
    std::vector<Diagnostic> diags;
    EXPECT_EQ(reformat_n0_answer(broken, tags_of("<c2,CAM_FRONT,993.3,503.3>"), &diags),
              "<c2,CAM_FRONT,993.3,503.3>");
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].code, "n0_pairing_mismatch");
}

TEST(AssembleContext, NoPredecessorsEmptyContext) {
    KeyFrame frame = testutil::make_frame("f1", {{Stage::Perception, "First?", "A0."},
                                                 {Stage::Prediction, "Second?", "A1."}});
    auto graph = build_graph(frame, ContextStrategy::Cot);
    std::map<std::string, std::string> answers = {{"f1_0", "A0."}};
    PromptStyle style{ContextForm::RawQa, false, false};
    EXPECT_EQ(assemble_context(frame.qa_list[0], graph, frame, answers, style), "");
}

TEST(AssembleContext, RawQaRendersPreviousPair) {
    KeyFrame frame = testutil::make_frame("f1", {{Stage::Perception, "Q1?", "ignored"},
                                                 {Stage::Prediction, "Q2?", "x"}});
    auto graph = build_graph(frame, ContextStrategy::Cot);
    std::map<std::string, std::string> answers = {{"f1_0", "A1"}};
    PromptStyle style{ContextForm::RawQa, false, false};
    EXPECT_EQ(assemble_context(frame.qa_list[1], graph, frame, answers, style), "Q: Q1? A: A1");
}

TEST(AssembleContext, DeclarativeN0BlockThenPredecessors) {
    KeyFrame frame = testutil::make_frame(
        "f1",
        {{Stage::Perception, "What are the important objects in the current scene?", ""},
         {Stage::Prediction,
          "Would <c1,CAM_FRONT,714.3,503.6> be in the moving direction of the ego vehicle?",
          "No."},
         {Stage::Planning, "What actions considering <c1,CAM_FRONT,714.3,503.6>?", "Stop."}});
    auto graph = build_graph(frame, ContextStrategy::CotN0);
    std::map<std::string, std::string> answers = {{"f1_0", kN0Answer}, {"f1_1", "No."}};
    PromptStyle style{ContextForm::Declarative, false, false};
    EXPECT_EQ(
        assemble_context(frame.qa_list[2], graph, frame, answers, style),
        "<c1,CAM_FRONT,714.3,503.6> is a red car to the front of the ego vehicle.\n"
        "<c1,CAM_FRONT,714.3,503.6> would not be in the moving direction of the ego vehicle.");
}

TEST(AssembleContext, DeclarativeWithNothingMentionedKeepsFirstPair) {
    KeyFrame frame = testutil::make_frame(
        "f1", {{Stage::Perception, "What are the important objects in the current scene?", ""},
               {Stage::Behavior, "Predict the behavior of the ego vehicle.", "fast, straight"}});
    auto graph = build_graph(frame, ContextStrategy::Cot);
    std::map<std::string, std::string> answers = {{"f1_0", kN0Answer}};
    PromptStyle style{ContextForm::Declarative, false, false};
    EXPECT_EQ(assemble_context(frame.qa_list[1], graph, frame, answers, style),
              "Q: What are the important objects in the current scene? A: " + std::string(kN0Answer));
}

TEST(AssembleContext, MissingPredecessorAnswerIsASchedulerBug) {
    KeyFrame frame = testutil::make_frame("f1", {{Stage::Perception, "Q1?", "A1."},
                                                 {Stage::Prediction, "Q2?", "A2."}});
    auto graph = build_graph(frame, ContextStrategy::Cot);
    std::map<std::string, std::string> answers;
    PromptStyle style{ContextForm::RawQa, false, false};
    EXPECT_THROW(assemble_context(frame.qa_list[1], graph, frame, answers, style),
                 std::logic_error);
}

TEST(BuildPrompt, AllBlocksDisabledIsIdentityOnQuestion) {
    PromptStyle style{ContextForm::RawQa, false, false};
    auto prompt = build_prompt("", "What next?", style, "");
    EXPECT_EQ(prompt.full_text, "What next?");
    EXPECT_EQ(prompt.context_block, "");
}

TEST(BuildPrompt, FormatInstructionLeads) {
    PromptStyle style{ContextForm::RawQa, true, false};
    auto prompt = build_prompt("ctx", "Q?", style, "");
    EXPECT_EQ(prompt.full_text.rfind("Input six images in turn.", 0), 0u);
    EXPECT_EQ(prompt.full_text, format_instruction() + "\nctx\nQ?");
}

TEST(BuildPrompt, DetectionBlockPrecedesContext) {
    PromptStyle style{ContextForm::RawQa, false, true};
    const std::string det =
        "There is a red car to the front of the ego vehicle, and the box center is [714.3,503.6].";
    auto prompt = build_prompt("ctx", "Q?", style, det);
    EXPECT_EQ(prompt.full_text, det + "\nctx\nQ?");
    EXPECT_EQ(prompt.context_block, det + "\nctx");
}

TEST(FormatInstruction, MatchesCommittedAsset) {
    std::string asset = testutil::read_file(testutil::asset_path("format_instruction.txt"));
    if (!asset.empty() && asset.back() == '\n') asset.pop_back();
    EXPECT_EQ(asset, std::string(kFormatInstruction));
}

TEST(FormatInstruction, TypoFixFlag) {
    EXPECT_NE(format_instruction(false).find("back right left"), std::string::npos);
    EXPECT_EQ(format_instruction(true).find("back right left"), std::string::npos);
    EXPECT_NE(format_instruction(true).find("<CAM_BACK_RIGHT>, which is in the back right of"),
              std::string::npos);
}

TEST(PromptLocality, NonPredecessorAnswersCannotChangeThePrompt) {
    KeyFrame frame = testutil::make_frame(
        "f1", {{Stage::Perception, "What are the important objects in the current scene?", ""},
               {Stage::Perception, "Is <c2,CAM_FRONT,993.3,503.3> moving?", "Yes."},
               {Stage::Prediction, "Would <c2,CAM_FRONT,993.3,503.3> turn?", "No."},
               {Stage::Planning, "Safe action?", "Brake."}});
    auto graph = build_graph(frame, ContextStrategy::Got);
    // Node 3 depends on node 0 only (no shared identifiers).
    PromptStyle style{ContextForm::Declarative, true, false};
    std::map<std::string, std::string> answers = {
        {"f1_0", kN0Answer}, {"f1_1", "Yes."}, {"f1_2", "No."}};
    auto before = build_prompt(assemble_context(frame.qa_list[3], graph, frame, answers, style),
                               frame.qa_list[3].question, style, "");
    answers["f1_1"] = "Completely different.";
    answers["f1_2"] = "Also different.";
    auto after = build_prompt(assemble_context(frame.qa_list[3], graph, frame, answers, style),
                              frame.qa_list[3].question, style, "");
    EXPECT_EQ(before.full_text, after.full_text);
}
