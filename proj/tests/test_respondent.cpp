#include <gtest/gtest.h>

#include <sstream>

#include "test_support.hpp"

using namespace scalewise;
using namespace scalewise::testing;

namespace {

Persona sample_persona() {
  Persona p;
  p.uid = "p1";
  p.attributes = {{"age", "34"}};
  p.gold_item_scores = std::vector<int>{2, 2, 2, 1, 1, 2, 1, 1};
  p.gold_total = 12;
  p.gold_label = "depressed";
  p.transcript_turns = {{"Ellie", "How are you?"}, {"Participant", "Tired."}};
  return p;
}

}  // namespace

TEST(ScriptedRespondent, ReturnsAnswersInOrderThenThrows) {
  auto r = scripted_respondent({"a", "b"});
  EXPECT_EQ(r->respond("q1", {}), "a");
  EXPECT_EQ(r->respond("q2", {}), "b");
  EXPECT_THROW(r->respond("q3", {}), ScriptExhausted);
  EXPECT_THROW(scripted_respondent({}), PreconditionError);
}

TEST(ScriptedRespondent, LoadsAnswerScript) {
  const auto script = load_answer_script(data_path("fixtures/phq8_answers.json"));
  EXPECT_EQ(script.size(), 12u);
  EXPECT_THROW(load_answer_script("/nonexistent.json"), IOError);
}

TEST(Persona, RenderNeverLeaksGold) {
  const auto text = render_persona(sample_persona());
  EXPECT_NE(text.find("age: 34"), std::string::npos);
  EXPECT_NE(text.find("Participant: Tired."), std::string::npos);
  EXPECT_EQ(text.find("12"), std::string::npos);
  EXPECT_EQ(text.find("depressed"), std::string::npos);
}

TEST(Persona, LlmRespondentSendsPersonaAndQuestion) {
  auto b = std::make_shared<ScriptedBackend>();
  b->add(tags::respond, ScriptedReply::of("  Not great.  "));
  auto r = llm_respondent(b, quiet_settings(), sample_persona());
  EXPECT_EQ(r->respond("How do you sleep?", {{"q0", "a0"}}), "Not great.");
  const auto ex = b->exchanges();
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_EQ(ex[0].tag, tags::respond);
  EXPECT_NE(ex[0].prompt.find("How do you sleep?"), std::string::npos);
  EXPECT_NE(ex[0].prompt.find("A1: a0"), std::string::npos);
  EXPECT_EQ(ex[0].prompt.find("depressed"), std::string::npos);
  EXPECT_THROW(r->respond("", {}), PreconditionError);
}

TEST(Persona, LlmRespondentNeedsBackground) {
  Persona p;
  p.uid = "empty";
  EXPECT_THROW(llm_respondent(std::make_shared<ScriptedBackend>(), quiet_settings(), p), PreconditionError);
}

TEST(Persona, ValidateGold) {
  auto p = sample_persona();
  EXPECT_NO_THROW(validate_persona(p, 8));
  EXPECT_THROW(validate_persona(p, 7), ValidationError);
  p.gold_total = 11;
  EXPECT_THROW(validate_persona(p, 8), ValidationError);
  p.uid.clear();
  EXPECT_THROW(validate_persona(p), ValidationError);
}

TEST(Persona, JsonRoundTripAndJsonl) {
  const auto p = sample_persona();
  EXPECT_EQ(persona_from_json(persona_to_json(p)), p);
  std::stringstream ss;
  ss << persona_to_json(p).dump() << "\n\n" << persona_to_json(p).dump() << "\n";
  const auto all = load_personas(ss, 8);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[1], p);
  std::stringstream bad("{\"uid\": \n");
  EXPECT_THROW(load_personas(bad), ParseError);
}

TEST(Persona, DemoFixtureLoads) {
  const auto all = load_personas_file(data_path("fixtures/personas_demo.jsonl"), 8);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].gold_label, "depressed");
  EXPECT_EQ(all[1].gold_total, 6);
}

TEST(Persona, TranscriptTsvMergesSpeakerRuns) {
  std::stringstream tsv(
      "start_time\tstop_time\tspeaker\tvalue\n"
      "0.1\t1.0\tEllie\thi i'm ellie\n"
      "1.1\t2.0\tEllie\thow are you\n"
      "2.5\t3.0\tParticipant\tokay\n"
      "\n"
      "3.1\t4.0\tParticipant\ti guess\n");
  const auto p = persona_from_transcript_tsv(tsv, "300");
  ASSERT_EQ(p.transcript_turns.size(), 2u);
  EXPECT_EQ(p.transcript_turns[0].text, "hi i'm ellie how are you");
  EXPECT_EQ(p.transcript_turns[1], (TranscriptLine{"Participant", "okay i guess"}));
  std::stringstream broken("a\tb\n");
  EXPECT_THROW(persona_from_transcript_tsv(broken, "x"), ParseError);
}
