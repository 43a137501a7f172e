#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace scalewise;

namespace {

// Recovers placeholder values from a rendered template by walking the
// template and the output side by side.
PromptVars decode(const std::string& tmpl, const std::string& rendered) {
  PromptVars out;
  std::size_t t = 0, r = 0;
  while (t < tmpl.size()) {
    if (tmpl[t] == '{') {
      const auto close = tmpl.find('}', t);
      const auto name = close == std::string::npos ? "" : tmpl.substr(t + 1, close - t - 1);
      const bool is_placeholder = !name.empty() && name.find_first_not_of("abcdefghijklmnopqrstuvwxyz_") == std::string::npos;
      if (is_placeholder) {
        const std::string head = "<" + name + " length=";
        if (rendered.compare(r, head.size(), head) != 0) throw std::runtime_error("bad frame head");
        r += head.size();
        const auto gt = rendered.find(">\n", r);
        const auto n = std::stoul(rendered.substr(r, gt - r));
        r = gt + 2;
        out[name] = rendered.substr(r, n);
        r += n;
        const std::string tail = "\n</" + name + ">";
        if (rendered.compare(r, tail.size(), tail) != 0) throw std::runtime_error("bad frame tail");
        r += tail.size();
        t = close + 1;
        continue;
      }
    }
    if (r >= rendered.size() || rendered[r] != tmpl[t]) throw std::runtime_error("literal mismatch");
    ++t;
    ++r;
  }
  if (r != rendered.size()) throw std::runtime_error("trailing output");
  return out;
}

std::string random_text(std::mt19937& rng) {
  static const std::string alphabet = "ab {}<>/\n=length</history>x";
  std::string s(rng() % 24, ' ');
  for (auto& c : s) c = alphabet[rng() % alphabet.size()];
  return s;
}

}  // namespace

TEST(Prompts, RenderFramesValues) {
  EXPECT_EQ(render_template("Topic: {topic_name}.", {{"topic_name", "Sleep"}}),
            "Topic: <topic_name length=5>\nSleep\n</topic_name>.");
}

TEST(Prompts, MissingPlaceholderValueThrows) {
  EXPECT_THROW(render_template("{missing}", {}), ValidationError);
}

TEST(Prompts, NonPlaceholderBracesPassThrough) {
  EXPECT_EQ(render_template(R"({"question": "<q>"} {Not} {})", {}), R"({"question": "<q>"} {Not} {})");
}

TEST(Prompts, RenderPromptProducesSystemThenUser) {
  const auto msgs = render_prompt({"sys {a}", "user {b}"}, {{"a", "1"}, {"b", "2"}});
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].role, "system");
  EXPECT_EQ(msgs[1].role, "user");
}

TEST(Prompts, DefaultTemplatesCoverEveryTag) {
  const auto t = default_templates();
  for (const char* tag : {tags::question, tags::necessity, tags::facts, tags::topic_score, tags::revision,
                          tags::final_update, tags::respond})
    EXPECT_TRUE(t.count(tag)) << tag;
}

TEST(Prompts, FollowUpConstraintsMentionDimensions) {
  const auto& text = follow_up_constraints_text();
  EXPECT_NE(text.find("severity, frequency, duration, and impact"), std::string::npos);
  EXPECT_NE(text.find("easy-to-answer"), std::string::npos);
  EXPECT_NE(default_templates().at(tags::question).user.find("{follow_up_constraints}"), std::string::npos);
}

TEST(Prompts, TemplateFileRoundTrip) {
  for (const auto& [tag, t] : default_templates()) EXPECT_EQ(parse_template_text(template_text(t)), t) << tag;
  EXPECT_THROW(parse_template_text("no header"), ParseError);
  EXPECT_THROW(parse_template_text("[system]\nonly system"), ParseError);
}

TEST(Prompts, ShippedTemplateFilesMatchDefaults) {
  const auto shipped = load_templates(SCALEWISE_TEMPLATE_DIR);
  EXPECT_EQ(shipped, default_templates());
  for (const auto& [tag, t] : default_templates())
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(SCALEWISE_TEMPLATE_DIR) / (tag + ".txt"))) << tag;
}

TEST(Prompts, LoadTemplatesOverridesOneTag) {
  scalewise::testing::TempDir dir("sw-templates");
  std::ofstream(dir.path() / "necessity.txt") << "[system]\ncustom {topic_name}\n[user]\n{history}\n";
  const auto t = load_templates(dir.path());
  EXPECT_EQ(t.at(tags::necessity).system, "custom {topic_name}");
  EXPECT_EQ(t.at(tags::question), default_templates().at(tags::question));
  EXPECT_THROW(load_templates(dir.path() / "missing"), IOError);
}

TEST(PromptsProperty, RenderingIsInjective) {
  std::mt19937 rng(3);
  const std::string tmpl = "A {first}{second} B {first} {third}";
  for (int trial = 0; trial < 500; ++trial) {
    PromptVars vars{{"first", random_text(rng)}, {"second", random_text(rng)}, {"third", random_text(rng)}};
    const auto rendered = render_template(tmpl, vars);
    EXPECT_EQ(decode(tmpl, rendered), vars);
  }
  for (const auto& [tag, t] : default_templates()) {
    PromptVars vars;
    for (const char* name : {"topic_name", "topic_description", "history", "memory_context", "follow_up_constraints",
                             "question", "answer", "scale_name", "rating_standards", "score_range", "latest_topic",
                             "completed_topics", "topic_count", "topic_snapshot", "persona"})
      vars[name] = random_text(rng);
    auto used = decode(t.system, render_template(t.system, vars));
    for (const auto& [k, v] : used) EXPECT_EQ(v, vars.at(k)) << tag;
  }
}
