#include <doctest.h>

#include "fixtures.hpp"
#include "modcausal/domain.hpp"

using namespace modcausal;
using MA = ModerationAction;

TEST_CASE("offense types parse in canonical and spaced forms") {
  CHECK(parse_offense("Cheating") == OffenseType::Cheating);
  CHECK(parse_offense("OffensiveTextChat") == OffenseType::OffensiveTextChat);
  CHECK(parse_offense("Offensive Voice Chat") == OffenseType::OffensiveVoiceChat);
  CHECK(parse_offense("OffensiveUserID") == OffenseType::OffensiveUserID);
  CHECK_THROWS(parse_offense("Griefing"));
  CHECK_THROWS(parse_offense(""));
  for (auto o : kAllOffenses) CHECK(parse_offense(to_string(o)) == o);
}

TEST_CASE("every action in the action frequency table parses; unknown actions are rejected") {
  for (const char* s : {"RemoveFromLeaderboard", "WarningNotice", "PenaltyNotice", "RenameUser",
                        "LimitAllowedRenames", "UpdateClantag", "RemoveClantag", "DeleteProfile", "FeatureFlag",
                        "RankingService"})
    CHECK(to_string(parse_action(s)) == s);
  CHECK(parse_action("Penalty Notice") == MA::PenaltyNotice);
  CHECK_THROWS(parse_action("BanHammer"));
}

TEST_CASE("severity classification") {
  CHECK(classify_severity(OffenseType::OffensiveTextChat, {MA::PenaltyNotice, MA::FeatureFlag}) ==
        Severity::Stricter);
  CHECK(classify_severity(OffenseType::OffensiveTextChat, {MA::WarningNotice, MA::FeatureFlag}) == Severity::Milder);
  CHECK(classify_severity(OffenseType::Cheating, {MA::RemoveFromLeaderboard}) == Severity::NotApplicable);

  SUBCASE("cheating is NotApplicable whatever the actions") {
    CHECK(classify_severity(OffenseType::Cheating, {MA::FeatureFlag, MA::PenaltyNotice}) == Severity::NotApplicable);
  }
  SUBCASE("user id rows differ by the feature flag") {
    const ActionMultiset milder{MA::RenameUser, MA::LimitAllowedRenames, MA::UpdateClantag, MA::PenaltyNotice};
    ActionMultiset stricter = milder;
    stricter.add(MA::FeatureFlag);
    CHECK(classify_severity(OffenseType::OffensiveUserID, milder) == Severity::Milder);
    CHECK(classify_severity(OffenseType::OffensiveUserID, stricter) == Severity::Stricter);
  }
  SUBCASE("voice escalation needs two feature flags") {
    CHECK(classify_severity(OffenseType::OffensiveVoiceChat, {MA::FeatureFlag}) == Severity::Milder);
    CHECK(classify_severity(OffenseType::OffensiveVoiceChat, {MA::FeatureFlag, MA::FeatureFlag, MA::PenaltyNotice}) ==
          Severity::Stricter);
    CHECK_THROWS_AS(classify_severity(OffenseType::OffensiveVoiceChat, {MA::FeatureFlag, MA::PenaltyNotice}),
                    UnclassifiableActionSet);
    CHECK_FALSE(try_classify_severity(OffenseType::OffensiveVoiceChat, {MA::WarningNotice, MA::FeatureFlag}));
  }
  SUBCASE("order does not matter, multiplicity does") {
    CHECK(ActionMultiset{MA::FeatureFlag, MA::PenaltyNotice} == ActionMultiset{MA::PenaltyNotice, MA::FeatureFlag});
    CHECK_FALSE(ActionMultiset{MA::FeatureFlag} == ActionMultiset{MA::FeatureFlag, MA::FeatureFlag});
  }
  CHECK_THROWS(classify_severity(OffenseType::OffensiveTextChat, ActionMultiset{}));
}

TEST_CASE("action multiset round-trips through its text form") {
  const ActionMultiset a{MA::PenaltyNotice, MA::FeatureFlag, MA::FeatureFlag};
  CHECK(ActionMultiset::parse(a.to_string()) == a);
  CHECK(a.count(MA::FeatureFlag) == 2);
}

TEST_CASE("dates") {
  const Day d = parse_day("2023-03-01");
  CHECK(format_day(d + 30) == "2023-03-31");
  CHECK(days_between(parse_day("2023-02-27"), d) == 2);
  CHECK_THROWS(parse_day("2023-02-30"));
  CHECK_THROWS(parse_day("03/01/2023"));
}

TEST_CASE("record validation") {
  auto m = fx::moderation("p", fx::day("2023-03-01"));
  CHECK_NOTHROW(validate(m));
  m.actions = {};
  CHECK_THROWS(validate(m));

  MatchDayRecord idle{"p", fx::day("2023-03-01"), 0, std::nullopt};
  CHECK_NOTHROW(validate(idle));
  idle.stats = fx::stats();
  CHECK_THROWS(validate(idle));
  auto busy = fx::played("p", fx::day("2023-03-01"), 2);
  CHECK_NOTHROW(validate(busy));
  busy.stats.reset();
  CHECK_THROWS(validate(busy));
}
