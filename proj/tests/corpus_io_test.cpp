#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace xlnbt {
namespace {

using testing::TempDir;

const std::filesystem::path kData = XLNBT_TEST_DATA;

std::vector<std::string> tokens(std::string_view text) { return tokenize(text).tokens; }

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokens("I want Chinese food."), (std::vector<std::string>{"i", "want", "chinese", "food", "."}));
}

TEST(Tokenize, ApostropheStartsToken) {
  EXPECT_EQ(tokens("What's the phone?"), (std::vector<std::string>{"what", "'s", "the", "phone", "?"}));
}

TEST(Tokenize, EmptyOrWhitespaceRejected) {
  EXPECT_THROW(tokenize(""), Error);
  EXPECT_THROW(tokenize("  \t "), Error);
}

TEST(Tokenize, LengthBoundErrorsDropsOrTruncates) {
  std::string text;
  for (int i = 0; i < 45; ++i) text += "w" + std::to_string(i) + " ";
  EXPECT_THROW(tokenize_bounded(text, 40, LengthPolicy::Error), Error);
  EXPECT_FALSE(tokenize_bounded(text, 40, LengthPolicy::Drop).has_value());
  EXPECT_EQ(tokenize_bounded(text, 40, LengthPolicy::Truncate)->size(), 40u);
  EXPECT_EQ(tokenize_bounded("short one", 40, LengthPolicy::Error)->size(), 2u);
}

TEST(Embeddings, TwoValidLines) {
  TempDir dir("emb");
  const auto r = load_embeddings(dir.write("e.txt", "a 1 2 3\nb 4 5 6\n"));
  EXPECT_EQ(r.table.size(), 2u);
  EXPECT_EQ(r.table.dim(), 3u);
  EXPECT_EQ(*r.table.find("b"), (std::vector<double>{4, 5, 6}));
  EXPECT_EQ(r.malformed_lines, 0u);
}

TEST(Embeddings, ShortLineSkippedAndCounted) {
  TempDir dir("emb");
  std::string good = "good";
  std::string bad = "bad";
  for (int i = 0; i < 300; ++i) good += " 0.5";
  for (int i = 0; i < 299; ++i) bad += " 0.5";
  const auto r = load_embeddings(dir.write("e.txt", good + "\n" + bad + "\n"), 300);
  EXPECT_EQ(r.table.size(), 1u);
  EXPECT_TRUE(r.table.contains("good"));
  EXPECT_EQ(r.malformed_lines, 1u);
}

TEST(Embeddings, HeaderLineAccepted) {
  TempDir dir("emb");
  const auto r = load_embeddings(dir.write("e.txt", "2 2\nx 1 0\ny 0 1\n"));
  EXPECT_EQ(r.table.size(), 2u);
  EXPECT_EQ(r.malformed_lines, 0u);
}

TEST(Embeddings, UnreadableOrEmptyFileThrows) {
  TempDir dir("emb");
  EXPECT_THROW(load_embeddings(dir / "missing.txt"), Error);
  EXPECT_THROW(load_embeddings(dir.write("e.txt", "a b c\n")), Error);
}

TEST(Embeddings, AbsentWordIsZeroWithOovFlag) {
  EmbeddingTable t(3);
  t.insert("a", {1, 2, 3});
  const Lookup l = t.lookup("zzz");
  EXPECT_TRUE(l.oov);
  EXPECT_EQ(l.vector, (std::vector<double>{0, 0, 0}));
  EXPECT_FALSE(t.lookup("a").oov);
}

TEST(Embeddings, RandomOovPolicyIsFixedPerWord) {
  EmbeddingTable t(4, OovPolicy::Random, 11);
  const auto a = t.lookup("unknown");
  EXPECT_TRUE(a.oov);
  EXPECT_EQ(a.vector, t.lookup("unknown").vector);
  EXPECT_NE(a.vector, t.lookup("other").vector);
}

TEST(Embeddings, SaveLoadRoundTrip) {
  TempDir dir("emb");
  const EmbeddingTable t = testing::random_table({"a", "b", "c"}, 5, 3);
  save_embeddings(dir / "e.txt", t);
  const EmbeddingTable back = load_embeddings(dir / "e.txt").table;
  for (const auto& w : t.words()) EXPECT_EQ(*back.find(w), *t.find(w));
}

TEST(EmbedTerm, SingleWordIsItsVector) {
  EmbeddingTable t(2);
  t.insert("north", {1, 2});
  const auto e = embed_term("north", t);
  EXPECT_EQ(e.vector, (std::vector<double>{1, 2}));
  EXPECT_FALSE(e.oov);
}

TEST(EmbedTerm, MultiWordTermIsSum) {
  EmbeddingTable t(2);
  t.insert("north", {1, 2});
  t.insert("european", {10, -5});
  EXPECT_EQ(embed_term("north european", t).vector, (std::vector<double>{11, -3}));
}

TEST(EmbedTerm, AllOovIsZeroWithFlag) {
  EmbeddingTable t(2);
  t.insert("north", {1, 2});
  const auto e = embed_term("xx yy", t);
  EXPECT_TRUE(e.oov);
  EXPECT_EQ(e.oov_tokens, 2u);
  EXPECT_EQ(e.vector, (std::vector<double>{0, 0}));
}

TEST(EmbedTerm, Additive) {
  const EmbeddingTable t = testing::random_table(testing::small_vocabulary(), 6, 8);
  const auto ab = embed_term("north american food", t).vector;
  const auto a = embed_term("north", t).vector;
  const auto b = embed_term("american food", t).vector;
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(ab[i], a[i] + b[i], 1e-15);
}

TEST(Dialogs, TwoTurnFixture) {
  const Ontology o = load_ontology(kData / "ontology.json");
  const auto d = load_dialogs(kData / "two_turn_dialog.json", o);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].id, 4);
  ASSERT_EQ(d[0].turns.size(), 2u);
  const auto& t1 = d[0].turns[0];
  const auto& t2 = d[0].turns[1];
  EXPECT_EQ(t1.utterance.tokens, (std::vector<std::string>{"i", "want", "chinese", "food", "in", "the", "north", "."}));
  EXPECT_EQ(t1.gold, testing::goals({{"food", "chinese"}, {"area", "north"}}));
  EXPECT_EQ(t2.gold, testing::goals({{"food", "indian"}, {"area", "north"}}, {"phone"}));
  EXPECT_EQ(t2.system_acts.confirm_slot, "food");
  EXPECT_FALSE(t2.system_acts.request);
  // The unchanged slot is carried; the changed slot is the turn's only delta.
  EXPECT_EQ(t2.gold.goal("area"), t1.gold.goal("area"));
  const auto changes = goal_changes(t1.gold, t2.gold);
  ASSERT_EQ(changes.size(), 1u);
  EXPECT_EQ(changes.at("food"), "indian");
}

TEST(Dialogs, ValueOutsideOntologyNamesTurn) {
  const Ontology o = testing::small_ontology();
  auto j = nlohmann::ordered_json::parse(testing::read_file(kData / "two_turn_dialog.json"));
  j[0]["turns"][1]["belief_state"]["food"] = "martian";
  try {
    parse_dialogs(j, o);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("turn 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("martian"), std::string::npos) << msg;
  }
}

TEST(Dialogs, MissingFieldRejected) {
  auto j = nlohmann::ordered_json::parse(testing::read_file(kData / "two_turn_dialog.json"));
  j[0]["turns"][0].erase("transcript");
  EXPECT_THROW(parse_dialogs(j, testing::small_ontology()), Error);
}

TEST(Dialogs, EmptyListGivesEmptyResult) {
  TempDir dir("dlg");
  EXPECT_TRUE(load_dialogs(dir.write("d.json", "[]"), testing::small_ontology()).empty());
}

TEST(Dialogs, SerializeThenReloadIsEqual) {
  TempDir dir("dlg");
  const Ontology o = load_ontology(kData / "ontology.json");
  const auto d = load_dialogs(kData / "two_turn_dialog.json", o);
  save_dialogs(dir / "out.json", d);
  EXPECT_EQ(load_dialogs(dir / "out.json", o), d);
}

TEST(Ontology, ParseValidateAndRoundTrip) {
  TempDir dir("ont");
  const Ontology o = load_ontology(kData / "ontology.json");
  EXPECT_EQ(o, testing::small_ontology());
  save_ontology(dir / "o.json", o);
  EXPECT_EQ(load_ontology(dir / "o.json"), o);
  EXPECT_EQ(o.pair_count(), 7u);
  Ontology dup = o;
  dup.informable[0].values.push_back("chinese");
  EXPECT_THROW(dup.validate(), Error);
}

TEST(Dictionary, CandidatesKeepOrder) {
  TempDir dir("dict");
  const auto d = load_dictionary(dir.write("d.tsv", "food\tessen|nahrung\nphone\ttelefon\n"));
  EXPECT_EQ(*d.candidates("food"), (std::vector<std::string>{"essen", "nahrung"}));
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.candidates("absent"), nullptr);
}

TEST(Dictionary, DuplicatesCollapsedAndEmptyEntriesRejected) {
  TempDir dir("dict");
  const auto d = load_dictionary(dir.write("d.tsv", "food\tessen|nahrung|essen\nfood\tspeise\n"));
  EXPECT_EQ(*d.candidates("food"), (std::vector<std::string>{"essen", "nahrung", "speise"}));
  EXPECT_THROW(load_dictionary(dir.write("e.tsv", "food\t\n")), Error);
}

TEST(Parallel, ThreeWordPairFiltered) {
  TempDir dir("par");
  const auto c = load_parallel(dir.write("e.txt", "one two three\ni want chinese food\n"),
                               dir.write("f.txt", "eins zwei drei\nich will chinesisches essen\n"));
  ASSERT_EQ(c.pairs.size(), 1u);
  EXPECT_EQ(c.filtered, 1u);
  EXPECT_EQ(c.pairs[0].first.size(), 4u);
}

TEST(Parallel, UnequalLineCountsRejected) {
  TempDir dir("par");
  EXPECT_THROW(load_parallel(dir.write("e.txt", "a b c d\ne f g h\n"), dir.write("f.txt", "a b c d\n")), Error);
}

TEST(Mapping, TranslatesThroughConcepts) {
  TempDir dir("map");
  const auto m = load_mapping(dir.write("m.tsv", "FOOD\ten\tfood\nFOOD\tde\tessen\nFOOD\tit\tcibo\n"));
  EXPECT_EQ(m.translate("food", "en", "de"), "essen");
  EXPECT_EQ(m.concept_of("it", "cibo"), "FOOD");
  EXPECT_THROW(m.translate("phone", "en", "de"), Error);
  OntologyMapping bad;
  bad.add("FOOD", "en", "food");
  EXPECT_THROW(bad.add("AREA", "en", "food"), Error);
}

}  // namespace
}  // namespace xlnbt
