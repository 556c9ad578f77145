#include <gtest/gtest.h>

#include <random>

#include "kgmatch/alignment_io.hpp"
#include "oracles.hpp"

using namespace kgmatch;

namespace {

std::string doc(const std::string& cells) {
  return "<?xml version=\"1.0\"?>\n<rdf:RDF xmlns=\"http://knowledgeweb.semanticweb.org/heterogeneity/alignment\" "
         "xmlns:rdf=\"http://www.w3.org/1999/02/22-rdf-syntax-ns#\">\n<Alignment>\n" +
         cells + "</Alignment>\n</rdf:RDF>\n";
}

std::string cell(const std::string& a, const std::string& b, const std::string& extra) {
  return "<map><Cell><entity1 rdf:resource=\"" + a + "\"/><entity2 rdf:resource=\"" + b + "\"/>" + extra + "</Cell></map>\n";
}

}  // namespace

TEST(AlignmentFormat, SingleCell) {
  auto a = parse_alignment(doc(cell("http://a#x", "http://b#y", "<relation>=</relation><measure>0.75</measure>")));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_DOUBLE_EQ(a.find(Iri("http://a#x"), Iri("http://b#y"))->confidence, 0.75);
}

TEST(AlignmentFormat, MissingMeasureMeansOne) {
  auto a = parse_alignment(doc(cell("http://a#x", "http://b#y", "<relation>=</relation>")));
  EXPECT_DOUBLE_EQ(a.find(Iri("http://a#x"), Iri("http://b#y"))->confidence, 1.0);
}

TEST(AlignmentFormat, NonEquivalenceSkippedWithWarning) {
  std::vector<std::string> warnings;
  auto a = parse_alignment(doc(cell("http://a#x", "http://b#y", "<relation>&lt;</relation>") +
                               cell("http://a#p", "http://b#q", "<relation>=</relation>")),
                           &warnings);
  EXPECT_EQ(a.size(), 1u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("'<'"), std::string::npos);
}

TEST(AlignmentFormat, MalformedInputsRejected) {
  EXPECT_THROW(parse_alignment("<rdf:RDF"), ParseError);
  EXPECT_THROW(parse_alignment("<root/>"), ParseError);
  EXPECT_THROW(parse_alignment(doc(cell("http://a#x", "http://b#y", "<measure>high</measure>"))), ParseError);
  EXPECT_THROW(parse_alignment(doc(cell("http://a#x", "http://b#y", "<measure>1.5</measure>"))), ParseError);
  EXPECT_THROW(read_alignment("/nonexistent/alignment.rdf"), IoError);
}

TEST(AlignmentFormat, EmptyRoundTrip) {
  Alignment empty;
  auto xml = to_alignment_xml(empty);
  EXPECT_TRUE(parse_alignment(xml).empty());
  EXPECT_NE(xml.find("<Alignment>"), std::string::npos);
}

TEST(AlignmentFormat, ReferenceFixture) {
  auto ref = read_alignment(oracle::data("anatomy-mini-reference.rdf"));
  EXPECT_EQ(ref.size(), 9u);
  EXPECT_TRUE(ref.contains(Iri("http://mouse.owl#MA_0000005"), Iri("http://human.owl#Pancreas")));
}

TEST(AlignmentFormat, OutputSortedAndByteIdentical) {
  Alignment a;
  a.add(Iri("http://z#1"), Iri("http://t#1"), 0.3);
  a.add(Iri("http://a#2"), Iri("http://t#9"), 0.6);
  a.add(Iri("http://a#2"), Iri("http://t#1"), 0.1);
  auto xml = to_alignment_xml(a);
  EXPECT_EQ(xml, to_alignment_xml(parse_alignment(xml)));
  auto p1 = xml.find("http://a#2\"/>\n      <entity2 rdf:resource=\"http://t#1");
  auto p2 = xml.find("http://t#9");
  auto p3 = xml.find("http://z#1");
  EXPECT_LT(p1, p2);
  EXPECT_LT(p2, p3);
}

TEST(AlignmentFormat, RandomRoundTrips) {
  std::mt19937 rng(29);
  for (int i = 0; i < 50; ++i) {
    auto a = oracle::random_alignment(rng);
    auto back = parse_alignment(to_alignment_xml(a));
    EXPECT_TRUE(back.same_correspondences(a)) << i;
  }
}

TEST(Evaluate, HandCountedFixtures) {
  for (const auto& f : oracle::eval_fixtures()) {
    auto [system, reference] = oracle::realize(f);
    auto r = evaluate(system, reference);
    EXPECT_NEAR(r.precision, f.precision, 1e-12) << f.system << "/" << f.reference << "/" << f.correct;
    EXPECT_NEAR(r.recall, f.recall, 1e-12);
    EXPECT_NEAR(r.f1, f.f1, 1e-12);
    EXPECT_EQ(r.correct, static_cast<std::size_t>(f.correct));
  }
}

TEST(Evaluate, Invariants) {
  std::mt19937 rng(31);
  for (int i = 0; i < 100; ++i) {
    auto s = oracle::random_alignment(rng, 10);
    auto r = oracle::random_alignment(rng, 10);
    auto e = evaluate(s, r);
    for (double v : {e.precision, e.recall, e.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(e.f1, std::max(e.precision, e.recall) + 1e-12);
    EXPECT_GE(e.f1, std::min(e.precision, e.recall) - 1e-12);
    auto self = evaluate(r, r);
    EXPECT_DOUBLE_EQ(self.f1, 1.0);
  }
}

TEST(Evaluate, ConfidencesIgnored) {
  Alignment s, r;
  s.add(Iri("http://a#1"), Iri("http://b#1"), 0.01);
  r.add(Iri("http://a#1"), Iri("http://b#1"), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(s, r).f1, 1.0);
}

TEST(Evaluate, RowFormatting) {
  auto [s, r] = oracle::realize(oracle::eval_fixtures()[0]);
  EXPECT_EQ(format_eval_row(evaluate(s, r)), "0.750 0.500 0.600 4");
  EXPECT_EQ(format_hms(std::chrono::duration<double>(3725.9)), "1:02:05");
}
