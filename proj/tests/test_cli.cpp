#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kgmatch/alignment_io.hpp"
#include "kgmatch/rdf_io.hpp"
#include "oracles.hpp"

#ifndef KGMATCH_CLI
#define KGMATCH_CLI "kgmatch"
#endif

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  auto dir = fs::temp_directory_path() / ("kgmatch-cli-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run(const std::string& args) {
  auto dir = scratch();
  auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  std::string cmd = std::string(KGMATCH_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  Run r;
  int raw = std::system(cmd.c_str());
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string toy_graphs() {
  return "--source " + oracle::data("anatomy-mini-source.ttl") + " --target " + oracle::data("anatomy-mini-target.ttl") +
         " --embedder exact";
}

std::string toy_args() { return toy_graphs() + " --script " + oracle::data("anatomy-mini-script.json"); }

}  // namespace

TEST(Cli, MatchToyProducesExpectedAlignment) {
  auto dir = scratch();
  auto out = dir / "toy.rdf";
  auto r = run("match " + toy_args() + " --reference " + oracle::data("anatomy-mini-reference.rdf") + " --out " + out.string() +
               " --report " + (dir / "report.txt").string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(out), slurp(oracle::data("anatomy-mini-expected.rdf")));
  EXPECT_NE(r.out.find("1.000 1.000 1.000 9"), std::string::npos) << r.out;
  auto report = slurp(dir / "report.txt");
  EXPECT_NE(report.find("cardinality"), std::string::npos);
  EXPECT_NE(report.find("config {"), std::string::npos);
}

TEST(Cli, MissingSourceFailsWithPath) {
  auto r = run("match --source /nonexistent/onto.ttl --target " + oracle::data("anatomy-mini-target.ttl") + " --script " +
               oracle::data("anatomy-mini-script.json"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("/nonexistent/onto.ttl"), std::string::npos) << r.err;
}

TEST(Cli, CandidateCountGrowsWithK) {
  auto dir = scratch();
  auto count = [&](int k) {
    auto r = run("candidates " + toy_graphs() + " --k " + std::to_string(k) + " --out " + (dir / "c.rdf").string());
    EXPECT_EQ(r.status, 0) << r.err;
    return kgmatch::read_alignment(dir / "c.rdf").size();
  };
  auto k3 = count(3), k5 = count(5);
  EXPECT_LE(k3, k5);
  EXPECT_GT(k3, 0u);
}

TEST(Cli, CandidatesOnIdenticalGraphsHaveFullRecall) {
  auto dir = scratch();
  auto g = kgmatch::load_graph(oracle::data("anatomy-mini-target.ttl"));
  kgmatch::Alignment identity;
  for (const auto& e : g.matchable_entities({kgmatch::EntityKind::klass, kgmatch::EntityKind::property}))
    identity.add(e, e, 1.0);
  kgmatch::write_alignment(identity, dir / "identity.rdf");
  auto r = run("candidates --source " + oracle::data("anatomy-mini-target.ttl") + " --target " +
               oracle::data("anatomy-mini-target.ttl") + " --k 1 --embedder exact --reference " +
               (dir / "identity.rdf").string() + " --out " + (dir / "k1.rdf").string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("recall 1.000"), std::string::npos) << r.out;
}

TEST(Cli, EvalRows) {
  auto dir = scratch();
  auto ref = oracle::data("anatomy-mini-reference.rdf");
  auto same = run("eval " + ref + " " + ref);
  ASSERT_EQ(same.status, 0) << same.err;
  EXPECT_NE(same.out.find("1.000 1.000 1.000 9"), std::string::npos);

  auto [system, reference] = oracle::realize(oracle::eval_fixtures()[0]);
  kgmatch::write_alignment(system, dir / "sys.rdf");
  kgmatch::write_alignment(reference, dir / "ref.rdf");
  auto partial = run("eval " + (dir / "sys.rdf").string() + " " + (dir / "ref.rdf").string());
  EXPECT_EQ(partial.out, "Prec Rec F1 Size\n0.750 0.500 0.600 4\n");

  kgmatch::write_alignment(kgmatch::Alignment{}, dir / "empty.rdf");
  auto empty = run("eval " + (dir / "empty.rdf").string() + " " + (dir / "ref.rdf").string());
  EXPECT_NE(empty.out.find("1.000 0.000 0.000 0"), std::string::npos);
}

TEST(Cli, BadFlagValueRejected) {
  auto r = run("match " + toy_args() + " --prompt 12");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("prompt"), std::string::npos) << r.err;
}
