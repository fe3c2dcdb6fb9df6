#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(SSDANN_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, EndToEnd) {
  testutil::TempDir d;
  const auto p = [&](const char* n) { return (d / n).string(); };
  ASSERT_EQ(run("gen --count 2000 --dim 16 --queries 50 --seed 3 --out " + p("b.fvecs") + " --queries-out " +
                p("q.fvecs")),
            0);
  ASSERT_EQ(run("gt --base " + p("b.fvecs") + " --queries " + p("q.fvecs") + " --ids-out " + p("gt.ivecs") +
                " --dists-out " + p("gt.fvecs")),
            0);
  ASSERT_EQ(run("build --base " + p("b.fvecs") + " --out " + p("a.idx") + " --degree 16 --seed 4"), 0);
  ASSERT_EQ(run("build --base " + p("b.fvecs") + " --out " + p("b.idx") + " --degree 16 --seed 4"), 0);
  EXPECT_EQ(bytes(d / "a.idx"), bytes(d / "b.idx"));
  EXPECT_EQ(run("search --index " + p("a.idx") + " --queries " + p("q.fvecs") + " --gt " + p("gt.ivecs") +
                " --ids-out " + p("r.ivecs") + " --trace " + p("t.csv")),
            0);
  EXPECT_TRUE(std::filesystem::exists(d / "r.ivecs"));
  EXPECT_TRUE(std::filesystem::exists(d / "t.csv"));

  std::ofstream(d / "sweep.cfg") << "queries = " << p("q.fvecs") << "\ngt = " << p("gt.ivecs") << "\nindex = "
                                  << p("a.idx") << "\nL = 10,20\noutput = " << p("sweep.csv") << "\n";
  EXPECT_EQ(run("sweep " + p("sweep.cfg")), 0);
  EXPECT_TRUE(std::filesystem::exists(d / "sweep.csv"));
  EXPECT_EQ(run("compare-io " + p("sweep.cfg")), 0);

  std::ofstream(d / "bad.cfg") << "L = 20,10\n";
  EXPECT_EQ(run("sweep " + p("bad.cfg")), 2);
  EXPECT_EQ(run("build --base " + p("missing.fvecs") + " --out " + p("c.idx")), 3);
  EXPECT_EQ(run("search --index " + p("missing.idx") + " --queries " + p("q.fvecs")), 3);
  EXPECT_EQ(run("build --base " + p("b.fvecs") + " --out " + p("c.idx") + " --degree 5000"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}
