#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <string>

#include "support.hpp"

using boxsuite::testing::read_file;
using boxsuite::testing::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const TempDir& dir, const std::string& args) {
  const std::string log = dir.file("cli.log");
  const std::string cmd = std::string(BOXSUITE_CLI) + " " + args + " > " + log + " 2>&1";
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(log);
  return r;
}

struct Fixture {
  TempDir dir{"cli"};
  std::string boxes;
  std::string ships;

  Fixture() {
    boxes = dir.write("boxes.csv", "box_id,dim1,dim2,dim3\n10,2,2,2\n11,3,3,2\n12,3,3,3\n13,4,4,3\n");
    ships = dir.write("ships.csv",
                      "shipment_id,item_id,quantity,dim1,dim2,dim3\n1,1,1,2,2,2\n2,2,1,3,2,3\n3,1,2,2,2,2\n");
  }
  std::string data() const { return "--boxes " + boxes + " --shipments " + ships; }
};

}  // namespace

TEST_CASE("help documents the subcommands and flags") {
  TempDir dir("cli");
  auto r = cli(dir, "--help");
  CHECK(r.code == 0);
  for (const char* s : {"fit", "recommend", "validate", "compare", "finetune", "fitone", "--threads"}) {
    CHECK(r.out.find(s) != std::string::npos);
  }
  auto rec = cli(dir, "recommend --help");
  CHECK(rec.code == 0);
  for (const char* s : {"--lock", "--method", "--graspit", "--elite", "--alpha", "--seed", "--cost", "--fit",
                        "--time-limit-ms", "--no-sym-identical", "--no-sym-orthant"}) {
    CHECK(rec.out.find(s) != std::string::npos);
  }
}

TEST_CASE("usage errors exit 2") {
  Fixture f;
  CHECK(cli(f.dir, "").code == 2);
  CHECK(cli(f.dir, "fit --bogus").code == 2);
  CHECK(cli(f.dir, "fit --boxes " + f.dir.file("missing.csv") + " --shipments " + f.ships + " --out x").code == 2);
  auto locks = cli(f.dir, "recommend " + f.data() + " -p 2 --lock 10,11 --out " + f.dir.file("o"));
  CHECK(locks.code == 2);
  CHECK(locks.out.find("locked") != std::string::npos);
  CHECK(cli(f.dir, "recommend " + f.data() + " -p 2 --method simplex --out " + f.dir.file("o")).code == 2);
  auto bad = f.dir.write("bad.csv", "1,2,0,4\n");
  CHECK(cli(f.dir, "fit --boxes " + bad + " --shipments " + f.ships + " --out " + f.dir.file("f.csv")).code == 2);
}

TEST_CASE("fit writes the matrix, manifest and timeouts") {
  Fixture f;
  auto out = f.dir.file("fit.csv");
  auto r = cli(f.dir, "fit " + f.data() + " --out " + out);
  REQUIRE(r.code == 0);
  CHECK(read_file(out) ==
        "shipment_id,box_id\n1,10\n1,11\n1,12\n1,13\n2,11\n2,12\n2,13\n3,13\n");
  auto m = nlohmann::json::parse(read_file(out + ".manifest.json"));
  CHECK(m["packable"].get<int>() == 3);
  CHECK(read_file(out + ".timeouts.csv").rfind("shipment_id,box_id", 0) == 0);
}

TEST_CASE("a forced timeout is recorded and the bit stays clear") {
  TempDir dir("cli");
  std::string rows = "shipment_id,item_id,quantity,dim1,dim2,dim3\n";
  // Eleven bricks at ~99% fill; far beyond what a 1 ms budget can settle.
  rows += "1,1,11,3,3,2\n";
  auto ships = dir.write("s.csv", rows);
  auto boxes = dir.write("b.csv", "1,10,5,4\n");
  auto out = dir.file("fit.csv");
  auto r = cli(dir, "fit --boxes " + boxes + " --shipments " + ships + " --out " + out + " --time-limit-ms 1");
  REQUIRE(r.code == 0);
  CHECK(read_file(out) == "shipment_id,box_id\n");
  CHECK(read_file(out + ".timeouts.csv") == "shipment_id,box_id\n1,1\n");
}

TEST_CASE("recommend exact and grasp agree and locks are honored") {
  Fixture f;
  auto a = cli(f.dir, "recommend " + f.data() + " -p 2 --method exact --out " + f.dir.file("a"));
  REQUIRE(a.code == 0);
  auto b = cli(f.dir, "recommend " + f.data() + " -p 2 --method grasp --out " + f.dir.file("b"));
  REQUIRE(b.code == 0);
  auto ja = nlohmann::json::parse(read_file(f.dir.file("a/result.json")));
  auto jb = nlohmann::json::parse(read_file(f.dir.file("b/result.json")));
  CHECK(ja["suite"] == jb["suite"]);
  CHECK(ja["suite"] == nlohmann::json::array({11, 13}));
  CHECK(ja["cost"].get<double>() == 84.0);
  CHECK(read_file(f.dir.file("a/assignment.csv")) == "shipment_id,box_id\n1,11\n2,11\n3,13\n");

  auto l = cli(f.dir, "recommend " + f.data() + " -p 2 --lock 12 --method exact --out " + f.dir.file("l"));
  REQUIRE(l.code == 0);
  auto jl = nlohmann::json::parse(read_file(f.dir.file("l/result.json")));
  CHECK(jl["suite"] == nlohmann::json::array({12, 13}));

  auto fit = f.dir.file("fit.csv");
  REQUIRE(cli(f.dir, "fit " + f.data() + " --out " + fit).code == 0);
  auto c = cli(f.dir, "recommend --fit " + fit + " " + f.data() + " -p 2 --method exchange --out " + f.dir.file("c"));
  REQUIRE(c.code == 0);
  CHECK(nlohmann::json::parse(read_file(f.dir.file("c/result.json")))["suite"] == ja["suite"]);
}

TEST_CASE("recommend with lagrangian reports bound and gap") {
  Fixture f;
  auto r = cli(f.dir, "recommend " + f.data() + " -p 2 --method lagrangian --out " + f.dir.file("g"));
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(read_file(f.dir.file("g/result.json")));
  CHECK(j.contains("lower_bound"));
  CHECK(j.contains("gap"));
  CHECK(read_file(f.dir.file("g/report.txt")).find("Lower bound") != std::string::npos);
  CHECK(read_file(f.dir.file("g/bounds.log")).rfind("iteration", 0) == 0);
}

TEST_CASE("an infeasible suite size exits 0 with a message") {
  TempDir dir("cli");
  auto boxes = dir.write("b.csv", "1,5,1,1\n2,3,3,1\n3,1,1,1\n");
  auto ships = dir.write("s.csv", "1,1,1,1,1,5\n2,2,1,3,3,1\n");
  auto r = cli(dir, "recommend --boxes " + boxes + " --shipments " + ships + " -p 1 --method exact --out " +
                        dir.file("o"));
  CHECK(r.code == 0);
  CHECK(r.out.find("There is no feasible solution") != std::string::npos);
  auto j = nlohmann::json::parse(read_file(dir.file("o/result.json")));
  CHECK(j["suite"].empty());
}

TEST_CASE("validate, compare and finetune") {
  Fixture f;
  auto v = cli(f.dir, "validate --boxes " + f.boxes + " --suite 11,13 --shipments-a " + f.ships + " --shipments-b " +
                          f.ships + " --out " + f.dir.file("v"));
  REQUIRE(v.code == 0);
  CHECK(v.out.find("0 metric(s) diverge") != std::string::npos);
  CHECK(read_file(f.dir.file("v/divergences.csv")) == "box_id,metric,a,b,relative\n");

  auto cmp = f.dir.file("cmp.csv");
  auto c = cli(f.dir, "compare " + f.data() + " --suite 11,13 --suite 12,13 --suite 10,11 --out " + cmp);
  REQUIRE(c.code == 0);
  auto text = read_file(cmp);
  CHECK(text.find("suite0,11 13,84,0,1,0.000000") != std::string::npos);
  CHECK(text.find("suite2,10 11,") != std::string::npos);

  auto ft = f.dir.file("ft.csv");
  auto t = cli(f.dir, "finetune --boxes " + f.boxes + " --suite 11,13 --lock 13 --deltas -1,0,1 --out " + ft);
  REQUIRE(t.code == 0);
  auto boxes = read_file(ft);
  CHECK(boxes.find("\n13,4,4,3\n") != std::string::npos);
}

TEST_CASE("fitone picks the cheapest fitting box") {
  Fixture f;
  auto r = cli(f.dir, "fitone --shipments " + f.ships + " --shipment 3 --boxes " + f.boxes + " --witness");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("13\n", 0) == 0);
  CHECK(r.out.find("\"lbb\"") != std::string::npos);
  auto none = cli(f.dir, "fitone --shipments " + f.ships + " --shipment 3 --boxes " + f.boxes + " --suite 10,11,12");
  CHECK(none.out == "none\n");
  CHECK(cli(f.dir, "fitone --shipments " + f.ships + " --shipment 99 --boxes " + f.boxes).code == 2);
}

TEST_CASE("threads come from the environment when the flag is absent") {
  Fixture f;
  auto r = cli(f.dir, "fit " + f.data() + " --out " + f.dir.file("fit.csv"));
  REQUIRE(r.code == 0);
  const std::string cmd = "BOXSUITE_THREADS=zero " + std::string(BOXSUITE_CLI) + " fit " + f.data() + " --out " +
                          f.dir.file("x.csv") + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
