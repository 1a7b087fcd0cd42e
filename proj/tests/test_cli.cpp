#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

using std::string;

namespace {

string cli_path() {
    const char* env = std::getenv("STRATARANK_CLI");
    REQUIRE_MESSAGE(env != nullptr, "STRATARANK_CLI must point at the binary");
    return env;
}

int run(const string& args, const string& out_path = "/dev/null") {
    const string cmd = cli_path() + " " + args + " > " + out_path + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

string slurp(const string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write(const string& path, const string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

const char* kSplitPlot =
    "factors: A/3, B/4\nstrata: wholeplot[A+rep]\nobservations: full rep=4\n";
const char* kBlocked =
    "factors: A/2, B/2, C/2\nstrata: block\nalias: ABC\nblocks: block=B\n"
    "observations: full rep=2\n";

}  // namespace

TEST_CASE("analyze exit codes") {
    write("/tmp/cli_sp.design", kSplitPlot);
    write("/tmp/cli_blocked.design", kBlocked);
    write("/tmp/cli_bad.design", "factors A/2\nobservations: full\n");
    write("/tmp/cli_semantic.design", "factors: A/2\nalias: AX\nobservations: full\n");

    CHECK(run("analyze /tmp/cli_sp.design") == 0);
    CHECK(run("analyze /tmp/cli_blocked.design") == 1);  // absorbed df
    CHECK(run("analyze /tmp/cli_blocked.design --allow-deficit") == 0);
    CHECK(run("analyze /tmp/cli_bad.design") == 2);       // syntax
    CHECK(run("analyze /tmp/cli_semantic.design") == 3);  // semantic
}

TEST_CASE("analyze csv carries the partition identity") {
    write("/tmp/cli_sp.design", kSplitPlot);
    REQUIRE(run("analyze /tmp/cli_sp.design --format csv", "/tmp/cli_sp.csv") == 0);
    const string csv = slurp("/tmp/cli_sp.csv");
    CHECK(csv.find("effect,stratum,df,ideal_df") == 0);
    CHECK(csv.find("___total,,47,0") != string::npos);
    CHECK(csv.find("A,wholeplot,2,2") != string::npos);
    CHECK(csv.find("___residual,wholeplot,9,") != string::npos);
    CHECK(csv.find("___residual,__residual,27,") != string::npos);
}

TEST_CASE("metrics renders the member table") {
    write("/tmp/cli_blocked.design", kBlocked);
    REQUIRE(run("metrics /tmp/cli_blocked.design --format csv", "/tmp/cli_m.csv") == 0);
    const string csv = slurp("/tmp/cli_m.csv");
    CHECK(csv.find("A,1,0,") != string::npos);
    CHECK(csv.find("B,0,1,") != string::npos);
    CHECK(csv.find("AB,0,1,") != string::npos);
    CHECK(csv.find("AC,1,0,") != string::npos);
    CHECK(csv.find("df_lost=3") != string::npos);

    write("/tmp/cli_f251.design",
          "factors: A/2, B/2, C/2, D/2, E/2\nalias: ABCDE\nobservations: full rep=1\n");
    REQUIRE(run("metrics /tmp/cli_f251.design --format csv", "/tmp/cli_m2.csv") == 0);
    CHECK(slurp("/tmp/cli_m2.csv").find("resolution=5") != string::npos);

    write("/tmp/cli_full.design", "factors: A/2, B/2\nobservations: full rep=2\n");
    REQUIRE(run("metrics /tmp/cli_full.design --format csv", "/tmp/cli_m3.csv") == 0);
    CHECK(slurp("/tmp/cli_m3.csv").find("resolution=none") != string::npos);
}

TEST_CASE("validate audits") {
    write("/tmp/cli_sp.design", kSplitPlot);
    REQUIRE(run("validate /tmp/cli_sp.design", "/tmp/cli_v.txt") == 0);
    const string text = slurp("/tmp/cli_v.txt");
    CHECK(text.find("sum_to_identity=true") != string::npos);
    CHECK(text.find("pairwise_orthogonal=true") != string::npos);
    CHECK(text.find("[M1]") != string::npos);

    // corrupted labels: a dam unit split across sires
    std::ostringstream bad;
    bad << "factors: T/2\nstrata: sire>dam\nobservations: csv\n";
    bad << "obs_id,T,sire,dam,present\n";
    int id = 0;
    for (int s = 0; s < 2; ++s)
        for (int d = 0; d < 2; ++d)
            for (int a = 0; a < 2; ++a) {
                // dam label "shared" deliberately appears under both sires
                const string dam = (d == 1) ? "shared" : ("d" + std::to_string(s));
                bad << id++ << ',' << a % 2 << ",s" << s << ',' << dam << ",1\n";
            }
    write("/tmp/cli_corrupt.design", bad.str());
    const int code = run("validate /tmp/cli_corrupt.design", "/tmp/cli_vc.txt");
    CHECK(code == 3);  // the parent-consistency validation rejects it
}

TEST_CASE("diagnose prints mechanisms") {
    write("/tmp/cli_blocked.design", kBlocked);
    REQUIRE(run("diagnose /tmp/cli_blocked.design", "/tmp/cli_d.txt") == 0);
    CHECK(slurp("/tmp/cli_d.txt").find("[M2]") != string::npos);
}

TEST_CASE("simulate and search are deterministic across thread counts") {
    write("/tmp/cli_sp.design", kSplitPlot);
    write("/tmp/cli_sim.scenario",
          "kind: split-plot\ndesign: /tmp/cli_sp.design\n"
          "sigma: wholeplot=1, residual=1\nn_reps: 120\nalpha: 0.05\n"
          "missing_rate: 0.2\nseed: 43\n");
    REQUIRE(run("simulate /tmp/cli_sim.scenario --format csv --threads 1",
                "/tmp/cli_sim1.csv") == 0);
    REQUIRE(run("simulate /tmp/cli_sim.scenario --format csv --threads 4",
                "/tmp/cli_sim4.csv") == 0);
    CHECK(slurp("/tmp/cli_sim1.csv") == slurp("/tmp/cli_sim4.csv"));

    REQUIRE(run("search --k 4 --p 1 --weights main=1 --format csv --threads 1",
                "/tmp/cli_s1.csv") == 0);
    REQUIRE(run("search --k 4 --p 1 --weights main=1 --format csv --threads 3",
                "/tmp/cli_s3.csv") == 0);
    CHECK(slurp("/tmp/cli_s1.csv") == slurp("/tmp/cli_s3.csv"));
}

TEST_CASE("search writes a parseable winner") {
    REQUIRE(run("search --k 5 --p 1 --weights main=1 --winner /tmp/cli_win.design "
                "--format csv",
                "/tmp/cli_rank.csv") == 0);
    const string ranked = slurp("/tmp/cli_rank.csv");
    CHECK(ranked.find("ABCDE") != string::npos);
    CHECK(run("analyze /tmp/cli_win.design --allow-deficit") == 0);
}
