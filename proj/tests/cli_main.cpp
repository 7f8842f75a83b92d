#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mcflab/mesh_io.hpp"
#include "mcflab/primitives.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "mcflab_cli_tests";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Runs the tool in the work directory; stderr goes to err.txt.
int run(const std::string& args) {
    std::string cmd = "cd '" + kWork.string() + "' && '" MCFLAB_CLI "' " + args + " >out.txt 2>err.txt";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json manifest(const std::string& dir) { return json::parse(slurp(kWork / dir / "manifest.json")); }

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        mcf::save_obj(mcf::icosphere(2, 1.0), kWork / "sphere.obj");
    }
    void TearDown() override { unsetenv("MCFLAB_DT"); }
};

}  // namespace

TEST_F(Cli, LogProfileMatchesExponentialIntegral) {
    ASSERT_EQ(run("kernel --check log-profile --r 1e-3 --out k"), 0);
    json j = json::parse(slurp(kWork / "k" / "kernel.json"));
    EXPECT_EQ(j["schema_version"], 1);
    // Static point, unit Lebesgue time: U = E1(r^2/4) / 4 pi, Phi = log(1/r) / 2 pi.
    double r = 1e-3;
    double ratio = -std::expint(-r * r / 4) / (4 * M_PI) / (std::log(1 / r) / (2 * M_PI));
    EXPECT_NEAR(j["ratio"].get<double>(), ratio, 1e-12);
    EXPECT_FALSE(j["pass"].get<bool>());
}

TEST_F(Cli, FlagsOverrideEnvironmentOverrideFile) {
    std::ofstream(kWork / "c.cfg") << "dt = 1e-3  # file\nremesh = false\nstop.max_steps = 2\n";
    ASSERT_EQ(run("--config c.cfg evolve --mesh sphere.obj --out a"), 0);
    EXPECT_EQ(manifest("a")["config"]["dt"], "1e-3");
    setenv("MCFLAB_DT", "5e-4", 1);
    ASSERT_EQ(run("--config c.cfg evolve --mesh sphere.obj --out b"), 0);
    EXPECT_EQ(manifest("b")["config"]["dt"], "5e-4");
    ASSERT_EQ(run("--config c.cfg evolve --mesh sphere.obj --out c --dt 2e-4"), 0);
    json m = manifest("c");
    EXPECT_EQ(m["config"]["dt"], "2e-4");
    EXPECT_EQ(m["config"]["stop.max_steps"], "2");
    // Trace rows at t = 0, dt, 2 dt.
    std::string trace = slurp(kWork / "c" / "trace.csv");
    EXPECT_NE(trace.find("\n0.0004,"), std::string::npos);
}

TEST_F(Cli, ManifestListsExistingOutputsAndHashes) {
    ASSERT_EQ(run("evolve --mesh sphere.obj --out e --stop-max-steps 4 --checkpoint-every 2 --remesh false"), 0);
    json m = manifest("e");
    EXPECT_EQ(m["schema_version"], 1);
    EXPECT_EQ(m["command"], "evolve");
    EXPECT_EQ(m["status"], "ok");
    EXPECT_GE(m["outputs"].size(), 5u);
    for (const auto& p : m["outputs"]) EXPECT_TRUE(fs::exists(kWork / p.get<std::string>())) << p;
    EXPECT_EQ(m["inputs"][0]["fnv1a64"].get<std::string>().size(), 16u);
    EXPECT_TRUE(m["wall_time_s"].is_number());
}

TEST_F(Cli, StageErrorsGiveNonzeroExitAndStageName) {
    EXPECT_EQ(run("kernel --check nonsense --out x"), 2);
    EXPECT_NE(slurp(kWork / "err.txt").find("stage 'kernel'"), std::string::npos);
    json m = manifest("x");
    EXPECT_EQ(m["status"], "error");
    EXPECT_EQ(m["error"]["stage"], "kernel");

    std::ofstream(kWork / "bad.cfg") << "no_such_key = 1\n";
    EXPECT_EQ(run("--config bad.cfg kernel --out y"), 2);
    EXPECT_EQ(manifest("y")["error"]["stage"], "config");

    EXPECT_NE(run("kernel --no-such-flag 1"), 0);
    EXPECT_NE(run("evolve --mesh missing.obj"), 0);
    EXPECT_NE(run("frobnicate"), 0);
}

TEST_F(Cli, SameSeedSameBytes) {
    for (const char* d : {"h1", "h2"})
        ASSERT_EQ(run(std::string("harnack --cases 7 --seed 9 --out ") + d), 0);
    EXPECT_EQ(slurp(kWork / "h1" / "harnack.csv"), slurp(kWork / "h2" / "harnack.csv"));
    EXPECT_EQ(slurp(kWork / "h1" / "harnack.json"), slurp(kWork / "h2" / "harnack.json"));
    ASSERT_EQ(run("harnack --cases 7 --seed 10 --out h3"), 0);
    EXPECT_NE(slurp(kWork / "h1" / "harnack.json"), slurp(kWork / "h3" / "harnack.json"));
}
