#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcflab/acceptance.hpp"
#include "mcflab/decomposition.hpp"
#include "mcflab/error.hpp"
#include "mcflab/flow.hpp"
#include "mcflab/harnack.hpp"
#include "mcflab/mesh_io.hpp"
#include "mcflab/sheets.hpp"
#include "mcflab/shrinker.hpp"
#include "mcflab/singular_kernel.hpp"
#include "mcflab/stability.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mcf;

namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kEnvPrefix = "MCFLAB_";

struct Param {
    std::string key;
    std::string value;  // built-in default; empty means unset
    std::string help;
    std::optional<std::string> flag;
};

// State of one invocation, shared by the subcommand bodies.
struct Run {
    std::string command;
    std::map<std::string, std::string> cfg;
    fs::path out;
    std::mt19937_64 rng;
    std::string stage = "setup";
    json inputs = json::array();
    std::vector<fs::path> outputs;
    json tallies = json::object();
    int exit_code = 0;

    const std::string& get(const std::string& key) const { return cfg.at(key); }
    double num(const std::string& key) const {
        try {
            return std::stod(get(key));
        } catch (const std::exception&) {
            fail(ErrorCode::Parse, "config key '" + key + "' is not a number: " + get(key));
        }
    }
    int integer(const std::string& key) const { return static_cast<int>(num(key)); }

    void write(const std::string& name, const std::string& text) {
        fs::path p = out / name;
        fs::create_directories(p.parent_path());
        std::ofstream f(p, std::ios::binary);
        f << text;
        require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + p.string());
        outputs.push_back(p);
    }
    void write_json(const std::string& name, json j) {
        json head;
        head["schema_version"] = kSchemaVersion;
        head.update(j);
        write(name, head.dump(2) + "\n");
    }
};

std::string fnv1a64(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot read " + p.string());
    std::uint64_t h = 14695981039346656037ull;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

TriMesh load_input(Run& run, const std::string& path) {
    run.stage = "load " + path;
    run.inputs.push_back({{"path", path}, {"fnv1a64", fnv1a64(path)}});
    BuildOptions o;
    o.allow_multi = run.get("allow_multi") == "true";
    return load_mesh(path, o);
}

std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::map<std::string, std::string> read_config(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot read config " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        auto eq = line.find('=');
        require(eq != std::string::npos, ErrorCode::Parse,
                path.string() + ":" + std::to_string(n) + ": expected key = value");
        std::string v = trim(line.substr(eq + 1));
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
        kv[trim(line.substr(0, eq))] = v;
    }
    return kv;
}

// stop.max_time -> MCFLAB_STOP__MAX_TIME
std::string env_name(const std::string& key) {
    std::string s = kEnvPrefix;
    for (char c : key) {
        if (c == '.') s += "__";
        else s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return s;
}

// stop.max_time -> --stop-max-time
std::string flag_name(const std::string& key) {
    std::string s = "--";
    for (char c : key) s += (c == '.' || c == '_') ? '-' : c;
    return s;
}

Vec3 parse_vec(const std::string& s) {
    Vec3 v;
    std::stringstream ss(s);
    std::string part;
    int k = 0;
    while (std::getline(ss, part, ',')) {
        require(k < 3, ErrorCode::Parse, "expected x,y,z: " + s);
        v[k++] = std::stod(part);
    }
    require(k == 3, ErrorCode::Parse, "expected x,y,z: " + s);
    return v;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(std::stod(part));
    return out;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

// ---- subcommands ----

const std::vector<std::string> kFlowKeys{
    "mode",          "scheme",         "dt",           "cfl",
    "dt_policy",     "remesh",         "remesh.min",   "remesh.max",
    "stop.max_time", "stop.max_steps", "stop.max_A",   "stop.min_area",
    "trace.every",   "selfcheck.every", "selfcheck.error", "checkpoint.every",
    "solver.tol",    "solver.max_iter", "fit.fraction"};

FlowConfig flow_config(Run& run) {
    run.stage = "config";
    FlowConfig c;
    for (const auto& k : kFlowKeys)
        if (!run.get(k).empty()) apply_flow_setting(c, k, run.get(k));
    if (c.checkpoint_every > 0) c.checkpoint_dir = (run.out / "checkpoints").string();
    c.validate();
    return c;
}

void evolve(Run& run, const std::string& mesh_path) {
    TriMesh mesh = load_input(run, mesh_path);
    FlowConfig c = flow_config(run);
    run.stage = "flow";
    TriMesh final_mesh;
    FlowTrace tr = run_flow(mesh, c, {}, &final_mesh);
    run.stage = "report";
    run.write("trace.csv", trace_csv(tr));
    run.write("final.obj", to_obj(final_mesh));
    if (c.checkpoint_every > 0) {
        std::vector<fs::path> kept;
        for (const auto& e : fs::directory_iterator(c.checkpoint_dir)) kept.push_back(e.path());
        std::sort(kept.begin(), kept.end());
        run.outputs.insert(run.outputs.end(), kept.begin(), kept.end());
    }
    json j;
    j["termination"] = tr.termination;
    j["steps"] = tr.steps;
    j["final_time"] = tr.records.empty() ? 0.0 : tr.records.back().t;
    j["remesh_events"] = tr.remesh_events;
    j["self_intersection_events"] = tr.self_intersection_events;
    j["monotonicity_violations"] = tr.monotonicity_violations;
    if (c.mode == FlowMode::MCF) {
        try {
            Extinction e = estimate_extinction(tr, c.fit_fraction);
            j["extinction"] = {{"T", e.T}, {"Lambda", e.Lambda}, {"residual", e.residual}, {"samples", e.samples}};
        } catch (const Error& e) {
            j["extinction"] = {{"error", e.what()}};
        }
    }
    run.write_json("evolve.json", j);
    run.tallies = {{"steps", tr.steps}, {"records", tr.records.size()}};
}

void rescale(Run& run, const std::string& mesh_path) {
    TriMesh mesh = load_input(run, mesh_path);
    run.stage = "rescale";
    Vec3 x0 = parse_vec(run.get("x0"));
    double c = run.num("c");
    TriMesh r = tangent_rescale(mesh, x0, c);
    MeshGeometry g = compute_geometry(r);
    Residual res = shrinker_residual(r, g);
    run.stage = "report";
    run.write("rescaled.obj", to_obj(r));
    json j;
    j["x0"] = vec_json(x0);
    j["c"] = c;
    j["F"] = f_functional(r);
    j["residual"] = {{"l2", res.l2}, {"sup", res.sup}};
    run.write_json("rescale.json", j);
}

void analyze(Run& run, const std::string& mesh_path) {
    TriMesh mesh = load_input(run, mesh_path);
    run.stage = "geometry";
    MeshGeometry g = compute_geometry(mesh);
    run.stage = "shrinker";
    Vec3 x0 = parse_vec(run.get("x0"));
    double t0 = run.num("t0");
    double F = f_functional(mesh, x0, t0);
    EntropyResult e = entropy_estimate(mesh);
    Residual res = shrinker_residual(mesh, g);
    ClassifyOptions co;
    co.delta = run.num("classify.delta");
    Classification cl = classify_flat(mesh, g, co);
    run.stage = "report";
    json j;
    j["vertices"] = mesh.num_vertices();
    j["faces"] = mesh.num_faces();
    j["area"] = mesh.total_area();
    j["F"] = {{"x0", vec_json(x0)}, {"t0", t0}, {"value", F}};
    j["entropy"] = {{"value", e.value}, {"x0", vec_json(e.x0)}, {"t0", e.t0}};
    j["residual"] = {{"l2", res.l2}, {"sup", res.sup}};
    j["classification"] = {{"shape", to_string(cl.shape)}, {"entropy", cl.entropy},
                           {"sup_H", cl.sup_H}, {"residual_sup", cl.residual_sup}};
    run.write_json("report.json", j);
}

void decompose_cmd(Run& run, const std::string& mesh_path) {
    TriMesh mesh = load_input(run, mesh_path);
    run.stage = "decompose";
    DecomposeOptions o;
    o.center = parse_vec(run.get("center"));
    BallDecomposition d = decompose(mesh, compute_geometry(mesh), run.num("eps"), run.num("R"),
                                    run.integer("res"), o);
    run.stage = "report";
    run.write("decomposition.rle", encode_rle(d));
    json j;
    j["eps"] = d.eps;
    j["R"] = d.R;
    j["res"] = d.res;
    j["voxel"] = d.voxel;
    j["center"] = vec_json(d.center);
    j["volume"] = {{"high", d.vol_high}, {"thick", d.vol_thick}, {"thin", d.vol_thin}, {"near", d.vol_near}};
    j["high_curvature_vertices"] = d.S.size();
    j["boundary_voxels"] = d.boundary_voxels;
    run.write_json("decomposition.json", j);
}

void sheets_cmd(Run& run, const std::string& target_path, const std::string& ref_path) {
    TriMesh target = load_input(run, target_path);
    TriMesh ref = load_input(run, ref_path);
    run.stage = "sheets";
    std::vector<Vec3> singular;
    std::stringstream ss(run.get("singular"));
    std::string part;
    while (std::getline(ss, part, ';'))
        if (!trim(part).empty()) singular.push_back(parse_vec(part));
    SheetBundle b = decompose_sheets(target, ref, run.num("eps"), run.num("R"), singular);
    run.stage = "report";
    run.write_json("sheets.json", json::parse(sheets_json(b)));
    run.tallies = {{"sheets", b.m}, {"dropped", b.dropped.size()}};
}

void stability_cmd(Run& run, const std::string& mesh_path) {
    TriMesh mesh = load_input(run, mesh_path);
    run.stage = "stability";
    const double R = run.num("R");
    bool flat = run.get("shape_operator") == "false";
    MeshGeometry g = compute_geometry(mesh, {!flat});
    json j;
    j["R"] = R;
    j["Q_constant"] = quadratic_form(mesh, g, std::vector<double>(mesh.num_vertices(), 1.0), R);
    Witness w = instability_witness(mesh, g, R);
    j["witness"] = {{"method", w.method}, {"Q", w.Q}, {"unstable", w.Q < 0}};
    if (run.get("rayleigh") == "true") {
        RayleighResult rr = min_rayleigh(mesh, g, R);
        j["min_rayleigh"] = {{"lambda", rr.lambda}, {"iterations", rr.iterations}};
    }
    run.stage = "report";
    run.write_json("stability.json", j);
    run.tallies = {{"unstable", w.Q < 0}};
}

void kernel_cmd(Run& run) {
    run.stage = "kernel";
    const std::string check = run.get("check");
    json j;
    j["check"] = check;
    if (check == "log-profile") {
        HeatKernelModel m;
        auto c = SingularCurve::stationary(m, Vec3::Zero(), 0, 1);
        double r = run.num("r");
        require(r > 0 && r < 1, ErrorCode::InvalidArgument, "r must lie in (0,1)");
        double U = singular_potential_U(m, c, MeasureSamples::lebesgue(0, 1), Vec3(r, 0, 0), 1, 0);
        double phi = std::log(1 / r) / (2 * kPi);
        j["r"] = r;
        j["U"] = U;
        j["Phi"] = phi;
        j["ratio"] = U / phi;
        j["tolerance"] = 0.03;
        j["pass"] = std::abs(U / phi - 1) <= 0.03;
    } else if (check == "parametrix") {
        HeatKernelModel m;
        m.surface = SurfaceKind::Sphere;
        json rows = json::array();
        double prev = 0.0;
        for (double t : parse_list(run.get("t"))) {
            double e = 0.0;
            for (int i = 0; i <= 50; ++i) {
                double d = 0.5 * i / 50;
                Vec3 y(std::sin(d), 0.0, std::cos(d));
                e = std::max(e, std::abs(spectral_kernel(m, Vec3::UnitZ(), y, t) -
                                         parametrix_eval(m, Vec3::UnitZ(), y, t, 1).value));
            }
            json row{{"t", t}, {"sup_error", e}};
            if (prev > 0) row["ratio"] = e / prev;
            rows.push_back(row);
            prev = e;
        }
        j["order"] = 1;
        j["rows"] = rows;
    } else {
        fail(ErrorCode::InvalidArgument, "unknown kernel check '" + check + "' (log-profile, parametrix)");
    }
    run.stage = "report";
    run.write_json("kernel.json", j);
}

void harnack_cmd(Run& run) {
    run.stage = "harnack";
    unsigned seed = static_cast<unsigned>(run.rng() % 1000000007);
    auto suite = harnack_suite(seed, run.integer("cases"));
    std::string csv = "family,chained,quotient,bound,worst_pair_ratio,max_residual,pass\n";
    int violations = 0;
    char buf[256];
    for (const auto& c : suite) {
        HarnackReport h = run_case(c);
        violations += !h.pass;
        std::snprintf(buf, sizeof buf, "%s,%d,%.10g,%.10g,%.10g,%.10g,%d\n", c.family.c_str(),
                      c.chained ? 1 : 0, h.quotient, h.bound, h.worst_pair_ratio, h.max_residual,
                      h.pass ? 1 : 0);
        csv += buf;
    }
    run.stage = "report";
    run.write("harnack.csv", csv);
    run.write_json("harnack.json", {{"suite_seed", seed}, {"C", kLiYauC}, {"cases", suite.size()},
                                    {"violations", violations}});
    run.tallies = {{"passed", static_cast<int>(suite.size()) - violations}, {"failed", violations}};
}

void verify_all_cmd(Run& run) {
    run.stage = "verify-all";
    require(run.get("suite") == "desk", ErrorCode::InvalidArgument,
            "unknown suite '" + run.get("suite") + "' (desk)");
    AcceptanceOptions o;
    o.seed = static_cast<std::uint64_t>(run.num("seed"));
    VerifyAll v = verify_all(o, run.out, run.get("rerun") != "false");
    std::cout << acceptance_table(v.run.results);
    for (const auto& p : v.outputs) run.outputs.push_back(p);
    int failed = 0;
    for (const auto& r : v.run.results) failed += !r.pass;
    run.tallies = {{"passed", static_cast<int>(v.run.results.size()) - failed}, {"failed", failed}};
    run.exit_code = v.all_pass ? 0 : 1;
}

struct Command {
    std::string name, help;
    std::vector<Param> params;
    CLI::App* app = nullptr;
    std::map<std::string, std::string> files;  // --mesh etc.
    std::function<void(Run&, Command&)> body;
};

void write_manifest(Run& run, double seconds, const std::string& status, const std::string& error) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = run.command;
    j["config"] = run.cfg;
    j["inputs"] = run.inputs;
    json outs = json::array();
    for (const auto& p : run.outputs) outs.push_back(p.string());
    j["outputs"] = outs;
    j["wall_time_s"] = seconds;
    j["tallies"] = run.tallies;
    j["status"] = status;
    if (!error.empty()) j["error"] = {{"stage", run.stage}, {"message", error}};
    fs::create_directories(run.out);
    std::ofstream f(run.out / "manifest.json");
    f << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mcflab: mean curvature flow laboratory"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);

    std::vector<Param> common{{"seed", "2024", "RNG seed"}, {"out", "out", "output directory"}};
    std::vector<Command> cmds;
    auto add = [&](std::string name, std::string help, std::vector<Param> params,
                   std::vector<std::string> files, std::function<void(Run&, Command&)> body) {
        Command c{name, help, common, nullptr, {}, body};
        for (auto& p : params) c.params.push_back(p);
        for (auto& f : files) c.files[f] = "";
        if (!files.empty()) c.params.push_back({"allow_multi", "false", "accept several components"});
        cmds.push_back(std::move(c));
    };

    std::vector<Param> flow;
    for (const auto& k : kFlowKeys) flow.push_back({k, "", "flow setting " + k});
    add("evolve", "run MCF or RMCF from a mesh", flow, {"mesh"},
        [](Run& r, Command& c) { evolve(r, c.files["mesh"]); });
    add("rescale", "tangent-flow rescaling c (M - x0)",
        {{"x0", "0,0,0", "centre"}, {"c", "1", "scale factor"}}, {"mesh"},
        [](Run& r, Command& c) { rescale(r, c.files["mesh"]); });
    add("analyze", "F, entropy, shrinker residual, classification",
        {{"x0", "0,0,0", "F centre"}, {"t0", "1", "F scale"}, {"classify.delta", "0.05", "entropy gap"}},
        {"mesh"}, [](Run& r, Command& c) { analyze(r, c.files["mesh"]); });
    add("decompose", "thick/thin voxel decomposition of a ball",
        {{"eps", "0.1", "clearance"}, {"R", "1", "ball radius"}, {"res", "32", "voxels per side"},
         {"center", "0,0,0", "ball centre"}},
        {"mesh"}, [](Run& r, Command& c) { decompose_cmd(r, c.files["mesh"]); });
    add("sheets", "sheet decomposition over a reference surface",
        {{"eps", "0.05", "excluded radius around singular points"}, {"R", "1", "ball radius"},
         {"singular", "", "points x,y,z;x,y,z"}},
        {"target", "reference"},
        [](Run& r, Command& c) { sheets_cmd(r, c.files["target"], c.files["reference"]); });
    add("stability", "L-stability quadratic form and instability witness",
        {{"R", "8", "support radius"}, {"rayleigh", "false", "also run min_rayleigh"},
         {"shape_operator", "true", "false on meshes with boundary"}},
        {"mesh"}, [](Run& r, Command& c) { stability_cmd(r, c.files["mesh"]); });
    add("kernel", "heat kernel and singular potential checks",
        {{"check", "log-profile", "log-profile or parametrix"}, {"r", "1e-3", "distance to the curve"},
         {"t", "0.04,0.02,0.01", "parametrix times"}},
        {}, [](Run& r, Command&) { kernel_cmd(r); });
    add("harnack", "randomised Li-Yau suite on the torus and sphere",
        {{"cases", "70", "number of cases"}}, {}, [](Run& r, Command&) { harnack_cmd(r); });
    add("verify-all", "run every acceptance criterion",
        {{"suite", "desk", "suite name"}, {"rerun", "true", "second pass for determinism"}}, {},
        [](Run& r, Command&) { verify_all_cmd(r); });

    for (auto& c : cmds) {
        c.app = app.add_subcommand(c.name, c.help);
        for (auto& [name, path] : c.files)
            c.app->add_option("--" + name, path, name + " mesh (OBJ or PLY)")->required()->check(CLI::ExistingFile);
        for (auto& p : c.params)
            c.app->add_option(flag_name(p.key), p.flag, p.help + " [" + env_name(p.key) + "]");
    }
    CLI11_PARSE(app, argc, argv);

    Command* cmd = nullptr;
    for (auto& c : cmds)
        if (c.app->parsed()) cmd = &c;

    Run run;
    run.command = cmd->name;
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    try {
        run.stage = "config";
        std::map<std::string, std::string> file;
        if (!config_path.empty()) {
            file = read_config(config_path);
            run.inputs.push_back({{"path", config_path}, {"fnv1a64", fnv1a64(config_path)}});
        }
        for (auto& p : cmd->params) {
            std::string v = p.value;
            if (auto it = file.find(p.key); it != file.end()) {
                v = it->second;
                file.erase(it);
            }
            if (const char* e = std::getenv(env_name(p.key).c_str())) v = e;
            if (p.flag) v = *p.flag;
            run.cfg[p.key] = v;
        }
        run.out = run.get("out");
        if (!file.empty()) {
            run.cfg.clear();
            fail(ErrorCode::Parse, "unknown config key '" + file.begin()->first + "' for " + cmd->name);
        }
        run.rng.seed(static_cast<std::uint64_t>(run.num("seed")));
        cmd->body(run, *cmd);
    } catch (const std::exception& e) {
        if (run.out.empty()) run.out = "out";
        std::cerr << "mcflab " << cmd->name << ": stage '" << run.stage << "' failed: " << e.what() << "\n";
        write_manifest(run, elapsed(), "error", e.what());
        return 2;
    }
    write_manifest(run, elapsed(), run.exit_code == 0 ? "ok" : "failed", "");
    return run.exit_code;
}
