#include "mcflab/mesh_io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mcf {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int obj_index(const std::string& token, int nv) {
    std::size_t slash = token.find('/');
    std::string head = token.substr(0, slash);
    int idx = 0;
    try {
        idx = std::stoi(head);
    } catch (const std::exception&) {
        fail(ErrorCode::Parse, "bad face token '" + token + "'");
    }
    if (idx < 0) return nv + idx;
    if (idx == 0) fail(ErrorCode::Parse, "OBJ indices are 1-based");
    return idx - 1;
}

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

std::size_t ply_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    fail(ErrorCode::Parse, "unknown PLY type " + t);
}

double ply_read_binary(const char*& p, const char* end, const std::string& t) {
    std::size_t n = ply_size(t);
    if (p + n > end) fail(ErrorCode::Parse, "truncated PLY body");
    double v = 0.0;
    if (t == "char" || t == "int8") { std::int8_t x; std::memcpy(&x, p, 1); v = x; }
    else if (t == "uchar" || t == "uint8") { std::uint8_t x; std::memcpy(&x, p, 1); v = x; }
    else if (t == "short" || t == "int16") { std::int16_t x; std::memcpy(&x, p, 2); v = x; }
    else if (t == "ushort" || t == "uint16") { std::uint16_t x; std::memcpy(&x, p, 2); v = x; }
    else if (t == "int" || t == "int32") { std::int32_t x; std::memcpy(&x, p, 4); v = x; }
    else if (t == "uint" || t == "uint32") { std::uint32_t x; std::memcpy(&x, p, 4); v = x; }
    else if (t == "float" || t == "float32") { float x; std::memcpy(&x, p, 4); v = x; }
    else { double x; std::memcpy(&x, p, 8); v = x; }
    p += n;
    return v;
}

TriMesh parse_ply(const std::string& data, const BuildOptions& opts, BuildReport* report) {
    std::size_t header_end = data.find("end_header");
    if (data.rfind("ply", 0) != 0 || header_end == std::string::npos)
        fail(ErrorCode::Parse, "missing PLY header");
    std::istringstream hs(data.substr(0, header_end));
    std::string line, format;
    std::vector<PlyElement> elems;
    while (std::getline(hs, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            ls >> format;
        } else if (word == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            elems.push_back(e);
        } else if (word == "property") {
            if (elems.empty()) fail(ErrorCode::Parse, "property before element");
            PlyProperty p;
            ls >> p.type;
            if (p.type == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type;
            }
            ls >> p.name;
            elems.back().props.push_back(p);
        }
    }
    if (format != "ascii" && format != "binary_little_endian")
        fail(ErrorCode::Parse, "unsupported PLY format " + format);

    std::size_t body = data.find('\n', header_end);
    if (body == std::string::npos) fail(ErrorCode::Parse, "truncated PLY");
    ++body;

    std::vector<Vec3> verts;
    std::vector<Face> faces;
    const bool ascii = format == "ascii";
    std::istringstream as(ascii ? data.substr(body) : std::string());
    const char* p = data.data() + body;
    const char* end = data.data() + data.size();
    auto next_value = [&](const std::string& type) -> double {
        if (!ascii) return ply_read_binary(p, end, type);
        double v;
        if (!(as >> v)) fail(ErrorCode::Parse, "truncated PLY body");
        return v;
    };

    for (const PlyElement& e : elems) {
        for (std::size_t i = 0; i < e.count; ++i) {
            Vec3 x = Vec3::Zero();
            std::vector<int> idx;
            for (const PlyProperty& prop : e.props) {
                if (prop.is_list) {
                    int n = static_cast<int>(next_value(prop.count_type));
                    std::vector<int> vals(n);
                    for (int k = 0; k < n; ++k) vals[k] = static_cast<int>(next_value(prop.type));
                    if (prop.name == "vertex_indices" || prop.name == "vertex_index") idx = vals;
                } else {
                    double v = next_value(prop.type);
                    if (prop.name == "x") x[0] = v;
                    if (prop.name == "y") x[1] = v;
                    if (prop.name == "z") x[2] = v;
                }
            }
            if (e.name == "vertex") verts.push_back(x);
            if (e.name == "face") {
                if (idx.size() < 3) fail(ErrorCode::Parse, "face with fewer than 3 vertices");
                for (std::size_t k = 1; k + 1 < idx.size(); ++k)
                    faces.push_back({idx[0], idx[k], idx[k + 1]});
            }
        }
    }
    return TriMesh::build(std::move(verts), std::move(faces), opts, report);
}

}  // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj") return MeshFormat::OBJ;
    if (ext == ".ply") return MeshFormat::PLY;
    fail(ErrorCode::Parse, "unknown mesh extension '" + ext + "'");
}

TriMesh parse_obj(const std::string& text, const BuildOptions& opts, BuildReport* report) {
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 x;
            if (!(ls >> x[0] >> x[1] >> x[2]))
                fail(ErrorCode::Parse, "bad vertex on line " + std::to_string(lineno));
            verts.push_back(x);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            const int nv = static_cast<int>(verts.size());
            while (ls >> tok) idx.push_back(obj_index(tok, nv));
            if (idx.size() < 3)
                fail(ErrorCode::Parse, "face with fewer than 3 vertices on line " + std::to_string(lineno));
            for (std::size_t k = 1; k + 1 < idx.size(); ++k)
                faces.push_back({idx[0], idx[k], idx[k + 1]});
        }
    }
    if (verts.empty()) fail(ErrorCode::Parse, "no vertices");
    return TriMesh::build(std::move(verts), std::move(faces), opts, report);
}

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format,
                  const BuildOptions& opts, BuildReport* report) {
    std::string data = read_file(path);
    return format == MeshFormat::OBJ ? parse_obj(data, opts, report)
                                     : parse_ply(data, opts, report);
}

TriMesh load_mesh(const std::filesystem::path& path, const BuildOptions& opts,
                  BuildReport* report) {
    return load_mesh(path, format_from_path(path), opts, report);
}

std::string to_obj(const TriMesh& mesh) {
    std::string out;
    char buf[128];
    for (const Vec3& p : mesh.positions()) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", p[0], p[1], p[2]);
        out += buf;
    }
    for (const Face& f : mesh.faces()) {
        std::snprintf(buf, sizeof buf, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
        out += buf;
    }
    return out;
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out << to_obj(mesh);
}

}  // namespace mcf
